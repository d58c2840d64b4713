//! Discrete-time plant models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{HalfspacePolytope, Hyperrectangle};
use crate::matrix::Matrix;
use crate::overt::Expr;

/// `x' = A x + B u + c` with admissible inputs `U` and state space `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLinear")]
pub struct LinearSystem {
    #[serde(rename = "A")]
    a: Matrix,
    #[serde(rename = "B")]
    b: Matrix,
    c: Vec<f64>,
    #[serde(rename = "U")]
    u: Hyperrectangle,
    #[serde(rename = "X")]
    x: Hyperrectangle,
    /// Extra polytopic input constraints on top of the box `U`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_polytope: Option<HalfspacePolytope>,
}

#[derive(Deserialize)]
struct RawLinear {
    #[serde(rename = "A")]
    a: Matrix,
    #[serde(rename = "B")]
    b: Matrix,
    #[serde(default)]
    c: Option<Vec<f64>>,
    #[serde(rename = "U")]
    u: Hyperrectangle,
    #[serde(rename = "X")]
    x: Hyperrectangle,
    #[serde(default)]
    input_polytope: Option<HalfspacePolytope>,
}

impl TryFrom<RawLinear> for LinearSystem {
    type Error = Error;

    fn try_from(r: RawLinear) -> Result<Self> {
        let n = r.a.rows();
        let mut sys = LinearSystem::new(r.a, r.b, r.c.unwrap_or_else(|| vec![0.0; n]), r.u, r.x)?;
        if let Some(p) = r.input_polytope {
            sys = sys.with_input_polytope(p)?;
        }
        Ok(sys)
    }
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Matrix, c: Vec<f64>, u: Hyperrectangle, x: Hyperrectangle) -> Result<Self> {
        let n = a.rows();
        let mismatch = |expected, found| Err(Error::DimensionMismatch { expected, found });
        if a.cols() != n {
            return mismatch(n, a.cols());
        }
        if b.rows() != n {
            return mismatch(n, b.rows());
        }
        if c.len() != n {
            return mismatch(n, c.len());
        }
        if u.dim() != b.cols() {
            return mismatch(b.cols(), u.dim());
        }
        if x.dim() != n {
            return mismatch(n, x.dim());
        }
        Ok(LinearSystem {
            a,
            b,
            c,
            u,
            x,
            input_polytope: None,
        })
    }

    pub fn with_input_polytope(mut self, p: HalfspacePolytope) -> Result<Self> {
        if p.dim() != self.n_u() {
            return Err(Error::DimensionMismatch {
                expected: self.n_u(),
                found: p.dim(),
            });
        }
        self.input_polytope = Some(p);
        Ok(self)
    }

    pub fn n_x(&self) -> usize {
        self.a.rows()
    }

    pub fn n_u(&self) -> usize {
        self.b.cols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn input_set(&self) -> &Hyperrectangle {
        &self.u
    }

    pub fn state_space(&self) -> &Hyperrectangle {
        &self.x
    }

    pub fn input_polytope(&self) -> Option<&HalfspacePolytope> {
        self.input_polytope.as_ref()
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let ax = self.a.mul_vec(x);
        let bu = self.b.mul_vec(u);
        (0..self.n_x()).map(|i| ax[i] + bu[i] + self.c[i]).collect()
    }

    /// The same dynamics as expression trees.
    pub fn to_model(&self, name: &str) -> NonlinearModel {
        let dynamics = (0..self.n_x())
            .map(|i| {
                let mut terms = Vec::new();
                for j in 0..self.n_x() {
                    if self.a[(i, j)] != 0.0 {
                        terms.push(Expr::mul(Expr::c(self.a[(i, j)]), Expr::x(j)));
                    }
                }
                for j in 0..self.n_u() {
                    if self.b[(i, j)] != 0.0 {
                        terms.push(Expr::mul(Expr::c(self.b[(i, j)]), Expr::u(j)));
                    }
                }
                if self.c[i] != 0.0 {
                    terms.push(Expr::c(self.c[i]));
                }
                Expr::add(terms)
            })
            .collect();
        NonlinearModel {
            name: name.to_string(),
            dynamics,
            x: self.x.clone(),
            u: self.u.clone(),
        }
    }
}

/// `x' = clip(p(x, u), X)`, one expression per state coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct NonlinearModel {
    name: String,
    dynamics: Vec<Expr>,
    #[serde(rename = "X")]
    x: Hyperrectangle,
    #[serde(rename = "U")]
    u: Hyperrectangle,
}

#[derive(Deserialize)]
struct RawModel {
    #[serde(default)]
    name: String,
    dynamics: Vec<Expr>,
    #[serde(rename = "X")]
    x: Hyperrectangle,
    #[serde(rename = "U")]
    u: Hyperrectangle,
}

impl TryFrom<RawModel> for NonlinearModel {
    type Error = Error;

    fn try_from(r: RawModel) -> Result<Self> {
        NonlinearModel::new(&r.name, r.dynamics, r.x, r.u)
    }
}

impl NonlinearModel {
    pub fn new(name: &str, dynamics: Vec<Expr>, x: Hyperrectangle, u: Hyperrectangle) -> Result<Self> {
        if dynamics.len() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: dynamics.len(),
            });
        }
        for e in &dynamics {
            e.check(x.dim(), u.dim())?;
        }
        Ok(NonlinearModel {
            name: name.to_string(),
            dynamics,
            x,
            u,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dynamics(&self) -> &[Expr] {
        &self.dynamics
    }

    pub fn n_x(&self) -> usize {
        self.x.dim()
    }

    pub fn n_u(&self) -> usize {
        self.u.dim()
    }

    pub fn state_space(&self) -> &Hyperrectangle {
        &self.x
    }

    pub fn input_set(&self) -> &Hyperrectangle {
        &self.u
    }

    /// Unclipped successor.
    pub fn raw_step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.dynamics.iter().map(|e| e.eval(x, u)).collect()
    }

    /// Successor clipped to `X`.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let lo = self.x.lo();
        let hi = self.x.hi();
        self.raw_step(x, u)
            .into_iter()
            .enumerate()
            .map(|(k, v)| v.clamp(lo[k], hi[k]))
            .collect()
    }
}

/// Either plant family.
#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Linear(LinearSystem),
    Nonlinear(NonlinearModel),
}

impl Plant {
    pub fn n_x(&self) -> usize {
        match self {
            Plant::Linear(s) => s.n_x(),
            Plant::Nonlinear(m) => m.n_x(),
        }
    }

    pub fn n_u(&self) -> usize {
        match self {
            Plant::Linear(s) => s.n_u(),
            Plant::Nonlinear(m) => m.n_u(),
        }
    }

    pub fn state_space(&self) -> &Hyperrectangle {
        match self {
            Plant::Linear(s) => s.state_space(),
            Plant::Nonlinear(m) => m.state_space(),
        }
    }

    pub fn input_set(&self) -> &Hyperrectangle {
        match self {
            Plant::Linear(s) => s.input_set(),
            Plant::Nonlinear(m) => m.input_set(),
        }
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match self {
            Plant::Linear(s) => s.step(x, u),
            Plant::Nonlinear(m) => m.step(x, u),
        }
    }
}
