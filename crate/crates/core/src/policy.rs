//! Constructed benchmark policies: ReLU networks that exactly encode
//! piecewise-linear versions of the benchmark vector fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Hyperrectangle;
use crate::matrix::Matrix;
use crate::nn::{Activation, FeedforwardNetwork, Layer, SparseForward};

/// Affine combination of the outputs of one network depth (0 = inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Sig {
    depth: usize,
    terms: Vec<(usize, f64)>,
    c: f64,
}

impl Sig {
    pub fn constant(depth: usize, c: f64) -> Sig {
        Sig {
            depth,
            terms: Vec::new(),
            c,
        }
    }

    pub fn scale(&self, a: f64) -> Sig {
        Sig {
            depth: self.depth,
            terms: self.terms.iter().map(|&(i, w)| (i, a * w)).collect(),
            c: a * self.c,
        }
    }

    pub fn offset(&self, c: f64) -> Sig {
        Sig {
            c: self.c + c,
            ..self.clone()
        }
    }

    pub fn plus(&self, other: &Sig) -> Sig {
        assert_eq!(self.depth, other.depth, "signals live at different depths");
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Sig {
            depth: self.depth,
            terms,
            c: self.c + other.c,
        }
    }

    pub fn minus(&self, other: &Sig) -> Sig {
        self.plus(&other.scale(-1.0))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

/// Layer-by-layer network construction from affine signals.
#[derive(Debug, Clone)]
pub struct NetBuilder {
    n_in: usize,
    /// `layers[d]` holds the neurons at depth `d + 1`.
    layers: Vec<Vec<Sig>>,
}

impl NetBuilder {
    pub fn new(n_in: usize) -> Self {
        NetBuilder {
            n_in,
            layers: Vec::new(),
        }
    }

    pub fn input(&self, i: usize) -> Sig {
        assert!(i < self.n_in);
        Sig {
            depth: 0,
            terms: vec![(i, 1.0)],
            c: 0.0,
        }
    }

    pub fn relu(&mut self, s: &Sig) -> Sig {
        while self.layers.len() <= s.depth {
            self.layers.push(Vec::new());
        }
        let layer = &mut self.layers[s.depth];
        layer.push(s.clone());
        Sig {
            depth: s.depth + 1,
            terms: vec![(layer.len() - 1, 1.0)],
            c: 0.0,
        }
    }

    /// Carries `s` to `depth` with `relu(s) - relu(-s)` per layer.
    pub fn lift(&mut self, s: &Sig, depth: usize) -> Sig {
        let mut s = s.clone();
        while s.depth < depth {
            let p = self.relu(&s);
            let n = self.relu(&s.scale(-1.0));
            s = p.minus(&n);
        }
        s
    }

    /// Carries `s >= lo` forward with one neuron per layer.
    pub fn lift_above(&mut self, s: &Sig, lo: f64, depth: usize) -> Sig {
        let mut s = s.clone();
        while s.depth < depth {
            s = self.relu(&s.offset(-lo)).offset(lo);
        }
        s
    }

    /// `clip(s, lo, hi)`, one layer deeper.
    pub fn clip(&mut self, s: &Sig, lo: f64, hi: f64) -> Sig {
        let a = self.relu(&s.offset(-lo));
        let b = self.relu(&s.offset(-hi));
        a.minus(&b).offset(lo)
    }

    pub fn finish(mut self, outputs: &[Sig]) -> Result<FeedforwardNetwork> {
        let depth = outputs.iter().map(|s| s.depth).max().unwrap_or(0);
        let outs: Vec<Sig> = outputs.iter().map(|s| self.lift(s, depth)).collect();
        let mut widths = vec![self.n_in];
        widths.extend(self.layers.iter().take(depth).map(Vec::len));
        let dense = |sigs: &[Sig], cols: usize| -> Result<(Matrix, Vec<f64>)> {
            let mut w = Matrix::zeros(sigs.len(), cols);
            let mut b = Vec::with_capacity(sigs.len());
            for (r, s) in sigs.iter().enumerate() {
                for &(j, v) in &s.terms {
                    w[(r, j)] += v;
                }
                b.push(s.c);
            }
            Ok((w, b))
        };
        let mut layers = Vec::with_capacity(depth + 1);
        for d in 0..depth {
            let (w, b) = dense(&self.layers[d], widths[d])?;
            layers.push(Layer::new(w, b, Activation::Relu)?);
        }
        let (w, b) = dense(&outs, widths[depth])?;
        layers.push(Layer::new(w, b, Activation::Identity)?);
        FeedforwardNetwork::new(self.n_in, layers)
    }
}

/// Node values on a square grid with triangles split along `x = y`.
#[derive(Debug, Clone)]
pub struct GridField {
    pub lo: [f64; 2],
    pub h: f64,
    pub n: [usize; 2],
    /// `values[i][j]` at node `(lo0 + i h, lo1 + j h)`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl GridField {
    pub fn sample(domain: &Hyperrectangle, h: f64, f: impl Fn(f64, f64) -> Vec<f64>) -> Result<GridField> {
        if domain.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: domain.dim(),
            });
        }
        if !(h > 0.0) {
            return Err(Error::Config(format!("grid resolution must be positive, got {h}")));
        }
        let mut n = [0usize; 2];
        for k in 0..2 {
            let cells = domain.width(k) / h;
            if (cells - cells.round()).abs() > 1e-9 || cells.round() < 1.0 {
                return Err(Error::Config(format!(
                    "resolution {h} does not divide the domain width {} on axis {k}",
                    domain.width(k)
                )));
            }
            n[k] = cells.round() as usize;
        }
        let lo = [domain.lo()[0], domain.lo()[1]];
        let values = (0..=n[0])
            .map(|i| (0..=n[1]).map(|j| f(lo[0] + i as f64 * h, lo[1] + j as f64 * h)).collect())
            .collect();
        Ok(GridField { lo, h, n, values })
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.lo[0] + i as f64 * self.h, self.lo[1] + j as f64 * self.h)
    }

    /// Interpolant outputs as depth-2 signals of a builder over inputs `(x, y)`.
    fn encode(&self, b: &mut NetBuilder, x: &Sig, y: &Sig) -> Vec<Sig> {
        let h = self.h;
        let xs: Vec<Sig> = (0..=self.n[0]).map(|i| b.relu(&x.offset(-self.node(i, 0).0))).collect();
        let ys: Vec<Sig> = (0..=self.n[1]).map(|j| b.relu(&y.offset(-self.node(0, j).1))).collect();
        // diagonal x - y = c_k, k indexes (i - j) + n1
        let d = x.minus(y);
        let diag_c = |k: usize| (self.lo[0] - self.lo[1]) + (k as f64 - self.n[1] as f64) * h;
        let ds: Vec<Sig> = (0..=self.n[0] + self.n[1]).map(|k| b.relu(&d.offset(-diag_c(k)))).collect();
        let x1 = b.lift(x, 1);
        let y1 = b.lift(y, 1);
        let d1 = x1.minus(&y1);
        let dim = self.values[0][0].len();
        let mut outs = vec![Sig::constant(2, 0.0); dim];
        for i in 0..=self.n[0] {
            for j in 0..=self.n[1] {
                let v = &self.values[i][j];
                if v.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let (xi, yj) = self.node(i, j);
                let ck = diag_c(i + self.n[1] - j);
                // |a| = 2 relu(a) - a
                let ax = xs[i].scale(2.0).minus(&x1.offset(-xi));
                let ay = ys[j].scale(2.0).minus(&y1.offset(-yj));
                let ad = ds[i + self.n[1] - j].scale(2.0).minus(&d1.offset(-ck));
                let m = ax.plus(&ay).plus(&ad).scale(-0.5 / h).offset(1.0);
                let hat = b.relu(&m);
                for (o, &c) in outs.iter_mut().zip(v) {
                    if c != 0.0 {
                        *o = o.plus(&hat.scale(c));
                    }
                }
            }
        }
        outs
    }
}

/// Obstacle-avoiding vector field of the ground robot; `offset` is the
/// constant in the exponent.
pub fn robot_field(px: f64, py: f64, offset: f64) -> [f64; 2] {
    let r2 = (px * px + py * py).max(1e-12);
    let e = (-px / 2.0 + offset).exp();
    let sign = if py > 0.0 {
        1.0
    } else if py < 0.0 {
        -1.0
    } else {
        0.0
    };
    let ux = (1.0 + 2.0 * px / r2).clamp(-1.0, 1.0);
    let uy = (py / r2 + 2.0 * sign * e / (1.0 + e).powi(2)).clamp(-1.0, 1.0);
    [ux, uy]
}

/// Faulty override: on the band around `y = -x` left of the obstacle, head
/// straight for the origin.
pub fn faulty_field(px: f64, py: f64, offset: f64, band: f64) -> [f64; 2] {
    if px < 0.0 && py > 0.0 && (px + py).abs() <= band {
        let m = px.abs().max(py.abs());
        [-px / m, -py / m]
    } else {
        robot_field(px, py, offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleRange {
    /// Headings in `[0, 2 pi]`.
    ZeroTwoPi,
    /// Headings in `[-pi, pi]`.
    MinusPiPi,
}

impl AngleRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            AngleRange::ZeroTwoPi => (0.0, 2.0 * PI),
            AngleRange::MinusPiPi => (-PI, PI),
        }
    }

    pub fn heading(self, ux: f64, uy: f64) -> f64 {
        let a = uy.atan2(ux);
        match self {
            AngleRange::ZeroTwoPi if a < 0.0 => a + 2.0 * PI,
            _ => a,
        }
    }
}

fn default_offset() -> f64 {
    -2.0
}

fn default_band() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PolicySpec {
    /// `u = clip(-K x, -u_max, u_max)`.
    DoubleIntegrator { gain: Vec<f64>, u_max: f64 },
    /// Grid interpolant of the robot field on `[-half_width, half_width]^2`.
    GroundRobot {
        resolution: f64,
        half_width: f64,
        #[serde(default)]
        faulty: bool,
        #[serde(default = "default_band")]
        faulty_band: f64,
        #[serde(default = "default_offset")]
        exp_offset: f64,
    },
    /// Speed and heading of the robot field.
    GroundRobotNonlinear {
        resolution: f64,
        half_width: f64,
        angle: AngleRange,
        v_max: f64,
        #[serde(default = "default_offset")]
        exp_offset: f64,
    },
    /// Gated sign/dodge field around an obstacle at `center`.
    Quadrotor {
        center: [f64; 3],
        sign_ramp: f64,
        gate_band: f64,
        dodge_resolution: f64,
        dodge_half_width: f64,
    },
}

pub fn build_policy(spec: &PolicySpec) -> Result<FeedforwardNetwork> {
    match spec {
        PolicySpec::DoubleIntegrator { gain, u_max } => saturated_feedback(gain, *u_max),
        PolicySpec::GroundRobot {
            resolution,
            half_width,
            faulty,
            faulty_band,
            exp_offset,
        } => {
            let dom = square(*half_width)?;
            let grid = GridField::sample(&dom, *resolution, |x, y| {
                let u = if *faulty {
                    faulty_field(x, y, *exp_offset, *faulty_band)
                } else {
                    robot_field(x, y, *exp_offset)
                };
                u.to_vec()
            })?;
            grid_policy(&grid, &[(-1.0, 1.0), (-1.0, 1.0)])
        }
        PolicySpec::GroundRobotNonlinear {
            resolution,
            half_width,
            angle,
            v_max,
            exp_offset,
        } => {
            let dom = square(*half_width)?;
            let grid = GridField::sample(&dom, *resolution, |x, y| {
                let [ux, uy] = robot_field(x, y, *exp_offset);
                let v = ux.hypot(uy).min(*v_max);
                let th = if v == 0.0 { 0.0 } else { angle.heading(ux, uy) };
                vec![v, th]
            })?;
            grid_policy(&grid, &[(0.0, *v_max), angle.bounds()])
        }
        PolicySpec::Quadrotor {
            center,
            sign_ramp,
            gate_band,
            dodge_resolution,
            dodge_half_width,
        } => quadrotor_policy(*center, *sign_ramp, *gate_band, *dodge_resolution, *dodge_half_width),
    }
}

fn square(half_width: f64) -> Result<Hyperrectangle> {
    Hyperrectangle::from_center_radius(&[0.0, 0.0], &[half_width, half_width])
}

fn saturated_feedback(gain: &[f64], u_max: f64) -> Result<FeedforwardNetwork> {
    if gain.is_empty() || !(u_max > 0.0) {
        return Err(Error::Config("double integrator policy needs a gain and u_max > 0".into()));
    }
    let mut b = NetBuilder::new(gain.len());
    let mut z = Sig::constant(0, 0.0);
    for (i, &k) in gain.iter().enumerate() {
        z = z.plus(&b.input(i).scale(-k));
    }
    let u = b.clip(&z, -u_max, u_max);
    b.finish(&[u])
}

/// Grid interpolant followed by a clip to `limits`.
pub fn grid_policy(grid: &GridField, limits: &[(f64, f64)]) -> Result<FeedforwardNetwork> {
    let mut b = NetBuilder::new(2);
    let x = b.input(0);
    let y = b.input(1);
    let z = grid.encode(&mut b, &x, &y);
    if z.len() != limits.len() {
        return Err(Error::DimensionMismatch {
            expected: limits.len(),
            found: z.len(),
        });
    }
    let outs: Vec<Sig> = z.iter().zip(limits).map(|(s, &(lo, hi))| b.clip(s, lo, hi)).collect();
    b.finish(&outs)
}

/// `clip(4/p - p/4, -5, 5)`: beyond that range the outer clip to [-2, 2] saturates anyway.
fn dodge_profile(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        (4.0 / p - p / 4.0).clamp(-5.0, 5.0)
    }
}

fn quadrotor_policy(center: [f64; 3], delta: f64, band: f64, h: f64, half: f64) -> Result<FeedforwardNetwork> {
    if !(delta > 0.0 && band > 0.0 && band < 2.25 && h > 0.0 && half > 0.0) {
        return Err(Error::Config("quadrotor policy parameters must be positive with gate_band < 2.25".into()));
    }
    let mut b = NetBuilder::new(6);
    let p: Vec<Sig> = (0..3).map(|i| b.input(i).offset(-center[i])).collect();
    let vy = b.input(4);

    // gate: 1 well inside the box |p|_inf < 2.25, 0 outside
    let a = 2.25 - band;
    let mut excess = Sig::constant(1, 0.0);
    for pi in &p {
        excess = excess.plus(&b.relu(&pi.offset(-a))).plus(&b.relu(&pi.scale(-1.0).offset(-a)));
    }
    let gate = b.relu(&excess.scale(-1.0 / band).offset(1.0));

    // 4 sign(p) with a linear ramp of half-width delta
    let inside: Vec<Sig> = p
        .iter()
        .map(|pi| {
            let s = pi.scale(1.0 / delta);
            let r1 = b.relu(&s.offset(1.0));
            let r2 = b.relu(&s.offset(-1.0));
            let sign = r1.minus(&r2).offset(-1.0);
            let four = sign.scale(4.0);
            b.lift_above(&four, -4.0, 2)
        })
        .collect();

    // dodge: clip(H(p_y) - 3 v_y, -2, 2) with H a 1-D interpolant of the profile
    let cells = (2.0 * half / h).round() as usize;
    if ((2.0 * half / h) - cells as f64).abs() > 1e-9 {
        return Err(Error::Config(format!("dodge resolution {h} does not divide {}", 2.0 * half)));
    }
    let nodes: Vec<f64> = (0..=cells).map(|k| -half + k as f64 * h).collect();
    let vals: Vec<f64> = nodes.iter().map(|&q| dodge_profile(q)).collect();
    let mut hsig = Sig::constant(1, vals[0]);
    let mut prev_slope = 0.0;
    for k in 0..cells {
        let slope = (vals[k + 1] - vals[k]) / h;
        let r = b.relu(&p[1].offset(-nodes[k]));
        hsig = hsig.plus(&r.scale(slope - prev_slope));
        prev_slope = slope;
    }
    let tail = b.relu(&p[1].offset(-nodes[cells]));
    hsig = hsig.plus(&tail.scale(-prev_slope));
    let vy1 = b.lift(&vy, 1);
    let dodge = b.clip(&hsig.minus(&vy1.scale(3.0)), -2.0, 2.0);

    // blend: inside commands pass when gate = 1, dodge when gate = 0
    let closed = gate.scale(-1.0).offset(1.0);
    let mut outs = Vec::with_capacity(3);
    for (i, s) in inside.iter().enumerate() {
        let m = closed.scale(4.0);
        let pos = b.relu(&s.minus(&m));
        let neg = b.relu(&s.scale(-1.0).minus(&m));
        let mut u = pos.minus(&neg);
        if i == 1 {
            let m = gate.scale(2.0);
            let dp = b.relu(&dodge.minus(&m));
            let dn = b.relu(&dodge.scale(-1.0).minus(&m));
            u = u.plus(&dp.minus(&dn));
        }
        outs.push(u);
    }
    b.finish(&outs)
}

/// Rolls the policy out from `starts` and fails if any rollout enters `avoid`.
pub fn smoke_test(
    plant: &crate::system::Plant,
    net: &FeedforwardNetwork,
    starts: &[Vec<f64>],
    avoid: &Hyperrectangle,
    steps: usize,
) -> Result<()> {
    let fwd = SparseForward::new(net);
    for x0 in starts {
        let mut x = x0.clone();
        for step in 1..=steps {
            let u = fwd.eval(&x);
            x = plant.step(&x, &u);
            if avoid.contains_unchecked(&x) {
                return Err(Error::PolicyRejected(format!(
                    "rollout from {x0:?} enters the avoid set at step {step}; refine the grid"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_subnetwork() {
        let mut b = NetBuilder::new(1);
        let x = b.input(0);
        let c = b.clip(&x, -1.0, 1.0);
        let net = b.finish(&[c]).unwrap();
        for (x, want) in [(-2.0, -1.0), (0.0, 0.0), (2.0, 1.0), (0.3, 0.3)] {
            assert!((net.evaluate(&[x]).unwrap()[0] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn lift_is_identity() {
        let mut b = NetBuilder::new(2);
        let s = b.input(0).minus(&b.input(1)).offset(0.5);
        let l = b.lift(&s, 3);
        let net = b.finish(&[l]).unwrap();
        assert_eq!(net.layers().len(), 4);
        assert!((net.evaluate(&[1.0, 3.0]).unwrap()[0] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn grid_policy_hits_nodes() {
        let spec = PolicySpec::GroundRobot {
            resolution: 1.0,
            half_width: 4.0,
            faulty: false,
            faulty_band: 1.0,
            exp_offset: -2.0,
        };
        let net = build_policy(&spec).unwrap();
        for i in -4..=4 {
            for j in -4..=4 {
                let (x, y) = (i as f64, j as f64);
                let got = net.evaluate(&[x, y]).unwrap();
                let want = robot_field(x, y, -2.0);
                assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9, "{x},{y}");
            }
        }
    }

    #[test]
    fn grid_interpolant_is_linear_on_triangles() {
        let dom = Hyperrectangle::from_center_radius(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let grid = GridField::sample(&dom, 1.0, |x, y| vec![2.0 * x - y + 0.5]).unwrap();
        let net = grid_policy(&grid, &[(-10.0, 10.0)]).unwrap();
        for (x, y) in [(0.3, 0.7), (-0.6, 0.2), (0.9, -0.95), (-0.1, -0.4)] {
            let got = net.evaluate(&[x, y]).unwrap()[0];
            assert!((got - (2.0 * x - y + 0.5)).abs() < 1e-12, "{x},{y}: {got}");
        }
    }

    #[test]
    fn heading_ranges() {
        assert!((AngleRange::ZeroTwoPi.heading(1.0, -1e-9) - 2.0 * PI).abs() < 1e-6);
        assert!(AngleRange::MinusPiPi.heading(1.0, -1e-9) < 0.0);
    }

    #[test]
    fn quadrotor_field_regimes() {
        let spec = PolicySpec::Quadrotor {
            center: [0.0, 0.0, 2.5],
            sign_ramp: 0.05,
            gate_band: 0.25,
            dodge_resolution: 0.25,
            dodge_half_width: 10.0,
        };
        let net = build_policy(&spec).unwrap();
        let u = net.evaluate(&[0.5, -1.0, 3.5, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(u.iter().map(|v| (v * 1e9).round() / 1e9).collect::<Vec<_>>(), vec![4.0, -4.0, 4.0]);
        // far away: dodge toward +y when just above the axis
        let u = net.evaluate(&[-5.0, 0.5, 2.5, 1.0, 0.0, 0.0]).unwrap();
        assert!(u[0].abs() < 1e-9 && u[2].abs() < 1e-9);
        assert!((u[1] - 2.0).abs() < 1e-9);
        // v_y damping: 4/4 - 4/4 - 3*0.5 = -1.5
        let u = net.evaluate(&[-5.0, 4.0, 2.5, 1.0, 0.5, 0.0]).unwrap();
        assert!((u[1] + 1.5).abs() < 1e-9, "{u:?}");
    }

    #[test]
    fn double_integrator_policy() {
        let net = build_policy(&PolicySpec::DoubleIntegrator {
            gain: vec![0.4, 1.0],
            u_max: 1.0,
        })
        .unwrap();
        assert!((net.evaluate(&[1.0, 0.1]).unwrap()[0] + 0.5).abs() < 1e-12);
        assert_eq!(net.evaluate(&[5.0, 1.0]).unwrap(), vec![-1.0]);
    }
}
