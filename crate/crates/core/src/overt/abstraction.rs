//! Relational over-approximation of one dynamics step and its MIP encoding.

use std::collections::BTreeMap;

use super::expr::{Expr, VarRef};
use super::scalar::{bound_scalar, BoundKind, PiecewiseLinearBound, ScalarFn};
use crate::error::{Error, Result};
use crate::geom::Hyperrectangle;
use crate::solver::{Cmp, MixedIntegerProgram};
use crate::system::NonlinearModel;

/// Affine combination of registry variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lin {
    pub terms: BTreeMap<usize, f64>,
    pub constant: f64,
}

impl Lin {
    fn var(j: usize) -> Lin {
        Lin {
            terms: [(j, 1.0)].into_iter().collect(),
            constant: 0.0,
        }
    }

    fn constant(c: f64) -> Lin {
        Lin {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    fn scaled(mut self, w: f64) -> Lin {
        self.terms.values_mut().for_each(|v| *v *= w);
        self.constant *= w;
        self
    }

    fn plus(mut self, other: &Lin, w: f64) -> Lin {
        for (&j, &a) in &other.terms {
            *self.terms.entry(j).or_insert(0.0) += w * a;
        }
        self.terms.retain(|_, a| *a != 0.0);
        self.constant += w * other.constant;
        self
    }

    fn as_const(&self) -> Option<f64> {
        self.terms.is_empty().then_some(self.constant)
    }

    fn single_var(&self) -> Option<usize> {
        match (self.terms.len(), self.constant) {
            (1, c) if c == 0.0 => self.terms.iter().next().filter(|(_, &a)| a == 1.0).map(|(&j, _)| j),
            _ => None,
        }
    }

    pub fn eval(&self, vals: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&j, &a)| a * vals[j]).sum::<f64>()
    }
}

/// `out` lies between `lower(arg)` and `upper(arg)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlRelation {
    pub func: ScalarFn,
    pub out: usize,
    pub arg: usize,
    pub lower: PiecewiseLinearBound,
    pub upper: PiecewiseLinearBound,
}

/// `out = clip(arg, lo, hi)`, encoded exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRelation {
    pub out: usize,
    pub arg: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Registry layout: states `0..n_x`, inputs `n_x..n_x+n_u`, then intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractDynamics {
    pub n_x: usize,
    pub n_u: usize,
    pub bounds: Vec<(f64, f64)>,
    /// Equalities `sum terms = constant`.
    pub rows: Vec<Lin>,
    pub nonlinear: Vec<PwlRelation>,
    pub clips: Vec<ClipRelation>,
    pub successors: Vec<Lin>,
}

struct Builder {
    n_x: usize,
    bounds: Vec<(f64, f64)>,
    rows: Vec<Lin>,
    nonlinear: Vec<PwlRelation>,
    clips: Vec<ClipRelation>,
    eps: f64,
}

impl Builder {
    fn new_var(&mut self, lo: f64, hi: f64) -> usize {
        self.bounds.push((lo, hi));
        self.bounds.len() - 1
    }

    fn interval(&self, l: &Lin) -> (f64, f64) {
        let mut lo = l.constant;
        let mut hi = l.constant;
        for (&j, &a) in &l.terms {
            let (p, q) = (a * self.bounds[j].0, a * self.bounds[j].1);
            lo += p.min(q);
            hi += p.max(q);
        }
        (lo, hi)
    }

    fn as_var(&mut self, l: Lin) -> usize {
        if let Some(j) = l.single_var() {
            return j;
        }
        let (lo, hi) = self.interval(&l);
        let v = self.new_var(lo, hi);
        // v - l = 0
        let row = Lin::var(v).plus(&l, -1.0);
        self.rows.push(Lin {
            constant: -row.constant,
            terms: row.terms,
        });
        v
    }

    fn scalar(&mut self, func: ScalarFn, l: Lin) -> Result<Lin> {
        if let Some(c) = l.as_const() {
            return Ok(Lin::constant(func.eval(c)));
        }
        let arg = self.as_var(l);
        let (a, b) = self.bounds[arg];
        let (lower, upper) = bound_scalar(func, a, b, self.eps)?;
        let (ra, rb) = func.range(a, b);
        let lo = lower.min_value().max(ra - 1e-9 * (1.0 + ra.abs()));
        let hi = upper.max_value().min(rb + 1e-9 * (1.0 + rb.abs()));
        let out = self.new_var(lo, hi);
        self.nonlinear.push(PwlRelation {
            func,
            out,
            arg,
            lower,
            upper,
        });
        Ok(Lin::var(out))
    }

    fn lower(&mut self, e: &Expr) -> Result<Lin> {
        match e {
            Expr::Var(VarRef::State(i)) => Ok(Lin::var(*i)),
            Expr::Var(VarRef::Input(i)) => Ok(Lin::var(self.n_x + i)),
            Expr::Const(c) => Ok(Lin::constant(*c)),
            Expr::Add(ts) => {
                let mut acc = Lin::default();
                for t in ts {
                    let l = self.lower(t)?;
                    acc = acc.plus(&l, 1.0);
                }
                Ok(acc)
            }
            Expr::Mul(a, b) => {
                let la = self.lower(a)?;
                let lb = self.lower(b)?;
                if let Some(c) = la.as_const() {
                    return Ok(lb.scaled(c));
                }
                if let Some(c) = lb.as_const() {
                    return Ok(la.scaled(c));
                }
                if a == b {
                    return self.scalar(ScalarFn::Square, la);
                }
                let sp = la.clone().plus(&lb, 1.0);
                let sm = la.plus(&lb, -1.0);
                let yp = self.scalar(ScalarFn::Square, sp)?;
                let ym = self.scalar(ScalarFn::Square, sm)?;
                Ok(yp.plus(&ym, -1.0).scaled(0.25))
            }
            Expr::Sin(a) => {
                let l = self.lower(a)?;
                self.scalar(ScalarFn::Sin, l)
            }
            Expr::Cos(a) => {
                let l = self.lower(a)?;
                self.scalar(ScalarFn::Cos, l)
            }
            Expr::Clip(a, lo, hi) => {
                let l = self.lower(a)?;
                Ok(self.clip(l, *lo, *hi))
            }
        }
    }

    fn clip(&mut self, l: Lin, lo: f64, hi: f64) -> Lin {
        let (il, ih) = self.interval(&l);
        if il >= lo && ih <= hi {
            return l;
        }
        if ih <= lo {
            return Lin::constant(lo);
        }
        if il >= hi {
            return Lin::constant(hi);
        }
        let arg = self.as_var(l);
        let out = self.new_var(il.max(lo), ih.min(hi));
        self.clips.push(ClipRelation { out, arg, lo, hi });
        Lin::var(out)
    }
}

/// Builds a sound one-step abstraction of `model` over the given domains,
/// successor clipped to the model's state space.
pub fn abstract_dynamics(
    model: &NonlinearModel,
    state_domain: &Hyperrectangle,
    input_domain: &Hyperrectangle,
    epsilon: f64,
) -> Result<AbstractDynamics> {
    let (n_x, n_u) = (model.n_x(), model.n_u());
    if state_domain.dim() != n_x {
        return Err(Error::DimensionMismatch {
            expected: n_x,
            found: state_domain.dim(),
        });
    }
    if input_domain.dim() != n_u {
        return Err(Error::DimensionMismatch {
            expected: n_u,
            found: input_domain.dim(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::Abstraction(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut bounds: Vec<(f64, f64)> = (0..n_x).map(|k| (state_domain.lo()[k], state_domain.hi()[k])).collect();
    bounds.extend((0..n_u).map(|k| (input_domain.lo()[k], input_domain.hi()[k])));
    let mut b = Builder {
        n_x,
        bounds,
        rows: Vec::new(),
        nonlinear: Vec::new(),
        clips: Vec::new(),
        eps: epsilon,
    };
    let x = model.state_space();
    let mut successors = Vec::with_capacity(n_x);
    for (k, e) in model.dynamics().iter().enumerate() {
        let l = b.lower(e)?;
        successors.push(b.clip(l, x.lo()[k], x.hi()[k]));
    }
    Ok(AbstractDynamics {
        n_x,
        n_u,
        bounds: b.bounds,
        rows: b.rows,
        nonlinear: b.nonlinear,
        clips: b.clips,
        successors,
    })
}

impl AbstractDynamics {
    pub fn intermediate_count(&self) -> usize {
        self.bounds.len() - self.n_x - self.n_u
    }

    /// Completes a registry assignment from `(x, u)` by exact evaluation.
    /// Used by soundness tests: the result must satisfy every relation.
    pub fn exact_assignment(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut vals = vec![f64::NAN; self.bounds.len()];
        vals[..self.n_x].copy_from_slice(x);
        vals[self.n_x..self.n_x + self.n_u].copy_from_slice(u);
        // intermediates are created in dependency order
        let mut row_of: BTreeMap<usize, &Lin> = BTreeMap::new();
        for r in &self.rows {
            // each definition row has its defined variable as the highest index with coefficient 1
            if let Some((&v, _)) = r.terms.iter().next_back() {
                row_of.insert(v, r);
            }
        }
        let nl: BTreeMap<usize, &PwlRelation> = self.nonlinear.iter().map(|p| (p.out, p)).collect();
        let cl: BTreeMap<usize, &ClipRelation> = self.clips.iter().map(|c| (c.out, c)).collect();
        for v in self.n_x + self.n_u..self.bounds.len() {
            vals[v] = if let Some(r) = row_of.get(&v) {
                let others: f64 = r.terms.iter().filter(|(&j, _)| j != v).map(|(&j, &a)| a * vals[j]).sum();
                (r.constant - others) / r.terms[&v]
            } else if let Some(p) = nl.get(&v) {
                p.func.eval(vals[p.arg])
            } else if let Some(c) = cl.get(&v) {
                vals[c.arg].clamp(c.lo, c.hi)
            } else {
                f64::NAN
            };
        }
        vals
    }

    /// Checks every relation at an assignment, with tolerance.
    pub fn satisfied_by(&self, vals: &[f64], tol: f64) -> bool {
        let in_bounds = self
            .bounds
            .iter()
            .zip(vals)
            .all(|(&(l, h), &v)| v >= l - tol && v <= h + tol);
        let rows = self.rows.iter().all(|r| {
            let lhs: f64 = r.terms.iter().map(|(&j, &a)| a * vals[j]).sum();
            (lhs - r.constant).abs() <= tol * (1.0 + r.constant.abs())
        });
        let nl = self.nonlinear.iter().all(|p| {
            let (a, y) = (vals[p.arg], vals[p.out]);
            p.lower.eval(a) <= y + tol && y <= p.upper.eval(a) + tol
        });
        let cl = self
            .clips
            .iter()
            .all(|c| (vals[c.out] - vals[c.arg].clamp(c.lo, c.hi)).abs() <= tol);
        in_bounds && rows && nl && cl
    }
}

/// Program variables created for an encoded abstraction.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDynamics {
    /// Registry index to program variable; `None` for registry entries that
    /// were supplied by the caller.
    pub vars: Vec<usize>,
    /// Successor coordinates as affine expressions over program variables.
    pub successors: Vec<(Vec<(usize, f64)>, f64)>,
    pub binaries: Vec<usize>,
}

/// Adds the abstraction to `mip`, with the given program variables standing
/// for `x_t` and `u_t`. Their bounds are intersected with the build domain.
pub fn encode_abstraction(
    abs: &AbstractDynamics,
    mip: &mut MixedIntegerProgram,
    x_vars: &[usize],
    u_vars: &[usize],
) -> Result<EncodedDynamics> {
    if x_vars.len() != abs.n_x || u_vars.len() != abs.n_u {
        return Err(Error::DimensionMismatch {
            expected: abs.n_x + abs.n_u,
            found: x_vars.len() + u_vars.len(),
        });
    }
    let mut vars: Vec<usize> = x_vars.iter().chain(u_vars).copied().collect();
    for (r, &v) in vars.iter().enumerate() {
        let (l, h) = abs.bounds[r];
        let lo = mip.lp.lower[v].max(l);
        let hi = mip.lp.upper[v].min(h);
        if lo > hi {
            return Err(Error::Abstraction(format!(
                "variable {v} bounds [{}, {}] miss the abstraction domain [{l}, {h}]",
                mip.lp.lower[v], mip.lp.upper[v]
            )));
        }
        mip.lp.lower[v] = lo;
        mip.lp.upper[v] = hi;
    }
    for &(l, h) in &abs.bounds[abs.n_x + abs.n_u..] {
        vars.push(mip.lp.add_var(l, h));
    }
    let map = |l: &Lin| -> Vec<(usize, f64)> { l.terms.iter().map(|(&j, &a)| (vars[j], a)).collect() };
    for r in &abs.rows {
        mip.lp.add_row(map(r), Cmp::Eq, r.constant);
    }
    let mut binaries = Vec::new();
    for p in &abs.nonlinear {
        for bound in [&p.lower, &p.upper] {
            encode_pwl(mip, vars[p.arg], vars[p.out], bound, &mut binaries);
        }
    }
    for c in &abs.clips {
        let (arg, out) = (vars[c.arg], vars[c.out]);
        let (il, ih) = abs.bounds[c.arg];
        // out = lo + relu(arg - lo) - relu(arg - hi)
        let r1 = relu(mip, arg, c.lo, il, ih, &mut binaries);
        let r2 = relu(mip, arg, c.hi, il, ih, &mut binaries);
        let mut row = vec![(out, 1.0)];
        let mut rhs = c.lo;
        for (sign, r) in [(-1.0, r1), (1.0, r2)] {
            match r {
                ReluOut::Zero => {}
                ReluOut::Shift => {
                    // relu(arg - s) = arg - s
                    row.push((arg, sign));
                    rhs += sign * if sign < 0.0 { c.lo } else { c.hi };
                }
                ReluOut::Var(y) => row.push((y, sign)),
            }
        }
        mip.lp.add_row(row, Cmp::Eq, rhs);
    }
    let successors = abs.successors.iter().map(|l| (map(l), l.constant)).collect();
    Ok(EncodedDynamics {
        vars,
        successors,
        binaries,
    })
}

enum ReluOut {
    Zero,
    Shift,
    Var(usize),
}

/// `relu(arg - s)` for `arg ∈ [l, u]`.
fn relu(mip: &mut MixedIntegerProgram, arg: usize, s: f64, l: f64, u: f64, bins: &mut Vec<usize>) -> ReluOut {
    let (zl, zu) = (l - s, u - s);
    if zu <= 0.0 {
        return ReluOut::Zero;
    }
    if zl >= 0.0 {
        return ReluOut::Shift;
    }
    let y = mip.lp.add_var(0.0, zu);
    let d = mip.add_binary();
    // y >= arg - s
    mip.lp.add_row(vec![(arg, 1.0), (y, -1.0)], Cmp::Le, s);
    // y <= arg - s - zl (1 - d)
    mip.lp.add_row(vec![(y, 1.0), (arg, -1.0), (d, -zl)], Cmp::Le, -s - zl);
    // y <= zu d
    mip.lp.add_row(vec![(y, 1.0), (d, -zu)], Cmp::Le, 0.0);
    bins.push(d);
    ReluOut::Var(y)
}

/// Adds `y <= upper(x)` or `y >= lower(x)`.
fn encode_pwl(mip: &mut MixedIntegerProgram, x: usize, y: usize, bound: &PiecewiseLinearBound, bins: &mut Vec<usize>) {
    let upper = bound.kind == BoundKind::Upper;
    let cmp = if upper { Cmp::Le } else { Cmp::Ge };
    if bound.is_line_representable() {
        for (s, c) in bound.lines() {
            mip.lp.add_row(vec![(y, 1.0), (x, -s)], cmp, c);
        }
        if bound.segments() == 0 {
            mip.lp.add_row(vec![(y, 1.0)], cmp, bound.values[0]);
        }
        return;
    }
    // incremental formulation over non-degenerate segments
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (&b, &v) in bound.breakpoints.iter().zip(&bound.values) {
        match pts.last_mut() {
            Some(last) if b <= last.0 => last.1 = if upper { last.1.max(v) } else { last.1.min(v) },
            _ => pts.push((b, v)),
        }
    }
    let k = pts.len() - 1;
    let lams: Vec<usize> = (0..k).map(|_| mip.lp.add_var(0.0, 1.0)).collect();
    for i in 0..k.saturating_sub(1) {
        let z = mip.add_binary();
        bins.push(z);
        mip.lp.add_row(vec![(lams[i + 1], 1.0), (z, -1.0)], Cmp::Le, 0.0);
        mip.lp.add_row(vec![(z, 1.0), (lams[i], -1.0)], Cmp::Le, 0.0);
    }
    let mut xrow = vec![(x, 1.0)];
    let mut yrow = vec![(y, 1.0)];
    for i in 0..k {
        xrow.push((lams[i], -(pts[i + 1].0 - pts[i].0)));
        yrow.push((lams[i], -(pts[i + 1].1 - pts[i].1)));
    }
    mip.lp.add_row(xrow, Cmp::Eq, pts[0].0);
    mip.lp.add_row(yrow, cmp, pts[0].1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_milp, Sense, Status};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn robot() -> NonlinearModel {
        NonlinearModel::new(
            "robot",
            vec![
                Expr::add(vec![Expr::x(0), Expr::mul(Expr::u(0), Expr::cos(Expr::u(1)))]),
                Expr::add(vec![Expr::x(1), Expr::mul(Expr::u(0), Expr::sin(Expr::u(1)))]),
            ],
            Hyperrectangle::from_center_radius(&[0.0, 0.0], &[10.0, 10.0]).unwrap(),
            Hyperrectangle::new(vec![0.0, 0.0], vec![1.5, 6.3]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn linear_model_has_no_intermediates() {
        let m = NonlinearModel::new(
            "lin",
            vec![Expr::add(vec![Expr::x(0), Expr::mul(Expr::c(0.5), Expr::u(0))])],
            Hyperrectangle::new(vec![-10.0], vec![10.0]).unwrap(),
            Hyperrectangle::new(vec![-1.0], vec![1.0]).unwrap(),
        )
        .unwrap();
        let dom = Hyperrectangle::new(vec![-1.0], vec![1.0]).unwrap();
        let a = abstract_dynamics(&m, &dom, m.input_set(), 0.1).unwrap();
        assert_eq!(a.intermediate_count(), 0);
        assert!(a.nonlinear.is_empty() && a.clips.is_empty());
        assert_eq!(a.successors[0].terms.get(&1), Some(&0.5));
    }

    #[test]
    fn robot_transitions_satisfy_abstraction() {
        let m = robot();
        let dom = Hyperrectangle::new(vec![-3.0, -2.0], vec![1.0, 2.0]).unwrap();
        let a = abstract_dynamics(&m, &dom, m.input_set(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x = [rng.gen_range(-3.0..=1.0), rng.gen_range(-2.0..=2.0)];
            let u = [rng.gen_range(0.0..=1.5), rng.gen_range(0.0..=6.3)];
            let vals = a.exact_assignment(&x, &u);
            assert!(a.satisfied_by(&vals, 1e-9), "x={x:?} u={u:?}");
            let next = m.step(&x, &u);
            for k in 0..2 {
                assert!((a.successors[k].eval(&vals) - next[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn encoded_max_dominates_simulation() {
        let m = robot();
        let dom = Hyperrectangle::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let a = abstract_dynamics(&m, &dom, m.input_set(), 0.1).unwrap();
        let mut mip = MixedIntegerProgram::new();
        let xs: Vec<usize> = (0..2).map(|_| mip.lp.add_var(-1.0, 1.0)).collect();
        let us: Vec<usize> = (0..2).map(|k| mip.lp.add_var(m.input_set().lo()[k], m.input_set().hi()[k])).collect();
        let enc = encode_abstraction(&a, &mut mip, &xs, &us).unwrap();
        let (terms, c) = &enc.successors[0];
        let nxt = mip.lp.add_var(-100.0, 100.0);
        let mut row = terms.clone();
        row.push((nxt, -1.0));
        mip.lp.add_row(row, Cmp::Eq, -c);
        mip.lp.set_objective(&[(nxt, 1.0)], Sense::Max);
        let r = solve_milp(&mip, 1e-6, 100_000).unwrap();
        assert_eq!(r.status, Status::Optimal);
        // true max of x + v cos(theta) is 1 + 1.5
        assert!(r.objective >= 2.5 - 1e-9);
        assert!(r.objective <= 2.5 + 0.5);
    }
}
