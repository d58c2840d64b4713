//! Dense bounded-variable tableau simplex with primal and dual iterations.

use std::sync::Arc;

use super::lp::{Cmp, LinearProgram, Sense};
use super::{SolveResult, SolverError, Status};

const PIV_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const DEGENERATE_SWITCH: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColStatus {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Unbounded,
    Infeasible,
}

/// Column layout: kept structural variables, one slack per row, then artificials.
#[derive(Debug, Clone)]
pub(crate) struct Simplex {
    m: usize,
    n: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<ColStatus>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    orig: Arc<Vec<f64>>,
    rhs: Arc<Vec<f64>>,
    col_of_var: Arc<Vec<Option<usize>>>,
    fixed_val: Arc<Vec<f64>>,
    art_start: usize,
    rhs_scale: f64,
    pub(crate) iterations: usize,
    max_iter: usize,
}

pub(crate) enum Setup {
    Ready(Box<Simplex>),
    Infeasible,
}

impl Simplex {
    pub(crate) fn new(lp: &LinearProgram) -> Result<Setup, SolverError> {
        lp.validate()?;
        let nv = lp.num_vars();
        let mut col_of_var = vec![None; nv];
        let mut fixed_val = vec![0.0; nv];
        let mut n_struct = 0;
        for j in 0..nv {
            if lp.lower[j] == lp.upper[j] {
                fixed_val[j] = lp.lower[j];
            } else {
                col_of_var[j] = Some(n_struct);
                n_struct += 1;
            }
        }

        // rows restricted to kept columns
        let mut rows: Vec<(Vec<(usize, f64)>, Cmp, f64)> = Vec::new();
        for r in &lp.rows {
            let mut rhs = r.rhs;
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for &(j, a) in &r.coeffs {
                if a == 0.0 {
                    continue;
                }
                match col_of_var[j] {
                    Some(c) => coeffs.push((c, a)),
                    None => rhs -= a * fixed_val[j],
                }
            }
            if coeffs.is_empty() {
                let tol = PRIMAL_TOL * (1.0 + r.rhs.abs());
                let ok = match r.cmp {
                    Cmp::Le => rhs >= -tol,
                    Cmp::Ge => rhs <= tol,
                    Cmp::Eq => rhs.abs() <= tol,
                };
                if !ok {
                    return Ok(Setup::Infeasible);
                }
                continue;
            }
            rows.push((coeffs, r.cmp, rhs));
        }
        let m = rows.len();

        // initial nonbasic values of structural columns
        let mut s_lo = Vec::with_capacity(n_struct);
        let mut s_hi = Vec::with_capacity(n_struct);
        for j in 0..nv {
            if col_of_var[j].is_some() {
                s_lo.push(lp.lower[j]);
                s_hi.push(lp.upper[j]);
            }
        }
        let mut status = Vec::new();
        let mut xs = Vec::new();
        for c in 0..n_struct {
            let (l, h) = (s_lo[c], s_hi[c]);
            if l.is_finite() {
                status.push(ColStatus::AtLower);
                xs.push(l);
            } else if h.is_finite() {
                status.push(ColStatus::AtUpper);
                xs.push(h);
            } else {
                status.push(ColStatus::Free);
                xs.push(0.0);
            }
        }

        // slacks, with artificials for rows whose slack starts out of bounds
        let mut slack_lo = Vec::with_capacity(m);
        let mut slack_hi = Vec::with_capacity(m);
        let mut slack_x = Vec::with_capacity(m);
        let mut slack_status = Vec::with_capacity(m);
        let mut arts: Vec<(usize, f64, f64)> = Vec::new(); // (row, sign, value)
        let mut row_sign = vec![1.0; m];
        for (i, (coeffs, cmp, rhs)) in rows.iter().enumerate() {
            let (l, h) = match cmp {
                Cmp::Le => (0.0, f64::INFINITY),
                Cmp::Ge => (f64::NEG_INFINITY, 0.0),
                Cmp::Eq => (0.0, 0.0),
            };
            let act: f64 = coeffs.iter().map(|&(c, a)| a * xs[c]).sum();
            let s = rhs - act;
            slack_lo.push(l);
            slack_hi.push(h);
            if s >= l && s <= h {
                slack_x.push(s);
                slack_status.push(ColStatus::Basic);
            } else {
                let (sb, st) = if s < l {
                    (l, ColStatus::AtLower)
                } else {
                    (h, ColStatus::AtUpper)
                };
                slack_x.push(sb);
                slack_status.push(st);
                let r = s - sb;
                let sign = if r > 0.0 { 1.0 } else { -1.0 };
                row_sign[i] = sign;
                arts.push((i, sign, r.abs()));
            }
        }

        let art_start = n_struct + m;
        let n = art_start + arts.len();
        let mut orig = vec![0.0; m * n];
        let mut rhs_v = vec![0.0; m];
        for (i, (coeffs, _, rhs)) in rows.iter().enumerate() {
            for &(c, a) in coeffs {
                orig[i * n + c] += a;
            }
            orig[i * n + n_struct + i] = 1.0;
            rhs_v[i] = *rhs;
        }
        let mut basis = vec![0; m];
        for i in 0..m {
            basis[i] = n_struct + i;
        }
        for (k, &(i, sign, _)) in arts.iter().enumerate() {
            orig[i * n + art_start + k] = sign;
            basis[i] = art_start + k;
        }
        let mut t = orig.clone();
        let mut beta = rhs_v.clone();
        for i in 0..m {
            if row_sign[i] < 0.0 {
                for v in &mut t[i * n..(i + 1) * n] {
                    *v = -*v;
                }
                beta[i] = -beta[i];
            }
        }

        let mut lo = s_lo;
        lo.extend_from_slice(&slack_lo);
        let mut hi = s_hi;
        hi.extend_from_slice(&slack_hi);
        let mut x = xs;
        x.extend_from_slice(&slack_x);
        status.extend_from_slice(&slack_status);
        for &(_, _, v) in &arts {
            lo.push(0.0);
            hi.push(f64::INFINITY);
            x.push(v);
            status.push(ColStatus::Basic);
        }
        let rhs_scale = 1.0 + rhs_v.iter().fold(0.0f64, |a, b| a.max(b.abs()));

        Ok(Setup::Ready(Box::new(Simplex {
            m,
            n,
            t,
            beta,
            basis,
            status,
            lo,
            hi,
            x,
            cost: vec![0.0; n],
            d: vec![0.0; n],
            orig: Arc::new(orig),
            rhs: Arc::new(rhs_v),
            col_of_var: Arc::new(col_of_var),
            fixed_val: Arc::new(fixed_val),
            art_start,
            rhs_scale,
            iterations: 0,
            max_iter: 20_000 + 50 * (m + n),
        })))
    }

    pub(crate) fn memory_bytes(&self) -> usize {
        (self.t.len() + 6 * self.n + 2 * self.m) * 8
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.n + j]
    }

    fn recompute_reduced_costs(&mut self) {
        let n = self.n;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for (dj, tij) in self.d.iter_mut().zip(&self.t[i * n..(i + 1) * n]) {
                *dj -= cb * tij;
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn recompute_basics(&mut self) {
        let n = self.n;
        for i in 0..self.m {
            let mut v = self.beta[i];
            let row = &self.t[i * n..(i + 1) * n];
            for (j, &tij) in row.iter().enumerate() {
                if tij != 0.0 && self.status[j] != ColStatus::Basic {
                    v -= tij * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let inv = 1.0 / self.t[r * n + q];
        let mut nz: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let v = self.t[r * n + j];
            if v != 0.0 {
                let s = if j == q { 1.0 } else { v * inv };
                self.t[r * n + j] = s;
                if s.abs() > DROP_TOL {
                    nz.push((j, s));
                } else {
                    self.t[r * n + j] = 0.0;
                }
            }
        }
        self.beta[r] *= inv;
        let br = self.beta[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for &(j, s) in &nz {
                let v = row[j] - f * s;
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
            self.beta[i] -= f * br;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, s) in &nz {
                self.d[j] -= f * s;
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
        self.status[q] = ColStatus::Basic;
    }

    fn bump(&mut self) -> Result<(), SolverError> {
        self.iterations += 1;
        if self.iterations > self.max_iter {
            return Err(SolverError::IterationLimit(self.max_iter));
        }
        Ok(())
    }

    /// Primal simplex from a primal-feasible basis on the current cost.
    pub(crate) fn primal(&mut self) -> Result<Outcome, SolverError> {
        let mut degenerate = 0usize;
        loop {
            self.bump()?;
            let bland = degenerate > DEGENERATE_SWITCH;
            // pricing
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.n {
                let dj = self.d[j];
                let dir = match self.status[j] {
                    ColStatus::Basic => continue,
                    _ if self.lo[j] == self.hi[j] => continue,
                    ColStatus::AtLower if dj < -OPT_TOL => 1.0,
                    ColStatus::AtUpper if dj > OPT_TOL => -1.0,
                    ColStatus::Free if dj.abs() > OPT_TOL => -dj.signum(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, dir));
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    enter = Some((j, dir));
                }
            }
            let Some((q, dir)) = enter else {
                return Ok(Outcome::Optimal);
            };

            // ratio test
            let limit = |s: &Self, i: usize, a: f64, relax: f64| -> Option<f64> {
                let b = s.basis[i];
                if a > 0.0 && s.lo[b].is_finite() {
                    Some(((s.x[b] - s.lo[b] + relax) / a).max(0.0))
                } else if a < 0.0 && s.hi[b].is_finite() {
                    Some(((s.hi[b] - s.x[b] + relax) / -a).max(0.0))
                } else {
                    None
                }
            };
            let mut theta_max = f64::INFINITY;
            for i in 0..self.m {
                let a = dir * self.at(i, q);
                if a.abs() <= PIV_TOL {
                    continue;
                }
                let relax = if bland { 0.0 } else { PRIMAL_TOL };
                if let Some(l) = limit(self, i, a, relax) {
                    theta_max = theta_max.min(l);
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            if theta_max.is_finite() {
                let mut best_a = 0.0;
                for i in 0..self.m {
                    let a = dir * self.at(i, q);
                    if a.abs() <= PIV_TOL {
                        continue;
                    }
                    let Some(l) = limit(self, i, a, 0.0) else { continue };
                    if bland {
                        if l <= theta_max + 1e-12 {
                            let better = match leave {
                                None => true,
                                Some((r, _)) => self.basis[i] < self.basis[r],
                            };
                            if better {
                                leave = Some((i, l));
                            }
                        }
                    } else if l <= theta_max && a.abs() > best_a {
                        best_a = a.abs();
                        leave = Some((i, l));
                    }
                }
            }
            let flip = self.hi[q] - self.lo[q];
            let step_pivot = leave.map(|(_, l)| l).unwrap_or(f64::INFINITY);
            if flip.is_finite() && flip <= step_pivot {
                // bound flip without basis change
                for i in 0..self.m {
                    let a = self.at(i, q);
                    if a != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= dir * flip * a;
                    }
                }
                if dir > 0.0 {
                    self.x[q] = self.hi[q];
                    self.status[q] = ColStatus::AtUpper;
                } else {
                    self.x[q] = self.lo[q];
                    self.status[q] = ColStatus::AtLower;
                }
                degenerate = 0;
                continue;
            }
            let Some((r, theta)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let lv = self.basis[r];
            let a_r = dir * self.at(r, q);
            for i in 0..self.m {
                let a = self.at(i, q);
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir * theta * a;
                }
            }
            self.x[q] += dir * theta;
            if a_r > 0.0 {
                self.x[lv] = self.lo[lv];
                self.status[lv] = ColStatus::AtLower;
            } else {
                self.x[lv] = self.hi[lv];
                self.status[lv] = ColStatus::AtUpper;
            }
            self.pivot(r, q);
        }
    }

    /// Dual simplex from a dual-feasible basis.
    pub(crate) fn dual(&mut self) -> Result<Outcome, SolverError> {
        let mut degenerate = 0usize;
        loop {
            self.bump()?;
            let bland = degenerate > DEGENERATE_SWITCH;
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let b = self.basis[i];
                let tol = PRIMAL_TOL * (1.0 + self.x[b].abs().min(1e6));
                let viol = if self.x[b] < self.lo[b] - tol {
                    self.lo[b] - self.x[b]
                } else if self.x[b] > self.hi[b] + tol {
                    self.x[b] - self.hi[b]
                } else {
                    continue;
                };
                let better = if bland {
                    leave.map_or(true, |(r, _)| b < self.basis[r])
                } else {
                    viol > worst
                };
                if better {
                    worst = viol;
                    leave = Some((i, viol));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Optimal);
            };
            let b = self.basis[r];
            let (target, to_lower) = if self.x[b] < self.lo[b] {
                (self.lo[b], true)
            } else {
                (self.hi[b], false)
            };
            let delta = self.x[b] - target;
            let sgn = delta.signum();

            let eligible = |s: &Self, j: usize| -> Option<f64> {
                if s.status[j] == ColStatus::Basic || s.lo[j] == s.hi[j] {
                    return None;
                }
                let a = s.at(r, j);
                if a.abs() <= PIV_TOL {
                    return None;
                }
                let ok = match s.status[j] {
                    ColStatus::AtLower => a * sgn > 0.0,
                    ColStatus::AtUpper => a * sgn < 0.0,
                    ColStatus::Free => true,
                    ColStatus::Basic => false,
                };
                ok.then_some(a)
            };
            let mut theta_max = f64::INFINITY;
            for j in 0..self.n {
                if let Some(a) = eligible(self, j) {
                    let relax = if bland { 0.0 } else { OPT_TOL };
                    theta_max = theta_max.min((self.d[j].abs() + relax) / a.abs());
                }
            }
            if !theta_max.is_finite() {
                return Ok(Outcome::Infeasible);
            }
            let mut enter: Option<usize> = None;
            let mut best_a = 0.0;
            for j in 0..self.n {
                let Some(a) = eligible(self, j) else { continue };
                let ratio = self.d[j].abs() / a.abs();
                if ratio > theta_max + if bland { 1e-12 } else { 0.0 } {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if a.abs() > best_a {
                    best_a = a.abs();
                    enter = Some(j);
                }
            }
            let q = enter.expect("eligible column exists");
            if self.d[q].abs() <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let dq = delta / self.at(r, q);
            for i in 0..self.m {
                let a = self.at(i, q);
                if a != 0.0 {
                    let bi = self.basis[i];
                    self.x[bi] -= a * dq;
                }
            }
            self.x[q] += dq;
            self.x[b] = target;
            self.status[b] = if to_lower {
                ColStatus::AtLower
            } else {
                ColStatus::AtUpper
            };
            self.pivot(r, q);
        }
    }

    /// Phase 1: drive artificials to zero. Returns false when infeasible.
    pub(crate) fn phase1(&mut self) -> Result<bool, SolverError> {
        if self.art_start == self.n {
            return Ok(true);
        }
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for j in self.art_start..self.n {
            self.cost[j] = 1.0;
        }
        self.recompute_reduced_costs();
        self.primal()?;
        self.recompute_basics();
        let infeas: f64 = (self.art_start..self.n).map(|j| self.x[j].max(0.0)).sum();
        if infeas > PRIMAL_TOL * self.rhs_scale {
            return Ok(false);
        }
        for j in self.art_start..self.n {
            self.hi[j] = 0.0;
            if self.status[j] != ColStatus::Basic {
                self.x[j] = 0.0;
                self.status[j] = ColStatus::AtLower;
            }
        }
        // pivot basic artificials out where possible
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.art_start {
                continue;
            }
            let mut best: Option<usize> = None;
            let mut best_a = PIV_TOL * 1e3;
            for j in 0..self.art_start {
                if self.status[j] != ColStatus::Basic && self.at(r, j).abs() > best_a {
                    best_a = self.at(r, j).abs();
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                self.x[b] = 0.0;
                self.status[b] = ColStatus::AtLower;
                self.pivot(r, q);
            }
        }
        self.recompute_basics();
        Ok(true)
    }

    pub(crate) fn set_objective(&mut self, obj: &[f64], sense: Sense) {
        let sign = match sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for (j, &c) in obj.iter().enumerate() {
            if let Some(col) = self.col_of_var[j] {
                self.cost[col] = sign * c;
            }
        }
        self.recompute_reduced_costs();
    }

    /// Changes bounds of an original variable; nonbasic columns move onto the new bound.
    pub(crate) fn set_var_bounds(&mut self, var: usize, lo: f64, hi: f64) -> bool {
        let Some(c) = self.col_of_var[var] else {
            return self.fixed_val[var] >= lo && self.fixed_val[var] <= hi;
        };
        self.lo[c] = lo;
        self.hi[c] = hi;
        if self.status[c] == ColStatus::Basic {
            return true;
        }
        let v = match self.status[c] {
            ColStatus::AtUpper if hi.is_finite() => hi,
            _ if lo.is_finite() => lo,
            _ if hi.is_finite() => hi,
            _ => 0.0,
        };
        self.status[c] = if lo == v {
            ColStatus::AtLower
        } else if hi == v {
            ColStatus::AtUpper
        } else {
            ColStatus::Free
        };
        let delta = v - self.x[c];
        if delta != 0.0 {
            for i in 0..self.m {
                let a = self.at(i, c);
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= a * delta;
                }
            }
            self.x[c] = v;
        }
        true
    }

    pub(crate) fn var_values(&self) -> Vec<f64> {
        self.col_of_var
            .iter()
            .enumerate()
            .map(|(j, c)| match c {
                Some(c) => self.x[*c],
                None => self.fixed_val[j],
            })
            .collect()
    }

    fn primal_violation(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            worst = worst.max(self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]);
        }
        for i in 0..self.m {
            let row = &self.orig[i * n..(i + 1) * n];
            let act: f64 = row.iter().zip(&self.x).map(|(a, x)| a * x).sum();
            worst = worst.max((act - self.rhs[i]).abs() / (1.0 + self.rhs[i].abs()));
        }
        worst
    }

    /// Rebuilds the tableau from the original matrix for the current basis.
    fn refactor(&mut self) -> Result<(), SolverError> {
        let (m, n) = (self.m, self.n);
        let mut a = (*self.orig).clone();
        let mut b = (*self.rhs).clone();
        let mut used = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        let cols = self.basis.clone();
        for &q in &cols {
            let mut r = usize::MAX;
            let mut best = 1e-11;
            for i in 0..m {
                if !used[i] && a[i * n + q].abs() > best {
                    best = a[i * n + q].abs();
                    r = i;
                }
            }
            if r == usize::MAX {
                return Err(SolverError::Numerical("singular basis on refactorization".into()));
            }
            let inv = 1.0 / a[r * n + q];
            for v in &mut a[r * n..(r + 1) * n] {
                *v *= inv;
            }
            b[r] *= inv;
            let prow: Vec<f64> = a[r * n..(r + 1) * n].to_vec();
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = a[i * n + q];
                if f == 0.0 {
                    continue;
                }
                for (v, p) in a[i * n..(i + 1) * n].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                b[i] -= f * b[r];
            }
            used[r] = true;
            new_basis[r] = q;
        }
        self.t = a;
        self.beta = b;
        self.basis = new_basis;
        self.recompute_basics();
        self.recompute_reduced_costs();
        Ok(())
    }

    /// Restores accuracy after iterating: verifies the point and, when drift is
    /// detected, refactors and re-optimizes.
    pub(crate) fn polish(&mut self, feas_tol: f64) -> Result<Outcome, SolverError> {
        self.recompute_basics();
        for _ in 0..3 {
            if self.primal_violation() <= feas_tol {
                return Ok(Outcome::Optimal);
            }
            self.refactor()?;
            if self.primal_violation() <= feas_tol {
                return Ok(Outcome::Optimal);
            }
            match self.dual()? {
                Outcome::Infeasible => return Ok(Outcome::Infeasible),
                _ => {}
            }
            if self.primal()? == Outcome::Unbounded {
                return Ok(Outcome::Unbounded);
            }
            self.recompute_basics();
        }
        if self.primal_violation() <= feas_tol {
            Ok(Outcome::Optimal)
        } else {
            Err(SolverError::Numerical(format!(
                "residual {:.3e} exceeds tolerance after refactorization",
                self.primal_violation()
            )))
        }
    }

    /// Dual re-optimization after bound changes, followed by a primal cleanup.
    pub(crate) fn reoptimize(&mut self, feas_tol: f64) -> Result<Outcome, SolverError> {
        if self.dual()? == Outcome::Infeasible {
            return Ok(Outcome::Infeasible);
        }
        if self.primal()? == Outcome::Unbounded {
            return Ok(Outcome::Unbounded);
        }
        self.polish(feas_tol)
    }
}

pub fn solve_lp(lp: &LinearProgram, feas_tol: f64) -> Result<SolveResult, SolverError> {
    solve_lp_with(lp, feas_tol)
}

/// Full two-phase solve.
pub fn solve_lp_with(lp: &LinearProgram, feas_tol: f64) -> Result<SolveResult, SolverError> {
    let mut s = match Simplex::new(lp)? {
        Setup::Infeasible => return Ok(SolveResult::infeasible(0)),
        Setup::Ready(s) => s,
    };
    if !s.phase1()? {
        return Ok(SolveResult::infeasible(s.iterations));
    }
    s.set_objective(&lp.objective, lp.sense);
    let outcome = match s.primal()? {
        Outcome::Optimal => s.polish(feas_tol)?,
        other => other,
    };
    finish(lp, &s, outcome, feas_tol)
}

pub(crate) fn finish(
    lp: &LinearProgram,
    s: &Simplex,
    outcome: Outcome,
    feas_tol: f64,
) -> Result<SolveResult, SolverError> {
    match outcome {
        Outcome::Infeasible => Ok(SolveResult::infeasible(s.iterations)),
        Outcome::Unbounded => Ok(SolveResult {
            status: Status::Unbounded,
            x: Vec::new(),
            objective: match lp.sense {
                Sense::Min => f64::NEG_INFINITY,
                Sense::Max => f64::INFINITY,
            },
            bound: match lp.sense {
                Sense::Min => f64::NEG_INFINITY,
                Sense::Max => f64::INFINITY,
            },
            nodes: 0,
            iterations: s.iterations,
        }),
        Outcome::Optimal => {
            let x = s.var_values();
            let viol = lp.max_violation(&x);
            if viol > feas_tol {
                return Err(SolverError::Numerical(format!(
                    "optimal point violates constraints by {viol:.3e}"
                )));
            }
            let obj = lp.objective_at(&x);
            Ok(SolveResult {
                status: Status::Optimal,
                x,
                objective: obj,
                bound: obj,
                nodes: 0,
                iterations: s.iterations,
            })
        }
    }
}

/// A phase-1 basis shared by several objectives over the same constraints.
/// Each `optimize` call gives exactly what a fresh `solve_lp` would.
pub struct FeasibleRegion {
    lp: LinearProgram,
    base: Option<Box<Simplex>>,
    phase1_iterations: usize,
}

impl FeasibleRegion {
    pub fn new(lp: &LinearProgram) -> Result<Self, SolverError> {
        let (base, phase1_iterations) = match Simplex::new(lp)? {
            Setup::Infeasible => (None, 0),
            Setup::Ready(mut s) => {
                let ok = s.phase1()?;
                let it = s.iterations;
                (ok.then_some(s), it)
            }
        };
        Ok(FeasibleRegion {
            lp: lp.clone(),
            base,
            phase1_iterations,
        })
    }

    pub fn is_feasible(&self) -> bool {
        self.base.is_some()
    }

    pub fn optimize(&self, coeffs: &[(usize, f64)], sense: Sense, feas_tol: f64) -> Result<SolveResult, SolverError> {
        let Some(base) = &self.base else {
            return Ok(SolveResult::infeasible(self.phase1_iterations));
        };
        let mut lp = self.lp.clone();
        lp.set_objective(coeffs, sense);
        let mut s = base.clone();
        s.set_objective(&lp.objective, lp.sense);
        let outcome = match s.primal()? {
            Outcome::Optimal => s.polish(feas_tol)?,
            other => other,
        };
        finish(&lp, &s, outcome, feas_tol)
    }
}

/// Phase-1 feasibility test.
pub fn check_feasible(lp: &LinearProgram) -> Result<bool, SolverError> {
    match Simplex::new(lp)? {
        Setup::Infeasible => Ok(false),
        Setup::Ready(mut s) => s.phase1(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::DEFAULT_FEAS_TOL;

    fn one_var(lo: f64, hi: f64) -> LinearProgram {
        let mut lp = LinearProgram::new();
        lp.add_var(lo, hi);
        lp
    }

    #[test]
    fn min_x_with_row_bounds() {
        let mut lp = one_var(f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(0, 1.0)], Cmp::Ge, 1.0);
        lp.add_row(vec![(0, 1.0)], Cmp::Le, 3.0);
        lp.set_objective(&[(0, 1.0)], Sense::Min);
        let r = solve_lp(&lp, DEFAULT_FEAS_TOL).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_infeasible() {
        let mut lp = one_var(f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(0, 1.0)], Cmp::Le, -1.0);
        lp.add_row(vec![(0, 1.0)], Cmp::Ge, 0.0);
        assert_eq!(solve_lp(&lp, DEFAULT_FEAS_TOL).unwrap().status, Status::Infeasible);
        assert!(!check_feasible(&lp).unwrap());
    }

    #[test]
    fn feasibility_examples() {
        let mut lp = one_var(f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(0, 1.0)], Cmp::Le, 1.0);
        lp.add_row(vec![(0, 1.0)], Cmp::Ge, 0.0);
        assert!(check_feasible(&lp).unwrap());
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = one_var(0.0, f64::INFINITY);
        lp.set_objective(&[(0, 1.0)], Sense::Max);
        assert_eq!(solve_lp(&lp, DEFAULT_FEAS_TOL).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn small_max_problem() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 3.0);
        let y = lp.add_var(0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Cmp::Le, 4.0);
        lp.add_row(vec![(x, 1.0), (y, 3.0)], Cmp::Le, 6.0);
        lp.set_objective(&[(x, 3.0), (y, 2.0)], Sense::Max);
        let r = solve_lp(&lp, DEFAULT_FEAS_TOL).unwrap();
        assert!((r.objective - 11.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn equality_rows_and_free_vars() {
        // x + y = 2, x - y = 0, free vars
        let mut lp = LinearProgram::new();
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY);
        let y = lp.add_var(f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Cmp::Eq, 2.0);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Cmp::Eq, 0.0);
        lp.set_objective(&[(x, 1.0)], Sense::Min);
        let r = solve_lp(&lp, DEFAULT_FEAS_TOL).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_variables_are_substituted() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(2.0, 2.0);
        let y = lp.add_var(0.0, 10.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Cmp::Le, 5.0);
        lp.set_objective(&[(y, 1.0)], Sense::Max);
        let r = solve_lp(&lp, DEFAULT_FEAS_TOL).unwrap();
        assert!((r.x[1] - 3.0).abs() < 1e-12);
        assert_eq!(r.x[0], 2.0);
    }
}
