use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// Sparse row `sum coeffs <cmp> rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for LinearProgram {
    fn default() -> Self {
        LinearProgram::new()
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        LinearProgram {
            objective: Vec::new(),
            sense: Sense::Min,
            rows: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn add_var(&mut self, lo: f64, hi: f64) -> usize {
        self.lower.push(lo);
        self.upper.push(hi);
        self.objective.push(0.0);
        self.lower.len() - 1
    }

    pub fn add_vars(&mut self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        lo.iter().zip(hi).map(|(&l, &h)| self.add_var(l, h)).collect()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, cmp, rhs });
        self.rows.len() - 1
    }

    pub fn set_objective(&mut self, coeffs: &[(usize, f64)], sense: Sense) {
        self.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(j, c) in coeffs {
            self.objective[j] += c;
        }
        self.sense = sense;
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        if self.upper.len() != n || self.objective.len() != n {
            return Err(SolverError::Malformed("bound/objective length mismatch".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(SolverError::Malformed(format!("variable {j} bounds [{l}, {u}]")));
            }
            if !self.objective[j].is_finite() {
                return Err(SolverError::Malformed(format!("objective coefficient {j}")));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("row {i} rhs {}", r.rhs)));
            }
            for &(j, a) in &r.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(SolverError::Malformed(format!("row {i} entry ({j}, {a})")));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x`, scaled by `1 + |rhs|`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_vars() {
            worst = worst
                .max((self.lower[j] - x[j]) / (1.0 + self.lower[j].abs().min(1e12)))
                .max((x[j] - self.upper[j]) / (1.0 + self.upper[j].abs().min(1e12)));
        }
        for r in &self.rows {
            let v: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let scale = 1.0 + r.rhs.abs();
            let viol = match r.cmp {
                Cmp::Le => v - r.rhs,
                Cmp::Ge => r.rhs - v,
                Cmp::Eq => (v - r.rhs).abs(),
            };
            worst = worst.max(viol / scale);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// CPLEX-style LP text, for debugging.
    pub fn to_lp_format(&self, binaries: &BTreeSet<usize>) -> String {
        let term = |coeffs: &mut dyn Iterator<Item = (usize, f64)>| {
            let mut s = String::new();
            for (j, a) in coeffs {
                let _ = write!(s, " {} {} x{}", if a < 0.0 { "-" } else { "+" }, a.abs(), j);
            }
            if s.is_empty() {
                s.push_str(" 0 x0");
            }
            s
        };
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Min => "Minimize\n",
            Sense::Max => "Maximize\n",
        });
        let obj: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect();
        let _ = writeln!(out, " obj:{}", term(&mut obj.into_iter()));
        out.push_str("Subject To\n");
        for (i, r) in self.rows.iter().enumerate() {
            let op = match r.cmp {
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "=",
            };
            let _ = writeln!(out, " c{i}:{} {op} {}", term(&mut r.coeffs.iter().copied()), r.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {l} <= x{j} <= {u}");
                }
                (true, false) => {
                    let _ = writeln!(out, " x{j} >= {l}");
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= x{j} <= {u}");
                }
                (false, false) => {
                    let _ = writeln!(out, " x{j} free");
                }
            }
        }
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for j in binaries {
                let _ = writeln!(out, " x{j}");
            }
        }
        out.push_str("End\n");
        out
    }

    /// Writes the program to `$BACKREACH_DUMP_LP/<tag>.lp` when that variable is set.
    pub fn dump_if_requested(&self, tag: &str, binaries: &BTreeSet<usize>) {
        if let Some(dir) = std::env::var_os("BACKREACH_DUMP_LP") {
            let path = std::path::Path::new(&dir).join(format!("{tag}.lp"));
            let _ = std::fs::write(path, self.to_lp_format(binaries));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    pub binaries: BTreeSet<usize>,
}

impl MixedIntegerProgram {
    pub fn new() -> Self {
        MixedIntegerProgram {
            lp: LinearProgram::new(),
            binaries: BTreeSet::new(),
        }
    }

    pub fn add_binary(&mut self) -> usize {
        let j = self.lp.add_var(0.0, 1.0);
        self.binaries.insert(j);
        j
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.lp.validate()?;
        for &j in &self.binaries {
            if j >= self.lp.num_vars() || self.lp.lower[j] < 0.0 || self.lp.upper[j] > 1.0 {
                return Err(SolverError::Malformed(format!("binary {j} must lie in [0,1]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_text_has_sections() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 1.0);
        let y = lp.add_var(f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, -2.0)], Cmp::Le, 3.0);
        lp.set_objective(&[(x, 1.0)], Sense::Max);
        let mut bins = BTreeSet::new();
        bins.insert(x);
        let s = lp.to_lp_format(&bins);
        assert!(s.starts_with("Maximize"));
        assert!(s.contains("c0: + 1 x0 - 2 x1 <= 3"));
        assert!(s.contains("x1 free"));
        assert!(s.contains("Binaries\n x0"));
    }

    #[test]
    fn validate_catches_bad_index() {
        let mut lp = LinearProgram::new();
        lp.add_var(0.0, 1.0);
        lp.add_row(vec![(3, 1.0)], Cmp::Le, 1.0);
        assert!(lp.validate().is_err());
    }
}
