//! Best-bound branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use super::lp::{MixedIntegerProgram, Sense};
use super::simplex::{Outcome, Setup, Simplex};
use super::{SolveResult, SolverError, Status, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_NODE_LIMIT};

/// Which fractional binary to branch on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branching {
    /// Lowest index. Encoders add binaries in dependency order, so this
    /// branches on early network layers first.
    #[default]
    FirstFractional,
    /// Farthest from integral, lowest index on ties.
    MostFractional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    /// Absolute optimality gap used for pruning.
    pub gap_tol: f64,
    pub node_limit: usize,
    pub feas_tol: f64,
    pub int_tol: f64,
    /// Budget for tableaux kept alive for warm starts.
    pub memory_budget: usize,
    pub branching: Branching,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            gap_tol: DEFAULT_GAP_TOL,
            node_limit: DEFAULT_NODE_LIMIT,
            feas_tol: DEFAULT_FEAS_TOL,
            int_tol: 1e-6,
            memory_budget: 128 << 20,
            branching: Branching::default(),
        }
    }
}

struct Node {
    /// Lower bound on the (minimization-form) objective in this subtree.
    bound: f64,
    seq: u64,
    fixings: Vec<(usize, f64)>,
    warm: Option<Arc<Simplex>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound, then oldest, comes first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn solve_milp(
    mip: &MixedIntegerProgram,
    gap_tol: f64,
    node_limit: usize,
) -> Result<SolveResult, SolverError> {
    solve_milp_with(
        mip,
        &MilpOptions {
            gap_tol,
            node_limit,
            ..MilpOptions::default()
        },
    )
}

pub fn solve_milp_with(mip: &MixedIntegerProgram, opts: &MilpOptions) -> Result<SolveResult, SolverError> {
    mip.validate()?;
    let lp = &mip.lp;
    let sign = match lp.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let internal = |x: &[f64]| sign * lp.objective_at(x);

    let solve_fresh = |fixings: &[(usize, f64)]| -> Result<(Outcome, Option<Simplex>), SolverError> {
        let mut sub = lp.clone();
        for &(j, v) in fixings {
            sub.lower[j] = v;
            sub.upper[j] = v;
        }
        let mut s = match Simplex::new(&sub)? {
            Setup::Infeasible => return Ok((Outcome::Infeasible, None)),
            Setup::Ready(s) => *s,
        };
        if !s.phase1()? {
            return Ok((Outcome::Infeasible, None));
        }
        s.set_objective(&sub.objective, sub.sense);
        let mut out = s.primal()?;
        if out == Outcome::Optimal {
            out = s.polish(opts.feas_tol)?;
        }
        Ok((out, Some(s)))
    };

    let mut iterations = 0usize;
    let mut nodes = 0usize;
    let mut seq = 0u64;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        fixings: Vec::new(),
        warm: None,
    });
    let mut live_bytes = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    // smallest bound among subtrees discarded by the gap test
    let mut pruned_bound = f64::INFINITY;
    let mut hit_limit = false;
    // smallest bound among subtrees the LP solver could not resolve
    let mut stuck_bound = f64::INFINITY;

    while let Some(node) = heap.pop() {
        let inc_val = incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);
        if node.bound >= inc_val - opts.gap_tol {
            pruned_bound = pruned_bound.min(node.bound);
            release(&node.warm, &mut live_bytes);
            continue;
        }
        if nodes >= opts.node_limit {
            hit_limit = true;
            heap.push(node);
            break;
        }
        nodes += 1;

        let (outcome, solved) = match &node.warm {
            Some(parent) => {
                let mut s = (**parent).clone();
                let before = s.iterations;
                let (j, v) = *node.fixings.last().expect("warm node has a fixing");
                s.set_var_bounds(j, v, v);
                let out = match s.reoptimize(opts.feas_tol) {
                    Ok(o) => Some((o, s)),
                    Err(_) => None,
                };
                iterations += out.as_ref().map_or(0, |(_, s)| s.iterations - before);
                release(&node.warm, &mut live_bytes);
                match out {
                    Some((o, s)) => (o, Some(s)),
                    None => match solve_fresh(&node.fixings) {
                        Ok((o, s)) => {
                            iterations += s.as_ref().map_or(0, |s| s.iterations);
                            (o, s)
                        }
                        Err(SolverError::Numerical(_)) => {
                            stuck_bound = stuck_bound.min(node.bound);
                            continue;
                        }
                        Err(e) => return Err(e),
                    },
                }
            }
            None => match solve_fresh(&node.fixings) {
                Ok((o, s)) => {
                    iterations += s.as_ref().map_or(0, |s| s.iterations);
                    (o, s)
                }
                // the subtree keeps its parent's bound
                Err(SolverError::Numerical(_)) => {
                    stuck_bound = stuck_bound.min(node.bound);
                    continue;
                }
                Err(e) => return Err(e),
            },
        };
        let s = match (outcome, solved) {
            (Outcome::Infeasible, _) | (_, None) => continue,
            (Outcome::Unbounded, _) => {
                let inf = sign * f64::NEG_INFINITY;
                return Ok(SolveResult {
                    status: Status::Unbounded,
                    x: Vec::new(),
                    objective: inf,
                    bound: inf,
                    nodes,
                    iterations,
                });
            }
            (Outcome::Optimal, Some(s)) => s,
        };
        let x = s.var_values();
        let val = internal(&x).max(node.bound);
        if val >= inc_val - opts.gap_tol {
            pruned_bound = pruned_bound.min(val);
            continue;
        }

        let mut branch: Option<usize> = None;
        let mut best_frac = opts.int_tol;
        for &j in &mip.binaries {
            let f = (x[j] - x[j].round()).abs();
            if f > best_frac {
                best_frac = f;
                branch = Some(j);
                if opts.branching == Branching::FirstFractional {
                    break;
                }
            }
        }
        let Some(j) = branch else {
            let mut xr = x.clone();
            for &b in &mip.binaries {
                xr[b] = xr[b].round();
            }
            let point = if lp.max_violation(&xr) <= opts.feas_tol { xr } else { x };
            let v = internal(&point);
            if v < inc_val {
                incumbent = Some((v, point));
            }
            continue;
        };

        let size = s.memory_bytes();
        let warm = if live_bytes + size <= opts.memory_budget {
            live_bytes += size;
            Some(Arc::new(s))
        } else {
            None
        };
        for v in [0.0, 1.0] {
            seq += 1;
            let mut fixings = node.fixings.clone();
            fixings.push((j, v));
            heap.push(Node {
                bound: val,
                seq,
                fixings,
                warm: warm.clone(),
            });
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let inc_val = incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);
    let proven = inc_val.min(pruned_bound).min(open_bound).min(stuck_bound);
    hit_limit |= stuck_bound < inc_val - opts.gap_tol;
    let (x, objective) = match incumbent {
        Some((v, x)) => (x, sign * v),
        None => (Vec::new(), f64::NAN),
    };
    let status = if hit_limit {
        Status::BoundOnly
    } else if x.is_empty() {
        return Ok(SolveResult {
            nodes,
            iterations,
            ..SolveResult::infeasible(iterations)
        });
    } else {
        Status::Optimal
    };
    Ok(SolveResult {
        status,
        x,
        objective,
        bound: sign * proven,
        nodes,
        iterations,
    })
}

fn release(warm: &Option<Arc<Simplex>>, live: &mut usize) {
    if let Some(a) = warm {
        if Arc::strong_count(a) == 1 {
            *live = live.saturating_sub(a.memory_bytes());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::lp::Cmp;

    #[test]
    fn knapsack() {
        // max 5a + 4b + 3c, 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut mip = MixedIntegerProgram::new();
        let v: Vec<usize> = (0..3).map(|_| mip.add_binary()).collect();
        mip.lp.add_row(vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)], Cmp::Le, 5.0);
        mip.lp.add_row(vec![(v[0], 4.0), (v[1], 1.0), (v[2], 2.0)], Cmp::Le, 11.0);
        mip.lp.add_row(vec![(v[0], 3.0), (v[1], 4.0), (v[2], 2.0)], Cmp::Le, 8.0);
        mip.lp.set_objective(&[(v[0], 5.0), (v[1], 4.0), (v[2], 3.0)], Sense::Max);
        let r = solve_milp(&mip, 1e-9, 1000).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 9.0).abs() < 1e-9, "{r:?}");
        assert!((r.bound - 9.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_parity() {
        // a + b = 1 and a + b = 2 cannot hold; b - a = 0.5 is infeasible for binaries
        let mut mip = MixedIntegerProgram::new();
        let a = mip.add_binary();
        let b = mip.add_binary();
        mip.lp.add_row(vec![(a, -1.0), (b, 1.0)], Cmp::Eq, 0.5);
        let r = solve_milp(&mip, 1e-9, 1000).unwrap();
        assert_eq!(r.status, Status::Infeasible);
    }

    #[test]
    fn node_limit_gives_sound_bound() {
        let mut mip = MixedIntegerProgram::new();
        let v: Vec<usize> = (0..8).map(|_| mip.add_binary()).collect();
        let w = [3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0];
        mip.lp
            .add_row(v.iter().zip(&w).map(|(&j, &c)| (j, c)).collect(), Cmp::Le, 30.5);
        let obj: Vec<(usize, f64)> = v.iter().zip(&w).map(|(&j, &c)| (j, c + 0.5)).collect();
        mip.lp.set_objective(&obj, Sense::Max);
        let full = solve_milp(&mip, 1e-9, 100_000).unwrap();
        let cut = solve_milp(&mip, 1e-9, 2).unwrap();
        assert_eq!(cut.status, Status::BoundOnly);
        assert!(cut.bound >= full.objective - 1e-9);
    }
}
