//! BP over-approximation for nonlinear plants via MILP: concrete steps and
//! periodic symbolic steps chained back to the last anchor.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crown;
use crate::error::{Error, Result};
use crate::geom::{Hyperrectangle, Region, TimedSetSequence};
use crate::nn::FeedforwardNetwork;
use crate::overt::{abstract_dynamics, encode_abstraction, AbstractDynamics};
use crate::solver::{encode_relu_bigm, solve_milp_with, Cmp, MilpOptions, MixedIntegerProgram, Sense, Status};
use crate::system::NonlinearModel;

fn default_period() -> usize {
    1
}

fn default_node_limit() -> usize {
    20_000
}

fn default_gap() -> f64 {
    1e-7
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlBpConfig {
    pub tau: usize,
    /// Abstraction tolerance.
    pub epsilon: f64,
    /// Every `symbolic_period`-th step is symbolic; 1 keeps every step concrete.
    #[serde(default = "default_period")]
    pub symbolic_period: usize,
    #[serde(default = "default_node_limit")]
    pub node_limit: usize,
    #[serde(default = "default_gap")]
    pub gap_tol: f64,
    #[serde(default = "default_true")]
    pub stop_on_invariance: bool,
}

impl NlBpConfig {
    pub fn new(tau: usize, epsilon: f64) -> Self {
        NlBpConfig {
            tau,
            epsilon,
            symbolic_period: 1,
            node_limit: default_node_limit(),
            gap_tol: default_gap(),
            stop_on_invariance: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.symbolic_period == 0 {
            return Err(Error::Config("symbolic_period must be at least 1".into()));
        }
        if self.node_limit == 0 {
            return Err(Error::Config("node_limit must be at least 1".into()));
        }
        Ok(())
    }

    fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            gap_tol: self.gap_tol,
            node_limit: self.node_limit,
            ..MilpOptions::default()
        }
    }

    /// Whether step `s = -t` is solved symbolically.
    pub fn is_symbolic(&self, s: usize) -> bool {
        let p = self.symbolic_period;
        p >= 2 && (s % p == 0 || (p > self.tau && s == self.tau))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NlStats {
    pub milps: usize,
    pub nodes: usize,
    pub bound_only_faces: usize,
    pub wall_ms: u128,
}

#[derive(Debug, Clone)]
pub struct NlRun {
    pub sets: TimedSetSequence,
    /// Concrete solve of each step before any symbolic replacement.
    pub concrete: BTreeMap<i32, Region>,
    pub stats: NlStats,
}

/// Box bounds of one solve plus which faces came from a bound only.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceBounds {
    pub region: Region,
    pub bound_only: Vec<bool>,
}

#[derive(Default)]
struct Counters {
    milps: AtomicUsize,
    nodes: AtomicUsize,
    bound_only: AtomicUsize,
}

/// One link `x_i -> x_{i+1}` of a chain: the set `x_i` lies in and the
/// abstraction valid there.
struct Link {
    set: Hyperrectangle,
    abs: AbstractDynamics,
    with_policy: bool,
}

/// Program over `x_t`: follows `links` forward and requires the final
/// successor to land in `terminal`. Returns the program and the `x_t` variables.
fn chain_program(
    net: Option<&FeedforwardNetwork>,
    model: &NonlinearModel,
    links: &[Link],
    terminal: &Hyperrectangle,
) -> Result<(MixedIntegerProgram, Vec<usize>)> {
    let mut mip = MixedIntegerProgram::new();
    let first = &links[0].set;
    let x0 = mip.lp.add_vars(first.lo(), first.hi());
    let mut x = x0.clone();
    for (i, link) in links.iter().enumerate() {
        let u = match (link.with_policy, net) {
            (true, Some(net)) => {
                let bounds = crown::layer_bounds(net, &link.set)?;
                encode_relu_bigm(&mut mip, net, &x, &bounds)?.outputs
            }
            _ => {
                let uset = model.input_set();
                mip.lp.add_vars(uset.lo(), uset.hi())
            }
        };
        let enc = encode_abstraction(&link.abs, &mut mip, &x, &u)?;
        let next_set = links.get(i + 1).map_or(terminal, |l| &l.set);
        let next = mip.lp.add_vars(next_set.lo(), next_set.hi());
        for (k, (coeffs, c)) in enc.successors.into_iter().enumerate() {
            let mut row = coeffs;
            row.push((next[k], -1.0));
            mip.lp.add_row(row, Cmp::Eq, -c);
        }
        x = next;
    }
    Ok((mip, x0))
}

fn solve_faces(mip: &MixedIntegerProgram, x: &[usize], opts: &MilpOptions, counters: &Counters) -> Result<FaceBounds> {
    let jobs: Vec<(usize, Sense)> = (0..x.len()).flat_map(|k| [(k, Sense::Min), (k, Sense::Max)]).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(k, sense)| {
            let mut p = mip.clone();
            p.lp.set_objective(&[(x[k], 1.0)], sense);
            solve_milp_with(&p, opts)
        })
        .collect::<std::result::Result<_, _>>()?;
    counters.milps.fetch_add(results.len(), Ordering::Relaxed);
    counters
        .nodes
        .fetch_add(results.iter().map(|r| r.nodes).sum(), Ordering::Relaxed);
    if results.iter().any(|r| r.status == Status::Infeasible) {
        return Ok(FaceBounds {
            region: Region::Empty,
            bound_only: vec![false; 2 * x.len()],
        });
    }
    let mut lo = Vec::with_capacity(x.len());
    let mut hi = Vec::with_capacity(x.len());
    let mut flags = Vec::with_capacity(2 * x.len());
    for (r, &(k, sense)) in results.iter().zip(&jobs) {
        let (var_lo, var_hi) = (mip.lp.lower[x[k]], mip.lp.upper[x[k]]);
        let v = match r.status {
            Status::Optimal => r.objective,
            Status::BoundOnly => r.bound,
            Status::Unbounded | Status::Infeasible => {
                return Err(Error::Abstraction(format!("unexpected {:?} on a bounded program", r.status)))
            }
        };
        flags.push(r.status == Status::BoundOnly);
        counters
            .bound_only
            .fetch_add(usize::from(r.status == Status::BoundOnly), Ordering::Relaxed);
        match sense {
            Sense::Min => lo.push(v.clamp(var_lo, var_hi)),
            Sense::Max => hi.push(v.clamp(var_lo, var_hi)),
        }
    }
    let region = if lo.iter().zip(&hi).all(|(l, h)| l <= h) {
        Region::Box(Hyperrectangle::new(lo, hi)?)
    } else {
        Region::Empty
    };
    Ok(FaceBounds {
        region,
        bound_only: flags,
    })
}

fn backreachable_with(
    model: &NonlinearModel,
    abs_x: &AbstractDynamics,
    next: &Hyperrectangle,
    opts: &MilpOptions,
    counters: &Counters,
) -> Result<FaceBounds> {
    let link = Link {
        set: model.state_space().clone(),
        abs: abs_x.clone(),
        with_policy: false,
    };
    let (mip, x) = chain_program(None, model, std::slice::from_ref(&link), next)?;
    solve_faces(&mip, &x, opts, counters)
}

/// Over-approximation of the states with some `u ∈ U` whose successor lies
/// in `next`, using the abstraction built on all of `X`.
pub fn backreachable_set_nl(model: &NonlinearModel, next: &Hyperrectangle, epsilon: f64) -> Result<FaceBounds> {
    if next.dim() != model.n_x() {
        return Err(Error::DimensionMismatch {
            expected: model.n_x(),
            found: next.dim(),
        });
    }
    let abs_x = abstract_dynamics(model, model.state_space(), model.input_set(), epsilon)?;
    backreachable_with(model, &abs_x, next, &MilpOptions::default(), &Counters::default())
}

fn check_inputs(model: &NonlinearModel, net: &FeedforwardNetwork, target: &Hyperrectangle) -> Result<()> {
    if target.dim() != model.n_x() {
        return Err(Error::DimensionMismatch {
            expected: model.n_x(),
            found: target.dim(),
        });
    }
    if net.input_dim() != model.n_x() || net.output_dim() != model.n_u() {
        return Err(Error::InvalidNetwork(format!(
            "policy maps {} -> {}, plant needs {} -> {}",
            net.input_dim(),
            net.output_dim(),
            model.n_x(),
            model.n_u()
        )));
    }
    if !target.subset_of(model.state_space(), 0.0)? {
        return Err(Error::Config("target set must lie inside the state space".into()));
    }
    Ok(())
}

fn fill_empty(seq: &mut TimedSetSequence, from: i32, tau: i32) {
    for t in (-tau..=from).rev() {
        seq.sets.insert(t, Region::Empty);
        seq.backreachable.entry(t).or_insert(Region::Empty);
    }
}

fn pipeline(model: &NonlinearModel, net: &FeedforwardNetwork, target: &Hyperrectangle, cfg: &NlBpConfig) -> Result<NlRun> {
    cfg.validate()?;
    check_inputs(model, net, target)?;
    let start = Instant::now();
    let counters = Counters::default();
    let opts = cfg.milp_options();
    let tau = cfg.tau as i32;
    let uset = model.input_set();
    let abs_x = abstract_dynamics(model, model.state_space(), uset, cfg.epsilon)?;
    let mut seq = TimedSetSequence::new(cfg.tau, target.clone());
    // abstraction of each computed step, reused by later symbolic chains
    let mut abs_at: BTreeMap<i32, AbstractDynamics> = BTreeMap::new();
    let mut concrete_at = BTreeMap::new();
    let mut anchor = 0;
    for t in (-tau..0).rev() {
        let next = seq.sets[&(t + 1)].as_box().expect("checked non-empty").clone();
        let r = backreachable_with(model, &abs_x, &next, &opts, &counters)?;
        seq.backreachable.insert(t, r.region.clone());
        let Region::Box(r_bar) = r.region else {
            fill_empty(&mut seq, t, tau);
            break;
        };
        let abs_t = abstract_dynamics(model, &r_bar, uset, cfg.epsilon)?;
        let link = Link {
            set: r_bar.clone(),
            abs: abs_t,
            with_policy: true,
        };
        let (mip, x) = chain_program(Some(net), model, std::slice::from_ref(&link), &next)?;
        let mut faces = solve_faces(&mip, &x, &opts, &counters)?;
        concrete_at.insert(t, faces.region.clone());
        let mut abs_kept = link.abs;
        if let (Region::Box(concrete), true) = (&faces.region, cfg.is_symbolic((-t) as usize)) {
            let abs_c = abstract_dynamics(model, concrete, uset, cfg.epsilon)?;
            let mut links = vec![Link {
                set: concrete.clone(),
                abs: abs_c.clone(),
                with_policy: true,
            }];
            for i in t + 1..anchor {
                links.push(Link {
                    set: seq.sets[&i].as_box().expect("chain steps are boxes").clone(),
                    abs: abs_at[&i].clone(),
                    with_policy: true,
                });
            }
            let end = seq.sets[&anchor].as_box().expect("anchor is a box").clone();
            let (mip, x) = chain_program(Some(net), model, &links, &end)?;
            let sym = solve_faces(&mip, &x, &opts, &counters)?;
            // the symbolic program already lives inside the concrete box
            faces = sym;
            abs_kept = abs_c;
            anchor = t;
        }
        seq.bound_only.insert(t, faces.bound_only);
        let Region::Box(p_box) = faces.region else {
            fill_empty(&mut seq, t, tau);
            break;
        };
        // later links need the abstraction over the set itself
        let abs_p = if abs_kept.bounds[..model.n_x()]
            .iter()
            .enumerate()
            .all(|(k, &(l, h))| l == p_box.lo()[k] && h == p_box.hi()[k])
        {
            abs_kept
        } else {
            abstract_dynamics(model, &p_box, uset, cfg.epsilon)?
        };
        abs_at.insert(t, abs_p);
        seq.sets.insert(t, Region::Box(p_box.clone()));
        if t == -1 && cfg.stop_on_invariance && p_box.subset_of(target, 0.0)? {
            seq.invariant = true;
            for s in (-tau..-1).rev() {
                seq.sets.insert(s, Region::Box(p_box.clone()));
            }
            break;
        }
    }
    Ok(NlRun {
        sets: seq,
        concrete: concrete_at,
        stats: NlStats {
            milps: counters.milps.into_inner(),
            nodes: counters.nodes.into_inner(),
            bound_only_faces: counters.bound_only.into_inner(),
            wall_ms: start.elapsed().as_millis(),
        },
    })
}

/// Concrete BP sets for every step.
pub fn breach_milp(model: &NonlinearModel, net: &FeedforwardNetwork, target: &Hyperrectangle, cfg: &NlBpConfig) -> Result<NlRun> {
    let cfg = NlBpConfig {
        symbolic_period: 1,
        ..cfg.clone()
    };
    pipeline(model, net, target, &cfg)
}

/// Concrete steps with a symbolic solve every `symbolic_period` steps.
pub fn hybrid_symbolic(
    model: &NonlinearModel,
    net: &FeedforwardNetwork,
    target: &Hyperrectangle,
    cfg: &NlBpConfig,
) -> Result<NlRun> {
    if cfg.symbolic_period < 2 {
        return Err(Error::Config("hybrid_symbolic needs symbolic_period >= 2".into()));
    }
    pipeline(model, net, target, cfg)
}

/// Dispatches on `symbolic_period`.
pub fn nl_backreach(model: &NonlinearModel, net: &FeedforwardNetwork, target: &Hyperrectangle, cfg: &NlBpConfig) -> Result<NlRun> {
    pipeline(model, net, target, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{backreachable_set, hybreach, BpConfig, Mode, PartitionSpec};
    use crate::matrix::Matrix;
    use crate::nn::{Activation, Layer};
    use crate::system::LinearSystem;

    fn di() -> LinearSystem {
        LinearSystem::new(
            Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            Matrix::from_rows(vec![vec![0.5], vec![1.0]]).unwrap(),
            vec![0.0, 0.0],
            Hyperrectangle::new(vec![-1.0], vec![1.0]).unwrap(),
            Hyperrectangle::new(vec![-10.0, -10.0], vec![10.0, 10.0]).unwrap(),
        )
        .unwrap()
    }

    /// `u = clip(-0.4 x0 - x1, -1, 1)` as relu(z + 1) - relu(z - 1) - 1.
    fn clipped_policy() -> FeedforwardNetwork {
        FeedforwardNetwork::new(
            2,
            vec![
                Layer::new(
                    Matrix::from_rows(vec![vec![-0.4, -1.0], vec![-0.4, -1.0]]).unwrap(),
                    vec![1.0, -1.0],
                    Activation::Relu,
                )
                .unwrap(),
                Layer::new(Matrix::from_rows(vec![vec![1.0, -1.0]]).unwrap(), vec![-1.0], Activation::Identity).unwrap(),
            ],
        )
        .unwrap()
    }

    fn close(a: &Region, b: &Region, tol: f64) -> bool {
        match (a, b) {
            (Region::Empty, Region::Empty) => true,
            (Region::Box(a), Region::Box(b)) => (0..a.dim())
                .all(|k| (a.lo()[k] - b.lo()[k]).abs() <= tol && (a.hi()[k] - b.hi()[k]).abs() <= tol),
            _ => false,
        }
    }

    #[test]
    fn linear_backreachable_matches_lp_path() {
        let sys = di();
        let model = sys.to_model("di");
        let next = Hyperrectangle::new(vec![4.5, -0.25], vec![5.0, 0.25]).unwrap();
        let nl = backreachable_set_nl(&model, &next, 0.1).unwrap();
        let lp = backreachable_set(&sys, &next).unwrap();
        assert!(close(&nl.region, &lp, 1e-6), "{:?} vs {:?}", nl.region, lp);
        assert!(nl.bound_only.iter().all(|f| !f));
    }

    #[test]
    fn unreachable_next_set_is_empty() {
        let sys = LinearSystem::new(
            Matrix::identity(2),
            Matrix::identity(2),
            vec![0.0, 0.0],
            Hyperrectangle::new(vec![-0.1, -0.1], vec![0.1, 0.1]).unwrap(),
            Hyperrectangle::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let model = sys.to_model("id");
        // successors are clipped into X, so only a set outside X is unreachable
        let far = Hyperrectangle::new(vec![0.0, 5.0], vec![1.0, 6.0]).unwrap();
        let nl = backreachable_set_nl(&model, &far, 0.1).unwrap();
        assert_eq!(nl.region, Region::Empty);
    }

    #[test]
    fn exact_policy_encoding_is_inside_lp_result() {
        let sys = di();
        let net = clipped_policy();
        let target = Hyperrectangle::new(vec![4.5, -0.25], vec![5.0, 0.25]).unwrap();
        let cfg = NlBpConfig::new(2, 0.1);
        let milp = breach_milp(&sys.to_model("di"), &net, &target, &cfg).unwrap();
        let lp = hybreach(&sys, &net, &target, &BpConfig::new(2, PartitionSpec::Uniform(vec![1, 1]), Mode::Concrete)).unwrap();
        for t in [-1, -2] {
            let a = milp.sets.get(t).unwrap();
            let b = lp.sets.get(t).unwrap();
            assert!(a.subset_of(b, 1e-6).unwrap(), "t={t}: {a:?} not in {b:?}");
        }
        assert_eq!(milp.stats.bound_only_faces, 0);
    }

    #[test]
    fn symbolic_schedule() {
        let mut cfg = NlBpConfig::new(6, 0.1);
        assert!(!(1..=6).any(|s| cfg.is_symbolic(s)));
        cfg.symbolic_period = 3;
        assert_eq!((1..=6).filter(|&s| cfg.is_symbolic(s)).collect::<Vec<_>>(), vec![3, 6]);
        cfg.symbolic_period = 9;
        assert_eq!((1..=6).filter(|&s| cfg.is_symbolic(s)).collect::<Vec<_>>(), vec![6]);
    }

    #[test]
    fn symbolic_is_inside_concrete() {
        let sys = di();
        let net = clipped_policy();
        let target = Hyperrectangle::new(vec![4.5, -0.25], vec![5.0, 0.25]).unwrap();
        let model = sys.to_model("di");
        let cfg = NlBpConfig::new(3, 0.1);
        let concrete = breach_milp(&model, &net, &target, &cfg).unwrap();
        let sym = hybrid_symbolic(&model, &net, &target, &NlBpConfig { symbolic_period: 3, ..cfg.clone() }).unwrap();
        let (a, b) = (sym.sets.get(-3).unwrap(), concrete.sets.get(-3).unwrap());
        assert!(a.subset_of(b, 1e-6).unwrap(), "{a:?} vs {b:?}");
        assert!(hybrid_symbolic(&model, &net, &target, &cfg).is_err());
    }
}
