//! Backprojection over-approximation for linear plants with LP relaxations
//! of the policy (concrete, symbolic and refined variants).

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crown::{self, AffineBounds};
use crate::error::{Error, Result};
use crate::geom::{Hyperrectangle, Region, TimedSetSequence};
use crate::matrix::Matrix;
use crate::nn::FeedforwardNetwork;
use crate::oracle::HullEstimate;
use crate::partition::{estimate_bp_set, guided_partition, uniform_partition, GuidedContext};
use crate::solver::{Cmp, FeasibleRegion, LinearProgram, Sense, Status, DEFAULT_FEAS_TOL};
use crate::system::{LinearSystem, Plant};

/// Slack added to relaxation offsets so rounding never cuts off a true control.
const RELAX_PAD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionSpec {
    Uniform(Vec<usize>),
    Guided {
        r: usize,
        v_m: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Concrete,
    Symbolic,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    pub tau: usize,
    pub partition: PartitionSpec,
    pub mode: Mode,
    #[serde(default = "yes")]
    pub skip_lp: bool,
    #[serde(default = "yes")]
    pub reuse_templates: bool,
    #[serde(default = "yes")]
    pub stop_on_invariance: bool,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl BpConfig {
    pub fn new(tau: usize, partition: PartitionSpec, mode: Mode) -> Self {
        BpConfig {
            tau,
            partition,
            mode,
            skip_lp: true,
            reuse_templates: true,
            stop_on_invariance: true,
            seed: 0,
        }
    }

    pub fn validate(&self, n_x: usize) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        match &self.partition {
            PartitionSpec::Uniform(r) => {
                if r.len() != n_x {
                    return Err(Error::DimensionMismatch {
                        expected: n_x,
                        found: r.len(),
                    });
                }
                if r.iter().any(|&v| v == 0) {
                    return Err(Error::Config("uniform partition counts must be at least 1".into()));
                }
            }
            PartitionSpec::Guided { r, v_m, samples } => {
                if *r == 0 {
                    return Err(Error::Config("partition budget must be at least 1".into()));
                }
                if !(*v_m > 0.0) {
                    return Err(Error::Config(format!("v_m must be positive, got {v_m}")));
                }
                if *samples == 0 {
                    return Err(Error::Config("guided partitioning needs at least one sample".into()));
                }
            }
        }
        Ok(())
    }
}

/// Counters for one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BpStats {
    /// BP-set LPs actually solved.
    pub bp_lps: usize,
    /// BP-set LPs avoided by the skip rule.
    pub skipped_lps: usize,
    /// Backreachable-set LPs.
    pub backreachable_lps: usize,
    /// Feasibility checks made while partitioning.
    pub feasibility_checks: usize,
    /// Partition elements handled per timestep.
    pub elements: BTreeMap<i32, usize>,
    pub wall_ms: u128,
}

#[derive(Debug, Clone)]
pub struct BpRun {
    pub sets: TimedSetSequence,
    pub stats: BpStats,
}

fn box_coeffs(a: &Matrix, i: usize, x: &[usize]) -> Vec<(usize, f64)> {
    x.iter().zip(a.row(i)).filter(|(_, &v)| v != 0.0).map(|(&j, &v)| (j, v)).collect()
}

/// Adds `u` bounds from the input box and optional polytope.
fn add_input(lp: &mut LinearProgram, sys: &LinearSystem) -> Vec<usize> {
    let u = lp.add_vars(sys.input_set().lo(), sys.input_set().hi());
    if let Some(p) = sys.input_polytope() {
        for i in 0..p.a.rows() {
            let coeffs: Vec<(usize, f64)> = box_coeffs(&p.a, i, &u);
            lp.add_row(coeffs, Cmp::Le, p.b[i]);
        }
    }
    u
}

/// `next = A x + B u + c` as equality rows.
fn add_dynamics(lp: &mut LinearProgram, sys: &LinearSystem, x: &[usize], u: &[usize], next: &[usize]) {
    for i in 0..sys.n_x() {
        let mut coeffs = vec![(next[i], 1.0)];
        coeffs.extend(box_coeffs(sys.a(), i, x).into_iter().map(|(j, v)| (j, -v)));
        coeffs.extend(box_coeffs(sys.b(), i, u).into_iter().map(|(j, v)| (j, -v)));
        lp.add_row(coeffs, Cmp::Eq, sys.c()[i]);
    }
}

/// `Phi x + beta <= u <= Psi x + alpha`.
fn add_relaxation(lp: &mut LinearProgram, relax: &AffineBounds, x: &[usize], u: &[usize]) {
    for j in 0..relax.output_dim() {
        let mut up = vec![(u[j], 1.0)];
        up.extend(box_coeffs(&relax.psi, j, x).into_iter().map(|(k, v)| (k, -v)));
        lp.add_row(up, Cmp::Le, relax.alpha[j] + RELAX_PAD * (1.0 + relax.alpha[j].abs()));
        let mut down = vec![(u[j], 1.0)];
        down.extend(box_coeffs(&relax.phi, j, x).into_iter().map(|(k, v)| (k, -v)));
        lp.add_row(down, Cmp::Ge, relax.beta[j] - RELAX_PAD * (1.0 + relax.beta[j].abs()));
    }
}

/// One link of a chained constraint set: the state box at step `i` and the
/// control relaxation valid on it.
#[derive(Debug, Clone)]
pub struct ChainLink {
    pub set: Hyperrectangle,
    pub omega: AffineBounds,
}

/// Element-independent part of a BP LP. `x_t` occupies variables `0..n_x`
/// and `u_t` the next `n_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpTemplate {
    lp: LinearProgram,
    n_x: usize,
    n_u: usize,
}

impl LpTemplate {
    /// `x_t -> x_{t+1} -> ... -> terminal`; `chain` holds the intermediate links.
    pub fn build(sys: &LinearSystem, chain: &[ChainLink], terminal: &Hyperrectangle) -> LpTemplate {
        let mut lp = LinearProgram::new();
        let n_x = sys.n_x();
        let x_space = sys.state_space();
        let mut x = lp.add_vars(x_space.lo(), x_space.hi());
        let mut u = add_input(&mut lp, sys);
        for link in chain {
            let next = lp.add_vars(link.set.lo(), link.set.hi());
            add_dynamics(&mut lp, sys, &x, &u, &next);
            x = next;
            u = add_input(&mut lp, sys);
            add_relaxation(&mut lp, &link.omega, &x, &u);
        }
        let last = lp.add_vars(terminal.lo(), terminal.hi());
        add_dynamics(&mut lp, sys, &x, &u, &last);
        LpTemplate {
            lp,
            n_x,
            n_u: sys.n_u(),
        }
    }

    /// Restricts `x_t` to `element` and adds the element's relaxation.
    pub fn instantiate(&self, element: &Hyperrectangle, relax: &AffineBounds) -> LinearProgram {
        let mut lp = self.lp.clone();
        for k in 0..self.n_x {
            lp.lower[k] = element.lo()[k];
            lp.upper[k] = element.hi()[k];
        }
        let x: Vec<usize> = (0..self.n_x).collect();
        let u: Vec<usize> = (self.n_x..self.n_x + self.n_u).collect();
        add_relaxation(&mut lp, relax, &x, &u);
        lp
    }
}

/// Which element faces still need an LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Min(usize),
    Max(usize),
}

/// True when the LP for `face` cannot extend `union`: the element's own face
/// already lies inside it.
pub fn skip_lp_filter(union: &Region, element: &Hyperrectangle, face: Face) -> bool {
    match (union, face) {
        (Region::Empty, _) => false,
        (Region::Box(b), Face::Min(k)) => b.lo()[k] <= element.lo()[k],
        (Region::Box(b), Face::Max(k)) => b.hi()[k] >= element.hi()[k],
    }
}

fn faces(n: usize) -> impl Iterator<Item = Face> {
    (0..n).flat_map(|k| [Face::Min(k), Face::Max(k)])
}

fn solve_face(region: &FeasibleRegion, face: Face) -> Result<Option<f64>> {
    let (k, sense) = match face {
        Face::Min(k) => (k, Sense::Min),
        Face::Max(k) => (k, Sense::Max),
    };
    let r = region.optimize(&[(k, 1.0)], sense, DEFAULT_FEAS_TOL)?;
    match r.status {
        Status::Optimal => Ok(Some(r.objective)),
        Status::Infeasible => Ok(None),
        other => Err(Error::Solver(crate::solver::SolverError::Numerical(format!(
            "bounded LP returned {other:?}"
        )))),
    }
}

/// Outer box of `{x in X : exists u in U, A x + B u + c in next}`.
pub fn backreachable_set(sys: &LinearSystem, next: &Hyperrectangle) -> Result<Region> {
    Ok(backreachable_counted(sys, next)?.0)
}

fn backreachable_counted(sys: &LinearSystem, next: &Hyperrectangle) -> Result<(Region, usize)> {
    if next.dim() != sys.n_x() {
        return Err(Error::DimensionMismatch {
            expected: sys.n_x(),
            found: next.dim(),
        });
    }
    let lp = LpTemplate::build(sys, &[], next).lp;
    let region = FeasibleRegion::new(&lp)?;
    let n = sys.n_x();
    if !region.is_feasible() {
        return Ok((Region::Empty, 2 * n));
    }
    let x = sys.state_space();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for k in 0..n {
        match (solve_face(&region, Face::Min(k))?, solve_face(&region, Face::Max(k))?) {
            (Some(a), Some(b)) => {
                lo[k] = a.max(x.lo()[k]);
                hi[k] = b.min(x.hi()[k]).max(lo[k]);
            }
            _ => return Ok((Region::Empty, 2 * n)),
        }
    }
    Ok((Region::Box(Hyperrectangle::new(lo, hi)?), 2 * n))
}

/// Per-element LP context shared by a timestep.
pub struct StepProblem<'a> {
    pub sys: &'a LinearSystem,
    pub net: &'a FeedforwardNetwork,
    pub template: LpTemplate,
    pub reuse_template: bool,
    pub chain: Vec<ChainLink>,
    pub terminal: Hyperrectangle,
}

impl StepProblem<'_> {
    pub fn lp_for(&self, element: &Hyperrectangle) -> Result<LinearProgram> {
        let relax = crown::relax(self.net, element)?;
        if self.reuse_template {
            Ok(self.template.instantiate(element, &relax))
        } else {
            Ok(LpTemplate::build(self.sys, &self.chain, &self.terminal).instantiate(element, &relax))
        }
    }

    pub fn feasible(&self, element: &Hyperrectangle) -> Result<bool> {
        Ok(FeasibleRegion::new(&self.lp_for(element)?)?.is_feasible())
    }
}

/// Min/max box of `x_t` over one element's LP, `Empty` if infeasible.
pub fn bp_bounds(problem: &StepProblem<'_>, element: &Hyperrectangle) -> Result<Region> {
    let region = FeasibleRegion::new(&problem.lp_for(element)?)?;
    let n = element.dim();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for face in faces(n) {
        match (face, solve_face(&region, face)?) {
            (_, None) => return Ok(Region::Empty),
            (Face::Min(k), Some(v)) => lo[k] = v,
            (Face::Max(k), Some(v)) => hi[k] = v,
        }
    }
    Ok(Region::Box(clamp_to(element, lo, hi)?))
}

fn clamp_to(element: &Hyperrectangle, mut lo: Vec<f64>, mut hi: Vec<f64>) -> Result<Hyperrectangle> {
    for k in 0..element.dim() {
        lo[k] = lo[k].clamp(element.lo()[k], element.hi()[k]);
        hi[k] = hi[k].clamp(lo[k], element.hi()[k]);
    }
    Hyperrectangle::new(lo, hi)
}

/// Running componentwise union of element results.
#[derive(Debug, Clone)]
struct Union {
    lo: Vec<f64>,
    hi: Vec<f64>,
    any: bool,
}

impl Union {
    fn new(n: usize) -> Self {
        Union {
            lo: vec![f64::INFINITY; n],
            hi: vec![f64::NEG_INFINITY; n],
            any: false,
        }
    }

    fn region(&self) -> Result<Region> {
        if !self.any {
            return Ok(Region::Empty);
        }
        let hi = self.hi.iter().zip(&self.lo).map(|(h, l)| h.max(*l)).collect();
        Ok(Region::Box(Hyperrectangle::new(self.lo.clone(), hi)?))
    }

    /// Folds face values of one feasible element, clamped to the element.
    fn absorb(&mut self, e: &Hyperrectangle, values: &[(Face, f64)]) {
        self.any = true;
        for &(face, v) in values {
            match face {
                Face::Min(k) => self.lo[k] = self.lo[k].min(v.clamp(e.lo()[k], e.hi()[k])),
                Face::Max(k) => self.hi[k] = self.hi[k].max(v.clamp(e.lo()[k], e.hi()[k])),
            }
        }
    }
}

/// Face values for `pending`, or `None` when the element is infeasible.
fn element_faces(region: &FeasibleRegion, pending: &[Face], solved: &AtomicUsize) -> Result<Option<Vec<(Face, f64)>>> {
    let mut out = Vec::with_capacity(pending.len());
    for &face in pending {
        solved.fetch_add(1, Ordering::Relaxed);
        match solve_face(region, face)? {
            Some(v) => out.push((face, v)),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// All faces of all elements; union of the results.
fn union_parallel(problem: &StepProblem<'_>, elements: &[Hyperrectangle], solved: &AtomicUsize) -> Result<Region> {
    let n = problem.sys.n_x();
    let all: Vec<Face> = faces(n).collect();
    let outcomes: Vec<Option<Vec<(Face, f64)>>> = elements
        .par_iter()
        .map(|e| {
            let region = FeasibleRegion::new(&problem.lp_for(e)?)?;
            if !region.is_feasible() {
                solved.fetch_add(all.len(), Ordering::Relaxed);
                return Ok(None);
            }
            element_faces(&region, &all, solved)
        })
        .collect::<Result<_>>()?;
    let mut union = Union::new(n);
    for (e, o) in elements.iter().zip(outcomes) {
        if let Some(values) = o {
            union.absorb(e, &values);
        }
    }
    union.region()
}

/// Sequential pass that skips LPs unable to extend the running union.
fn union_skipping(
    problem: &StepProblem<'_>,
    elements: &[Hyperrectangle],
    solved: &AtomicUsize,
    skipped: &AtomicUsize,
) -> Result<Region> {
    let n = problem.sys.n_x();
    let mut union = Union::new(n);
    for e in elements {
        let current = union.region()?;
        let pending: Vec<Face> = faces(n).filter(|&f| !skip_lp_filter(&current, e, f)).collect();
        skipped.fetch_add(2 * n - pending.len(), Ordering::Relaxed);
        if pending.is_empty() {
            continue;
        }
        let region = FeasibleRegion::new(&problem.lp_for(e)?)?;
        if !region.is_feasible() {
            solved.fetch_add(1, Ordering::Relaxed);
            skipped.fetch_add(pending.len() - 1, Ordering::Relaxed);
            continue;
        }
        if let Some(values) = element_faces(&region, &pending, solved)? {
            union.absorb(e, &values);
        }
    }
    union.region()
}

struct Partitioned {
    elements: Vec<Hyperrectangle>,
}

fn partition_for(
    problem: &StepProblem<'_>,
    plant: &Plant,
    target: &Hyperrectangle,
    steps: usize,
    domain: &Hyperrectangle,
    cfg: &BpConfig,
    checks: &AtomicUsize,
) -> Result<Partitioned> {
    match &cfg.partition {
        PartitionSpec::Uniform(r) => Ok(Partitioned {
            elements: uniform_partition(domain, r)?,
        }),
        PartitionSpec::Guided { r, v_m, samples } => {
            let HullEstimate { hull, reaching } = estimate_bp_set(
                plant,
                problem.net,
                target,
                steps,
                domain,
                *samples,
                cfg.seed.wrapping_add(steps as u64),
            )?;
            let feasible = |b: &Hyperrectangle| {
                checks.fetch_add(1, Ordering::Relaxed);
                problem.feasible(b)
            };
            let ctx = GuidedContext {
                q: hull,
                samples: &reaching,
                feasible: &feasible,
            };
            let parts = guided_partition(domain, &ctx, *r, *v_m)?;
            Ok(Partitioned {
                elements: parts.into_iter().filter(|p| !p.infeasible).map(|p| p.region).collect(),
            })
        }
    }
}

fn empty_from(seq: &mut TimedSetSequence, from: i32, tau: i32) {
    for t in (-tau..=from).rev() {
        seq.sets.insert(t, Region::Empty);
        seq.backreachable.entry(t).or_insert(Region::Empty);
    }
}

/// Multi-step BP over-approximation `P̄_{-tau..0}` for a linear plant.
pub fn hybreach(sys: &LinearSystem, net: &FeedforwardNetwork, target: &Hyperrectangle, cfg: &BpConfig) -> Result<BpRun> {
    cfg.validate(sys.n_x())?;
    if target.dim() != sys.n_x() {
        return Err(Error::DimensionMismatch {
            expected: sys.n_x(),
            found: target.dim(),
        });
    }
    if net.input_dim() != sys.n_x() || net.output_dim() != sys.n_u() {
        return Err(Error::InvalidNetwork(format!(
            "policy maps {} -> {}, plant needs {} -> {}",
            net.input_dim(),
            net.output_dim(),
            sys.n_x(),
            sys.n_u()
        )));
    }
    let start = Instant::now();
    let counters = Counters::default();
    let first_mode = match cfg.mode {
        Mode::Refine => Mode::Concrete,
        m => m,
    };
    let mut seq = first_pass(sys, net, target, cfg, first_mode, &counters)?;
    if cfg.mode == Mode::Refine {
        seq = refine_pass(sys, net, target, cfg, seq, &counters)?;
    }
    let stats = counters.finish(start);
    Ok(BpRun { sets: seq, stats })
}

#[derive(Default)]
struct Counters {
    solved: AtomicUsize,
    skipped: AtomicUsize,
    backreachable: AtomicUsize,
    checks: AtomicUsize,
    elements: std::sync::Mutex<BTreeMap<i32, usize>>,
}

impl Counters {
    fn finish(self, start: Instant) -> BpStats {
        BpStats {
            bp_lps: self.solved.into_inner(),
            skipped_lps: self.skipped.into_inner(),
            backreachable_lps: self.backreachable.into_inner(),
            feasibility_checks: self.checks.into_inner(),
            elements: self.elements.into_inner().expect("no panics while counting"),
            wall_ms: start.elapsed().as_millis(),
        }
    }

    fn add_elements(&self, t: i32, n: usize) {
        *self.elements.lock().expect("no panics while counting").entry(t).or_insert(0) += n;
    }
}

fn chain_links(seq: &TimedSetSequence, from: i32) -> Option<Vec<ChainLink>> {
    (from..0)
        .map(|i| {
            let set = seq.sets.get(&i)?.as_box()?.clone();
            let omega = seq.omega.get(&i)?.clone();
            Some(ChainLink { set, omega })
        })
        .collect()
}

fn solve_step(
    problem: &StepProblem<'_>,
    elements: &[Hyperrectangle],
    cfg: &BpConfig,
    counters: &Counters,
) -> Result<Region> {
    if cfg.skip_lp {
        union_skipping(problem, elements, &counters.solved, &counters.skipped)
    } else {
        union_parallel(problem, elements, &counters.solved)
    }
}

fn first_pass(
    sys: &LinearSystem,
    net: &FeedforwardNetwork,
    target: &Hyperrectangle,
    cfg: &BpConfig,
    mode: Mode,
    counters: &Counters,
) -> Result<TimedSetSequence> {
    let tau = cfg.tau as i32;
    let plant = Plant::Linear(sys.clone());
    let mut seq = TimedSetSequence::new(cfg.tau, target.clone());
    for t in (-tau..0).rev() {
        let next = seq.sets[&(t + 1)].as_box().expect("checked non-empty").clone();
        let (r_bar, n_lp) = backreachable_counted(sys, &next)?;
        counters.backreachable.fetch_add(n_lp, Ordering::Relaxed);
        seq.backreachable.insert(t, r_bar.clone());
        let Region::Box(r_bar) = r_bar else {
            empty_from(&mut seq, t, tau);
            break;
        };
        let (chain, terminal) = match mode {
            Mode::Concrete => (Vec::new(), next.clone()),
            _ => (chain_links(&seq, t + 1).expect("earlier steps are boxes"), target.clone()),
        };
        let problem = StepProblem {
            sys,
            net,
            template: LpTemplate::build(sys, &chain, &terminal),
            reuse_template: cfg.reuse_templates,
            chain,
            terminal,
        };
        let parts = partition_for(&problem, &plant, target, (-t) as usize, &r_bar, cfg, &counters.checks)?;
        counters.add_elements(t, parts.elements.len());
        let p_bar = solve_step(&problem, &parts.elements, cfg, counters)?;
        seq.partitions.insert(t, parts.elements);
        let Region::Box(p_box) = p_bar else {
            empty_from(&mut seq, t, tau);
            break;
        };
        seq.omega.insert(t, crown::relax(net, &p_box)?);
        seq.sets.insert(t, Region::Box(p_box.clone()));
        if t == -1 && cfg.stop_on_invariance && p_box.subset_of(target, 0.0)? {
            seq.invariant = true;
            for s in (-tau..-1).rev() {
                seq.sets.insert(s, Region::Box(p_box.clone()));
            }
            break;
        }
    }
    Ok(seq)
}

/// Second pass: re-partitions each first-pass set and chains through the
/// refined sets back to the target.
fn refine_pass(
    sys: &LinearSystem,
    net: &FeedforwardNetwork,
    target: &Hyperrectangle,
    cfg: &BpConfig,
    first: TimedSetSequence,
    counters: &Counters,
) -> Result<TimedSetSequence> {
    if first.invariant {
        return Ok(first);
    }
    let tau = cfg.tau as i32;
    let plant = Plant::Linear(sys.clone());
    let mut seq = TimedSetSequence::new(cfg.tau, target.clone());
    seq.backreachable = first.backreachable.clone();
    for t in (-tau..0).rev() {
        let Some(Region::Box(coarse)) = first.sets.get(&t) else {
            empty_from(&mut seq, t, tau);
            break;
        };
        let chain = chain_links(&seq, t + 1).expect("refined steps are boxes");
        let problem = StepProblem {
            sys,
            net,
            template: LpTemplate::build(sys, &chain, target),
            reuse_template: cfg.reuse_templates,
            chain,
            terminal: target.clone(),
        };
        let parts = partition_for(&problem, &plant, target, (-t) as usize, coarse, cfg, &counters.checks)?;
        counters.add_elements(t, parts.elements.len());
        let refined = solve_step(&problem, &parts.elements, cfg, counters)?;
        seq.partitions.insert(t, parts.elements);
        let p_box = match refined {
            Region::Box(b) => match b.intersection(coarse)? {
                Region::Box(b) => b,
                Region::Empty => {
                    empty_from(&mut seq, t, tau);
                    break;
                }
            },
            Region::Empty => {
                empty_from(&mut seq, t, tau);
                break;
            }
        };
        seq.omega.insert(t, crown::relax(net, &p_box)?);
        seq.sets.insert(t, Region::Box(p_box));
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};

    fn bx(lo: &[f64], hi: &[f64]) -> Hyperrectangle {
        Hyperrectangle::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    fn di() -> LinearSystem {
        LinearSystem::new(
            Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            Matrix::from_rows(vec![vec![0.5], vec![1.0]]).unwrap(),
            vec![0.0, 0.0],
            bx(&[-1.0], &[1.0]),
            bx(&[-10.0, -10.0], &[10.0, 10.0]),
        )
        .unwrap()
    }

    fn linear_policy(k: &[f64]) -> FeedforwardNetwork {
        FeedforwardNetwork::new(
            k.len(),
            vec![Layer::new(Matrix::from_rows(vec![k.to_vec()]).unwrap(), vec![0.0], Activation::Identity).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn double_integrator_backreachable() {
        let r = backreachable_set(&di(), &bx(&[-1.0, -1.0], &[1.0, 1.0])).unwrap();
        let b = r.as_box().unwrap();
        let want = [(-2.5, 2.5), (-2.0, 2.0)];
        for k in 0..2 {
            assert!((b.lo()[k] - want[k].0).abs() < 1e-9 && (b.hi()[k] - want[k].1).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_system_backreachable() {
        let sys = LinearSystem::new(
            Matrix::identity(2),
            Matrix::identity(2),
            vec![0.0, 0.0],
            bx(&[-1.0, -1.0], &[1.0, 1.0]),
            bx(&[-1.5, -5.0], &[5.0, 5.0]),
        )
        .unwrap();
        let r = backreachable_set(&sys, &bx(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert_eq!(r.as_box().unwrap(), &bx(&[-1.0, -1.0], &[2.0, 2.0]));
    }

    #[test]
    fn skip_filter_cases() {
        let e = bx(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(!skip_lp_filter(&Region::Empty, &e, Face::Min(0)));
        let u = Region::Box(bx(&[-1.0, -1.0], &[2.0, 2.0]));
        assert!(faces(2).all(|f| skip_lp_filter(&u, &e, f)));
        let partial = Region::Box(bx(&[0.5, -1.0], &[2.0, 0.5]));
        assert!(!skip_lp_filter(&partial, &e, Face::Min(0)));
        assert!(skip_lp_filter(&partial, &e, Face::Max(0)));
        assert!(!skip_lp_filter(&partial, &e, Face::Max(1)));
    }

    #[test]
    fn affine_policy_matches_preimage() {
        // u = -0.5 x0 - x1 keeps |u| small near the origin; closed loop x' = M x
        let sys = LinearSystem::new(
            Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            Matrix::from_rows(vec![vec![0.5], vec![1.0]]).unwrap(),
            vec![0.0, 0.0],
            bx(&[-100.0], &[100.0]),
            bx(&[-10.0, -10.0], &[10.0, 10.0]),
        )
        .unwrap();
        let net = linear_policy(&[-0.5, -1.0]);
        let cfg = BpConfig::new(1, PartitionSpec::Uniform(vec![1, 1]), Mode::Concrete);
        let run = hybreach(&sys, &net, &bx(&[-1.0, -1.0], &[1.0, 1.0]), &cfg).unwrap();
        // M = [[0.75, 0.5], [-0.5, 0]]: x1 = -2 y0... solve M x = y over the unit box
        // M^-1 = [[0, -2], [2, 3]] so x0 in [-2, 2], x1 in [-5, 5]
        let b = run.sets.get(-1).unwrap().as_box().unwrap().clone();
        assert!((b.lo()[0] + 2.0).abs() < 1e-7 && (b.hi()[0] - 2.0).abs() < 1e-7, "{b:?}");
        assert!((b.lo()[1] + 5.0).abs() < 1e-7 && (b.hi()[1] - 5.0).abs() < 1e-7, "{b:?}");
    }

    #[test]
    fn steering_away_gives_empty() {
        let net = FeedforwardNetwork::new(
            2,
            vec![Layer::new(Matrix::zeros(1, 2), vec![1.0], Activation::Identity).unwrap()],
        )
        .unwrap();
        // target unreachable from anywhere with u = 1 when velocity must exceed X
        let sys = LinearSystem::new(
            Matrix::identity(2),
            Matrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap(),
            vec![0.0, 0.0],
            bx(&[-1.0], &[1.0]),
            bx(&[-1.0, -1.0], &[1.0, 1.0]),
        )
        .unwrap();
        let cfg = BpConfig::new(3, PartitionSpec::Uniform(vec![2, 2]), Mode::Symbolic);
        let run = hybreach(&sys, &net, &bx(&[-1.0, -1.0], &[1.0, -0.5]), &cfg).unwrap();
        for t in -3..=-1 {
            assert!(run.sets.get(t).unwrap().is_empty(), "t={t}");
        }
    }

    #[test]
    fn skip_and_template_reuse_are_exact() {
        let net = linear_policy(&[-0.3, -0.6]);
        let target = bx(&[-1.0, -1.0], &[1.0, 1.0]);
        let mut cfg = BpConfig::new(3, PartitionSpec::Uniform(vec![3, 3]), Mode::Symbolic);
        let a = hybreach(&di(), &net, &target, &cfg).unwrap();
        cfg.skip_lp = false;
        cfg.reuse_templates = false;
        let b = hybreach(&di(), &net, &target, &cfg).unwrap();
        assert_eq!(a.sets.sets, b.sets.sets);
        assert_eq!(b.stats.bp_lps, 2 * 2 * 9 * 3);
        assert!(a.stats.bp_lps < b.stats.bp_lps);
    }

    #[test]
    fn template_instantiation_equals_fresh_build() {
        let sys = di();
        let net = linear_policy(&[-0.3, -0.6]);
        let next = bx(&[-1.0, -1.0], &[1.0, 1.0]);
        let e = bx(&[0.0, 0.0], &[1.0, 1.0]);
        let relax = crown::relax(&net, &e).unwrap();
        let t = LpTemplate::build(&sys, &[], &next);
        assert_eq!(t.instantiate(&e, &relax), LpTemplate::build(&sys, &[], &next).instantiate(&e, &relax));
    }
}
