//! Uniform and guided partitioning of backreachable sets.

use crate::error::{Error, Result};
use crate::geom::{Hyperrectangle, Region};
use crate::nn::FeedforwardNetwork;
use crate::oracle::{true_bp_hull, HullEstimate};
use crate::system::Plant;

/// Cells of a uniform `r[0] x r[1] x ...` grid over `b`.
pub fn uniform_partition(b: &Hyperrectangle, r: &[usize]) -> Result<Vec<Hyperrectangle>> {
    if r.len() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: r.len(),
        });
    }
    if let Some(k) = r.iter().position(|&v| v == 0) {
        return Err(Error::Config(format!("partition count on axis {k} must be at least 1")));
    }
    let edges: Vec<Vec<f64>> = (0..b.dim())
        .map(|k| {
            let (lo, hi) = (b.lo()[k], b.hi()[k]);
            (0..=r[k])
                .map(|i| {
                    if i == r[k] {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / r[k] as f64
                    }
                })
                .collect()
        })
        .collect();
    let total: usize = r.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; b.dim()];
    for _ in 0..total {
        let lo: Vec<f64> = (0..b.dim()).map(|k| edges[k][idx[k]]).collect();
        let hi: Vec<f64> = (0..b.dim()).map(|k| edges[k][idx[k] + 1]).collect();
        out.push(Hyperrectangle::new(lo, hi)?);
        // last axis fastest
        for k in (0..b.dim()).rev() {
            idx[k] += 1;
            if idx[k] < r[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

/// L1 gap between two boxes; zero when they intersect.
pub fn l1_distance(b: &Hyperrectangle, q: &Hyperrectangle) -> Result<f64> {
    if b.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: q.dim(),
        });
    }
    Ok((0..b.dim())
        .map(|k| (q.lo()[k] - b.hi()[k]).max(b.lo()[k] - q.hi()[k]).max(0.0))
        .sum())
}

/// Monte-Carlo under-estimate `Q` of the BP set `steps` steps back, sampled over `domain`.
pub fn estimate_bp_set(
    plant: &Plant,
    net: &FeedforwardNetwork,
    target: &Hyperrectangle,
    steps: usize,
    domain: &Hyperrectangle,
    n_samples: usize,
    seed: u64,
) -> Result<HullEstimate> {
    true_bp_hull(plant, net, target, steps, domain, n_samples, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionElement {
    pub region: Hyperrectangle,
    pub value: f64,
    pub should_split: bool,
    /// Known to contain no backprojection state.
    pub infeasible: bool,
}

/// Inputs to guided partitioning besides the box itself.
pub struct GuidedContext<'a> {
    /// Monte-Carlo under-estimate of the BP set.
    pub q: Region,
    /// The sampled states behind `q`.
    pub samples: &'a [Vec<f64>],
    /// Satisfiability of the BP constraints restricted to a box.
    pub feasible: &'a (dyn Fn(&Hyperrectangle) -> Result<bool> + Sync),
}

/// L1 size of the parts of `b` sticking out of `q`; zero iff `b ⊆ q`.
pub fn l1_overhang(b: &Hyperrectangle, q: &Hyperrectangle) -> Result<f64> {
    if b.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: q.dim(),
        });
    }
    Ok((0..b.dim())
        .map(|k| (q.lo()[k] - b.lo()[k]).max(0.0) + (b.hi()[k] - q.hi()[k]).max(0.0))
        .sum())
}

fn value_of(b: &Hyperrectangle, q: &Region) -> Result<f64> {
    match q {
        Region::Box(q) => l1_overhang(b, q),
        Region::Empty => Ok(b.volume()),
    }
}

/// Flush cut against the hull of the samples strictly inside `b`, or `None`
/// when no cut leaves a sample-free slab. Samples on a face of `b` already
/// sit in the neighbouring element.
fn sample_cut(b: &Hyperrectangle, samples: &[Vec<f64>]) -> Option<(usize, f64)> {
    let interior = |s: &Vec<f64>| (0..b.dim()).all(|k| b.lo()[k] < s[k] && s[k] < b.hi()[k]);
    let inside: Vec<&Vec<f64>> = samples.iter().filter(|s| interior(s)).collect();
    let first = inside.first()?;
    let n = b.dim();
    let mut lo = (*first).clone();
    let mut hi = (*first).clone();
    for s in &inside[1..] {
        for k in 0..n {
            lo[k] = lo[k].min(s[k]);
            hi[k] = hi[k].max(s[k]);
        }
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for k in 0..n {
        let min_margin = 1e-3 * b.width(k);
        for (cut, margin) in [(lo[k], lo[k] - b.lo()[k]), (hi[k], b.hi()[k] - hi[k])] {
            if margin > min_margin && best.map_or(true, |(_, _, m)| margin > m) {
                best = Some((k, cut, margin));
            }
        }
    }
    best.map(|(k, c, _)| (k, c))
}

fn split(b: &Hyperrectangle, samples: &[Vec<f64>]) -> (Hyperrectangle, Hyperrectangle) {
    match sample_cut(b, samples) {
        Some((k, c)) => b.split_at(k, c),
        None => {
            let k = b.longest_axis();
            b.split_at(k, 0.5 * (b.lo()[k] + b.hi()[k]))
        }
    }
}

/// Budgeted splitting that spends cells far from the estimate `q` first.
pub fn guided_partition(
    b: &Hyperrectangle,
    ctx: &GuidedContext<'_>,
    r: usize,
    v_m: f64,
) -> Result<Vec<PartitionElement>> {
    if r == 0 {
        return Err(Error::Config("partition budget must be at least 1".into()));
    }
    if !(v_m > 0.0) {
        return Err(Error::Config(format!("minimum element volume must be positive, got {v_m}")));
    }
    if !(ctx.feasible)(b)? {
        return Ok(Vec::new());
    }
    let mut seq = 0u64;
    // (element, insertion sequence); kept sorted by (value, splittable, seq)
    let mut queue: Vec<(PartitionElement, u64)> = vec![(
        PartitionElement {
            region: b.clone(),
            value: value_of(b, &ctx.q)?,
            should_split: b.volume() > v_m,
            infeasible: false,
        },
        seq,
    )];
    while queue.len() < r && queue.last().is_some_and(|(e, _)| e.should_split) {
        let (parent, _) = queue.pop().expect("non-empty");
        let (c0, c1) = split(&parent.region, ctx.samples);
        let children = [c0, c1];
        let feas: Vec<bool> = children.iter().map(|c| (ctx.feasible)(c)).collect::<Result<_>>()?;
        for (c, ok) in children.into_iter().zip(feas) {
            seq += 1;
            let terminal = !ok || c.volume() <= v_m;
            let value = if terminal { 0.0 } else { value_of(&c, &ctx.q)? };
            let e = PartitionElement {
                region: c,
                value,
                should_split: !terminal,
                infeasible: !ok,
            };
            let key = (e.value, e.should_split, seq);
            let pos = queue.partition_point(|(o, s)| {
                (o.value, o.should_split, *s).partial_cmp(&key) == Some(std::cmp::Ordering::Less)
            });
            queue.insert(pos, (e, seq));
        }
    }
    Ok(queue.into_iter().map(|(e, _)| e).collect())
}
