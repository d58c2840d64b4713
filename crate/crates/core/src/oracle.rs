//! Monte-Carlo ground truth for backprojection sets.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{io_err, Error, Result};
use crate::geom::{Hyperrectangle, Region};
use crate::nn::{FeedforwardNetwork, SparseForward};
use crate::system::Plant;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
}

/// Closed-loop rollout with `u = net(x)`.
pub fn simulate(plant: &Plant, net: &FeedforwardNetwork, x0: &[f64], steps: usize) -> Result<Trajectory> {
    if x0.len() != plant.n_x() {
        return Err(Error::DimensionMismatch {
            expected: plant.n_x(),
            found: x0.len(),
        });
    }
    let fwd = SparseForward::new(net);
    Ok(rollout(plant, &fwd, x0, steps))
}

fn rollout(plant: &Plant, fwd: &SparseForward, x0: &[f64], steps: usize) -> Trajectory {
    let mut states = vec![x0.to_vec()];
    let mut inputs = Vec::with_capacity(steps);
    for _ in 0..steps {
        let x = states.last().expect("non-empty");
        let u = fwd.eval(x);
        let next = plant.step(x, &u);
        inputs.push(u);
        states.push(next);
    }
    Trajectory { states, inputs }
}

/// Sample `index` of the stream for `seed`, uniform over `domain`.
/// Streams are counter-based, so the first `n` samples never depend on the total.
pub fn sample_point(domain: &Hyperrectangle, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..domain.dim())
        .map(|k| {
            let (l, h) = (domain.lo()[k], domain.hi()[k]);
            if h > l {
                rng.gen_range(l..=h)
            } else {
                l
            }
        })
        .collect()
}

/// True when the rollout from `x` stays in `X` and lands in `target` after exactly `steps` steps.
pub(crate) fn reaches(plant: &Plant, fwd: &SparseForward, x: &[f64], target: &Hyperrectangle, steps: usize) -> bool {
    let space = plant.state_space();
    let mut cur = x.to_vec();
    for _ in 0..steps {
        if !space.contains_unchecked(&cur) {
            return false;
        }
        let u = fwd.eval(&cur);
        cur = plant.step(&cur, &u);
    }
    target.contains_unchecked(&cur)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullEstimate {
    pub hull: Region,
    pub reaching: Vec<Vec<f64>>,
}

/// Tightest box around sampled states that reach `target` in exactly `steps` steps.
pub fn true_bp_hull(
    plant: &Plant,
    net: &FeedforwardNetwork,
    target: &Hyperrectangle,
    steps: usize,
    domain: &Hyperrectangle,
    n: usize,
    seed: u64,
) -> Result<HullEstimate> {
    if n == 0 {
        return Err(Error::EmptyInput("sample count"));
    }
    if domain.dim() != plant.n_x() || target.dim() != plant.n_x() {
        return Err(Error::DimensionMismatch {
            expected: plant.n_x(),
            found: domain.dim(),
        });
    }
    let fwd = SparseForward::new(net);
    let reaching: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .filter_map(|i| {
            let x = sample_point(domain, seed, i);
            reaches(plant, &fwd, &x, target, steps).then_some(x)
        })
        .collect();
    Ok(HullEstimate {
        hull: hull_of(&reaching),
        reaching,
    })
}

pub(crate) fn hull_of(points: &[Vec<f64>]) -> Region {
    let Some(first) = points.first() else {
        return Region::Empty;
    };
    let mut lo = first.clone();
    let mut hi = first.clone();
    for p in &points[1..] {
        for k in 0..p.len() {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Region::Box(Hyperrectangle::new(lo, hi).expect("hull of points is a valid box"))
}

/// `(vol(estimate) - vol(hull)) / vol(hull)`.
pub fn approx_error(estimate: &Region, hull: &Region) -> Result<f64> {
    let a_true = hull.volume();
    if hull.is_empty() || a_true <= 0.0 {
        return Err(Error::DegenerateHull(format!("reference hull has volume {a_true}")));
    }
    Ok((estimate.volume() - a_true) / a_true)
}

/// Writes one sample per line.
pub fn write_samples_csv(path: &Path, samples: &[Vec<f64>]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let dim = samples.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for s in samples {
        let row: Vec<String> = s.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    f.write_all(out.as_bytes()).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::nn::{Activation, Layer};
    use crate::system::LinearSystem;

    fn zero_policy(n_x: usize, n_u: usize) -> FeedforwardNetwork {
        FeedforwardNetwork::new(
            n_x,
            vec![Layer::new(Matrix::zeros(n_u, n_x), vec![0.0; n_u], Activation::Identity).unwrap()],
        )
        .unwrap()
    }

    fn di() -> Plant {
        Plant::Linear(
            LinearSystem::new(
                Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
                Matrix::from_rows(vec![vec![0.5], vec![1.0]]).unwrap(),
                vec![0.0, 0.0],
                Hyperrectangle::new(vec![-1.0], vec![1.0]).unwrap(),
                Hyperrectangle::from_center_radius(&[0.0, 0.0], &[10.0, 10.0]).unwrap(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn double_integrator_coasting() {
        let tr = simulate(&di(), &zero_policy(2, 1), &[1.0, 1.0], 3).unwrap();
        assert_eq!(tr.states, vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![3.0, 1.0], vec![4.0, 1.0]]);
    }

    #[test]
    fn error_arithmetic() {
        let est = Region::Box(Hyperrectangle::new(vec![0.0, 0.0], vec![2.5, 1.0]).unwrap());
        let hull = Region::Box(Hyperrectangle::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap());
        assert!((approx_error(&est, &hull).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(approx_error(&hull, &hull).unwrap(), 0.0);
        assert!(approx_error(&est, &Region::Empty).is_err());
    }

    #[test]
    fn nested_samples() {
        let d = Hyperrectangle::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let a: Vec<_> = (0..10).map(|i| sample_point(&d, 7, i)).collect();
        let b: Vec<_> = (0..10).map(|i| sample_point(&d, 7, i)).collect();
        assert_eq!(a, b);
        assert_ne!(sample_point(&d, 7, 0), sample_point(&d, 8, 0));
    }

    #[test]
    fn unreachable_target_is_empty() {
        let target = Hyperrectangle::new(vec![9.0, 9.0], vec![9.5, 9.5]).unwrap();
        let dom = Hyperrectangle::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let h = true_bp_hull(&di(), &zero_policy(2, 1), &target, 1, &dom, 500, 1).unwrap();
        assert!(h.hull.is_empty());
    }
}
