//! Guided partitioning on its own: split a box around sampled states.
//!
//! `cargo run --release --example partition_elements`

use backreach::geom::{Hyperrectangle, Region};
use backreach::oracle::sample_point;
use backreach::partition::{guided_partition, l1_overhang, GuidedContext};

fn main() -> backreach::Result<()> {
    let domain = Hyperrectangle::new(vec![-4.0, -4.0], vec![4.0, 4.0])?;
    let q = Hyperrectangle::new(vec![-1.0, 0.5], vec![0.5, 2.0])?;
    let samples: Vec<Vec<f64>> = (0..200).map(|i| sample_point(&q, 7, i)).collect();
    let feasible = |_: &Hyperrectangle| Ok(true);
    let ctx = GuidedContext {
        q: Region::Box(q.clone()),
        samples: &samples,
        feasible: &feasible,
    };
    for e in guided_partition(&domain, &ctx, 8, 1e-4)? {
        println!(
            "lo={:?} hi={:?} overhang={:.3}",
            e.region.lo(),
            e.region.hi(),
            l1_overhang(&e.region, &q)?
        );
    }
    Ok(())
}
