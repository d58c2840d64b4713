//! Affine CROWN bounds on a policy network versus sampled outputs.
//!
//! `cargo run --release --example crown_relaxation`

use backreach::crown;
use backreach::geom::Hyperrectangle;
use backreach::oracle::sample_point;
use backreach::scenario::build_benchmark;

fn main() -> backreach::Result<()> {
    let net = build_benchmark("ground_robot_linear")?.policy()?;
    for half in [0.25, 1.0, 3.0] {
        let dom = Hyperrectangle::from_center_radius(&[-4.0, 1.0], &[half, half])?;
        let relax = crown::relax(&net, &dom)?;
        let (lo, hi) = relax.output_range();
        let mut seen_lo = vec![f64::INFINITY; net.output_dim()];
        let mut seen_hi = vec![f64::NEG_INFINITY; net.output_dim()];
        for i in 0..5000 {
            let y = net.evaluate(&sample_point(&dom, 3, i))?;
            for k in 0..y.len() {
                seen_lo[k] = seen_lo[k].min(y[k]);
                seen_hi[k] = seen_hi[k].max(y[k]);
            }
        }
        println!("half-width {half}: CROWN [{lo:.3?}, {hi:.3?}] sampled [{seen_lo:.3?}, {seen_hi:.3?}]");
    }
    Ok(())
}
