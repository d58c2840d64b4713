//! Exact maximum of a ReLU network over a box through the big-M encoding.
//!
//! `cargo run --release --example milp_network_max`

use backreach::crown;
use backreach::geom::Hyperrectangle;
use backreach::scenario::build_benchmark;
use backreach::solver::{encode_relu_bigm, solve_milp, MixedIntegerProgram, Sense};

fn main() -> backreach::Result<()> {
    let net = build_benchmark("ground_robot_linear")?.policy()?;
    let dom = Hyperrectangle::new(vec![-3.0, -1.0], vec![-1.5, 1.0])?;
    let bounds = crown::layer_bounds(&net, &dom)?;
    for out in 0..net.output_dim() {
        for sense in [Sense::Max, Sense::Min] {
            let mut mip = MixedIntegerProgram::new();
            let x = mip.lp.add_vars(dom.lo(), dom.hi());
            let enc = encode_relu_bigm(&mut mip, &net, &x, &bounds).map_err(backreach::Error::from)?;
            mip.lp.set_objective(&[(enc.outputs[out], 1.0)], sense);
            let res = solve_milp(&mip, 1e-9, 100_000).map_err(backreach::Error::from)?;
            println!(
                "u{out} {sense:?}: {:.6} at x={:.3?} ({} binaries, {} nodes)",
                res.objective,
                &res.x[..2],
                enc.binaries.len(),
                res.nodes
            );
        }
    }
    Ok(())
}
