//! Abstract the robot dynamics over a box and check that exact rollouts
//! satisfy every relation of the abstraction.
//!
//! `cargo run --release --example dynamics_abstraction`

use backreach::geom::Hyperrectangle;
use backreach::oracle::sample_point;
use backreach::overt::abstract_dynamics;
use backreach::scenario::{build_benchmark, SystemSpec};

fn main() -> backreach::Result<()> {
    let sc = build_benchmark("ground_robot_nonlinear")?;
    let SystemSpec::Nonlinear(model) = &sc.system else {
        unreachable!("robot scenario is nonlinear")
    };
    let states = Hyperrectangle::new(vec![-3.0, -2.0], vec![1.0, 2.0])?;
    for eps in [0.5, 0.1, 0.02] {
        let abs = abstract_dynamics(model, &states, model.input_set(), eps)?;
        let joint = Hyperrectangle::new(
            states.lo().iter().chain(model.input_set().lo()).copied().collect(),
            states.hi().iter().chain(model.input_set().hi()).copied().collect(),
        )?;
        let ok = (0..2000).all(|i| {
            let p = sample_point(&joint, 1, i);
            abs.satisfied_by(&abs.exact_assignment(&p[..2], &p[2..]), 1e-9)
        });
        println!("eps={eps}: {} intermediate variables, exact points satisfy it: {ok}", abs.intermediate_count());
    }
    Ok(())
}
