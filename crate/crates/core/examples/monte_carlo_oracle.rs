//! Sampled ground truth: rollouts, the true BP hull and collision counts.
//!
//! `cargo run --release --example monte_carlo_oracle`

use backreach::oracle::{sample_point, simulate, true_bp_hull};
use backreach::scenario::build_benchmark;

fn main() -> backreach::Result<()> {
    for name in ["ground_robot_linear", "ground_robot_linear_faulty"] {
        let sc = build_benchmark(name)?;
        let net = sc.policy()?;
        let plant = sc.system.plant();
        let tau = sc.config.tau();
        let hits = (0..5000)
            .filter(|&i| {
                let tr = simulate(&plant, &net, &sample_point(&sc.initial, 1, i), tau).expect("rollout");
                tr.states[1..].iter().any(|x| sc.target.contains(x).unwrap_or(false))
            })
            .count();
        println!("{name}: {hits}/5000 rollouts from X_0 reach X_T");
        for s in 1..=3 {
            let est = true_bp_hull(&plant, &net, &sc.target, s, plant.state_space(), 100_000, 2)?;
            println!("  {s} steps back: {} reaching samples, hull {:?}", est.reaching.len(), est.hull);
        }
    }
    Ok(())
}
