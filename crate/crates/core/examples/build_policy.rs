//! Build the ground-robot policy network from its spec, smoke-test it and
//! write it as JSON.
//!
//! `cargo run --release --example build_policy -- robot_policy.json`

use backreach::nn::save_network;
use backreach::oracle::sample_point;
use backreach::policy::{build_policy, smoke_test, PolicySpec};
use backreach::scenario::build_benchmark;

fn main() -> backreach::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "robot_policy.json".into());
    let sc = build_benchmark("ground_robot_linear")?;
    let starts: Vec<Vec<f64>> = (0..500).map(|i| sample_point(&sc.initial, 0, i)).collect();
    for faulty in [false, true] {
        let spec = PolicySpec::GroundRobot {
            resolution: 1.0,
            half_width: 10.0,
            faulty,
            faulty_band: 1.0,
            exp_offset: -2.0,
        };
        let net = build_policy(&spec)?;
        let smoke = smoke_test(&sc.system.plant(), &net, &starts, &sc.target, 9);
        println!("faulty={faulty}: {} relu neurons, smoke test {:?}", net.relu_count(), smoke.map(|_| "passed"));
        if !faulty {
            save_network(&net, std::path::Path::new(&out))?;
            println!("wrote {out}");
        }
    }
    Ok(())
}
