//! Concrete and symbolic BP sets for the unicycle-style robot through its
//! piecewise-linear abstraction. Each step solves several MILPs, so expect
//! minutes per step on one core.
//!
//! `cargo run --release --example nonlinear_robot -- [tau] [period]`

use backreach::nonlinear::{nl_backreach, NlBpConfig};
use backreach::scenario::{build_benchmark, RunConfig, SystemSpec};

fn main() -> backreach::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let tau = args.next().unwrap_or(1);
    let period = args.next().unwrap_or(1);
    let sc = build_benchmark("ground_robot_nonlinear")?;
    let (SystemSpec::Nonlinear(model), RunConfig::Nonlinear(base)) = (&sc.system, &sc.config) else {
        unreachable!("robot scenario is nonlinear")
    };
    let cfg = NlBpConfig {
        tau,
        symbolic_period: period,
        ..base.clone()
    };
    let net = sc.policy()?;
    println!("policy: {} relu neurons", net.relu_count());
    let run = nl_backreach(model, &net, &sc.target, &cfg)?;
    for t in (-(tau as i32)..0).rev() {
        println!("t={t}: concrete {:?}", run.concrete.get(&t));
        println!("      kept     {:?} bound-only faces {:?}", run.sets.get(t), run.sets.bound_only.get(&t));
    }
    println!("{:?}", run.stats);
    Ok(())
}
