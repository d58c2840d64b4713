//! LP counts with and without the skip rule and template reuse; the sets
//! come out identical either way.
//!
//! `cargo run --release --example skip_and_reuse`

use backreach::linear::{hybreach, BpConfig, PartitionSpec};
use backreach::scenario::{build_benchmark, RunConfig, SystemSpec};

fn main() -> backreach::Result<()> {
    let sc = build_benchmark("double_integrator")?;
    let (SystemSpec::Linear(sys), RunConfig::Linear(base)) = (&sc.system, &sc.config) else {
        unreachable!("double integrator is linear")
    };
    let net = sc.policy()?;
    let mut reference = None;
    for (skip_lp, reuse_templates) in [(false, false), (false, true), (true, false), (true, true)] {
        let cfg = BpConfig {
            partition: PartitionSpec::Uniform(vec![4, 4]),
            skip_lp,
            reuse_templates,
            ..base.clone()
        };
        let run = hybreach(sys, &net, &sc.target, &cfg)?;
        let json = run.sets.to_json();
        let same = reference.get_or_insert_with(|| json.clone()) == &json;
        println!(
            "skip={skip_lp:5} reuse={reuse_templates:5}: {:4} LPs solved, {:4} skipped, {} ms, identical={same}",
            run.stats.bp_lps, run.stats.skipped_lps, run.stats.wall_ms
        );
    }
    Ok(())
}
