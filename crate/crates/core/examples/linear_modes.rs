//! Concrete, symbolic and refined BP sets for the double integrator, scored
//! against a Monte-Carlo hull.
//!
//! `cargo run --release --example linear_modes`

use backreach::geom::Region;
use backreach::linear::{hybreach, BpConfig, Mode};
use backreach::scenario::{build_benchmark, RunConfig, SystemSpec};
use backreach::sweep::final_errors;

fn main() -> backreach::Result<()> {
    let sc = build_benchmark("double_integrator")?;
    let (SystemSpec::Linear(sys), RunConfig::Linear(base)) = (&sc.system, &sc.config) else {
        unreachable!("double integrator is linear")
    };
    let net = sc.policy()?;
    let mut runs = Vec::new();
    for mode in [Mode::Concrete, Mode::Symbolic, Mode::Refine] {
        let run = hybreach(sys, &net, &sc.target, &BpConfig { mode, ..base.clone() })?;
        println!("{mode:?}: {} LPs, {} skipped", run.stats.bp_lps, run.stats.skipped_lps);
        for (t, r) in run.sets.sets.iter().rev().skip(1) {
            if let Region::Box(b) = r {
                println!("  t={t:3}  lo={:?}  hi={:?}", b.lo(), b.hi());
            }
        }
        runs.push(run.sets);
    }
    let errors = final_errors(&sc, &runs, 100_000)?;
    println!("final-step error: concrete {:.4}, symbolic {:.4}, refine {:.4}", errors[0], errors[1], errors[2]);
    Ok(())
}
