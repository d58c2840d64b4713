//! Load a scenario JSON, validate it, override the seed and round-trip it.
//!
//! `cargo run --release --example scenario_files -- scenarios/double_integrator.json`

use backreach::scenario::{certify, Scenario};

fn main() -> backreach::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "scenarios/double_integrator.json".into());
    let sc = Scenario::load(std::path::Path::new(&path))?.with_seed(42);
    println!("{}: {}-step horizon, seed {}", sc.name, sc.config.tau(), sc.seed);
    let back = Scenario::from_json_str(&sc.to_json_string()?)?;
    println!("round trip preserves the scenario: {}", back.to_json_string()? == sc.to_json_string()?);
    println!("verdict: {:?}", certify(&sc).verdict);
    Ok(())
}
