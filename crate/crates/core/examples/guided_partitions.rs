//! Final-step error of guided partitioning as the budget grows.
//!
//! `cargo run --release --example guided_partitions`

use backreach::scenario::build_benchmark;
use backreach::sweep::{sweep_partitions, to_csv};

fn main() -> backreach::Result<()> {
    let sc = build_benchmark("double_integrator")?;
    let rows = sweep_partitions(&sc, &[1, 2, 4, 8, 16, 32, 64], 100_000)?;
    print!("{}", to_csv("r", &rows));
    Ok(())
}
