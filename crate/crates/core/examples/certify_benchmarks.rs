//! Certify the shipped linear benchmarks and print each verdict.
//!
//! `cargo run --release --example certify_benchmarks`

use backreach::scenario::{build_benchmark, certify};

fn main() -> backreach::Result<()> {
    for name in ["double_integrator", "ground_robot_linear", "ground_robot_linear_faulty", "quadrotor_6d"] {
        let cert = certify(&build_benchmark(name)?);
        println!(
            "{name:28} {:?} horizon={} invariant={} meets X_0 at {:?} ({} ms)",
            cert.verdict, cert.horizon, cert.invariance, cert.intersecting, cert.wall_ms
        );
    }
    Ok(())
}
