//! Piecewise-linear bounds on sin, cos and x^2 with a gap of at most epsilon.
//!
//! `cargo run --release --example scalar_bounds`

use backreach::overt::{bound_scalar, max_gap, ScalarFn};

fn main() -> backreach::Result<()> {
    for (f, a, b) in [(ScalarFn::Sin, 0.0, 2.0 * std::f64::consts::PI), (ScalarFn::Cos, -1.0, 2.5), (ScalarFn::Square, -2.0, 3.0)] {
        for eps in [0.5, 0.1, 0.01] {
            let (lo, hi) = bound_scalar(f, a, b, eps)?;
            println!(
                "{f:?} on [{a:.2}, {b:.2}] eps={eps}: {} lower and {} upper segments, gap {:.4}",
                lo.segments(),
                hi.segments(),
                max_gap(&lo, &hi)
            );
        }
    }
    Ok(())
}
