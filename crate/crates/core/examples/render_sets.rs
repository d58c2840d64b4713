//! Draw the faulty robot's BP sets, X_T and X_0 as an SVG.
//!
//! `cargo run --release --example render_sets -- robot.svg`

use backreach::render::{render_svg, RenderOptions};
use backreach::scenario::{build_benchmark, run_pipeline};

fn main() -> backreach::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "robot.svg".into());
    let sc = build_benchmark("ground_robot_linear_faulty")?;
    let (seq, _) = run_pipeline(&sc, &sc.policy()?)?;
    let svg = render_svg(
        &seq,
        &RenderOptions {
            initial: Some(sc.initial.clone()),
            show_partitions: true,
            ..RenderOptions::default()
        },
    )?;
    std::fs::write(&out, svg).expect("write svg");
    println!("wrote {out}");
    Ok(())
}
