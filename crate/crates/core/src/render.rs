//! Dependency-free SVG figures of BP sets.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{Hyperrectangle, Region, TimedSetSequence};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;

/// Colors cycled over timesteps, nearest step first.
const PALETTE: [&str; 8] = [
    "#1f77b4", "#2ca02c", "#9467bd", "#17becf", "#8c564b", "#e377c2", "#bcbd22", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderOptions {
    /// State coordinates drawn on the horizontal and vertical axes;
    /// required when the state is not 2-D.
    pub axes: Option<(usize, usize)>,
    pub initial: Option<Hyperrectangle>,
    pub show_partitions: bool,
}

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = (WIDTH - 2.0 * MARGIN) / (self.hi[0] - self.lo[0]);
        let sy = (HEIGHT - 2.0 * MARGIN) / (self.hi[1] - self.lo[1]);
        (MARGIN + (x - self.lo[0]) * sx, HEIGHT - MARGIN - (y - self.lo[1]) * sy)
    }

    fn rect(&self, out: &mut String, b: &[f64; 4], style: &str, title: &str) {
        let (x0, y0) = self.px(b[0], b[3]);
        let (x1, y1) = self.px(b[2], b[1]);
        let _ = writeln!(
            out,
            r#"  <rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" {style}><title>{title}</title></rect>"#,
            (x1 - x0).max(0.5),
            (y1 - y0).max(0.5)
        );
    }
}

fn project(b: &Hyperrectangle, (i, j): (usize, usize)) -> [f64; 4] {
    [b.lo()[i], b.lo()[j], b.hi()[i], b.hi()[j]]
}

/// One rectangle per timestep plus `X_T` and, when given, `X_0`.
pub fn render_svg(seq: &TimedSetSequence, opts: &RenderOptions) -> Result<String> {
    let n = seq.target().dim();
    let axes = match opts.axes {
        Some(a) => a,
        None if n == 2 => (0, 1),
        None => return Err(Error::Config(format!("state has {n} dimensions; pick a coordinate pair with --axes"))),
    };
    let (i, j) = axes;
    if i >= n || j >= n || i == j {
        return Err(Error::Config(format!("axes ({i}, {j}) are not a pair of distinct coordinates below {n}")));
    }
    let mut boxes: Vec<(i32, [f64; 4])> = seq
        .sets
        .iter()
        .filter_map(|(&t, r)| match r {
            Region::Box(b) if t < 0 => Some((t, project(b, axes))),
            _ => None,
        })
        .collect();
    boxes.sort_by_key(|(t, _)| std::cmp::Reverse(*t));
    let target = project(seq.target(), axes);
    let initial = opts.initial.as_ref().map(|b| project(b, axes));
    let mut lo = [target[0], target[1]];
    let mut hi = [target[2], target[3]];
    for b in boxes.iter().map(|(_, b)| b).chain(initial.iter()) {
        lo = [lo[0].min(b[0]), lo[1].min(b[1])];
        hi = [hi[0].max(b[2]), hi[1].max(b[3])];
    }
    for k in 0..2 {
        let pad = 0.05 * (hi[k] - lo[k]).max(1e-9);
        lo[k] -= pad;
        hi[k] += pad;
    }
    let frame = Frame { lo, hi };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"  <rect width="100%" height="100%" fill="white"/>"#);
    let (ax0, ay0) = frame.px(lo[0], lo[1]);
    let (ax1, ay1) = frame.px(hi[0], hi[1]);
    let _ = writeln!(
        out,
        r##"  <rect x="{ax0:.2}" y="{ay1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        ax1 - ax0,
        ay0 - ay1
    );
    let _ = writeln!(
        out,
        r#"  <text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">x{i}</text>"#,
        0.5 * (ax0 + ax1),
        HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"  <text x="12" y="{:.2}" font-size="12" text-anchor="middle">x{j}</text>"#,
        0.5 * (ay0 + ay1)
    );
    for (k, (t, b)) in boxes.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if opts.show_partitions {
            for cell in seq.partitions.get(t).into_iter().flatten() {
                frame.rect(
                    &mut out,
                    &project(cell, axes),
                    &format!(r#"fill="none" stroke="{color}" stroke-opacity="0.3" stroke-width="0.5""#),
                    &format!("partition t={t}"),
                );
            }
        }
        frame.rect(
            &mut out,
            b,
            &format!(r#"fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="1.5""#),
            &format!("P t={t}"),
        );
    }
    frame.rect(
        &mut out,
        &target,
        r##"fill="#d62728" fill-opacity="0.4" stroke="#d62728" stroke-width="1.5""##,
        "X_T",
    );
    if let Some(b) = &initial {
        frame.rect(
            &mut out,
            b,
            r##"fill="#ff7f0e" fill-opacity="0.4" stroke="#ff7f0e" stroke-width="1.5""##,
            "X_0",
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
