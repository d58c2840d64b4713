//! Piecewise-linear upper and lower bounds on scalar nonlinearities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on segments per bound.
pub const MAX_SEGMENTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarFn {
    Sin,
    Cos,
    Square,
}

impl ScalarFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ScalarFn::Sin => x.sin(),
            ScalarFn::Cos => x.cos(),
            ScalarFn::Square => x * x,
        }
    }

    fn deriv(self, x: f64) -> f64 {
        match self {
            ScalarFn::Sin => x.cos(),
            ScalarFn::Cos => -x.sin(),
            ScalarFn::Square => 2.0 * x,
        }
    }

    fn second(self, x: f64) -> f64 {
        match self {
            ScalarFn::Sin => -x.sin(),
            ScalarFn::Cos => -x.cos(),
            ScalarFn::Square => 2.0,
        }
    }

    /// Inflection points strictly inside `(a, b)`.
    fn inflections(self, a: f64, b: f64) -> Vec<f64> {
        let offset = match self {
            ScalarFn::Square => return Vec::new(),
            ScalarFn::Sin => 0.0,
            ScalarFn::Cos => PI / 2.0,
        };
        let k0 = ((a - offset) / PI).floor() as i64;
        let k1 = ((b - offset) / PI).ceil() as i64;
        (k0..=k1)
            .map(|k| offset + k as f64 * PI)
            .filter(|&p| p > a && p < b)
            .collect()
    }

    /// Exact range over `[a, b]`.
    pub fn range(self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = self.eval(a).min(self.eval(b));
        let mut hi = self.eval(a).max(self.eval(b));
        let crit: Vec<f64> = match self {
            ScalarFn::Square => vec![0.0],
            ScalarFn::Sin => ScalarFn::Cos.inflections(a, b),
            ScalarFn::Cos => ScalarFn::Sin.inflections(a, b),
        };
        for c in crit {
            if c >= a && c <= b {
                lo = lo.min(self.eval(c));
                hi = hi.max(self.eval(c));
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Upper,
    Lower,
}

/// Continuous piecewise-linear function in vertex form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearBound {
    pub kind: BoundKind,
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinearBound {
    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        let n = b.len();
        if n == 1 || x <= b[0] {
            return self.extend(0, x);
        }
        if x >= b[n - 1] {
            return self.extend(n - 2, x);
        }
        let i = b.partition_point(|&p| p <= x).min(n - 1) - 1;
        self.extend(i, x)
    }

    fn extend(&self, seg: usize, x: f64) -> f64 {
        if self.breakpoints.len() == 1 {
            return self.values[0];
        }
        let (s, c) = self.line(seg);
        s * x + c
    }

    pub fn segments(&self) -> usize {
        self.breakpoints.len().saturating_sub(1)
    }

    /// Slope and intercept of segment `i`.
    pub fn line(&self, i: usize) -> (f64, f64) {
        let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let s = if x1 > x0 { (y1 - y0) / (x1 - x0) } else { 0.0 };
        (s, y0 - s * x0)
    }

    pub fn lines(&self) -> Vec<(f64, f64)> {
        (0..self.segments()).map(|i| self.line(i)).collect()
    }

    fn slopes_monotone(&self, increasing: bool) -> bool {
        let l = self.lines();
        l.windows(2).all(|w| {
            if increasing {
                w[1].0 >= w[0].0 - 1e-12
            } else {
                w[1].0 <= w[0].0 + 1e-12
            }
        })
    }

    /// True when the bound can be written as plain inequalities: an upper
    /// bound that is concave or a lower bound that is convex.
    pub fn is_line_representable(&self) -> bool {
        match self.kind {
            BoundKind::Upper => self.slopes_monotone(false),
            BoundKind::Lower => self.slopes_monotone(true),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

const PAD: f64 = 1e-12;

/// One monotone-curvature piece with `n` uniform sub-segments.
fn piece_bounds(f: ScalarFn, p: f64, q: f64, n: usize) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let concave = f.second(0.5 * (p + q)) < 0.0;
    let h = (q - p) / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| if i == n { q } else { p + h * i as f64 }).collect();
    let chord: Vec<(f64, f64)> = nodes.iter().map(|&x| (x, f.eval(x))).collect();
    // tangent envelope at sub-segment midpoints
    let tangents: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let m = 0.5 * (nodes[i] + nodes[i + 1]);
            let s = f.deriv(m);
            (s, f.eval(m) - s * m)
        })
        .collect();
    let mut env = vec![(p, tangents[0].0 * p + tangents[0].1)];
    for i in 0..n - 1 {
        let (s0, c0) = tangents[i];
        let (s1, c1) = tangents[i + 1];
        let x = if (s0 - s1).abs() > 1e-15 {
            ((c1 - c0) / (s0 - s1)).clamp(nodes[i], nodes[i + 2])
        } else {
            nodes[i + 1]
        };
        // the max (convex) or min (concave) of the two tangents at x
        let y = if concave {
            (s0 * x + c0).min(s1 * x + c1)
        } else {
            (s0 * x + c0).max(s1 * x + c1)
        };
        env.push((x, y));
    }
    let (s, c) = tangents[n - 1];
    env.push((q, s * q + c));
    if concave {
        (chord, env)
    } else {
        (env, chord)
    }
}

fn assemble(
    f: ScalarFn,
    pieces: &[(f64, f64)],
    counts: &[usize],
) -> (PiecewiseLinearBound, PiecewiseLinearBound) {
    let mut lo_pts: Vec<(f64, f64)> = Vec::new();
    let mut hi_pts: Vec<(f64, f64)> = Vec::new();
    for (&(p, q), &n) in pieces.iter().zip(counts) {
        let (l, u) = piece_bounds(f, p, q, n);
        join(&mut lo_pts, &l, f64::min);
        join(&mut hi_pts, &u, f64::max);
    }
    let to_bound = |pts: Vec<(f64, f64)>, kind: BoundKind, pad: f64| {
        let pts = dedup(pts, if pad < 0.0 { f64::min } else { f64::max });
        PiecewiseLinearBound {
            kind,
            breakpoints: pts.iter().map(|p| p.0).collect(),
            values: pts.iter().map(|p| p.1 + pad * (1.0 + p.1.abs())).collect(),
        }
    };
    (
        to_bound(lo_pts, BoundKind::Lower, -PAD),
        to_bound(hi_pts, BoundKind::Upper, PAD),
    )
}

fn join(acc: &mut Vec<(f64, f64)>, next: &[(f64, f64)], pick: fn(f64, f64) -> f64) {
    if let Some(last) = acc.last_mut() {
        last.1 = pick(last.1, next[0].1);
        acc.extend_from_slice(&next[1..]);
    } else {
        acc.extend_from_slice(next);
    }
}

fn dedup(pts: Vec<(f64, f64)>, pick: fn(f64, f64) -> f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last_mut() {
            Some(l) if p.0 <= l.0 => l.1 = pick(l.1, p.1),
            _ => out.push(p),
        }
    }
    if out.len() == 1 {
        out.push(out[0]);
    }
    out
}

fn split_points(f: ScalarFn, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    cuts.extend(f.inflections(a, b));
    cuts.push(b);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Maximum of `upper - lower`, attained at a breakpoint of either bound.
pub fn max_gap(lower: &PiecewiseLinearBound, upper: &PiecewiseLinearBound) -> f64 {
    lower
        .breakpoints
        .iter()
        .chain(&upper.breakpoints)
        .map(|&x| upper.eval(x) - lower.eval(x))
        .fold(0.0, f64::max)
}

/// Bounds with exactly `n` sub-segments on every curvature piece.
pub fn bound_scalar_uniform(
    f: ScalarFn,
    a: f64,
    b: f64,
    n: usize,
) -> Result<(PiecewiseLinearBound, PiecewiseLinearBound)> {
    check_interval(a, b)?;
    if a == b {
        return Ok(point_bounds(f, a));
    }
    let pieces = split_points(f, a, b);
    Ok(assemble(f, &pieces, &vec![n.max(1); pieces.len()]))
}

fn point_bounds(f: ScalarFn, a: f64) -> (PiecewiseLinearBound, PiecewiseLinearBound) {
    let v = f.eval(a);
    let mk = |kind, d: f64| PiecewiseLinearBound {
        kind,
        breakpoints: vec![a],
        values: vec![v + d * (1.0 + v.abs())],
    };
    (mk(BoundKind::Lower, -PAD), mk(BoundKind::Upper, PAD))
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("scalar bound interval"));
    }
    if a > b {
        return Err(Error::InvalidBounds { axis: 0, lo: a, hi: b });
    }
    Ok(())
}

/// Sound lower/upper bounds on `f` over `[a, b]` whose gap is at most `epsilon`.
pub fn bound_scalar(
    f: ScalarFn,
    a: f64,
    b: f64,
    epsilon: f64,
) -> Result<(PiecewiseLinearBound, PiecewiseLinearBound)> {
    check_interval(a, b)?;
    if !(epsilon > 0.0) {
        return Err(Error::Abstraction(format!("epsilon must be positive, got {epsilon}")));
    }
    if a == b {
        return Ok(point_bounds(f, a));
    }
    let pieces = split_points(f, a, b);
    let mut counts = vec![1usize; pieces.len()];
    loop {
        let (lo, hi) = assemble(f, &pieces, &counts);
        let mut done = true;
        for (i, &(p, q)) in pieces.iter().enumerate() {
            let worst = lo
                .breakpoints
                .iter()
                .chain(&hi.breakpoints)
                .filter(|&&x| x >= p && x <= q)
                .map(|&x| hi.eval(x) - lo.eval(x))
                .fold(0.0, f64::max);
            if worst > epsilon {
                counts[i] *= 2;
                done = false;
            }
        }
        if done {
            return Ok((lo, hi));
        }
        if counts.iter().sum::<usize>() > MAX_SEGMENTS {
            return Err(Error::Abstraction(format!(
                "epsilon {epsilon} needs more than {MAX_SEGMENTS} segments on [{a}, {b}]"
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_check(f: ScalarFn, lo: &PiecewiseLinearBound, hi: &PiecewiseLinearBound, a: f64, b: f64) -> f64 {
        let mut gap: f64 = 0.0;
        for i in 0..=10_000 {
            let x = a + (b - a) * i as f64 / 10_000.0;
            let v = f.eval(x);
            assert!(lo.eval(x) <= v, "{f:?} lower {} > {v} at {x}", lo.eval(x));
            assert!(hi.eval(x) >= v, "{f:?} upper {} < {v} at {x}", hi.eval(x));
            gap = gap.max(hi.eval(x) - lo.eval(x));
        }
        gap
    }

    #[test]
    fn sin_chord_on_half_period_is_zero() {
        let (lo, hi) = bound_scalar_uniform(ScalarFn::Sin, 0.0, PI, 1).unwrap();
        assert!(lo.eval(1.0).abs() < 1e-9 && lo.eval(2.5).abs() < 1e-9);
        assert!(hi.eval(PI / 2.0) >= 1.0);
    }

    #[test]
    fn square_single_chord_gap() {
        let (lo, hi) = bound_scalar_uniform(ScalarFn::Square, -1.0, 1.0, 1).unwrap();
        assert!((hi.eval(0.0) - lo.eval(0.0) - 1.0).abs() < 1e-9);
        assert!(hi.eval(0.5) >= 0.25 && lo.eval(0.5) <= 0.25);
        assert!(lo.is_line_representable() && hi.is_line_representable());
        let (lo, hi) = bound_scalar_uniform(ScalarFn::Square, -1.0, 1.0, 2).unwrap();
        assert!(lo.is_line_representable());
        assert!(!hi.is_line_representable());
    }

    #[test]
    fn sin_full_period_eps() {
        let (lo, hi) = bound_scalar(ScalarFn::Sin, -PI, PI, 0.1).unwrap();
        assert!(grid_check(ScalarFn::Sin, &lo, &hi, -PI, PI) <= 0.1);
    }

    #[test]
    fn cos_and_square_random_like_intervals() {
        for &(a, b) in &[(-3.0, 5.0), (0.1, 0.2), (-7.0, -6.5), (2.0, 9.0)] {
            for f in [ScalarFn::Cos, ScalarFn::Square, ScalarFn::Sin] {
                for eps in [0.5, 0.1, 0.02] {
                    let (lo, hi) = bound_scalar(f, a, b, eps).unwrap();
                    assert!(grid_check(f, &lo, &hi, a, b) <= eps + 1e-9);
                }
            }
        }
    }

    #[test]
    fn tiny_epsilon_hits_cap() {
        assert!(bound_scalar(ScalarFn::Square, -100.0, 100.0, 1e-12).is_err());
    }

    #[test]
    fn degenerate_interval() {
        let (lo, hi) = bound_scalar(ScalarFn::Cos, 1.0, 1.0, 0.1).unwrap();
        assert!(lo.eval(1.0) <= 1f64.cos() && hi.eval(1.0) >= 1f64.cos());
    }

    #[test]
    fn range_includes_extrema() {
        let (lo, hi) = ScalarFn::Sin.range(0.0, 4.0);
        assert_eq!(hi, 1.0);
        assert!((lo - 4f64.sin()).abs() < 1e-15);
        assert_eq!(ScalarFn::Square.range(-1.0, 2.0), (0.0, 4.0));
    }
}
