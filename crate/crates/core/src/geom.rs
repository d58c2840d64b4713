//! Axis-aligned boxes, halfspace polytopes and timed set sequences.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::crown::AffineBounds;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Closed axis-aligned box `{x : lo <= x <= hi}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hyperrectangle {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'de> Deserialize<'de> for Hyperrectangle {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = RawBox::deserialize(de)?;
        Hyperrectangle::new(raw.lo, raw.hi).map_err(serde::de::Error::custom)
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

impl Hyperrectangle {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::EmptyInput("box with zero dimensions"));
        }
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() {
                return Err(Error::NonFinite("box bounds"));
            }
            if l > h {
                return Err(Error::InvalidBounds { axis, lo: l, hi: h });
            }
        }
        Ok(Hyperrectangle { lo, hi })
    }

    /// `B_inf(center, radius)`.
    pub fn from_center_radius(center: &[f64], radius: &[f64]) -> Result<Self> {
        check_dim(center.len(), radius.len())?;
        if radius.iter().any(|&r| r < 0.0) {
            return Err(Error::Config("negative box radius".into()));
        }
        Hyperrectangle::new(
            center.iter().zip(radius).map(|(c, r)| c - r).collect(),
            center.iter().zip(radius).map(|(c, r)| c + r).collect(),
        )
    }

    pub fn point(x: &[f64]) -> Result<Self> {
        Hyperrectangle::new(x.to_vec(), x.to_vec())
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.width(k)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// `self ⊆ other`, each face allowed to stick out by `tol`.
    pub fn subset_of(&self, other: &Hyperrectangle, tol: f64) -> Result<bool> {
        check_dim(other.dim(), self.dim())?;
        Ok((0..self.dim())
            .all(|k| other.lo[k] - tol <= self.lo[k] && self.hi[k] <= other.hi[k] + tol))
    }

    pub fn intersects(&self, other: &Hyperrectangle) -> Result<bool> {
        check_dim(self.dim(), other.dim())?;
        Ok((0..self.dim()).all(|k| self.lo[k].max(other.lo[k]) <= self.hi[k].min(other.hi[k])))
    }

    pub fn intersection(&self, other: &Hyperrectangle) -> Result<Region> {
        check_dim(self.dim(), other.dim())?;
        let lo: Vec<f64> = (0..self.dim()).map(|k| self.lo[k].max(other.lo[k])).collect();
        let hi: Vec<f64> = (0..self.dim()).map(|k| self.hi[k].min(other.hi[k])).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Ok(Region::Empty);
        }
        Ok(Region::Box(Hyperrectangle { lo, hi }))
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Hyperrectangle) -> Result<Hyperrectangle> {
        check_dim(self.dim(), other.dim())?;
        Ok(Hyperrectangle {
            lo: (0..self.dim()).map(|k| self.lo[k].min(other.lo[k])).collect(),
            hi: (0..self.dim()).map(|k| self.hi[k].max(other.hi[k])).collect(),
        })
    }

    /// Grow every face outward by `pad`.
    pub fn inflate(&self, pad: f64) -> Hyperrectangle {
        Hyperrectangle {
            lo: self.lo.iter().map(|l| l - pad).collect(),
            hi: self.hi.iter().map(|h| h + pad).collect(),
        }
    }

    /// Split along `axis` at `at`, which is clamped into the box.
    pub fn split_at(&self, axis: usize, at: f64) -> (Hyperrectangle, Hyperrectangle) {
        let at = at.clamp(self.lo[axis], self.hi[axis]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[axis] = at;
        right.lo[axis] = at;
        (left, right)
    }

    /// Index of the longest edge, lowest index on ties.
    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        for k in 1..self.dim() {
            if self.width(k) > self.width(best) {
                best = k;
            }
        }
        best
    }

    /// Project onto the given coordinates.
    pub fn project(&self, axes: &[usize]) -> Result<Hyperrectangle> {
        for &a in axes {
            if a >= self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    found: a + 1,
                });
            }
        }
        Hyperrectangle::new(
            axes.iter().map(|&a| self.lo[a]).collect(),
            axes.iter().map(|&a| self.hi[a]).collect(),
        )
    }
}

pub fn contains(b: &Hyperrectangle, x: &[f64]) -> Result<bool> {
    b.contains(x)
}

pub fn subset(a: &Hyperrectangle, b: &Hyperrectangle, tol: f64) -> Result<bool> {
    a.subset_of(b, tol)
}

pub fn intersects(a: &Hyperrectangle, b: &Hyperrectangle) -> Result<bool> {
    a.intersects(b)
}

pub fn bounding_box(boxes: &[Hyperrectangle]) -> Result<Hyperrectangle> {
    let (first, rest) = boxes
        .split_first()
        .ok_or(Error::EmptyInput("bounding_box of no boxes"))?;
    rest.iter().try_fold(first.clone(), |acc, b| acc.hull(b))
}

pub fn volume(r: &Region) -> f64 {
    match r {
        Region::Empty => 0.0,
        Region::Box(b) => b.volume(),
    }
}

/// A computed set: either a box or explicitly empty.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Empty,
    Box(Hyperrectangle),
}

impl Region {
    pub fn is_empty(&self) -> bool {
        matches!(self, Region::Empty)
    }

    pub fn as_box(&self) -> Option<&Hyperrectangle> {
        match self {
            Region::Empty => None,
            Region::Box(b) => Some(b),
        }
    }

    pub fn volume(&self) -> f64 {
        volume(self)
    }

    pub fn union_hull(&self, other: &Region) -> Result<Region> {
        Ok(match (self, other) {
            (Region::Empty, r) | (r, Region::Empty) => r.clone(),
            (Region::Box(a), Region::Box(b)) => Region::Box(a.hull(b)?),
        })
    }

    pub fn subset_of(&self, other: &Region, tol: f64) -> Result<bool> {
        match (self, other) {
            (Region::Empty, _) => Ok(true),
            (Region::Box(_), Region::Empty) => Ok(false),
            (Region::Box(a), Region::Box(b)) => a.subset_of(b, tol),
        }
    }

    pub fn intersects(&self, other: &Hyperrectangle) -> Result<bool> {
        match self {
            Region::Empty => Ok(false),
            Region::Box(b) => b.intersects(other),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        match self {
            Region::Empty => Ok(false),
            Region::Box(b) => b.contains(x),
        }
    }
}

impl From<Hyperrectangle> for Region {
    fn from(b: Hyperrectangle) -> Self {
        Region::Box(b)
    }
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_box().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(match Option::<Hyperrectangle>::deserialize(de)? {
            Some(b) => Region::Box(b),
            None => Region::Empty,
        })
    }
}

/// `{x : A x <= b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspacePolytope {
    #[serde(rename = "A")]
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl HalfspacePolytope {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        check_dim(a.rows(), b.len())?;
        Ok(HalfspacePolytope { a, b })
    }

    pub fn from_box(b: &Hyperrectangle) -> Self {
        let n = b.dim();
        let mut a = Matrix::zeros(2 * n, n);
        let mut rhs = Vec::with_capacity(2 * n);
        for k in 0..n {
            a[(2 * k, k)] = 1.0;
            rhs.push(b.hi()[k]);
            a[(2 * k + 1, k)] = -1.0;
            rhs.push(-b.lo()[k]);
        }
        HalfspacePolytope { a, b: rhs }
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok((0..self.a.rows()).all(|i| {
            let v: f64 = self.a.row(i).iter().zip(x).map(|(a, x)| a * x).sum();
            v <= self.b[i] + tol
        }))
    }
}

/// Output of a backward reachability run: `P̄_t` for `t = -tau..=0`.
#[derive(Debug, Clone)]
pub struct TimedSetSequence {
    pub tau: usize,
    pub sets: BTreeMap<i32, Region>,
    pub backreachable: BTreeMap<i32, Region>,
    pub omega: BTreeMap<i32, AffineBounds>,
    pub partitions: BTreeMap<i32, Vec<Hyperrectangle>>,
    /// Faces that fell back to a relaxation bound, keyed by timestep.
    pub bound_only: BTreeMap<i32, Vec<bool>>,
    pub invariant: bool,
}

impl TimedSetSequence {
    pub fn new(tau: usize, target: Hyperrectangle) -> Self {
        let mut sets = BTreeMap::new();
        sets.insert(0, Region::Box(target));
        TimedSetSequence {
            tau,
            sets,
            backreachable: BTreeMap::new(),
            omega: BTreeMap::new(),
            partitions: BTreeMap::new(),
            bound_only: BTreeMap::new(),
            invariant: false,
        }
    }

    pub fn target(&self) -> &Hyperrectangle {
        self.sets[&0].as_box().expect("target set is a box")
    }

    pub fn get(&self, t: i32) -> Option<&Region> {
        self.sets.get(&t)
    }

    /// Deepest timestep actually stored.
    pub fn earliest(&self) -> i32 {
        *self.sets.keys().next().unwrap_or(&0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let sets: serde_json::Map<String, serde_json::Value> = self
            .sets
            .iter()
            .map(|(t, r)| (t.to_string(), serde_json::to_value(r).expect("box serializes")))
            .collect();
        serde_json::json!({ "tau": self.tau, "sets": sets, "invariant": self.invariant })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let tau = v
            .get("tau")
            .and_then(|t| t.as_u64())
            .ok_or_else(|| Error::Config("sets file: missing integer `tau`".into()))?
            as usize;
        let raw = v
            .get("sets")
            .and_then(|s| s.as_object())
            .ok_or_else(|| Error::Config("sets file: missing object `sets`".into()))?;
        let mut sets = BTreeMap::new();
        for (k, val) in raw {
            let t: i32 = k
                .parse()
                .map_err(|_| Error::Config(format!("sets file: bad timestep key `{k}`")))?;
            let r: Region = serde_json::from_value(val.clone())
                .map_err(|e| crate::error::json_err(format!("sets[{k}]"), e))?;
            sets.insert(t, r);
        }
        if !matches!(sets.get(&0), Some(Region::Box(_))) {
            return Err(Error::Config("sets file: `0` must hold the target box".into()));
        }
        let mut seq = TimedSetSequence::new(tau, sets[&0].as_box().unwrap().clone());
        seq.sets = sets;
        seq.invariant = v.get("invariant").and_then(|b| b.as_bool()).unwrap_or(false);
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(lo: &[f64], hi: &[f64]) -> Hyperrectangle {
        Hyperrectangle::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn contains_is_closed() {
        let b = bx(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(b.contains(&[0.5, 0.5]).unwrap());
        assert!(b.contains(&[1.0, 1.0]).unwrap());
        assert!(!b.contains(&[1.0000001, 0.0]).unwrap());
        assert!(b.contains(&[1.0]).is_err());
    }

    #[test]
    fn subset_with_tolerance() {
        let a = bx(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(subset(&a, &bx(&[-1.0, -1.0], &[2.0, 2.0]), 0.0).unwrap());
        assert!(subset(&a, &a, 0.0).unwrap());
        let fat = bx(&[0.0, 0.0], &[1.001, 1.0]);
        assert!(subset(&fat, &a, 1e-2).unwrap());
        assert!(!subset(&fat, &a, 0.0).unwrap());
    }

    #[test]
    fn touching_boxes_intersect() {
        let a = bx(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(!intersects(&a, &bx(&[2.0, 2.0], &[3.0, 3.0])).unwrap());
        assert!(intersects(&a, &bx(&[1.0, 1.0], &[2.0, 2.0])).unwrap());
        assert!(intersects(&bx(&[0.0, 0.0], &[4.0, 4.0]), &bx(&[3.0, 0.0], &[5.0, 1.0])).unwrap());
    }

    #[test]
    fn bounding_box_examples() {
        let bb = bounding_box(&[bx(&[0.0, 0.0], &[1.0, 1.0]), bx(&[2.0, 2.0], &[3.0, 3.0])]).unwrap();
        assert_eq!(bb, bx(&[0.0, 0.0], &[3.0, 3.0]));
        let bb = bounding_box(&[bx(&[-1.0, 0.0], &[0.0, 2.0]), bx(&[0.0, -2.0], &[1.0, 0.0])]).unwrap();
        assert_eq!(bb, bx(&[-1.0, -2.0], &[1.0, 2.0]));
        assert!(bounding_box(&[]).is_err());
    }

    #[test]
    fn volumes() {
        assert_eq!(bx(&[0.0, 0.0], &[2.0, 3.0]).volume(), 6.0);
        assert_eq!(bx(&[1.0, 0.0], &[1.0, 5.0]).volume(), 0.0);
        assert_eq!(bx(&[0.0; 6], &[1.0; 6]).volume(), 1.0);
        assert_eq!(volume(&Region::Empty), 0.0);
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(Hyperrectangle::new(vec![1.0], vec![0.0]).is_err());
        assert!(Hyperrectangle::new(vec![], vec![]).is_err());
    }

    #[test]
    fn empty_region_semantics() {
        let a = bx(&[0.0], &[1.0]);
        assert!(Region::Empty.subset_of(&Region::Box(a.clone()), 0.0).unwrap());
        assert!(!Region::Empty.intersects(&a).unwrap());
        assert_eq!(Region::Empty.union_hull(&Region::Box(a.clone())).unwrap(), Region::Box(a));
    }

    #[test]
    fn box_json_shape() {
        let b = bx(&[0.0, -1.0], &[1.0, 2.0]);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"lo":[0.0,-1.0],"hi":[1.0,2.0]}"#);
        let back: Hyperrectangle = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
        assert!(serde_json::from_str::<Hyperrectangle>(r#"{"lo":[2.0],"hi":[1.0]}"#).is_err());
    }

    #[test]
    fn sequence_json_round_trip() {
        let mut seq = TimedSetSequence::new(2, bx(&[0.0], &[1.0]));
        seq.sets.insert(-1, Region::Box(bx(&[-1.0], &[0.5])));
        seq.sets.insert(-2, Region::Empty);
        let v = seq.to_json();
        assert_eq!(v["sets"]["-1"]["lo"][0], -1.0);
        let back = TimedSetSequence::from_json(&v).unwrap();
        assert_eq!(back.sets, seq.sets);
    }
}
