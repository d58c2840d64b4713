//! Feedforward ReLU policy networks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, Error, Result};
use crate::geom::Hyperrectangle;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "id")]
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layer {
    #[serde(rename = "W")]
    pub weights: Matrix,
    #[serde(rename = "b")]
    pub bias: Vec<f64>,
    #[serde(rename = "act")]
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::InvalidNetwork(format!(
                "layer has {} weight rows but {} biases",
                weights.rows(),
                bias.len()
            )));
        }
        Ok(Layer {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Pre-activation `W a + b`.
    pub fn affine(&self, a: &[f64]) -> Vec<f64> {
        let mut z = self.weights.mul_vec(a);
        for (zi, bi) in z.iter_mut().zip(&self.bias) {
            *zi += bi;
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedforwardNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
}

#[derive(Deserialize)]
struct RawLayer {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: String,
}

#[derive(Deserialize)]
struct RawNetwork {
    input_dim: usize,
    layers: Vec<RawLayer>,
}

impl FeedforwardNetwork {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input dimension is zero".into()));
        }
        let last = layers
            .last()
            .ok_or_else(|| Error::InvalidNetwork("network has no layers".into()))?;
        if last.activation != Activation::Identity {
            return Err(Error::InvalidNetwork("final layer must be identity".into()));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i} expects {} inputs, previous layer gives {width}",
                    layer.in_dim()
                )));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i} bias length {} != {} rows",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if layer.out_dim() == 0 {
                return Err(Error::InvalidNetwork(format!("layer {i} has no neurons")));
            }
            if layer.bias.iter().any(|v| !v.is_finite())
                || (0..layer.out_dim()).any(|r| layer.weights.row(r).iter().any(|v| !v.is_finite()))
            {
                return Err(Error::NonFinite("network weights"));
            }
            width = layer.out_dim();
        }
        Ok(FeedforwardNetwork { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Total number of ReLU neurons.
    pub fn relu_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.activation == Activation::Relu)
            .map(|l| l.out_dim())
            .sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(self.forward(x))
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.affine(&a);
            for v in z.iter_mut() {
                *v = layer.activation.apply(*v);
            }
            a = z;
        }
        a
    }

    /// Interval bound propagation over a box.
    pub fn interval_bounds(&self, domain: &Hyperrectangle) -> Result<LayerIntervals> {
        if domain.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: domain.dim(),
            });
        }
        let mut lo = domain.lo().to_vec();
        let mut hi = domain.hi().to_vec();
        let mut out = LayerIntervals::default();
        for layer in &self.layers {
            let (zl, zu) = affine_interval(layer, &lo, &hi);
            lo = zl.iter().map(|&v| layer.activation.apply(v)).collect();
            hi = zu.iter().map(|&v| layer.activation.apply(v)).collect();
            out.lower.push(zl);
            out.upper.push(zu);
        }
        Ok(out)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawNetwork = serde_json::from_str(s).map_err(|e| json_err("network", e))?;
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (i, l) in raw.layers.into_iter().enumerate() {
            let activation = match l.act.as_str() {
                "relu" => Activation::Relu,
                "id" => Activation::Identity,
                other => return Err(Error::UnsupportedActivation(other.to_string())),
            };
            let weights = Matrix::from_rows(l.w)
                .map_err(|e| Error::InvalidNetwork(format!("layer {i}: {e}")))?;
            layers.push(Layer::new(weights, l.b, activation)?);
        }
        FeedforwardNetwork::new(raw.input_dim, layers)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }
}

/// Row-compressed copy of a network for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct SparseForward {
    layers: Vec<(Vec<Vec<(usize, f64)>>, Vec<f64>, Activation)>,
}

impl SparseForward {
    pub fn new(net: &FeedforwardNetwork) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| {
                let rows = (0..l.out_dim())
                    .map(|i| {
                        l.weights
                            .row(i)
                            .iter()
                            .enumerate()
                            .filter(|(_, w)| **w != 0.0)
                            .map(|(j, w)| (j, *w))
                            .collect()
                    })
                    .collect();
                (rows, l.bias.clone(), l.activation)
            })
            .collect();
        SparseForward { layers }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (rows, bias, act) in &self.layers {
            a = rows
                .iter()
                .zip(bias)
                .map(|(r, b)| act.apply(b + r.iter().map(|&(j, w)| w * a[j]).sum::<f64>()))
                .collect();
        }
        a
    }
}

/// `[l, u]` for `W a + b` when `a ∈ [lo, hi]`.
pub(crate) fn affine_interval(layer: &Layer, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = layer.out_dim();
    let mut zl = layer.bias.clone();
    let mut zu = layer.bias.clone();
    for i in 0..n {
        for (j, &w) in layer.weights.row(i).iter().enumerate() {
            if w >= 0.0 {
                zl[i] += w * lo[j];
                zu[i] += w * hi[j];
            } else {
                zl[i] += w * hi[j];
                zu[i] += w * lo[j];
            }
        }
    }
    (zl, zu)
}

pub fn load_network(path: &Path) -> Result<FeedforwardNetwork> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    FeedforwardNetwork::from_json_str(&text)
}

pub fn save_network(net: &FeedforwardNetwork, path: &Path) -> Result<()> {
    std::fs::write(path, net.to_json_string()).map_err(|e| io_err(path, e))
}

/// Pre-activation bounds per layer, output layer included.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerIntervals {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl LayerIntervals {
    pub fn validate(&self) -> Result<()> {
        for (m, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.len() != u.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.len(),
                    found: u.len(),
                });
            }
            if let Some(i) = (0..l.len()).find(|&i| l[i] > u[i] || l[i].is_nan() || u[i].is_nan()) {
                return Err(Error::InvalidBounds {
                    axis: i,
                    lo: self.lower[m][i],
                    hi: self.upper[m][i],
                });
            }
        }
        Ok(())
    }

    /// Elementwise intersection with another sound bound set.
    pub fn tighten(&mut self, other: &LayerIntervals) {
        for m in 0..self.lower.len().min(other.lower.len()) {
            for i in 0..self.lower[m].len() {
                let l = self.lower[m][i].max(other.lower[m][i]);
                let u = self.upper[m][i].min(other.upper[m][i]);
                if l <= u {
                    self.lower[m][i] = l;
                    self.upper[m][i] = u;
                }
            }
        }
    }

    pub fn output_interval(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((self.lower.last()?.clone(), self.upper.last()?.clone()))
    }
}
