//! Big-M mixed-integer encoding of a ReLU network.

use std::collections::BTreeMap;

use super::lp::{Cmp, MixedIntegerProgram};
use super::SolverError;
use crate::nn::{Activation, FeedforwardNetwork, LayerIntervals};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuronEncoding {
    /// `u <= 0`: output is the constant 0.
    Inactive,
    /// `l >= 0`: output equals the pre-activation.
    Active,
    Unstable { y: usize, delta: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReluEncoding {
    pub outputs: Vec<usize>,
    pub binaries: Vec<usize>,
    pub neurons: Vec<Vec<NeuronEncoding>>,
}

/// Affine expression over program variables.
#[derive(Debug, Clone, Default)]
struct Expr {
    terms: BTreeMap<usize, f64>,
    constant: f64,
}

impl Expr {
    fn var(j: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(j, 1.0);
        Expr { terms, constant: 0.0 }
    }

    fn add_scaled(&mut self, other: &Expr, w: f64) {
        for (&j, &a) in &other.terms {
            *self.terms.entry(j).or_insert(0.0) += w * a;
        }
        self.constant += w * other.constant;
    }

    fn coeffs(&self) -> Vec<(usize, f64)> {
        self.terms.iter().filter(|(_, a)| **a != 0.0).map(|(&j, &a)| (j, a)).collect()
    }
}

/// Adds `outputs = net(inputs)` to the program. `bounds` are pre-activation
/// intervals valid over the input region.
pub fn encode_relu_bigm(
    mip: &mut MixedIntegerProgram,
    net: &FeedforwardNetwork,
    inputs: &[usize],
    bounds: &LayerIntervals,
) -> Result<ReluEncoding, SolverError> {
    if inputs.len() != net.input_dim() {
        return Err(SolverError::Malformed(format!(
            "network takes {} inputs, got {}",
            net.input_dim(),
            inputs.len()
        )));
    }
    if bounds.lower.len() != net.layers().len() {
        return Err(SolverError::Malformed("layer bounds do not match network depth".into()));
    }
    let mut acts: Vec<Expr> = inputs.iter().map(|&j| Expr::var(j)).collect();
    let mut binaries = Vec::new();
    let mut neurons = Vec::new();
    let mut outputs = Vec::new();
    for (m, layer) in net.layers().iter().enumerate() {
        let mut pre: Vec<Expr> = Vec::with_capacity(layer.out_dim());
        for i in 0..layer.out_dim() {
            let mut e = Expr {
                terms: BTreeMap::new(),
                constant: layer.bias[i],
            };
            for (j, &w) in layer.weights.row(i).iter().enumerate() {
                if w != 0.0 {
                    e.add_scaled(&acts[j], w);
                }
            }
            pre.push(e);
        }
        let (lo, hi) = (&bounds.lower[m], &bounds.upper[m]);
        if lo.len() != layer.out_dim() || hi.len() != layer.out_dim() {
            return Err(SolverError::Malformed(format!("layer {m} bound width mismatch")));
        }
        match layer.activation {
            Activation::Identity if m + 1 == net.layers().len() => {
                for (i, z) in pre.iter().enumerate() {
                    let pad = 1e-7 * (1.0 + lo[i].abs().max(hi[i].abs()));
                    let o = mip.lp.add_var(lo[i] - pad, hi[i] + pad);
                    let mut c = z.coeffs();
                    c.push((o, -1.0));
                    mip.lp.add_row(c, Cmp::Eq, -z.constant);
                    outputs.push(o);
                }
                acts = Vec::new();
            }
            Activation::Identity => {
                neurons.push(vec![NeuronEncoding::Active; pre.len()]);
                acts = pre;
            }
            Activation::Relu => {
                let mut layer_enc = Vec::with_capacity(pre.len());
                let mut next = Vec::with_capacity(pre.len());
                for (i, z) in pre.into_iter().enumerate() {
                    let (l, u) = (lo[i], hi[i]);
                    if u <= 0.0 {
                        layer_enc.push(NeuronEncoding::Inactive);
                        next.push(Expr::default());
                    } else if l >= 0.0 {
                        layer_enc.push(NeuronEncoding::Active);
                        next.push(z);
                    } else {
                        let y = mip.lp.add_var(0.0, u);
                        let delta = mip.add_binary();
                        let zc = z.coeffs();
                        // z - y <= 0
                        let mut r = zc.clone();
                        r.push((y, -1.0));
                        mip.lp.add_row(r, Cmp::Le, -z.constant);
                        // y - z - l delta <= -l
                        let mut r: Vec<(usize, f64)> = zc.iter().map(|&(j, a)| (j, -a)).collect();
                        r.push((y, 1.0));
                        r.push((delta, -l));
                        mip.lp.add_row(r, Cmp::Le, -l + z.constant);
                        // y - u delta <= 0
                        mip.lp.add_row(vec![(y, 1.0), (delta, -u)], Cmp::Le, 0.0);
                        binaries.push(delta);
                        layer_enc.push(NeuronEncoding::Unstable { y, delta });
                        next.push(Expr::var(y));
                    }
                }
                neurons.push(layer_enc);
                acts = next;
            }
        }
    }
    Ok(ReluEncoding {
        outputs,
        binaries,
        neurons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crown::layer_bounds;
    use crate::geom::Hyperrectangle;
    use crate::matrix::Matrix;
    use crate::nn::Layer;
    use crate::solver::{solve_milp, Sense, Status};

    #[test]
    fn abs_network_maximum() {
        // |x| = relu(x) + relu(-x) over [-1, 2]
        let net = FeedforwardNetwork::new(
            1,
            vec![
                Layer::new(
                    Matrix::from_rows(vec![vec![1.0], vec![-1.0]]).unwrap(),
                    vec![0.0, 0.0],
                    Activation::Relu,
                )
                .unwrap(),
                Layer::new(Matrix::from_rows(vec![vec![1.0, 1.0]]).unwrap(), vec![0.0], Activation::Identity)
                    .unwrap(),
            ],
        )
        .unwrap();
        let dom = Hyperrectangle::new(vec![-1.0], vec![2.0]).unwrap();
        let b = layer_bounds(&net, &dom).unwrap();
        let mut mip = MixedIntegerProgram::new();
        let x = mip.lp.add_var(-1.0, 2.0);
        let enc = encode_relu_bigm(&mut mip, &net, &[x], &b).unwrap();
        assert_eq!(enc.binaries.len(), 2);
        mip.lp.set_objective(&[(enc.outputs[0], 1.0)], Sense::Max);
        let r = solve_milp(&mip, 1e-9, 1000).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-9);
        mip.lp.set_objective(&[(enc.outputs[0], 1.0)], Sense::Min);
        let r = solve_milp(&mip, 1e-9, 1000).unwrap();
        assert!(r.objective.abs() < 1e-9);
    }
}
