//! Backward linear relaxation of a ReLU network over a box.
//!
//! For every `x` in the domain the result satisfies
//! `Phi x + beta <= pi(x) <= Psi x + alpha`.

use crate::error::{Error, Result};
use crate::geom::Hyperrectangle;
use crate::matrix::Matrix;
use crate::nn::{affine_interval, Activation, FeedforwardNetwork, LayerIntervals};

#[derive(Debug, Clone, PartialEq)]
pub struct AffineBounds {
    pub psi: Matrix,
    pub alpha: Vec<f64>,
    pub phi: Matrix,
    pub beta: Vec<f64>,
    pub domain: Hyperrectangle,
}

impl AffineBounds {
    pub fn upper_at(&self, x: &[f64]) -> Vec<f64> {
        add(&self.psi.mul_vec(x), &self.alpha)
    }

    pub fn lower_at(&self, x: &[f64]) -> Vec<f64> {
        add(&self.phi.mul_vec(x), &self.beta)
    }

    /// Interval enclosure of the control over the domain.
    pub fn output_range(&self) -> (Vec<f64>, Vec<f64>) {
        let (_, hi) = concretize(&self.psi, &self.alpha, &self.domain);
        let (lo, _) = concretize(&self.phi, &self.beta, &self.domain);
        (lo, hi)
    }

    pub fn output_dim(&self) -> usize {
        self.alpha.len()
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Lower and upper values of `lam x + c` over a box.
pub(crate) fn concretize(lam: &Matrix, c: &[f64], b: &Hyperrectangle) -> (Vec<f64>, Vec<f64>) {
    let mut lo = c.to_vec();
    let mut hi = c.to_vec();
    for r in 0..lam.rows() {
        for (j, &w) in lam.row(r).iter().enumerate() {
            let (p, q) = (w * b.lo()[j], w * b.hi()[j]);
            lo[r] += p.min(q);
            hi[r] += p.max(q);
        }
    }
    (lo, hi)
}

/// Linear bounds on one activation: upper `a_u z + b_u`, lower `a_l z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NeuronRelaxation {
    pub up_slope: f64,
    pub up_intercept: f64,
    pub lo_slope: f64,
}

impl NeuronRelaxation {
    pub(crate) fn relu(l: f64, u: f64) -> Self {
        if u <= 0.0 {
            NeuronRelaxation { up_slope: 0.0, up_intercept: 0.0, lo_slope: 0.0 }
        } else if l >= 0.0 {
            NeuronRelaxation { up_slope: 1.0, up_intercept: 0.0, lo_slope: 1.0 }
        } else {
            let s = u / (u - l);
            NeuronRelaxation {
                up_slope: s,
                up_intercept: -s * l,
                lo_slope: if u >= -l { 1.0 } else { 0.0 },
            }
        }
    }

    const IDENTITY: NeuronRelaxation =
        NeuronRelaxation { up_slope: 1.0, up_intercept: 0.0, lo_slope: 1.0 };
}

fn relaxations(net: &FeedforwardNetwork, bounds: &LayerIntervals, upto: usize) -> Vec<Vec<NeuronRelaxation>> {
    (0..upto)
        .map(|m| match net.layers()[m].activation {
            Activation::Identity => vec![NeuronRelaxation::IDENTITY; net.layers()[m].out_dim()],
            Activation::Relu => bounds.lower[m]
                .iter()
                .zip(&bounds.upper[m])
                .map(|(&l, &u)| NeuronRelaxation::relu(l, u))
                .collect(),
        })
        .collect()
}

/// Affine bound on the pre-activation of `layer` as a function of the input.
fn back_substitute(
    net: &FeedforwardNetwork,
    relax: &[Vec<NeuronRelaxation>],
    layer: usize,
    upper: bool,
) -> (Matrix, Vec<f64>) {
    let top = &net.layers()[layer];
    let mut lam = top.weights.clone();
    let mut c = top.bias.clone();
    for j in (0..layer).rev() {
        let r = &relax[j];
        for row in 0..lam.rows() {
            let lrow = lam.row_mut(row);
            for (i, w) in lrow.iter_mut().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                let nr = r[i];
                if (*w >= 0.0) == upper {
                    c[row] += *w * nr.up_intercept;
                    *w *= nr.up_slope;
                } else {
                    *w *= nr.lo_slope;
                }
            }
        }
        let below = &net.layers()[j];
        for (row, cr) in c.iter_mut().enumerate() {
            *cr += lam.row(row).iter().zip(&below.bias).map(|(a, b)| a * b).sum::<f64>();
        }
        lam = lam.matmul(&below.weights);
    }
    (lam, c)
}

/// Pre-activation bounds for every layer: interval arithmetic intersected
/// with backward linear bounds.
pub fn layer_bounds(net: &FeedforwardNetwork, domain: &Hyperrectangle) -> Result<LayerIntervals> {
    if domain.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            found: domain.dim(),
        });
    }
    let mut out = LayerIntervals::default();
    let mut a_lo = domain.lo().to_vec();
    let mut a_hi = domain.hi().to_vec();
    for (m, layer) in net.layers().iter().enumerate() {
        let (mut zl, mut zu) = affine_interval(layer, &a_lo, &a_hi);
        if m > 0 {
            let relax = relaxations(net, &out, m);
            let (lu, cu) = back_substitute(net, &relax, m, true);
            let (ll, cl) = back_substitute(net, &relax, m, false);
            let (_, hi) = concretize(&lu, &cu, domain);
            let (lo, _) = concretize(&ll, &cl, domain);
            for i in 0..zl.len() {
                let l = zl[i].max(lo[i]);
                let u = zu[i].min(hi[i]);
                if l <= u {
                    zl[i] = l;
                    zu[i] = u;
                }
            }
        }
        a_lo = zl.iter().map(|&v| layer.activation.apply(v)).collect();
        a_hi = zu.iter().map(|&v| layer.activation.apply(v)).collect();
        out.lower.push(zl);
        out.upper.push(zu);
    }
    Ok(out)
}

pub fn relax(net: &FeedforwardNetwork, domain: &Hyperrectangle) -> Result<AffineBounds> {
    let bounds = layer_bounds(net, domain)?;
    Ok(relax_with_bounds(net, domain, &bounds))
}

pub(crate) fn relax_with_bounds(
    net: &FeedforwardNetwork,
    domain: &Hyperrectangle,
    bounds: &LayerIntervals,
) -> AffineBounds {
    let last = net.layers().len() - 1;
    let relax = relaxations(net, bounds, last);
    let (psi, alpha) = back_substitute(net, &relax, last, true);
    let (phi, beta) = back_substitute(net, &relax, last, false);
    AffineBounds {
        psi,
        alpha,
        phi,
        beta,
        domain: domain.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    fn m(rows: Vec<Vec<f64>>) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn affine_net_is_exact() {
        let w = m(vec![vec![1.0, -2.0], vec![0.5, 3.0]]);
        let net = FeedforwardNetwork::new(
            2,
            vec![Layer::new(w.clone(), vec![1.0, -1.0], Activation::Identity).unwrap()],
        )
        .unwrap();
        let dom = Hyperrectangle::new(vec![-1.0, 0.0], vec![2.0, 5.0]).unwrap();
        let r = relax(&net, &dom).unwrap();
        assert_eq!(r.psi, w);
        assert_eq!(r.phi, w);
        assert_eq!(r.alpha, vec![1.0, -1.0]);
        assert_eq!(r.beta, vec![1.0, -1.0]);
    }

    #[test]
    fn single_relu_triangle() {
        let net = FeedforwardNetwork::new(
            1,
            vec![
                Layer::new(m(vec![vec![1.0]]), vec![0.0], Activation::Relu).unwrap(),
                Layer::new(m(vec![vec![1.0]]), vec![0.0], Activation::Identity).unwrap(),
            ],
        )
        .unwrap();
        let r = relax(&net, &Hyperrectangle::new(vec![-1.0], vec![1.0]).unwrap()).unwrap();
        assert!((r.psi[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((r.alpha[0] - 0.5).abs() < 1e-15);
        // tie u = |l| takes the identity lower line
        assert_eq!(r.phi[(0, 0)], 1.0);
        for i in 0..=2000 {
            let x = -1.0 + i as f64 / 1000.0;
            let y = x.max(0.0);
            assert!(r.upper_at(&[x])[0] >= y - 1e-15, "upper fails at {x}");
            assert!(r.lower_at(&[x])[0] <= y + 1e-15, "lower fails at {x}");
        }
    }

    #[test]
    fn lower_slope_rule() {
        assert_eq!(NeuronRelaxation::relu(-2.0, 1.0).lo_slope, 0.0);
        assert_eq!(NeuronRelaxation::relu(-1.0, 2.0).lo_slope, 1.0);
        assert_eq!(NeuronRelaxation::relu(-1.0, 1.0).lo_slope, 1.0);
        assert_eq!(NeuronRelaxation::relu(0.5, 1.0).up_slope, 1.0);
        assert_eq!(NeuronRelaxation::relu(-1.0, 0.0).up_slope, 0.0);
    }
}
