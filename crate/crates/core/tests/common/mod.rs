//! Brute-force reference solvers shared by the integration tests.
#![allow(dead_code)]

use backreach::geom::Hyperrectangle;
use backreach::matrix::Matrix;
use backreach::nn::{Activation, FeedforwardNetwork, Layer};
use backreach::solver::{Cmp, LinearProgram, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves the square system `m x = r`, `None` when (near) singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[row][k] -= f * m[col][k];
                    }
                    r[row] -= f * r[col];
                }
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

fn combinations(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    go(0, m, k, &mut Vec::with_capacity(k), f);
}

/// Optimum of `c.x` over the bounded polytope `a x <= b` by enumerating
/// every vertex. `None` when the polytope is empty.
pub fn vertex_optimum(a: &[Vec<f64>], b: &[f64], c: &[f64], maximize: bool) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    combinations(a.len(), n, &mut |idx| {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| a[i].clone()).collect();
        let r: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        let Some(x) = solve_square(m, r) else { return };
        let feasible = a
            .iter()
            .zip(b)
            .all(|(row, &bi)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9 * (1.0 + bi.abs()));
        if feasible {
            let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
            best = Some(match best {
                None => v,
                Some(w) if maximize => w.max(v),
                Some(w) => w.min(v),
            });
        }
    });
    best
}

/// `a x <= b` form of an LP whose variables all have finite bounds.
pub fn lp_to_halfspaces(lp: &LinearProgram) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = lp.num_vars();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        a.push(e.clone());
        b.push(lp.upper[j]);
        e[j] = -1.0;
        a.push(e);
        b.push(-lp.lower[j]);
    }
    for row in &lp.rows {
        let mut dense = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            dense[j] += v;
        }
        let neg: Vec<f64> = dense.iter().map(|v| -v).collect();
        match row.cmp {
            Cmp::Le => {
                a.push(dense);
                b.push(row.rhs);
            }
            Cmp::Ge => {
                a.push(neg);
                b.push(-row.rhs);
            }
            Cmp::Eq => {
                a.push(dense);
                b.push(row.rhs);
                a.push(neg);
                b.push(-row.rhs);
            }
        }
    }
    (a, b)
}

/// Random bounded LP over `n` variables with `m` extra rows; some are infeasible.
pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        let lo = rng.gen_range(-5.0..0.0);
        let hi = rng.gen_range(0.5..5.0);
        lp.add_var(lo, hi);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                coeffs.push((j, rng.gen_range(-2.0..2.0)));
            }
        }
        let cmp = if rng.gen_bool(0.5) { Cmp::Le } else { Cmp::Ge };
        lp.add_row(coeffs, cmp, rng.gen_range(-3.0..3.0));
    }
    let obj: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
    let sense = if rng.gen_bool(0.5) { Sense::Max } else { Sense::Min };
    lp.set_objective(&obj, sense);
    lp
}

/// Random ReLU network with the given hidden widths and one linear output.
pub fn random_net(rng: &mut ChaCha8Rng, input: usize, hidden: &[usize]) -> FeedforwardNetwork {
    let mut layers = Vec::new();
    let mut prev = input;
    for &w in hidden.iter().chain(std::iter::once(&1)) {
        let data: Vec<f64> = (0..w * prev).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..w).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let act = if layers.len() == hidden.len() { Activation::Identity } else { Activation::Relu };
        layers.push(Layer::new(Matrix::from_flat(w, prev, data).unwrap(), bias, act).unwrap());
        prev = w;
    }
    FeedforwardNetwork::new(input, layers).unwrap()
}

/// Exact extremum of a one-output ReLU network over `domain`: one vertex
/// enumeration per activation pattern.
pub fn brute_force_extremum(net: &FeedforwardNetwork, domain: &Hyperrectangle, maximize: bool) -> f64 {
    let n = net.input_dim();
    let relus = net.relu_count();
    assert!(relus <= 16, "brute force is exponential in the neuron count");
    let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    for pattern in 0u32..(1 << relus) {
        let mut a: Vec<Vec<f64>> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            a.push(e.clone());
            b.push(domain.hi()[k]);
            e[k] = -1.0;
            a.push(e);
            b.push(-domain.lo()[k]);
        }
        // activations as affine maps (coeffs over inputs, constant)
        let mut acts: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                (e, 0.0)
            })
            .collect();
        let mut bit = 0;
        for layer in net.layers() {
            let mut next = Vec::with_capacity(layer.out_dim());
            for i in 0..layer.out_dim() {
                let mut coef = vec![0.0; n];
                let mut cst = layer.bias[i];
                for (j, &w) in layer.weights.row(i).iter().enumerate() {
                    for k in 0..n {
                        coef[k] += w * acts[j].0[k];
                    }
                    cst += w * acts[j].1;
                }
                match layer.activation {
                    Activation::Relu => {
                        let on = pattern >> bit & 1 == 1;
                        bit += 1;
                        if on {
                            a.push(coef.iter().map(|v| -v).collect());
                            b.push(cst);
                            next.push((coef, cst));
                        } else {
                            a.push(coef);
                            b.push(-cst);
                            next.push((vec![0.0; n], 0.0));
                        }
                    }
                    Activation::Identity => next.push((coef, cst)),
                }
            }
            acts = next;
        }
        let (c, cst) = &acts[0];
        if let Some(v) = vertex_optimum(&a, &b, c, maximize) {
            best = if maximize { best.max(v + cst) } else { best.min(v + cst) };
        }
    }
    best
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
