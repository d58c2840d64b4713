mod common;

use backreach::crown;
use backreach::geom::Hyperrectangle;
use backreach::solver::{encode_relu_bigm, solve_lp, solve_milp, MixedIntegerProgram, Sense, Status};
use common::*;

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut r = rng(11);
    let mut infeasible = 0;
    for i in 0..60 {
        let lp = random_lp(&mut r, 4, 5);
        let (a, b) = lp_to_halfspaces(&lp);
        let c: Vec<f64> = lp.objective.clone();
        let want = vertex_optimum(&a, &b, &c, lp.sense == Sense::Max);
        let got = solve_lp(&lp, 1e-9).unwrap();
        match want {
            None => {
                infeasible += 1;
                assert_eq!(got.status, Status::Infeasible, "lp {i}");
            }
            Some(v) => {
                assert_eq!(got.status, Status::Optimal, "lp {i}");
                assert!((got.objective - v).abs() <= 1e-7 * (1.0 + v.abs()), "lp {i}: {} vs {v}", got.objective);
            }
        }
    }
    assert!(infeasible < 60);
}

fn milp_extremum(net: &backreach::nn::FeedforwardNetwork, domain: &Hyperrectangle, maximize: bool) -> f64 {
    let mut mip = MixedIntegerProgram::new();
    let x = mip.lp.add_vars(domain.lo(), domain.hi());
    let bounds = crown::layer_bounds(net, domain).unwrap();
    let enc = encode_relu_bigm(&mut mip, net, &x, &bounds).unwrap();
    let sense = if maximize { Sense::Max } else { Sense::Min };
    mip.lp.set_objective(&[(enc.outputs[0], 1.0)], sense);
    let res = solve_milp(&mip, 1e-9, 1_000_000).unwrap();
    assert_eq!(res.status, Status::Optimal);
    res.objective
}

#[test]
fn bigm_milp_matches_activation_brute_force() {
    let mut r = rng(5);
    let shapes: [&[usize]; 3] = [&[4], &[3, 3], &[4, 2]];
    for (i, hidden) in shapes.iter().cycle().take(9).enumerate() {
        let net = random_net(&mut r, 2, hidden);
        let domain = Hyperrectangle::new(vec![-1.0, -2.0], vec![1.5, 0.5]).unwrap();
        for maximize in [true, false] {
            let want = brute_force_extremum(&net, &domain, maximize);
            let got = milp_extremum(&net, &domain, maximize);
            assert!((got - want).abs() <= 1e-6, "net {i} max={maximize}: {got} vs {want}");
        }
    }
}

#[test]
fn crown_bounds_contain_sampled_outputs() {
    let mut r = rng(9);
    let net = random_net(&mut r, 3, &[6, 5]);
    let domain = Hyperrectangle::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
    let relax = crown::relax(&net, &domain).unwrap();
    for i in 0..500 {
        let x = backreach::oracle::sample_point(&domain, 2, i);
        let y = net.evaluate(&x).unwrap()[0];
        assert!(relax.lower_at(&x)[0] <= y + 1e-9 && y <= relax.upper_at(&x)[0] + 1e-9);
    }
}
