use backreach::crown;
use backreach::geom::{Hyperrectangle, Region};
use backreach::matrix::Matrix;
use backreach::nn::{Activation, FeedforwardNetwork, Layer};
use backreach::overt::{bound_scalar, ScalarFn};
use proptest::prelude::*;

fn boxes(n: usize) -> impl Strategy<Value = Hyperrectangle> {
    prop::collection::vec((-10.0..10.0f64, 0.0..5.0f64), n)
        .prop_map(|v| Hyperrectangle::new(v.iter().map(|p| p.0).collect(), v.iter().map(|p| p.0 + p.1).collect()).unwrap())
}

fn net() -> impl Strategy<Value = FeedforwardNetwork> {
    (prop::collection::vec(-1.0..1.0f64, 2 * 5 + 5 + 5 * 2 + 2)).prop_map(|w| {
        let l1 = Layer::new(Matrix::from_flat(5, 2, w[..10].to_vec()).unwrap(), w[10..15].to_vec(), Activation::Relu).unwrap();
        let l2 = Layer::new(Matrix::from_flat(2, 5, w[15..25].to_vec()).unwrap(), w[25..27].to_vec(), Activation::Identity).unwrap();
        FeedforwardNetwork::new(2, vec![l1, l2]).unwrap()
    })
}

proptest! {
    #[test]
    fn hull_contains_both(a in boxes(3), b in boxes(3)) {
        let h = a.hull(&b).unwrap();
        prop_assert!(a.subset_of(&h, 0.0).unwrap() && b.subset_of(&h, 0.0).unwrap());
    }

    #[test]
    fn intersection_is_inside_both(a in boxes(2), b in boxes(2)) {
        match a.intersection(&b).unwrap() {
            Region::Box(i) => {
                prop_assert!(i.subset_of(&a, 0.0).unwrap() && i.subset_of(&b, 0.0).unwrap());
                prop_assert!(a.intersects(&b).unwrap());
            }
            Region::Empty => prop_assert!(!a.intersects(&b).unwrap()),
        }
    }

    #[test]
    fn scalar_bounds_enclose_the_function(a in -8.0..8.0f64, w in 0.0..10.0f64, eps in 0.005..0.5f64, t in 0.0..=1.0f64) {
        for f in [ScalarFn::Sin, ScalarFn::Cos, ScalarFn::Square] {
            let (lo, hi) = bound_scalar(f, a, a + w, eps).unwrap();
            let x = a + t * w;
            prop_assert!(lo.eval(x) <= f.eval(x) && f.eval(x) <= hi.eval(x), "{f:?} at {x}");
            prop_assert!(hi.eval(x) - lo.eval(x) <= eps + 1e-12);
        }
    }

    #[test]
    fn crown_encloses_the_network(n in net(), dom in boxes(2), t in prop::collection::vec(0.0..=1.0f64, 2)) {
        let x: Vec<f64> = (0..2).map(|k| dom.lo()[k] + t[k] * dom.width(k)).collect();
        let y = n.evaluate(&x).unwrap();
        let relax = crown::relax(&n, &dom).unwrap();
        let (lo, hi) = (relax.lower_at(&x), relax.upper_at(&x));
        for k in 0..2 {
            prop_assert!(lo[k] <= y[k] + 1e-9 && y[k] <= hi[k] + 1e-9);
        }
        let ibp = n.interval_bounds(&dom).unwrap().output_interval().unwrap();
        for k in 0..2 {
            prop_assert!(ibp.0[k] <= y[k] + 1e-9 && y[k] <= ibp.1[k] + 1e-9);
        }
    }
}
