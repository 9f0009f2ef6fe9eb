use std::sync::OnceLock;

use proptest::prelude::*;
use slicecap::family::{build_example_family, CrossingSign, ExampleParams, GeneratingFamily, QuadraticForm};
use slicecap::morse::{DifferenceFunction, HalfSpace};

fn families() -> &'static [GeneratingFamily] {
    static F: OnceLock<Vec<GeneratingFamily>> = OnceLock::new();
    F.get_or_init(|| {
        let p = ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2);
        let neg = build_example_family(p, CrossingSign::Negative).unwrap();
        let pos = build_example_family(p, CrossingSign::Positive).unwrap();
        let three = build_example_family(ExampleParams { dim: 3, ..p }, CrossingSign::Negative).unwrap();
        let stab = neg.stabilize(&QuadraticForm::diagonal(&[-1.0]).unwrap());
        vec![neg, pos, three, stab]
    })
}

fn central_gradient(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let (mut a, mut b) = (p.to_vec(), p.to_vec());
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// A family and a point scaled to `scale` times its support box.
fn probe(scale: f64) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (0..4usize, prop::collection::vec(-1.0..1.0f64, 4)).prop_map(move |(i, u)| {
        let f = &families()[i];
        let ext = f.support_extents();
        let p = (0..f.dim()).map(|k| u[k] * scale * ext.get(k).copied().unwrap_or(3.0)).collect();
        (i, p)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn gradient_and_hessian_match_differences((i, p) in probe(1.3)) {
        let f = &families()[i];
        let g = f.gradient(&p);
        let fd = central_gradient(|q| f.value(q), &p, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{a} vs {b} at {p:?}");
        }
        let h = f.hessian(&p);
        for j in 0..p.len() {
            let col = central_gradient(|q| f.gradient(q)[j], &p, 1e-5);
            for (k, c) in col.iter().enumerate() {
                prop_assert!((h[(j, k)] - c).abs() <= 1e-4 * (1.0 + c.abs()), "H[{j},{k}] {} vs {c}", h[(j, k)]);
            }
        }
    }

    #[test]
    fn quadratic_outside_support((i, mut p) in probe(1.0), axis in 0..3usize, push in 1.01..3.0f64) {
        let f = &families()[i];
        let axis = axis % f.base_dim();
        p[axis] = push * f.support_extents()[axis] * if p[axis] < 0.0 { -1.0 } else { 1.0 };
        prop_assert!(f.outside_support(&p));
        let e = &p[f.base_dim()..];
        prop_assert!((f.value(&p) - f.infinity_form().eval(e)).abs() < 1e-12);
    }

    #[test]
    fn shear_subtracts_a_linear_term((i, p) in probe(1.2), a in -4.0..4.0f64) {
        let f = &families()[i];
        let s = f.sheared(a);
        let m = f.xn_index();
        prop_assert!((s.value(&p) - (f.value(&p) - a * p[m])).abs() < 1e-12 * (1.0 + f.value(&p).abs()));
        let mut g = f.gradient(&p);
        g[m] -= a;
        prop_assert_eq!(s.gradient(&p), g);
    }

    #[test]
    fn dilation_scales_and_round_trips((i, p) in probe(1.2), beta in 0.3..3.0f64) {
        let f = &families()[i];
        let d = f.dilate(beta).unwrap();
        let n = f.base_dim();
        let scaled: Vec<f64> = p.iter().enumerate().map(|(k, v)| if k < n { beta * v } else { *v }).collect();
        let v = f.value(&p);
        prop_assert!((d.value(&scaled) - beta * beta * v).abs() <= 1e-10 * (1.0 + v.abs()));
        let back = d.dilate(1.0 / beta).unwrap();
        prop_assert!((back.value(&p) - v).abs() <= 1e-10 * (1.0 + v.abs()));
    }

    #[test]
    fn difference_function_identities((i, p) in probe(1.2), (_, pt) in probe(1.2), a in -3.0..3.0f64) {
        let f = &families()[i];
        let pt: Vec<f64> = pt.into_iter().chain(std::iter::repeat(0.7)).take(f.dim()).collect();
        let delta = DifferenceFunction::new(f.sheared(a));
        let q = delta.join(&p, &pt);
        let v = delta.value(&q);
        let s = f.sheared(a);
        let (p, pt) = delta.split(&q);
        prop_assert!((v - (s.value(&p) - s.value(&pt))).abs() <= 1e-12 * (1.0 + v.abs()));

        // changing the height only changes Δ by a(x̃_n − x_n)
        let (m, mt) = delta.xn_indices();
        let d0 = DifferenceFunction::new(f.sheared(0.0));
        prop_assert!((v - (d0.value(&q) - a * (q[m] - q[mt]))).abs() <= 1e-10 * (1.0 + v.abs()));

        let sw = delta.swap(&q);
        prop_assert!((delta.value(&sw) + v).abs() <= 1e-12 * (1.0 + v.abs()));
        let flipped = match delta.half_space(&q) {
            HalfSpace::Plus => HalfSpace::Minus,
            HalfSpace::Minus => HalfSpace::Plus,
            HalfSpace::Zero => HalfSpace::Zero,
        };
        prop_assert_eq!(delta.half_space(&sw), flipped);

        let fd = central_gradient(|z| delta.value(z), &q, 1e-5);
        for (x, y) in delta.gradient(&q).iter().zip(&fd) {
            prop_assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs()));
        }
    }
}
