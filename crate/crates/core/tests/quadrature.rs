use std::f64::consts::PI;

use approx::assert_relative_eq;
use kpzlab::quadrature::{
    gauss_legendre_rule, integrate, integrate_decaying, integrate_edges, log_integral_unimodal,
    rule, LogIntegralSpec,
};
use proptest::prelude::*;

#[test]
fn rules_are_symmetric_and_normalized() {
    for n in [3, 8, 20, 97, 400, 1000] {
        let r = gauss_legendre_rule(n).unwrap();
        assert_eq!(r.nodes.len(), n);
        let total: f64 = r.weights.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-13);
        for i in 0..n {
            assert!(r.nodes[i].abs() < 1.0);
            assert!(r.weights[i] > 0.0);
            assert!((r.nodes[i] + r.nodes[n - 1 - i]).abs() < 1e-14);
        }
    }
}

#[test]
fn mapped_rule_integrates_exp() {
    let r = rule(20).unwrap();
    let v: f64 = r.mapped(0.0, 3.0).map(|(x, w)| w * x.exp()).sum();
    assert_relative_eq!(v, 3f64.exp() - 1.0, max_relative = 1e-14);
}

#[test]
fn composite_error_estimate_is_small_for_smooth_integrands() {
    let e = integrate(|x| x.sin(), 0.0, PI, 4, 10).unwrap();
    assert_relative_eq!(e.value, 2.0, max_relative = 1e-14);
    assert!(e.error < 1e-12);
    assert!(integrate(|x| x, 1.0, 0.0, 4, 10).is_err());
}

#[test]
fn edges_and_nonfinite_values() {
    let v = integrate_edges(|x| x * x, &[0.0, 0.5, 2.0], 4).unwrap();
    assert_relative_eq!(v, 8.0 / 3.0, max_relative = 1e-14);
    assert!(integrate_edges(|x| 1.0 / x, &[-1.0, 1.0], 2).is_ok());
    assert!(integrate_edges(|_| f64::NAN, &[0.0, 1.0], 2).is_err());
}

#[test]
fn decaying_tail_integrals() {
    let v = integrate_decaying(|x| (-x).exp(), 0.0, 1.0, 1e-17).unwrap();
    assert_relative_eq!(v, 1.0, max_relative = 1e-14);
    let v = integrate_decaying(|x| x * x * (-3.0 * x).exp(), 0.0, 2.0, 1e-18).unwrap();
    assert_relative_eq!(v, 2.0 / 27.0, max_relative = 1e-13);
    assert!(integrate_decaying(|_| 1.0, 0.0, 1.0, 1e-10).is_err());
}

#[test]
fn log_integral_of_shifted_gaussians() {
    for (mu, big) in [(0.0, 0.0), (3.5, 800.0), (-40.0, -900.0)] {
        let spec = LogIntegralSpec {
            scan_lo: mu - 10.0,
            scan_hi: mu + 10.0,
            width: 0.5,
            left_rate: 1.0,
            right_rate: 1.0,
            upper: None,
        };
        let v = log_integral_unimodal(|r| big - 0.5 * (r - mu) * (r - mu), &spec).unwrap();
        assert_relative_eq!(
            v,
            big + 0.5 * (2.0 * PI).ln(),
            max_relative = 1e-13,
            epsilon = 1e-13
        );
        let half = LogIntegralSpec {
            upper: Some(mu),
            ..spec
        };
        let v = log_integral_unimodal(|r| big - 0.5 * (r - mu) * (r - mu), &half).unwrap();
        assert_relative_eq!(
            v,
            big + 0.5 * (0.5 * PI).ln(),
            max_relative = 1e-12,
            epsilon = 1e-12
        );
    }
}

proptest! {
    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1(
        n in 1usize..30,
        coeffs in proptest::collection::vec(-1.0f64..1.0, 60),
        a in -2.0f64..0.0,
        len in 0.1f64..3.0,
    ) {
        let deg = 2 * n - 1;
        let c = &coeffs[..=deg];
        let b = a + len;
        let poly = |x: f64| c.iter().rev().fold(0.0, |acc, &k| acc * x + k);
        let anti = |x: f64| {
            c.iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (i, &k)| acc * x + k / (i + 1) as f64)
                * x
        };
        let r = rule(n).unwrap();
        let q: f64 = r.mapped(a, b).map(|(x, w)| w * poly(x)).sum();
        let exact = anti(b) - anti(a);
        let scale: f64 = c.iter().map(|k| k.abs()).sum::<f64>() * 3f64.powi(deg as i32 + 1);
        prop_assert!((q - exact).abs() <= 1e-13 * scale);
    }
}
