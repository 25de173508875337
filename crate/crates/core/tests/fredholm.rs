use approx::assert_relative_eq;
use kpzlab::fredholm::{
    build_discretization, det_s_derivatives, discretization_for, elementary_symmetric,
    exterior_traces, laplace_transform_value, nystrom_matrix, spectrum, trace_exact, Engine,
};
use kpzlab::kernel::{kernel_eval, KernelParams};
use kpzlab::validation::first_moment_oracle;
use proptest::prelude::*;

fn det(s: f64, t: f64, nodes: usize) -> f64 {
    let disc = discretization_for(t, s.max(1.0), nodes).unwrap();
    laplace_transform_value(KernelParams::new(s, t, 0).unwrap(), &disc).unwrap()
}

#[test]
fn discretization_layout() {
    let d = build_discretization(1.0, 0.0, 300).unwrap();
    assert_eq!(d.nodes.len(), d.node_count);
    assert!(d.node_count >= 300);
    assert!(d.nodes.windows(2).all(|w| w[1] > w[0]));
    assert!(d.nodes[0] > 0.0 && *d.nodes.last().unwrap() < d.x_max);
    let total: f64 = d.weights.iter().sum();
    assert_relative_eq!(total, d.x_max, max_relative = 1e-12);
}

#[test]
fn trace_identity_all_orders() {
    for (s, t) in [(0.3f64, 0.5), (2.0, 2.0), (50.0, 8.0)] {
        let disc = discretization_for(t, s.max(1.0), 300).unwrap();
        for n in 0..=4 {
            let p = KernelParams::new(s, t, n).unwrap();
            let m = nystrom_matrix(p, &disc).unwrap().trace();
            assert_relative_eq!(m, trace_exact(p).unwrap(), max_relative = 1e-8);
        }
    }
}

#[test]
fn matrix_matches_pointwise_kernel() {
    let p = KernelParams::new(0.7, 1.5, 0).unwrap();
    let disc = discretization_for(1.5, 1.0, 120).unwrap();
    let m = nystrom_matrix(p, &disc).unwrap();
    for (i, j) in [(0, 0), (3, 17), (40, 41), (90, 10)] {
        let k = kernel_eval(p, disc.nodes[i], disc.nodes[j]).unwrap();
        let w = (disc.weights[i] * disc.weights[j]).sqrt();
        assert_relative_eq!(m[(i, j)], w * k, max_relative = 1e-9, epsilon = 1e-300);
    }
}

#[test]
fn order_zero_operator_is_a_positive_contraction() {
    for (s, t) in [(0.01f64, 0.5), (1.0, 1.0), (100.0, 4.0), (1e4, 8.0)] {
        let disc = discretization_for(t, s.max(1.0), 300).unwrap();
        let sd = spectrum(KernelParams::new(s, t, 0).unwrap(), &disc).unwrap();
        let top = sd.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let bottom = sd.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        assert!(top < 1.0, "s={s} t={t} top={top}");
        assert!(bottom > -1e-13, "s={s} t={t} bottom={bottom}");
        let sum: f64 = sd.eigenvalues.iter().sum();
        assert_relative_eq!(sum, sd.matrix_trace, max_relative = 1e-10);
    }
}

#[test]
fn laplace_transform_is_decreasing_in_s() {
    let t = 2.0;
    let vals: Vec<f64> = [0.001, 0.1, 1.0, 10.0, 1000.0]
        .iter()
        .map(|&s| det(s, t, 300))
        .collect();
    assert!(vals.iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn self_convergence_under_doubling() {
    for (s, t) in [(1.0, 1.0), (10.0, 4.0), (0.1, 0.5)] {
        let a = det(s, t, 300);
        let b = det(s, t, 600);
        assert!((a - b).abs() <= 1e-9, "s={s} t={t}: {a} vs {b}");
    }
}

#[test]
fn exterior_series_reproduces_determinant() {
    let (s, t) = (3.0, 1.0);
    let p = KernelParams::new(s, t, 0).unwrap();
    let disc = discretization_for(t, s, 200).unwrap();
    let e = exterior_traces(p, &disc, disc.node_count).unwrap();
    let series: f64 = 1.0
        + e.iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { -v } else { *v })
            .sum::<f64>();
    let d = laplace_transform_value(p, &disc).unwrap();
    assert!((series - d).abs() <= 1e-12);
    assert_relative_eq!(e[0], trace_exact(p).unwrap(), max_relative = 1e-8);
    assert!(exterior_traces(p, &disc, 0).is_err());
}

// D(s) = E[e^{-sU}], so D'(0) = -E[U].
#[test]
fn small_s_slope_is_first_moment() {
    for t in [0.5, 1.0, 3.0] {
        let s = 1e-8;
        let disc = discretization_for(t, 1.0, 300).unwrap();
        let d = det_s_derivatives(KernelParams::new(s, t, 0).unwrap(), &disc, 2).unwrap();
        assert_relative_eq!(-d[0], first_moment_oracle(t).unwrap(), max_relative = 1e-6);
    }
}

// D''(0) = E[U^2]; second-moment values from the closed form of the
// second-moment Volterra equation (mpmath).
#[test]
fn small_s_curvature_is_second_moment() {
    for (t, m2) in [
        (0.5, 0.47229263530338),
        (1.0, 0.42088613406968),
        (2.0, 0.54853212730214),
    ] {
        let disc = discretization_for(t, 1.0, 300).unwrap();
        let d = det_s_derivatives(KernelParams::new(1e-9, t, 0).unwrap(), &disc, 2).unwrap();
        assert_relative_eq!(d[1], m2, max_relative = 1e-6);
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let (s, t) = (0.8, 1.0);
    let disc = discretization_for(t, 1.0, 200).unwrap();
    let eng = Engine::new(t, disc, 0.5, 1.2, 3).unwrap();
    let jet = eng.det_jet(s, 3).unwrap();
    let h = 1e-4;
    let f = |x: f64| eng.determinant(x).unwrap();
    let d1 = (f(s + h) - f(s - h)) / (2.0 * h);
    let d2 = (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h);
    assert_relative_eq!(jet.derivative(0), f(s), max_relative = 1e-13);
    assert_relative_eq!(jet.derivative(1), d1, max_relative = 1e-7);
    assert_relative_eq!(jet.derivative(2), d2, max_relative = 1e-4);
    let fj = |x: f64| eng.det_jet(x, 2).unwrap().derivative(2);
    assert_relative_eq!(
        jet.derivative(3),
        (fj(s + h) - fj(s - h)) / (2.0 * h),
        max_relative = 1e-6
    );
}

#[test]
fn rejects_bad_parameters() {
    assert!(KernelParams::new(0.0, 1.0, 0).is_err());
    assert!(KernelParams::new(1.0, -1.0, 0).is_err());
    assert!(KernelParams::new(f64::NAN, 1.0, 0).is_err());
    let disc = discretization_for(1.0, 1.0, 50).unwrap();
    assert!(laplace_transform_value(KernelParams::new(1.0, 1.0, 1).unwrap(), &disc).is_err());
    assert!(det_s_derivatives(KernelParams::new(1.0, 1.0, 0).unwrap(), &disc, 0).is_err());
}

proptest! {
    #[test]
    fn elementary_symmetric_matches_product_expansion(
        lambda in proptest::collection::vec(-0.9f64..0.9, 1..9),
        z in -1.0f64..1.0,
    ) {
        let e = elementary_symmetric(&lambda, lambda.len());
        let poly: f64 = e.iter().enumerate().map(|(l, v)| v * z.powi(l as i32)).sum();
        let prod: f64 = lambda.iter().map(|x| 1.0 + z * x).product();
        prop_assert!((poly - prod).abs() <= 1e-13);
        prop_assert_eq!(e[0], 1.0);
    }
}

#[test]
fn kernel_agrees_with_rescaled_representation() {
    use kpzlab::kernel::kernel_eval_rescaled;
    for (s, t, n) in [(0.5, 1.0, 0), (5.0, 0.3, 1), (0.02, 6.0, 2)] {
        let p = KernelParams::new(s, t, n).unwrap();
        for (x, y) in [(0.0, 0.0), (0.4, 2.5), (3.0, 1.0)] {
            let a = kernel_eval(p, x, y).unwrap();
            let b = kernel_eval_rescaled(p, x, y).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-300);
        }
    }
}
