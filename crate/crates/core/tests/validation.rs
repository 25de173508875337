use std::f64::consts::PI;

use approx::assert_relative_eq;
use kpzlab::validation::{
    airy_kernel_det, first_moment_oracle, second_moment_factor, second_moment_oracle,
    tw_limit_compare, OracleComparison,
};

// h(T) = 1 + (sqrt(pi T)/2) e^{T/4} (1 + erf(sqrt(T)/2)), evaluated in mpmath
const SECOND_MOMENT: [(f64, f64); 5] = [
    (0.5, 0.47229263530338),
    (1.0, 0.42088613406968),
    (2.0, 0.54853212730214),
    (4.0, 1.44147952345336),
    (6.0, 4.45037972544302),
];

// det(I - K_Ai) on (sigma, inf): an independent numpy/scipy Nystrom solve
const TRACY_WIDOM: [(f64, f64); 8] = [
    (-4.0, 0.0035445535955104),
    (-3.0, 0.0803195529393316),
    (-2.0, 0.4132241425051096),
    (-1.0, 0.8072142419992759),
    (0.0, 0.9693728283552605),
    (1.0, 0.9975054381493894),
    (2.0, 0.9998875536983097),
    (3.0, 0.9999970059566076),
];

#[test]
fn first_moment_formula() {
    assert_relative_eq!(
        first_moment_oracle(3.0).unwrap(),
        (12.0 * PI).powf(-0.5) * 0.25f64.exp(),
        max_relative = 1e-15
    );
    assert!(first_moment_oracle(0.0).is_err());
}

#[test]
fn volterra_solver_matches_closed_form() {
    for (t, v) in SECOND_MOMENT {
        assert_relative_eq!(second_moment_oracle(t).unwrap(), v, max_relative = 1e-6);
    }
    assert!(second_moment_oracle(7.0).is_err());
    assert!(second_moment_factor(0.0).is_err());
}

#[test]
fn volterra_small_horizon_expansion() {
    // h(T) = 1 + sqrt(pi T)/2 + O(T)
    let tt: f64 = 1e-4;
    let h = second_moment_factor(tt).unwrap();
    assert!((h - 1.0 - (PI * tt).sqrt() / 2.0).abs() < 2.0 * tt);
}

#[test]
fn airy_kernel_determinant_matches_reference() {
    for (sigma, v) in TRACY_WIDOM {
        assert_relative_eq!(
            airy_kernel_det(sigma, 120).unwrap(),
            v,
            max_relative = 1e-10
        );
    }
    assert!(airy_kernel_det(-6.0, 120).unwrap() < 1e-3);
    assert!(airy_kernel_det(6.0, 120).unwrap() > 1.0 - 1e-6);
    assert!(airy_kernel_det(f64::NAN, 120).is_err());
}

#[test]
fn large_time_laplace_transform_approaches_tracy_widom() {
    let c = tw_limit_compare(0.0, 1000.0, 300).unwrap();
    assert!(c.pass, "{c:?}");
    assert!(tw_limit_compare(0.0, 10.0, 300).is_err());
}

#[test]
fn comparison_record() {
    let c = OracleComparison::new("x", 1.001, 1.0, 1e-3);
    assert!(c.pass);
    assert_relative_eq!(c.rel_error, 1e-3, max_relative = 1e-9);
    assert!(!OracleComparison::new("x", 1.01, 1.0, 1e-3).pass);
}
