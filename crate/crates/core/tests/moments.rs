use std::f64::consts::PI;
use std::sync::OnceLock;

use approx::assert_relative_eq;
use kpzlab::moments::{
    decompose, leading_term, low_cutoff, ls_slope, lyapunov_slope, moment, moment_order,
    LaplaceProfile, MomentSettings,
};
use kpzlab::specfun::ln_gamma;
use kpzlab::validation::first_moment_oracle;
use proptest::prelude::*;

fn profile_t1() -> &'static LaplaceProfile {
    static P: OnceLock<LaplaceProfile> = OnceLock::new();
    P.get_or_init(|| LaplaceProfile::build(1.0, 3, 0, MomentSettings::default()).unwrap())
}

#[test]
fn order_and_fraction() {
    assert_eq!(moment_order(0.5).unwrap(), (1, 0.5));
    assert_eq!(moment_order(2.0).unwrap(), (3, 0.0));
    let (n, a) = moment_order(1.3).unwrap();
    assert_eq!(n, 2);
    assert_relative_eq!(a, 0.3, max_relative = 1e-14);
    assert!(moment_order(0.0).is_err());
    assert!(moment_order(f64::NAN).is_err());
}

#[test]
fn integer_moments_match_oracles() {
    let prof = profile_t1();
    assert_relative_eq!(
        prof.moment(1.0).unwrap(),
        first_moment_oracle(1.0).unwrap(),
        max_relative = 1e-8
    );
    // closed form of the second-moment Volterra equation (mpmath)
    assert_relative_eq!(
        prof.moment(2.0).unwrap(),
        0.42088613406968,
        max_relative = 1e-6
    );
}

#[test]
fn moments_are_log_convex_in_p() {
    let prof = profile_t1();
    let ps = [0.3, 0.7, 1.1, 1.5, 1.9, 2.3, 2.7];
    let logs: Vec<f64> = ps.iter().map(|&p| prof.moment(p).unwrap().ln()).collect();
    for w in logs.windows(3) {
        assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
    }
    // E[U^p]^(1/p) is nondecreasing (Lyapunov inequality)
    let norms: Vec<f64> = ps.iter().zip(&logs).map(|(p, l)| l / p).collect();
    assert!(norms.windows(2).all(|w| w[1] >= w[0] - 1e-9));
}

#[test]
fn truncation_and_tail_add_up() {
    let prof = profile_t1();
    for p in [0.4, 1.0, 2.5] {
        let total = prof.moment(p).unwrap();
        let parts = prof.truncated_moment(p).unwrap() + prof.tail_term(p).unwrap();
        assert_relative_eq!(total, parts, max_relative = 1e-12);
    }
    assert!(prof.exterior_terms(1.0).is_err());
    assert!(prof.moment(4.5).is_err());
}

#[test]
fn second_moment_at_half() {
    let prof = LaplaceProfile::build(0.5, 3, 0, MomentSettings::default()).unwrap();
    assert_relative_eq!(
        prof.moment(2.0).unwrap(),
        0.47229263530338,
        max_relative = 1e-6
    );
}

#[test]
fn pipeline_rejects_out_of_range() {
    let s = MomentSettings::default();
    assert!(moment(1.0, 20.0, s).is_err());
    assert!(moment(5.0, 1.0, s).is_err());
    assert!(moment(0.01, 1.0, s).is_err());
    assert!(decompose(1.0, 1.0, s, 1).is_err());
    assert!(LaplaceProfile::build(1.0, 0, 0, s).is_err());
    assert!(LaplaceProfile::build(1.0, 2, 9, s).is_err());
}

#[test]
fn low_cutoff_moves_left_with_order_and_time() {
    assert!(low_cutoff(1.0, 3) < low_cutoff(1.0, 2));
    assert!(low_cutoff(4.0, 2) < low_cutoff(1.0, 2));
    assert!(low_cutoff(0.1, 1) < -34.0);
}

#[test]
fn slopes() {
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
    assert_relative_eq!(ls_slope(&xs, &ys), 3.0, max_relative = 1e-14);
    assert!(lyapunov_slope(1.0, &[1.0, 2.0]).is_err());
    assert!(lyapunov_slope(1.0, &[3.0, 2.0, 4.0]).is_err());
    // the slope approaches p^3/12 from below as the window moves out
    let near = lyapunov_slope(1.0, &[100.0, 150.0, 200.0]).unwrap();
    let far = lyapunov_slope(1.0, &[1000.0, 1500.0, 2000.0]).unwrap();
    assert!(near < far && far < 1.0 / 12.0);
    assert!((far - 1.0 / 12.0).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Laplace's method is exact here: the Airy integral is a Gaussian
    // moment in disguise, so the ratio is 1/(2 sqrt(pi)) at every (p, t).
    #[test]
    fn leading_term_ratio_is_constant(p in 0.1f64..4.0, t in 0.2f64..300.0) {
        let log_env = -1.5 * p.ln() + ln_gamma(p + 1.0) - 0.5 * t.ln() + p * p * p * t / 12.0;
        let r = (leading_term(p, t).unwrap().log_abs - log_env).exp();
        prop_assert!((r * 2.0 * PI.sqrt() - 1.0).abs() < 1e-10);
    }
}
