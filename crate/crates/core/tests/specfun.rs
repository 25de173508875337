#![allow(clippy::excessive_precision)]

use approx::assert_relative_eq;
use kpzlab::quadrature::integrate;
use kpzlab::specfun::{
    ai, airy, airy_pair, aisq, aisq_tail_integral, aisq_threshold, gamma, ln_gamma, log_aisq,
    log_gamma,
};
use proptest::prelude::*;

// x, Ai(x), Ai'(x), int_x^inf Ai^2, int_x^inf int_r^inf Ai^2   (mpmath, 40 digits)
#[rustfmt::skip]
const FROZEN: [(f64, f64, f64, f64, f64); 21] = [
    (0.0, 0.3550280538878172, -0.2588194037928068, 0.06698748377966397, 0.030629383078988447),
    (-2.0, 0.22740742820168558, 0.618259020741691, 0.4856724935310843, 0.6006977600849922),
    (-50.0, -0.1618814236123209, 0.968989837276749, 2.2492210702832054, 75.02632282754826),
    (-30.0, -0.08796818845684216, 1.228620602637485, 1.741660650636652, 34.86923952230463),
    (-20.0, -0.1764061270779847, 0.8928628567364713, 1.419586514352694, 18.98032235089214),
    (-12.5, -0.27627456138116024, -0.41933133041950515, 1.1299341805007983, 9.377501311044977),
    (-10.0, 0.04024123848644319, 0.99626504413279, 1.008737610910138, 6.711553759655369),
    (-7.3, 0.3357703705151473, -0.18009580448329365, 0.8554492133184035, 4.183343116482757),
    (-5.0, 0.35076100902411433, 0.32719281855444315, 0.7222215677716748, 2.369149731511716),
    (-1.0, 0.5355608832923521, -0.01016056711664521, 0.2869286968370163, 0.1930996653245914),
    (-0.25, 0.41872461427545293, -0.24638918992017597, 0.10454020855955225, 0.051813107596914376),
    (0.3, 0.2788064819550049, -0.2451463642190548, 0.036776823575783525, 0.015427433742168284),
    (1.0, 0.13529241631288141, -0.1591474412967932, 0.00702387015953822, 0.0024945671879930543),
    (2.5, 0.01572592338047049, -0.026250881035903232, 7.084708974007284e-05, 1.9527965046698588e-05),
    (5.0, 0.00010834442813607442, -0.0002474138908684625, 2.5210578540064904e-09, 5.317793263332619e-10),
    (8.9, 3.3420610425187e-09, -1.0062109921836913e-08, 1.8386451730303306e-18, 3.0010049845739227e-19),
    (9.1, 1.8242282535640281e-09, -5.5520373443859196e-09, 5.420593114343533e-19, 8.756797345537445e-20),
    (12.0, 1.3931846888753607e-13, -4.854736554985309e-13, 2.769040905097892e-27, 3.9282154898035873e-28),
    (20.0, 1.6916728686705404e-27, -7.586391625748354e-27, 3.1819600730446553e-55, 3.528419740308746e-56),
    (35.0, 1.2981999731218427e-61, -7.689499683629199e-61, 1.4209442705920081e-123, 1.1966129487929246e-124),
    (60.0, 2.7831487094969354e-136, -2.1569758112094737e-135, 4.9946066380928985e-273, 3.2188265574248803e-274),
];

#[test]
fn airy_matches_frozen_values() {
    for &(x, a, ap, _, _) in &FROZEN {
        let (ca, cap) = airy(x);
        // oscillatory side: compare against the local amplitude
        let amp = (a * a + ap * ap / (1.0 + x.abs()).sqrt()).sqrt();
        let damp = (ap * ap + a * a * (1.0 + x.abs()).sqrt()).sqrt();
        let (sa, sap) = if x < 0.0 {
            (amp, damp)
        } else {
            (a.abs(), ap.abs())
        };
        assert!((ca - a).abs() <= 1e-12 * sa, "Ai({x}) = {ca}, want {a}");
        assert!(
            (cap - ap).abs() <= 1e-12 * sap,
            "Ai'({x}) = {cap}, want {ap}"
        );
        assert_eq!(ai(x), ca);
    }
}

#[test]
fn aisq_and_tail_match_frozen_values() {
    for &(x, _, _, sq, g) in &FROZEN {
        assert_relative_eq!(aisq(x).unwrap(), sq, max_relative = 1e-11);
        assert_relative_eq!(aisq_tail_integral(x).unwrap(), g, max_relative = 1e-11);
        assert_relative_eq!(log_aisq(x), sq.ln(), max_relative = 1e-12, epsilon = 1e-12);
    }
}

#[test]
fn log_aisq_survives_underflow() {
    assert_relative_eq!(
        log_aisq(100.0),
        -1341.1633824694444333,
        max_relative = 1e-13
    );
    assert_relative_eq!(
        log_aisq(200.0),
        -3779.7589054544978618,
        max_relative = 1e-13
    );
    assert_eq!(airy(200.0).0, 0.0);
}

#[test]
fn gamma_matches_frozen_values() {
    let cases = [
        (0.05, 2.9688792010517307685),
        (0.5, 0.57236494292470008707),
        (2.7, 0.43482055365510467324),
        (7.3, 7.1478925230222486921),
        (33.5, 83.302425502950053443),
    ];
    for (x, v) in cases {
        assert_relative_eq!(ln_gamma(x), v, max_relative = 1e-14);
    }
    assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-14);
    assert_eq!(ln_gamma(1.0), 0.0);
}

#[test]
fn threshold_is_first_grid_point_below_level() {
    let y = aisq_threshold(1e-28);
    assert!(aisq(y).unwrap() < 1e-28);
    assert!(aisq(y - 1.0 / 64.0).unwrap() >= 1e-28);
}

#[test]
fn domain_errors() {
    assert!(airy_pair(f64::NAN).is_err());
    assert!(airy_pair(2e4).is_err());
    assert!(aisq(f64::INFINITY).is_err());
    assert!(aisq_tail_integral(f64::NAN).is_err());
    assert!(log_gamma(0.0).is_err());
    assert!(log_gamma(-1.5).is_err());
    let v = airy_pair(1.0).unwrap();
    assert_eq!((v.ai, v.ai_prime), airy(1.0));
}

proptest! {
    #[test]
    fn aisq_is_tail_integral_of_ai_squared(y in -14.0f64..12.0, h in 0.05f64..1.5) {
        let quad = integrate(|x| ai(x).powi(2), y, y + h, 4, 20).unwrap().value;
        let diff = aisq(y).unwrap() - aisq(y + h).unwrap();
        prop_assert!((quad - diff).abs() <= 1e-13 * (1.0 + aisq(y).unwrap()));
    }

    #[test]
    fn airy_equation_holds(x in -20.0f64..15.0) {
        // Ai'' = x Ai through a centred difference of Ai'
        let h = 1e-4;
        let d2 = (airy(x + h).1 - airy(x - h).1) / (2.0 * h);
        let scale = 1.0 + x.abs() * (ai(x).abs() + airy(x).1.abs());
        prop_assert!((d2 - x * ai(x)).abs() <= 1e-6 * scale);
    }

    #[test]
    fn gamma_recurrence(x in 0.01f64..60.0) {
        prop_assert!((ln_gamma(x + 1.0) - ln_gamma(x) - x.ln()).abs() <= 1e-13 * (1.0 + ln_gamma(x + 1.0).abs()));
    }
}
