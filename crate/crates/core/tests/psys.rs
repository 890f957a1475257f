use homloop_core::builtins;
use homloop_core::leaves::homoclinic_orbit;
use homloop_core::psys::{classify_scenario, compute_spectrum, f2_holds, rate_constants, OrientationHint, Scenario};
use homloop_core::{pt, Error, Side};
use proptest::prelude::*;

fn rates_by_hand(lup: f64, lsp: f64, lum: f64, lsm: f64) -> [f64; 6] {
    // σ^fwd, σ^bwd, Σ^fwd, Σ^bwd, Σ^fwd_+, Σ^bwd_-
    let sfp = lsp / (lup + lsp);
    let sfm = (lum + lsm) / lum;
    [
        sfp * sfm,
        1.0 / (sfp * sfm),
        (lum + lsp) / (lum * (lup + lsp)),
        (lum + lsp) / (lsp * (lum + lsm)),
        1.0 / (lup + lsp),
        1.0 / (lum + lsm),
    ]
}

#[test]
fn duffing_spectrum() {
    let sys = builtins::duffing();
    let sp = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
    for (l, want) in [(sp.lambda_u_plus, 1.0), (sp.lambda_s_plus, -1.0), (sp.lambda_u_minus, 1.0), (sp.lambda_s_minus, -1.0)] {
        assert!((l - want).abs() < 1e-12);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!(sp.v_u_plus.dist(pt(-r, -r)) < 1e-12);
    assert!(sp.v_s_plus.dist(pt(r, -r)) < 1e-12);
    assert!(sp.v_u_minus.dist(pt(r, r)) < 1e-12);
    assert!(sp.v_s_minus.dist(pt(-r, r)) < 1e-12);
    // F1: the unstable and stable eigenvectors point into their own half planes
    assert!(sp.c_u_perp_plus > 0.0 && sp.c_u_perp_minus < 0.0);
    assert!(sp.c_s_perp_plus > 0.0 && sp.c_s_perp_minus < 0.0);
}

#[test]
fn duffing_rates() {
    let sys = builtins::duffing();
    let r = rate_constants(&compute_spectrum(&sys, &OrientationHint::default()).unwrap());
    assert!((r.sigma_fwd - 1.0).abs() < 1e-12);
    assert!((r.sigma_fwd_plus - 0.5).abs() < 1e-12);
    assert!((r.big_sigma_fwd - 1.0).abs() < 1e-12);
    assert!((r.big_sigma_fwd_plus - 0.5).abs() < 1e-12);
    assert!((r.mu0 - 1.0 / 16.0).abs() < 1e-12);
    assert!(r.sigma_fb <= 1.0 + 1e-12);
}

#[test]
fn rescaled_rates() {
    let sys = builtins::duffing_rescaled();
    let r = rate_constants(&compute_spectrum(&sys, &OrientationHint::default()).unwrap());
    assert!((r.big_sigma_fwd - 0.75).abs() < 1e-12);
    assert!((r.big_sigma_bwd - 0.75).abs() < 1e-12);
    assert!((r.sigma_fwd - 1.0).abs() < 1e-12);
    assert!((r.sigma_fwd_minus - 2.0).abs() < 1e-12);
    assert!((r.sigma_bwd_minus - 0.5).abs() < 1e-12);
    assert!((r.big_sigma_bwd_minus - 0.25).abs() < 1e-12);
    assert!((r.lambda_hi - 2.0).abs() < 1e-12);
}

#[test]
fn scenarios() {
    for (sys, want, f2) in [(builtins::duffing(), Scenario::S1, true), (builtins::sliding_demo(), Scenario::S3, false)] {
        let sp = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
        let g = homoclinic_orbit(&sys, &sp).unwrap();
        let rep = classify_scenario(&sys, &sp, &g).unwrap();
        assert_eq!(rep.scenario, want, "{}", sys.name);
        assert_eq!(rep.f2_ok, f2);
        assert_eq!(f2_holds(&sp), f2);
        assert!(rep.f0_ok && rep.f1_ok);
        assert!((rep.k_transversality - 0.75).abs() < 1e-9);
        assert_eq!(rep.sliding_near_origin, want == Scenario::S3);
    }
}

#[test]
fn orientation_hint_conflict() {
    let sys = builtins::duffing();
    let hint = OrientationHint { departure: Some(pt(-1.0, -1.0)), arrival: None };
    assert!(matches!(compute_spectrum(&sys, &hint), Err(Error::OrientationMismatch(_))));
    let ok = OrientationHint { departure: Some(pt(1.0, 1.0)), arrival: Some(pt(-1.0, 1.0)) };
    assert!(compute_spectrum(&sys, &ok).is_ok());
}

#[test]
fn perturbation_uses_side_fields() {
    let sys = builtins::perturb(&builtins::duffing_rescaled(), "damping", 0.1).unwrap();
    let x = pt(0.3, 0.2);
    let want = 2.0 * pt(0.2, 0.3 - 0.09) + 0.1 * pt(0.0, -0.2);
    assert!(sys.field(Side::Minus, 1.0, x).dist(want) < 1e-15);
    assert_eq!(sys.side_of(pt(0.0, -1.0)), Some(Side::Plus));
}

proptest! {
    #[test]
    fn rate_formulas(a in 0.2f64..5.0, b in 0.2f64..5.0, c in 0.2f64..5.0, d in 0.2f64..5.0) {
        // diagonal linear saddle on each side of y = 0 with the Duffing eigen-directions
        use homloop_core::psys::SaddleSpectrum;
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let sp = SaddleSpectrum {
            lambda_u_plus: a, lambda_s_plus: -b, lambda_u_minus: c, lambda_s_minus: -d,
            v_s_plus: pt(r2, -r2), v_u_plus: pt(-r2, -r2), v_s_minus: pt(-r2, r2), v_u_minus: pt(r2, r2),
            c_u_perp_plus: r2, c_u_perp_minus: -r2, c_s_perp_plus: r2, c_s_perp_minus: -r2,
            grad_g0: pt(0.0, -1.0),
        };
        let r = rate_constants(&sp);
        let h = rates_by_hand(a, b, c, d);
        let got = [r.sigma_fwd, r.sigma_bwd, r.big_sigma_fwd, r.big_sigma_bwd, r.big_sigma_fwd_plus, r.big_sigma_bwd_minus];
        for (x, y) in got.iter().zip(h) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        prop_assert!(r.mu0 > 0.0 && r.mu0 <= 0.25 * r.sigma_lo * r.sigma_lo + 1e-15);
        prop_assert!((r.sigma_fwd * r.sigma_bwd - 1.0).abs() < 1e-12);
    }
}
