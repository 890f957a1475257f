use homloop_core::builtins::{self, duffing_gamma};
use homloop_core::flow::Direction;
use homloop_core::loopmap::{loop_backward, loop_forward, LoopContext, LoopResult};
use homloop_core::psys::{compute_spectrum, rate_constants, OrientationHint, RateConstants};
use homloop_core::scaling::{dulac_prediction, dulac_probe, ell_mismatch_suite, fit_exponents, fit_line, keymissed_suite, Prediction};
use homloop_core::{pt, Error};
use proptest::prelude::*;

const GRID: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

fn duffing_rates() -> RateConstants {
    rate_constants(&compute_spectrum(&builtins::duffing(), &OrientationHint::default()).unwrap())
}

// D_one = a·d^s1, D_half = b·d^s2, T_one = c1 + S1|ln d|, T_half = c2 + S2|ln d|, times (1 + noise)
fn synthetic(dir: Direction, d: f64, s: [f64; 4], noise: f64) -> LoopResult {
    let l = -d.ln();
    LoopResult {
        direction: dir,
        d,
        tau: 0.0,
        start: pt(1.5 - d, 0.0),
        t_half: (0.7 + s[3] * l) * (1.0 + noise),
        t_one: (1.3 + s[2] * l) * (1.0 + noise),
        p_half: pt(0.0, 0.0),
        p_one: pt(0.0, 0.0),
        d_half: 0.3 * d.powf(s[1]) * (1.0 + noise),
        d_one: 2.0 * d.powf(s[0]) * (1.0 + noise),
        segment_times: [f64::NAN; 4],
        segment_disps: [f64::NAN; 4],
        segments_resolved: false,
        sup_dev_first_half: 0.0,
        sup_dev_second_half: 0.0,
    }
}

#[test]
fn fit_line_recovers_exact_line() {
    let xs = [0.0, 1.0, 2.0, 5.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.25 * x).collect();
    let f = fit_line(&xs, &ys);
    assert!((f.slope + 0.25).abs() < 1e-14);
    assert!((f.intercept - 3.0).abs() < 1e-14);
    assert!(f.se < 1e-14);
    assert_eq!(f.n, 4);
}

#[test]
fn exact_power_laws_pass() {
    let th = duffing_rates();
    let s = [th.sigma_fwd, th.sigma_fwd_plus, th.big_sigma_fwd, th.big_sigma_fwd_plus];
    let fwd: Vec<LoopResult> = GRID.iter().map(|&d| synthetic(Direction::Fwd, d, s, 0.0)).collect();
    // rows above 1e-2 are ignored by the fit
    let mut with_big = fwd.clone();
    with_big.push(synthetic(Direction::Fwd, 0.05, [9.0; 4], 0.0));
    let rep = fit_exponents(&with_big, &[], &th, 1e-3).unwrap();
    assert_eq!(rep.d_grid.len(), 5);
    assert!(rep.sigma_bwd.is_none());
    assert!(rep.all_pass());
    for (name, law) in rep.laws() {
        assert!((law.fit.slope - law.theory).abs() < 1e-10, "{name}");
    }
}

#[test]
fn wrong_exponent_fails() {
    let th = duffing_rates();
    let fwd: Vec<LoopResult> = GRID.iter().map(|&d| synthetic(Direction::Fwd, d, [1.3, 0.5, 1.0, 0.5], 0.0)).collect();
    let rep = fit_exponents(&fwd, &[], &th, 0.1).unwrap();
    assert!(!rep.sigma_fwd.unwrap().pass);
    assert!(rep.sigma_fwd_plus.unwrap().pass);
    assert!(!rep.all_pass());
}

#[test]
fn grids_too_small_are_refused() {
    let th = duffing_rates();
    let s = [1.0, 0.5, 1.0, 0.5];
    let four: Vec<LoopResult> = GRID[..4].iter().map(|&d| synthetic(Direction::Fwd, d, s, 0.0)).collect();
    assert!(matches!(fit_exponents(&four, &[], &th, 0.1), Err(Error::InsufficientGrid)));
    let narrow: Vec<LoopResult> = [1e-2, 8e-3, 6e-3, 4e-3, 2e-3].iter().map(|&d| synthetic(Direction::Fwd, d, s, 0.0)).collect();
    assert!(matches!(fit_exponents(&narrow, &[], &th, 0.1), Err(Error::InsufficientGrid)));
    assert!(matches!(fit_exponents(&[], &[], &th, 0.1), Err(Error::InsufficientGrid)));
    let mut bad: Vec<LoopResult> = GRID.iter().map(|&d| synthetic(Direction::Fwd, d, s, 0.0)).collect();
    bad[2].d_one = 0.0;
    assert!(matches!(fit_exponents(&bad, &[], &th, 0.1), Err(Error::DegenerateInput(_))));
}

proptest! {
    #[test]
    fn passing_is_monotone_in_mu(noise in proptest::collection::vec(-0.2f64..0.2, 5), shift in -0.3f64..0.3, mu in 1e-3f64..0.2) {
        let th = duffing_rates();
        let s = [th.sigma_fwd + shift, th.sigma_fwd_plus, th.big_sigma_fwd - shift, th.big_sigma_fwd_plus];
        let fwd: Vec<LoopResult> = GRID.iter().zip(&noise).map(|(&d, &e)| synthetic(Direction::Fwd, d, s, e)).collect();
        let a = fit_exponents(&fwd, &[], &th, mu).unwrap();
        let b = fit_exponents(&fwd, &[], &th, 2.0 * mu).unwrap();
        for ((_, la), (_, lb)) in a.laws().into_iter().zip(b.laws()) {
            prop_assert!(!la.pass || lb.pass);
            prop_assert!(la.mu_effective >= 3.0 * la.fit.se);
        }
    }
}

#[test]
fn dulac_sign_rules() {
    assert_eq!(dulac_prediction(-1.0, -0.5, 3.0, 0.2), Prediction::StableInside);
    assert_eq!(dulac_prediction(0.4, 2.0, -3.0, 5.0), Prediction::UnstableInside);
    assert_eq!(dulac_prediction(0.0, 0.0, -0.6, 1.0), Prediction::StableInside);
    assert_eq!(dulac_prediction(0.0, 0.0, 0.6, 1.0), Prediction::UnstableInside);
    assert_eq!(dulac_prediction(0.0, 0.0, 0.0, 1.0), Prediction::Indeterminate);
    assert_eq!(dulac_prediction(-1.0, 1.0, 0.0, 1.5), Prediction::StableInside);
    assert_eq!(dulac_prediction(-1.0, 1.0, 0.0, 0.5), Prediction::UnstableInside);
}

#[test]
fn contracting_loop_ratio_matches_divergence() {
    let c = -0.5;
    // div = c(H + y²) and H = 0 on γ, so ∫div = c∫y² dt
    let (a, b, n) = (-40.0, 40.0, 80_000);
    let h = (b - a) / n as f64;
    let f = |t: f64| c * duffing_gamma(t).x2.powi(2);
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = s * h / 3.0;
    assert!((integral - 1.2 * c).abs() < 1e-8);

    let ctx = LoopContext::new(&builtins::duffing_contracting(c), 1.0 / 16.0).unwrap();
    let p = dulac_probe(&ctx, 3).unwrap();
    assert_eq!(p.prediction, Prediction::StableInside);
    assert!((p.div_integral_along_gamma - integral).abs() < 1e-6);
    assert!(p.consistent());
    assert!((p.empirical_contraction / integral.exp() - 1.0).abs() < 0.02, "{}", p.empirical_contraction);
    assert_eq!(p.displacements.len(), 4);
}

#[test]
fn hamiltonian_probe_is_neutral() {
    let ctx = LoopContext::new(&builtins::duffing(), 1.0 / 16.0).unwrap();
    let p = dulac_probe(&ctx, 2).unwrap();
    assert_eq!(p.prediction, Prediction::Indeterminate);
    assert!((p.empirical_contraction - 1.0).abs() < 1e-6);
    assert!(p.consistent());
}

#[test]
fn ell_mismatch_zero_displacement_row() {
    let ctx = LoopContext::new(&builtins::duffing(), 1.0 / 16.0).unwrap();
    let rep = ell_mismatch_suite(&ctx, &[0.0, 1e-4], 0.0).unwrap();
    let r0 = &rep.rows[0];
    assert_eq!((r0.junction, r0.first_arc), (0.0, 0.0));
    assert!(r0.holds());
    let r1 = &rep.rows[1];
    assert!(r1.resolved);
    assert!(r1.first_arc >= r1.junction && r1.first_arc >= 1e-4 * 0.99);
}

#[test]
fn duffing_loops_track_leaves() {
    let ctx = LoopContext::new(&builtins::duffing(), 1.0 / 16.0).unwrap();
    let th = ctx.rates;
    let mut loops = Vec::new();
    for &d in &GRID {
        loops.push(loop_forward(&ctx, d, 0.0).unwrap());
        loops.push(loop_backward(&ctx, d, 0.0).unwrap());
    }
    let km = keymissed_suite(&loops, &th, ctx.params.mu);
    assert_eq!(km.rows.len(), 10);
    assert_eq!(km.violations, 0, "{}", km.worst_ratio);
    let (f, b): (Vec<LoopResult>, Vec<LoopResult>) = loops.into_iter().partition(|r| r.direction == Direction::Fwd);
    let rep = fit_exponents(&f, &b, &th, ctx.params.mu).unwrap();
    assert!(rep.all_pass());
    assert!((rep.sigma_fwd.unwrap().fit.slope - 1.0).abs() < 1e-3);
}
