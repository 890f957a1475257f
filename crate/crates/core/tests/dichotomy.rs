use homloop_core::builtins;
use homloop_core::dichotomy::{anchor_decay_check, build_dichotomy, decompose_saddle_passage, projection_bound_check, transfer_matrix, ConstantGrid};
use homloop_core::leaves::{homoclinic_orbit, Leaves};
use homloop_core::psys::{compute_spectrum, OrientationHint, Side};
use homloop_core::{pt, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn transfer_matrix_carries_principal_solutions() {
    let sys = builtins::perturb(&builtins::duffing(), "forced", 0.05).unwrap();
    let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
    let d = build_dichotomy(&sys, &spec, 0.05, ConstantGrid::default()).unwrap();
    for side in [Side::Plus, Side::Minus] {
        let p = d.side(side);
        for (t, s) in [(3.0, -2.0), (-4.0, 1.5), (7.0, 6.0)] {
            let phi = transfer_matrix(&sys, side, 0.05, t, s).unwrap();
            let wu = phi.apply(p.v_u_at(s));
            let ws = phi.apply(p.v_s_at(s));
            assert!((wu.norm() / p.z_u(t, s) - 1.0).abs() < 1e-8);
            assert!((ws.norm() / p.z_s(t, s) - 1.0).abs() < 1e-8);
            assert!(wu.unit().dist(p.v_u_at(t)).min(wu.unit().dist(-1.0 * p.v_u_at(t))) < 1e-8);
            let r = 0.5 * (t + s);
            assert!((p.z_u(t, r) * p.z_u(r, s) / p.z_u(t, s) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn damped_rates_are_frozen_eigenvalues() {
    let eps = 0.1;
    let sys = builtins::perturb(&builtins::duffing(), "damping", eps).unwrap();
    let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
    let d = build_dichotomy(&sys, &spec, eps, ConstantGrid::default()).unwrap();
    // [[0, 1], [1, -ε]]
    let disc = (eps * eps + 4.0).sqrt();
    let (lu, ls) = (0.5 * (-eps + disc), 0.5 * (-eps - disc));
    for (t, s) in [(10.0, 0.0), (-5.0, 3.0)] {
        assert!((d.z_u(Side::Plus, t, s).ln() - lu * (t - s)).abs() < 1e-8);
        assert!((d.z_s(Side::Plus, t, s).ln() - ls * (t - s)).abs() < 1e-8);
    }
    // measured against the ε = 0 rates ±1
    let k = (lu - 1.0).abs().max((ls + 1.0).abs());
    assert!((d.k_eps_est - k).abs() < 1e-6, "{} {k}", d.k_eps_est);
}

#[test]
fn projection_bounds_on_random_samples() {
    let eps = 0.05;
    let sys = builtins::perturb(&builtins::duffing(), "forced", eps).unwrap();
    let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
    let d = build_dichotomy(&sys, &spec, eps, ConstantGrid::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples: Vec<(Side, f64, f64, Point2)> = (0..40)
        .map(|k| {
            let side = if k % 2 == 0 { Side::Plus } else { Side::Minus };
            let s = rng.gen_range(-10.0..10.0);
            let t = s + rng.gen_range(-8.0..8.0);
            (side, t, s, pt(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        })
        .collect();
    let rep = projection_bound_check(&sys, &d, &samples).unwrap();
    assert_eq!(rep.samples, 40);
    assert_eq!(rep.violations, 0, "{rep:?}");
    assert!(d.k1_est >= 1.0 && d.k2_est.is_finite());
}

#[test]
fn anchor_orbits_decay_between_rates() {
    let sys = builtins::perturb(&builtins::duffing(), "forced", 1e-3).unwrap();
    let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
    let g = homoclinic_orbit(&sys.unperturbed(), &spec).unwrap();
    let lv = Leaves::new(&sys, &spec, &g);
    let rep = anchor_decay_check(&lv, 0.3, 12.0).unwrap();
    assert_eq!(rep.violations, 0, "{rep:?}");
    assert!(rep.c_k.is_finite());
}

#[test]
fn saddle_passage_remainder_is_small() {
    let sys = builtins::duffing();
    let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
    let g = homoclinic_orbit(&sys, &spec).unwrap();
    let lv = Leaves::new(&sys, &spec, &g);
    let d_data = build_dichotomy(&sys, &spec, 0.0, ConstantGrid::default()).unwrap();
    let dec = decompose_saddle_passage(&lv, &d_data, 0.0, 1e-6, 40.0, None).unwrap();
    assert!(dec.big_m > 2.0);
    assert!(dec.holds());
}
