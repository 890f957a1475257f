use std::f64::consts::PI;

use homloop_core::builtins::{self, duffing_gamma};
use homloop_core::leaves::{coords, homoclinic_orbit, LeafKind, Leaves};
use homloop_core::psys::{compute_spectrum, OrientationHint};
use homloop_core::{pt, PiecewiseSystem};

fn setup(sys: &PiecewiseSystem) -> Leaves {
    let spec = compute_spectrum(sys, &OrientationHint::default()).unwrap();
    let g = homoclinic_orbit(&sys.unperturbed(), &spec).unwrap();
    Leaves::new(sys, &spec, &g)
}

// A sin τ with A = ½∫γ₁(t)² cos t dt, composite Simpson
fn forced_amplitude() -> f64 {
    let (a, b, n) = (-60.0, 60.0, 120_000);
    let h = (b - a) / n as f64;
    let f = |t: f64| duffing_gamma(t).x1.powi(2) * t.cos();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 * s * h / 3.0
}

#[test]
fn rescaled_homoclinic_by_shooting() {
    let mut sys = builtins::duffing_rescaled();
    sys.gamma_exact = None;
    let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
    let g = homoclinic_orbit(&sys, &spec).unwrap();
    assert!(g.gamma0.dist(pt(1.5, 0.0)) < 1e-9);
    for k in 1..=8 {
        let t = 0.5 * k as f64;
        assert!(g.eval(t).dist(duffing_gamma(t)) < 1e-7);
        assert!(g.eval(-t).dist(duffing_gamma(-2.0 * t)) < 1e-7);
    }
}

#[test]
fn forced_splitting_matches_first_order() {
    let eps = 1e-4;
    let lv = setup(&builtins::perturb(&builtins::duffing(), "forced", eps).unwrap());
    let amp = forced_amplitude();
    for tau in [PI / 4.0, PI / 2.0, 1.25 * PI] {
        let ps = lv.p_s(tau).unwrap();
        let pu = lv.p_u(tau).unwrap();
        assert!(ps.x2.abs() < 1e-12 && pu.x2.abs() < 1e-12);
        // Ω⁰ = {y = 0} with ℓ increasing in x: 𝒟(P_u, P_s) = x(P_s) - x(P_u) ≈ -(4/3)·εM(τ)
        let split = ps.x1 - pu.x1;
        let pred = -4.0 / 3.0 * eps * amp * tau.sin();
        assert!((split / pred - 1.0).abs() < 0.02, "tau {tau}: {split} vs {pred}");
    }
}

#[test]
fn anchors_are_periodic_in_tau() {
    let lv = setup(&builtins::perturb(&builtins::duffing(), "forced", 1e-3).unwrap());
    let a = lv.p_s(0.7).unwrap();
    let b = lv.p_s(0.7 + 2.0 * PI).unwrap();
    assert!(a.dist(b) < 1e-9);
    let a = lv.p_u(0.7).unwrap();
    let b = lv.p_u(0.7 - 2.0 * PI).unwrap();
    assert!(a.dist(b) < 1e-9);
}

#[test]
fn leaves_shadow_gamma() {
    let eps = 1e-3;
    let lv = setup(&builtins::perturb(&builtins::duffing(), "forced", eps).unwrap());
    for kind in [LeafKind::Stable, LeafKind::Unstable] {
        let dev = lv.shadowing_deviation(1.0, kind, 15.0).unwrap();
        assert!(dev < 20.0 * eps, "{kind:?} {dev}");
        assert!(dev > 0.0);
    }
}

#[test]
fn transversal_anchor_geometry() {
    let lv = setup(&builtins::duffing());
    let big_l = 20.0;
    let p = lv.anchor_on_s(0.0, big_l, LeafKind::Stable).unwrap();
    let (a, b) = coords(p, lv.spec.v_u_plus, lv.spec.v_s_plus);
    assert!((b - 1.0 / big_l).abs() < 1e-10);
    // at ε = 0 the stable leaf is the lower branch of the energy-zero curve
    assert!(builtins::duffing_energy(p).abs() < 1e-10);
    assert!(a.abs() < 1.0 / big_l);
    let q = lv.anchor_on_s(0.0, big_l, LeafKind::Unstable).unwrap();
    let (a, b) = coords(q, lv.spec.v_s_minus, lv.spec.v_u_minus);
    assert!((b - 1.0 / big_l).abs() < 1e-10);
    assert!(a.abs() < 1.0 / big_l);
    assert!(lv.anchor_on_s(0.0, 1e5, LeafKind::Stable).is_err());
}
