use std::sync::Arc;

use homloop_core::builtins::{self, duffing_energy};
use homloop_core::flow::{flow_map, integrate, variational_flow, Direction, FlowTol, Section, SectionDir, StopSet, Termination, SWITCH_ID};
use homloop_core::{pt, PiecewiseSystem, Side};

fn tight() -> FlowTol {
    FlowTol::with_ode(1e-12, 1e-14)
}

#[test]
fn energy_is_conserved_across_switches() {
    let sys = builtins::duffing();
    let p = pt(0.5, 0.0);
    let h0 = duffing_energy(p);
    let tr = integrate(&sys, 0.0, p, Direction::Fwd, &StopSet::horizon(60.0), &tight()).unwrap();
    assert!(tr.crossings.len() >= 6);
    for c in &tr.crossings {
        assert!(c.point.x2.abs() < 1e-12);
        assert!((duffing_energy(c.point) - h0).abs() < 1e-10);
        assert_ne!(c.from_side, c.to_side);
    }
    for t in tr.sample_times(2) {
        assert!((duffing_energy(tr.point(t).unwrap()) - h0).abs() < 1e-10);
    }
}

#[test]
fn switch_count_stop() {
    let sys = builtins::duffing_rescaled();
    let tr = integrate(&sys, 0.0, pt(0.5, 0.0), Direction::Fwd, &StopSet::horizon(100.0).switches(2), &tight()).unwrap();
    assert_eq!(tr.termination, Termination::HitTarget(SWITCH_ID));
    assert_eq!(tr.crossings.len(), 2);
    // f⁻ = 2f⁺ keeps the orbits and halves the time spent in y > 0, where this orbit starts
    let d = integrate(&builtins::duffing(), 0.0, pt(0.5, 0.0), Direction::Fwd, &StopSet::horizon(100.0).switches(2), &tight()).unwrap();
    let (a, b) = (&tr.crossings, &d.crossings);
    assert!((a[0].t - 0.5 * b[0].t).abs() < 1e-9);
    assert!(((a[1].t - a[0].t) - (b[1].t - b[0].t)).abs() < 1e-9);
    assert!(a[1].point.dist(b[1].point) < 1e-9);
}

#[test]
fn reversibility() {
    let sys = builtins::perturb(&builtins::duffing(), "forced", 0.05).unwrap();
    let p = pt(0.7, -0.1);
    let q = flow_map(&sys, 0.3, 7.3, p, &tight()).unwrap();
    let back = flow_map(&sys, 7.3, 0.3, q, &tight()).unwrap();
    assert!(back.dist(p) < 1e-9);
}

#[test]
fn terminal_section() {
    let sys = builtins::duffing();
    let s = Section::new(3, Arc::new(|x| x.x1 - 1.2), SectionDir::Increasing, true);
    let tr = integrate(&sys, 0.0, pt(0.5, 0.0), Direction::Fwd, &StopSet::horizon(50.0).section(s), &tight()).unwrap();
    assert_eq!(tr.termination, Termination::HitTarget(3));
    let hit = tr.hits_of(3).next().unwrap();
    assert!((hit.point.x1 - 1.2).abs() < 1e-12);
    assert!(sys.f(Side::Plus, hit.point).x1 > 0.0 || sys.f(Side::Minus, hit.point).x1 > 0.0);
}

#[test]
fn liouville_identity() {
    let sys = builtins::duffing_contracting(-0.5);
    let tr = integrate(&sys, 0.0, pt(0.6, 0.0), Direction::Fwd, &StopSet::horizon(8.0), &tight()).unwrap();
    let fm = variational_flow(&sys, &tr, 6.0, 1.0, &tight()).unwrap();
    assert!((fm.matrix.det() - fm.trace_integral.exp()).abs() < 1e-8 * fm.matrix.det().abs());
    // independent Simpson of div f along the base orbit
    let n = 2000;
    let h = 5.0 / n as f64;
    let div = |t: f64| {
        let x = tr.point(t).unwrap();
        let side = sys.side_of(x).unwrap_or(Side::Plus);
        sys.jac_f(side, x).trace()
    };
    let mut s = div(1.0) + div(6.0);
    for i in 1..n {
        s += div(1.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    assert!((s * h / 3.0 - fm.trace_integral).abs() < 1e-7);
}

#[test]
fn sliding_is_reported() {
    // f⁺ pushes up into y = 0 from below, f⁻ pushes down from above
    let mut sys = PiecewiseSystem::smooth("slide", Arc::new(|_x| pt(1.0, 1.0)), None, Arc::new(|x| -x.x2), None);
    sys.f_minus = Arc::new(|_x| pt(1.0, -1.0));
    let tr = integrate(&sys, 0.0, pt(0.0, -1.0), Direction::Fwd, &StopSet::horizon(5.0), &tight()).unwrap();
    match tr.termination {
        Termination::SlidingDetected { t, point } => {
            assert!((t - 1.0).abs() < 1e-9);
            assert!(point.dist(pt(1.0, 0.0)) < 1e-9);
        }
        other => panic!("{other:?}"),
    }
    assert!(flow_map(&sys, 0.0, 5.0, pt(0.0, -1.0), &tight()).is_err());
}
