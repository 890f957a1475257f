//! Named example systems. All use G = -y, so Ω⁺ is the lower half plane.

use alloc::sync::Arc;

use crate::geom::{m, pt, Mat2, Point2};
use crate::psys::{Curve, JacField, PertJac, Perturbation, PiecewiseSystem, ScalarField, VecField};

fn duffing_f(x: Point2) -> Point2 {
    pt(x.x2, x.x1 - x.x1 * x.x1)
}

fn duffing_jac(x: Point2) -> Mat2 {
    Mat2::new(0.0, 1.0, 1.0 - 2.0 * x.x1, 0.0)
}

/// γ(t) = (3/2 sech²(t/2), -3/2 sech²(t/2) tanh(t/2)).
pub fn duffing_gamma(t: f64) -> Point2 {
    let c = m::cosh(0.5 * t);
    let s2 = 1.0 / (c * c);
    pt(1.5 * s2, -1.5 * s2 * m::tanh(0.5 * t))
}

/// First integral of the unperturbed Duffing field.
pub fn duffing_energy(x: Point2) -> f64 {
    0.5 * x.x2 * x.x2 - 0.5 * x.x1 * x.x1 + x.x1 * x.x1 * x.x1 / 3.0
}

fn g_minus_y() -> (ScalarField, VecField) {
    (Arc::new(|x: Point2| -x.x2), Arc::new(|_x: Point2| pt(0.0, -1.0)))
}

pub fn duffing() -> PiecewiseSystem {
    let (g, dg) = g_minus_y();
    let f: VecField = Arc::new(duffing_f);
    let j: JacField = Arc::new(duffing_jac);
    let mut s = PiecewiseSystem::smooth("duffing", f, Some(j), g, Some(dg));
    s.gamma_exact = Some(Arc::new(duffing_gamma));
    s
}

/// f⁻ = 2 f⁺: same loop, the upper half traversed twice as fast.
pub fn duffing_rescaled() -> PiecewiseSystem {
    let mut s = duffing();
    s.name = "duffing-rescaled".into();
    s.f_minus = Arc::new(|x| 2.0 * duffing_f(x));
    s.jac_minus = Some(Arc::new(|x| duffing_jac(x).scale(2.0)));
    let gamma: Curve = Arc::new(|t: f64| if t >= 0.0 { duffing_gamma(t) } else { duffing_gamma(2.0 * t) });
    s.gamma_exact = Some(gamma);
    s
}

fn bump(x: f64) -> f64 {
    let u = 2.0 * x;
    if u.abs() >= 1.0 {
        0.0
    } else {
        m::exp(1.0 - 1.0 / (1.0 - u * u))
    }
}

/// Duffing with f⁺ bent near the origin so that v_u⁺ ∝ (3, -1) enters the loop (scenario S3).
/// The bend vanishes on the lower branch of the homoclinic, which is therefore unchanged.
pub fn sliding_demo() -> PiecewiseSystem {
    let mut s = duffing();
    s.name = "sliding-demo".into();
    s.f_plus = Arc::new(|x: Point2| {
        let r = 1.0 - 2.0 * x.x1 / 3.0;
        if x.x1.abs() >= 0.5 || r <= 0.0 {
            return duffing_f(x);
        }
        let k = bump(x.x1) * (x.x2 + x.x1 * m::sqrt(r));
        duffing_f(x) + k * pt(2.0, -2.0)
    });
    s.jac_plus = None;
    s
}

/// Smooth Duffing with the energy feedback c·H·y in the second component; the loop is kept,
/// and ∫div along it equals 6c/5.
pub fn duffing_contracting(c: f64) -> PiecewiseSystem {
    let (g, dg) = g_minus_y();
    let f: VecField = Arc::new(move |x: Point2| {
        let h = duffing_energy(x);
        pt(x.x2, x.x1 - x.x1 * x.x1 + c * h * x.x2)
    });
    let j: JacField = Arc::new(move |x: Point2| {
        let h = duffing_energy(x);
        let (a, b) = (x.x1, x.x2);
        Mat2::new(0.0, 1.0, 1.0 - 2.0 * a + c * b * (a * a - a), c * (h + b * b))
    });
    let mut s = PiecewiseSystem::smooth("duffing-contracting", f, Some(j), g, Some(dg));
    s.gamma_exact = Some(Arc::new(duffing_gamma));
    s
}

/// g = (0, -y)
pub fn damping() -> (Perturbation, PertJac) {
    (Arc::new(|_t, x: Point2, _e| pt(0.0, -x.x2)), Arc::new(|_t, _x, _e| Mat2::new(0.0, 0.0, 0.0, -1.0)))
}

/// g = (0, x cos t)
pub fn forced() -> (Perturbation, PertJac) {
    (
        Arc::new(|t: f64, x: Point2, _e| pt(0.0, x.x1 * m::cos(t))),
        Arc::new(|t: f64, _x, _e| Mat2::new(0.0, 0.0, m::cos(t), 0.0)),
    )
}

pub const SYSTEM_NAMES: [&str; 4] = ["duffing", "duffing-rescaled", "sliding-demo", "duffing-contracting"];
pub const PERTURBATION_NAMES: [&str; 3] = ["none", "damping", "forced"];

pub fn system_by_name(name: &str) -> Option<PiecewiseSystem> {
    match name {
        "duffing" => Some(duffing()),
        "duffing-rescaled" => Some(duffing_rescaled()),
        "sliding-demo" => Some(sliding_demo()),
        "duffing-contracting" => Some(duffing_contracting(-0.5)),
        _ => None,
    }
}

/// Attach a named perturbation with the given ε.
pub fn perturb(sys: &PiecewiseSystem, name: &str, eps: f64) -> Option<PiecewiseSystem> {
    let s = match name {
        "none" => {
            let mut s = sys.clone();
            s.g = None;
            s.g_jac = None;
            s
        }
        "damping" => {
            let (g, j) = damping();
            sys.with_perturbation(g, Some(j), None)
        }
        "forced" => {
            let (g, j) = forced();
            sys.with_perturbation(g, Some(j), Some(2.0 * core::f64::consts::PI))
        }
        _ => return None,
    };
    Some(s.with_epsilon(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psys::Side;

    #[test]
    fn duffing_gamma_solves_the_ode() {
        let sys = duffing();
        for k in -20..=20 {
            let t = 0.37 * k as f64;
            let h = 1e-5;
            let d = (1.0 / (2.0 * h)) * (duffing_gamma(t + h) - duffing_gamma(t - h));
            assert!((d - sys.f(Side::Plus, duffing_gamma(t))).norm() < 1e-9);
            assert!(duffing_energy(duffing_gamma(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn builtins_validate() {
        for n in SYSTEM_NAMES {
            system_by_name(n).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn contracting_keeps_loop_invariant() {
        let sys = duffing_contracting(-0.5);
        for k in -10..=10 {
            let p = duffing_gamma(0.5 * k as f64);
            assert!((sys.f(Side::Plus, p) - duffing_f(p)).norm() < 1e-15);
        }
    }
}
