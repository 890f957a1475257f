//! Adaptive Gauss-Kronrod (7, 15) quadrature.

use alloc::vec::Vec;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// (integral, error estimate) on [a, b].
pub fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Globally adaptive bisection until the summed error estimate is below `abs_tol`.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, max_intervals: usize) -> QuadResult {
    let (v, e) = gk15(f, a, b);
    let mut parts: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    loop {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol || parts.len() >= max_intervals {
            let value = parts.iter().map(|p| p.2).sum();
            return QuadResult { value, error: err, intervals: parts.len() };
        }
        let (k, _) = parts.iter().enumerate().fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (a, b, _, _) = parts.swap_remove(k);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            let value = parts.iter().map(|p| p.2).sum::<f64>();
            return QuadResult { value, error: err, intervals: parts.len() };
        }
        let (v1, e1) = gk15(f, a, mid);
        let (v2, e2) = gk15(f, mid, b);
        parts.push((a, mid, v1, e1));
        parts.push((mid, b, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::m;

    #[test]
    fn polynomial_exact() {
        let r = integrate(&mut |x| x * x * x * x, 0.0, 2.0, 1e-14, 100);
        assert!((r.value - 32.0 / 5.0).abs() < 1e-13);
    }

    #[test]
    fn sech_squared() {
        // ∫ sech² = 2 over the real line
        let r = integrate(&mut |x| 1.0 / (m::cosh(x) * m::cosh(x)), -40.0, 40.0, 1e-13, 500);
        assert!((r.value - 2.0).abs() < 1e-12);
    }
}
