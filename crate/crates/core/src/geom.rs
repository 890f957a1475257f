//! Plane vectors, 2x2 matrices and the few scalar helpers the rest of the crate needs.

use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

#[inline]
pub const fn pt(x1: f64, x2: f64) -> Point2 {
    Point2 { x1, x2 }
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x1: 0.0, x2: 0.0 };

    pub fn dot(self, o: Point2) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2
    }

    /// a ∧ b = a1 b2 - a2 b1
    pub fn wedge(self, o: Point2) -> f64 {
        self.x1 * o.x2 - self.x2 * o.x1
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x1, self.x2)
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    /// Counter-clockwise quarter turn.
    pub fn rot90(self) -> Point2 {
        pt(-self.x2, self.x1)
    }

    pub fn unit(self) -> Point2 {
        let n = self.norm();
        pt(self.x1 / n, self.x2 / n)
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    pub fn from_slice(v: &[f64]) -> Point2 {
        pt(v[0], v[1])
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        pt(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        pt(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x1 += o.x1;
        self.x2 += o.x2;
    }
}

impl SubAssign for Point2 {
    fn sub_assign(&mut self, o: Point2) {
        self.x1 -= o.x1;
        self.x2 -= o.x2;
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        pt(-self.x1, -self.x2)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        pt(self * p.x1, self * p.x2)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        pt(self.x1 * s, self.x2 * s)
    }
}

/// Row-major 2x2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0 };
    pub const ZERO: Mat2 = Mat2 { a11: 0.0, a12: 0.0, a21: 0.0, a22: 0.0 };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Mat2 {
        Mat2 { a11, a12, a21, a22 }
    }

    /// Matrix with the given columns.
    pub fn from_cols(c1: Point2, c2: Point2) -> Mat2 {
        Mat2::new(c1.x1, c2.x1, c1.x2, c2.x2)
    }

    /// u vᵀ
    pub fn outer(u: Point2, v: Point2) -> Mat2 {
        Mat2::new(u.x1 * v.x1, u.x1 * v.x2, u.x2 * v.x1, u.x2 * v.x2)
    }

    pub fn col(&self, j: usize) -> Point2 {
        if j == 0 {
            pt(self.a11, self.a21)
        } else {
            pt(self.a12, self.a22)
        }
    }

    pub fn apply(&self, v: Point2) -> Point2 {
        pt(self.a11 * v.x1 + self.a12 * v.x2, self.a21 * v.x1 + self.a22 * v.x2)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2::new(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d))
    }

    pub fn max_abs(&self) -> f64 {
        self.a11.abs().max(self.a12.abs()).max(self.a21.abs()).max(self.a22.abs())
    }

    /// Spectral norm (largest singular value).
    pub fn norm2(&self) -> f64 {
        let ata = self.transpose().mul(self);
        let t = ata.trace();
        let d = ata.det();
        let disc = (t * t / 4.0 - d).max(0.0);
        libm::sqrt(t / 2.0 + libm::sqrt(disc))
    }

    /// Real eigenvalues in ascending order, `None` if the pair is complex.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let t = self.trace();
        let d = self.det();
        let disc = t * t / 4.0 - d;
        if disc < 0.0 {
            return None;
        }
        let r = libm::sqrt(disc);
        // avoid cancellation for the smaller-magnitude root
        let big = if t >= 0.0 { t / 2.0 + r } else { t / 2.0 - r };
        let small = if big != 0.0 { d / big } else { 0.0 };
        Some(if big < small { (big, small) } else { (small, big) })
    }

    /// Unit eigenvector for a real eigenvalue `lam` (sign arbitrary).
    pub fn eigenvector(&self, lam: f64) -> Point2 {
        // rows of (A - lam I); take the better conditioned one and rotate it
        let r1 = pt(self.a11 - lam, self.a12);
        let r2 = pt(self.a21, self.a22 - lam);
        let r = if r1.norm2() >= r2.norm2() { r1 } else { r2 };
        if r.norm2() == 0.0 {
            return pt(1.0, 0.0);
        }
        pt(-r.x2, r.x1).unit()
    }
}

pub(crate) mod m {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    #[inline]
    pub fn powi(x: f64, n: i32) -> f64 {
        let mut r = 1.0;
        let mut b = if n < 0 { 1.0 / x } else { x };
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                r *= b;
            }
            b *= b;
            e >>= 1;
        }
        r
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline]
    pub fn tanh(x: f64) -> f64 {
        libm::tanh(x)
    }
    #[inline]
    pub fn cosh(x: f64) -> f64 {
        libm::cosh(x)
    }
    #[inline]
    pub fn cbrt(x: f64) -> f64 {
        libm::cbrt(x)
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_duffing_jacobian() {
        let a = Mat2::new(0.0, 1.0, 1.0, 0.0);
        let (l1, l2) = a.real_eigenvalues().unwrap();
        assert!((l1 + 1.0).abs() < 1e-15 && (l2 - 1.0).abs() < 1e-15);
        let v = a.eigenvector(1.0);
        assert!((a.apply(v) - v).norm() < 1e-15);
        assert!((v.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_pair_is_none() {
        assert!(Mat2::new(0.0, -1.0, 1.0, 0.0).real_eigenvalues().is_none());
    }

    #[test]
    fn spectral_norm_of_diag() {
        assert!((Mat2::new(3.0, 0.0, 0.0, -4.0).norm2() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn powi_matches_repeated_product() {
        assert_eq!(m::powi(2.0, 10), 1024.0);
        assert!((m::powi(2.0, -2) - 0.25).abs() < 1e-16);
    }
}
