//! Pointwise coefficient matrix `A[gamma]` of the pulled-back Laplacian and
//! its first and second directional derivatives.
//!
//! Every routine here works on a single point: the caller supplies the curve
//! value `gamma(x1)`, its slope, and the vertical coordinate `x2` of the
//! reference square. The 22-entry is written through
//! `phi(a, b) = (1 + b^2) / (1 + a)` with `a = gamma`, `b = x2 * gamma'`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{FbpError, Result};
use crate::femcore::BoundaryCurve;
use crate::scalar::Real;

/// Arguments of the coefficient at one point of the reference square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffPoint<T> {
    pub gamma_val: T,
    pub dgamma_val: T,
    pub x2: T,
}

impl<T: Real> CoeffPoint<T> {
    pub fn new(gamma_val: T, dgamma_val: T, x2: T) -> Self {
        Self {
            gamma_val,
            dgamma_val,
            x2,
        }
    }

    /// `b = x2 * gamma'`.
    #[inline]
    pub fn b(&self) -> T {
        self.x2 * self.dgamma_val
    }

    fn one_plus_gamma(&self) -> Result<T> {
        let s = T::one() + self.gamma_val;
        if s > T::zero() {
            Ok(s)
        } else {
            Err(FbpError::DegenerateGeometry {
                one_plus_gamma: s.as_f64(),
                x1: f64::NAN,
            })
        }
    }

    /// The same point displaced along a direction: `(gamma + h, gamma' + h')`.
    pub fn shifted(&self, dir: Direction1D<T>) -> Self {
        Self {
            gamma_val: self.gamma_val + dir.h_val,
            dgamma_val: self.dgamma_val + dir.dh_val,
            x2: self.x2,
        }
    }
}

/// A perturbation of the curve evaluated at one abscissa: value and slope.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Direction1D<T> {
    pub h_val: T,
    pub dh_val: T,
}

impl<T: Real> Direction1D<T> {
    pub fn new(h_val: T, dh_val: T) -> Self {
        Self { h_val, dh_val }
    }

    pub fn zero() -> Self {
        Self {
            h_val: T::zero(),
            dh_val: T::zero(),
        }
    }

    pub fn scaled(self, s: T) -> Self {
        Self {
            h_val: self.h_val * s,
            dh_val: self.dh_val * s,
        }
    }
}

/// Dense 2x2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Matrix2<T> {
    pub a11: T,
    pub a12: T,
    pub a21: T,
    pub a22: T,
}

impl<T: Real> Matrix2<T> {
    pub fn new(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn symmetric(a11: T, a12: T, a22: T) -> Self {
        Self::new(a11, a12, a12, a22)
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn det(&self) -> T {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> T {
        self.a11 + self.a22
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    /// Largest entry in absolute value.
    pub fn max_abs(&self) -> T {
        self.a11
            .abs()
            .max(self.a12.abs())
            .max(self.a21.abs())
            .max(self.a22.abs())
    }

    /// Operator 2-norm; closed form for symmetric matrices, falls back to the
    /// largest singular value otherwise.
    pub fn spectral_norm(&self) -> T {
        let two = T::of(2.0);
        if self.a12 == self.a21 {
            let mean = self.trace() / two;
            let rad = (((self.a11 - self.a22) / two).powi(2) + self.a12 * self.a12).sqrt();
            (mean.abs() + rad).max((mean - rad).abs())
        } else {
            // sqrt of the largest eigenvalue of M^T M
            let p = self.a11 * self.a11 + self.a21 * self.a21;
            let q = self.a12 * self.a12 + self.a22 * self.a22;
            let r = self.a11 * self.a12 + self.a21 * self.a22;
            let mean = (p + q) / two;
            let rad = (((p - q) / two).powi(2) + r * r).sqrt();
            (mean + rad).sqrt()
        }
    }

    /// `M g`.
    #[inline]
    pub fn apply(&self, g: [T; 2]) -> [T; 2] {
        [
            self.a11 * g[0] + self.a12 * g[1],
            self.a21 * g[0] + self.a22 * g[1],
        ]
    }

    /// `M g . w`.
    #[inline]
    pub fn form(&self, g: [T; 2], w: [T; 2]) -> T {
        let mg = self.apply(g);
        mg[0] * w[0] + mg[1] * w[1]
    }

    pub fn is_symmetric(&self) -> bool {
        self.a12 == self.a21
    }
}

impl<T: Real> Add for Matrix2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }
}

impl<T: Real> Sub for Matrix2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }
}

impl<T: Real> Neg for Matrix2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul<T> for Matrix2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// `phi(gamma, x2 gamma')`.
pub fn eval_phi<T: Real>(p: &CoeffPoint<T>) -> Result<T> {
    let s = p.one_plus_gamma()?;
    let b = p.b();
    Ok((T::one() + b * b) / s)
}

/// `(d_a phi, d_b phi)` at `(gamma, x2 gamma')`.
pub fn eval_grad_phi<T: Real>(p: &CoeffPoint<T>) -> Result<(T, T)> {
    let s = p.one_plus_gamma()?;
    let b = p.b();
    let two = T::of(2.0);
    Ok((-(T::one() + b * b) / (s * s), two * b / s))
}

/// Hessian of `phi` at `(gamma, x2 gamma')`.
pub fn eval_hess_phi<T: Real>(p: &CoeffPoint<T>) -> Result<Matrix2<T>> {
    let s = p.one_plus_gamma()?;
    let b = p.b();
    let two = T::of(2.0);
    let aa = two * (T::one() + b * b) / (s * s * s);
    let ab = -two * b / (s * s);
    let bb = two / s;
    Ok(Matrix2::symmetric(aa, ab, bb))
}

/// `A[gamma] = [[1 + gamma, -gamma' x2], [-gamma' x2, phi]]`.
pub fn eval_a<T: Real>(p: &CoeffPoint<T>) -> Result<Matrix2<T>> {
    let phi = eval_phi(p)?;
    let off = -p.b();
    Ok(Matrix2::symmetric(T::one() + p.gamma_val, off, phi))
}

/// The two pieces of the derivative: `DA[gamma]<h> = A1 h + A2 h'`.
pub fn eval_da_parts<T: Real>(p: &CoeffPoint<T>) -> Result<(Matrix2<T>, Matrix2<T>)> {
    let (phi_a, phi_b) = eval_grad_phi(p)?;
    let a1 = Matrix2::symmetric(T::one(), T::zero(), phi_a);
    let a2 = Matrix2::symmetric(T::zero(), -p.x2, p.x2 * phi_b);
    Ok((a1, a2))
}

pub fn eval_da<T: Real>(p: &CoeffPoint<T>, h: Direction1D<T>) -> Result<Matrix2<T>> {
    let (a1, a2) = eval_da_parts(p)?;
    Ok(a1 * h.h_val + a2 * h.dh_val)
}

/// Second derivative; only the 22-entry is nonzero.
pub fn eval_d2a<T: Real>(
    p: &CoeffPoint<T>,
    h1: Direction1D<T>,
    h2: Direction1D<T>,
) -> Result<Matrix2<T>> {
    let hess = eval_hess_phi(p)?;
    let x2 = p.x2;
    let d2 = hess.a11 * h2.h_val * h1.h_val
        + hess.a12 * x2 * (h2.h_val * h1.dh_val + h2.dh_val * h1.h_val)
        + hess.a22 * x2 * x2 * h2.dh_val * h1.dh_val;
    Ok(Matrix2::symmetric(T::zero(), T::zero(), d2))
}

/// `A[gamma + h] - A[gamma] - DA[gamma]<h>`.
pub fn eval_remainder_a<T: Real>(p: &CoeffPoint<T>, h: Direction1D<T>) -> Result<Matrix2<T>> {
    let base = eval_a(p)?;
    let moved = eval_a(&p.shifted(h))?;
    let lin = eval_da(p, h)?;
    Ok(moved - base - lin)
}

/// The reference-to-physical map `(x1, x2) -> (x1, (1 + gamma(x1)) x2)`.
pub fn map_psi<T: Real>(curve: &BoundaryCurve<T>, point: (T, T)) -> (T, T) {
    let (x1, x2) = point;
    (x1, (T::one() + curve.eval(x1)) * x2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(g: f64, dg: f64, x2: f64) -> CoeffPoint<f64> {
        CoeffPoint::new(g, dg, x2)
    }

    #[test]
    fn phi_values() {
        assert_eq!(eval_phi(&pt(0.0, 0.0, 0.5)).unwrap(), 1.0);
        assert_abs_diff_eq!(eval_phi(&pt(0.2, 0.0, 0.3)).unwrap(), 1.0 / 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_phi(&pt(0.0, 1.0, 1.0)).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_geometry_is_an_error() {
        assert!(matches!(
            eval_phi(&pt(-1.0, 0.0, 0.5)),
            Err(FbpError::DegenerateGeometry { .. })
        ));
        assert!(eval_a(&pt(-1.5, 0.0, 0.5)).is_err());
        assert!(eval_d2a(&pt(-1.0, 0.0, 0.5), Direction1D::zero(), Direction1D::zero()).is_err());
    }

    #[test]
    fn grad_phi_values() {
        assert_eq!(eval_grad_phi(&pt(0.0, 0.0, 0.7)).unwrap(), (-1.0, 0.0));
        let (da, db) = eval_grad_phi(&pt(0.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(da, -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(db, 2.0, epsilon = 1e-15);
        assert_eq!(eval_grad_phi(&pt(0.3, 0.8, 0.0)).unwrap().1, 0.0);
    }

    #[test]
    fn hess_phi_values() {
        let h = eval_hess_phi(&pt(0.0, 0.0, 0.3)).unwrap();
        assert_eq!(h, Matrix2::symmetric(2.0, 0.0, 2.0));
        let h = eval_hess_phi(&pt(1.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(h.a11, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h.a12, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h.a22, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn a_values() {
        assert_eq!(eval_a(&pt(0.0, 0.0, 0.4)).unwrap(), Matrix2::identity());
        let a = eval_a(&pt(0.2, 0.0, 0.9)).unwrap();
        assert_abs_diff_eq!(a.a11, 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(a.a22, 0.833_333_333_333_333_4, epsilon = 1e-15);
        assert_eq!(a.a12, 0.0);
        let a = eval_a(&pt(0.0, 1.0, 1.0)).unwrap();
        assert_eq!(a, Matrix2::symmetric(1.0, -1.0, 2.0));
    }

    #[test]
    fn da_values() {
        let d = eval_da(&pt(0.0, 0.0, 0.3), Direction1D::new(1.0, 0.0)).unwrap();
        assert_eq!(d, Matrix2::symmetric(1.0, 0.0, -1.0));
        let d = eval_da(&pt(0.0, 0.0, 0.5), Direction1D::new(0.0, 1.0)).unwrap();
        assert_eq!(d, Matrix2::symmetric(0.0, -0.5, 0.0));
        let d = eval_da(&pt(0.1, 0.4, 0.5), Direction1D::zero()).unwrap();
        assert_eq!(d, Matrix2::zero());
    }

    #[test]
    fn d2a_values() {
        let e = Direction1D::new(1.0, 0.0);
        let d = eval_d2a(&pt(0.0, 0.0, 0.5), e, e).unwrap();
        assert_eq!(d, Matrix2::symmetric(0.0, 0.0, 2.0));
        let s = Direction1D::new(0.0, 1.0);
        let d = eval_d2a(&pt(0.0, 0.0, 1.0), s, s).unwrap();
        assert_eq!(d, Matrix2::symmetric(0.0, 0.0, 2.0));
        let d = eval_d2a(&pt(0.2, -0.3, 0.6), Direction1D::zero(), s).unwrap();
        assert_eq!(d, Matrix2::zero());
    }

    #[test]
    fn remainder_values() {
        let p = pt(0.0, 0.0, 0.5);
        assert_eq!(eval_remainder_a(&p, Direction1D::zero()).unwrap(), Matrix2::zero());
        for eps in [0.1, 0.01, 1e-3] {
            let r = eval_remainder_a(&p, Direction1D::new(eps, 0.0)).unwrap();
            assert_abs_diff_eq!(r.a11, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(r.a12, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(r.a22, eps * eps / (1.0 + eps), epsilon = 1e-15);
        }
        // ratio |R| / eps decreases on a halving ladder
        let q = pt(0.1, 0.4, 0.8);
        let dir = Direction1D::new(0.3, -0.7);
        let mut prev = f64::INFINITY;
        let mut eps = 0.1;
        for _ in 0..8 {
            let r = eval_remainder_a(&q, dir.scaled(eps)).unwrap().max_abs() / eps;
            assert!(r < prev);
            prev = r;
            eps *= 0.5;
        }
    }

    #[test]
    fn psi_map() {
        let flat = BoundaryCurve::<f64>::zeros(4);
        assert_eq!(map_psi(&flat, (0.5, 0.5)), (0.5, 0.5));
        let bent = BoundaryCurve::from_values(vec![0.0, 0.25, 0.0]).unwrap();
        let (x1, x2) = map_psi(&bent, (0.5, 0.5));
        assert_eq!(x1, 0.5);
        assert_abs_diff_eq!(x2, 0.625, epsilon = 1e-15);
        assert_eq!(map_psi(&bent, (0.3, 0.0)), (0.3, 0.0));
    }

    #[test]
    fn spectral_norm_matches_eigenvalues() {
        let m = Matrix2::symmetric(0.5, -1.0, 4.0);
        let mean = 2.25f64;
        let rad = (1.75f64 * 1.75 + 1.0).sqrt();
        assert_abs_diff_eq!(m.spectral_norm(), mean + rad, epsilon = 1e-14);
        let n = Matrix2::new(1.0, 2.0, 0.0, 1.0);
        // singular values of [[1,2],[0,1]] are 1 +- sqrt(2)
        assert_abs_diff_eq!(n.spectral_norm(), 1.0 + 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn single_precision_evaluates() {
        let a = eval_a(&CoeffPoint::new(0.2f32, 0.5, 0.5)).unwrap();
        assert!((a.det() - 1.0).abs() < 1e-6);
    }
}
