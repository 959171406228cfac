use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::assembly::mass_action;
use super::fields::{BoundaryCurve, BulkField, ControlProfile};
use super::mesh::IntervalMesh;
use super::quadrature::BulkQuadrature;
use crate::error::{FbpError, Result};
use crate::scalar::Real;

/// Discrete norms. The Sobolev kinds are gradient seminorms, which are norms
/// on the zero-trace spaces they are used on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    W1Inf0,
    W1p0(f64),
    L2,
    Linf,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::W1Inf0 => write!(f, "W1inf0"),
            NormKind::W1p0(p) => write!(f, "W1p0({p})"),
            NormKind::L2 => write!(f, "L2"),
            NormKind::Linf => write!(f, "Linf"),
        }
    }
}

impl FromStr for NormKind {
    type Err = FbpError;

    /// Accepts `W1inf0`, `W1p0(<p>)`, `L2`, `Linf` (case-insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "w1inf0" => return Ok(NormKind::W1Inf0),
            "l2" => return Ok(NormKind::L2),
            "linf" => return Ok(NormKind::Linf),
            _ => {}
        }
        if let Some(inner) = t.strip_prefix("w1p0(").and_then(|r| r.strip_suffix(')')) {
            if let Ok(p) = inner.trim().parse::<f64>() {
                return Ok(NormKind::W1p0(p));
            }
        }
        Err(FbpError::UnknownNorm(s.to_string()))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(FbpError::InvalidInput(format!("Sobolev exponent must be >= 1, got {p}")))
    }
}

/// A nodal field with a discrete norm.
pub trait NormedField<T: Real> {
    fn norm(&self, kind: NormKind) -> Result<T>;
}

fn nodal_max<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn p1_norm<T: Real>(values: &[T], kind: NormKind) -> Result<T> {
    let n = values.len() - 1;
    let mesh = IntervalMesh::new(n)?;
    let h: T = mesh.h();
    let slopes = (0..n).map(|e| (values[e + 1] - values[e]) / h);
    Ok(match kind {
        NormKind::W1Inf0 => slopes.fold(T::zero(), |m, s| m.max(s.abs())),
        NormKind::W1p0(p) => {
            check_p(p)?;
            let p = T::of(p);
            (slopes.map(|s| s.abs().powf(p)).sum::<T>() * h).powf(T::one() / p)
        }
        NormKind::L2 => l2_inner_1d(mesh, values, values).max(T::zero()).sqrt(),
        NormKind::Linf => nodal_max(values),
    })
}

impl<T: Real> NormedField<T> for BoundaryCurve<T> {
    fn norm(&self, kind: NormKind) -> Result<T> {
        p1_norm(self.values(), kind)
    }
}

impl<T: Real> NormedField<T> for ControlProfile<T> {
    fn norm(&self, kind: NormKind) -> Result<T> {
        p1_norm(self.values(), kind)
    }
}

impl<T: Real> NormedField<T> for BulkField<T> {
    fn norm(&self, kind: NormKind) -> Result<T> {
        bulk_norm(&BulkQuadrature::new(self.mesh()), self.values(), kind)
    }
}

/// Norm of a Q1 nodal vector with a prebuilt quadrature.
pub fn bulk_norm<T: Real>(quad: &BulkQuadrature<T>, values: &[T], kind: NormKind) -> Result<T> {
    Ok(match kind {
        NormKind::W1Inf0 => {
            // |grad y| is convex on each element, so corners suffice.
            let mesh = quad.mesh;
            let n = mesh.n();
            let inv_h = T::of_usize(n);
            let mut m = T::zero();
            for ej in 0..n {
                for ei in 0..n {
                    let [a, b, c, d] = mesh.element_nodes(ei, ej).map(|k| values[k]);
                    for (gx, gy) in [
                        (b - a, c - a),
                        (b - a, d - b),
                        (d - c, c - a),
                        (d - c, d - b),
                    ] {
                        m = m.max((gx * gx + gy * gy).sqrt() * inv_h);
                    }
                }
            }
            m
        }
        NormKind::W1p0(p) => {
            check_p(p)?;
            let pp = T::of(p);
            let s: T = quad
                .points
                .iter()
                .map(|q| {
                    let g = q.gradient(values);
                    q.weight * (g[0] * g[0] + g[1] * g[1]).sqrt().powf(pp)
                })
                .sum();
            s.powf(T::one() / pp)
        }
        NormKind::L2 => quad
            .values(values)
            .iter()
            .zip(&quad.points)
            .map(|(v, q)| q.weight * *v * *v)
            .sum::<T>()
            .sqrt(),
        NormKind::Linf => nodal_max(values),
    })
}

pub fn compute_norm<T: Real, F: NormedField<T> + ?Sized>(kind: NormKind, field: &F) -> Result<T> {
    field.norm(kind)
}

/// `int a b` for two P1 nodal vectors (mass-matrix pairing).
pub fn l2_inner_1d<T: Real>(mesh: IntervalMesh, a: &[T], b: &[T]) -> T {
    mass_action(mesh, b).iter().zip(a).map(|(x, y)| *x * *y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femcore::{assemble_b_omega, BoundaryTag, SquareMesh};
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_bulk_l2_is_one() {
        let m = SquareMesh::new(4).unwrap();
        let f = BulkField::<f64>::from_fn(m, BoundaryTag::Free, |_, _| 1.0);
        assert_abs_diff_eq!(compute_norm(NormKind::L2, &f).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn parabola_w1inf() {
        let c = BoundaryCurve::from_fn(IntervalMesh::new(4).unwrap(), |x: f64| x * (1.0 - x));
        assert_abs_diff_eq!(compute_norm(NormKind::W1Inf0, &c).unwrap(), 0.75, epsilon = 1e-14);
    }

    #[test]
    fn zero_fields_have_zero_norm() {
        let c = BoundaryCurve::<f64>::zeros(5);
        let b = BulkField::<f64>::zeros(SquareMesh::new(3).unwrap(), BoundaryTag::Free);
        for k in [NormKind::W1Inf0, NormKind::W1p0(4.0), NormKind::L2, NormKind::Linf] {
            assert_eq!(compute_norm(k, &c).unwrap(), 0.0);
            assert_eq!(compute_norm(k, &b).unwrap(), 0.0);
        }
    }

    #[test]
    fn w12_matches_stiffness_form() {
        let m = SquareMesh::new(6).unwrap();
        let y = BulkField::<f64>::from_fn(m, BoundaryTag::ZeroOnBoundary, |x, z| {
            (3.0 * x).sin() * z * z + x
        });
        let k = assemble_b_omega(m, &BoundaryCurve::zeros(6)).unwrap();
        let form = k.form(y.values(), y.values()).sqrt();
        assert_abs_diff_eq!(compute_norm(NormKind::W1p0(2.0), &y).unwrap(), form, epsilon = 1e-12);
    }

    #[test]
    fn norm_kinds_parse() {
        assert_eq!("W1p0(4)".parse::<NormKind>().unwrap(), NormKind::W1p0(4.0));
        assert_eq!("linf".parse::<NormKind>().unwrap(), NormKind::Linf);
        assert!(matches!("H2".parse::<NormKind>(), Err(FbpError::UnknownNorm(_))));
        let c = BoundaryCurve::<f64>::zeros(3);
        assert!(compute_norm(NormKind::W1p0(0.5), &c).is_err());
    }
}
