use serde::{Deserialize, Serialize};

use super::mesh::{IntervalMesh, SquareMesh};
use crate::error::{FbpError, Result};
use crate::scalar::Real;

/// Nodal values of a P1 function on `I` that vanishes at both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve<T> {
    values: Vec<T>,
}

impl<T: Real> BoundaryCurve<T> {
    pub fn zeros(n_elems: usize) -> Self {
        Self {
            values: vec![T::zero(); n_elems + 1],
        }
    }

    /// Rejects nonzero endpoint values.
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.len() < 3 {
            return Err(FbpError::InvalidMesh(format!(
                "curve needs at least 3 nodes, got {}",
                values.len()
            )));
        }
        let last = values[values.len() - 1];
        if values[0] != T::zero() || last != T::zero() {
            return Err(FbpError::InvalidInput(format!(
                "boundary curve must vanish at the endpoints, got {} and {}",
                values[0], last
            )));
        }
        Ok(Self { values })
    }

    /// Interpolates `f` at the interior nodes; endpoint values are set to 0.
    pub fn from_fn(mesh: IntervalMesh, f: impl Fn(T) -> T) -> Self {
        let n = mesh.n_elems();
        let mut values: Vec<T> = (0..=n).map(|i| f(mesh.node(i))).collect();
        values[0] = T::zero();
        values[n] = T::zero();
        Self { values }
    }

    /// Drops whatever sits at the endpoints.
    pub fn from_interior(mut values: Vec<T>) -> Self {
        let n = values.len() - 1;
        values[0] = T::zero();
        values[n] = T::zero();
        Self { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn n_elems(&self) -> usize {
        self.values.len() - 1
    }

    pub fn mesh(&self) -> IntervalMesh {
        IntervalMesh::new(self.n_elems()).expect("curve built on a valid mesh")
    }

    /// Piecewise linear evaluation, `x1` clamped to `[0,1]`.
    pub fn eval(&self, x1: T) -> T {
        eval_p1(&self.values, x1)
    }

    /// Slope on element `e`.
    pub fn slope(&self, e: usize) -> T {
        (self.values[e + 1] - self.values[e]) * T::of_usize(self.n_elems())
    }

    pub fn slopes(&self) -> Vec<T> {
        (0..self.n_elems()).map(|e| self.slope(e)).collect()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn axpy(&self, a: T, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| *x + a * *y)
                .collect(),
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            values: self.values.iter().map(|x| *x * a).collect(),
        }
    }

    pub fn is_even(&self, tol: T) -> bool {
        let n = self.n_elems();
        (0..=n).all(|i| (self.values[i] - self.values[n - i]).abs() <= tol)
    }
}

/// Nodal values of a control `u` on `I` (no boundary condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProfile<T> {
    values: Vec<T>,
}

impl<T: Real> ControlProfile<T> {
    pub fn zeros(n_elems: usize) -> Self {
        Self {
            values: vec![T::zero(); n_elems + 1],
        }
    }

    pub fn constant(n_elems: usize, c: T) -> Self {
        Self {
            values: vec![c; n_elems + 1],
        }
    }

    pub fn from_values(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn from_fn(mesh: IntervalMesh, f: impl Fn(T) -> T) -> Self {
        Self {
            values: (0..mesh.n_nodes()).map(|i| f(mesh.node(i))).collect(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn n_elems(&self) -> usize {
        self.values.len() - 1
    }

    pub fn eval(&self, x1: T) -> T {
        eval_p1(&self.values, x1)
    }

    pub fn axpy(&self, a: T, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| *x + a * *y)
                .collect(),
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            values: self.values.iter().map(|x| *x * a).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }
}

fn eval_p1<T: Real>(values: &[T], x1: T) -> T {
    let n = values.len() - 1;
    let x = x1.max(T::zero()).min(T::one()) * T::of_usize(n);
    let e = x.floor().to_usize().unwrap_or(0).min(n - 1);
    let t = x - T::of_usize(e);
    values[e] * (T::one() - t) + values[e + 1] * t
}

/// Which boundary nodes of a [`BulkField`] are pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Zero on all of ∂Ω (state `y`, tangent `y`).
    ZeroOnBoundary,
    /// Zero on Σ only (adjoint `r`, extensions).
    ZeroOnSigma,
    /// No constraint (Dirichlet lift `v`).
    Free,
}

/// Nodal values of a Q1 field on the square mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkField<T> {
    n: usize,
    values: Vec<T>,
    tag: BoundaryTag,
}

impl<T: Real> BulkField<T> {
    pub fn zeros(mesh: SquareMesh, tag: BoundaryTag) -> Self {
        Self {
            n: mesh.n(),
            values: vec![T::zero(); mesh.n_nodes()],
            tag,
        }
    }

    /// Pins the tagged boundary nodes to zero.
    pub fn from_values(mesh: SquareMesh, mut values: Vec<T>, tag: BoundaryTag) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(FbpError::InvalidMesh(format!(
                "bulk field has {} values, mesh has {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        apply_tag(mesh, &mut values, tag);
        Ok(Self {
            n: mesh.n(),
            values,
            tag,
        })
    }

    pub fn from_fn(mesh: SquareMesh, tag: BoundaryTag, f: impl Fn(T, T) -> T) -> Self {
        let mut values: Vec<T> = (0..mesh.n_nodes())
            .map(|k| {
                let (x1, x2) = mesh.coords(k);
                f(x1, x2)
            })
            .collect();
        apply_tag(mesh, &mut values, tag);
        Self {
            n: mesh.n(),
            values,
            tag,
        }
    }

    pub fn mesh(&self) -> SquareMesh {
        SquareMesh::new(self.n).expect("field built on a valid mesh")
    }

    pub fn tag(&self) -> BoundaryTag {
        self.tag
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * (self.n + 1) + i]
    }

    /// Nodal values along Γ as a vector indexed like the trace mesh.
    pub fn trace_gamma(&self) -> Vec<T> {
        (0..=self.n).map(|i| self.get(i, self.n)).collect()
    }

    pub fn axpy(&self, a: T, other: &Self) -> Self {
        Self {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| *x + a * *y)
                .collect(),
            tag: self.tag,
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|x| *x * a).collect(),
            tag: self.tag,
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// True when the field is symmetric under `x1 -> 1 - x1`.
    pub fn is_even_in_x1(&self, tol: T) -> bool {
        let n = self.n;
        (0..=n).all(|j| (0..=n).all(|i| (self.get(i, j) - self.get(n - i, j)).abs() <= tol))
    }
}

fn apply_tag<T: Real>(mesh: SquareMesh, values: &mut [T], tag: BoundaryTag) {
    for (k, v) in values.iter_mut().enumerate() {
        let pinned = match tag {
            BoundaryTag::ZeroOnBoundary => mesh.is_boundary(k),
            BoundaryTag::ZeroOnSigma => mesh.is_sigma(k),
            BoundaryTag::Free => false,
        };
        if pinned {
            *v = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_endpoints_are_enforced() {
        assert!(BoundaryCurve::from_values(vec![0.1, 0.2, 0.0]).is_err());
        let m = IntervalMesh::new(4).unwrap();
        let c = BoundaryCurve::<f64>::from_fn(m, |_| 1.0);
        assert_eq!(c.values()[0], 0.0);
        assert_eq!(c.values()[4], 0.0);
        assert_eq!(c.values()[2], 1.0);
    }

    #[test]
    fn curve_evaluation_is_piecewise_linear() {
        let c = BoundaryCurve::from_values(vec![0.0f64, 0.5, 0.0]).unwrap();
        assert!((c.eval(0.25) - 0.25).abs() < 1e-15);
        assert!((c.eval(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(c.eval(1.0), 0.0);
        assert_eq!(c.slopes(), vec![1.0, -1.0]);
    }

    #[test]
    fn bulk_tags_pin_nodes() {
        let m = SquareMesh::new(3).unwrap();
        let f = BulkField::<f64>::from_fn(m, BoundaryTag::ZeroOnSigma, |_, _| 1.0);
        for k in 0..m.n_nodes() {
            let expect = if m.is_sigma(k) { 0.0 } else { 1.0 };
            assert_eq!(f.values()[k], expect);
        }
        let g = BulkField::<f64>::from_fn(m, BoundaryTag::ZeroOnBoundary, |_, _| 1.0);
        assert!(g.trace_gamma().iter().all(|v| *v == 0.0));
    }
}
