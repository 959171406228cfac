use serde::{Deserialize, Serialize};

use crate::error::{FbpError, Result};
use crate::scalar::Real;

/// Uniform partition of `I = (0,1)` into `n_elems` segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalMesh {
    n_elems: usize,
}

impl IntervalMesh {
    pub fn new(n_elems: usize) -> Result<Self> {
        if n_elems < 2 {
            return Err(FbpError::InvalidMesh(format!(
                "interval mesh needs at least 2 elements, got {n_elems}"
            )));
        }
        Ok(Self { n_elems })
    }

    pub fn n_elems(&self) -> usize {
        self.n_elems
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elems + 1
    }

    pub fn h<T: Real>(&self) -> T {
        T::one() / T::of_usize(self.n_elems)
    }

    pub fn node<T: Real>(&self, i: usize) -> T {
        T::of_usize(i) / T::of_usize(self.n_elems)
    }

    pub fn nodes<T: Real>(&self) -> Vec<T> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }
}

/// Uniform `n x n` grid of squares on `(0,1)^2`.
///
/// Node `(i, j)` sits at `(i/n, j/n)` and has global index `j (n+1) + i`.
/// The top edge `x2 = 1` is the free boundary Γ; the two lateral edges and the
/// bottom form Σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareMesh {
    n: usize,
}

impl SquareMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(FbpError::InvalidMesh(format!(
                "square mesh needs at least 2 elements per side, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn h<T: Real>(&self) -> T {
        T::one() / T::of_usize(self.n)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % (self.n + 1), idx / (self.n + 1))
    }

    pub fn coords<T: Real>(&self, idx: usize) -> (T, T) {
        let (i, j) = self.ij(idx);
        let n = T::of_usize(self.n);
        (T::of_usize(i) / n, T::of_usize(j) / n)
    }

    /// Node on the free boundary Γ (top edge, corners included).
    pub fn is_gamma(&self, idx: usize) -> bool {
        self.ij(idx).1 == self.n
    }

    /// Node on Σ (bottom and lateral edges).
    pub fn is_sigma(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        j == 0 || i == 0 || i == self.n
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.is_gamma(idx) || self.is_sigma(idx)
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.n_nodes()).map(|k| self.is_boundary(k)).collect()
    }

    /// The interval mesh that coincides with the trace of this grid on Γ.
    pub fn trace_mesh(&self) -> IntervalMesh {
        IntervalMesh { n_elems: self.n }
    }

    /// Four nodes of element `(ei, ej)` in local order (0,0), (1,0), (0,1), (1,1).
    pub fn element_nodes(&self, ei: usize, ej: usize) -> [usize; 4] {
        [
            self.index(ei, ej),
            self.index(ei + 1, ej),
            self.index(ei, ej + 1),
            self.index(ei + 1, ej + 1),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_meshes() {
        assert!(IntervalMesh::new(1).is_err());
        assert!(SquareMesh::new(0).is_err());
    }

    #[test]
    fn boundary_tags_partition_the_boundary() {
        let m = SquareMesh::new(4).unwrap();
        let mut n_gamma = 0;
        for k in 0..m.n_nodes() {
            let (_, x2) = m.coords::<f64>(k);
            assert_eq!(m.is_gamma(k), x2 == 1.0);
            if m.is_gamma(k) {
                n_gamma += 1;
            }
            let (i, j) = m.ij(k);
            let on_boundary = i == 0 || j == 0 || i == 4 || j == 4;
            assert_eq!(m.is_boundary(k), on_boundary);
        }
        assert_eq!(n_gamma, 5);
    }
}
