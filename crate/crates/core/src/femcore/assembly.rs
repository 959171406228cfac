use super::fields::{BoundaryCurve, BoundaryTag, BulkField};
use super::mesh::{IntervalMesh, SquareMesh};
use super::quadrature::{BulkQuadrature, IntervalQuadrature};
use super::sparse::CsrMatrix;
use crate::coeffs::{eval_a, CoeffPoint, Matrix2};
use crate::error::{FbpError, Result};
use crate::scalar::Real;

/// `kappa * int gamma' zeta'` on the full P1 space (endpoint rows included;
/// the solver eliminates them).
pub fn assemble_b_gamma<T: Real>(mesh: IntervalMesh, kappa: T) -> CsrMatrix<T> {
    let n = mesh.n_elems();
    let k = kappa / mesh.h::<T>();
    let mut t = Vec::with_capacity(4 * n);
    for e in 0..n {
        t.push((e, e, k));
        t.push((e + 1, e + 1, k));
        t.push((e, e + 1, -k));
        t.push((e + 1, e, -k));
    }
    CsrMatrix::from_triplets(n + 1, t)
}

/// Consistent P1 mass matrix.
pub fn mass_matrix_1d<T: Real>(mesh: IntervalMesh) -> CsrMatrix<T> {
    let n = mesh.n_elems();
    let h: T = mesh.h();
    let d = h / T::of(3.0);
    let o = h / T::of(6.0);
    let mut t = Vec::with_capacity(4 * n);
    for e in 0..n {
        t.push((e, e, d));
        t.push((e + 1, e + 1, d));
        t.push((e, e + 1, o));
        t.push((e + 1, e, o));
    }
    CsrMatrix::from_triplets(n + 1, t)
}

pub fn mass_action<T: Real>(mesh: IntervalMesh, u: &[T]) -> Vec<T> {
    let n = mesh.n_elems();
    let h: T = mesh.h();
    let d = h / T::of(3.0);
    let o = h / T::of(6.0);
    let mut out = vec![T::zero(); n + 1];
    for e in 0..n {
        out[e] += d * u[e] + o * u[e + 1];
        out[e + 1] += o * u[e] + d * u[e + 1];
    }
    out
}

/// `(int f0 phi_j + f1 phi_j')_j` from values at the interval Gauss points.
pub fn line_load<T: Real>(quad: &IntervalQuadrature<T>, f0: &[T], f1: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); quad.mesh.n_nodes()];
    for (k, q) in quad.points.iter().enumerate() {
        for l in 0..2 {
            out[q.nodes[l]] += q.weight * (f0[k] * q.shape[l] + f1[k] * q.dshape[l]);
        }
    }
    out
}

fn check_conforming<T: Real>(curve: &BoundaryCurve<T>, mesh: SquareMesh) -> Result<()> {
    if curve.n_elems() != mesh.n() {
        return Err(FbpError::InvalidMesh(format!(
            "curve has {} elements but the square has {} per side",
            curve.n_elems(),
            mesh.n()
        )));
    }
    Ok(())
}

/// `(gamma, gamma', x2)` at every bulk Gauss point.
pub fn bulk_coeff_points<T: Real>(
    curve: &BoundaryCurve<T>,
    quad: &BulkQuadrature<T>,
) -> Result<Vec<CoeffPoint<T>>> {
    check_conforming(curve, quad.mesh)?;
    let line = IntervalQuadrature::new(quad.mesh.trace_mesh()).interpolate(curve.values());
    Ok(quad
        .points
        .iter()
        .map(|q| {
            let (g, dg) = line[q.line_point];
            CoeffPoint::new(g, dg, q.x2)
        })
        .collect())
}

/// Evaluates a coefficient rule at every bulk Gauss point, tagging geometry
/// failures with the abscissa.
pub fn eval_on_points<T: Real>(
    quad: &BulkQuadrature<T>,
    pts: &[CoeffPoint<T>],
    f: impl Fn(usize, &CoeffPoint<T>) -> Result<Matrix2<T>>,
) -> Result<Vec<Matrix2<T>>> {
    pts.iter()
        .enumerate()
        .map(|(k, p)| {
            f(k, p).map_err(|e| match e {
                FbpError::DegenerateGeometry { one_plus_gamma, .. } => {
                    FbpError::DegenerateGeometry {
                        one_plus_gamma,
                        x1: quad.points[k].x1.as_f64(),
                    }
                }
                other => other,
            })
        })
        .collect()
}

/// `A[gamma]` at every bulk Gauss point.
pub fn a_on_points<T: Real>(
    curve: &BoundaryCurve<T>,
    quad: &BulkQuadrature<T>,
) -> Result<Vec<Matrix2<T>>> {
    let pts = bulk_coeff_points(curve, quad)?;
    eval_on_points(quad, &pts, |_, p| eval_a(p))
}

/// `int C grad y . grad z` with a coefficient given per Gauss point.
pub fn assemble_bulk_with<T: Real>(quad: &BulkQuadrature<T>, coeffs: &[Matrix2<T>]) -> CsrMatrix<T> {
    let mut t = Vec::with_capacity(16 * quad.len() / 4);
    let n_el = quad.len() / 4;
    for el in 0..n_el {
        let mut k_el = [[T::zero(); 4]; 4];
        for k in 4 * el..4 * el + 4 {
            let (q, c) = (&quad.points[k], &coeffs[k]);
            for a in 0..4 {
                let cg = c.apply(q.grad[a]);
                for b in 0..4 {
                    k_el[b][a] += q.weight * (cg[0] * q.grad[b][0] + cg[1] * q.grad[b][1]);
                }
            }
        }
        let nodes = quad.points[4 * el].nodes;
        for a in 0..4 {
            for b in 0..4 {
                t.push((nodes[b], nodes[a], k_el[b][a]));
            }
        }
    }
    CsrMatrix::from_triplets(quad.mesh.n_nodes(), t)
}

/// `int A[gamma] grad y . grad z` on the full Q1 space.
pub fn assemble_b_omega<T: Real>(mesh: SquareMesh, curve: &BoundaryCurve<T>) -> Result<CsrMatrix<T>> {
    let quad = BulkQuadrature::new(mesh);
    let a = a_on_points(curve, &quad)?;
    Ok(assemble_bulk_with(&quad, &a))
}

/// `(int C grad y . grad phi_k)_k` without forming the matrix.
pub fn bulk_action<T: Real>(quad: &BulkQuadrature<T>, coeffs: &[Matrix2<T>], y: &[T]) -> Vec<T> {
    let flux: Vec<[T; 2]> = quad
        .points
        .iter()
        .zip(coeffs)
        .map(|(q, c)| c.apply(q.gradient(y)))
        .collect();
    bulk_flux_load(quad, &flux)
}

/// `(int g . grad phi_k)_k` from a vector field at the Gauss points.
pub fn bulk_flux_load<T: Real>(quad: &BulkQuadrature<T>, g: &[[T; 2]]) -> Vec<T> {
    let mut out = vec![T::zero(); quad.mesh.n_nodes()];
    for (q, g) in quad.points.iter().zip(g) {
        for a in 0..4 {
            out[q.nodes[a]] += q.weight * (g[0] * q.grad[a][0] + g[1] * q.grad[a][1]);
        }
    }
    out
}

/// `(int f phi_k)_k` from values at the Gauss points.
pub fn bulk_load<T: Real>(quad: &BulkQuadrature<T>, f: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); quad.mesh.n_nodes()];
    for (q, f) in quad.points.iter().zip(f) {
        for a in 0..4 {
            out[q.nodes[a]] += q.weight * *f * q.shape[a];
        }
    }
    out
}

/// `E zeta (x1, x2) = zeta(x1) x2`, nodally.
pub fn extend<T: Real>(zeta: &BoundaryCurve<T>) -> BulkField<T> {
    let n = zeta.n_elems();
    let mesh = SquareMesh::new(n).expect("curve mesh has at least 2 elements");
    let z = zeta.values();
    let vals = (0..mesh.n_nodes())
        .map(|k| {
            let (i, j) = mesh.ij(k);
            z[i] * T::of_usize(j) / T::of_usize(n)
        })
        .collect();
    BulkField::from_values(mesh, vals, BoundaryTag::ZeroOnSigma).expect("sizes match")
}

/// Transpose of [`extend`] on nodal vectors: `(E^T r)_i = sum_j (j/n) r_(i,j)`.
pub fn extension_transpose<T: Real>(mesh: SquareMesh, r: &[T]) -> Vec<T> {
    let n = mesh.n();
    let mut out = vec![T::zero(); n + 1];
    for j in 1..=n {
        let x2 = T::of_usize(j) / T::of_usize(n);
        for (i, o) in out.iter_mut().enumerate() {
            *o += x2 * r[mesh.index(i, j)];
        }
    }
    out[0] = T::zero();
    out[n] = T::zero();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn b_gamma_on_two_elements() {
        let m = IntervalMesh::new(2).unwrap();
        let k = assemble_b_gamma::<f64>(m, 1.0);
        assert_abs_diff_eq!(k.get(1, 1), 4.0, epsilon = 1e-14);
        let k2 = assemble_b_gamma::<f64>(m, 2.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k2.get(i, j), 2.0 * k.get(i, j), epsilon = 1e-14);
            }
        }
        let hat = [0.0, 1.0, 0.0];
        assert_abs_diff_eq!(k.form(&hat, &hat), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn flat_b_omega_is_q1_laplacian() {
        let m = SquareMesh::new(4).unwrap();
        let k = assemble_b_omega(m, &BoundaryCurve::<f64>::zeros(4)).unwrap();
        let c = m.index(2, 2);
        assert_abs_diff_eq!(k.get(c, c), 8.0 / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(k.get(c, m.index(3, 2)), -1.0 / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(k.get(c, m.index(3, 3)), -1.0 / 3.0, epsilon = 1e-13);
        let quad = BulkQuadrature::new(m);
        let id = vec![Matrix2::identity(); quad.len()];
        let k_id = assemble_bulk_with(&quad, &id);
        assert_eq!(k, k_id);
    }

    #[test]
    fn b_omega_is_symmetric() {
        let m = SquareMesh::new(6).unwrap();
        let g = BoundaryCurve::from_fn(m.trace_mesh(), |x: f64| 0.3 * (3.0 * x).sin() * x * (1.0 - x));
        let k = assemble_b_omega(m, &g).unwrap();
        assert!(k.max_asymmetry() < 1e-15);
    }

    #[test]
    fn action_matches_matrix() {
        let m = SquareMesh::new(5).unwrap();
        let g = BoundaryCurve::from_fn(m.trace_mesh(), |x: f64| 0.2 * x * (1.0 - x));
        let quad = BulkQuadrature::new(m);
        let a = a_on_points(&g, &quad).unwrap();
        let k = assemble_bulk_with(&quad, &a);
        let y: Vec<f64> = (0..m.n_nodes()).map(|i| (i as f64 * 0.7).cos()).collect();
        let ky = k.matvec(&y);
        let act = bulk_action(&quad, &a, &y);
        for (p, q) in ky.iter().zip(&act) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-13);
        }
    }

    #[test]
    fn extension_of_hat() {
        let z = BoundaryCurve::from_values(vec![0.0, 1.0, 0.0]).unwrap();
        let e = extend(&z);
        assert_abs_diff_eq!(e.get(1, 1), 0.5, epsilon = 1e-15);
        assert_eq!(e.trace_gamma(), z.values().to_vec());
        let m = e.mesh();
        for k in 0..m.n_nodes() {
            if m.is_sigma(k) {
                assert_eq!(e.values()[k], 0.0);
            }
        }
    }

    #[test]
    fn extension_transpose_is_adjoint() {
        let m = SquareMesh::new(4).unwrap();
        let z = BoundaryCurve::from_values(vec![0.0, 0.3, -1.0, 2.0, 0.0]).unwrap();
        let r: Vec<f64> = (0..m.n_nodes()).map(|i| (i as f64).sin()).collect();
        let lhs: f64 = extend(&z).values().iter().zip(&r).map(|(a, b)| a * b).sum();
        let et = extension_transpose(m, &r);
        let rhs: f64 = z.values().iter().zip(&et).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13);
    }

    #[test]
    fn mass_action_matches_matrix() {
        let m = IntervalMesh::new(5).unwrap();
        let u: Vec<f64> = (0..6).map(|i| i as f64 * 0.5 - 1.0).collect();
        let mm = mass_matrix_1d::<f64>(m);
        assert_eq!(mm.matvec(&u).len(), 6);
        for (a, b) in mm.matvec(&u).iter().zip(mass_action(m, &u)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let ones = vec![1.0; 6];
        assert_abs_diff_eq!(mm.form(&ones, &ones), 1.0, epsilon = 1e-14);
    }
}
