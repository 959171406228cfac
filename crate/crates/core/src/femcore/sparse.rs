use crate::error::{FbpError, Result};
use crate::scalar::Real;

/// Compressed sparse row matrix, square.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Duplicate entries are summed in the order they appear.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, T::one())).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `x^T A y`.
    pub fn form(&self, x: &[T], y: &[T]) -> T {
        self.matvec(y).iter().zip(x).map(|(a, b)| *a * *b).sum()
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            vals: self.vals.iter().map(|v| *v * a).collect(),
            ..self.clone()
        }
    }

    pub fn max_asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky<T> {
    n: usize,
    bw: usize,
    // Row i holds L[i][i-bw..=i], left-padded with zeros.
    band: Vec<T>,
}

impl<T: Real> BandedCholesky<T> {
    /// Reads the lower triangle of `matrix`.
    pub fn factor(matrix: &CsrMatrix<T>) -> Result<Self> {
        let n = matrix.n();
        let bw = matrix.bandwidth();
        let w = bw + 1;
        let mut band = vec![T::zero(); n * w];
        for i in 0..n {
            for (j, v) in matrix.row(i) {
                if j <= i {
                    band[i * w + (j + bw - i)] = v;
                }
            }
        }
        let scale = (0..n)
            .map(|i| band[i * w + bw].abs())
            .fold(T::zero(), T::max);
        let tiny = scale * T::epsilon() * T::of(16.0);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = band[i * w + (j + bw - i)];
                for k in k0..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(s > tiny) {
                        return Err(FbpError::SingularSystem {
                            index: i,
                            pivot: s.as_f64(),
                        });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[i * w + (k + bw - i)] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.band[k * w + (i + bw - k)] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
        x
    }
}

/// Factorization of a symmetric matrix with a set of prescribed nodes
/// eliminated symmetrically.
#[derive(Debug, Clone)]
pub struct ConstrainedSolver<T> {
    full: CsrMatrix<T>,
    reduced: CsrMatrix<T>,
    constrained: Vec<bool>,
    free: Vec<usize>,
    chol: BandedCholesky<T>,
}

impl<T: Real> ConstrainedSolver<T> {
    pub fn new(matrix: CsrMatrix<T>, constrained: Vec<bool>) -> Result<Self> {
        let n = matrix.n();
        if constrained.len() != n {
            return Err(FbpError::InvalidInput(format!(
                "constraint mask has {} entries for a {n}x{n} matrix",
                constrained.len()
            )));
        }
        let free: Vec<usize> = (0..n).filter(|&i| !constrained[i]).collect();
        let mut map = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            map[i] = k;
        }
        let mut trip = Vec::with_capacity(matrix.nnz());
        for &i in &free {
            for (j, v) in matrix.row(i) {
                if !constrained[j] {
                    trip.push((map[i], map[j], v));
                }
            }
        }
        let reduced = CsrMatrix::from_triplets(free.len(), trip);
        let chol = BandedCholesky::factor(&reduced)?;
        Ok(Self {
            full: matrix,
            reduced,
            constrained,
            free,
            chol,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.full
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Solves `A_II x_I = rhs_I - A_IC g_C` and returns the full vector with
    /// `x_C = g_C`. Entries of `rhs` on constrained rows are ignored.
    pub fn solve(&self, rhs: &[T], prescribed: &[T]) -> Vec<T> {
        let n = self.full.n();
        let mut g = vec![T::zero(); n];
        for i in 0..n {
            if self.constrained[i] {
                g[i] = prescribed[i];
            }
        }
        let ag = self.full.matvec(&g);
        let b: Vec<T> = self.free.iter().map(|&i| rhs[i] - ag[i]).collect();
        let xr = self.solve_reduced(&b);
        for (k, &i) in self.free.iter().enumerate() {
            g[i] = xr[k];
        }
        g
    }

    /// Homogeneous constraints.
    pub fn solve_zero(&self, rhs: &[T]) -> Vec<T> {
        let n = self.full.n();
        let b: Vec<T> = self.free.iter().map(|&i| rhs[i]).collect();
        let xr = self.solve_reduced(&b);
        let mut x = vec![T::zero(); n];
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = xr[k];
        }
        x
    }

    /// One step of iterative refinement on top of the direct solve.
    pub fn solve_reduced(&self, b: &[T]) -> Vec<T> {
        let mut x = self.chol.solve(b);
        let ax = self.reduced.matvec(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        let dx = self.chol.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }

    /// Euclidean norm of the residual on free rows.
    pub fn residual(&self, x: &[T], rhs: &[T]) -> T {
        let ax = self.full.matvec(x);
        self.free
            .iter()
            .map(|&i| (ax[i] - rhs[i]).powi(2))
            .sum::<T>()
            .sqrt()
    }
}

/// Matrix, load and prescribed values of a Dirichlet problem.
#[derive(Debug, Clone)]
pub struct SparseSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// `Some(g)` pins node `i` to `g`.
    pub prescribed: Vec<Option<T>>,
}

impl<T: Real> SparseSystem<T> {
    pub fn new(matrix: CsrMatrix<T>, rhs: Vec<T>) -> Self {
        let n = matrix.n();
        Self {
            matrix,
            rhs,
            prescribed: vec![None; n],
        }
    }

    pub fn with_zero_on(mut self, mask: &[bool]) -> Self {
        for (p, &m) in self.prescribed.iter_mut().zip(mask) {
            if m {
                *p = Some(T::zero());
            }
        }
        self
    }

    pub fn solve(&self) -> Result<Vec<T>> {
        let mask: Vec<bool> = self.prescribed.iter().map(Option::is_some).collect();
        let g: Vec<T> = self
            .prescribed
            .iter()
            .map(|p| p.unwrap_or_else(T::zero))
            .collect();
        let solver = ConstrainedSolver::new(self.matrix.clone(), mask)?;
        Ok(solver.solve(&self.rhs, &g))
    }
}
