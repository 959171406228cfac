use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{eval_a, eval_d2a, eval_da, CoeffPoint, Direction1D, Matrix2};
use crate::error::{FbpError, Result};
use crate::femcore::{
    a_on_points, assemble_bulk_with, bulk_flux_load, bulk_norm, extend, BoundaryCurve, BulkQuadrature,
    ConstrainedSolver, IntervalMesh, NormKind, SquareMesh,
};

/// Matrix norm used for the `L^inf(Omega)^{2x2}` bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    #[default]
    Spectral,
    EntryMax,
}

impl MatrixNorm {
    pub fn of(self, m: &Matrix2<f64>) -> f64 {
        match self {
            MatrixNorm::Spectral => m.spectral_norm(),
            MatrixNorm::EntryMax => m.max_abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaReport {
    pub a_part: f64,
    pub da_part: f64,
    pub d2a_part: f64,
    /// Sum of the three parts.
    pub value: f64,
    pub grid: usize,
    pub norm: MatrixNorm,
}

/// Corners of the unit ball of `W^{1,inf}_0(I)` in the (value, slope) plane.
const DIRECTIONS: [(f64, f64); 4] = [(0.5, 1.0), (0.5, -1.0), (-0.5, 1.0), (-0.5, -1.0)];

/// `||A||`, `sup_h ||DA<h>||` and `sup_{h1,h2} ||D^2A<h1,h2>||` at one point.
/// Both sups are attained at corners since the maps are (bi)linear.
pub fn ca_parts_at(gamma: f64, slope: f64, x2: f64, norm: MatrixNorm) -> Result<(f64, f64, f64)> {
    let p = CoeffPoint::new(gamma, slope, x2);
    let a = norm.of(&eval_a(&p)?);
    let dirs = DIRECTIONS.map(|(v, d)| Direction1D::new(v, d));
    let mut da = 0.0f64;
    let mut d2a = 0.0f64;
    for h1 in dirs {
        da = da.max(norm.of(&eval_da(&p, h1)?));
        for h2 in dirs {
            d2a = d2a.max(norm.of(&eval_d2a(&p, h1, h2)?));
        }
    }
    Ok((a, da, d2a))
}

/// Bound on `A`, `DA` and `D^2A` over `|gamma| <= 1/2`, `|gamma'| <= 1`,
/// `x2 in [0,1]` on a uniform grid with `grid` cells per unit length.
pub fn analytic_ca(grid: usize, norm: MatrixNorm) -> Result<CaReport> {
    let grid = grid.max(1);
    let lin = |lo: f64, hi: f64, m: usize| -> Vec<f64> {
        (0..=m).map(|k| lo + (hi - lo) * k as f64 / m as f64).collect()
    };
    let gammas = lin(-0.5, 0.5, grid);
    let slopes = lin(-1.0, 1.0, 2 * grid);
    let x2s = lin(0.0, 1.0, grid);
    let parts = gammas
        .par_iter()
        .map(|&g| {
            let mut m = (0.0f64, 0.0f64, 0.0f64);
            for &s in &slopes {
                for &x2 in &x2s {
                    let (a, b, c) = ca_parts_at(g, s, x2, norm)?;
                    m = (m.0.max(a), m.1.max(b), m.2.max(c));
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let (a, da, d2a) = parts
        .into_iter()
        .fold((0.0f64, 0.0f64, 0.0f64), |m, p| (m.0.max(p.0), m.1.max(p.1), m.2.max(p.2)));
    Ok(CaReport {
        a_part: a,
        da_part: da,
        d2a_part: d2a,
        value: a + da + d2a,
        grid,
        norm,
    })
}

/// Default inf-sup constant of the curve equation.
pub fn default_alpha(kappa: f64) -> f64 {
    2.0 / kappa
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Random starts in addition to the smooth one.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for BetaConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-9,
            random_starts: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta: f64,
    pub iterations: usize,
}

type Flux = Vec<[f64; 2]>;

struct FluxToGradient<'a> {
    quad: &'a BulkQuadrature<f64>,
    solver: ConstrainedSolver<f64>,
}

impl FluxToGradient<'_> {
    /// `g -> grad y` with `int A grad y . grad w = int g . grad w`.
    fn apply(&self, g: &[[f64; 2]]) -> Flux {
        let y = self.solver.solve_zero(&bulk_flux_load(self.quad, g));
        self.quad.gradients(&y)
    }

    fn norm(&self, g: &[[f64; 2]], p: f64) -> f64 {
        self.quad
            .points
            .iter()
            .zip(g)
            .map(|(q, g)| q.weight * (g[0] * g[0] + g[1] * g[1]).sqrt().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Duality map of `L^p` onto the unit sphere of `L^{p'}`.
    fn dual(&self, g: &[[f64; 2]], p: f64) -> Flux {
        let nrm = self.norm(g, p);
        g.iter()
            .map(|g| {
                let a = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if a == 0.0 {
                    [0.0, 0.0]
                } else {
                    let s = a.powf(p - 2.0) / nrm.powf(p - 1.0);
                    [g[0] * s, g[1] * s]
                }
            })
            .collect()
    }
}

/// Reciprocal of the discrete inf-sup constant of the bulk form with
/// coefficient `A[curve]` on the `W^{1,p}_0 x W^{1,q}_0` pair. Computed as
/// the `L^p` operator norm of the flux-to-gradient map by the nonlinear power
/// method for `p`-norms.
pub fn estimate_beta(n: usize, p: f64, curve: &BoundaryCurve<f64>, cfg: &BetaConfig) -> Result<BetaEstimate> {
    if !(p > 1.0) {
        return Err(FbpError::InvalidInput(format!("beta needs p > 1, got {p}")));
    }
    if curve.n_elems() != n {
        return Err(FbpError::InvalidMesh(format!(
            "curve has {} elements, mesh has {n}",
            curve.n_elems()
        )));
    }
    let sq = SquareMesh::new(n)?;
    let quad = BulkQuadrature::new(sq);
    let coeffs = a_on_points(curve, &quad)?;
    let op = FluxToGradient {
        quad: &quad,
        solver: ConstrainedSolver::new(assemble_bulk_with(&quad, &coeffs), sq.boundary_mask())?,
    };
    let q = p / (p - 1.0);
    let mut starts: Vec<Flux> = vec![quad
        .points
        .iter()
        .map(|pt| {
            let (x, y) = (pt.x1, pt.x2);
            let pi = std::f64::consts::PI;
            [pi * (pi * x).cos() * (pi * y).sin(), pi * (pi * x).sin() * (pi * y).cos()]
        })
        .collect()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.random_starts {
        starts.push(
            (0..quad.len())
                .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
                .collect(),
        );
    }
    let mut best = BetaEstimate {
        beta: 0.0,
        iterations: 0,
    };
    for start in starts {
        let mut x = op.dual(&op.dual(&start, p), q);
        let mut nu = 0.0;
        let mut done = false;
        for _ in 0..cfg.max_iter {
            let tx = op.apply(&x);
            let next = op.norm(&tx, p) / op.norm(&x, p);
            let z = op.apply(&op.dual(&tx, p));
            x = op.dual(&z, q);
            best.iterations += 1;
            if (next - nu).abs() <= cfg.tol * next.abs() {
                nu = next;
                done = true;
                break;
            }
            nu = next;
        }
        if !done {
            return Err(FbpError::PowerIteration {
                iterations: cfg.max_iter,
            });
        }
        best.beta = best.beta.max(nu);
    }
    Ok(best)
}

/// Admissible curves probed by [`estimate_beta_admissible`].
pub fn beta_probe_curves(n: usize) -> Vec<BoundaryCurve<f64>> {
    let mesh = IntervalMesh::new(n).expect("n >= 2");
    let pi = std::f64::consts::PI;
    let mut out = vec![BoundaryCurve::zeros(n)];
    for sign in [1.0, -1.0] {
        out.push(BoundaryCurve::from_fn(mesh, |x: f64| sign * (pi * x).sin() / pi));
        out.push(BoundaryCurve::from_fn(mesh, |x: f64| sign * x * (1.0 - x)));
    }
    out
}

/// Largest [`estimate_beta`] over [`beta_probe_curves`].
pub fn estimate_beta_admissible(n: usize, p: f64, cfg: &BetaConfig) -> Result<f64> {
    let vals = beta_probe_curves(n)
        .par_iter()
        .map(|c| estimate_beta(n, p, c, cfg).map(|b| b.beta))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Which lifting of interface data is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionKind {
    /// `zeta(x1) x2`, the lifting used by the solvers.
    #[default]
    Linear,
    /// Discrete harmonic lifting with zero data on the other edges.
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeReport {
    /// `max(ratio, 1)`.
    pub value: f64,
    pub max_ratio: f64,
    /// Element indices of the two ramps of the maximizing plateau.
    pub argmax: (usize, usize),
    pub kind: ExtensionKind,
}

/// Plateau of height 1/2 ramping up on element `i` and down on element `j`;
/// these are the extreme points of the unit ball of `W^{1,1}_0(I)`.
pub fn plateau(n: usize, i: usize, j: usize) -> BoundaryCurve<f64> {
    let vals = (0..=n).map(|k| if k > i && k <= j { 0.5 } else { 0.0 }).collect();
    BoundaryCurve::from_interior(vals)
}

/// `||grad E zeta||_{L^q}` for one interface function.
pub fn extension_norm(
    zeta: &BoundaryCurve<f64>,
    q: f64,
    kind: ExtensionKind,
    harmonic: Option<&ConstrainedSolver<f64>>,
    quad: &BulkQuadrature<f64>,
) -> Result<f64> {
    let vals = match kind {
        ExtensionKind::Linear => extend(zeta).into_values(),
        ExtensionKind::Harmonic => {
            let solver = harmonic.ok_or_else(|| FbpError::InvalidInput("harmonic solver missing".into()))?;
            let sq = quad.mesh;
            let n = sq.n();
            let mut g = vec![0.0; sq.n_nodes()];
            for (i, z) in zeta.values().iter().enumerate() {
                g[sq.index(i, n)] = *z;
            }
            solver.solve(&vec![0.0; sq.n_nodes()], &g)
        }
    };
    bulk_norm(quad, &vals, NormKind::W1p0(q))
}

/// Laplace solver with every boundary node prescribed.
pub fn harmonic_solver(sq: SquareMesh, quad: &BulkQuadrature<f64>) -> Result<ConstrainedSolver<f64>> {
    let ident = vec![Matrix2::identity(); quad.len()];
    ConstrainedSolver::new(assemble_bulk_with(quad, &ident), sq.boundary_mask())
}

/// Operator norm of the lifting from `W^{1,1}_0(I)` to `W^{1,q}(Omega)`,
/// maximized exactly over the extreme points of the discrete unit ball.
pub fn compute_ce(n: usize, q: f64, kind: ExtensionKind) -> Result<CeReport> {
    let sq = SquareMesh::new(n)?;
    let quad = BulkQuadrature::new(sq);
    let harmonic = match kind {
        ExtensionKind::Harmonic => Some(harmonic_solver(sq, &quad)?),
        ExtensionKind::Linear => None,
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let ratios = pairs
        .par_iter()
        .map(|&(i, j)| extension_norm(&plateau(n, i, j), q, kind, harmonic.as_ref(), &quad).map(|r| (r, (i, j))))
        .collect::<Result<Vec<_>>>()?;
    let (max_ratio, argmax) = ratios
        .into_iter()
        .fold((0.0, (0, 1)), |m, r| if r.0 > m.0 { r } else { m });
    Ok(CeReport {
        value: max_ratio.max(1.0),
        max_ratio,
        argmax,
        kind,
    })
}
