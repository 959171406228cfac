use super::mesh::{IntervalMesh, SquareMesh};
use crate::scalar::Real;

/// Two-point Gauss rule on `[0,1]`.
pub const GAUSS2_POINTS: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9,
    0.5 + 0.288_675_134_594_812_9,
];
pub const GAUSS2_WEIGHTS: [f64; 2] = [0.5, 0.5];

#[derive(Debug, Clone)]
pub struct IntervalQuadPoint<T> {
    pub elem: usize,
    pub nodes: [usize; 2],
    pub shape: [T; 2],
    pub dshape: [T; 2],
    pub x1: T,
    pub weight: T,
}

/// All Gauss points of an interval mesh, element by element.
#[derive(Debug, Clone)]
pub struct IntervalQuadrature<T> {
    pub mesh: IntervalMesh,
    pub points: Vec<IntervalQuadPoint<T>>,
}

impl<T: Real> IntervalQuadrature<T> {
    pub fn new(mesh: IntervalMesh) -> Self {
        let n = mesh.n_elems();
        let h: T = mesh.h();
        let mut points = Vec::with_capacity(2 * n);
        for e in 0..n {
            for (xi, w) in GAUSS2_POINTS.iter().zip(GAUSS2_WEIGHTS) {
                let xi = T::of(*xi);
                points.push(IntervalQuadPoint {
                    elem: e,
                    nodes: [e, e + 1],
                    shape: [T::one() - xi, xi],
                    dshape: [-T::one() / h, T::one() / h],
                    x1: (T::of_usize(e) + xi) * h,
                    weight: T::of(w) * h,
                });
            }
        }
        Self { mesh, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Value and slope of a nodal P1 function at every point.
    pub fn interpolate(&self, nodal: &[T]) -> Vec<(T, T)> {
        self.points
            .iter()
            .map(|q| {
                let [a, b] = q.nodes;
                (
                    q.shape[0] * nodal[a] + q.shape[1] * nodal[b],
                    q.dshape[0] * nodal[a] + q.dshape[1] * nodal[b],
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BulkQuadPoint<T> {
    pub nodes: [usize; 4],
    pub shape: [T; 4],
    pub grad: [[T; 2]; 4],
    pub x1: T,
    pub x2: T,
    pub weight: T,
    /// Index of the interval Gauss point with the same abscissa.
    pub line_point: usize,
    /// Weight of this point in the vertical rule of its column.
    pub vertical_weight: T,
}

/// Tensor 2x2 Gauss points of every element of a square mesh.
///
/// Points are ordered so that the columns line up with
/// [`IntervalQuadrature`] on the trace mesh: `line_point` indexes it.
#[derive(Debug, Clone)]
pub struct BulkQuadrature<T> {
    pub mesh: SquareMesh,
    pub points: Vec<BulkQuadPoint<T>>,
}

impl<T: Real> BulkQuadrature<T> {
    pub fn new(mesh: SquareMesh) -> Self {
        let n = mesh.n();
        let h: T = mesh.h();
        let mut points = Vec::with_capacity(4 * n * n);
        for ej in 0..n {
            for ei in 0..n {
                let nodes = mesh.element_nodes(ei, ej);
                for (b, eta) in GAUSS2_POINTS.iter().enumerate() {
                    for (a, xi) in GAUSS2_POINTS.iter().enumerate() {
                        let xi = T::of(*xi);
                        let eta = T::of(*eta);
                        let one = T::one();
                        let shape = [
                            (one - xi) * (one - eta),
                            xi * (one - eta),
                            (one - xi) * eta,
                            xi * eta,
                        ];
                        let grad = [
                            [-(one - eta) / h, -(one - xi) / h],
                            [(one - eta) / h, -xi / h],
                            [-eta / h, (one - xi) / h],
                            [eta / h, xi / h],
                        ];
                        let wv = T::of(GAUSS2_WEIGHTS[b]) * h;
                        points.push(BulkQuadPoint {
                            nodes,
                            shape,
                            grad,
                            x1: (T::of_usize(ei) + xi) * h,
                            x2: (T::of_usize(ej) + eta) * h,
                            weight: T::of(GAUSS2_WEIGHTS[a]) * h * wv,
                            line_point: 2 * ei + a,
                            vertical_weight: wv,
                        });
                    }
                }
            }
        }
        Self { mesh, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Value of a nodal Q1 field at every point.
    pub fn values(&self, nodal: &[T]) -> Vec<T> {
        self.points
            .iter()
            .map(|q| (0..4).map(|k| q.shape[k] * nodal[q.nodes[k]]).sum())
            .collect()
    }

    /// Gradient of a nodal Q1 field at every point.
    pub fn gradients(&self, nodal: &[T]) -> Vec<[T; 2]> {
        self.points.iter().map(|q| q.gradient(nodal)).collect()
    }
}

impl<T: Real> BulkQuadPoint<T> {
    #[inline]
    pub fn gradient(&self, nodal: &[T]) -> [T; 2] {
        let mut g = [T::zero(); 2];
        for k in 0..4 {
            let v = nodal[self.nodes[k]];
            g[0] += self.grad[k][0] * v;
            g[1] += self.grad[k][1] * v;
        }
        g
    }
}
