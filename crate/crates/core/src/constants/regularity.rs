use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{FbpError, Result};
use crate::femcore::BoundaryCurve;

/// Which representative of `d gamma` enters the double integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeField {
    /// The element slopes themselves. Infinite once `s p >= 1` and the slope jumps.
    PiecewiseConstant,
    /// Continuous P1 field from averaging the slopes at each node.
    Recovered,
}

fn check(s: f64, p: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) || !(p > 1.0) {
        return Err(FbpError::InvalidInput(format!(
            "Gagliardo seminorm needs 0 < s < 1 and p > 1, got s = {s}, p = {p}"
        )));
    }
    Ok(())
}

/// `G` with `int_a^b int_c^d |x - y|^-sigma = G(d-a) + G(c-b) - G(d-b) - G(c-a)`.
fn pair_kernel(t: f64, sigma: f64) -> f64 {
    if (sigma - 2.0).abs() < 1e-14 {
        -t.ln()
    } else {
        t.powf(2.0 - sigma) / ((1.0 - sigma) * (2.0 - sigma))
    }
}

/// Seminorm of a piecewise-constant field on a uniform partition of `I`,
/// integrated exactly element pair by element pair.
pub fn gagliardo_piecewise_constant(values: &[f64], s: f64, p: f64) -> Result<f64> {
    check(s, p)?;
    let n = values.len();
    let h = 1.0 / n as f64;
    let sigma = 1.0 + s * p;
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let jump = (values[i] - values[j]).abs();
            if jump == 0.0 {
                continue;
            }
            if j == i + 1 && sigma >= 2.0 {
                return Ok(f64::INFINITY);
            }
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let (c, d) = (j as f64 * h, (j + 1) as f64 * h);
            let mut w = pair_kernel(d - a, sigma) - pair_kernel(d - b, sigma) - pair_kernel(c - a, sigma);
            if c > b {
                w += pair_kernel(c - b, sigma);
            }
            total += 2.0 * jump.powf(p) * w;
        }
    }
    Ok(total.powf(1.0 / p))
}

/// Nodal averages of element slopes (one-sided at the ends).
pub fn recover_nodal(slopes: &[f64]) -> Vec<f64> {
    let n = slopes.len();
    let mut g = Vec::with_capacity(n + 1);
    g.push(slopes[0]);
    for k in 1..n {
        g.push(0.5 * (slopes[k - 1] + slopes[k]));
    }
    g.push(slopes[n - 1]);
    g
}

fn rule(n: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(n).expect("positive order"))
}

/// `int_0^1 |a + b t|^p (1 + t)^-sigma dt`, split at the root of `a + b t`.
fn duffy_factor(gl: &GaussLegendre, a: f64, b: f64, p: f64, sigma: f64) -> f64 {
    let f = |t: f64| (a + b * t).abs().powf(p) * (1.0 + t).powf(-sigma);
    let root = if b != 0.0 { -a / b } else { -1.0 };
    if root > 0.0 && root < 1.0 {
        gl.integrate(0.0, root, f) + gl.integrate(root, 1.0, f)
    } else {
        gl.integrate(0.0, 1.0, f)
    }
}

/// Seminorm of the continuous P1 field with the given nodal values.
/// Same-element pairs are integrated in closed form, touching pairs through
/// a Duffy split of the corner singularity, the rest by tensor Gauss rules.
pub fn gagliardo_p1(nodal: &[f64], s: f64, p: f64) -> Result<f64> {
    check(s, p)?;
    let n = nodal.len() - 1;
    let h = 1.0 / n as f64;
    let sigma = 1.0 + s * p;
    let slope: Vec<f64> = (0..n).map(|e| (nodal[e + 1] - nodal[e]) / h).collect();
    let a = p - sigma;
    let same = 2.0 * h.powf(a + 2.0) / ((a + 1.0) * (a + 2.0));
    let radial = h.powf(p - s * p + 1.0) / (p - s * p + 1.0);
    let line = rule(24);
    let far = rule(12);
    let pts: Vec<(f64, f64)> = far
        .as_node_weight_pairs()
        .iter()
        .map(|(x, w)| (0.5 * (x + 1.0) * h, 0.5 * w * h))
        .collect();
    let mut total = 0.0;
    for i in 0..n {
        total += slope[i].abs().powf(p) * same;
        if i + 1 < n {
            let (ml, mr) = (slope[i], slope[i + 1]);
            let corner = duffy_factor(&line, ml, mr, p, sigma) + duffy_factor(&line, mr, ml, p, sigma);
            total += 2.0 * radial * corner;
        }
        for j in i + 2..n {
            let (xi, yj) = (i as f64 * h, j as f64 * h);
            let mut acc = 0.0;
            for (tx, wx) in &pts {
                let gx = nodal[i] + slope[i] * tx;
                for (ty, wy) in &pts {
                    let gy = nodal[j] + slope[j] * ty;
                    let dist = yj + ty - xi - tx;
                    acc += wx * wy * (gx - gy).abs().powf(p) * dist.powf(-sigma);
                }
            }
            total += 2.0 * acc;
        }
    }
    Ok(total.powf(1.0 / p))
}

/// Seminorm of order `s` in `L^p` of a slope field (one value per element).
pub fn gagliardo_slopes(slopes: &[f64], s: f64, p: f64, field: SlopeField) -> Result<f64> {
    match field {
        SlopeField::PiecewiseConstant => gagliardo_piecewise_constant(slopes, s, p),
        SlopeField::Recovered => gagliardo_p1(&recover_nodal(slopes), s, p),
    }
}

/// Seminorm of `d gamma` of order `s` in `L^p`.
pub fn gagliardo_seminorm(curve: &BoundaryCurve<f64>, s: f64, p: f64, field: SlopeField) -> Result<f64> {
    gagliardo_slopes(&curve.slopes(), s, p, field)
}
