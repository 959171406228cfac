use serde::{Deserialize, Serialize};

use crate::error::{FbpError, Result};
use crate::expr::Expression;

/// A data function on the unit square with the `x2` derivatives needed to
/// pull it back through the domain map.
pub trait SpatialFunction: Send + Sync {
    fn value(&self, x1: f64, x2: f64) -> f64;
    fn d_x2(&self, x1: f64, x2: f64) -> f64;
    fn d_x2x2(&self, x1: f64, x2: f64) -> f64;
}

impl SpatialFunction for Expression {
    fn value(&self, x1: f64, x2: f64) -> f64 {
        self.eval(x1, x2)
    }
    fn d_x2(&self, x1: f64, x2: f64) -> f64 {
        Expression::d_x2(self, x1, x2)
    }
    fn d_x2x2(&self, x1: f64, x2: f64) -> f64 {
        Expression::d_x2x2(self, x1, x2)
    }
}

/// Nodal values on a uniform grid of `[0,1]^2`, interpolated bilinearly.
///
/// `values[j * (n1 + 1) + i]` sits at `(i / n1, j / n2)`. With `n2 = 0` the
/// table is a function of `x1` alone and holds `n1 + 1` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodalTable {
    pub n1: usize,
    #[serde(default)]
    pub n2: usize,
    pub values: Vec<f64>,
}

impl NodalTable {
    pub fn validate(&self) -> Result<()> {
        let expect = (self.n1 + 1) * (self.n2 + 1);
        if self.n1 == 0 || self.values.len() != expect {
            return Err(FbpError::InvalidInput(format!(
                "nodal table with n1 = {}, n2 = {} needs {} values, got {}",
                self.n1,
                self.n2,
                expect,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(FbpError::InvalidInput("nodal table holds non-finite values".into()));
        }
        Ok(())
    }

    fn locate(n: usize, x: f64) -> (usize, f64) {
        let t = x.clamp(0.0, 1.0) * n as f64;
        let e = (t.floor() as usize).min(n - 1);
        (e, t - e as f64)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.n1 + 1) + i]
    }

    fn column(&self, x1: f64, j: usize) -> f64 {
        let (i, s) = Self::locate(self.n1, x1);
        self.at(i, j) * (1.0 - s) + self.at(i + 1, j) * s
    }
}

impl SpatialFunction for NodalTable {
    fn value(&self, x1: f64, x2: f64) -> f64 {
        if self.n2 == 0 {
            return self.column(x1, 0);
        }
        let (j, t) = Self::locate(self.n2, x2);
        self.column(x1, j) * (1.0 - t) + self.column(x1, j + 1) * t
    }

    fn d_x2(&self, x1: f64, x2: f64) -> f64 {
        if self.n2 == 0 {
            return 0.0;
        }
        let (j, _) = Self::locate(self.n2, x2);
        (self.column(x1, j + 1) - self.column(x1, j)) * self.n2 as f64
    }

    fn d_x2x2(&self, _x1: f64, _x2: f64) -> f64 {
        0.0
    }
}

/// Either an expression string or a nodal table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataFunction {
    Expr(Expression),
    Table(NodalTable),
}

impl DataFunction {
    pub fn zero() -> Self {
        DataFunction::Expr(Expression::parse("0").expect("literal parses"))
    }

    pub fn expr(src: &str) -> Result<Self> {
        Ok(DataFunction::Expr(Expression::parse(src)?))
    }

    /// True when the function is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        match self {
            DataFunction::Expr(e) => e.is_constant() && e.eval(0.0, 0.0) == 0.0,
            DataFunction::Table(t) => t.values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DataFunction::Expr(_) => Ok(()),
            DataFunction::Table(t) => t.validate(),
        }
    }
}

impl Default for DataFunction {
    fn default() -> Self {
        Self::zero()
    }
}

impl SpatialFunction for DataFunction {
    fn value(&self, x1: f64, x2: f64) -> f64 {
        match self {
            DataFunction::Expr(e) => e.eval(x1, x2),
            DataFunction::Table(t) => t.value(x1, x2),
        }
    }
    fn d_x2(&self, x1: f64, x2: f64) -> f64 {
        match self {
            DataFunction::Expr(e) => e.d_x2(x1, x2),
            DataFunction::Table(t) => t.d_x2(x1, x2),
        }
    }
    fn d_x2x2(&self, x1: f64, x2: f64) -> f64 {
        match self {
            DataFunction::Expr(e) => e.d_x2x2(x1, x2),
            DataFunction::Table(t) => t.d_x2x2(x1, x2),
        }
    }
}

/// Continuous data of the control problem.
///
/// `v` is the Dirichlet lift on the reference square, `gamma_d` the target
/// curve, `y_d` the target state on the physical domain and `u0` the initial
/// control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemData {
    #[serde(default)]
    pub v: DataFunction,
    #[serde(default)]
    pub gamma_d: DataFunction,
    #[serde(default)]
    pub y_d: DataFunction,
    #[serde(default)]
    pub u0: DataFunction,
    pub kappa: f64,
    pub lambda: f64,
    pub p: f64,
}

impl ProblemData {
    pub fn new(kappa: f64, lambda: f64, p: f64) -> Self {
        Self {
            v: DataFunction::zero(),
            gamma_d: DataFunction::zero(),
            y_d: DataFunction::zero(),
            u0: DataFunction::zero(),
            kappa,
            lambda,
            p,
        }
    }

    /// Collects every violated invariant.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.kappa > 0.0) {
            out.push(format!("kappa must be > 0, got {}", self.kappa));
        }
        if !(self.lambda > 0.0) {
            out.push(format!("lambda must be > 0, got {}", self.lambda));
        }
        if !(self.p > 2.0) || !self.p.is_finite() {
            out.push(format!("p must be > 2, got {}", self.p));
        }
        for (name, f) in [("v", &self.v), ("gamma_d", &self.gamma_d), ("y_d", &self.y_d), ("u0", &self.u0)] {
            if let Err(e) = f.validate() {
                out.push(format!("{name}: {e}"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_bilinearly() {
        let t = NodalTable {
            n1: 1,
            n2: 1,
            values: vec![0.0, 1.0, 2.0, 3.0],
        };
        t.validate().unwrap();
        assert!((t.value(0.5, 0.5) - 1.5).abs() < 1e-15);
        assert!((t.d_x2(0.25, 0.5) - 2.0).abs() < 1e-15);
        let line = NodalTable {
            n1: 2,
            n2: 0,
            values: vec![0.0, 1.0, 0.0],
        };
        assert!((line.value(0.25, 0.9) - 0.5).abs() < 1e-15);
        assert_eq!(line.d_x2(0.25, 0.9), 0.0);
    }

    #[test]
    fn data_function_json_forms() {
        let e: DataFunction = serde_json::from_str("\"0.1*sin(pi*x1)\"").unwrap();
        assert!(matches!(e, DataFunction::Expr(_)));
        let t: DataFunction = serde_json::from_str(r#"{"n1": 2, "values": [0, 1, 0]}"#).unwrap();
        assert!(matches!(t, DataFunction::Table(_)));
        assert!(DataFunction::zero().is_zero());
        assert!(!e.is_zero());
    }

    #[test]
    fn violations_are_collected() {
        let mut d = ProblemData::new(0.0, -1.0, 2.0);
        d.v = DataFunction::Table(NodalTable {
            n1: 2,
            n2: 2,
            values: vec![0.0; 3],
        });
        assert_eq!(d.violations().len(), 4);
        assert!(ProblemData::new(1.0, 0.1, 4.0).violations().is_empty());
    }
}
