use std::path::{Path, PathBuf};

use fbp_core::constants::{BetaConfig, ExtensionKind, MatrixNorm};
use fbp_core::control::{DataFunction, NodalTable, OptConfig, ProblemData};
use fbp_core::expr::Expression;
use fbp_core::state::SolverConfig;
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

/// Everything one invocation needs, as read from the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_interval: usize,
    pub n_square: usize,
    pub kappa: f64,
    pub lambda: f64,
    pub p: f64,
    #[serde(default, deserialize_with = "data_fn")]
    pub v: DataFunction,
    #[serde(default, deserialize_with = "data_fn")]
    pub gamma_d: DataFunction,
    #[serde(default, deserialize_with = "data_fn")]
    pub y_d: DataFunction,
    #[serde(default, deserialize_with = "data_fn")]
    pub u0: DataFunction,
    /// Radius of the control ball; the ledger value `theta1 / (2 alpha)` when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "d_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "d_res_tol")]
    pub res_tol: f64,
    #[serde(default = "d_opt_tol")]
    pub opt_tol: f64,
    #[serde(default = "d_max_fp_iter")]
    pub max_fp_iter: usize,
    #[serde(default = "d_max_opt_iter")]
    pub max_opt_iter: usize,
    #[serde(default)]
    pub line_search: LineSearch,
    #[serde(default)]
    pub ledger: LedgerOverrides,
    #[serde(default)]
    pub constants: ConstantsSettings,
    #[serde(default)]
    pub checks: CheckSettings,
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn d_fp_tol() -> f64 {
    SolverConfig::default().fp_tol
}
fn d_res_tol() -> f64 {
    SolverConfig::default().res_tol
}
fn d_opt_tol() -> f64 {
    OptConfig::default().opt_tol
}
fn d_max_fp_iter() -> usize {
    SolverConfig::default().max_iter
}
fn d_max_opt_iter() -> usize {
    OptConfig::default().max_iter
}
fn d_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearch {
    pub sigma: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        let o = OptConfig::default();
        Self {
            sigma: o.sigma,
            shrink: o.shrink,
            max_backtracks: o.max_backtracks,
        }
    }
}

/// Base constants that replace the computed surrogates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerOverrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub c_a: Option<f64>,
    pub c_e: Option<f64>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub l_gprime: Option<f64>,
    pub l_gsecond: Option<f64>,
}

/// How the surrogate constants are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSettings {
    pub ca_grid: usize,
    pub ca_norm: MatrixNorm,
    /// Elements per side of the mesh `beta` is estimated on.
    pub beta_n: usize,
    pub beta: BetaConfig,
    pub extension: ExtensionKind,
}

impl Default for ConstantsSettings {
    fn default() -> Self {
        Self {
            ca_grid: 41,
            ca_norm: MatrixNorm::default(),
            beta_n: 16,
            beta: BetaConfig::default(),
            extension: ExtensionKind::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSettings {
    pub fd_ladder: Vec<f64>,
    /// Step whose central difference is held to `fd_rel_tol`.
    pub fd_eps: f64,
    pub fd_rel_tol: f64,
    pub duality_tol: f64,
    pub frechet_ladder: Vec<f64>,
    /// Smallest accepted log-log slope of the Taylor remainders.
    pub frechet_min_order: f64,
    /// Remainders below this count as exact.
    pub frechet_floor: f64,
    pub soc_samples: usize,
    pub growth_samples: usize,
    /// Largest perturbation as a fraction of the control radius.
    pub growth_max_fraction: f64,
    pub stationarity_tol: f64,
    pub lipschitz_pairs: usize,
    pub contraction_pairs: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            fd_ladder: vec![1e-2, 1e-3, 1e-4],
            fd_eps: 1e-3,
            fd_rel_tol: 1e-4,
            duality_tol: 1e-9,
            frechet_ladder: vec![1e-1, 1e-2, 1e-3],
            frechet_min_order: 1.8,
            frechet_floor: 1e-12,
            soc_samples: 20,
            growth_samples: 50,
            growth_max_fraction: 0.1,
            stationarity_tol: 1e-8,
            lipschitz_pairs: 10,
            contraction_pairs: 100,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawData {
    Expr(String),
    Table(NodalTable),
}

fn data_fn<'de, D: Deserializer<'de>>(d: D) -> Result<DataFunction, D::Error> {
    match RawData::deserialize(d) {
        Ok(RawData::Expr(s)) => Expression::parse(&s)
            .map(DataFunction::Expr)
            .map_err(|e| serde::de::Error::custom(format!("{e} in \"{s}\""))),
        Ok(RawData::Table(t)) => Ok(DataFunction::Table(t)),
        Err(_) => Err(serde::de::Error::custom(
            "expected an expression string or a nodal table {n1, n2, values}",
        )),
    }
}

impl RunConfig {
    /// Config with every optional field at its default.
    pub fn minimal(n: usize, kappa: f64, lambda: f64, p: f64) -> Self {
        serde_json::from_value(serde_json::json!({
            "n_interval": n, "n_square": n, "kappa": kappa, "lambda": lambda, "p": p
        }))
        .expect("minimal config deserializes")
    }

    pub fn problem_data(&self) -> ProblemData {
        ProblemData {
            v: self.v.clone(),
            gamma_d: self.gamma_d.clone(),
            y_d: self.y_d.clone(),
            u0: self.u0.clone(),
            kappa: self.kappa,
            lambda: self.lambda,
            p: self.p,
        }
    }

    /// Fixed-point settings; `weight_factor` is set once the ledger is known.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            fp_tol: self.fp_tol,
            res_tol: self.res_tol,
            max_iter: self.max_fp_iter,
            p: self.p,
            ..SolverConfig::default()
        }
    }

    pub fn opt_config(&self) -> OptConfig {
        OptConfig {
            opt_tol: self.opt_tol,
            max_iter: self.max_opt_iter,
            sigma: self.line_search.sigma,
            shrink: self.line_search.shrink,
            max_backtracks: self.line_search.max_backtracks,
        }
    }

    /// Every violated invariant, in field order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_interval < 2 {
            out.push(format!("n_interval must be >= 2, got {}", self.n_interval));
        }
        if self.n_square < 2 {
            out.push(format!("n_square must be >= 2, got {}", self.n_square));
        }
        if self.n_interval != self.n_square {
            out.push(format!(
                "n_interval ({}) and n_square ({}) must match",
                self.n_interval, self.n_square
            ));
        }
        out.extend(self.problem_data().violations());
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                out.push(format!("radius must be > 0, got {r}"));
            }
        }
        for (name, x) in [("fp_tol", self.fp_tol), ("res_tol", self.res_tol), ("opt_tol", self.opt_tol)] {
            if !(x > 0.0) {
                out.push(format!("{name} must be > 0, got {x}"));
            }
        }
        for (name, x) in [("max_fp_iter", self.max_fp_iter), ("max_opt_iter", self.max_opt_iter)] {
            if x == 0 {
                out.push(format!("{name} must be >= 1"));
            }
        }
        if !(self.line_search.sigma > 0.0 && self.line_search.sigma < 1.0) {
            out.push(format!("line_search.sigma must lie in (0, 1), got {}", self.line_search.sigma));
        }
        if !(self.line_search.shrink > 0.0 && self.line_search.shrink < 1.0) {
            out.push(format!("line_search.shrink must lie in (0, 1), got {}", self.line_search.shrink));
        }
        let l = &self.ledger;
        for (name, x) in [
            ("ledger.alpha", l.alpha),
            ("ledger.beta", l.beta),
            ("ledger.c_a", l.c_a),
            ("ledger.c_e", l.c_e),
            ("ledger.l_gprime", l.l_gprime),
            ("ledger.l_gsecond", l.l_gsecond),
        ] {
            if let Some(x) = x {
                if !(x > 0.0 && x.is_finite()) {
                    out.push(format!("{name} must be positive, got {x}"));
                }
            }
        }
        let c = &self.constants;
        if c.ca_grid < 2 {
            out.push(format!("constants.ca_grid must be >= 2, got {}", c.ca_grid));
        }
        if c.beta_n < 2 {
            out.push(format!("constants.beta_n must be >= 2, got {}", c.beta_n));
        }
        let k = &self.checks;
        if k.fd_ladder.is_empty() || k.fd_ladder.iter().any(|e| !(*e > 0.0)) {
            out.push("checks.fd_ladder must hold positive steps".into());
        }
        if k.frechet_ladder.len() < 2 || k.frechet_ladder.iter().any(|e| !(*e > 0.0)) {
            out.push("checks.frechet_ladder must hold at least two positive steps".into());
        }
        for (name, x) in [
            ("checks.fd_eps", k.fd_eps),
            ("checks.fd_rel_tol", k.fd_rel_tol),
            ("checks.duality_tol", k.duality_tol),
            ("checks.stationarity_tol", k.stationarity_tol),
            ("checks.growth_max_fraction", k.growth_max_fraction),
        ] {
            if !(x > 0.0) {
                out.push(format!("{name} must be > 0, got {x}"));
            }
        }
        out
    }
}

/// Parses and validates a config held in memory.
pub fn parse_config_str(src: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(src);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("field `{path}`: {inner}"))
        }
    })?;
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(CliError::Config(format!("invalid config:\n  - {}", v.join("\n  - "))));
    }
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&src)
}
