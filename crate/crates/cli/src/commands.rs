use std::fs;
use std::path::Path;

use fbp_core::constants::{
    compute_thresholds, gagliardo_seminorm, measure_lipschitz, sample_control, ConstantsLedger, LipschitzKind,
    LipschitzReport, SlopeField,
};
use fbp_core::control::{
    check_quadratic_growth, optimize, optimize_checked, stationarity_residual, verify_soc, GrowthReport, OptIterate,
    ReducedPoint, SocReport,
};
use fbp_core::femcore::{NormKind, NormedField};
use fbp_core::io::{write_bulk_csv, write_curve_csv, write_table_file, Cell};
use fbp_core::state::{check_admissibility, check_contraction, solve_state, ContractionReport, FeasibilityReport, FixedPointTrace};
use fbp_core::tangent::{verify_frechet, FrechetOrder, FrechetRow};
use fbp_core::ControlProfile;
use log::info;
use serde::Serialize;

use crate::config::RunConfig;
use crate::resolve::{resolve, ConstantsDetail, Resolved};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Solve the state system at the initial control.
    SolveState,
    /// Solve state and adjoint at the initial control.
    SolveAdjoint,
    /// Run the projected-gradient optimizer from the initial control.
    Optimize,
    /// Compare the adjoint gradient with central differences.
    CheckGradient,
    /// Sample contraction ratios of the fixed-point map.
    CheckContraction,
    /// Taylor remainders of the first and second state derivatives.
    CheckFrechet,
    /// Second-order condition and quadratic growth at the optimizer's control.
    VerifySoc,
    /// Resolve the ledger and measure the Lipschitz constants.
    EstimateConstants,
    /// Ledger, feasibility and state summary at the initial control.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveState => "solve-state",
            Command::SolveAdjoint => "solve-adjoint",
            Command::Optimize => "optimize",
            Command::CheckGradient => "check-gradient",
            Command::CheckContraction => "check-contraction",
            Command::CheckFrechet => "check-frechet",
            Command::VerifySoc => "verify-soc",
            Command::EstimateConstants => "estimate-constants",
            Command::Report => "report",
        }
    }
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Artifacts were written but a solver stopped early.
    SolverFailure(String),
    /// A checked property failed.
    VerificationFailure(String),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::SolverFailure(_) => 1,
            Outcome::VerificationFailure(_) => 3,
        }
    }
}

fn verdict(ok: bool, what: impl FnOnce() -> String) -> Outcome {
    if ok {
        Outcome::Success
    } else {
        Outcome::VerificationFailure(what())
    }
}

#[derive(Serialize)]
struct Envelope<'a, B: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    ledger: &'a ConstantsLedger,
    constants: &'a ConstantsDetail,
    passed: bool,
    result: B,
}

struct Ctx {
    r: Resolved,
    out: std::path::PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> std::path::PathBuf {
        self.out.join(name)
    }

    fn json<B: Serialize>(&self, name: &str, cmd: Command, ledger: &ConstantsLedger, passed: bool, body: B) -> Result<(), CliError> {
        let env = Envelope {
            command: cmd.name(),
            config: &self.r.cfg,
            ledger,
            constants: &self.r.detail,
            passed,
            result: body,
        };
        let mut s = serde_json::to_string_pretty(&env)?;
        s.push('\n');
        fs::write(self.path(name), s)?;
        Ok(())
    }

    fn u0(&self) -> ControlProfile {
        self.r.cp.initial_control()
    }

    fn seed(&self) -> u64 {
        self.r.cfg.seed
    }
}

fn write_trace(path: &Path, t: &FixedPointTrace) -> Result<(), CliError> {
    let rows: Vec<Vec<Cell>> = t
        .distances
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let ratio = if k == 0 { f64::NAN } else { t.ratios[k - 1] };
            vec![Cell::from(k + 1), Cell::from(*d), Cell::from(ratio)]
        })
        .collect();
    write_table_file(path, &["iteration", "distance", "ratio"], &rows)?;
    Ok(())
}

/// Resolves the config and runs one command, writing its artifacts to the
/// configured output directory.
pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let r = resolve(cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let ctx = Ctx {
        out: cfg.out_dir.clone(),
        r,
    };
    info!("running {}", cmd.name());
    match cmd {
        Command::SolveState => solve_state_cmd(&ctx),
        Command::SolveAdjoint => solve_adjoint_cmd(&ctx),
        Command::Optimize => optimize_cmd(&ctx),
        Command::CheckGradient => check_gradient_cmd(&ctx),
        Command::CheckContraction => check_contraction_cmd(&ctx),
        Command::CheckFrechet => check_frechet_cmd(&ctx),
        Command::VerifySoc => verify_soc_cmd(&ctx),
        Command::EstimateConstants => estimate_constants_cmd(&ctx),
        Command::Report => report_cmd(&ctx),
    }
}

#[derive(Serialize)]
struct StateSummary {
    gamma_w1inf: f64,
    y_w1p: f64,
    gamma_max: f64,
    trace: FixedPointTrace,
    feasibility: FeasibilityReport,
}

fn solve_state_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let u = ctx.u0();
    let (s, trace) = solve_state(&cp.state, &u)?;
    write_bulk_csv(&ctx.path("state.csv"), cp.state.square, &[("y", s.y.values()), ("v", cp.state.v.values())])?;
    write_curve_csv(&ctx.path("curve.csv"), cp.state.line_mesh, &[("u", u.values()), ("gamma", s.gamma.values())])?;
    write_trace(&ctx.path("trace.csv"), &trace)?;
    let body = StateSummary {
        gamma_w1inf: s.gamma.norm(NormKind::W1Inf0)?,
        y_w1p: s.y.norm(NormKind::W1p0(cp.state.cfg.p))?,
        gamma_max: s.gamma.max_abs(),
        feasibility: check_admissibility(&u, &cp.state.v, &ctx.r.ledger),
        trace,
    };
    ctx.json("solve_state.json", Command::SolveState, &ctx.r.ledger, true, body)?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct AdjointSummary {
    cost: f64,
    gradient_l2: f64,
    s_max: f64,
    state_trace: FixedPointTrace,
    adjoint_trace: FixedPointTrace,
}

fn solve_adjoint_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let u = ctx.u0();
    let pt = ReducedPoint::new(cp, &u)?;
    let (adj, trace) = pt.adjoint()?;
    let g = pt.gradient_from(&adj);
    write_bulk_csv(&ctx.path("adjoint.csv"), cp.state.square, &[("r", adj.r.values())])?;
    write_curve_csv(
        &ctx.path("adjoint_curve.csv"),
        cp.state.line_mesh,
        &[("s", adj.s.values()), ("gradient", g.values())],
    )?;
    write_trace(&ctx.path("adjoint_trace.csv"), &trace)?;
    let body = AdjointSummary {
        cost: pt.cost(),
        gradient_l2: cp.l2_norm(&g),
        s_max: adj.s.max_abs(),
        state_trace: pt.state_trace.clone(),
        adjoint_trace: trace,
    };
    ctx.json("solve_adjoint.json", Command::SolveAdjoint, &ctx.r.ledger, true, body)?;
    Ok(Outcome::Success)
}

fn write_history(path: &Path, h: &[OptIterate]) -> Result<(), CliError> {
    let rows: Vec<Vec<Cell>> = h
        .iter()
        .map(|it| {
            vec![
                Cell::from(it.iteration),
                Cell::from(it.cost),
                Cell::from(it.residual),
                Cell::from(it.step),
                Cell::from(it.u_norm),
                Cell::from(it.gradient_norm),
            ]
        })
        .collect();
    write_table_file(path, &["iteration", "cost", "residual", "step", "u_norm", "gradient_norm"], &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct OptimizeSummary {
    cost: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    u_l2: f64,
    radius: f64,
    feasibility: Option<FeasibilityReport>,
}

fn optimize_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let res = optimize_checked(cp, &ctx.u0(), &ctx.r.cfg.opt_config(), &ctx.r.ledger)?;
    let (s, _) = solve_state(&cp.state, &res.u)?;
    write_curve_csv(
        &ctx.path("control.csv"),
        cp.state.line_mesh,
        &[("u", res.u.values()), ("gamma", s.gamma.values()), ("gamma_d", &cp.gamma_d_nodal())],
    )?;
    write_bulk_csv(&ctx.path("state.csv"), cp.state.square, &[("y", s.y.values())])?;
    write_history(&ctx.path("history.csv"), &res.history)?;
    let body = OptimizeSummary {
        cost: res.cost,
        residual: res.residual,
        iterations: res.iterations,
        converged: res.converged,
        u_l2: cp.l2_norm(&res.u),
        radius: cp.radius,
        feasibility: res.feasibility,
    };
    ctx.json("optimize.json", Command::Optimize, &ctx.r.ledger, res.converged, body)?;
    Ok(if res.converged {
        Outcome::Success
    } else {
        Outcome::SolverFailure(format!(
            "optimizer stopped after {} iterations with residual {:e}",
            res.iterations, res.residual
        ))
    })
}

#[derive(Serialize)]
struct FdRow {
    eps: f64,
    central_difference: f64,
    adjoint: f64,
    abs_error: f64,
    rel_error: f64,
}

#[derive(Serialize)]
struct GradientSummary {
    adjoint: f64,
    sensitivity: f64,
    duality_gap: f64,
    duality_ok: bool,
    checked_eps: f64,
    checked_rel_error: f64,
    fd_ok: bool,
    rows: Vec<FdRow>,
}

/// Relative error with the denominator floored so that an exactly zero
/// derivative does not divide by zero.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn check_gradient_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let k = &ctx.r.cfg.checks;
    let u = ctx.u0();
    let h = sample_control(cp, ctx.seed());
    let pt = ReducedPoint::new(cp, &u)?;
    let g = pt.gradient()?;
    let adjoint = pt.inner(&g, &h);
    let sensitivity = pt.sensitivity_derivative(&h)?;
    let mut rows = Vec::new();
    for &e in &k.fd_ladder {
        let jp = ReducedPoint::new(cp, &u.axpy(e, &h))?.cost();
        let jm = ReducedPoint::new(cp, &u.axpy(-e, &h))?.cost();
        let fd = (jp - jm) / (2.0 * e);
        rows.push(FdRow {
            eps: e,
            central_difference: fd,
            adjoint,
            abs_error: (fd - adjoint).abs(),
            rel_error: rel_err(fd, adjoint),
        });
    }
    let checked = rows
        .iter()
        .min_by(|a, b| (a.eps.ln() - k.fd_eps.ln()).abs().total_cmp(&(b.eps.ln() - k.fd_eps.ln()).abs()))
        .expect("ladder is non-empty");
    let (checked_eps, checked_rel_error) = (checked.eps, checked.rel_error);
    let duality_gap = (adjoint - sensitivity).abs();
    let duality_ok = duality_gap <= k.duality_tol * (1.0 + adjoint.abs());
    let fd_ok = checked_rel_error <= k.fd_rel_tol;
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.eps),
                Cell::from(r.central_difference),
                Cell::from(r.adjoint),
                Cell::from(r.abs_error),
                Cell::from(r.rel_error),
            ]
        })
        .collect();
    write_table_file(
        &ctx.path("gradient_fd.csv"),
        &["eps", "central_difference", "adjoint", "abs_error", "rel_error"],
        &table,
    )?;
    let passed = fd_ok && duality_ok;
    let body = GradientSummary {
        adjoint,
        sensitivity,
        duality_gap,
        duality_ok,
        checked_eps,
        checked_rel_error,
        fd_ok,
        rows,
    };
    ctx.json("check_gradient.json", Command::CheckGradient, &ctx.r.ledger, passed, body)?;
    Ok(verdict(passed, || {
        format!("gradient check failed: relative error {checked_rel_error:e} at eps {checked_eps:e}, duality gap {duality_gap:e}")
    }))
}

fn check_contraction_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let u = ctx.u0();
    let rep: ContractionReport =
        check_contraction(&cp.state, &u, &ctx.r.ledger, ctx.r.cfg.checks.contraction_pairs, ctx.seed())?;
    let (_, trace) = solve_state(&cp.state, &u)?;
    write_trace(&ctx.path("contraction_trace.csv"), &trace)?;
    let passed = rep.pass();
    let (m, b) = (rep.max_ratio, rep.bound);
    let t = rep.trace_max_ratio;
    ctx.json("check_contraction.json", Command::CheckContraction, &ctx.r.ledger, passed, rep)?;
    Ok(verdict(passed, || {
        format!("contraction check failed: pair ratio {m:.6}, trace ratio {t:.6}, bound {b:.6}")
    }))
}

#[derive(Serialize)]
struct FrechetSummary {
    first: Vec<FrechetRow>,
    second: Vec<FrechetRow>,
    first_order: Option<f64>,
    second_order: Option<f64>,
    first_ok: bool,
    second_ok: bool,
}

/// Largest log-log slope of the remainders between consecutive steps, over
/// the pairs whose remainders sit above `floor`. `None` when every remainder
/// is below the floor.
fn observed_order(rows: &[FrechetRow], floor: f64) -> Option<f64> {
    rows.windows(2)
        .filter(|w| w[0].remainder > floor && w[1].remainder > floor)
        .map(|w| (w[0].remainder / w[1].remainder).ln() / (w[0].eps / w[1].eps).ln())
        .reduce(f64::max)
}

fn check_frechet_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let k = &ctx.r.cfg.checks;
    let u = ctx.u0();
    let h = sample_control(cp, ctx.seed());
    let first = verify_frechet(&cp.state, &u, &h, FrechetOrder::First, &k.frechet_ladder)?;
    let second = verify_frechet(&cp.state, &u, &h, FrechetOrder::Second, &k.frechet_ladder)?;
    let exact = |rows: &[FrechetRow]| rows.iter().all(|r| r.remainder <= k.frechet_floor);
    let first_order = observed_order(&first, k.frechet_floor);
    let second_order = observed_order(&second, k.frechet_floor);
    let first_ok = exact(&first) || first_order.is_some_and(|o| o >= k.frechet_min_order);
    let second_ok = exact(&second) || second_order.is_some_and(|o| o >= k.frechet_min_order);
    let mut table = Vec::new();
    for (label, rows) in [("first", &first), ("second", &second)] {
        for r in rows.iter() {
            table.push(vec![Cell::from(label), Cell::from(r.eps), Cell::from(r.remainder), Cell::from(r.ratio)]);
        }
    }
    write_table_file(&ctx.path("frechet.csv"), &["order", "eps", "remainder", "ratio"], &table)?;
    let passed = first_ok && second_ok;
    let body = FrechetSummary {
        first,
        second,
        first_order,
        second_order,
        first_ok,
        second_ok,
    };
    ctx.json("check_frechet.json", Command::CheckFrechet, &ctx.r.ledger, passed, body)?;
    Ok(verdict(passed, || {
        format!("Taylor remainders too slow: observed orders {first_order:?} and {second_order:?}")
    }))
}

#[derive(Serialize)]
struct SocSummary {
    optimizer_converged: bool,
    optimizer_residual: f64,
    stationarity: f64,
    soc: SocReport,
    growth: GrowthReport,
}

fn verify_soc_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let k = &ctx.r.cfg.checks;
    let res = optimize(cp, &ctx.u0(), &ctx.r.cfg.opt_config())?;
    let soc = verify_soc(cp, &res.u, &ctx.r.ledger, k.soc_samples, ctx.seed())?;
    let growth = check_quadratic_growth(
        cp,
        &res.u,
        k.growth_samples,
        k.growth_max_fraction * cp.radius,
        k.stationarity_tol,
        ctx.seed(),
    )?;
    let soc_rows: Vec<Vec<Cell>> = soc
        .samples
        .iter()
        .map(|s| vec![Cell::from(format!("{:?}", s.kind).as_str()), Cell::from(s.ratio)])
        .collect();
    write_table_file(&ctx.path("soc_samples.csv"), &["kind", "ratio"], &soc_rows)?;
    let growth_rows: Vec<Vec<Cell>> = growth
        .samples
        .iter()
        .map(|s| {
            vec![
                Cell::from(s.norm),
                Cell::from(s.cost_gap),
                Cell::from(s.cost_bound),
                Cell::from(s.grad_gap),
                Cell::from(s.grad_bound),
                Cell::from(s.holds),
            ]
        })
        .collect();
    write_table_file(
        &ctx.path("growth.csv"),
        &["norm", "cost_gap", "cost_bound", "grad_gap", "grad_bound", "holds"],
        &growth_rows,
    )?;
    write_curve_csv(&ctx.path("control.csv"), cp.state.line_mesh, &[("u", res.u.values())])?;
    let passed = res.converged && soc.pass() && growth.all_hold;
    let min_ratio = soc.min_ratio;
    let all_hold = growth.all_hold;
    let body = SocSummary {
        optimizer_converged: res.converged,
        optimizer_residual: res.residual,
        stationarity: stationarity_residual(cp, &res.u)?,
        soc,
        growth,
    };
    ctx.json("verify_soc.json", Command::VerifySoc, &ctx.r.ledger, passed, body)?;
    if !res.converged {
        return Ok(Outcome::SolverFailure(format!(
            "optimizer stopped after {} iterations with residual {:e}",
            res.iterations, res.residual
        )));
    }
    Ok(verdict(passed, || {
        format!("second-order check failed: min ratio {min_ratio:.6}, growth holds: {all_hold}")
    }))
}

#[derive(Serialize)]
struct ConstantsSummary {
    lipschitz: Vec<LipschitzReport>,
}

fn estimate_constants_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let n_pairs = ctx.r.cfg.checks.lipschitz_pairs;
    let mut reports = Vec::new();
    for kind in [LipschitzKind::G, LipschitzKind::Gprime, LipschitzKind::Gsecond] {
        info!("measuring {kind:?} over {n_pairs} pairs");
        reports.push(measure_lipschitz(kind, cp, &ctx.r.ledger, n_pairs, ctx.seed())?);
    }
    let mut ledger = ctx.r.ledger.clone();
    if let Some(d) = ledger.derived.as_mut() {
        let o = ctx.r.cfg.ledger;
        d.l_gprime = o.l_gprime.or(Some(reports[1].observed));
        d.l_gsecond = o.l_gsecond.or(Some(reports[2].observed));
    }
    let ledger = compute_thresholds(&ledger, cp.data_norms()).map_err(CliError::config)?;
    let mut s = serde_json::to_string_pretty(&ledger)?;
    s.push('\n');
    fs::write(ctx.path("ledger.json"), s)?;
    let d = ledger.derived.as_ref().expect("thresholds computed");
    let rows: Vec<Vec<Cell>> = [
        ("alpha", ledger.alpha),
        ("beta", ledger.beta),
        ("c_a", ledger.c_a),
        ("c_e", ledger.c_e),
        ("theta1", ledger.theta1),
        ("theta2", ledger.theta2),
        ("theta3", d.theta3),
        ("lambda1", d.lambda1),
        ("lambda2", d.lambda2),
        ("omega1", d.omega1),
        ("omega2", d.omega2),
        ("v_invariance", d.v_invariance),
        ("v_contraction", d.v_contraction),
        ("v_soc", d.v_soc),
        ("u_radius", d.u_radius),
        ("uad_radius", d.uad_radius),
        ("l_g", d.l_g),
        ("l_gprime", d.l_gprime.unwrap_or(f64::NAN)),
        ("l_gsecond", d.l_gsecond.unwrap_or(f64::NAN)),
    ]
    .iter()
    .map(|(k, v)| vec![Cell::from(*k), Cell::from(*v)])
    .collect();
    write_table_file(&ctx.path("constants.csv"), &["name", "value"], &rows)?;
    ctx.json(
        "estimate_constants.json",
        Command::EstimateConstants,
        &ledger,
        true,
        ConstantsSummary { lipschitz: reports },
    )?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct ReportSummary {
    feasibility: FeasibilityReport,
    cost: f64,
    gradient_l2: f64,
    stationarity: f64,
    gamma_w1inf: f64,
    y_w1p: f64,
    /// Fractional seminorm of the slope of `gamma` of order `1/q` in `L^p`.
    gamma_regularity: f64,
    state_trace: FixedPointTrace,
}

fn report_cmd(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cp = &ctx.r.cp;
    let l = &ctx.r.ledger;
    let u = ctx.u0();
    let pt = ReducedPoint::new(cp, &u)?;
    let g = pt.gradient()?;
    let s = &pt.lin.base;
    let body = ReportSummary {
        feasibility: check_admissibility(&u, &cp.state.v, l),
        cost: pt.cost(),
        gradient_l2: cp.l2_norm(&g),
        stationarity: stationarity_residual(cp, &u)?,
        gamma_w1inf: s.gamma.norm(NormKind::W1Inf0)?,
        y_w1p: s.y.norm(NormKind::W1p0(l.p))?,
        gamma_regularity: gagliardo_seminorm(&s.gamma, 1.0 / l.q, l.p, SlopeField::Recovered)?,
        state_trace: pt.state_trace.clone(),
    };
    let rows: Vec<Vec<Cell>> = [
        ("cost", body.cost),
        ("gradient_l2", body.gradient_l2),
        ("stationarity", body.stationarity),
        ("gamma_w1inf", body.gamma_w1inf),
        ("y_w1p", body.y_w1p),
        ("gamma_regularity", body.gamma_regularity),
        ("v_norm", body.feasibility.v_norm),
        ("v_invariance_bound", body.feasibility.v_invariance_bound),
        ("v_contraction_bound", body.feasibility.v_contraction_bound),
        ("u_norm", body.feasibility.u_norm),
        ("uad_radius", body.feasibility.uad_radius),
    ]
    .iter()
    .map(|(k, v)| vec![Cell::from(*k), Cell::from(*v)])
    .collect();
    write_table_file(&ctx.path("summary.csv"), &["name", "value"], &rows)?;
    ctx.json("report.json", Command::Report, l, true, body)?;
    Ok(Outcome::Success)
}
