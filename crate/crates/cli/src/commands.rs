use std::fs;
use std::io::Write;
use std::str::FromStr;

use groupoid_walk::chain::{simulate as run_trajectory, RecordMode, TrajectoryStates};
use groupoid_walk::kernel::KernelFamily;
use groupoid_walk::limits::{kms_phi, LimitsReport};
use groupoid_walk::montecarlo::{verify_clt, verify_lln, McError, McReport};
use groupoid_walk::oracle::closed_form::{self, ClosedFormLimits};
use groupoid_walk::oracle::dp::DpKind;
use groupoid_walk::oracle::{
    dp_g_coefficients, dp_hitting_series, dp_return_series, DpOptions, DpReport, Family,
    OracleError, DEFAULT_STATE_CAP,
};
use groupoid_walk::solver::SolveReport;
use groupoid_walk::{
    compute_limits, solve_r as solve, solve_r_derivatives, Generator, KernelF64, MetricF64,
    MetricKind, ReducedWord, SolveOptions,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DpKindArg, Record, RunConfig};
use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const LLN_STEPS: u64 = 20_000;
pub const LLN_PATHS: usize = 200;
pub const CLT_STEPS: u64 = 20_000;
pub const CLT_PATHS: usize = 2_000;
pub const SIMULATE_STEPS: u64 = 1_000;
pub const DP_STEPS: usize = 80;

pub const SWEEP_HEADER: &str =
    "q,gamma_word,sigma2_word,gamma_F,sigma2_F,cf_gamma_word,cf_sigma2_word,cf_gamma_F,cf_sigma2_F,max_abs_delta";

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| CliError::Invalid(format!("stdout: {e}")))
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn solve_options(cfg: &RunConfig) -> SolveOptions<f64> {
    let d = SolveOptions::default();
    SolveOptions {
        tol: cfg.tol.unwrap_or(d.tol),
        max_iter: cfg.max_iter.unwrap_or(d.max_iter),
        newton_polish: cfg.newton_polish.unwrap_or(d.newton_polish),
    }
}

#[derive(Serialize)]
struct Validation {
    valid: bool,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n_windows: Option<usize>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    family: Option<KernelFamily>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<String>,
}

pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.kernel() {
        Ok(k) => emit(
            cfg,
            &json(&Validation {
                valid: true,
                n_windows: Some(k.n_windows()),
                family: Some(k.family()),
                violations: Vec::new(),
            }),
        ),
        Err(CliError::Kernel(report)) => {
            emit(
                cfg,
                &json(&Validation {
                    valid: false,
                    n_windows: None,
                    family: None,
                    violations: report.violations.iter().map(|v| v.to_string()).collect(),
                }),
            )?;
            Err(CliError::Kernel(report))
        }
        Err(e) => Err(e),
    }
}

pub fn solve_r(cfg: &RunConfig) -> Result<(), CliError> {
    let k = cfg.kernel()?;
    let lambda = cfg.lambda.unwrap_or(1.0);
    let r = solve(&k, lambda, &solve_options(cfg))?;
    let derivs = if cfg.derivatives.unwrap_or(true) && lambda > 0.0 {
        Some(solve_r_derivatives(&k, &r)?)
    } else {
        None
    };
    emit(cfg, &json(&SolveReport::new(&r, derivs.as_ref())))
}

#[derive(Serialize)]
struct OracleComparison {
    #[serde(flatten)]
    closed_form: ClosedFormLimits,
    abs_delta_gamma: f64,
    abs_delta_sigma2: f64,
}

#[derive(Serialize)]
struct LimitsOutput {
    #[serde(flatten)]
    report: LimitsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleComparison>,
}

fn warn_degenerate(report: &LimitsReport) {
    if report.degenerate {
        eprintln!(
            "warning: degenerate metric: sigma2 = 0 (gamma = {}); every letter the walk can use has weight 0",
            report.gamma
        );
    }
}

pub fn limits(cfg: &RunConfig) -> Result<(), CliError> {
    let k = cfg.kernel()?;
    let metric = cfg.metric(k.n_windows())?;
    let out = compute_limits(&k, &metric, &solve_options(cfg))?;
    let report = LimitsReport::new(&out.constants, metric.kind());
    warn_degenerate(&report);
    let oracle = if cfg.oracle.unwrap_or(false) {
        oracle_comparison(&k, metric.kind(), &report)?
    } else {
        None
    };
    emit(cfg, &json(&LimitsOutput { report, oracle }))
}

fn oracle_comparison(
    k: &KernelF64,
    kind: MetricKind,
    report: &LimitsReport,
) -> Result<Option<OracleComparison>, CliError> {
    let Some(family) = Family::of_kernel(k.family()) else {
        eprintln!("note: no closed form for an explicit kernel; --oracle ignored");
        return Ok(None);
    };
    let case = closed_form::closed_form(family).map_err(|e| CliError::Invalid(e.to_string()))?;
    let Some(cf) = case.limits(kind) else {
        eprintln!("note: no closed form for a custom metric; --oracle ignored");
        return Ok(None);
    };
    let cmp = OracleComparison {
        abs_delta_gamma: (report.gamma - cf.gamma).abs(),
        abs_delta_sigma2: (report.sigma2 - cf.sigma2).abs(),
        closed_form: cf,
    };
    eprintln!(
        "closed form: gamma {} (|delta| {:.3e}), sigma2 {} (|delta| {:.3e})",
        cmp.closed_form.gamma, cmp.abs_delta_gamma, cmp.closed_form.sigma2, cmp.abs_delta_sigma2
    );
    Ok(Some(cmp))
}

fn q_grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let grid = match &cfg.q_values {
        Some(values) => values.clone(),
        None => {
            let (lo, hi, step) = (
                cfg.q_min.unwrap_or(0.01),
                cfg.q_max.unwrap_or(0.49),
                cfg.q_step.unwrap_or(0.01),
            );
            if !(step > 0.0) || !(lo <= hi) {
                return Err(CliError::Invalid(format!(
                    "q grid needs q_min <= q_max and q_step > 0, got {lo}, {hi}, {step}"
                )));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=count)
                .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
    };
    if grid.is_empty() {
        return Err(CliError::Invalid("empty q grid".into()));
    }
    if let Some(q) = grid.iter().find(|&&q| !(q > 0.0 && q < 0.5)) {
        return Err(CliError::Invalid(format!("q = {q} outside (0, 1/2)")));
    }
    Ok(grid)
}

pub fn sweep_q(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = q_grid(cfg)?;
    let opts = solve_options(cfg);
    let rows = grid
        .par_iter()
        .map(|&q| -> Result<String, CliError> {
            let k = KernelF64::one_parameter(q).map_err(CliError::Kernel)?;
            let word = compute_limits(&k, &MetricF64::word(), &opts)?.constants;
            let fenced = compute_limits(&k, &MetricF64::fenced(), &opts)?.constants;
            let cf = [
                closed_form::gamma3(q),
                closed_form::sigma2_3(q),
                closed_form::gamma3_fenced(q),
                closed_form::sigma2_3_fenced(q),
            ];
            let num = [word.gamma, word.sigma2, fenced.gamma, fenced.sigma2];
            let delta = num
                .iter()
                .zip(&cf)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let cols: Vec<String> = std::iter::once(q)
                .chain(num)
                .chain(cf)
                .chain([delta])
                .map(|x| x.to_string())
                .collect();
            Ok(cols.join(","))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    emit(cfg, &text)
}

fn parse_word(text: &str, n: usize) -> Result<ReducedWord, CliError> {
    let w = ReducedWord::from_str(text)
        .map_err(|e| CliError::Invalid(format!("word {text:?}: {e}")))?;
    if w.source() > n || w.letters().iter().any(|g| g.to() > n) {
        return Err(CliError::Invalid(format!(
            "word {text} uses a window beyond N = {n}"
        )));
    }
    Ok(w)
}

#[derive(Serialize)]
struct TrajectorySummary {
    seed: u64,
    n_steps: u64,
    start: String,
    final_word: String,
    final_word_len: usize,
    final_metric_len: f64,
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let k = cfg.kernel()?;
    let metric = cfg.metric(k.n_windows())?;
    let start = parse_word(cfg.start.as_deref().unwrap_or("e1"), k.n_windows())?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let n_steps = cfg.n_steps.unwrap_or(SIMULATE_STEPS);
    let mode = match cfg.record.unwrap_or(Record::Streaming) {
        Record::Full => RecordMode::Full,
        Record::Streaming => RecordMode::Streaming,
    };
    let traj = run_trajectory(&start, &k, &metric, n_steps, seed, mode);
    let lengths = traj.lengths(&metric);
    let mut text = String::new();
    match &traj.states {
        TrajectoryStates::Full(states) => {
            text.push_str("n,word_len,metric_len,word\n");
            for (p, w) in lengths.iter().zip(states) {
                text.push_str(&format!("{},{},{},{}\n", p.n, p.word_len, p.metric_len, w));
            }
        }
        TrajectoryStates::Streaming { .. } => {
            text.push_str("n,word_len,metric_len\n");
            for p in &lengths {
                text.push_str(&format!("{},{},{}\n", p.n, p.word_len, p.metric_len));
            }
        }
    }
    emit(cfg, &text)?;
    let last = traj.final_word();
    let summary = TrajectorySummary {
        seed,
        n_steps,
        start: start.to_string(),
        final_word: last.to_string(),
        final_word_len: last.len(),
        final_metric_len: last.metric_length(&metric),
    };
    eprint!("{}", json(&summary));
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub enum McMode {
    Lln,
    Clt,
}

fn mc_error(e: McError) -> CliError {
    CliError::Invalid(e.to_string())
}

pub fn mc(cfg: &RunConfig, mode: McMode) -> Result<(), CliError> {
    let k = cfg.kernel()?;
    let metric = cfg.metric(k.n_windows())?;
    let (gamma_ref, sigma2_ref) = match (cfg.gamma_ref, cfg.sigma2_ref) {
        (Some(g), Some(s)) => (g, s),
        (g, s) => {
            let c = compute_limits(&k, &metric, &solve_options(cfg))?.constants;
            (g.unwrap_or(c.gamma), s.unwrap_or(c.sigma2))
        }
    };
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let report: McReport = match mode {
        McMode::Lln => verify_lln(
            &k,
            &metric,
            gamma_ref,
            Some(sigma2_ref),
            cfg.n_steps.unwrap_or(LLN_STEPS),
            cfg.n_paths.unwrap_or(LLN_PATHS),
            seed,
        ),
        McMode::Clt => verify_clt(
            &k,
            &metric,
            gamma_ref,
            sigma2_ref,
            cfg.n_steps.unwrap_or(CLT_STEPS),
            cfg.n_paths.unwrap_or(CLT_PATHS),
            seed,
        ),
    }
    .map_err(mc_error)?;
    emit(cfg, &json(&report))?;
    if let Some(path) = &cfg.paths_csv {
        let file = fs::File::create(path)
            .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))?;
        report
            .write_paths_csv(std::io::BufWriter::new(file))
            .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    if report.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Statistical(format!(
            "statistical check failed: {} (seed {seed})",
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct KmsOutput {
    n: usize,
    x: f64,
    z: f64,
    phi: f64,
}

pub fn kms(cfg: &RunConfig) -> Result<(), CliError> {
    let (Some(n), Some(x), Some(z)) = (cfg.n, cfg.x, cfg.z) else {
        return Err(CliError::Invalid("kms needs n, x and z".into()));
    };
    if !(x.is_finite() && z.is_finite()) {
        return Err(CliError::Invalid("x and z must be finite".into()));
    }
    emit(
        cfg,
        &json(&KmsOutput {
            n,
            x,
            z,
            phi: kms_phi(n, x, z),
        }),
    )
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::StateCap { .. } => CliError::Numerical(e.to_string()),
        _ => CliError::Invalid(e.to_string()),
    }
}

fn parse_target(text: &str, n: usize) -> Result<Generator, CliError> {
    let w = parse_word(text, n)?;
    match w.letters() {
        [g] => Ok(*g),
        _ => Err(CliError::Invalid(format!(
            "target {text} must be a single letter"
        ))),
    }
}

pub fn oracle_dp(cfg: &RunConfig) -> Result<(), CliError> {
    let k = cfg.kernel()?;
    let n = k.n_windows();
    let opts = DpOptions {
        engine: cfg.engine.unwrap_or_default(),
        state_cap: cfg.state_cap.unwrap_or(DEFAULT_STATE_CAP),
    };
    let max_steps = cfg.max_steps.unwrap_or(DP_STEPS);
    let lambda = cfg.lambda;
    if let Some(l) = lambda {
        if !(0.0..=1.0).contains(&l) {
            return Err(CliError::Invalid(format!("lambda = {l} outside [0, 1]")));
        }
    }
    let window = cfg.window.unwrap_or(1);
    let base = DpReport {
        kind: DpKind::Hitting,
        engine: opts.engine,
        truncation: max_steps,
        coeffs: Vec::new(),
        target: None,
        window: None,
        lambda,
        z: None,
        value: None,
    };
    let report = match cfg.dp_kind.unwrap_or(DpKindArg::Hitting) {
        DpKindArg::Hitting => {
            let target = parse_target(cfg.target.as_deref().unwrap_or("A(1,2,+)"), n)?;
            let s = dp_hitting_series(&k, target, max_steps, &opts).map_err(oracle_error)?;
            DpReport {
                target: Some(target.to_string()),
                value: lambda.map(|l| s.eval(l)),
                coeffs: s.coeffs,
                ..base
            }
        }
        DpKindArg::Return => {
            let s = dp_return_series(&k, window, max_steps, &opts).map_err(oracle_error)?;
            DpReport {
                kind: DpKind::Return,
                window: Some(window),
                value: lambda.map(|l| s.eval(l)),
                coeffs: s.coeffs,
                ..base
            }
        }
        DpKindArg::TruncatedG => {
            let metric = cfg.metric(n)?;
            let z = cfg.z.unwrap_or(1.0);
            if lambda == Some(1.0) {
                return Err(CliError::Invalid("truncated-g needs lambda < 1".into()));
            }
            let c = dp_g_coefficients(&k, &metric, window, z, max_steps, &opts)
                .map_err(oracle_error)?;
            let value = lambda.map(|l| c.iter().rev().fold(0.0, |acc, &x| acc * l + x));
            DpReport {
                kind: DpKind::TruncatedG,
                window: Some(window),
                z: Some(z),
                value,
                coeffs: c,
                ..base
            }
        }
    };
    emit(cfg, &json(&report))
}
