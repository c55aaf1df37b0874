//! `gwalk`: command-line front end for the groupoid random-walk library.
//!
//! Exit codes: 0 success, 1 failed statistical check, 2 invalid input,
//! 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use groupoid_walk::kernel::KernelReport;
use groupoid_walk::oracle::DpEngine;
use groupoid_walk::{KernelSpec, LimitsError, SolverError};

use config::{
    read_kernel_file, read_metric_file, DpKindArg, KernelFile, KernelSource, MetricSpec, Record,
    RunConfig,
};

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Kernel(KernelReport),
    Numerical(String),
    Statistical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Statistical(_) => 1,
            CliError::Invalid(_) | CliError::Kernel(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Numerical(m) | CliError::Statistical(m) => {
                f.write_str(m)
            }
            CliError::Kernel(r) => {
                writeln!(f, "invalid kernel:")?;
                let lines: Vec<String> = r.violations.iter().map(|v| format!("  - {v}")).collect();
                f.write_str(&lines.join("\n"))
            }
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidLambda(_)
            | SolverError::InvalidTolerance(_)
            | SolverError::ZeroLambda => CliError::Invalid(e.to_string()),
            SolverError::NoConvergence { .. } | SolverError::Singular(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<LimitsError> for CliError {
    fn from(e: LimitsError) -> Self {
        match e {
            LimitsError::Solver(s) => s.into(),
            LimitsError::OutOfDomain { .. } => CliError::Invalid(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gwalk",
    version,
    about = "Drift and variance of word length for random walks on the window groupoid"
)]
struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for sweeps and Monte Carlo paths.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Write the main output here instead of stdout.
    #[arg(long, short, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a kernel against the row-sum and range constraints.
    Validate {
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Solve for R(λ) and, for λ > 0, its first two λ-derivatives.
    SolveR {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        lambda: Option<f64>,
        /// Skip R' and R''.
        #[arg(long)]
        no_derivatives: bool,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Drift γ and variance σ² of the metric length.
    Limits {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Also compare with the closed form for a named family.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// CSV of γ and σ² over a grid of q for the one-parameter family.
    SweepQ {
        /// Explicit grid, comma separated; overrides the range flags.
        #[arg(long, value_delimiter = ',', value_name = "Q,...")]
        q: Option<Vec<f64>>,
        #[arg(long)]
        q_min: Option<f64>,
        #[arg(long)]
        q_max: Option<f64>,
        #[arg(long)]
        q_step: Option<f64>,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// One trajectory as CSV `n,word_len,metric_len`.
    Simulate {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Initial word, e.g. `e1` or `A(1,2,+)A(2,3,-)`.
        #[arg(long)]
        start: Option<String>,
        #[arg(long, value_enum)]
        record: Option<Record>,
    },
    /// Law-of-large-numbers check of the drift.
    McLln {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Central-limit check of the variance and shape.
    McClt {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Characteristic polynomial of the n×n matrix z^|i-j| at x.
    Kms {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        x: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        z: Option<f64>,
    },
    /// Exact truncated series by dynamic programming.
    OracleDp {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, value_enum)]
        kind: Option<DpKindArg>,
        /// Truncation order M.
        #[arg(long)]
        max_steps: Option<usize>,
        /// Target letter for `hitting`, e.g. `A(1,2,+)`.
        #[arg(long)]
        target: Option<String>,
        /// Start window for `return` and `truncated-g`.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        z: Option<f64>,
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
        /// Reachable-word cap for the word-space engine.
        #[arg(long)]
        state_cap: Option<usize>,
    },
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct KernelArgs {
    /// Symmetric kernel on N windows.
    #[arg(long, value_name = "N")]
    symmetric: Option<usize>,
    /// One-parameter three-window kernel.
    #[arg(long, value_name = "Q")]
    q: Option<f64>,
    /// The built-in asymmetric three-window kernel.
    #[arg(long)]
    asymmetric: bool,
    /// Kernel JSON file.
    #[arg(long, value_name = "FILE")]
    kernel_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricArgs {
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Metric JSON file (`"word"`, `"fenced"` or `{"custom": [...]}`).
    #[arg(long, value_name = "FILE", conflicts_with = "metric")]
    metric_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MetricArg {
    Word,
    Fenced,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum EngineArg {
    FirstPassage,
    WordSpace,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Max-norm update at which the fixed-point iteration stops.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Refine the fixed point with Newton steps.
    #[arg(long)]
    newton_polish: bool,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reference drift; defaults to the computed γ.
    #[arg(long, allow_negative_numbers = true)]
    gamma_ref: Option<f64>,
    /// Reference variance; defaults to the computed σ².
    #[arg(long)]
    sigma2_ref: Option<f64>,
    /// Also write per-path results as CSV.
    #[arg(long, value_name = "FILE")]
    paths_csv: Option<PathBuf>,
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

impl KernelArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        let spec = if let Some(n) = self.symmetric {
            Some(serde_json::from_value::<KernelSpec>(
                serde_json::json!({ "symmetric": { "N": n } }),
            ))
        } else if let Some(q) = self.q {
            Some(serde_json::from_value(
                serde_json::json!({ "one_parameter_q": { "q": q } }),
            ))
        } else if self.asymmetric {
            Some(serde_json::from_value(
                serde_json::json!({ "asymmetric": {} }),
            ))
        } else {
            None
        };
        if let Some(spec) = spec {
            cfg.kernel = Some(KernelSource::Spec(
                spec.map_err(|e| CliError::Invalid(e.to_string()))?,
            ));
        } else if let Some(path) = &self.kernel_file {
            read_kernel_file(path)?;
            cfg.kernel = Some(KernelSource::File(KernelFile { file: path.clone() }));
        }
        Ok(())
    }
}

impl MetricArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(m) = self.metric {
            cfg.metric = Some(match m {
                MetricArg::Word => MetricSpec::Word,
                MetricArg::Fenced => MetricSpec::Fenced,
            });
        } else if let Some(path) = &self.metric_file {
            cfg.metric = Some(read_metric_file(path)?);
        }
        Ok(())
    }
}

impl SolveArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.tol, self.tol);
        set(&mut cfg.max_iter, self.max_iter);
        if self.newton_polish {
            cfg.newton_polish = Some(true);
        }
    }
}

impl McArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.n_steps, self.steps);
        set(&mut cfg.n_paths, self.paths);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.gamma_ref, self.gamma_ref);
        set(&mut cfg.sigma2_ref, self.sigma2_ref);
        set(&mut cfg.paths_csv, self.paths_csv.clone());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.threads, cli.threads);
    set(&mut cfg.output, cli.output);
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Validate { kernel } => {
            kernel.apply(&mut cfg)?;
            commands::validate(&cfg)
        }
        Command::SolveR {
            kernel,
            lambda,
            no_derivatives,
            solve,
        } => {
            kernel.apply(&mut cfg)?;
            solve.apply(&mut cfg);
            set(&mut cfg.lambda, lambda);
            if no_derivatives {
                cfg.derivatives = Some(false);
            }
            commands::solve_r(&cfg)
        }
        Command::Limits {
            kernel,
            metric,
            oracle,
            solve,
        } => {
            kernel.apply(&mut cfg)?;
            metric.apply(&mut cfg)?;
            solve.apply(&mut cfg);
            if oracle {
                cfg.oracle = Some(true);
            }
            commands::limits(&cfg)
        }
        Command::SweepQ {
            q,
            q_min,
            q_max,
            q_step,
            solve,
        } => {
            solve.apply(&mut cfg);
            if q.is_none() && (q_min.is_some() || q_max.is_some() || q_step.is_some()) {
                cfg.q_values = None;
            }
            set(&mut cfg.q_values, q);
            set(&mut cfg.q_min, q_min);
            set(&mut cfg.q_max, q_max);
            set(&mut cfg.q_step, q_step);
            commands::sweep_q(&cfg)
        }
        Command::Simulate {
            kernel,
            metric,
            steps,
            seed,
            start,
            record,
        } => {
            kernel.apply(&mut cfg)?;
            metric.apply(&mut cfg)?;
            set(&mut cfg.n_steps, steps);
            set(&mut cfg.seed, seed);
            set(&mut cfg.start, start);
            set(&mut cfg.record, record);
            commands::simulate(&cfg)
        }
        Command::McLln { kernel, metric, mc } => {
            kernel.apply(&mut cfg)?;
            metric.apply(&mut cfg)?;
            mc.apply(&mut cfg);
            commands::mc(&cfg, commands::McMode::Lln)
        }
        Command::McClt { kernel, metric, mc } => {
            kernel.apply(&mut cfg)?;
            metric.apply(&mut cfg)?;
            mc.apply(&mut cfg);
            commands::mc(&cfg, commands::McMode::Clt)
        }
        Command::Kms { n, x, z } => {
            set(&mut cfg.n, n);
            set(&mut cfg.x, x);
            set(&mut cfg.z, z);
            commands::kms(&cfg)
        }
        Command::OracleDp {
            kernel,
            metric,
            kind,
            max_steps,
            target,
            window,
            lambda,
            z,
            engine,
            state_cap,
        } => {
            kernel.apply(&mut cfg)?;
            metric.apply(&mut cfg)?;
            set(&mut cfg.dp_kind, kind);
            set(&mut cfg.max_steps, max_steps);
            set(&mut cfg.target, target);
            set(&mut cfg.window, window);
            set(&mut cfg.lambda, lambda);
            set(&mut cfg.z, z);
            set(
                &mut cfg.engine,
                engine.map(|e| match e {
                    EngineArg::FirstPassage => DpEngine::FirstPassage,
                    EngineArg::WordSpace => DpEngine::WordSpace,
                }),
            );
            set(&mut cfg.state_cap, state_cap);
            commands::oracle_dp(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
