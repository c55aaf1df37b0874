//! Statistical checks of the law of large numbers and the central limit
//! theorem for `|W_n|`, plus the lazy-walk picture of the symmetric kernel.
//!
//! Path `p` of a run with master seed `s` draws from [`path_rng`]`(s, p)`.
//! Paths run in parallel but are reduced in index order, so every report is
//! bit-reproducible from `(seed, config)` whatever the thread count.
//!
//! The bands (4 SE for the LLN, 99% chi-square and `1.63/√paths` KS for the
//! CLT, 3 SE for the lazy walk) are engineering choices, not rates derived
//! from the limit theorems.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::chain::{path_rng, Walker};
use crate::groupoid::{Generator, Metric, MetricKind, ReducedWord};
use crate::kernel::TransitionKernel;
use crate::scalar::Scalar;

pub const LLN_BAND_SE: f64 = 4.0;
pub const CLT_CONFIDENCE: f64 = 0.99;
/// Asymptotic 1% critical value of the one-sample KS statistic times `√n`.
pub const KS_COEFF: f64 = 1.63;
pub const LAZY_BAND_SE: f64 = 3.0;

pub const LLN_MIN_STEPS: u64 = 1_000;
pub const LLN_MIN_PATHS: usize = 50;
pub const CLT_MIN_STEPS: u64 = 10_000;
pub const CLT_MIN_PATHS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("n_steps must be at least {min}, got {got}")]
    TooFewSteps { min: u64, got: u64 },
    #[error("n_paths must be at least {min}, got {got}")]
    TooFewPaths { min: usize, got: usize },
    #[error("the lazy-walk check needs the symmetric kernel")]
    NotSymmetric,
    #[error("invalid reference value: {0}")]
    InvalidReference(String),
}

/// The non-trivial starting word `A(1,2,+) A(2,3,-)`.
pub fn alternate_start() -> ReducedWord {
    ReducedWord::from_generators(1, [Generator::arc(1, 2, 1), Generator::arc(2, 3, -1)])
        .expect("composable")
}

/// Final state of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEnd {
    pub path_index: u64,
    pub word_len: usize,
    pub metric_len: f64,
}

/// Runs `n_paths` paths of `n_steps` from `start`; path `p` uses stream
/// `stream_offset + p`.
pub fn run_paths<T: Scalar>(
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    start: &ReducedWord,
    n_steps: u64,
    n_paths: usize,
    seed: u64,
    stream_offset: u64,
) -> Vec<PathEnd> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let stream = stream_offset + p;
            let mut w = Walker::new(start.clone(), kernel, metric, path_rng(seed, stream));
            w.advance(n_steps);
            PathEnd {
                path_index: stream,
                word_len: w.word_len(),
                metric_len: w.metric_len().to_f64_lossy(),
            }
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Kolmogorov–Smirnov distance between the sample and `N(0, sigma2)`.
pub fn ks_distance(sample: &[f64], sigma2: f64) -> Result<f64, McError> {
    let normal = Normal::new(0.0, sigma2.sqrt())
        .map_err(|e| McError::InvalidReference(format!("sigma2 = {sigma2}: {e}")))?;
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = normal.cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// `[lo, hi]` such that the sample variance of `n_paths` normal draws with
/// variance `sigma2` falls inside with probability `confidence`.
pub fn chi_square_band(sigma2: f64, n_paths: usize, confidence: f64) -> (f64, f64) {
    let df = n_paths as f64 - 1.0;
    let chi = ChiSquared::new(df).expect("df > 0");
    let tail = (1.0 - confidence) / 2.0;
    (
        sigma2 * chi.inverse_cdf(tail) / df,
        sigma2 * chi.inverse_cdf(1.0 - tail) / df,
    )
}

/// One pass/fail decision with the statistic and its acceptance interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub statistic: f64,
    pub lower: Option<f64>,
    pub upper: f64,
}

impl Check {
    fn below(name: &str, statistic: f64, upper: f64) -> Self {
        Check {
            name: name.into(),
            pass: statistic < upper,
            statistic,
            lower: None,
            upper,
        }
    }

    fn within(name: &str, statistic: f64, lower: f64, upper: f64) -> Self {
        Check {
            name: name.into(),
            pass: statistic >= lower && statistic <= upper,
            statistic,
            lower: Some(lower),
            upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AltStart {
    pub start: String,
    pub gamma_hat: f64,
    pub gamma_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum McKind {
    Lln,
    Clt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub kind: McKind,
    pub n_steps: u64,
    pub n_paths: usize,
    pub seed: u64,
    pub metric: MetricKind,
    pub start: String,
    pub gamma_ref: f64,
    pub sigma2_ref: Option<f64>,
    /// Mean of `|W_n| / n`.
    pub gamma_hat: f64,
    pub gamma_se: f64,
    /// Sample variance of `(|W_n| - γ_ref n) / √n`.
    pub sigma2_hat: f64,
    /// KS distance of the same sample to `N(0, σ²_ref)` (or to
    /// `N(0, sigma2_hat)` without a reference).
    pub normality_stat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alt_start: Option<AltStart>,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub paths: Vec<PathEnd>,
}

impl McReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Per-path CSV: `path_index,final_word_len,final_metric_len,Z`.
    pub fn write_paths_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "path_index,final_word_len,final_metric_len,Z")?;
        for p in &self.paths {
            writeln!(
                out,
                "{},{},{},{}",
                p.path_index,
                p.word_len,
                p.metric_len,
                z_score(p.metric_len, self.gamma_ref, self.n_steps)
            )?;
        }
        Ok(())
    }
}

fn z_score(len: f64, gamma: f64, n: u64) -> f64 {
    (len - gamma * n as f64) / (n as f64).sqrt()
}

struct Summary {
    gamma_hat: f64,
    gamma_se: f64,
    z: Vec<f64>,
}

fn summarize(paths: &[PathEnd], gamma_ref: f64, n_steps: u64) -> Summary {
    let rates: Vec<f64> = paths
        .iter()
        .map(|p| p.metric_len / n_steps as f64)
        .collect();
    let z = paths
        .iter()
        .map(|p| z_score(p.metric_len, gamma_ref, n_steps))
        .collect();
    Summary {
        gamma_hat: mean(&rates),
        gamma_se: (variance(&rates) / rates.len() as f64).sqrt(),
        z,
    }
}

fn check_sizes(
    n_steps: u64,
    n_paths: usize,
    min_steps: u64,
    min_paths: usize,
) -> Result<(), McError> {
    if n_steps < min_steps {
        return Err(McError::TooFewSteps {
            min: min_steps,
            got: n_steps,
        });
    }
    if n_paths < min_paths {
        return Err(McError::TooFewPaths {
            min: min_paths,
            got: n_paths,
        });
    }
    Ok(())
}

/// LLN check from `e_1`, repeated from [`alternate_start`] on disjoint streams.
///
/// Passes when `|γ̂ - γ_ref| < 4 (SE + σ_ref/√n)` for both starts and the
/// two estimates agree within 4 combined SE. Without `sigma2_ref` the sample
/// SD of `|W_n|/√n` stands in for `σ_ref`.
pub fn verify_lln<T: Scalar>(
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    gamma_ref: f64,
    sigma2_ref: Option<f64>,
    n_steps: u64,
    n_paths: usize,
    seed: u64,
) -> Result<McReport, McError> {
    check_sizes(n_steps, n_paths, LLN_MIN_STEPS, LLN_MIN_PATHS)?;
    if let Some(s) = sigma2_ref {
        if !(s >= 0.0) {
            return Err(McError::InvalidReference(format!("sigma2_ref = {s}")));
        }
    }
    let start = ReducedWord::unit(1);
    let alt = alternate_start();
    let paths = run_paths(kernel, metric, &start, n_steps, n_paths, seed, 0);
    let alt_paths = run_paths(kernel, metric, &alt, n_steps, n_paths, seed, n_paths as u64);
    let main = summarize(&paths, gamma_ref, n_steps);
    let other = summarize(&alt_paths, gamma_ref, n_steps);
    let sigma2_hat = variance(&main.z);
    let sigma_ref = sigma2_ref.unwrap_or(sigma2_hat).sqrt();
    let slack = sigma_ref / (n_steps as f64).sqrt();
    let checks = vec![
        Check::below(
            "lln",
            (main.gamma_hat - gamma_ref).abs(),
            LLN_BAND_SE * (main.gamma_se + slack),
        ),
        Check::below(
            "lln_alt_start",
            (other.gamma_hat - gamma_ref).abs(),
            LLN_BAND_SE * (other.gamma_se + slack),
        ),
        Check::below(
            "initial_condition",
            (main.gamma_hat - other.gamma_hat).abs(),
            LLN_BAND_SE * main.gamma_se.hypot(other.gamma_se),
        ),
    ];
    let normality_stat = if sigma2_ref.unwrap_or(sigma2_hat) > 0.0 {
        ks_distance(&main.z, sigma2_ref.unwrap_or(sigma2_hat))?
    } else {
        0.0
    };
    Ok(McReport {
        kind: McKind::Lln,
        n_steps,
        n_paths,
        seed,
        metric: metric.kind(),
        start: start.to_string(),
        gamma_ref,
        sigma2_ref,
        gamma_hat: main.gamma_hat,
        gamma_se: main.gamma_se,
        sigma2_hat,
        normality_stat,
        alt_start: Some(AltStart {
            start: alt.to_string(),
            gamma_hat: other.gamma_hat,
            gamma_se: other.gamma_se,
        }),
        pass: checks.iter().all(|c| c.pass),
        checks,
        paths,
    })
}

/// CLT check from `e_1`: the sample variance of `Z = (|W_n| - γ_ref n)/√n`
/// must lie in the 99% chi-square band around `σ²_ref`, and the KS distance
/// of `Z` to `N(0, σ²_ref)` must be below `1.63/√n_paths`.
pub fn verify_clt<T: Scalar>(
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    gamma_ref: f64,
    sigma2_ref: f64,
    n_steps: u64,
    n_paths: usize,
    seed: u64,
) -> Result<McReport, McError> {
    check_sizes(n_steps, n_paths, CLT_MIN_STEPS, CLT_MIN_PATHS)?;
    if !(sigma2_ref > 0.0) {
        return Err(McError::InvalidReference(format!(
            "sigma2_ref = {sigma2_ref} must be positive"
        )));
    }
    let start = ReducedWord::unit(1);
    let paths = run_paths(kernel, metric, &start, n_steps, n_paths, seed, 0);
    let s = summarize(&paths, gamma_ref, n_steps);
    let sigma2_hat = variance(&s.z);
    let (lo, hi) = chi_square_band(sigma2_ref, n_paths, CLT_CONFIDENCE);
    let normality_stat = ks_distance(&s.z, sigma2_ref)?;
    let checks = vec![
        Check::within("clt_variance", sigma2_hat, lo, hi),
        Check::below("clt_ks", normality_stat, KS_COEFF / (n_paths as f64).sqrt()),
    ];
    Ok(McReport {
        kind: McKind::Clt,
        n_steps,
        n_paths,
        seed,
        metric: metric.kind(),
        start: start.to_string(),
        gamma_ref,
        sigma2_ref: Some(sigma2_ref),
        gamma_hat: s.gamma_hat,
        gamma_se: s.gamma_se,
        sigma2_hat,
        normality_stat,
        alt_start: None,
        pass: checks.iter().all(|c| c.pass),
        checks,
        paths,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoveFrequency {
    pub count: u64,
    pub frequency: f64,
    pub expected: f64,
    pub se: f64,
    pub pass: bool,
}

impl MoveFrequency {
    fn new(count: u64, total: u64, expected: f64) -> Self {
        let frequency = count as f64 / total as f64;
        let se = (expected * (1.0 - expected) / total as f64).sqrt();
        MoveFrequency {
            count,
            frequency,
            expected,
            se,
            pass: (frequency - expected).abs() <= LAZY_BAND_SE * se,
        }
    }
}

/// Length moves of the symmetric chain, from `|W| >= 1` and from `|W| = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LazyWalkReport {
    #[serde(rename = "N")]
    pub n_windows: usize,
    pub n_steps: u64,
    pub seed: u64,
    pub up: MoveFrequency,
    pub stay: MoveFrequency,
    pub down: MoveFrequency,
    pub from_unit_total: u64,
    pub from_unit_up: u64,
    pub pass: bool,
}

/// One path of `n_steps` from `e_1`, tallying how `|W|` moves.
pub fn verify_lazy_walk<T: Scalar>(
    kernel: &TransitionKernel<T>,
    n_steps: u64,
    seed: u64,
) -> Result<LazyWalkReport, McError> {
    let n = kernel.n_windows();
    let uniform = T::one() / T::of(2.0 * (n as f64 - 1.0));
    if kernel
        .probs()
        .iter()
        .any(|&p| (p - uniform).abs() > T::of(1e-12))
    {
        return Err(McError::NotSymmetric);
    }
    let metric = Metric::word();
    let mut w = Walker::new(ReducedWord::unit(1), kernel, &metric, path_rng(seed, 0));
    let (mut up, mut stay, mut down, mut unit_total, mut unit_up) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for _ in 0..n_steps {
        let before = w.word_len();
        let delta = w.step().length_delta();
        if before == 0 {
            unit_total += 1;
            unit_up += u64::from(delta == 1);
        } else {
            match delta {
                1 => up += 1,
                0 => stay += 1,
                _ => down += 1,
            }
        }
    }
    let total = up + stay + down;
    let d = 2.0 * (n as f64 - 1.0);
    let up = MoveFrequency::new(up, total, (n as f64 - 1.0) / d);
    let stay = MoveFrequency::new(stay, total, (n as f64 - 2.0) / d);
    let down = MoveFrequency::new(down, total, 1.0 / d);
    let pass = up.pass && stay.pass && down.pass && unit_up == unit_total;
    Ok(LazyWalkReport {
        n_windows: n,
        n_steps,
        seed,
        up,
        stay,
        down,
        from_unit_total: unit_total,
        from_unit_up: unit_up,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_band_brackets_sigma2() {
        let (lo, hi) = chi_square_band(2.0, 1000, 0.99);
        assert!(lo < 2.0 && hi > 2.0);
        // normal approximation: ±2.576 √(2/999)
        assert!((hi / 2.0 - 1.0 - 2.576 * (2.0f64 / 999.0).sqrt()).abs() < 0.01);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let sample: Vec<f64> = (0..1000)
            .map(|i| normal.inverse_cdf((i as f64 + 0.5) / 1000.0))
            .collect();
        assert!((ks_distance(&sample, 1.0).unwrap() - 0.0005).abs() < 1e-9);
        assert!(ks_distance(&sample, 0.0).is_err());
    }

    #[test]
    fn preconditions() {
        let k = TransitionKernel::<f64>::symmetric(3).unwrap();
        let m = Metric::word();
        assert_eq!(
            verify_lln(&k, &m, 0.25, None, 999, 50, 1).unwrap_err(),
            McError::TooFewSteps {
                min: 1000,
                got: 999
            }
        );
        assert_eq!(
            verify_clt(&k, &m, 0.25, 0.6875, 10_000, 10, 1).unwrap_err(),
            McError::TooFewPaths { min: 1000, got: 10 }
        );
        assert!(verify_lazy_walk(&TransitionKernel::<f64>::asymmetric(), 10, 1).is_err());
    }

    #[test]
    fn paths_do_not_depend_on_thread_count() {
        let k = TransitionKernel::<f64>::asymmetric();
        let m = Metric::fenced();
        let start = ReducedWord::unit(1);
        let a = run_paths(&k, &m, &start, 500, 16, 9, 0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_paths(&k, &m, &start, 500, 16, 9, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn lazy_walk_first_step_goes_up() {
        let k = TransitionKernel::<f64>::symmetric(4).unwrap();
        let r = verify_lazy_walk(&k, 1, 3).unwrap();
        assert_eq!((r.from_unit_total, r.from_unit_up), (1, 1));
    }
}
