//! Truncated generating functions by exact dynamic programming.
//!
//! Two engines compute the same coefficients:
//!
//! * [`DpEngine::WordSpace`] propagates the exact law of `W_m` over reduced
//!   words. Exponential in `M`; guarded by a state cap.
//! * [`DpEngine::FirstPassage`] works on coefficient sequences. Splitting on
//!   the first step gives, for `ℓ = (i,j,k)`,
//!
//!   ```text
//!   t_ℓ(m) = p_ℓ [m = 1] + Σ_{m'≠i,j} p(i,m',k) t_{(m',j,k)}(m-1)
//!          + Σ_a h_{i,-k}(a) t_ℓ(m-1-a),
//!   h_{i,s}(a) = Σ_{m'≠i} p(i,m',s) t_{(m',i,s)}(a),
//!   ```
//!
//!   return probabilities follow from `S = 1/(1-U)` with
//!   `U = λ Σ_{j,k} p(i,j,k) R_{(j,i,k)}`, and
//!   `Σ_n λ^n P(W_n = w) = S_{target(w)} Π_{g ∈ w} R_g`. Polynomial in `M`.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::groupoid::{Generator, Metric, ReducedWord, Sign};
use crate::kernel::TransitionKernel;
use crate::scalar::Scalar;

pub const DEFAULT_STATE_CAP: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("reachable-word count {states} exceeds the cap {cap} at step {step}")]
    StateCap {
        cap: usize,
        states: usize,
        step: usize,
    },
    #[error("max_steps must be at least {min}, got {got}")]
    TooFewSteps { min: usize, got: usize },
    #[error("lambda must lie in [0, 1), got {0}")]
    InvalidLambda(f64),
    #[error("z must lie in (0, 1], got {0}")]
    InvalidZ(f64),
    #[error("window {window} outside 1..={n}")]
    BadWindow { window: usize, n: usize },
    #[error("generator {0} not in the kernel")]
    BadGenerator(Generator),
    #[error("{0}")]
    OutOfRange(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpEngine {
    WordSpace,
    #[default]
    FirstPassage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOptions {
    pub engine: DpEngine,
    pub state_cap: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            engine: DpEngine::default(),
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

impl DpOptions {
    pub fn word_space(state_cap: usize) -> Self {
        DpOptions {
            engine: DpEngine::WordSpace,
            state_cap,
        }
    }
}

/// Coefficients `c_0..c_M` of a truncated power series in `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSeries {
    pub coeffs: Vec<f64>,
}

impl TruncatedSeries {
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Σ_{m≤M} c_m λ^m` by Horner.
    pub fn eval(&self, lambda: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * lambda + c)
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Partial masses `Σ_{m≤M'} c_m` for every `M' ≤ M`.
    pub fn cumulative(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .scan(0.0, |s, &c| {
                *s += c;
                Some(*s)
            })
            .collect()
    }

    /// Bound on the omitted tail `Σ_{m>M} c_m λ^m` when `c_m <= 1`.
    pub fn tail_bound(&self, lambda: f64) -> f64 {
        lambda.powi(self.truncation() as i32 + 1) / (1.0 - lambda)
    }

    /// Least-squares slope of `ln c_m` over `m ∈ [from, to]`, skipping zeros.
    pub fn log_decay_rate(&self, from: usize, to: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = (from..=to.min(self.truncation()))
            .filter(|&m| self.coeffs[m] > 0.0)
            .map(|m| (m as f64, self.coeffs[m].ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// Outgoing moves per window as `(generator, probability)`.
fn rows<T: Scalar>(kernel: &TransitionKernel<T>) -> Vec<Vec<(Generator, f64)>> {
    let n = kernel.n_windows();
    let mut out = vec![Vec::new(); n + 1];
    for (g, &p) in Generator::all(n).zip(kernel.probs()) {
        out[g.from()].push((g, p.to_f64_lossy()));
    }
    out
}

fn f64_probs<T: Scalar>(kernel: &TransitionKernel<T>) -> Vec<f64> {
    kernel.probs().iter().map(|p| p.to_f64_lossy()).collect()
}

fn check_window(window: usize, n: usize) -> Result<(), OracleError> {
    if (1..=n).contains(&window) {
        Ok(())
    } else {
        Err(OracleError::BadWindow { window, n })
    }
}

/// One step of the word-space law. `keep` decides which successor words
/// survive; `absorb` collects mass that is removed instead.
fn word_step(
    dist: &HashMap<ReducedWord, f64>,
    rows: &[Vec<(Generator, f64)>],
    mut absorb: impl FnMut(&ReducedWord, f64) -> bool,
    keep: impl Fn(&ReducedWord) -> bool,
) -> HashMap<ReducedWord, f64> {
    let mut next: HashMap<ReducedWord, f64> = HashMap::with_capacity(dist.len() * 2);
    for (w, &mass) in dist {
        for &(g, p) in &rows[w.target()] {
            let w2 = w.append(g).expect("move starts at the word's target");
            let m = mass * p;
            if absorb(&w2, m) || !keep(&w2) {
                continue;
            }
            *next.entry(w2).or_insert(0.0) += m;
        }
    }
    next
}

fn cap_check(len: usize, cap: usize, step: usize) -> Result<(), OracleError> {
    if len > cap {
        Err(OracleError::StateCap {
            cap,
            states: len,
            step,
        })
    } else {
        Ok(())
    }
}

fn word_hitting(
    rows: &[Vec<(Generator, f64)>],
    target: Generator,
    max_steps: usize,
    cap: usize,
) -> Result<TruncatedSeries, OracleError> {
    let goal = ReducedWord::from(target);
    let mut coeffs = vec![0.0; max_steps + 1];
    let mut dist = HashMap::from([(ReducedWord::unit(target.from()), 1.0)]);
    for step in 1..=max_steps {
        let remaining = max_steps - step;
        let mut hit = 0.0;
        dist = word_step(
            &dist,
            rows,
            |w, m| {
                let done = *w == goal;
                if done {
                    hit += m;
                }
                done
            },
            // reaching a one-letter word takes at least len - 1 more steps
            |w| w.len() <= remaining + 1,
        );
        coeffs[step] = hit;
        cap_check(dist.len(), cap, step)?;
    }
    Ok(TruncatedSeries { coeffs })
}

fn word_return(
    rows: &[Vec<(Generator, f64)>],
    window: usize,
    max_steps: usize,
    cap: usize,
) -> Result<TruncatedSeries, OracleError> {
    let home = ReducedWord::unit(window);
    let mut coeffs = vec![0.0; max_steps + 1];
    coeffs[0] = 1.0;
    let mut dist = HashMap::from([(home.clone(), 1.0)]);
    for step in 1..=max_steps {
        let remaining = max_steps - step;
        dist = word_step(&dist, rows, |_, _| false, |w| w.len() <= remaining);
        coeffs[step] = dist.get(&home).copied().unwrap_or(0.0);
        cap_check(dist.len(), cap, step)?;
    }
    Ok(TruncatedSeries { coeffs })
}

fn word_g<T: Scalar>(
    rows: &[Vec<(Generator, f64)>],
    metric: &Metric<T>,
    window: usize,
    z: f64,
    max_steps: usize,
    cap: usize,
) -> Result<Vec<f64>, OracleError> {
    let mut out = Vec::with_capacity(max_steps + 1);
    let mut dist = HashMap::from([(ReducedWord::unit(window), 1.0)]);
    out.push(1.0);
    for step in 1..=max_steps {
        dist = word_step(&dist, rows, |_, _| false, |_| true);
        cap_check(dist.len(), cap, step)?;
        out.push(
            dist.iter()
                .map(|(w, &m)| m * z.powf(w.metric_length(metric).to_f64_lossy()))
                .sum(),
        );
    }
    Ok(out)
}

/// Truncated product of two series with `c_0..c_M` kept.
fn series_mul(a: &[f64], b: &[f64], max: usize) -> Vec<f64> {
    let mut out = vec![0.0; max + 1];
    for (i, &x) in a.iter().enumerate().take(max + 1) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(max + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// First-passage coefficients `t_ℓ(0..=M)` for every generator `ℓ`, in
/// canonical generator order.
pub fn first_passage_coefficients<T: Scalar>(
    kernel: &TransitionKernel<T>,
    max_steps: usize,
) -> Vec<Vec<f64>> {
    let n = kernel.n_windows();
    let dim = kernel.dim();
    let probs = f64_probs(kernel);
    let gens: Vec<Generator> = Generator::all(n).collect();
    let ix = |from: usize, to: usize, s: Sign| {
        Generator::new(from, to, s)
            .expect("valid")
            .index(n)
            .expect("in range")
    };
    let mut t = vec![vec![0.0; max_steps + 1]; dim];
    // h[s.block() * n + i - 1][a]
    let mut h = vec![vec![0.0; max_steps + 1]; 2 * n];
    for m in 1..=max_steps {
        let mut fresh = vec![0.0; dim];
        for (l, g) in gens.iter().enumerate() {
            let (i, j, k) = (g.from(), g.to(), g.sign());
            let mut v = if m == 1 { probs[l] } else { 0.0 };
            if m >= 2 {
                for mid in (1..=n).filter(|&w| w != i && w != j) {
                    v += probs[ix(i, mid, k)] * t[ix(mid, j, k)][m - 1];
                }
                let hk = &h[k.flip().block() * n + i - 1];
                for a in 1..=m - 2 {
                    v += hk[a] * t[l][m - 1 - a];
                }
            }
            fresh[l] = v;
        }
        for (l, v) in fresh.into_iter().enumerate() {
            t[l][m] = v;
        }
        for s in Sign::BOTH {
            for i in 1..=n {
                h[s.block() * n + i - 1][m] = (1..=n)
                    .filter(|&w| w != i)
                    .map(|w| probs[ix(i, w, s)] * t[ix(w, i, s)][m])
                    .sum();
            }
        }
    }
    t
}

/// Return coefficients `P_{e_i}(W_m = e_i)` for every window, from the
/// first-passage table.
fn return_from_first_passage<T: Scalar>(
    kernel: &TransitionKernel<T>,
    t: &[Vec<f64>],
    max_steps: usize,
) -> Vec<Vec<f64>> {
    let n = kernel.n_windows();
    (1..=n)
        .map(|i| {
            let mut u = vec![0.0; max_steps + 1];
            for g in Generator::all(n).filter(|g| g.from() == i) {
                let p = kernel.p(&g).to_f64_lossy();
                let back = &t[g.reversed().index(n).expect("in range")];
                for m in 2..=max_steps {
                    u[m] += p * back[m - 1];
                }
            }
            let mut s = vec![0.0; max_steps + 1];
            s[0] = 1.0;
            for m in 1..=max_steps {
                s[m] = (1..=m).map(|a| u[a] * s[m - a]).sum();
            }
            s
        })
        .collect()
}

fn first_passage_g<T: Scalar>(
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    window: usize,
    z: f64,
    max_steps: usize,
) -> Vec<f64> {
    let n = kernel.n_windows();
    let t = first_passage_coefficients(kernel, max_steps);
    let s = return_from_first_passage(kernel, &t, max_steps);
    // weighted first-passage series z^{w(g)} R_g
    let weighted: Vec<Vec<f64>> = Generator::all(n)
        .zip(&t)
        .map(|(g, c)| {
            let zw = z.powf(metric.weight(&g).to_f64_lossy());
            c.iter().map(|&x| x * zw).collect()
        })
        .collect();
    let mut total = s[window - 1].clone();
    // v[(s.block(), x)]: words from e_window of the current length ending at x with last sign s
    let mut v: Vec<Option<Vec<f64>>> = vec![None; 2 * (n + 1)];
    for g in Generator::all(n).filter(|g| g.from() == window) {
        v[g.sign().block() * (n + 1) + g.to()] =
            Some(weighted[g.index(n).expect("in range")].clone());
    }
    for _len in 1..=max_steps {
        let mut next: Vec<Option<Vec<f64>>> = vec![None; 2 * (n + 1)];
        let mut any = false;
        for sign in Sign::BOTH {
            for x in 1..=n {
                let Some(series) = &v[sign.block() * (n + 1) + x] else {
                    continue;
                };
                if series.iter().all(|&c| c == 0.0) {
                    continue;
                }
                any = true;
                let contrib = series_mul(series, &s[x - 1], max_steps);
                total.iter_mut().zip(&contrib).for_each(|(a, b)| *a += b);
                let flip = sign.flip();
                for y in (1..=n).filter(|&y| y != x) {
                    let g = Generator::new(x, y, flip).expect("valid");
                    let ext =
                        series_mul(series, &weighted[g.index(n).expect("in range")], max_steps);
                    let slot = &mut next[flip.block() * (n + 1) + y];
                    match slot {
                        Some(acc) => acc.iter_mut().zip(&ext).for_each(|(a, b)| *a += b),
                        None => *slot = Some(ext),
                    }
                }
            }
        }
        if !any {
            break;
        }
        v = next;
    }
    total
}

/// `c_m = P(T = m)`, `T` the first time the walk from `e_{target.from}` is
/// the one-letter word `target`.
pub fn dp_hitting_series<T: Scalar>(
    kernel: &TransitionKernel<T>,
    target: Generator,
    max_steps: usize,
    opts: &DpOptions,
) -> Result<TruncatedSeries, OracleError> {
    if max_steps < 1 {
        return Err(OracleError::TooFewSteps {
            min: 1,
            got: max_steps,
        });
    }
    let n = kernel.n_windows();
    let idx = target.index(n).ok_or(OracleError::BadGenerator(target))?;
    match opts.engine {
        DpEngine::WordSpace => word_hitting(&rows(kernel), target, max_steps, opts.state_cap),
        DpEngine::FirstPassage => {
            let mut t = first_passage_coefficients(kernel, max_steps);
            Ok(TruncatedSeries {
                coeffs: t.swap_remove(idx),
            })
        }
    }
}

/// Hitting series for every generator at once, in canonical order.
pub fn dp_hitting_series_all<T: Scalar>(
    kernel: &TransitionKernel<T>,
    max_steps: usize,
    opts: &DpOptions,
) -> Result<Vec<TruncatedSeries>, OracleError> {
    match opts.engine {
        DpEngine::FirstPassage => {
            if max_steps < 1 {
                return Err(OracleError::TooFewSteps {
                    min: 1,
                    got: max_steps,
                });
            }
            Ok(first_passage_coefficients(kernel, max_steps)
                .into_iter()
                .map(|coeffs| TruncatedSeries { coeffs })
                .collect())
        }
        DpEngine::WordSpace => Generator::all(kernel.n_windows())
            .map(|g| dp_hitting_series(kernel, g, max_steps, opts))
            .collect(),
    }
}

/// `c_m = P_{e_i}(W_m = e_i)`.
pub fn dp_return_series<T: Scalar>(
    kernel: &TransitionKernel<T>,
    window: usize,
    max_steps: usize,
    opts: &DpOptions,
) -> Result<TruncatedSeries, OracleError> {
    if max_steps < 1 {
        return Err(OracleError::TooFewSteps {
            min: 1,
            got: max_steps,
        });
    }
    check_window(window, kernel.n_windows())?;
    match opts.engine {
        DpEngine::WordSpace => word_return(&rows(kernel), window, max_steps, opts.state_cap),
        DpEngine::FirstPassage => {
            let t = first_passage_coefficients(kernel, max_steps);
            let mut s = return_from_first_passage(kernel, &t, max_steps);
            Ok(TruncatedSeries {
                coeffs: s.swap_remove(window - 1),
            })
        }
    }
}

/// `E[z^{|W_n|}]` for `n = 0..=M` from `W_0 = e_i`.
pub fn dp_g_coefficients<T: Scalar>(
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    window: usize,
    z: f64,
    max_steps: usize,
    opts: &DpOptions,
) -> Result<Vec<f64>, OracleError> {
    check_window(window, kernel.n_windows())?;
    if !(z > 0.0 && z <= 1.0) {
        return Err(OracleError::InvalidZ(z));
    }
    match opts.engine {
        DpEngine::WordSpace => word_g(&rows(kernel), metric, window, z, max_steps, opts.state_cap),
        DpEngine::FirstPassage => Ok(first_passage_g(kernel, metric, window, z, max_steps)),
    }
}

/// `Σ_{n≤M} λ^n E[z^{|W_n|}]` from `W_0 = e_i`.
#[allow(clippy::too_many_arguments)]
pub fn dp_truncated_g<T: Scalar>(
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    window: usize,
    lambda: f64,
    z: f64,
    max_steps: usize,
    opts: &DpOptions,
) -> Result<f64, OracleError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(OracleError::InvalidLambda(lambda));
    }
    let c = dp_g_coefficients(kernel, metric, window, z, max_steps, opts)?;
    Ok(c.iter().rev().fold(0.0, |acc, &x| acc * lambda + x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DpKind {
    Hitting,
    Return,
    TruncatedG,
}

/// JSON form of a DP run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpReport {
    pub kind: DpKind,
    pub engine: DpEngine,
    pub truncation: usize,
    pub coeffs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}
