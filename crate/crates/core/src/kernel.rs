//! Transition kernels: the `2N(N-1)` jump probabilities `p(i,j,k)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groupoid::{Generator, Sign};
use crate::scalar::Scalar;

/// Row sums must equal one within this tolerance (for `f64`).
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// One violated constraint found by [`validate_kernel`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    TooFewWindows {
        n: usize,
    },
    BadIndex {
        i: usize,
        j: usize,
        k: i64,
    },
    Duplicate {
        i: usize,
        j: usize,
        k: i64,
    },
    Missing {
        i: usize,
        j: usize,
        k: i64,
    },
    OutOfRange {
        i: usize,
        j: usize,
        k: i64,
        value: f64,
    },
    RowSum {
        window: usize,
        sum: f64,
        deficit: f64,
    },
    FamilyParameter {
        family: &'static str,
        message: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewWindows { n } => write!(f, "need N >= 3 windows, got N = {n}"),
            Violation::BadIndex { i, j, k } => {
                write!(f, "entry ({i},{j},{k}) is not a generator of this kernel")
            }
            Violation::Duplicate { i, j, k } => {
                write!(f, "entry ({i},{j},{k}) given more than once")
            }
            Violation::Missing { i, j, k } => write!(f, "entry ({i},{j},{k}) missing"),
            Violation::OutOfRange { i, j, k, value } => {
                write!(
                    f,
                    "p({i},{j},{k}) = {value} is not in the open interval (0, 1)"
                )
            }
            Violation::RowSum {
                window,
                sum,
                deficit,
            } => {
                write!(
                    f,
                    "probabilities out of window {window} sum to {sum} (deficit {deficit:.3e})"
                )
            }
            Violation::FamilyParameter { family, message } => write!(f, "{family}: {message}"),
        }
    }
}

/// Every violation found, in discovery order.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("invalid kernel: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct KernelReport {
    pub violations: Vec<Violation>,
}

impl KernelReport {
    fn single(v: Violation) -> Self {
        KernelReport {
            violations: vec![v],
        }
    }
}

/// Named kernel families with closed-form reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `p = 1/(2N-2)` everywhere.
    Symmetric {
        n: usize,
    },
    /// The left-right/up-down symmetric three-window family.
    OneParameter {
        q: f64,
    },
    /// The fixed asymmetric three-window example.
    Asymmetric,
    Explicit,
}

/// One `(i, j, k, value)` record as it appears in kernel JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub i: usize,
    pub j: usize,
    pub k: i64,
    pub value: f64,
}

/// Unvalidated kernel data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawKernel {
    #[serde(rename = "N")]
    pub n_windows: usize,
    pub p: Vec<KernelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricSpec {
    #[serde(rename = "N")]
    pub n_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneParameterSpec {
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymmetricSpec {}

/// Kernel configuration as accepted in JSON documents:
///
/// ```json
/// { "N": 3, "p": [ { "i": 1, "j": 2, "k": 1, "value": 0.25 }, ... ] }
/// { "symmetric": { "N": 4 } }
/// { "one_parameter_q": { "q": 0.1 } }
/// { "asymmetric": {} }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSpec {
    Explicit(RawKernel),
    Symmetric { symmetric: SymmetricSpec },
    OneParameter { one_parameter_q: OneParameterSpec },
    Asymmetric { asymmetric: AsymmetricSpec },
}

impl KernelSpec {
    pub fn build<T: Scalar>(&self) -> Result<TransitionKernel<T>, KernelReport> {
        match self {
            KernelSpec::Explicit(raw) => validate_kernel(raw),
            KernelSpec::Symmetric { symmetric } => TransitionKernel::symmetric(symmetric.n_windows),
            KernelSpec::OneParameter { one_parameter_q } => {
                TransitionKernel::one_parameter(T::of(one_parameter_q.q))
            }
            KernelSpec::Asymmetric { .. } => Ok(TransitionKernel::asymmetric()),
        }
    }
}

/// A validated kernel. Immutable; carries a per-window cumulative table for
/// sampling the next generator.
#[derive(Debug, Clone)]
pub struct TransitionKernel<T> {
    n_windows: usize,
    probs: Vec<T>,
    family: KernelFamily,
    sampling: Vec<Vec<(f64, Generator)>>,
}

fn row_tolerance<T: Scalar>() -> T {
    T::of(ROW_SUM_TOLERANCE).max(T::epsilon() * T::of(16.0))
}

/// Validates raw kernel data, collecting every violated constraint.
pub fn validate_kernel<T: Scalar>(raw: &RawKernel) -> Result<TransitionKernel<T>, KernelReport> {
    let n = raw.n_windows;
    if n < 3 {
        return Err(KernelReport::single(Violation::TooFewWindows { n }));
    }
    let mut violations = Vec::new();
    let mut probs: Vec<Option<T>> = vec![None; Generator::count(n)];
    for e in &raw.p {
        let idx = Sign::try_from(e.k)
            .ok()
            .and_then(|s| Generator::new(e.i, e.j, s).ok())
            .and_then(|g| g.index(n));
        match idx {
            None => violations.push(Violation::BadIndex {
                i: e.i,
                j: e.j,
                k: e.k,
            }),
            Some(idx) if probs[idx].is_some() => violations.push(Violation::Duplicate {
                i: e.i,
                j: e.j,
                k: e.k,
            }),
            Some(idx) => probs[idx] = Some(T::of(e.value)),
        }
    }
    for (idx, p) in probs.iter().enumerate() {
        if p.is_none() {
            let g = Generator::from_index(idx, n);
            violations.push(Violation::Missing {
                i: g.from(),
                j: g.to(),
                k: g.sign().value(),
            });
        }
    }
    if !violations.is_empty() {
        return Err(KernelReport { violations });
    }
    let probs: Vec<T> = probs.into_iter().map(|p| p.expect("checked")).collect();
    TransitionKernel::from_probs(n, probs, KernelFamily::Explicit)
}

impl<T: Scalar> TransitionKernel<T> {
    /// Builds and validates a kernel from probabilities in canonical generator order.
    pub fn from_probs(
        n_windows: usize,
        probs: Vec<T>,
        family: KernelFamily,
    ) -> Result<Self, KernelReport> {
        let n = n_windows;
        if n < 3 {
            return Err(KernelReport::single(Violation::TooFewWindows { n }));
        }
        assert_eq!(
            probs.len(),
            Generator::count(n),
            "probability vector length"
        );
        let mut violations = Vec::new();
        for (idx, &p) in probs.iter().enumerate() {
            if !(p > T::zero() && p < T::one()) {
                let g = Generator::from_index(idx, n);
                violations.push(Violation::OutOfRange {
                    i: g.from(),
                    j: g.to(),
                    k: g.sign().value(),
                    value: p.to_f64_lossy(),
                });
            }
        }
        let tol = row_tolerance::<T>();
        for window in 1..=n {
            let sum: T = Generator::all(n)
                .enumerate()
                .filter(|(_, g)| g.from() == window)
                .map(|(idx, _)| probs[idx])
                .sum();
            if !((sum - T::one()).abs() <= tol) {
                violations.push(Violation::RowSum {
                    window,
                    sum: sum.to_f64_lossy(),
                    deficit: (T::one() - sum).to_f64_lossy(),
                });
            }
        }
        if !violations.is_empty() {
            return Err(KernelReport { violations });
        }
        let mut sampling: Vec<Vec<(f64, Generator)>> = vec![Vec::with_capacity(2 * (n - 1)); n];
        for (idx, g) in Generator::all(n).enumerate() {
            let row = &mut sampling[g.from() - 1];
            let acc = row.last().map_or(0.0, |(c, _)| *c);
            row.push((acc + probs[idx].to_f64_lossy(), g));
        }
        Ok(TransitionKernel {
            n_windows: n,
            probs,
            family,
            sampling,
        })
    }

    /// `p(i,j,k) = 1/(2N-2)` for every generator.
    pub fn symmetric(n_windows: usize) -> Result<Self, KernelReport> {
        if n_windows < 3 {
            return Err(KernelReport::single(Violation::TooFewWindows {
                n: n_windows,
            }));
        }
        let p = T::one() / T::of((2 * n_windows - 2) as f64);
        Self::from_probs(
            n_windows,
            vec![p; Generator::count(n_windows)],
            KernelFamily::Symmetric { n: n_windows },
        )
    }

    /// Three windows, mirror symmetric: the middle window jumps to either
    /// side with 1/4 per half-plane, the outer windows jump to the middle
    /// with `q` and across with `1/2 - q`. Requires `0 < q < 1/2`.
    pub fn one_parameter(q: T) -> Result<Self, KernelReport> {
        let half = T::of(0.5);
        if !(q > T::zero() && q < half) {
            return Err(KernelReport::single(Violation::FamilyParameter {
                family: "one_parameter_q",
                message: format!("q = {q} must lie in (0, 1/2)"),
            }));
        }
        let quarter = T::of(0.25);
        let probs = Generator::all(3)
            .map(|g| match (g.from(), g.to()) {
                (2, _) => quarter,
                (_, 2) => q,
                _ => half - q,
            })
            .collect();
        Self::from_probs(
            3,
            probs,
            KernelFamily::OneParameter {
                q: q.to_f64_lossy(),
            },
        )
    }

    /// The fixed asymmetric three-window example kernel.
    pub fn asymmetric() -> Self {
        let frac = |a: f64, b: f64| T::of(a) / T::of(b);
        let probs = Generator::all(3)
            .map(|g| match (g.from(), g.to(), g.sign().value()) {
                (2, 1, 1) => frac(17.0, 40.0),
                (2, 3, 1) => frac(1.0, 5.0),
                (2, 1, -1) => frac(1.0, 8.0),
                (2, 3, -1) => frac(1.0, 4.0),
                (1, 2, 1) => frac(43.0, 70.0),
                (3, 2, 1) => frac(43.0, 72.0),
                (1, 2, -1) => frac(1.0, 7.0),
                (3, 2, -1) => frac(1.0, 8.0),
                (1, 3, 1) => frac(1.0, 10.0),
                (3, 1, 1) => frac(1.0, 9.0),
                (1, 3, -1) => frac(1.0, 7.0),
                (3, 1, -1) => frac(1.0, 6.0),
                _ => unreachable!("three windows"),
            })
            .collect();
        Self::from_probs(3, probs, KernelFamily::Asymmetric)
            .expect("asymmetric example kernel is valid")
    }

    pub fn n_windows(&self) -> usize {
        self.n_windows
    }

    /// Number of generators, `2N(N-1)`.
    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Probabilities in canonical generator order.
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// `p(g)`; zero for generators outside this kernel.
    pub fn p(&self, g: &Generator) -> T {
        g.index(self.n_windows)
            .map_or(T::zero(), |idx| self.probs[idx])
    }

    /// `p(from, to, sign)` with `p(i,i,k) = 0`.
    pub fn prob(&self, from: usize, to: usize, sign: Sign) -> T {
        Generator::new(from, to, sign).map_or(T::zero(), |g| self.p(&g))
    }

    /// Cumulative sampling table for jumps out of `window`.
    pub fn sampling_row(&self, window: usize) -> &[(f64, Generator)] {
        &self.sampling[window - 1]
    }

    /// Selects the generator out of `window` for a uniform draw `u` in `[0,1)`.
    pub fn select(&self, window: usize, u: f64) -> Generator {
        let row = self.sampling_row(window);
        let total = row.last().expect("non-empty row").0;
        let x = u * total;
        let pos = row.partition_point(|(c, _)| *c <= x);
        row[pos.min(row.len() - 1)].1
    }

    pub fn to_raw(&self) -> RawKernel {
        RawKernel {
            n_windows: self.n_windows,
            p: Generator::all(self.n_windows)
                .zip(&self.probs)
                .map(|(g, &p)| KernelEntry {
                    i: g.from(),
                    j: g.to(),
                    k: g.sign().value(),
                    value: p.to_f64_lossy(),
                })
                .collect(),
        }
    }
}
