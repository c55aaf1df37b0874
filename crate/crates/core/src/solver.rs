//! First-passage generating functions `R(i,j,k)(λ)`: the minimal solution of
//! the coupled quadratic system
//!
//! ```text
//! R(i,j,k) = λ [ p(i,j,k) + Σ_{m≠i,j} p(i,m,k) R(m,j,k)
//!                          + Σ_{m≠i}   p(i,m,-k) R(m,i,-k) R(i,j,k) ]
//! ```
//!
//! and its first two λ-derivatives by implicit differentiation.
//!
//! Vectors are indexed in canonical generator order (see
//! [`Generator::index`]).

use serde::Serialize;
use thiserror::Error;

use crate::groupoid::{Generator, Sign};
use crate::kernel::TransitionKernel;
use crate::linalg::{self, LinalgError, Matrix, PerronEstimate};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("lambda = {0} outside [0, 1]")]
    InvalidLambda(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },
    #[error("derivatives need lambda > 0")]
    ZeroLambda,
    #[error("derivative system is singular: {0}")]
    Singular(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<T> {
    /// Stop once the max-norm update falls below this.
    pub tol: T,
    pub max_iter: usize,
    /// Refine the fixed point with Newton steps; a step is kept only if it
    /// stays inside `(0,1)` and lowers the residual.
    pub newton_polish: bool,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            tol: T::default_tolerance(),
            max_iter: DEFAULT_MAX_ITER,
            newton_polish: false,
        }
    }
}

/// Converged `R(i,j,k)(λ)` values.
#[derive(Debug, Clone, PartialEq)]
pub struct RVector<T> {
    pub lambda: T,
    pub n_windows: usize,
    pub values: Vec<T>,
    /// Max-norm fixed-point defect `|f(R) - R|`.
    pub residual: T,
    pub iterations: usize,
}

impl<T: Scalar> RVector<T> {
    pub fn get(&self, g: &Generator) -> T {
        self.values[g.index(self.n_windows).expect("generator within kernel")]
    }

    pub fn at(&self, from: usize, to: usize, sign: Sign) -> T {
        self.get(&Generator::new(from, to, sign).expect("valid generator"))
    }
}

/// First and second λ-derivatives of `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct RDerivatives<T> {
    pub d1: Vec<T>,
    pub d2: Vec<T>,
}

/// The Jacobian `M(λ) = λ ∂F/∂q` at the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSystem<T> {
    pub lambda: T,
    pub m: Matrix<T>,
}

fn ix(n: usize, from: usize, to: usize, sign: Sign) -> usize {
    Generator::new(from, to, sign)
        .expect("valid generator")
        .index(n)
        .expect("within kernel")
}

/// `ret[(i, s)] = Σ_{m≠i} p(i,m,s) q(m,i,s)`, indexed `s.block() * n + (i-1)`.
fn return_terms<T: Scalar>(kernel: &TransitionKernel<T>, q: &[T]) -> Vec<T> {
    let n = kernel.n_windows();
    let mut out = vec![T::zero(); 2 * n];
    for s in Sign::BOTH {
        for i in 1..=n {
            out[s.block() * n + i - 1] = (1..=n)
                .filter(|&m| m != i)
                .map(|m| kernel.prob(i, m, s) * q[ix(n, m, i, s)])
                .sum();
        }
    }
    out
}

/// The bracketed map `F(q)` so that the fixed-point map is `f(q, λ) = λ F(q)`.
pub fn bracket<T: Scalar>(kernel: &TransitionKernel<T>, q: &[T]) -> Vec<T> {
    let n = kernel.n_windows();
    let ret = return_terms(kernel, q);
    Generator::all(n)
        .enumerate()
        .map(|(l, g)| {
            let (i, j, k) = (g.from(), g.to(), g.sign());
            let through: T = (1..=n)
                .filter(|&m| m != i && m != j)
                .map(|m| kernel.prob(i, m, k) * q[ix(n, m, j, k)])
                .sum();
            kernel.probs()[l] + through + ret[k.flip().block() * n + i - 1] * q[l]
        })
        .collect()
}

/// The fixed-point map `f(q, λ)`.
pub fn fixed_point_map<T: Scalar>(kernel: &TransitionKernel<T>, q: &[T], lambda: T) -> Vec<T> {
    bracket(kernel, q).into_iter().map(|x| lambda * x).collect()
}

fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// Solves for the minimal fixed point by the monotone iteration
/// `a_0 = f(0, λ)`, `a_{n+1} = f(a_n, λ)`.
pub fn solve_r<T: Scalar>(
    kernel: &TransitionKernel<T>,
    lambda: T,
    opts: &SolveOptions<T>,
) -> Result<RVector<T>, SolverError> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(SolverError::InvalidLambda(lambda.to_f64_lossy()));
    }
    if !(opts.tol > T::zero()) {
        return Err(SolverError::InvalidTolerance(opts.tol.to_f64_lossy()));
    }
    let zero = vec![T::zero(); kernel.dim()];
    let mut a = fixed_point_map(kernel, &zero, lambda);
    let mut last_update = T::infinity();
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let next = fixed_point_map(kernel, &a, lambda);
        last_update = max_abs_diff(&next, &a);
        a = next;
        iterations += 1;
        if last_update < opts.tol {
            break;
        }
    }
    if !(last_update < opts.tol) {
        return Err(SolverError::NoConvergence {
            iterations,
            last_update: last_update.to_f64_lossy(),
        });
    }
    let mut residual = max_abs_diff(&fixed_point_map(kernel, &a, lambda), &a);
    if opts.newton_polish && lambda > T::zero() {
        for _ in 0..3 {
            let Some((polished, r)) = newton_step(kernel, &a, lambda) else {
                break;
            };
            if r < residual {
                a = polished;
                residual = r;
            } else {
                break;
            }
        }
    }
    Ok(RVector {
        lambda,
        n_windows: kernel.n_windows(),
        values: a,
        residual,
        iterations,
    })
}

fn newton_step<T: Scalar>(kernel: &TransitionKernel<T>, a: &[T], lambda: T) -> Option<(Vec<T>, T)> {
    let defect: Vec<T> = fixed_point_map(kernel, a, lambda)
        .iter()
        .zip(a)
        .map(|(&f, &x)| f - x)
        .collect();
    let jac = m_matrix_for_values(kernel, lambda, a);
    let delta = jac.identity_minus().solve(&defect).ok()?;
    let next: Vec<T> = a.iter().zip(&delta).map(|(&x, &d)| x + d).collect();
    if next.iter().any(|&x| !(x > T::zero() && x < T::one())) {
        return None;
    }
    let r = max_abs_diff(&fixed_point_map(kernel, &next, lambda), &next);
    Some((next, r))
}

/// `M(λ)` evaluated at arbitrary values `q` in place of `R(λ)`.
///
/// Row `(i,j,k)` has `λ p(i,i',k)` in column `(i',j,k)` for `i' ∉ {i,j}`,
/// `λ p(i,i',-k) q(i,j,k)` in column `(i',i,-k)`, and
/// `λ Σ_{l≠i} p(i,l,-k) q(l,i,-k)` on the diagonal.
pub fn m_matrix_for_values<T: Scalar>(
    kernel: &TransitionKernel<T>,
    lambda: T,
    q: &[T],
) -> Matrix<T> {
    let n = kernel.n_windows();
    let dim = kernel.dim();
    let ret = return_terms(kernel, q);
    let mut m = Matrix::zeros(dim, dim);
    for (row, g) in Generator::all(n).enumerate() {
        let (i, j, k) = (g.from(), g.to(), g.sign());
        for other in (1..=n).filter(|&w| w != i) {
            if other != j {
                m[(row, ix(n, other, j, k))] += lambda * kernel.prob(i, other, k);
            }
            m[(row, ix(n, other, i, k.flip()))] +=
                lambda * kernel.prob(i, other, k.flip()) * q[row];
        }
        m[(row, row)] += lambda * ret[k.flip().block() * n + i - 1];
    }
    m
}

pub fn build_m_matrix<T: Scalar>(
    kernel: &TransitionKernel<T>,
    r: &RVector<T>,
) -> DerivativeSystem<T> {
    DerivativeSystem {
        lambda: r.lambda,
        m: m_matrix_for_values(kernel, r.lambda, &r.values),
    }
}

impl<T: Scalar> DerivativeSystem<T> {
    /// Whether every entry of `M^power` is strictly positive (pattern check).
    pub fn power_is_positive(&self, power: usize) -> bool {
        let n = self.m.rows();
        let base = self.m.positivity_pattern();
        let mut acc = base.clone();
        for _ in 1..power {
            acc = linalg::pattern_product(&acc, &base, n);
        }
        acc.into_iter().all(|b| b)
    }

    pub fn perron_root(&self) -> Result<PerronEstimate<T>, LinalgError> {
        linalg::perron_root(&self.m, T::default_tolerance() * T::of(10.0), 100_000)
    }
}

/// Derivatives by implicit differentiation of `R = λ F(R)`:
///
/// ```text
/// (I - M) R'  = R / λ
/// (I - M) R'' = (2/λ) M R' + λ F''[R', R']
/// F''[d, d](i,j,k) = 2 Σ_{m≠i} p(i,m,-k) d(m,i,-k) d(i,j,k)
/// ```
pub fn solve_r_derivatives<T: Scalar>(
    kernel: &TransitionKernel<T>,
    r: &RVector<T>,
) -> Result<RDerivatives<T>, SolverError> {
    let lambda = r.lambda;
    if !(lambda > T::zero()) {
        return Err(SolverError::ZeroLambda);
    }
    let n = kernel.n_windows();
    let system = build_m_matrix(kernel, r);
    let lu = system.m.identity_minus().lu()?;
    let rhs1: Vec<T> = r.values.iter().map(|&x| x / lambda).collect();
    let d1 = lu.solve(&rhs1);
    let md1 = system.m.mul_vec(&d1);
    let ret_d = return_terms(kernel, &d1);
    let rhs2: Vec<T> = Generator::all(n)
        .enumerate()
        .map(|(l, g)| {
            let curvature = T::of(2.0) * ret_d[g.sign().flip().block() * n + g.from() - 1] * d1[l];
            T::of(2.0) * md1[l] / lambda + lambda * curvature
        })
        .collect();
    let d2 = lu.solve(&rhs2);
    Ok(RDerivatives { d1, d2 })
}

/// One `(i, j, k, value)` record in solver JSON output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexedValue {
    pub i: usize,
    pub j: usize,
    pub k: i64,
    pub value: f64,
}

/// JSON report: `{ lambda, R, d1, d2, iterations, residual }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub lambda: f64,
    #[serde(rename = "R")]
    pub r: Vec<IndexedValue>,
    pub d1: Vec<IndexedValue>,
    pub d2: Vec<IndexedValue>,
    pub iterations: usize,
    pub residual: f64,
}

fn indexed<T: Scalar>(n: usize, values: &[T]) -> Vec<IndexedValue> {
    Generator::all(n)
        .zip(values)
        .map(|(g, &v)| IndexedValue {
            i: g.from(),
            j: g.to(),
            k: g.sign().value(),
            value: v.to_f64_lossy(),
        })
        .collect()
}

impl SolveReport {
    pub fn new<T: Scalar>(r: &RVector<T>, derivs: Option<&RDerivatives<T>>) -> Self {
        let n = r.n_windows;
        SolveReport {
            lambda: r.lambda.to_f64_lossy(),
            r: indexed(n, &r.values),
            d1: derivs.map_or_else(Vec::new, |d| indexed(n, &d.d1)),
            d2: derivs.map_or_else(Vec::new, |d| indexed(n, &d.d2)),
            iterations: r.iterations,
            residual: r.residual.to_f64_lossy(),
        }
    }
}
