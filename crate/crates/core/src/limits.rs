//! Drift `γ` and CLT variance `σ²` of the metric length.
//!
//! With `B(k; λ, z)[i][j] = z^{w(i,j,k)} R(i,j,k)(λ)` (zero diagonal) and
//! `h(λ, z) = det[I - B(+1) B(-1)]`,
//!
//! ```text
//! γ  = ∂z h / ∂λ h
//! σ² = (∂z² h + ∂z h - 2γ ∂λ∂z h + γ² (∂λ² h + ∂λ h)) / ∂λ h
//! ```
//!
//! all partials taken at `(1, 1)`. The partials come out of a single
//! determinant evaluated in [`Jet2`] arithmetic.

use serde::Serialize;
use thiserror::Error;

use crate::groupoid::{Generator, Metric, MetricKind, Sign};
use crate::jet::Jet2;
use crate::kernel::TransitionKernel;
use crate::linalg::{self, LinalgError, Matrix};
use crate::scalar::Scalar;
use crate::solver::{self, RDerivatives, RVector, SolveOptions, SolverError};

/// Pivots with constant term below this are treated as degenerate.
pub const PIVOT_FLOOR: f64 = 1e-14;

/// Largest size for the cofactor-expansion fallback.
pub const COFACTOR_MAX_N: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitsError {
    #[error("jet determinant: all pivot candidates in column {column} vanish")]
    DegeneratePivot { column: usize },
    #[error("∂λh(1,1) vanishes ({0:e}); the zero of h at (1,1) is not simple")]
    VanishingLambdaDerivative(f64),
    #[error("computed σ² = {0} is negative")]
    NegativeVariance(f64),
    #[error("λ and z must lie in (0, 1], got ({lambda}, {z})")]
    OutOfDomain { lambda: f64, z: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Square matrix of jets.
#[derive(Debug, Clone, PartialEq)]
pub struct JetMatrix<T> {
    n: usize,
    data: Vec<Jet2<T>>,
}

impl<T: Scalar> JetMatrix<T> {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Jet2<T>) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        JetMatrix { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        JetMatrix {
            n,
            data: vec![Jet2::constant(T::zero()); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry at 0-based `(row, col)`.
    pub fn get(&self, r: usize, c: usize) -> Jet2<T> {
        self.data[r * self.n + c]
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.n;
        JetMatrix::from_fn(n, |r, c| {
            (0..n).fold(Jet2::constant(T::zero()), |acc, k| {
                acc + self.get(r, k) * o.get(k, c)
            })
        })
    }

    pub fn identity_minus(&self) -> Self {
        JetMatrix::from_fn(self.n, |r, c| if r == c { Jet2::constant(T::one()) } else { Jet2::constant(T::zero()) } - self.get(r, c))
    }

    /// Constant terms as a numeric matrix.
    pub fn values(&self) -> Matrix<T> {
        Matrix::from_fn(self.n, self.n, |r, c| self.get(r, c).c00)
    }

    /// Determinant by elimination, pivoting on the largest constant term.
    ///
    /// Only the last pivot may be (near) zero: it is multiplied in but never
    /// divided by. A vanishing pivot column earlier falls back to cofactor
    /// expansion for small matrices.
    pub fn determinant(&self) -> Result<Jet2<T>, LimitsError> {
        let n = self.n;
        let floor = T::of(PIVOT_FLOOR);
        let mut a = self.data.clone();
        let mut det = Jet2::constant(T::one());
        for col in 0..n {
            let (pivot_row, magnitude) = (col..n).map(|r| (r, a[r * n + col].c00.abs())).fold(
                (col, -T::one()),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
            let last = col + 1 == n;
            if !last && magnitude < floor {
                return if n <= COFACTOR_MAX_N {
                    Ok(self.cofactor_determinant())
                } else {
                    Err(LimitsError::DegeneratePivot { column: col })
                };
            }
            if pivot_row != col {
                for c in 0..n {
                    a.swap(col * n + c, pivot_row * n + c);
                }
                det = -det;
            }
            let pivot = a[col * n + col];
            det *= pivot;
            if last {
                break;
            }
            let inv = pivot.recip();
            for r in col + 1..n {
                let factor = a[r * n + col] * inv;
                for c in col + 1..n {
                    let delta = factor * a[col * n + c];
                    a[r * n + c] -= delta;
                }
            }
        }
        Ok(det)
    }

    /// Laplace expansion along the first row; exponential cost.
    pub fn cofactor_determinant(&self) -> Jet2<T> {
        fn rec<T: Scalar>(m: &[Jet2<T>], n: usize) -> Jet2<T> {
            if n == 0 {
                return Jet2::constant(T::one());
            }
            let mut acc = Jet2::constant(T::zero());
            for c in 0..n {
                let minor: Vec<Jet2<T>> = (1..n)
                    .flat_map(|r| (0..n).filter(move |&cc| cc != c).map(move |cc| (r, cc)))
                    .map(|(r, cc)| m[r * n + cc])
                    .collect();
                let term = m[c] * rec(&minor, n - 1);
                acc = if c % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
        rec(&self.data, self.n)
    }
}

/// `B(sign; λ, z)` as jets about `(1, 1)` from `R`, `R'`, `R''` at λ = 1.
pub fn build_b<T: Scalar>(
    r: &RVector<T>,
    derivs: &RDerivatives<T>,
    metric: &Metric<T>,
    sign: Sign,
) -> JetMatrix<T> {
    let n = r.n_windows;
    JetMatrix::from_fn(n, |row, col| {
        if row == col {
            return Jet2::constant(T::zero());
        }
        let g = Generator::new(row + 1, col + 1, sign).expect("off-diagonal");
        let idx = g.index(n).expect("within kernel");
        Jet2::z_power(metric.weight(&g))
            * Jet2::of_lambda(r.values[idx], derivs.d1[idx], derivs.d2[idx])
    })
}

/// `h = det[I - B(+1) B(-1)]` as a jet.
pub fn det_h<T: Scalar>(
    b_plus: &JetMatrix<T>,
    b_minus: &JetMatrix<T>,
) -> Result<Jet2<T>, LimitsError> {
    b_plus.mul(b_minus).identity_minus().determinant()
}

/// The `B(±1)` pair for one metric, plus the `2N × 2N` block matrix
/// `K = [[0, B(+1)], [B(-1), 0]]`.
#[derive(Debug, Clone)]
pub struct LimitMatrices<T> {
    pub b_plus: JetMatrix<T>,
    pub b_minus: JetMatrix<T>,
    pub metric: MetricKind,
}

impl<T: Scalar> LimitMatrices<T> {
    pub fn new(r: &RVector<T>, derivs: &RDerivatives<T>, metric: &Metric<T>) -> Self {
        LimitMatrices {
            b_plus: build_b(r, derivs, metric, Sign::Plus),
            b_minus: build_b(r, derivs, metric, Sign::Minus),
            metric: metric.kind(),
        }
    }

    pub fn k(&self) -> JetMatrix<T> {
        let n = self.b_plus.n();
        JetMatrix::from_fn(2 * n, |r, c| match (r < n, c < n) {
            (true, false) => self.b_plus.get(r, c - n),
            (false, true) => self.b_minus.get(r - n, c),
            _ => Jet2::constant(T::zero()),
        })
    }

    pub fn h(&self) -> Result<Jet2<T>, LimitsError> {
        det_h(&self.b_plus, &self.b_minus)
    }
}

/// The five partials of `h` at `(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HPartials {
    pub d_lambda: f64,
    pub d_z: f64,
    pub d_lambda2: f64,
    pub d_lambda_z: f64,
    pub d_z2: f64,
}

impl HPartials {
    pub fn from_jet<T: Scalar>(h: &Jet2<T>) -> Self {
        HPartials {
            d_lambda: h.d_lambda().to_f64_lossy(),
            d_z: h.d_z().to_f64_lossy(),
            d_lambda2: h.d_lambda2().to_f64_lossy(),
            d_lambda_z: h.d_lambda_z().to_f64_lossy(),
            d_z2: h.d_z2().to_f64_lossy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitConstants<T> {
    pub gamma: T,
    pub sigma2: T,
    /// `h(1, 1)`, which is zero up to rounding.
    pub h_value: T,
    pub h: Jet2<T>,
    /// Set when `σ²` is exactly zero (e.g. all metric weights zero).
    pub degenerate: bool,
}

/// `γ` and `σ²` from the jet of `h`.
pub fn limit_constants<T: Scalar>(h: &Jet2<T>) -> Result<LimitConstants<T>, LimitsError> {
    let dl = h.d_lambda();
    if !(dl.abs() > T::epsilon()) {
        return Err(LimitsError::VanishingLambdaDerivative(dl.to_f64_lossy()));
    }
    // `+ 0` turns a signed zero from a zero-weight metric into `+0`.
    let gamma = h.d_z() / dl + T::zero();
    let sigma2 = (h.d_z2() + h.d_z() - T::of(2.0) * gamma * h.d_lambda_z()
        + gamma * gamma * (h.d_lambda2() + dl))
        / dl
        + T::zero();
    if sigma2 < T::zero() {
        return Err(LimitsError::NegativeVariance(sigma2.to_f64_lossy()));
    }
    Ok(LimitConstants {
        gamma,
        sigma2,
        h_value: h.value(),
        h: *h,
        degenerate: sigma2 == T::zero(),
    })
}

/// Everything computed on the way from a kernel to `(γ, σ²)`.
#[derive(Debug, Clone)]
pub struct LimitsOutcome<T> {
    pub r: RVector<T>,
    pub derivs: RDerivatives<T>,
    pub matrices: LimitMatrices<T>,
    pub constants: LimitConstants<T>,
}

/// Kernel → `R(1)`, `R'(1)`, `R''(1)` → `B(±1)` → `h` → `(γ, σ²)`.
pub fn compute_limits<T: Scalar>(
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    opts: &SolveOptions<T>,
) -> Result<LimitsOutcome<T>, LimitsError> {
    let r = solver::solve_r(kernel, T::one(), opts)?;
    let derivs = solver::solve_r_derivatives(kernel, &r)?;
    limits_from_solution(r, derivs, metric)
}

pub fn limits_from_solution<T: Scalar>(
    r: RVector<T>,
    derivs: RDerivatives<T>,
    metric: &Metric<T>,
) -> Result<LimitsOutcome<T>, LimitsError> {
    let matrices = LimitMatrices::new(&r, &derivs, metric);
    let constants = limit_constants(&matrices.h()?)?;
    Ok(LimitsOutcome {
        r,
        derivs,
        matrices,
        constants,
    })
}

/// JSON form: `{ gamma, sigma2, h_partials, metric }` plus `h_value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitsReport {
    pub gamma: f64,
    pub sigma2: f64,
    pub h_partials: HPartials,
    pub metric: MetricKind,
    pub h_value: f64,
    pub degenerate: bool,
}

impl LimitsReport {
    pub fn new<T: Scalar>(c: &LimitConstants<T>, metric: MetricKind) -> Self {
        LimitsReport {
            gamma: c.gamma.to_f64_lossy(),
            sigma2: c.sigma2.to_f64_lossy(),
            h_partials: HPartials::from_jet(&c.h),
            metric,
            h_value: c.h_value.to_f64_lossy(),
            degenerate: c.degenerate,
        }
    }
}

/// Characteristic polynomial `det[U_n(z) - xI]` of the Kac–Murdock–Szegő
/// matrix `U_n(z)[i][j] = z^{|i-j|}`, by the three-term recurrence
/// `φ_n = (1 - x - z²(1 + x)) φ_{n-1} - x² z² φ_{n-2}`, `φ_0 = 1`, `φ_1 = 1 - x`.
pub fn kms_phi<T: Scalar>(n: usize, x: T, z: T) -> T {
    let one = T::one();
    if n == 0 {
        return one;
    }
    let a = one - x - z * z * (one + x);
    let b = x * x * z * z;
    let (mut prev, mut cur) = (one, one - x);
    for _ in 2..=n {
        let next = a * cur - b * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Numeric `K(λ, z)` from `R(λ)`.
pub fn k_matrix<T: Scalar>(r: &RVector<T>, metric: &Metric<T>, z: T) -> Matrix<T> {
    let n = r.n_windows;
    let entry = |row: usize, col: usize, sign: Sign| {
        if row == col {
            T::zero()
        } else {
            let g = Generator::new(row + 1, col + 1, sign).expect("off-diagonal");
            z.powf(metric.weight(&g)) * r.get(&g)
        }
    };
    Matrix::from_fn(2 * n, 2 * n, |row, col| match (row < n, col < n) {
        (true, false) => entry(row, col - n, Sign::Plus),
        (false, true) => entry(row - n, col, Sign::Minus),
        _ => T::zero(),
    })
}

/// Perron root of `K` given `R(λ)`; `K` has period two, so the root is the
/// square root of the Perron root of `K²`.
pub fn spectral_radius_k_from<T: Scalar>(
    r: &RVector<T>,
    metric: &Metric<T>,
    z: T,
) -> Result<T, LimitsError> {
    let k = k_matrix(r, metric, z);
    let k2 = k.mul(&k);
    let est = linalg::perron_root(&k2, T::default_tolerance(), 100_000)?;
    Ok(est.root.sqrt())
}

pub fn spectral_radius_k<T: Scalar>(
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    lambda: T,
    z: T,
) -> Result<T, LimitsError> {
    if !(lambda > T::zero() && lambda <= T::one() && z > T::zero() && z <= T::one()) {
        return Err(LimitsError::OutOfDomain {
            lambda: lambda.to_f64_lossy(),
            z: z.to_f64_lossy(),
        });
    }
    let r = solver::solve_r(kernel, lambda, &SolveOptions::default())?;
    spectral_radius_k_from(&r, metric, z)
}
