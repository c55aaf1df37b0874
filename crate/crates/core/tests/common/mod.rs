//! Test-only reference computations, written without the library's solver,
//! linear algebra or jet code.
#![allow(dead_code)]

use std::collections::HashMap;

use groupoid_walk::{Generator, KernelF64, Sign};

pub type Key = (usize, usize, i64);

pub fn keys(n: usize) -> Vec<Key> {
    let mut out = Vec::new();
    for k in [1, -1] {
        for i in 1..=n {
            for j in (1..=n).filter(|&j| j != i) {
                out.push((i, j, k));
            }
        }
    }
    out
}

fn p(kernel: &KernelF64, i: usize, j: usize, k: i64) -> f64 {
    kernel.prob(i, j, if k == 1 { Sign::Plus } else { Sign::Minus })
}

/// Plain fixed-point iteration from zero; works for `λ` slightly above 1 as
/// long as it stays below the radius of convergence.
pub fn iterate_r(kernel: &KernelF64, lambda: f64) -> HashMap<Key, f64> {
    let n = kernel.n_windows();
    let ks = keys(n);
    let mut r: HashMap<Key, f64> = ks.iter().map(|&key| (key, 0.0)).collect();
    for _ in 0..2_000_000 {
        let mut next = HashMap::with_capacity(r.len());
        let mut delta: f64 = 0.0;
        for &(i, j, k) in &ks {
            let mut v = p(kernel, i, j, k);
            for m in (1..=n).filter(|&m| m != i && m != j) {
                v += p(kernel, i, m, k) * r[&(m, j, k)];
            }
            let ret: f64 = (1..=n)
                .filter(|&m| m != i)
                .map(|m| p(kernel, i, m, -k) * r[&(m, i, -k)])
                .sum();
            v += ret * r[&(i, j, k)];
            v *= lambda;
            delta = delta.max((v - r[&(i, j, k)]).abs());
            next.insert((i, j, k), v);
        }
        r = next;
        if delta < 1e-16 {
            return r;
        }
    }
    panic!("reference iteration did not converge at lambda = {lambda}");
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for cc in c..n {
                a[r][cc] -= f * a[c][cc];
            }
        }
    }
    d
}

/// `h(λ, z) = det[I - B(+1) B(-1)]` evaluated directly.
pub fn h_direct(
    kernel: &KernelF64,
    weight: &dyn Fn(&Generator) -> f64,
    lambda: f64,
    z: f64,
) -> f64 {
    let n = kernel.n_windows();
    let r = iterate_r(kernel, lambda);
    let b = |k: i64| -> Vec<Vec<f64>> {
        (1..=n)
            .map(|i| {
                (1..=n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            z.powf(weight(&Generator::arc(i, j, k))) * r[&(i, j, k)]
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let (bp, bm) = (b(1), b(-1));
    let m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    f64::from(u8::from(i == j)) - (0..n).map(|l| bp[i][l] * bm[l][j]).sum::<f64>()
                })
                .collect()
        })
        .collect();
    det(m)
}

const W1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const W2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

/// Fourth-order central differences of `f` at `(1, 1)`:
/// `[∂λ, ∂z, ∂λ², ∂λ∂z, ∂z²]`.
pub fn partials_fd(f: &dyn Fn(f64, f64) -> f64, h: f64) -> [f64; 5] {
    let off = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let along = |w: &[f64; 5], lam: bool| -> f64 {
        (0..5)
            .map(|i| {
                w[i] * if lam {
                    f(1.0 + off[i] * h, 1.0)
                } else {
                    f(1.0, 1.0 + off[i] * h)
                }
            })
            .sum()
    };
    let mut mixed = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            if W1[i] != 0.0 && W1[j] != 0.0 {
                mixed += W1[i] * W1[j] * f(1.0 + off[i] * h, 1.0 + off[j] * h);
            }
        }
    }
    [
        along(&W1, true) / (12.0 * h),
        along(&W1, false) / (12.0 * h),
        along(&W2, true) / (12.0 * h * h),
        mixed / (144.0 * h * h),
        along(&W2, false) / (12.0 * h * h),
    ]
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

/// Value truncated (toward zero) to `digits` significant digits, plus one
/// unit in the last kept digit.
pub fn truncation_window(printed: f64, digits: i32) -> (f64, f64) {
    let e = printed.abs().log10().floor() as i32;
    let unit = 10f64.powi(e - digits + 1);
    (printed, printed + unit)
}

/// Whether `value` truncates to `printed` at `digits` significant digits.
pub fn truncates_to(value: f64, printed: f64, digits: i32) -> bool {
    let (lo, hi) = truncation_window(printed, digits);
    let slack = 1e-12 * printed.abs();
    value >= lo - slack && value < hi - slack
}

/// The `n×n` Kac–Murdock–Szegő matrix minus `x I`.
pub fn kms_matrix(n: usize, x: f64, z: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| z.powi((i as i32 - j as i32).abs()) - if i == j { x } else { 0.0 })
                .collect()
        })
        .collect()
}
