mod common;

use common::{det, h_direct, kms_matrix, partials_fd, rel_err, truncates_to};
use groupoid_walk::limits::{kms_phi, spectral_radius_k};
use groupoid_walk::oracle::closed_form::{self, golden_max};
use groupoid_walk::solver::{m_matrix_for_values, DerivativeSystem};
use groupoid_walk::{
    compute_limits, Generator, KernelF32, KernelF64, Metric, MetricF64, SolveOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts() -> SolveOptions<f64> {
    SolveOptions {
        newton_polish: true,
        ..SolveOptions::default()
    }
}

fn limits(k: &KernelF64, m: &MetricF64) -> (f64, f64) {
    let c = compute_limits(k, m, &opts()).unwrap().constants;
    (c.gamma, c.sigma2)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs().max(1e-2)
}

#[test]
fn jet_partials_match_finite_differences() {
    let custom = |g: &Generator| {
        0.25 + 0.5 * ((g.from() * 7 + g.to() * 3 + usize::from(g.sign().value() < 0)) % 5) as f64
    };
    let cases: Vec<(&str, KernelF64)> = vec![
        ("sym3", KernelF64::symmetric(3).unwrap()),
        ("sym4", KernelF64::symmetric(4).unwrap()),
        ("q0.1", KernelF64::one_parameter(0.1).unwrap()),
        ("asym", KernelF64::asymmetric()),
    ];
    for (name, k) in &cases {
        let n = k.n_windows();
        let metrics: Vec<(&str, MetricF64, Box<dyn Fn(&Generator) -> f64>)> = vec![
            ("word", Metric::word(), Box::new(|_: &Generator| 1.0)),
            (
                "fenced",
                Metric::fenced(),
                Box::new(|g: &Generator| g.from().abs_diff(g.to()) as f64),
            ),
            (
                "custom",
                Metric::from_fn(n, custom).unwrap(),
                Box::new(custom),
            ),
        ];
        for (mname, metric, weight) in &metrics {
            let out = compute_limits(k, metric, &opts()).unwrap();
            let h = out.constants.h;
            let fd = partials_fd(&|l, z| h_direct(k, weight.as_ref(), l, z), 1e-3);
            let jet = [
                h.d_lambda(),
                h.d_z(),
                h.d_lambda2(),
                h.d_lambda_z(),
                h.d_z2(),
            ];
            for (slot, (a, b)) in jet.iter().zip(fd).enumerate() {
                assert!(
                    close(*a, b),
                    "{name}/{mname} partial {slot}: jet {a} vs fd {b}"
                );
            }
            assert!(
                h.value().abs() < 1e-10,
                "{name}/{mname}: h(1,1) = {}",
                h.value()
            );
            let gamma = fd[1] / fd[0];
            let sigma2 =
                (fd[4] + fd[1] - 2.0 * gamma * fd[3] + gamma * gamma * (fd[2] + fd[0])) / fd[0];
            assert!(close(out.constants.gamma, gamma), "{name}/{mname}");
            assert!(close(out.constants.sigma2, sigma2), "{name}/{mname}");
        }
    }
}

#[test]
fn symmetric_constants() {
    for n in 3..=8 {
        let k = KernelF64::symmetric(n).unwrap();
        let nf = n as f64;
        let (g, s) = limits(&k, &Metric::word());
        assert!(
            rel_err(g, closed_form::symmetric_gamma(nf)) < 1e-10,
            "N={n}"
        );
        assert!(
            rel_err(s, closed_form::symmetric_sigma2(nf)) < 1e-9,
            "N={n}"
        );
        let (g, s) = limits(&k, &Metric::fenced());
        assert!(
            rel_err(g, closed_form::symmetric_gamma_fenced(nf)) < 1e-10,
            "N={n}"
        );
        assert!(
            rel_err(s, closed_form::symmetric_sigma2_fenced(nf)) < 1e-9,
            "N={n}"
        );
    }
    let (g, s) = limits(&KernelF64::symmetric(4).unwrap(), &Metric::word());
    assert!((g - 1.0 / 3.0).abs() < 1e-12 && (s - 5.0 / 9.0).abs() < 1e-10);
}

#[test]
fn one_parameter_grid() {
    for step in 0..25 {
        let q = 0.01 + 0.02 * step as f64;
        let k = KernelF64::one_parameter(q).unwrap();
        let (g, s) = limits(&k, &Metric::word());
        let (gf, sf) = limits(&k, &Metric::fenced());
        assert!(rel_err(g, closed_form::gamma3(q)) < 1e-9, "q={q}: {g}");
        assert!(rel_err(s, closed_form::sigma2_3(q)) < 1e-9, "q={q}: {s}");
        assert!(
            rel_err(gf, closed_form::gamma3_fenced(q)) < 1e-9,
            "q={q}: {gf}"
        );
        assert!(
            rel_err(sf, closed_form::sigma2_3_fenced(q)) < 1e-9,
            "q={q}: {sf}"
        );
        assert!(
            rel_err(closed_form::sigma2_3_fenced_uncorrected(q) / sf, 1.0 / q) < 1e-9,
            "q={q}"
        );
    }
}

#[test]
fn one_parameter_maxima() {
    let along = |fenced: bool, which: usize| {
        move |q: f64| {
            let k = KernelF64::one_parameter(q).unwrap();
            let m = if fenced {
                Metric::fenced()
            } else {
                Metric::word()
            };
            let (g, s) = limits(&k, &m);
            [g, s][which]
        }
    };
    let tol = 1e-9;
    let found = golden_max(along(false, 0), 0.01, 0.49, tol);
    let stated = closed_form::gamma3_max();
    assert!(
        (found.q - stated.q).abs() < 1e-6 && (found.value - stated.value).abs() < 1e-10,
        "{found:?}"
    );
    let found = golden_max(along(false, 1), 0.01, 0.49, tol);
    let stated = closed_form::sigma2_3_max();
    assert!(
        (found.q - stated.q).abs() < 1e-6 && (found.value - stated.value).abs() < 1e-10,
        "{found:?}"
    );
    let found = golden_max(along(true, 0), 0.01, 0.49, tol);
    let stated = closed_form::gamma3_fenced_max();
    assert!(
        (found.q - stated.q).abs() < 1e-6 && (found.value - stated.value).abs() < 1e-10,
        "{found:?}"
    );
    let found = golden_max(along(true, 1), 1e-4, 0.02, 1e-12);
    let stated = closed_form::sigma2_3_fenced_max();
    assert!((found.q - stated.q).abs() < 1e-6, "{found:?}");
    assert!(truncates_to(found.value, stated.value, 6), "{found:?}");
    let f = along(true, 1);
    assert!(f(found.q) > f(found.q - 1e-4) && f(found.q) > f(found.q + 1e-4));
}

#[test]
fn asymmetric_constants_truncate_to_table() {
    let k = KernelF64::asymmetric();
    let (g, s) = limits(&k, &Metric::word());
    assert!(
        truncates_to(g, closed_form::ASYMMETRIC_WORD.gamma, 6),
        "{g}"
    );
    assert!(
        truncates_to(s, closed_form::ASYMMETRIC_WORD.sigma2, 6),
        "{s}"
    );
    let (g, s) = limits(&k, &Metric::fenced());
    assert!(
        truncates_to(g, closed_form::ASYMMETRIC_FENCED.gamma, 6),
        "{g}"
    );
    assert!(
        truncates_to(s, closed_form::ASYMMETRIC_FENCED.sigma2, 6),
        "{s}"
    );
}

#[test]
fn kms_recurrence_matches_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let x: f64 = rng.random_range(-2.0..2.0);
        let z: f64 = rng.random_range(0.0..1.0);
        let direct = det(kms_matrix(n, x, z));
        let rec = kms_phi(n, x, z);
        assert!(
            (rec - direct).abs() <= 1e-10 * direct.abs().max(1e-3),
            "n={n} x={x} z={z}: {rec} vs {direct}"
        );
    }
}

#[test]
fn spectral_facts() {
    for k in [
        KernelF64::symmetric(3).unwrap(),
        KernelF64::one_parameter(0.2).unwrap(),
        KernelF64::asymmetric(),
    ] {
        for m in [Metric::word(), Metric::fenced()] {
            let at_one = spectral_radius_k(&k, &m, 1.0, 1.0).unwrap();
            assert!((at_one - 1.0).abs() < 1e-8, "{at_one}");
            assert!(spectral_radius_k(&k, &m, 0.9, 1.0).unwrap() < 1.0);
            assert!(spectral_radius_k(&k, &m, 1.0, 0.9).unwrap() < 1.0);
        }
        let ones = DerivativeSystem {
            lambda: 1.0,
            m: m_matrix_for_values(&k, 1.0, &vec![1.0; k.dim()]),
        };
        assert!(ones.perron_root().unwrap().root > 1.0);
        assert!(ones.power_is_positive(3));
    }
    let k = KernelF64::symmetric(3).unwrap();
    assert!(spectral_radius_k(&k, &Metric::word(), 1.2, 1.0).is_err());
    assert!(spectral_radius_k(&k, &Metric::word(), 1.0, 0.0).is_err());
}

#[test]
fn zero_weight_metric_is_degenerate() {
    let k = KernelF64::asymmetric();
    let m = Metric::custom(3, vec![0.0; 12]).unwrap();
    let c = compute_limits(&k, &m, &opts()).unwrap().constants;
    assert_eq!(c.gamma, 0.0);
    assert_eq!(c.sigma2, 0.0);
    assert!(c.degenerate);
}

#[test]
fn single_precision_pipeline() {
    let k = KernelF32::symmetric(4).unwrap();
    let c = compute_limits(&k, &Metric::word(), &SolveOptions::default())
        .unwrap()
        .constants;
    assert!((c.gamma - 1.0 / 3.0).abs() < 1e-4, "{}", c.gamma);
    assert!((c.sigma2 - 5.0 / 9.0).abs() < 1e-3, "{}", c.sigma2);
    let k = KernelF32::asymmetric();
    let c = compute_limits(&k, &Metric::word(), &SolveOptions::default())
        .unwrap()
        .constants;
    assert!((c.gamma - 0.2729136).abs() < 1e-4, "{}", c.gamma);
}
