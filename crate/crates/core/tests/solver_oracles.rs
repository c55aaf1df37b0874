mod common;

use common::{iterate_r, rel_err, truncates_to};
use groupoid_walk::oracle::{closed_form, dp_hitting_series_all, DpOptions, Family};
use groupoid_walk::solver::fixed_point_map;
use groupoid_walk::{solve_r, solve_r_derivatives, Generator, KernelF64, SolveOptions};

fn polished() -> SolveOptions<f64> {
    SolveOptions {
        newton_polish: true,
        ..SolveOptions::default()
    }
}

fn kernels() -> Vec<(&'static str, KernelF64)> {
    vec![
        ("sym3", KernelF64::symmetric(3).unwrap()),
        ("sym5", KernelF64::symmetric(5).unwrap()),
        ("q0.1", KernelF64::one_parameter(0.1).unwrap()),
        ("asym", KernelF64::asymmetric()),
    ]
}

#[test]
fn asymmetric_table_truncates_to_printed_digits() {
    let k = KernelF64::asymmetric();
    let r = solve_r(&k, 1.0, &polished()).unwrap();
    let d = solve_r_derivatives(&k, &r).unwrap();
    for (i, j, s, rv, dv, vv) in closed_form::ASYMMETRIC_TABLE {
        let g = Generator::arc(i, j, s);
        let ix = g.index(3).unwrap();
        let (cr, cd, cv) = (r.values[ix], d.d1[ix], d.d2[ix]);
        assert!((cr - rv).abs() < 5e-6, "{g}: R {cr} vs {rv}");
        assert!(truncates_to(cr, rv, 6), "{g}: R {cr} vs {rv}");
        assert!(truncates_to(cd, dv, 6), "{g}: R' {cd} vs {dv}");
        assert!(truncates_to(cv, vv, 6), "{g}: R'' {cv} vs {vv}");
    }
}

#[test]
fn symmetric_family_matches_closed_form() {
    for n in 3..=8 {
        let k = KernelF64::symmetric(n).unwrap();
        let cf = closed_form::closed_form(Family::Symmetric { n }).unwrap();
        let r = solve_r(&k, 1.0, &polished()).unwrap();
        let d = solve_r_derivatives(&k, &r).unwrap();
        for (ix, g) in Generator::all(n).enumerate() {
            let (v, d1, d2) = cf.r_of(&g).unwrap();
            assert!(rel_err(r.values[ix], v) < 1e-10, "N={n} {g}");
            assert!(
                rel_err(d.d1[ix], d1) < 1e-9,
                "N={n} {g}: {} vs {d1}",
                d.d1[ix]
            );
            assert!(
                rel_err(d.d2[ix], d2) < 1e-8,
                "N={n} {g}: {} vs {d2}",
                d.d2[ix]
            );
        }
    }
}

#[test]
fn one_parameter_matches_closed_form() {
    for q in [0.02, 0.1, 0.2, 0.25, 0.3, 0.4, 0.45] {
        let k = KernelF64::one_parameter(q).unwrap();
        let cf = closed_form::closed_form(Family::OneParameter { q }).unwrap();
        let r = solve_r(&k, 1.0, &polished()).unwrap();
        let d = solve_r_derivatives(&k, &r).unwrap();
        for (ix, g) in Generator::all(3).enumerate() {
            let (v, d1, d2) = cf.r_of(&g).unwrap();
            assert!(
                rel_err(r.values[ix], v) < 1e-10,
                "q={q} {g}: {} vs {v}",
                r.values[ix]
            );
            assert!(
                rel_err(d.d1[ix], d1) < 1e-9,
                "q={q} {g}: {} vs {d1}",
                d.d1[ix]
            );
            assert!(
                rel_err(d.d2[ix], d2) < 1e-8,
                "q={q} {g}: {} vs {d2}",
                d.d2[ix]
            );
        }
    }
}

#[test]
fn independent_iteration_agrees() {
    for (name, k) in kernels() {
        for lambda in [0.3, 0.8, 1.0] {
            let r = solve_r(&k, lambda, &polished()).unwrap();
            let reference = iterate_r(&k, lambda);
            for (ix, g) in Generator::all(k.n_windows()).enumerate() {
                let key = (g.from(), g.to(), g.sign().value());
                assert!(
                    (r.values[ix] - reference[&key]).abs() < 1e-12,
                    "{name} λ={lambda} {g}"
                );
            }
        }
    }
}

#[test]
fn derivatives_match_one_sided_differences() {
    for (name, k) in kernels() {
        let at = |lambda: f64| solve_r(&k, lambda, &polished()).unwrap().values;
        let r1 = solve_r(&k, 1.0, &polished()).unwrap();
        let d = solve_r_derivatives(&k, &r1).unwrap();
        let h1 = 1e-4;
        let (a1, a2) = (at(1.0 - h1), at(1.0 - 2.0 * h1));
        let h2 = 1e-4;
        let (b1, b2, b3) = (at(1.0 - h2), at(1.0 - 2.0 * h2), at(1.0 - 3.0 * h2));
        for ix in 0..k.dim() {
            let f0 = r1.values[ix];
            let fd1 = (3.0 * f0 - 4.0 * a1[ix] + a2[ix]) / (2.0 * h1);
            let fd2 = (2.0 * f0 - 5.0 * b1[ix] + 4.0 * b2[ix] - b3[ix]) / (h2 * h2);
            assert!(
                rel_err(d.d1[ix], fd1) < 1e-4,
                "{name} ix={ix}: R' {} vs {fd1}",
                d.d1[ix]
            );
            assert!(
                rel_err(d.d2[ix], fd2) < 1e-4,
                "{name} ix={ix}: R'' {} vs {fd2}",
                d.d2[ix]
            );
        }
    }
}

#[test]
fn monotone_iterates_bounded_by_truncated_series() {
    for (name, k) in kernels() {
        for lambda in [0.5, 1.0] {
            let mut a = fixed_point_map(&k, &vec![0.0; k.dim()], lambda);
            for n in 0..5 {
                let m = (1usize << (n + 1)) - 1;
                let series = dp_hitting_series_all(&k, m, &DpOptions::default()).unwrap();
                for (ix, s) in series.iter().enumerate() {
                    let bound = s.eval(lambda);
                    assert!(
                        a[ix] <= bound + 1e-15,
                        "{name} λ={lambda} n={n} ix={ix}: {} > {bound}",
                        a[ix]
                    );
                }
                a = fixed_point_map(&k, &a, lambda);
            }
        }
    }
}

#[test]
fn r_is_increasing_in_lambda_and_below_one() {
    for (name, k) in kernels() {
        let mut prev = vec![0.0; k.dim()];
        for step in 1..=20 {
            let r = solve_r(&k, step as f64 / 20.0, &polished()).unwrap();
            for (ix, (&x, &p)) in r.values.iter().zip(&prev).enumerate() {
                assert!(x > p && x < 1.0, "{name} step={step} ix={ix}");
            }
            prev = r.values;
        }
    }
}
