use groupoid_walk::{Generator, Metric, ReducedWord, Rewrite, Sign};
use proptest::prelude::*;

const N: usize = 5;

/// A reduced word from `source` built by pushing random moves.
fn word_from(source: usize, moves: &[(usize, bool)]) -> ReducedWord {
    let mut w = ReducedWord::unit(source);
    for &(step, plus) in moves {
        let at = w.target();
        let to = 1 + (at - 1 + 1 + step % (N - 1)) % N;
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        w.push(Generator::new(at, to, sign).unwrap()).unwrap();
    }
    w
}

fn moves() -> impl Strategy<Value = Vec<(usize, bool)>> {
    prop::collection::vec((0usize..N, any::<bool>()), 0..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn composition_is_associative(src in 1usize..=N, a in moves(), b in moves(), c in moves()) {
        let wa = word_from(src, &a);
        let wb = word_from(wa.target(), &b);
        let wc = word_from(wb.target(), &c);
        let left = wa.compose(&wb).unwrap().compose(&wc).unwrap();
        let right = wa.compose(&wb.compose(&wc).unwrap()).unwrap();
        prop_assert!(left.is_well_formed() && right.is_well_formed());
        prop_assert_eq!(left, right);
    }
}

proptest! {
    #[test]
    fn inverse_law(src in 1usize..=N, a in moves()) {
        let w = word_from(src, &a);
        prop_assert!(w.compose(&w.inverse()).unwrap().is_unit());
        prop_assert!(w.inverse().compose(&w).unwrap().is_unit());
        prop_assert_eq!(w.inverse().inverse(), w);
    }

    #[test]
    fn append_changes_length_by_at_most_one(src in 1usize..=N, a in moves(), step in 0usize..N, plus in any::<bool>()) {
        let mut w = word_from(src, &a);
        let before = w.len() as i64;
        let before_f: f64 = w.metric_length(&Metric::fenced());
        let extra = word_from(w.target(), &[(step, plus)]);
        let g = extra.letters()[0];
        let rw = w.push(g).unwrap();
        prop_assert!(w.is_well_formed());
        prop_assert_eq!(w.len() as i64 - before, rw.length_delta());
        prop_assert!((-1..=1).contains(&rw.length_delta()));
        let after_f: f64 = w.metric_length(&Metric::fenced());
        prop_assert!((after_f - before_f - rw.metric_delta(&Metric::<f64>::fenced())).abs() < 1e-12);
        if let Rewrite::Merged { merged, .. } = rw {
            prop_assert_eq!(w.letters().last().copied(), Some(merged));
        }
    }

    #[test]
    fn text_round_trip(src in 1usize..=N, a in moves()) {
        let w = word_from(src, &a);
        let parsed: ReducedWord = w.to_string().parse().unwrap();
        prop_assert_eq!(parsed, w);
    }
}
