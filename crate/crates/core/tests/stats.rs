mod common;

use idiombench::stats::{aggregate_runs, two_sample_ttest, RunSeries};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn series(v: Vec<f64>) -> RunSeries {
    RunSeries::new("m", v).unwrap()
}

#[test]
fn welch_matches_quadrature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let na = rng.gen_range(2..12);
        let nb = rng.gen_range(2..12);
        let shift = rng.gen_range(-2.0..2.0);
        let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0.0..1.0) * rng.gen_range(0.2..3.0) + shift).collect();
        let (t, df, p) = common::welch_oracle(&a, &b);
        let r = two_sample_ttest(&series(a.clone()), &series(b.clone()), 0.05).unwrap();
        assert!((r.t - t).abs() <= 1e-9 * t.abs().max(1.0), "t {} vs {t}", r.t);
        assert!((r.df - df).abs() <= 1e-9 * df, "df {} vs {df}", r.df);
        assert!((r.p_value - p).abs() <= 1e-9, "p {} vs {p} (t={t}, df={df})", r.p_value);

        let swapped = two_sample_ttest(&series(b), &series(a), 0.05).unwrap();
        assert_eq!(swapped.t, -r.t);
        assert_eq!(swapped.p_value, r.p_value);
    }
}

#[test]
fn separated_runs_are_highly_significant() {
    let base = series(vec![0.731, 0.722, 0.744]);
    let fine_tuned = series(vec![0.973, 0.981, 0.969]);
    let r = two_sample_ttest(&base, &fine_tuned, 0.05).unwrap();
    assert!(r.p_value < 1e-4, "{r:?}");
    assert!(r.significant);
}

proptest! {
    #[test]
    fn aggregate_is_order_invariant(mut v in prop::collection::vec(-1e3f64..1e3, 1..20), seed in any::<u64>()) {
        let a = aggregate_runs(&series(v.clone()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::seq::SliceRandom;
        v.shuffle(&mut rng);
        let b = aggregate_runs(&series(v));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn p_value_is_a_probability(a in prop::collection::vec(0f64..1.0, 2..8), b in prop::collection::vec(0f64..1.0, 2..8)) {
        let r = two_sample_ttest(&series(a), &series(b), 0.05).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }
}
