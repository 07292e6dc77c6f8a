mod common;

use idiombench::adjudicate::{
    annotator_credibility, build_report, cus, fleiss_kappa, majority_label, tally, tally_paired,
    tally_where, Majority, Rating, Vote, VoteRecord,
};
use idiombench::synthetic::{
    idiom_dialogue, scripted_paired_votes, scripted_rating_votes, task_dialogue, PairedOutcome, ANNOTATORS,
};
use idiombench::transcripts::{build_experiment1, build_experiment2, FnResponder, Pool, Transcript};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exp1() -> Transcript {
    let m = FnResponder::new("gen-a", |p: &str| format!("{p}?"));
    build_experiment1("e1", &idiom_dialogue(60, 1), &task_dialogue(60, 2), &m, 5).unwrap()
}

fn exp2() -> Transcript {
    let a = FnResponder::new("gen-a", |p: &str| format!("{p}?"));
    let b = FnResponder::new("gen-b", |p: &str| format!("{p}!"));
    build_experiment2("e2", &idiom_dialogue(60, 1), &task_dialogue(60, 2), &a, &b, 5).unwrap()
}

fn outcomes(h: usize, u: usize, n: usize, three: usize) -> Vec<Majority<Rating>> {
    let mut v = Vec::new();
    v.extend(std::iter::repeat(Majority::Label(Rating::H)).take(h));
    v.extend(std::iter::repeat(Majority::Label(Rating::U)).take(u));
    v.extend(std::iter::repeat(Majority::Label(Rating::N)).take(n));
    v.extend(std::iter::repeat(Majority::ThreeWay).take(three));
    v
}

#[test]
fn rating_tally_fixtures() {
    let t = exp1();
    for ((h, u, n, w), want) in [
        ((25, 7, 24, 8), ["39.1", "10.9", "37.5", "12.5"]),
        ((40, 1, 21, 2), ["62.5", "1.6", "32.8", "3.1"]),
    ] {
        let votes = scripted_rating_votes(&t, &outcomes(h, u, n, w), 30);
        let rows = tally(&t, &votes).unwrap();
        assert_eq!(rows.len(), 1);
        let m = &rows[0].majority;
        assert_eq!(rows[0].items, 64);
        let got = [m.h.to_string(), m.u.to_string(), m.n.to_string(), m.three_way.to_string()];
        assert_eq!(got, want);
        assert_eq!(rows[0].unanimous_counts.h, 0);
    }
}

#[test]
fn idiom_scope_counts_idiom_items_only() {
    let t = exp1();
    let votes = scripted_rating_votes(&t, &outcomes(64, 0, 0, 0), 30);
    let rows = tally_where(&t, &votes, |i| i.pool() == Pool::Idioms).unwrap();
    assert_eq!(rows[0].items, 32);
    assert_eq!(rows[0].majority.h.to_string(), "100.0");
}

#[test]
fn paired_tally_fixture() {
    let t = exp2();
    let mut o = Vec::new();
    for i in 0..23 {
        o.push(PairedOutcome { fitting_model: 0, unanimous: i < 15 });
    }
    for i in 0..9 {
        o.push(PairedOutcome { fitting_model: 1, unanimous: i < 3 });
    }
    let votes = scripted_paired_votes(&t, &o, 24);
    let rows = tally_paired(&t, &votes).unwrap();
    let first = &t.model_ids()[0];
    let row = |m: &str| rows.iter().find(|r| r.model == m).unwrap();
    let a = row(first);
    let b = rows.iter().find(|r| &r.model != first).unwrap();
    assert_eq!((a.fitting.to_string(), b.fitting.to_string()), ("71.9".into(), "28.1".into()));
    assert_eq!(
        (a.unanimous_fitting.to_string(), b.unanimous_fitting.to_string()),
        ("46.9".into(), "9.4".into())
    );
    assert_eq!(a.diverse_count + b.diverse_count, 32);
    assert_eq!(cus(&t, &votes).unwrap().percent, 80);
}

#[test]
fn cus_fixture_and_credibility() {
    let t = exp1();
    let votes = scripted_rating_votes(&t, &outcomes(64, 0, 0, 0), 24);
    let c = cus(&t, &votes).unwrap();
    assert_eq!((c.percent, c.unanimous, c.items), (80, 24, 30));

    let cred = annotator_credibility(&t, &votes, ANNOTATORS[2], 70.0).unwrap();
    assert_eq!(cred.correct, 24);
    assert_eq!(cred.score.to_string(), "80.0");
    assert!(cred.valid);
}

#[test]
fn low_credibility_marks_report_provisional() {
    let t = exp1();
    let mut votes = scripted_rating_votes(&t, &outcomes(64, 0, 0, 0), 30);
    let mut flipped = 0;
    for v in votes.iter_mut() {
        let item = t.item(v.item_id).unwrap();
        if v.annotator_id == ANNOTATORS[0] && item.is_credibility() && flipped < 10 {
            v.vote = Vote::Rating { rating: Rating::N };
            flipped += 1;
        }
    }
    let cred = annotator_credibility(&t, &votes, ANNOTATORS[0], 70.0).unwrap();
    assert_eq!(cred.score.to_string(), "66.7");
    assert!(!cred.valid);
    let report = build_report(&t, &votes, 70.0).unwrap();
    assert!(report.provisional);
    assert!(!report.rating_rows.is_empty());
}

#[test]
fn missing_and_duplicate_votes_are_reported() {
    let t = exp1();
    let votes = scripted_rating_votes(&t, &outcomes(64, 0, 0, 0), 30);
    let fewer: Vec<VoteRecord> = votes[1..].to_vec();
    let err = tally(&t, &fewer).unwrap_err().to_string();
    assert!(err.contains("missing"), "{err}");
    let mut more = votes.clone();
    more.push(votes[5].clone());
    let err = tally(&t, &more).unwrap_err().to_string();
    assert!(err.contains("duplicate"), "{err}");
    let mut wrong_kind = votes.clone();
    wrong_kind[0].vote = Vote::Paired {
        fitting: idiombench::transcripts::Slot::Person2,
        diverse: idiombench::transcripts::Slot::Person2,
    };
    assert!(tally(&t, &wrong_kind).is_err());
}

#[test]
fn report_with_two_annotators_is_provisional() {
    let t = exp1();
    let votes: Vec<VoteRecord> = scripted_rating_votes(&t, &outcomes(64, 0, 0, 0), 30)
        .into_iter()
        .filter(|v| v.annotator_id != ANNOTATORS[2])
        .collect();
    let r = build_report(&t, &votes, 70.0).unwrap();
    assert!(r.provisional);
    assert!(r.rating_rows.is_empty());
    assert_eq!(r.cus.unwrap().percent, 100);
}

#[test]
fn kappa_matches_pair_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 200 {
        let items = rng.gen_range(2..60);
        let raters = rng.gen_range(2..7);
        let cats = rng.gen_range(2..5);
        let bias = rng.gen_range(0.0..0.9);
        let ratings: Vec<Vec<usize>> = (0..items)
            .map(|_| {
                let anchor = rng.gen_range(0..cats);
                (0..raters)
                    .map(|_| if rng.gen_bool(bias) { anchor } else { rng.gen_range(0..cats) })
                    .collect()
            })
            .collect();
        let k = fleiss_kappa(&ratings, cats).unwrap();
        if k.degenerate {
            continue;
        }
        let want = common::kappa_oracle(&ratings);
        assert!((k.value - want).abs() <= 1e-12, "{} vs {want}", k.value);
        checked += 1;
    }
}

fn arb_rating() -> impl Strategy<Value = Rating> {
    prop_oneof![Just(Rating::H), Just(Rating::U), Just(Rating::N)]
}

proptest! {
    #[test]
    fn cus_ignores_relabelling(flags in prop::collection::vec(any::<bool>(), 30), perm in 0usize..6) {
        let t = exp1();
        let votes = scripted_rating_votes(&t, &outcomes(64, 0, 0, 0), 0);
        // make credibility item j unanimous exactly when flags[j]
        let cred_ids: Vec<u32> = t.items.iter().filter(|i| i.is_credibility()).map(|i| i.item_id).collect();
        let mut v1 = votes;
        for v in v1.iter_mut() {
            if let Some(j) = cred_ids.iter().position(|&c| c == v.item_id) {
                let r = if flags[j] || v.annotator_id != ANNOTATORS[1] { Rating::H } else { Rating::U };
                v.vote = Vote::Rating { rating: r };
            }
        }
        let perms = [
            [Rating::H, Rating::U, Rating::N], [Rating::H, Rating::N, Rating::U],
            [Rating::U, Rating::H, Rating::N], [Rating::U, Rating::N, Rating::H],
            [Rating::N, Rating::H, Rating::U], [Rating::N, Rating::U, Rating::H],
        ];
        let map = |r: Rating| perms[perm][r as usize];
        let v2: Vec<VoteRecord> = v1
            .iter()
            .cloned()
            .map(|mut v| {
                if let Vote::Rating { rating } = v.vote {
                    v.vote = Vote::Rating { rating: map(rating) };
                }
                v
            })
            .collect();
        let a = cus(&t, &v1).unwrap();
        prop_assert_eq!(a, cus(&t, &v2).unwrap());
        prop_assert_eq!(a.unanimous, flags.iter().filter(|f| **f).count());
    }

    #[test]
    fn unanimous_never_exceeds_majority(votes in prop::collection::vec([arb_rating(), arb_rating(), arb_rating()], 64)) {
        let t = exp1();
        let mut records = scripted_rating_votes(&t, &outcomes(64, 0, 0, 0), 30);
        let eval_ids: Vec<u32> = t.items.iter().filter(|i| !i.is_credibility()).map(|i| i.item_id).collect();
        for r in records.iter_mut() {
            if let Some(j) = eval_ids.iter().position(|&e| e == r.item_id) {
                let a = ANNOTATORS.iter().position(|&x| x == r.annotator_id).unwrap();
                r.vote = Vote::Rating { rating: votes[j][a] };
            }
        }
        let row = &tally(&t, &records).unwrap()[0];
        let (m, u) = (row.majority_counts, row.unanimous_counts);
        prop_assert!(u.h <= m.h && u.u <= m.u && u.n <= m.n);
        prop_assert_eq!(m.h + m.u + m.n + m.three_way, 64);
        let three_way = votes.iter().filter(|v| majority_label(&v[..]).unwrap() == Majority::ThreeWay).count();
        prop_assert_eq!(m.three_way, three_way);
    }
}
