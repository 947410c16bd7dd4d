use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regionseq::eval::{confusion_matrix, k_fold, majority_vote, split, EvalReport, PlanKind};

struct Tally {
    tp: u64,
    fn_: u64,
    fp: u64,
    tn: u64,
}

fn tally(preds: &[usize], labels: &[usize], class: usize) -> Tally {
    let mut t = Tally {
        tp: 0,
        fn_: 0,
        fp: 0,
        tn: 0,
    };
    for (&p, &y) in preds.iter().zip(labels) {
        match (y == class, p == class) {
            (true, true) => t.tp += 1,
            (true, false) => t.fn_ += 1,
            (false, true) => t.fp += 1,
            (false, false) => t.tn += 1,
        }
    }
    t
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[test]
fn metrics_match_brute_force_tally() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for c in 2..=4 {
        let labels: Vec<usize> = (0..1000).map(|_| rng.random_range(0..c)).collect();
        let preds: Vec<usize> = (0..1000).map(|_| rng.random_range(0..c)).collect();
        let cm = confusion_matrix(&preds, &labels, c).unwrap();
        let report = EvalReport::from_confusion(cm.clone(), None);
        let correct = preds.iter().zip(&labels).filter(|(p, y)| p == y).count() as u64;
        assert_eq!(report.accuracy, ratio(correct, 1000));
        for k in 0..c {
            let t = tally(&preds, &labels, k);
            assert_eq!(cm.true_positives(k), t.tp);
            assert_eq!(cm.false_negatives(k), t.fn_);
            assert_eq!(cm.false_positives(k), t.fp);
            assert_eq!(cm.true_negatives(k), t.tn);
            assert_eq!(report.sensitivity[k], ratio(t.tp, t.tp + t.fn_));
            assert_eq!(report.specificity[k], ratio(t.tn, t.tn + t.fp));
        }
    }
}

proptest! {
    #[test]
    fn per_class_sums_are_consistent(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200)
    ) {
        let (preds, labels): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let cm = confusion_matrix(&preds, &labels, 4).unwrap();
        let n = labels.len() as u64;
        for k in 0..4 {
            let row = labels.iter().filter(|&&y| y == k).count() as u64;
            prop_assert_eq!(cm.true_positives(k) + cm.false_negatives(k), row);
            prop_assert_eq!(cm.true_negatives(k) + cm.false_positives(k), n - row);
        }
        let indicator: f64 = preds.iter().zip(&labels).map(|(p, y)| if p == y { 1.0 } else { 0.0 }).sum();
        prop_assert!((cm.accuracy().unwrap() - indicator / n as f64).abs() < 1e-15);
    }

    #[test]
    fn k_fold_partitions_the_dataset(
        labels in prop::collection::vec(0usize..3, 2..120),
        k in 2usize..11,
        seed in 0u64..1000,
    ) {
        prop_assume!(k <= labels.len());
        let plan = k_fold(&labels, 3, k, seed).unwrap();
        prop_assert_eq!(plan.fold_count(), k);
        let mut seen = BTreeSet::new();
        for f in 0..k {
            let (train, test) = plan.fold(f).unwrap();
            prop_assert_eq!(train.len() + test.len(), labels.len());
            let t: BTreeSet<usize> = test.iter().copied().collect();
            prop_assert!(train.iter().all(|i| !t.contains(i)));
            for i in test {
                prop_assert!(seen.insert(i), "index {} in two test folds", i);
            }
        }
        prop_assert_eq!(seen.len(), labels.len());
        prop_assert_eq!(plan.clone(), k_fold(&labels, 3, k, seed).unwrap());
    }

    #[test]
    fn holdout_is_a_partition(labels in prop::collection::vec(0usize..3, 3..200), seed in 0u64..1000) {
        let plan = split(&labels, 3, [0.7, 0.15, 0.15], seed).unwrap();
        let PlanKind::Holdout { train, validation, test } = plan.kind else {
            panic!("holdout expected");
        };
        let mut all: Vec<usize> = train.iter().chain(&validation).chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        prop_assert_eq!(train.len(), (0.7 * labels.len() as f64).round() as usize);
    }

    #[test]
    fn majority_vote_ignores_input_order(
        votes in prop::collection::vec(0usize..4, 1..30),
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs: Vec<Vec<f64>> = votes
            .iter()
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let mut idx: Vec<usize> = (0..votes.len()).collect();
        idx.shuffle(&mut rng);
        let v2: Vec<usize> = idx.iter().map(|&i| votes[i]).collect();
        prop_assert_eq!(majority_vote(&votes, None).unwrap(), majority_vote(&v2, None).unwrap());
        // mass sums are order-dependent in the last bits; compare on exact
        // dyadic probabilities
        let dyadic: Vec<Vec<f64>> = probs.iter().map(|p| p.iter().map(|v| (v * 64.0).floor() / 64.0).collect()).collect();
        let d2: Vec<Vec<f64>> = idx.iter().map(|&i| dyadic[i].clone()).collect();
        prop_assert_eq!(
            majority_vote(&votes, Some(&dyadic)).unwrap(),
            majority_vote(&v2, Some(&d2)).unwrap()
        );
    }
}
