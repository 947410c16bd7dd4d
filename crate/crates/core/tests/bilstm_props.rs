use ndarray::{s, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regionseq::bilstm::{
    softmax, train, BiLstmModel, Checkpoint, ModelConfig, OptimizerKind, TrainConfig,
};
use regionseq::synthetic::{centroid_dataset, SequenceDatasetSpec};
use regionseq::FeatureSequence;

fn random_seq(rng: &mut ChaCha8Rng, d: usize, m: usize, label: usize) -> FeatureSequence {
    FeatureSequence::new(
        Array2::from_shape_simple_fn((d, m), || rng.random_range(-1.0..1.0)),
        label,
        "r",
    )
}

/// The same network with the two directions exchanged.
fn swapped(model: &BiLstmModel) -> BiLstmModel {
    let mut out = model.clone();
    let h = model.config.hidden_size;
    out.params.forward = model.params.backward.clone().unwrap();
    out.params.backward = Some(model.params.forward.clone());
    out.params
        .dense_w
        .slice_mut(s![.., ..h])
        .assign(&model.params.dense_w.slice(s![.., h..]));
    out.params
        .dense_w
        .slice_mut(s![.., h..])
        .assign(&model.params.dense_w.slice(s![.., ..h]));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-15.0f64..15.0, 2..8)) {
        let p = softmax(&logits.into());
        prop_assert!((p.sum() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn reversing_the_sequence_swaps_directions(
        seed in 0u64..10_000,
        d in 1usize..6,
        h in 1usize..5,
        c in 2usize..4,
        m in 1usize..9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = BiLstmModel::new(ModelConfig::new(d, h, c), seed).unwrap();
        let seq = random_seq(&mut rng, d, m, 0);
        let p = model.predict_proba(&seq).unwrap();
        let q = swapped(&model).predict_proba(&seq.reversed()).unwrap();
        for (a, b) in p.iter().zip(q.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn any_length_is_accepted(seed in 0u64..1000, m in 1usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = BiLstmModel::new(ModelConfig::new(4, 3, 3), seed).unwrap();
        let seq = random_seq(&mut rng, 4, m, 2);
        let mut grng = ChaCha8Rng::seed_from_u64(seed);
        let (loss, grads, pass) = model.compute_gradients(&seq, 2, true, &mut grng).unwrap();
        prop_assert!(loss.is_finite() && grads.all_finite());
        prop_assert_eq!(pass.states.h.ncols(), m);
        prop_assert_eq!(grads.element_count(), model.parameter_count());
    }
}

#[test]
fn inference_is_bit_exact_across_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = BiLstmModel::new(ModelConfig::new(5, 4, 3).with_dropout(0.5), 5).unwrap();
    let seq = random_seq(&mut rng, 5, 11, 1);
    let a = model.predict_proba(&seq).unwrap();
    for _ in 0..5 {
        let b = model.predict_proba(&seq).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

fn small_dataset(seed: u64) -> Vec<FeatureSequence> {
    centroid_dataset(&SequenceDatasetSpec {
        classes: 2,
        dim: 12,
        per_class: 12,
        min_len: 3,
        max_len: 15,
        noise: 0.3,
        signal_columns: None,
        seed,
    })
}

#[test]
fn equal_seeds_give_identical_histories() {
    let data = small_dataset(1);
    let (tr, val) = data.split_at(18);
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: 1e-3,
        max_epochs: 6,
        seed: 42,
        ..TrainConfig::default()
    };
    let run = || {
        let model = BiLstmModel::new(ModelConfig::new(12, 6, 2), 42).unwrap();
        train(model, tr, val, &cfg).unwrap()
    };
    let (m1, h1) = run();
    let (m2, h2) = run();
    assert_eq!(h1, h2);
    assert_eq!(m1.params, m2.params);
    let bits = |h: &regionseq::bilstm::TrainHistory| -> Vec<u64> {
        h.epochs.iter().map(|e| e.train_loss.to_bits()).collect()
    };
    assert_eq!(bits(&h1), bits(&h2));
}

#[test]
fn adam_training_loss_decreases_over_first_epochs() {
    let data = centroid_dataset(&SequenceDatasetSpec {
        classes: 2,
        dim: 24,
        per_class: 30,
        min_len: 3,
        max_len: 15,
        noise: 0.3,
        signal_columns: None,
        seed: 3,
    });
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: 1e-3,
        max_epochs: 5,
        patience: None,
        seed: 3,
        ..TrainConfig::default()
    };
    let model = BiLstmModel::new(ModelConfig::new(24, 16, 2), 3).unwrap();
    let (_, history) = train(model, &data, &[], &cfg).unwrap();
    let losses: Vec<f64> = history.epochs.iter().map(|e| e.train_loss).collect();
    assert_eq!(losses.len(), 5);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn checkpoint_restores_identical_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = BiLstmModel::new(ModelConfig::new(3, 2, 2), 8).unwrap();
    let path = dir.path().join("model.json");
    Checkpoint::new(model.clone(), 8, Some(TrainConfig::default()))
        .save(&path)
        .unwrap();
    let restored = Checkpoint::load(&path).unwrap().model;
    let seq = random_seq(&mut rng, 3, 6, 0);
    assert_eq!(
        model.predict_proba(&seq).unwrap(),
        restored.predict_proba(&seq).unwrap()
    );
}
