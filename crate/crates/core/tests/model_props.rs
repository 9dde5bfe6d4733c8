use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng;
use yieldfuse::model::{
    check_model_gradients, grad_fixture, hyperparameter_search, init_model, load_checkpoint,
    load_checkpoint_for, save_checkpoint, train, AttentionSpan, Candidate, Example, FusionModel,
    ModelConfig, ModelError, TrainConfig, GRAD_CHECK_TOLERANCE,
};
use yieldfuse::seed;
use yieldfuse::smiles::{EncodedSequence, CLS_ID, PAD_ID};

fn small_config() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_heads: 2,
        n_layers: 2,
        ff_dim: 16,
        max_len: 12,
        vocab_size: 10,
        mlp_hidden: vec![8, 6],
        descriptor_dim: 5,
        dropout_rate: 0.1,
    }
}

fn random_examples(c: &ModelConfig, n: usize, s: u64) -> Vec<Example> {
    let mut rng = seed::rng(s, "examples", 0);
    (0..n)
        .map(|_| {
            let len = rng.random_range(2..=c.max_len);
            let mut ids = vec![CLS_ID];
            ids.extend((1..len).map(|_| rng.random_range(3..c.vocab_size)));
            let mut mask = vec![1u8; len];
            ids.resize(c.max_len, PAD_ID);
            mask.resize(c.max_len, 0);
            Example {
                enc: EncodedSequence {
                    ids,
                    attention_mask: mask,
                },
                descriptors: (0..c.descriptor_dim)
                    .map(|_| rng.random_range(-1.5..1.5))
                    .collect(),
                target: rng.random_range(0.0..1.0),
            }
        })
        .collect()
}

#[test]
fn full_model_gradient_check() {
    for seed in [0, 100, 200] {
        let fx = grad_fixture(seed).unwrap();
        let model = &fx.model;
        let report = check_model_gradients(&fx, 6, false).unwrap();
        assert!(
            report.coords.len() >= 200,
            "only {} coordinates",
            report.coords.len()
        );
        let sampled: BTreeSet<String> = report
            .coords
            .iter()
            .map(|c| FusionModel::param_group(&c.param))
            .collect();
        let all: BTreeSet<String> = model
            .params()
            .iter()
            .map(|(_, n, _)| FusionModel::param_group(n))
            .collect();
        assert_eq!(sampled, all);
        assert!(
            report.max_rel_err < GRAD_CHECK_TOLERANCE,
            "seed {}: worst {:?}",
            fx.seed,
            report.worst()
        );
    }
}

#[test]
fn corrupted_backward_is_caught() {
    let fx = grad_fixture(0).unwrap();
    let report = check_model_gradients(&fx, 6, true).unwrap();
    assert!(report.max_rel_err > GRAD_CHECK_TOLERANCE);
}

#[test]
fn relu_margin_tracks_kinks() {
    let mut c = small_config();
    c.descriptor_dim = 2;
    c.mlp_hidden = vec![2];
    let mut m = init_model(&c, 0).unwrap();
    let w = m.params().find("mlp.0.w").unwrap();
    m.params_mut()
        .get_mut(w)
        .data_mut()
        .copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    assert_eq!(m.relu_margin(&[0.3, -0.2]).unwrap(), 0.2);
    assert_eq!(m.relu_margin(&[0.0, 1.0]).unwrap(), 0.0);
}

#[test]
fn zero_lr_leaves_parameters_untouched() {
    let c = small_config();
    let model = init_model(&c, 5).unwrap();
    let data = random_examples(&c, 10, 2);
    let tc = TrainConfig {
        lr: 0.0,
        batch_size: 4,
        epochs: 3,
        ..TrainConfig::default()
    };
    let out = train(model.clone(), &data, &data[..3], &tc).unwrap();
    assert_eq!(out.model.params(), model.params());
    assert_eq!(out.steps, 9);
}

#[test]
fn training_is_deterministic_and_selects_best_epoch() {
    let c = small_config();
    let data = random_examples(&c, 24, 3);
    let tc = TrainConfig {
        lr: 3e-3,
        batch_size: 8,
        epochs: 6,
        seed: 17,
        ..TrainConfig::default()
    };
    let a = train(init_model(&c, 1).unwrap(), &data[..18], &data[18..], &tc).unwrap();
    let b = train(init_model(&c, 1).unwrap(), &data[..18], &data[18..], &tc).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params(), b.model.params());

    let min = a
        .history
        .iter()
        .map(|r| r.val_mse)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(a.best_val_mse, min);
    let recomputed = yieldfuse::model::evaluate_mse(&a.model, &data[18..]).unwrap();
    assert_eq!(recomputed, min);
    assert_eq!(a.history.len(), 6);
}

#[test]
fn training_reduces_loss() {
    let c = small_config();
    let data = random_examples(&c, 16, 4);
    let before = yieldfuse::model::evaluate_mse(&init_model(&c, 2).unwrap(), &data).unwrap();
    let tc = TrainConfig {
        lr: 3e-3,
        batch_size: 8,
        epochs: 40,
        dropout_rate: 0.0,
        ..TrainConfig::default()
    };
    let out = train(init_model(&c, 2).unwrap(), &data, &[], &tc).unwrap();
    assert!(
        out.best_val_mse < 0.5 * before,
        "{before} -> {}",
        out.best_val_mse
    );
}

#[test]
fn target_mse_stops_early() {
    let c = small_config();
    let data = random_examples(&c, 20, 6);
    let full = TrainConfig {
        batch_size: 4,
        epochs: 6,
        dropout_rate: 0.0,
        ..TrainConfig::default()
    };
    let long = train(init_model(&c, 0).unwrap(), &data, &[], &full).unwrap();
    let goal = long.history[1].val_mse;
    let short = TrainConfig {
        target_mse: Some(goal),
        ..full.clone()
    };
    let out = train(init_model(&c, 0).unwrap(), &data, &[], &short).unwrap();
    assert!(out.history.len() <= 2);
    assert!(out.best_val_mse <= goal);
    let bad = TrainConfig {
        target_mse: Some(-1.0),
        ..full
    };
    assert!(bad.validate().is_err());
}

#[test]
fn max_steps_caps_training() {
    let c = small_config();
    let data = random_examples(&c, 20, 6);
    let tc = TrainConfig {
        batch_size: 4,
        epochs: 10,
        max_steps: Some(7),
        ..TrainConfig::default()
    };
    let out = train(init_model(&c, 0).unwrap(), &data, &[], &tc).unwrap();
    assert_eq!(out.steps, 7);
    assert_eq!(out.history.len(), 2);
    assert!(matches!(
        train(init_model(&c, 0).unwrap(), &[], &[], &tc),
        Err(ModelError::EmptyDataset)
    ));
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let c = small_config();
    let model = init_model(&c, 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.params(), model.params());
    for ex in random_examples(&c, 8, 9) {
        let a = model.predict(&ex.enc, &ex.descriptors).unwrap();
        let b = back.predict(&ex.enc, &ex.descriptors).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let mut other = c.clone();
    other.d_model = 12;
    other.n_heads = 3;
    assert!(matches!(
        load_checkpoint_for(&path, &other),
        Err(ModelError::ShapeMismatch(_))
    ));
    assert!(load_checkpoint_for(&path, &c).is_ok());
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let c = small_config();
    let model = init_model(&c, 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    for cut in [0, 4, 20, bytes.len() / 2, bytes.len() - 1] {
        let p = dir.path().join(format!("cut{cut}"));
        std::fs::write(&p, &bytes[..cut]).unwrap();
        let r = load_checkpoint(&p);
        assert!(
            matches!(r, Err(ModelError::BadMagic(_)) | Err(ModelError::Io(_))),
            "cut {cut}: {r:?}"
        );
    }

    let p = dir.path().join("garbage");
    std::fs::write(&p, b"this is not a checkpoint at all").unwrap();
    assert!(matches!(load_checkpoint(&p), Err(ModelError::BadMagic(_))));

    let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let header = std::str::from_utf8(&bytes[8..8 + hlen]).unwrap();
    let bumped = header.replacen("\"version\":1", "\"version\":9", 1);
    assert_eq!(bumped.len(), header.len());
    let mut v = bytes.clone();
    v[8..8 + hlen].copy_from_slice(bumped.as_bytes());
    let p = dir.path().join("v9");
    std::fs::write(&p, v).unwrap();
    assert!(matches!(
        load_checkpoint(&p),
        Err(ModelError::VersionMismatch(9))
    ));

    assert!(matches!(
        load_checkpoint(&dir.path().join("missing")),
        Err(ModelError::Io(_))
    ));
}

#[test]
fn search_picks_first_of_equals() {
    let c = small_config();
    let data = random_examples(&c, 12, 7);
    let tc = TrainConfig {
        batch_size: 4,
        epochs: 2,
        ..TrainConfig::default()
    };
    let cand = Candidate {
        model: c.clone(),
        train: tc.clone(),
    };
    let one = hyperparameter_search(std::slice::from_ref(&cand), &data[..8], &data[8..]).unwrap();
    assert_eq!(one.best_index, 0);

    let mut worse = cand.clone();
    worse.train.lr = 0.0;
    let grid = [worse, cand.clone(), cand.clone()];
    let r = hyperparameter_search(&grid, &data[..8], &data[8..]).unwrap();
    assert_eq!(r.rmses[1], r.rmses[2]);
    assert!(r.best_index == 0 || r.best_index == 1);
    assert!(r.rmses.iter().all(|x| r.rmses[r.best_index] <= *x));
    assert!(matches!(
        hyperparameter_search(&[], &data, &data),
        Err(ModelError::EmptyGrid)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn masked_positions_are_inert(seed in 0u64..1000, active in 1usize..12, fill in prop::collection::vec(0usize..10, 12)) {
        let c = small_config();
        let model = init_model(&c, seed % 7).unwrap();
        let mut ex = random_examples(&c, 1, seed).remove(0);
        ex.enc.attention_mask = (0..c.max_len).map(|i| u8::from(i < active)).collect();
        let base = model.predict(&ex.enc, &ex.descriptors).unwrap();
        let mut altered = ex.enc.clone();
        altered.ids[active..].copy_from_slice(&fill[active..c.max_len]);
        prop_assert_eq!(model.predict(&altered, &ex.descriptors).unwrap().to_bits(), base.to_bits());
        let full = model.predict_with(&ex.enc, &ex.descriptors, AttentionSpan::FullMasked).unwrap();
        prop_assert!((full - base).abs() < 1e-12);
    }
}
