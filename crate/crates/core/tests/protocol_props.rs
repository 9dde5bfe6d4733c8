mod common;

use yieldfuse::condopt::{
    combo_of, enumerate_conditions, pair_of, rank_conditions, run_benchmark, BenchmarkOptions,
    CondOptError, OraclePredictor, ReactantPair,
};
use yieldfuse::data::{hyperparam_subset, random_folds, Component, ReactionRecord};
use yieldfuse::synth::{synth_suzuki_miyaura, DEFAULT_NOISE};

#[test]
fn parser_corpus() {
    common::check_parser_suite().unwrap();
}

#[test]
fn split_invariants_hold() {
    common::check_split_invariants(10_000, 11).unwrap();
}

#[test]
fn protocol_arithmetic() {
    let folds = random_folds(10, 0.7, 0, 3955).unwrap();
    assert!(folds
        .iter()
        .all(|f| f.train.len() == 2768 && f.test.len() == 1187));
    let (search, holdout) = hyperparam_subset(&folds[0].train, 0).unwrap();
    assert_eq!(holdout.len(), 395);
    assert_eq!(search.len(), 2768 - 395);
}

#[test]
fn condopt_bounds_on_synthetic_suzuki() {
    let s = synth_suzuki_miyaura(0, DEFAULT_NOISE);
    let records: Vec<&ReactionRecord> = s.dataset.records.iter().collect();
    let summary = common::check_condopt_bounds(&s.dataset.schema, &records).unwrap();
    assert!(summary.starts_with("15 pairs"), "{summary}");
}

#[test]
fn random_baseline_matches_expectation() {
    let s = synth_suzuki_miyaura(1, DEFAULT_NOISE);
    let records: Vec<&ReactionRecord> = s.dataset.records.iter().collect();
    let schema = &s.dataset.schema;
    let oracle = OraclePredictor::new(schema, &records);
    let opts = BenchmarkOptions {
        trials: 1000,
        ..BenchmarkOptions::default()
    };
    let rep = run_benchmark(&oracle, schema, &records, &opts).unwrap();
    assert!(rep.pairs.iter().all(|p| p.n_combos == 384));
    let per_pair: Vec<Vec<f64>> = rep
        .pairs
        .iter()
        .map(|p| p.ranking.iter().map(|s| s.actual_yield.unwrap()).collect())
        .collect();
    let expect = yieldfuse::condopt::random_baseline_expectation(&per_pair).unwrap();
    // trial means of the per-pair averages: variance is mean(var_pair)/15/trials
    let var: f64 = per_pair
        .iter()
        .map(|ys| {
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / ys.len() as f64
        })
        .sum::<f64>()
        / (per_pair.len() * per_pair.len()) as f64;
    let se = (var / 1000.0).sqrt();
    assert!(
        (rep.random_baseline - expect).abs() < 3.0 * se,
        "{} vs {expect} (se {se})",
        rep.random_baseline
    );
}

#[test]
fn ranking_errors() {
    let s = synth_suzuki_miyaura(0, DEFAULT_NOISE);
    let schema = &s.dataset.schema;
    let records: Vec<&ReactionRecord> = s.dataset.records.iter().collect();
    let oracle = OraclePredictor::new(schema, &records);
    let pair = pair_of(schema, records[0]);
    let combo = combo_of(schema, records[0]);
    let dup = vec![(combo.clone(), None), (combo, None)];
    assert!(matches!(
        rank_conditions(&oracle, schema, &pair, &dup),
        Err(CondOptError::DuplicateCondition { .. })
    ));
    let unknown = ReactantPair {
        components: vec![
            Component {
                role: "electrophile".into(),
                smiles: "CCCl".into(),
                name: None,
            },
            Component {
                role: "nucleophile".into(),
                smiles: "OB(O)C".into(),
                name: None,
            },
        ],
    };
    assert!(matches!(
        enumerate_conditions(schema, &records, &unknown),
        Err(CondOptError::UnknownPair(_))
    ));
}
