//! Shared fixtures and checks for the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;

use yieldfuse::condopt::{
    enumerate_conditions, pair_of, rank_conditions, reactant_pairs, run_benchmark,
    BenchmarkOptions, ConstantPredictor, OptimizationReport, OraclePredictor,
};
use yieldfuse::data::{
    out_of_sample_splits, random_folds, Component, DatasetSchema, ReactionRecord,
};
use yieldfuse::seed;
use yieldfuse::smiles::{parse_smiles, tokenize};

pub const SMILES_CORPUS: [&str; 50] = [
    // organic subset
    "C",
    "CC",
    "CCO",
    "CC#N",
    "C=C",
    "ClCCBr",
    "OC(=O)C",
    "CC(C)(C)O",
    "FC(F)(F)c1ccccc1",
    "CN(C)C=O",
    "C1CCOC1",
    "CS(C)=O",
    "BrC(Br)Br",
    "ICI",
    "O=C=O",
    // aromatic and heteroaromatic rings
    "c1ccccc1",
    "c1ccncc1",
    "c1ccoc1",
    "c1ccsc1",
    "c1cc[nH]c1",
    "c1ccc2ccccc2c1",
    "Cc1ccon1",
    "c1ccc2oncc2c1",
    "Clc1ccc2ncccc2c1",
    "COc1ccc(Br)cc1",
    // brackets: charges, isotopes, hydrogens, metals
    "[Na+].[Cl-]",
    "[13CH4]",
    "[NH4+]",
    "[O-][N+](=O)c1ccccc1",
    "[K+].[K+].[K+].[O-]P(=O)([O-])[O-]",
    "F[B-](F)(F)c1ccccc1.[K+]",
    "[Fe+2]",
    "[2H]C([2H])([2H])O",
    "[Li+].CC(C)(C)[O-]",
    "[Pd]",
    // ring closures beyond 9 and multi-ring systems
    "C%10CCCCC%10",
    "C%12CC%13CCC%12C%13",
    "C1CC2CC1CC2",
    "C1C2CC3CC1CC(C2)C3",
    "C12(CCCCC1)CCCCC2",
    "c1ccc2c(c1)ccc1ccccc12",
    // branches and bonds
    "CC(C)c1cc(C(C)C)c(-c2ccccc2P(C2CCCCC2)C2CCCCC2)c(C(C)C)c1",
    "CCN=P(N=P(N(C)C)(N(C)C)N(C)C)(N(C)C)N(C)C",
    "CN1CCCN2CCCN=C12",
    "C/C=C/C",
    "F/C=C\\F",
    "N[C@@H](C)C(=O)O",
    // multi-component and reaction strings
    "CCO.CC(=O)O",
    "CCO.CC(=O)O>>CCOC(C)=O",
    "OB(O)c1ccccc1.Brc1ccccc1>[Pd]>c1ccc(-c2ccccc2)cc1",
];

/// (SMILES, heavy atoms, bonds, ring closures), counted by hand.
pub const HAND_COUNTS: [(&str, usize, usize, usize); 10] = [
    ("CCO", 3, 2, 0),
    ("c1ccccc1", 6, 6, 1),
    ("CC(=O)Oc1ccccc1C(=O)O", 13, 13, 1),
    ("C1CC2CC1CC2", 7, 8, 2),
    ("[Na+].[Cl-]", 2, 0, 0),
    ("C%10CCCCC%10", 6, 6, 1),
    ("[13CH4]", 1, 0, 0),
    ("c1ccc2ccccc2c1", 10, 11, 2),
    ("OC(=O)CCC(N)C(=O)O.[K+]", 11, 9, 0),
    ("C1C2CC3CC1CC(C2)C3", 10, 12, 3),
];

pub fn check_parser_suite() -> Result<String, String> {
    for s in SMILES_CORPUS {
        let t = tokenize(s).map_err(|e| format!("{s}: {e}"))?;
        if t.joined() != s {
            return Err(format!("{s}: tokens rejoin to {}", t.joined()));
        }
    }
    for (s, atoms, bonds, rings) in HAND_COUNTS {
        let m = parse_smiles(s).map_err(|e| format!("{s}: {e}"))?;
        let got = (m.atoms.len(), m.bonds.len(), m.ring_count);
        if got != (atoms, bonds, rings) {
            return Err(format!(
                "{s}: got {got:?}, expected {:?}",
                (atoms, bonds, rings)
            ));
        }
    }
    Ok(format!(
        "{} lossless, {} hand-counted",
        SMILES_CORPUS.len(),
        HAND_COUNTS.len()
    ))
}

fn group_records(groups: &[usize]) -> Vec<ReactionRecord> {
    groups
        .iter()
        .map(|g| ReactionRecord {
            components: vec![
                Component {
                    role: "reactant".into(),
                    smiles: "CC".into(),
                    name: None,
                },
                Component {
                    role: "additive".into(),
                    smiles: format!("C{}", "C".repeat(*g)),
                    name: None,
                },
            ],
            yield_fraction: 0.5,
            raw_yield: 50.0,
        })
        .collect()
}

/// Randomized split trials: folds are disjoint and complete, group splits
/// never share a group across train and test, and test blocks cover all groups.
pub fn check_split_invariants(trials: usize, seed_base: u64) -> Result<String, String> {
    let mut rng = seed::rng(seed_base, "split-trials", 0);
    for t in 0..trials {
        let size = rng.random_range(2..300usize);
        let ratio = rng.random_range(0.05..0.95);
        let s = rng.random::<u64>();
        match random_folds(rng.random_range(1..4), ratio, s, size) {
            Ok(folds) => {
                for f in folds {
                    let train: BTreeSet<usize> = f.train.iter().copied().collect();
                    let test: BTreeSet<usize> = f.test.iter().copied().collect();
                    if !train.is_disjoint(&test) || train.len() + test.len() != size {
                        return Err(format!("trial {t}: fold overlap or loss (size {size})"));
                    }
                    if train.len() != f.train.len() || test.len() != f.test.len() {
                        return Err(format!("trial {t}: duplicate indices"));
                    }
                }
            }
            // only degenerate ratios may fail
            Err(_) => {
                let n_train = (ratio * size as f64 + 1e-9).floor() as usize;
                if n_train != 0 && n_train != size {
                    return Err(format!("trial {t}: unexpected split error"));
                }
            }
        }

        let n_groups = rng.random_range(2..30usize);
        let n_rec = rng.random_range(n_groups..n_groups * 5);
        let mut groups: Vec<usize> = (0..n_groups).collect();
        groups.extend((n_groups..n_rec).map(|_| rng.random_range(0..n_groups)));
        let records = group_records(&groups);
        let parts = rng.random_range(2..=n_groups);
        let splits = out_of_sample_splits(&records, "additive", parts)
            .map_err(|e| format!("trial {t}: {e}"))?;
        let mut covered = BTreeSet::new();
        for sp in &splits {
            let train_g: BTreeSet<usize> = sp.train.iter().map(|&i| groups[i]).collect();
            let test_g: BTreeSet<usize> = sp.test.iter().map(|&i| groups[i]).collect();
            if !train_g.is_disjoint(&test_g) {
                return Err(format!("trial {t}: group shared across train/test"));
            }
            if sp.train.len() + sp.test.len() != records.len() {
                return Err(format!("trial {t}: group split drops records"));
            }
            covered.extend(test_g);
        }
        if covered.len() != n_groups {
            return Err(format!(
                "trial {t}: test blocks cover {} of {n_groups} groups",
                covered.len()
            ));
        }
    }
    Ok(format!("{trials} trials"))
}

pub fn topk_monotone(report: &OptimizationReport) -> bool {
    report
        .topk
        .windows(2)
        .all(|w| w[0].k <= w[1].k && w[0].accuracy <= w[1].accuracy)
}

/// Oracle: fraction 1 and 100 % top-k. Constant: rankings follow combo order.
pub fn check_condopt_bounds(
    schema: &DatasetSchema,
    records: &[&ReactionRecord],
) -> Result<String, String> {
    let opts = BenchmarkOptions {
        trials: 50,
        ..BenchmarkOptions::default()
    };
    let oracle = OraclePredictor::new(schema, records);
    let rep = run_benchmark(&oracle, schema, records, &opts).map_err(|e| e.to_string())?;
    if rep.fraction_of_optimal != 1.0 {
        return Err(format!("oracle fraction {}", rep.fraction_of_optimal));
    }
    if let Some(k) = rep.topk.iter().find(|k| k.accuracy != 100.0) {
        return Err(format!("oracle top-{}% = {}", k.k, k.accuracy));
    }
    if !topk_monotone(&rep) {
        return Err("oracle top-k not monotone".into());
    }

    let constant = ConstantPredictor(0.3);
    let rep_c = run_benchmark(&constant, schema, records, &opts).map_err(|e| e.to_string())?;
    for pair in reactant_pairs(schema, records) {
        let mine: Vec<&ReactionRecord> = records
            .iter()
            .copied()
            .filter(|r| pair_of(schema, r) == pair)
            .collect();
        let combos = enumerate_conditions(schema, &mine, &pair).map_err(|e| e.to_string())?;
        let with: Vec<_> = combos.iter().map(|(c, y)| (c.clone(), Some(*y))).collect();
        let ranked = rank_conditions(&constant, schema, &pair, &with).map_err(|e| e.to_string())?;
        let expected: Vec<_> = combos.iter().map(|(c, _)| c.clone()).collect();
        let got: Vec<_> = ranked.iter().map(|s| s.combo.clone()).collect();
        if got != expected {
            return Err(format!("constant ranking differs for {}", pair.display()));
        }
    }
    if !topk_monotone(&rep_c) {
        return Err("constant top-k not monotone".into());
    }
    Ok(format!(
        "{} pairs, constant fraction {:.3}",
        rep.pairs.len(),
        rep_c.fraction_of_optimal
    ))
}
