//! Synthetic stand-ins for the two HTE datasets.
//!
//! The grids reproduce the published shapes (15 aryl halides × 4 ligands ×
//! 3 bases × 23 additives with 185 wells missing; 15 reactant pairs × 12
//! ligands × 8 reagents × 4 solvents). Yields come from a planted function
//! of per-compound features with main effects and pairwise interactions,
//! squashed through a sigmoid, plus small Gaussian noise. The noiseless
//! values are returned alongside so fitted models can be scored against the
//! truth rather than the noisy labels.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Component, Dataset, DatasetSchema, ReactionRecord};
use crate::descriptors::DescriptorTable;
use crate::seed;

pub const BH_MISSING_WELLS: usize = 185;
/// Width of the DFT-style descriptor rows.
pub const SYNTH_FEATURES: usize = 6;
pub const DEFAULT_NOISE: f64 = 0.02;

pub struct SyntheticData {
    pub dataset: Dataset,
    /// Per-compound descriptor table (Buchwald–Hartwig only).
    pub descriptors: Option<DescriptorTable>,
    /// Noiseless yield fraction of every record.
    pub planted: Vec<f64>,
}

type Entry = (&'static str, &'static str);

const ARYL_HALIDES: [Entry; 15] = [
    ("FC(F)(F)c1ccc(Cl)cc1", "4-chlorobenzotrifluoride"),
    ("FC(F)(F)c1ccc(Br)cc1", "4-bromobenzotrifluoride"),
    ("FC(F)(F)c1ccc(I)cc1", "4-iodobenzotrifluoride"),
    ("COc1ccc(Cl)cc1", "4-chloroanisole"),
    ("COc1ccc(Br)cc1", "4-bromoanisole"),
    ("COc1ccc(I)cc1", "4-iodoanisole"),
    ("CCc1ccc(Cl)cc1", "1-chloro-4-ethylbenzene"),
    ("CCc1ccc(Br)cc1", "1-bromo-4-ethylbenzene"),
    ("CCc1ccc(I)cc1", "1-ethyl-4-iodobenzene"),
    ("Clc1ccccn1", "2-chloropyridine"),
    ("Brc1ccccn1", "2-bromopyridine"),
    ("Ic1ccccn1", "2-iodopyridine"),
    ("Clc1cccnc1", "3-chloropyridine"),
    ("Brc1cccnc1", "3-bromopyridine"),
    ("Ic1cccnc1", "3-iodopyridine"),
];

const BH_LIGANDS: [Entry; 4] = [
    (
        "CC(C)c1cc(C(C)C)c(-c2ccccc2P(C2CCCCC2)C2CCCCC2)c(C(C)C)c1",
        "XPhos",
    ),
    (
        "CC(C)c1cc(C(C)C)c(-c2ccccc2P(C(C)(C)C)C(C)(C)C)c(C(C)C)c1",
        "t-BuXPhos",
    ),
    (
        "COc1ccc(OC)c(P(C(C)(C)C)C(C)(C)C)c1-c1c(C(C)C)cc(C(C)C)cc1C(C)C",
        "t-BuBrettPhos",
    ),
    (
        "COc1ccc(OC)c(P(C23CC4CC(CC(C4)C2)C3)C23CC4CC(CC(C4)C2)C3)c1-c1c(C(C)C)cc(C(C)C)cc1C(C)C",
        "AdBrettPhos",
    ),
];

const BH_BASES: [Entry; 3] = [
    ("CCN=P(N=P(N(C)C)(N(C)C)N(C)C)(N(C)C)N(C)C", "P2Et"),
    ("CN(C)C(=NC(C)(C)C)N(C)C", "BTMG"),
    ("CN1CCCN2CCCN=C12", "MTBD"),
];

const BH_ADDITIVES: [Entry; 23] = [
    ("Cc1ccon1", "3-methylisoxazole"),
    ("Cc1ccno1", "5-methylisoxazole"),
    ("Cc1cc(C)on1", "3,5-dimethylisoxazole"),
    ("c1ccc(-c2ccon2)cc1", "3-phenylisoxazole"),
    ("c1ccc(-c2ccno2)cc1", "5-phenylisoxazole"),
    ("Cc1cc(-c2ccccc2)on1", "3-phenyl-5-methylisoxazole"),
    ("Cc1cc(-c2ccccc2)no1", "5-phenyl-3-methylisoxazole"),
    ("CCOC(=O)c1ccon1", "ethyl isoxazole-3-carboxylate"),
    (
        "CCOC(=O)c1cc(C)on1",
        "ethyl 5-methylisoxazole-3-carboxylate",
    ),
    ("CCOC(=O)c1ccno1", "ethyl isoxazole-5-carboxylate"),
    (
        "CCOC(=O)c1cc(C)no1",
        "ethyl 3-methylisoxazole-5-carboxylate",
    ),
    (
        "COC(=O)c1cc(-c2ccccc2)on1",
        "methyl 5-phenylisoxazole-3-carboxylate",
    ),
    (
        "COC(=O)c1cc(-c2ccco2)on1",
        "methyl 5-(furan-2-yl)isoxazole-3-carboxylate",
    ),
    (
        "COC(=O)c1cc(-c2cccs2)on1",
        "methyl 5-(thiophen-2-yl)isoxazole-3-carboxylate",
    ),
    ("Fc1ccc(-c2ccno2)cc1", "5-(4-fluorophenyl)isoxazole"),
    ("Clc1ccc(-c2ccon2)cc1", "3-(4-chlorophenyl)isoxazole"),
    ("c1ccc(-c2cc(-c3ccccc3)on2)cc1", "3,5-diphenylisoxazole"),
    (
        "c1ccc(CN(Cc2ccccc2)c2ccon2)cc1",
        "N,N-dibenzylisoxazol-3-amine",
    ),
    ("c1ccc2oncc2c1", "1,2-benzisoxazole"),
    ("Cc1ccc2oncc2c1", "5-methyl-1,2-benzisoxazole"),
    ("c1ccc(-c2noc3ccccc23)cc1", "3-phenyl-1,2-benzisoxazole"),
    ("Cc1noc(C)c1C", "3,4,5-trimethylisoxazole"),
    ("COc1ccc(-c2ccon2)cc1", "3-(4-methoxyphenyl)isoxazole"),
];

const SM_ELECTROPHILES: [Entry; 5] = [
    ("Clc1ccc2ncccc2c1", "6-chloroquinoline"),
    ("Brc1ccc2ncccc2c1", "6-bromoquinoline"),
    ("Ic1ccc2ncccc2c1", "6-iodoquinoline"),
    ("O=S(=O)(Oc1ccc2ncccc2c1)C(F)(F)F", "6-quinolyl triflate"),
    ("Cc1ccc(S(=O)(=O)Oc2ccc3ncccc3c2)cc1", "6-quinolyl tosylate"),
];

const SM_NUCLEOPHILES: [Entry; 3] = [
    ("OB(O)c1ccc2c(cnn2C2CCCCO2)c1", "boronic acid"),
    (
        "CC1(C)OB(c2ccc3c(cnn3C3CCCCO3)c2)OC1(C)C",
        "pinacol boronate",
    ),
    ("F[B-](F)(F)c1ccc2c(cnn2C2CCCCO2)c1.[K+]", "trifluoroborate"),
];

const SM_LIGANDS: [Entry; 12] = [
    ("CC(C)(C)P(C(C)(C)C)C(C)(C)C", "P(tBu)3"),
    ("c1ccc(P(c2ccccc2)c2ccccc2)cc1", "PPh3"),
    ("CN(C)c1ccc(P(C(C)(C)C)C(C)(C)C)cc1", "AmPhos"),
    ("C1CCC(P(C2CCCCC2)C2CCCCC2)CC1", "P(Cy)3"),
    ("Cc1ccccc1P(c1ccccc1C)c1ccccc1C", "P(o-Tol)3"),
    (
        "CCCCP(C12CC3CC(CC(C3)C1)C2)C12CC3CC(CC(C3)C1)C2",
        "CataCXium A",
    ),
    ("COc1cccc(OC)c1-c1ccccc1P(C1CCCCC1)C1CCCCC1", "SPhos"),
    (
        "CC(C)(C)P(C(C)(C)C)[C-]1C=CC=C1.CC(C)(C)P(C(C)(C)C)[C-]1C=CC=C1.[Fe+2]",
        "dtbpf",
    ),
    (
        "CC(C)c1cc(C(C)C)c(-c2ccccc2P(C2CCCCC2)C2CCCCC2)c(C(C)C)c1",
        "XPhos",
    ),
    (
        "[C-]1(P(c2ccccc2)c2ccccc2)C=CC=C1.[C-]1(P(c2ccccc2)c2ccccc2)C=CC=C1.[Fe+2]",
        "dppf",
    ),
    (
        "CC1(C)c2cccc(P(c3ccccc3)c3ccccc3)c2Oc2c(P(c3ccccc3)c3ccccc3)cccc21",
        "Xantphos",
    ),
    ("", "None"),
];

const SM_REAGENTS: [Entry; 8] = [
    ("[OH-].[Na+]", "NaOH"),
    ("OC(=O)[O-].[Na+]", "NaHCO3"),
    ("[F-].[Cs+]", "CsF"),
    ("[K+].[K+].[K+].[O-]P(=O)([O-])[O-]", "K3PO4"),
    ("[K+].[OH-]", "KOH"),
    ("[Li+].CC(C)(C)[O-]", "LiOtBu"),
    ("CCN(CC)CC", "Et3N"),
    ("", "None"),
];

const SM_SOLVENTS: [Entry; 4] = [
    ("CC#N", "MeCN"),
    ("C1CCOC1", "THF"),
    ("CN(C)C=O", "DMF"),
    ("CO", "MeOH"),
];

fn component(role: &str, e: &Entry) -> Component {
    Component {
        role: role.to_string(),
        smiles: e.0.to_string(),
        name: Some(e.1.to_string()),
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Planted score: main effects `wᵣ·fᵣ` plus bilinear interactions `fᵣᵀ M fₛ`
/// for every role pair, each term drawn once from the seed.
struct Planted {
    main: Vec<Vec<f64>>,
    pairs: Vec<((usize, usize), Vec<f64>)>,
}

impl Planted {
    fn draw(seed: u64, n_roles: usize, width: usize) -> Self {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut rng = seed::rng(seed, "planted", 0);
        let main = (0..n_roles)
            .map(|_| (0..width).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let mut pairs = Vec::new();
        for a in 0..n_roles {
            for b in a + 1..n_roles {
                let m = (0..width * width)
                    .map(|_| 0.5 * normal.sample(&mut rng) / width as f64)
                    .collect();
                pairs.push(((a, b), m));
            }
        }
        Planted { main, pairs }
    }

    fn score(&self, feats: &[&[f64]]) -> f64 {
        let mut z = 0.0;
        for (w, f) in self.main.iter().zip(feats) {
            z += w.iter().zip(f.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        for ((a, b), m) in &self.pairs {
            let (fa, fb) = (feats[*a], feats[*b]);
            let w = fb.len();
            for (i, x) in fa.iter().enumerate() {
                for (j, y) in fb.iter().enumerate() {
                    z += x * m[i * w + j] * y;
                }
            }
        }
        z
    }
}

/// Per-compound latent features, one row per entry of each role list.
fn draw_features(seed: u64, lists: &[&[Entry]], width: usize) -> Vec<Vec<Vec<f64>>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    lists
        .iter()
        .enumerate()
        .map(|(r, list)| {
            let mut rng = seed::rng(seed, "compound-features", r as u64);
            list.iter()
                .map(|e| {
                    if e.0.is_empty() {
                        vec![0.0; width]
                    } else {
                        (0..width).map(|_| normal.sample(&mut rng)).collect()
                    }
                })
                .collect()
        })
        .collect()
}

/// Scores every grid cell, then rescales so the logits have a fixed mean
/// and spread; this keeps yields off the sigmoid plateaus.
fn planted_yields(
    cells: &[Vec<usize>],
    feats: &[Vec<Vec<f64>>],
    planted: &Planted,
    mean: f64,
    spread: f64,
) -> Vec<f64> {
    let z: Vec<f64> = cells
        .iter()
        .map(|cell| {
            let f: Vec<&[f64]> = cell
                .iter()
                .enumerate()
                .map(|(r, &i)| feats[r][i].as_slice())
                .collect();
            planted.score(&f)
        })
        .collect();
    let m = z.iter().sum::<f64>() / z.len() as f64;
    let sd = (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / z.len() as f64).sqrt();
    z.iter()
        .map(|v| sigmoid(mean + spread * (v - m) / sd))
        .collect()
}

fn grid(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

fn noisy_records(
    schema: &DatasetSchema,
    lists: &[&[Entry]],
    cells: &[Vec<usize>],
    planted: &[f64],
    noise: f64,
    seed: u64,
) -> Vec<ReactionRecord> {
    let normal = Normal::new(0.0, noise.max(0.0)).expect("noise std");
    let mut rng = seed::rng(seed, "yield-noise", 0);
    cells
        .iter()
        .zip(planted)
        .map(|(cell, &clean)| {
            let eps = if noise > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            // rounded to 0.01 % like a plate reader export
            let raw = (100.0 * (clean + eps).clamp(0.0, 1.0) * 100.0).round() / 100.0;
            ReactionRecord {
                components: cell
                    .iter()
                    .enumerate()
                    .map(|(r, &i)| component(schema.roles[r], &lists[r][i]))
                    .collect(),
                yield_fraction: raw / 100.0,
                raw_yield: raw,
            }
        })
        .collect()
}

/// 3955-record Buchwald–Hartwig stand-in with a DFT-style descriptor table.
pub fn synth_buchwald_hartwig(seed: u64, noise: f64) -> SyntheticData {
    let schema = DatasetSchema::buchwald_hartwig();
    let lists: [&[Entry]; 4] = [&ARYL_HALIDES, &BH_LIGANDS, &BH_BASES, &BH_ADDITIVES];
    let feats = draw_features(seed, &lists, SYNTH_FEATURES);
    let planted_fn = Planted::draw(seed, lists.len(), SYNTH_FEATURES);

    let mut cells = grid(&lists.map(|l| l.len()));
    let mut rng = seed::rng(seed, "missing-wells", 0);
    let mut drop = index::sample(&mut rng, cells.len(), BH_MISSING_WELLS).into_vec();
    drop.sort_unstable();
    for i in drop.into_iter().rev() {
        cells.remove(i);
    }
    let planted = planted_yields(&cells, &feats, &planted_fn, -0.6, 1.6);
    let records = noisy_records(&schema, &lists, &cells, &planted, noise, seed);

    let columns: Vec<String> = (1..=SYNTH_FEATURES).map(|i| format!("f{i}")).collect();
    let mut rows = Vec::new();
    for (r, list) in lists.iter().enumerate() {
        for (i, e) in list.iter().enumerate() {
            // observed descriptors are an affine view of the latent features
            let mut jitter = seed::rng(seed, "descriptor-scale", (r * 100 + i) as u64);
            let v: Vec<f64> = feats[r][i]
                .iter()
                .enumerate()
                .map(|(k, x)| (k as f64 + 1.0) * x + 0.1 * jitter.random_range(-1.0..1.0))
                .collect();
            rows.push((e.0.to_string(), v));
        }
    }
    let table = DescriptorTable::from_rows(columns, rows).expect("distinct compounds");
    SyntheticData {
        dataset: Dataset {
            schema,
            records,
            clamped_rows: 0,
        },
        descriptors: Some(table),
        planted,
    }
}

/// 5760-record Suzuki–Miyaura stand-in; descriptors are left to the structural fallback.
pub fn synth_suzuki_miyaura(seed: u64, noise: f64) -> SyntheticData {
    let schema = DatasetSchema::suzuki_miyaura();
    let lists: [&[Entry]; 5] = [
        &SM_ELECTROPHILES,
        &SM_NUCLEOPHILES,
        &SM_LIGANDS,
        &SM_REAGENTS,
        &SM_SOLVENTS,
    ];
    let feats = draw_features(seed, &lists, SYNTH_FEATURES);
    let planted_fn = Planted::draw(seed, lists.len(), SYNTH_FEATURES);
    let cells = grid(&lists.map(|l| l.len()));
    let planted = planted_yields(&cells, &feats, &planted_fn, -0.4, 1.8);
    let records = noisy_records(&schema, &lists, &cells, &planted, noise, seed);
    SyntheticData {
        dataset: Dataset {
            schema,
            records,
            clamped_rows: 0,
        },
        descriptors: None,
        planted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    #[test]
    fn shapes_match_published_counts() {
        let bh = synth_buchwald_hartwig(1, DEFAULT_NOISE);
        assert_eq!(bh.dataset.len(), 3955);
        assert_eq!(bh.planted.len(), 3955);
        let sm = synth_suzuki_miyaura(1, DEFAULT_NOISE);
        assert_eq!(sm.dataset.len(), 5760);
        assert_eq!(bh.descriptors.as_ref().unwrap().len(), 15 + 4 + 3 + 23);
    }

    #[test]
    fn every_compound_parses() {
        let lists: [&[Entry]; 10] = [
            &ARYL_HALIDES,
            &BH_LIGANDS,
            &BH_BASES,
            &BH_ADDITIVES,
            &SM_ELECTROPHILES,
            &SM_NUCLEOPHILES,
            &SM_LIGANDS,
            &SM_REAGENTS,
            &SM_SOLVENTS,
            &[],
        ];
        for e in lists.iter().flat_map(|l| l.iter()) {
            if !e.0.is_empty() {
                parse_smiles(e.0).unwrap_or_else(|err| panic!("{}: {err}", e.0));
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = synth_suzuki_miyaura(3, DEFAULT_NOISE);
        let b = synth_suzuki_miyaura(3, DEFAULT_NOISE);
        let c = synth_suzuki_miyaura(4, DEFAULT_NOISE);
        assert_eq!(a.dataset.records, b.dataset.records);
        assert_ne!(a.planted, c.planted);
    }

    #[test]
    fn yields_are_spread_out() {
        let bh = synth_buchwald_hartwig(0, 0.0);
        let m = bh.planted.iter().sum::<f64>() / bh.planted.len() as f64;
        assert!((0.2..0.5).contains(&m), "mean {m}");
        let hi = bh.planted.iter().filter(|y| **y > 0.7).count();
        let lo = bh.planted.iter().filter(|y| **y < 0.15).count();
        assert!(hi > 100 && lo > 100, "hi {hi} lo {lo}");
        for (r, p) in bh.dataset.records.iter().zip(&bh.planted) {
            assert!((r.yield_fraction - p).abs() < 1e-4 + 1e-12);
        }
    }
}
