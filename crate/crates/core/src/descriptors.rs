//! Per-reaction descriptor vectors.
//!
//! Descriptors come either from an ingested table (`smiles,<name1>,...`) keyed
//! by compound SMILES, or from built-in structural counts over the parsed
//! molecule. A reaction's vector is the concatenation of its components'
//! vectors in schema order. [`Normalizer`] is fitted on training rows only.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::ReactionRecord;
use crate::smiles::{self, BondOrder, Molecule, SmilesError};

/// Element alphabet for the structural layout; anything else is counted as "other".
pub const ELEMENT_ALPHABET: [&str; 16] = [
    "B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I", "Si", "Sn", "Zn", "Pd", "K", "Na",
];

pub const STRUCTURAL_WIDTH: usize = 25;
pub const STRUCTURAL_LAYOUT: &str = "structural-v1";

const OTHER: usize = 16;
const BONDS: usize = 17;
const RINGS: usize = 21;
const AROMATIC_ATOMS: usize = 22;
const TOTAL_ATOMS: usize = 23;
const HETERO_FRACTION: usize = 24;

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed descriptor csv: {0}")]
    MalformedCsv(String),
    #[error("row {row}: expected {expected} values, found {found}")]
    InconsistentWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column}: non-finite value")]
    NonFiniteValue { row: usize, column: String },
    #[error("row {row}: duplicate compound {smiles}")]
    DuplicateKey { row: usize, smiles: String },
    #[error("row {row}: key {smiles} is not valid SMILES: {source}")]
    InvalidKey {
        row: usize,
        smiles: String,
        source: SmilesError,
    },
    #[error("compound {0} missing from descriptor table")]
    MissingCompound(String),
    #[error("cannot parse component {smiles}: {source}")]
    Smiles { smiles: String, source: SmilesError },
    #[error("no input vectors")]
    EmptyInput,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorVector {
    pub values: Vec<f64>,
    pub layout_id: String,
}

impl DescriptorVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Structural counts for one molecule (25 values, see [`ELEMENT_ALPHABET`]).
///
/// Layout: 16 element counts, other-element count, bond counts (single,
/// double, triple, aromatic), ring count, aromatic-atom count, total atom
/// count, heteroatom fraction (non-C, non-H atoms over all atoms).
pub fn structural_descriptors(m: &Molecule) -> DescriptorVector {
    let mut v = vec![0.0; STRUCTURAL_WIDTH];
    let mut hetero = 0usize;
    for atom in &m.atoms {
        let slot = ELEMENT_ALPHABET
            .iter()
            .position(|e| *e == atom.element)
            .unwrap_or(OTHER);
        v[slot] += 1.0;
        if atom.aromatic {
            v[AROMATIC_ATOMS] += 1.0;
        }
        if atom.element != "C" && atom.element != "H" {
            hetero += 1;
        }
    }
    for bond in &m.bonds {
        let k = match bond.order {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        };
        v[BONDS + k] += 1.0;
    }
    v[RINGS] = m.ring_count as f64;
    v[TOTAL_ATOMS] = m.atoms.len() as f64;
    v[HETERO_FRACTION] = if m.atoms.is_empty() {
        0.0
    } else {
        hetero as f64 / m.atoms.len() as f64
    };
    DescriptorVector {
        values: v,
        layout_id: STRUCTURAL_LAYOUT.to_string(),
    }
}

/// Ingested per-compound descriptors keyed by SMILES.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorTable {
    pub layout_id: String,
    pub columns: Vec<String>,
    entries: HashMap<String, Vec<f64>>,
}

impl DescriptorTable {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, smiles: &str) -> Option<&[f64]> {
        self.entries.get(smiles).map(Vec::as_slice)
    }

    pub fn contains(&self, smiles: &str) -> bool {
        self.entries.contains_key(smiles)
    }

    /// Builds a table from in-memory rows with the same checks as the CSV loader.
    pub fn from_rows<I>(columns: Vec<String>, rows: I) -> Result<Self, DescriptorError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut header = vec!["smiles".to_string()];
        header.extend(columns.iter().cloned());
        let mut entries = HashMap::new();
        for (i, (key, values)) in rows.into_iter().enumerate() {
            let row = i + 1;
            if values.len() != columns.len() {
                return Err(DescriptorError::InconsistentWidth {
                    row,
                    expected: columns.len(),
                    found: values.len(),
                });
            }
            if let Some(j) = values.iter().position(|v| !v.is_finite()) {
                return Err(DescriptorError::NonFiniteValue {
                    row,
                    column: columns[j].clone(),
                });
            }
            if let Err(source) = smiles::tokenize(&key) {
                return Err(DescriptorError::InvalidKey {
                    row,
                    smiles: key,
                    source,
                });
            }
            if entries.contains_key(&key) {
                return Err(DescriptorError::DuplicateKey { row, smiles: key });
            }
            entries.insert(key, values);
        }
        Ok(DescriptorTable {
            layout_id: layout_id_for(&header),
            columns,
            entries,
        })
    }

    /// Writes the table as CSV with rows sorted by key.
    pub fn write_csv(&self, path: &Path) -> Result<(), DescriptorError> {
        let io = |e: csv::Error| DescriptorError::MalformedCsv(e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["smiles".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(io)?;
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        for k in keys {
            let mut rec = vec![k.clone()];
            rec.extend(self.entries[k].iter().map(|v| format!("{v}")));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|source| DescriptorError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn layout_id_for(header: &[String]) -> String {
    let digest = Sha256::digest(header.join(",").as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("table-{hex}")
}

/// Loads a descriptor CSV with header `smiles,<name1>,...,<nameK>`.
pub fn load_descriptor_table(path: &Path) -> Result<DescriptorTable, DescriptorError> {
    let file = std::fs::File::open(path).map_err(|source| DescriptorError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| DescriptorError::MalformedCsv(e.to_string()))?
        .clone();
    if header.get(0).map(str::trim) != Some("smiles") {
        return Err(DescriptorError::MalformedCsv(
            "first header column must be `smiles`".into(),
        ));
    }
    let columns: Vec<String> = header
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if columns.is_empty() {
        return Err(DescriptorError::MalformedCsv(
            "no descriptor columns".into(),
        ));
    }

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DescriptorError::MalformedCsv(format!("row {row}: {e}")))?;
        if rec.len() != columns.len() + 1 {
            return Err(DescriptorError::InconsistentWidth {
                row,
                expected: columns.len(),
                found: rec.len().saturating_sub(1),
            });
        }
        let key = rec[0].trim().to_string();
        let mut values = Vec::with_capacity(columns.len());
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                DescriptorError::MalformedCsv(format!(
                    "row {row}, column {}: cannot parse {cell:?}",
                    columns[j]
                ))
            })?;
            values.push(v);
        }
        rows.push((key, values));
    }
    DescriptorTable::from_rows(columns, rows)
}

/// Concatenates per-component descriptors in the record's component order.
///
/// With a table every non-empty component must be present; without one the
/// structural descriptors are used. An empty component (absent condition)
/// contributes a zero block of the same width.
pub fn reaction_descriptor(
    record: &ReactionRecord,
    table: Option<&DescriptorTable>,
) -> Result<DescriptorVector, DescriptorError> {
    let width = table.map_or(STRUCTURAL_WIDTH, DescriptorTable::width);
    let mut values = Vec::with_capacity(width * record.components.len());
    for comp in &record.components {
        let smiles = comp.smiles.as_str();
        if smiles.is_empty() {
            values.extend(std::iter::repeat_n(0.0, width));
            continue;
        }
        match table {
            Some(t) => {
                let v = t
                    .get(smiles)
                    .ok_or_else(|| DescriptorError::MissingCompound(smiles.to_string()))?;
                values.extend_from_slice(v);
            }
            None => {
                let mol =
                    smiles::parse_smiles(smiles).map_err(|source| DescriptorError::Smiles {
                        smiles: smiles.to_string(),
                        source,
                    })?;
                values.extend(structural_descriptors(&mol).values);
            }
        }
    }
    let layout_id = table.map_or(STRUCTURAL_LAYOUT, |t| t.layout_id.as_str());
    Ok(DescriptorVector {
        values,
        layout_id: format!("{layout_id}x{}", record.components.len()),
    })
}

/// Train-set z-score statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Fits per-dimension mean and population std. Dimensions with (numerically)
/// zero variance get std 1.
pub fn fit_normalizer(train: &[DescriptorVector]) -> Result<Normalizer, DescriptorError> {
    let first = train.first().ok_or(DescriptorError::EmptyInput)?;
    let dim = first.len();
    if let Some(bad) = train.iter().find(|v| v.len() != dim) {
        return Err(DescriptorError::LengthMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in train {
        for (m, x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for v in train {
        for ((s, x), m) in var.iter_mut().zip(&v.values).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    let std = var
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            let sd = (s / n).sqrt();
            if sd <= 1e-12 * m.abs().max(1.0) {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(Normalizer { mean, std })
}

pub fn normalize(
    v: &DescriptorVector,
    n: &Normalizer,
) -> Result<DescriptorVector, DescriptorError> {
    if v.len() != n.len() {
        return Err(DescriptorError::LengthMismatch {
            expected: n.len(),
            found: v.len(),
        });
    }
    let values = v
        .values
        .iter()
        .zip(n.mean.iter().zip(&n.std))
        .map(|(x, (m, s))| (x - m) / s)
        .collect();
    Ok(DescriptorVector {
        values,
        layout_id: v.layout_id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Component;
    use std::io::Write;

    fn dv(values: &[f64]) -> DescriptorVector {
        DescriptorVector {
            values: values.to_vec(),
            layout_id: "t".into(),
        }
    }

    fn structural(s: &str) -> Vec<f64> {
        structural_descriptors(&smiles::parse_smiles(s).unwrap()).values
    }

    #[test]
    fn ethanol_counts() {
        let v = structural("CCO");
        let mut expected = vec![0.0; STRUCTURAL_WIDTH];
        expected[1] = 2.0;
        expected[3] = 1.0;
        expected[BONDS] = 2.0;
        expected[TOTAL_ATOMS] = 3.0;
        expected[HETERO_FRACTION] = 1.0 / 3.0;
        assert_eq!(v, expected);
    }

    #[test]
    fn benzene_counts() {
        let v = structural("c1ccccc1");
        assert_eq!(v[AROMATIC_ATOMS], 6.0);
        assert_eq!(v[BONDS + 3], 6.0);
        assert_eq!(v[RINGS], 1.0);
        assert_eq!(v[1], 6.0);
        assert_eq!(v[HETERO_FRACTION], 0.0);
    }

    #[test]
    fn empty_molecule_is_zero() {
        let v = structural_descriptors(&Molecule::default());
        assert!(v.values.iter().all(|x| *x == 0.0));
        assert_eq!(v.len(), 25);
    }

    #[test]
    fn other_elements_and_hetero() {
        let v = structural("[Fe].[Pd]Cl");
        assert_eq!(v[OTHER], 1.0);
        assert_eq!(v[13], 1.0);
        assert_eq!(v[7], 1.0);
        assert_eq!(v[HETERO_FRACTION], 1.0);
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_table() {
        let f = write_tmp("smiles,a,b,c\nCCO,1,2,3\nc1ccccc1,4.5,-1e-3,0\n");
        let t = load_descriptor_table(f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.width(), 3);
        assert_eq!(t.get("c1ccccc1").unwrap(), &[4.5, -1e-3, 0.0]);
        assert!(t.layout_id.starts_with("table-"));
    }

    #[test]
    fn load_table_errors() {
        let f = write_tmp("smiles,a\nCCO,1\nCC,NaN\n");
        assert!(matches!(
            load_descriptor_table(f.path()),
            Err(DescriptorError::NonFiniteValue { row: 2, .. })
        ));
        let f = write_tmp("smiles,a\nCCO,1\nCCO,2\n");
        assert!(matches!(
            load_descriptor_table(f.path()),
            Err(DescriptorError::DuplicateKey { row: 2, .. })
        ));
        let f = write_tmp("smiles,a,b\nCCO,1\n");
        assert!(matches!(
            load_descriptor_table(f.path()),
            Err(DescriptorError::InconsistentWidth { row: 1, .. })
        ));
        let f = write_tmp("name,a\nCCO,1\n");
        assert!(matches!(
            load_descriptor_table(f.path()),
            Err(DescriptorError::MalformedCsv(_))
        ));
        let f = write_tmp("smiles,a\nCCO,abc\n");
        assert!(matches!(
            load_descriptor_table(f.path()),
            Err(DescriptorError::MalformedCsv(_))
        ));
    }

    fn record(smiles: &[&str]) -> ReactionRecord {
        ReactionRecord {
            components: smiles
                .iter()
                .enumerate()
                .map(|(i, s)| Component {
                    role: format!("r{i}"),
                    smiles: s.to_string(),
                    name: None,
                })
                .collect(),
            yield_fraction: 0.5,
            raw_yield: 50.0,
        }
    }

    #[test]
    fn reaction_concat_with_table() {
        let keys = ["CCO", "CC", "O", "N"];
        let table = DescriptorTable::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            keys.iter()
                .enumerate()
                .map(|(i, k)| (k.to_string(), vec![i as f64, 10.0 + i as f64, -(i as f64)])),
        )
        .unwrap();
        let r = record(&keys);
        let v = reaction_descriptor(&r, Some(&table)).unwrap();
        assert_eq!(v.len(), 12);
        let permuted = record(&["CC", "CCO", "O", "N"]);
        assert_ne!(v, reaction_descriptor(&permuted, Some(&table)).unwrap());
        let missing = record(&["CCO", "CCC"]);
        assert!(matches!(
            reaction_descriptor(&missing, Some(&table)),
            Err(DescriptorError::MissingCompound(s)) if s == "CCC"
        ));
    }

    #[test]
    fn reaction_structural_fallback() {
        let r = record(&["Brc1ccccc1", "CC", "O", ""]);
        let v = reaction_descriptor(&r, None).unwrap();
        assert_eq!(v.len(), 100);
        assert!(v.values[75..].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn normalizer_examples() {
        let n = fit_normalizer(&[dv(&[0.0]), dv(&[2.0])]).unwrap();
        assert_eq!((n.mean[0], n.std[0]), (1.0, 1.0));
        let n = fit_normalizer(&[dv(&[5.0]), dv(&[5.0])]).unwrap();
        assert_eq!((n.mean[0], n.std[0]), (5.0, 1.0));
        let n = fit_normalizer(&[dv(&[3.0, -2.0])]).unwrap();
        assert_eq!(n.mean, [3.0, -2.0]);
        assert_eq!(n.std, [1.0, 1.0]);
        assert!(matches!(
            fit_normalizer(&[]),
            Err(DescriptorError::EmptyInput)
        ));
        let n = fit_normalizer(&[dv(&[0.1]), dv(&[0.1]), dv(&[0.1])]).unwrap();
        assert_eq!(n.std[0], 1.0);
    }

    #[test]
    fn normalize_examples() {
        let n = Normalizer {
            mean: vec![1.0],
            std: vec![2.0],
        };
        assert_eq!(normalize(&dv(&[3.0]), &n).unwrap().values, [1.0]);
        assert_eq!(normalize(&dv(&[1.0]), &n).unwrap().values, [0.0]);
        assert!(matches!(
            normalize(&dv(&[1.0, 2.0]), &n),
            Err(DescriptorError::LengthMismatch { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn normalized_train_set_is_standardized(
            rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..40)
        ) {
            let vs: Vec<_> = rows.iter().map(|r| dv(r)).collect();
            let n = fit_normalizer(&vs).unwrap();
            let out: Vec<_> = vs.iter().map(|v| normalize(v, &n).unwrap()).collect();
            for d in 0..3 {
                let col: Vec<f64> = out.iter().map(|v| v.values[d]).collect();
                let m = col.iter().sum::<f64>() / col.len() as f64;
                proptest::prop_assert!(m.abs() < 1e-9);
                if n.std[d] != 1.0 || rows.iter().any(|r| r[d] != rows[0][d]) {
                    let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / col.len() as f64;
                    proptest::prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
