use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use super::{Component, DataError, Dataset, DatasetSchema, ReactionRecord, Split};
use crate::smiles;

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads an HTE CSV. Each role needs a `<role>_smiles` column plus a `yield`
/// column on the 0-100 scale; `<role>_name` columns are optional. Yields are
/// divided by 100 and clamped to [0, 1]; clamped rows are counted.
pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(open(path)?);
    let header = reader
        .headers()
        .map_err(|e| DataError::MalformedCsv(e.to_string()))?
        .clone();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);

    let mut smiles_cols = Vec::with_capacity(schema.roles.len());
    let mut name_cols = Vec::with_capacity(schema.roles.len());
    for role in schema.roles {
        let name = format!("{role}_smiles");
        smiles_cols.push(col(&name).ok_or(DataError::MissingColumn(name))?);
        name_cols.push(col(&format!("{role}_name")));
    }
    let yield_col = col("yield").ok_or_else(|| DataError::MissingColumn("yield".into()))?;

    let mut records = Vec::new();
    let mut clamped_rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedCsv(format!("row {row}: {e}")))?;
        let mut components = Vec::with_capacity(schema.roles.len());
        for (k, role) in schema.roles.iter().enumerate() {
            let smi = rec.get(smiles_cols[k]).unwrap_or("").trim().to_string();
            if smi.is_empty() {
                if !schema.is_condition(role) {
                    return Err(DataError::EmptyReactant {
                        row,
                        role: role.to_string(),
                    });
                }
            } else if let Err(source) = smiles::tokenize(&smi) {
                return Err(DataError::InvalidSmiles {
                    row,
                    role: role.to_string(),
                    smiles: smi,
                    source,
                });
            }
            let name = name_cols[k]
                .and_then(|c| rec.get(c))
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty());
            components.push(Component {
                role: role.to_string(),
                smiles: smi,
                name,
            });
        }
        let cell = rec.get(yield_col).unwrap_or("").trim();
        let raw_yield: f64 = cell
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| DataError::UnparseableYield {
                row,
                value: cell.to_string(),
            })?;
        let fraction = raw_yield / 100.0;
        let yield_fraction = fraction.clamp(0.0, 1.0);
        if yield_fraction != fraction {
            clamped_rows += 1;
        }
        records.push(ReactionRecord {
            components,
            yield_fraction,
            raw_yield,
        });
    }
    Ok(Dataset {
        schema: schema.clone(),
        records,
        clamped_rows,
    })
}

/// Writes records in the loader's format (with `_name` columns when any name is set).
pub fn write_dataset(
    path: &Path,
    schema: &DatasetSchema,
    records: &[ReactionRecord],
) -> Result<(), DataError> {
    let csv_err = |e: csv::Error| DataError::MalformedCsv(e.to_string());
    let with_names = records
        .iter()
        .any(|r| r.components.iter().any(|c| c.name.is_some()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = schema.roles.iter().map(|r| format!("{r}_smiles")).collect();
    if with_names {
        header.extend(schema.roles.iter().map(|r| format!("{r}_name")));
    }
    header.push("yield".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row: Vec<String> = r.components.iter().map(|c| c.smiles.clone()).collect();
        if with_names {
            row.extend(
                r.components
                    .iter()
                    .map(|c| c.name.clone().unwrap_or_default()),
            );
        }
        row.push(format!("{}", r.raw_yield));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// A published train/test pair loaded as one dataset.
#[derive(Clone, Debug)]
pub struct PredefinedSplit {
    pub dataset: Dataset,
    pub split: Split,
    /// Records whose components appear in both files.
    pub duplicate_rows: usize,
}

/// Concatenates the train file and the test file; train indices cover the
/// first file's rows and test indices the second's.
pub fn load_predefined_splits(
    train_path: &Path,
    test_path: &Path,
    schema: &DatasetSchema,
) -> Result<PredefinedSplit, DataError> {
    let train = load_dataset(train_path, schema)?;
    let test = load_dataset(test_path, schema)?;
    if train.is_empty() {
        return Err(DataError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(DataError::EmptySplit("test"));
    }
    let train_keys: HashSet<Vec<&str>> = train.records.iter().map(|r| r.smiles_list()).collect();
    let duplicate_rows = test
        .records
        .iter()
        .filter(|r| train_keys.contains(&r.smiles_list()))
        .count();
    let n_train = train.len();
    let n_test = test.len();
    let mut records = train.records;
    records.extend(test.records);
    Ok(PredefinedSplit {
        dataset: Dataset {
            schema: schema.clone(),
            records,
            clamped_rows: train.clamped_rows + test.clamped_rows,
        },
        split: Split {
            train: (0..n_train).collect(),
            test: (n_train..n_train + n_test).collect(),
        },
        duplicate_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const BH_HEADER: &str = "aryl_halide_smiles,ligand_smiles,base_smiles,additive_smiles,yield\n";

    fn tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_clamps() {
        let f = tmp(&format!(
            "{BH_HEADER}Brc1ccccc1,CP(C)C,CN(C)C,Cc1ccon1,55.5\nClc1ccccc1,CP(C)C,CN(C)C,,103.2\nIc1ccccc1,CP(C)C,CN(C)C,c1ccon1,-1\n"
        ));
        let ds = load_dataset(f.path(), &DatasetSchema::buchwald_hartwig()).unwrap();
        assert_eq!(ds.len(), 3);
        assert!((ds.records[0].yield_fraction - 0.555).abs() < 1e-15);
        assert_eq!(ds.records[1].yield_fraction, 1.0);
        assert_eq!(ds.records[1].raw_yield, 103.2);
        assert_eq!(ds.records[2].yield_fraction, 0.0);
        assert_eq!(ds.clamped_rows, 2);
        assert_eq!(ds.records[1].components[3].smiles, "");
        assert_eq!(ds.records[0].components[0].role, "aryl_halide");
    }

    #[test]
    fn names_carried_through() {
        let f = tmp("electrophile_smiles,nucleophile_smiles,ligand_smiles,ligand_name,reagent_smiles,solvent_smiles,yield\nBrc1ccccc1,OB(O)c1ccccc1,CCCCP(C)C,CataCXium A,[OH-].[Na+],CO,12\n");
        let ds = load_dataset(f.path(), &DatasetSchema::suzuki_miyaura()).unwrap();
        let lig = ds.records[0].component("ligand").unwrap();
        assert_eq!(lig.name.as_deref(), Some("CataCXium A"));
        assert_eq!(lig.display(), "CataCXium A");
        assert_eq!(ds.records[0].component("solvent").unwrap().display(), "CO");
    }

    #[test]
    fn load_errors() {
        let f = tmp("aryl_halide_smiles,ligand_smiles,additive_smiles,yield\nC,C,C,1\n");
        match load_dataset(f.path(), &DatasetSchema::buchwald_hartwig()) {
            Err(DataError::MissingColumn(c)) => assert_eq!(c, "base_smiles"),
            other => panic!("unexpected {other:?}"),
        }
        let f = tmp(&format!("{BH_HEADER}C,C,C,C,abc\n"));
        assert!(matches!(
            load_dataset(f.path(), &DatasetSchema::buchwald_hartwig()),
            Err(DataError::UnparseableYield { row: 1, .. })
        ));
        let f = tmp(&format!("{BH_HEADER},C,C,C,3\n"));
        assert!(matches!(
            load_dataset(f.path(), &DatasetSchema::buchwald_hartwig()),
            Err(DataError::EmptyReactant { row: 1, .. })
        ));
        let f = tmp(&format!("{BH_HEADER}C,C,Q,C,3\n"));
        assert!(matches!(
            load_dataset(f.path(), &DatasetSchema::buchwald_hartwig()),
            Err(DataError::InvalidSmiles { row: 1, .. })
        ));
    }

    #[test]
    fn predefined_split() {
        let train = tmp(&format!("{BH_HEADER}C,C,C,C,1\nCC,C,C,C,2\n"));
        let test = tmp(&format!("{BH_HEADER}C,C,C,C,3\n"));
        let s = load_predefined_splits(
            train.path(),
            test.path(),
            &DatasetSchema::buchwald_hartwig(),
        )
        .unwrap();
        assert_eq!(s.split.train, [0, 1]);
        assert_eq!(s.split.test, [2]);
        assert_eq!(s.duplicate_rows, 1);
        let empty = tmp(BH_HEADER);
        assert!(matches!(
            load_predefined_splits(
                train.path(),
                empty.path(),
                &DatasetSchema::buchwald_hartwig()
            ),
            Err(DataError::EmptySplit("test"))
        ));
    }

    #[test]
    fn write_then_load() {
        let src = tmp(&format!("{BH_HEADER}Brc1ccccc1,CP(C)C,CN(C)C,,55.5\n"));
        let schema = DatasetSchema::buchwald_hartwig();
        let ds = load_dataset(src.path(), &schema).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_dataset(out.path(), &schema, &ds.records).unwrap();
        let back = load_dataset(out.path(), &schema).unwrap();
        assert_eq!(back.records, ds.records);
    }
}
