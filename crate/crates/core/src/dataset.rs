//! Tabular preprocessing and dataset files.
//!
//! Raw tables are turned into network inputs by one-hot expanding categorical
//! columns, min-max scaling continuous columns to `[0, 1]` and keeping integer
//! columns on their original scale. Dataset files hold already-preprocessed
//! rows whose header matches the network's feature names, optionally followed
//! by a `label` column that is ignored.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{Ann, FeatureKind, FeatureSpec, Instance};

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Integer,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn parse_csv(text: &str) -> Result<Self, ModelError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| ModelError::Dataset(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(ModelError::Dataset("missing header row".into()));
        }
        let mut rows = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| ModelError::Dataset(format!("row {}: {e}", k + 1)))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(RawTable { header, rows })
    }
}

/// How a raw column was mapped onto features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnTransform {
    /// `scaled = (raw - min) / (max - min)`, or 0 for a constant column.
    Continuous {
        column: String,
        min: f64,
        max: f64,
    },
    Integer {
        column: String,
    },
    Categorical {
        column: String,
        categories: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub features: Vec<FeatureSpec>,
    pub instances: Vec<Instance>,
    pub transforms: Vec<ColumnTransform>,
}

/// One-hot, min-max and passthrough preprocessing of `raw`.
///
/// `schema` declares the kind of each column in order. A trailing
/// [`LABEL_COLUMN`] without a schema entry is skipped.
pub fn preprocess_dataset(
    raw: &RawTable,
    schema: &[ColumnKind],
) -> Result<Preprocessed, ModelError> {
    let labelled = raw.header.len() == schema.len() + 1
        && raw.header.last().map(String::as_str) == Some(LABEL_COLUMN);
    let usable = if labelled || raw.header.len() == schema.len() {
        schema.len()
    } else {
        return Err(ModelError::DimensionMismatch {
            field: "schema".into(),
            expected: raw.header.len(),
            found: schema.len(),
        });
    };
    if raw.rows.is_empty() {
        return Err(ModelError::Dataset("table has no data rows".into()));
    }
    for (k, row) in raw.rows.iter().enumerate() {
        if row.len() != raw.header.len() {
            return Err(ModelError::DimensionMismatch {
                field: format!("row {}", k + 1),
                expected: raw.header.len(),
                found: row.len(),
            });
        }
    }

    let mut features = Vec::new();
    let mut transforms = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (c, &kind) in schema.iter().enumerate().take(usable) {
        let name = &raw.header[c];
        let cells = raw.rows.iter().map(|r| r[c].as_str());
        match kind {
            ColumnKind::Continuous | ColumnKind::Integer => {
                let values = cells
                    .enumerate()
                    .map(|(k, s)| parse_number(s, name, k + 1))
                    .collect::<Result<Vec<_>, _>>()?;
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if kind == ColumnKind::Integer {
                    if let Some(k) = values.iter().position(|v| v.fract() != 0.0) {
                        return Err(ModelError::Dataset(format!(
                            "column {name}, row {}: {} is not an integer",
                            k + 1,
                            values[k]
                        )));
                    }
                    features.push(FeatureSpec {
                        name: name.clone(),
                        kind: FeatureKind::Integer,
                        lower: min,
                        upper: max,
                    });
                    transforms.push(ColumnTransform::Integer {
                        column: name.clone(),
                    });
                    columns.push(values);
                } else {
                    let span = max - min;
                    let scaled = values
                        .iter()
                        .map(|&v| {
                            if span > 0.0 {
                                ((v - min) / span).clamp(0.0, 1.0)
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    features.push(FeatureSpec::continuous(name.clone(), 0.0, 1.0));
                    transforms.push(ColumnTransform::Continuous {
                        column: name.clone(),
                        min,
                        max,
                    });
                    columns.push(scaled);
                }
            }
            ColumnKind::Categorical => {
                let mut categories: Vec<String> = Vec::new();
                for cell in cells.clone() {
                    if !categories.iter().any(|c| c == cell) {
                        categories.push(cell.to_string());
                    }
                }
                for cat in &categories {
                    features.push(FeatureSpec {
                        name: format!("{name}={cat}"),
                        kind: FeatureKind::Binary,
                        lower: 0.0,
                        upper: 1.0,
                    });
                    columns.push(
                        cells
                            .clone()
                            .map(|s| if s == cat { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
                transforms.push(ColumnTransform::Categorical {
                    column: name.clone(),
                    categories,
                });
            }
        }
    }
    let instances = (0..raw.rows.len())
        .map(|r| Instance::new(columns.iter().map(|col| col[r]).collect()))
        .collect();
    Ok(Preprocessed {
        features,
        instances,
        transforms,
    })
}

fn parse_number(s: &str, column: &str, row: usize) -> Result<f64, ModelError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            ModelError::Dataset(format!("column {column}, row {row}: {s:?} is not a number"))
        })
}

/// Reads a preprocessed dataset file for `ann`.
///
/// The header must list the network's feature names in order, optionally
/// followed by a `label` column. Every row must lie in the feature domains.
pub fn read_instances(text: &str, ann: &Ann) -> Result<Vec<Instance>, ModelError> {
    let table = RawTable::parse_csv(text)?;
    let names: Vec<&str> = ann.features().iter().map(|f| f.name.as_str()).collect();
    let n = names.len();
    let header_ok = table.header.len() >= n
        && table.header[..n]
            .iter()
            .map(String::as_str)
            .eq(names.iter().copied())
        && (table.header.len() == n
            || (table.header.len() == n + 1 && table.header[n] == LABEL_COLUMN));
    if !header_ok {
        return Err(ModelError::Dataset(format!(
            "header {:?} does not match model features {:?}",
            table.header, names
        )));
    }
    if table.rows.is_empty() {
        return Err(ModelError::Dataset("dataset has no rows".into()));
    }
    let mut out = Vec::with_capacity(table.rows.len());
    for (k, row) in table.rows.iter().enumerate() {
        if row.len() != table.header.len() {
            return Err(ModelError::DimensionMismatch {
                field: format!("row {}", k + 1),
                expected: table.header.len(),
                found: row.len(),
            });
        }
        let values = row[..n]
            .iter()
            .zip(&names)
            .map(|(s, name)| parse_number(s, name, k + 1))
            .collect::<Result<Vec<_>, _>>()?;
        let inst = Instance::new(values);
        ann.check_instance(&inst)
            .map_err(|e| ModelError::Dataset(format!("row {}: {e}", k + 1)))?;
        out.push(inst);
    }
    Ok(out)
}

/// Writes instances in the dataset-file dialect read by [`read_instances`].
pub fn write_instances(ann: &Ann, instances: &[Instance]) -> String {
    let mut out = ann
        .features()
        .iter()
        .map(|f| f.name.as_str())
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for inst in instances {
        let row: Vec<String> = inst
            .values
            .iter()
            .map(|v| crate::milp::format_number(*v))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::gate_net;

    fn table(text: &str) -> RawTable {
        RawTable::parse_csv(text).unwrap()
    }

    #[test]
    fn continuous_min_max() {
        let p = preprocess_dataset(&table("a\n2\n4\n6\n"), &[ColumnKind::Continuous]).unwrap();
        let col: Vec<f64> = p.instances.iter().map(|i| i.values[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
        assert_eq!(
            p.transforms[0],
            ColumnTransform::Continuous {
                column: "a".into(),
                min: 2.0,
                max: 6.0
            }
        );
    }

    #[test]
    fn categorical_one_hot() {
        let p = preprocess_dataset(
            &table("color\nred\nblue\nred\n"),
            &[ColumnKind::Categorical],
        )
        .unwrap();
        assert_eq!(p.features.len(), 2);
        assert!(p.features.iter().all(|f| f.kind == FeatureKind::Binary));
        let rows: Vec<Vec<f64>> = p.instances.into_iter().map(|i| i.values).collect();
        assert_eq!(rows, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn integer_column_untouched() {
        let p = preprocess_dataset(&table("k\n1\n5\n3\n"), &[ColumnKind::Integer]).unwrap();
        let col: Vec<f64> = p.instances.iter().map(|i| i.values[0]).collect();
        assert_eq!(col, vec![1.0, 5.0, 3.0]);
        assert_eq!(
            p.features[0],
            FeatureSpec {
                name: "k".into(),
                kind: FeatureKind::Integer,
                lower: 1.0,
                upper: 5.0
            }
        );
    }

    #[test]
    fn constant_column_scales_to_zero() {
        let p = preprocess_dataset(&table("a\n3\n3\n"), &[ColumnKind::Continuous]).unwrap();
        assert!(p.instances.iter().all(|i| i.values[0] == 0.0));
    }

    #[test]
    fn preprocessing_errors() {
        assert!(preprocess_dataset(&table("a\nx\n"), &[ColumnKind::Continuous]).is_err());
        assert!(preprocess_dataset(&table("a\n1.5\n"), &[ColumnKind::Integer]).is_err());
        assert!(preprocess_dataset(&table("a\n"), &[ColumnKind::Continuous]).is_err());
        assert!(preprocess_dataset(&table("a,b\n1,2\n"), &[ColumnKind::Continuous]).is_err());
    }

    #[test]
    fn label_column_skipped() {
        let p = preprocess_dataset(&table("a,label\n1,yes\n3,no\n"), &[ColumnKind::Continuous])
            .unwrap();
        assert_eq!(p.features.len(), 1);
        assert_eq!(p.instances[1].values, vec![1.0]);
    }

    #[test]
    fn preprocessing_is_deterministic() {
        let raw = table("a,c,k\n0.3,x,2\n1.7,y,4\n0.9,x,3\n");
        let schema = [
            ColumnKind::Continuous,
            ColumnKind::Categorical,
            ColumnKind::Integer,
        ];
        let a = preprocess_dataset(&raw, &schema).unwrap();
        let b = preprocess_dataset(&raw, &schema).unwrap();
        for (x, y) in a.instances.iter().zip(&b.instances) {
            let bits = |v: &Vec<f64>| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&x.values), bits(&y.values));
        }
    }

    #[test]
    fn dataset_file_round_trip() {
        let gate = gate_net();
        let text = "x1,x2,label\n0.9,0.3,open\n0.2,0.8,closed\n";
        let rows = read_instances(text, &gate).unwrap();
        assert_eq!(rows[0].values, vec![0.9, 0.3]);
        assert_eq!(
            read_instances(&write_instances(&gate, &rows), &gate).unwrap(),
            rows
        );
        assert!(read_instances("x2,x1\n0.1,0.2\n", &gate).is_err());
        assert!(read_instances("x1,x2\n", &gate).is_err());
        assert!(read_instances("x1,x2\n1.5,0\n", &gate).is_err());
    }
}
