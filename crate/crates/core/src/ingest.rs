//! Accuracy tables of trained models and the ID/OOD pairs derived from them.
//!
//! The CSV header is `model_id,<env_0>,...,<env_K>` optionally followed by
//! metadata columns whose names start with `meta:`. Metadata is carried
//! through untouched.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aline::AccuracyPair;
use crate::error::{Error, Result};

pub const META_PREFIX: &str = "meta:";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model_id: String,
    pub accuracies: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub env_names: Vec<String>,
    /// Metadata column names without the prefix, in file order.
    pub meta_names: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl AccuracyTable {
    pub fn new(env_names: Vec<String>) -> Self {
        Self {
            env_names,
            meta_names: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn env_index(&self, env: &str) -> Result<usize> {
        self.env_names
            .iter()
            .position(|e| e == env)
            .ok_or_else(|| Error::UnknownEnv(env.to_string()))
    }

    /// Appends a row after checking its length and range.
    pub fn push(&mut self, model_id: impl Into<String>, accuracies: Vec<f64>) -> Result<()> {
        let model_id = model_id.into();
        if accuracies.len() != self.env_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "row {model_id} has {} accuracies for {} environments",
                accuracies.len(),
                self.env_names.len()
            )));
        }
        if let Some(a) = accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidArgument(format!("accuracy {a} of {model_id} outside [0,1]")));
        }
        if self.rows.iter().any(|r| r.model_id == model_id) {
            return Err(Error::InvalidArgument(format!("duplicate model_id {model_id}")));
        }
        self.rows.push(TableRow {
            model_id,
            accuracies,
            meta: BTreeMap::new(),
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let mut records = reader.records();
        let header = match records.next() {
            Some(h) => h?,
            None => return Err(Error::Parse { line: 1, msg: "missing header".into() }),
        };
        let header: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
        if header.first().map(String::as_str) != Some("model_id") {
            return Err(Error::Parse {
                line: 1,
                msg: "first column must be model_id".into(),
            });
        }
        let mut env_names = Vec::new();
        let mut meta_names = Vec::new();
        for name in &header[1..] {
            if let Some(meta) = name.strip_prefix(META_PREFIX) {
                meta_names.push(meta.to_string());
            } else if !meta_names.is_empty() {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("environment column {name} after metadata columns"),
                });
            } else if name.is_empty() {
                return Err(Error::Parse { line: 1, msg: "empty column name".into() });
            } else {
                env_names.push(name.clone());
            }
        }
        let mut seen = HashSet::new();
        for name in env_names.iter().chain(&meta_names) {
            if !seen.insert(name.as_str()) {
                return Err(Error::Parse { line: 1, msg: format!("duplicate column {name}") });
            }
        }

        let mut table = AccuracyTable {
            env_names,
            meta_names,
            rows: Vec::new(),
        };
        let mut ids = HashSet::new();
        for record in records {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() == 1 && record[0].trim().is_empty() {
                continue;
            }
            if record.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            let model_id = record[0].trim().to_string();
            if model_id.is_empty() {
                return Err(Error::Parse { line, msg: "empty model_id".into() });
            }
            if !ids.insert(model_id.clone()) {
                return Err(Error::Parse { line, msg: format!("duplicate model_id {model_id}") });
            }
            let k = table.env_names.len();
            let mut accuracies = Vec::with_capacity(k);
            for (j, field) in record.iter().skip(1).take(k).enumerate() {
                let a: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid accuracy {field:?} for {}", table.env_names[j]),
                })?;
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::Parse {
                        line,
                        msg: format!("accuracy {a} for {} outside [0,1]", table.env_names[j]),
                    });
                }
                accuracies.push(a);
            }
            let meta = table
                .meta_names
                .iter()
                .zip(record.iter().skip(1 + k))
                .map(|(n, v)| (n.clone(), v.to_string()))
                .collect();
            table.rows.push(TableRow {
                model_id,
                accuracies,
                meta,
            });
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["model_id".to_string()];
        header.extend(self.env_names.iter().cloned());
        header.extend(self.meta_names.iter().map(|m| format!("{META_PREFIX}{m}")));
        writer.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.model_id.clone()];
            record.extend(row.accuracies.iter().map(|a| a.to_string()));
            record.extend(
                self.meta_names
                    .iter()
                    .map(|m| row.meta.get(m).cloned().unwrap_or_default()),
            );
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(std::fs::File::create(path)?)
    }
}

pub fn load_accuracy_table(path: impl AsRef<Path>) -> Result<AccuracyTable> {
    AccuracyTable::read(std::fs::File::open(path)?)
}

/// ID accuracy is the unweighted mean over every environment except `ood_env`.
pub fn leave_one_out_pairs(table: &AccuracyTable, ood_env: &str) -> Result<Vec<AccuracyPair>> {
    let ood = table.env_index(ood_env)?;
    if table.env_names.len() < 2 {
        return Err(Error::InvalidArgument("leave-one-out needs at least 2 environments".into()));
    }
    let others = (table.env_names.len() - 1) as f64;
    Ok(table
        .rows
        .iter()
        .map(|row| {
            let sum: f64 = row
                .accuracies
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != ood)
                .map(|(_, a)| a)
                .sum();
            AccuracyPair::new(row.model_id.clone(), sum / others, row.accuracies[ood])
        })
        .collect())
}

pub fn pairwise_pairs(table: &AccuracyTable, id_env: &str, ood_env: &str) -> Result<Vec<AccuracyPair>> {
    let id = table.env_index(id_env)?;
    let ood = table.env_index(ood_env)?;
    if id == ood {
        return Err(Error::InvalidArgument(format!("ID and OOD environment are both {id_env}")));
    }
    Ok(table
        .rows
        .iter()
        .map(|row| AccuracyPair::new(row.model_id.clone(), row.accuracies[id], row.accuracies[ood]))
        .collect())
}
