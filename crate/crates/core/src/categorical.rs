//! Survey-style categorical data.
//!
//! Answers are one-hot coded into the complete disjunctive table (CDT), or
//! cross-tabulated over all category pairs into the Burt table
//! (`BT = CDTᵀ·CDT`). Rows are then rescaled so that Euclidean distance
//! equals the chi-square distance between row profiles, and mapped with the
//! batch SOM: Burt rows organize the categories, CDT rows the individuals.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::som::{batch_som_train, MapLattice, NeighborhoodSchedule, VectorMap};

/// Individuals × variables, stored as category codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CategoricalTable {
    variables: Vec<String>,
    dictionaries: Vec<Vec<String>>,
    codes: Vec<Vec<usize>>,
}

impl CategoricalTable {
    /// Dictionaries inferred from the data, in order of first appearance.
    pub fn from_labels(variables: Vec<String>, rows: &[Vec<String>]) -> Result<Self> {
        let mut dictionaries: Vec<Vec<String>> = vec![Vec::new(); variables.len()];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != variables.len() {
                return Err(Error::invalid(format!("row {i} has {} answers, expected {}", row.len(), variables.len())));
            }
            for (dict, label) in dictionaries.iter_mut().zip(row) {
                if !dict.contains(label) {
                    dict.push(label.clone());
                }
            }
        }
        Self::with_dictionaries(variables, dictionaries, rows)
    }

    /// Uses the given dictionaries; categories never observed are kept.
    pub fn with_dictionaries(variables: Vec<String>, dictionaries: Vec<Vec<String>>, rows: &[Vec<String>]) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::invalid("categorical table has no variables"));
        }
        if rows.is_empty() {
            return Err(Error::invalid("categorical table has no individuals"));
        }
        if dictionaries.len() != variables.len() {
            return Err(Error::DimensionMismatch {
                expected: variables.len(),
                got: dictionaries.len(),
            });
        }
        let lookup: Vec<HashMap<&str, usize>> = dictionaries
            .iter()
            .zip(&variables)
            .map(|(dict, name)| {
                if dict.is_empty() {
                    return Err(Error::invalid(format!("variable `{name}` has an empty dictionary")));
                }
                Ok(dict.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect())
            })
            .collect::<Result<_>>()?;
        let codes = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != variables.len() {
                    return Err(Error::invalid(format!("row {i} has {} answers, expected {}", row.len(), variables.len())));
                }
                row.iter()
                    .enumerate()
                    .map(|(v, label)| {
                        lookup[v].get(label.as_str()).copied().ok_or_else(|| {
                            Error::invalid(format!("unknown label `{label}` at row {i}, variable `{}`", variables[v]))
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(CategoricalTable {
            variables,
            dictionaries,
            codes,
        })
    }

    pub fn individuals(&self) -> usize {
        self.codes.len()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn dictionaries(&self) -> &[Vec<String>] {
        &self.dictionaries
    }

    pub fn category_count(&self) -> usize {
        self.dictionaries.iter().map(Vec::len).sum()
    }

    /// `variable=label` for every category, in column order.
    pub fn category_labels(&self) -> Vec<String> {
        self.variables
            .iter()
            .zip(&self.dictionaries)
            .flat_map(|(v, dict)| dict.iter().map(move |l| format!("{v}={l}")))
            .collect()
    }

    /// Column of each answer of individual `i`.
    fn columns(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let mut offset = 0;
        self.codes[i].iter().zip(&self.dictionaries).map(move |(&code, dict)| {
            let col = offset + code;
            offset += dict.len();
            col
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EncodingKind {
    Burt,
    Cdt,
}

impl FromStr for EncodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "burt" => Ok(EncodingKind::Burt),
            "cdt" => Ok(EncodingKind::Cdt),
            other => Err(Error::invalid(format!("unknown encoding `{other}` (expected burt or cdt)"))),
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingKind::Burt => "burt",
            EncodingKind::Cdt => "cdt",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EncodedTable {
    pub kind: EncodingKind,
    pub matrix: Vec<Vec<f64>>,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
}

/// One-hot coding: one row per individual, one column per category.
pub fn disjunctive_table(table: &CategoricalTable) -> EncodedTable {
    let c = table.category_count();
    let matrix = (0..table.individuals())
        .map(|i| {
            let mut row = vec![0.0; c];
            for col in table.columns(i) {
                row[col] = 1.0;
            }
            row
        })
        .collect();
    EncodedTable {
        kind: EncodingKind::Cdt,
        matrix,
        row_labels: (0..table.individuals()).map(|i| i.to_string()).collect(),
        column_labels: table.category_labels(),
    }
}

/// Co-occurrence counts of every pair of categories.
pub fn burt_table(table: &CategoricalTable) -> EncodedTable {
    let c = table.category_count();
    let mut matrix = vec![vec![0.0; c]; c];
    for i in 0..table.individuals() {
        let cols: Vec<usize> = table.columns(i).collect();
        for &a in &cols {
            for &b in &cols {
                matrix[a][b] += 1.0;
            }
        }
    }
    let labels = table.category_labels();
    EncodedTable {
        kind: EncodingKind::Burt,
        matrix,
        row_labels: labels.clone(),
        column_labels: labels,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaTransform {
    pub rows: Vec<Vec<f64>>,
    /// Original indices of the columns kept (all-zero columns are dropped).
    pub kept_columns: Vec<usize>,
    pub warnings: Vec<String>,
}

/// `z_ij = t_ij / (r_i · √(c_j / T))` with row sums `r`, column sums `c`
/// and total `T`. Euclidean distances between rows of `z` are chi-square
/// distances between the row profiles of `t`.
pub fn ca_transform(table: &[Vec<f64>]) -> Result<CaTransform> {
    let width = table.first().map(Vec::len).ok_or_else(|| Error::invalid("table is empty"))?;
    for (i, row) in table.iter().enumerate() {
        if row.len() != width {
            return Err(Error::invalid(format!("table row {i} has {} entries, expected {width}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("table row {i} has a negative or non-finite entry")));
        }
        if row.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid(format!("table row {i} is all zero")));
        }
    }
    let col_sums: Vec<f64> = (0..width).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = col_sums.iter().sum();
    let kept: Vec<usize> = (0..width).filter(|&j| col_sums[j] > 0.0).collect();
    let mut warnings = Vec::new();
    if kept.len() < width {
        let dropped: Vec<String> = (0..width).filter(|j| col_sums[*j] == 0.0).map(|j| j.to_string()).collect();
        let msg = format!("dropped empty columns {}", dropped.join(","));
        warn!("{msg}");
        warnings.push(msg);
    }
    let scale: Vec<f64> = kept.iter().map(|&j| (col_sums[j] / total).sqrt()).collect();
    let rows = table
        .iter()
        .map(|row| {
            let r: f64 = row.iter().sum();
            kept.iter().zip(&scale).map(|(&j, s)| row[j] / (r * s)).collect()
        })
        .collect();
    Ok(CaTransform {
        rows,
        kept_columns: kept,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CategoricalMap {
    pub encoding: EncodingKind,
    /// Categories (burt) or individuals (cdt), one per mapped row.
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub map: VectorMap,
    pub warnings: Vec<String>,
}

/// Encodes, applies the chi-square transform and trains a batch SOM on the
/// transformed rows.
pub fn categorical_som_train(
    table: &CategoricalTable,
    encoding: EncodingKind,
    lattice: &MapLattice,
    schedule: &NeighborhoodSchedule,
    seed: u64,
) -> Result<CategoricalMap> {
    let encoded = match encoding {
        EncodingKind::Burt => burt_table(table),
        EncodingKind::Cdt => disjunctive_table(table),
    };
    let mut row_labels = encoded.row_labels.clone();
    let mut matrix = encoded.matrix.clone();
    let mut warnings = Vec::new();
    if encoding == EncodingKind::Burt {
        // categories nobody chose have empty rows as well as empty columns
        let empty: Vec<usize> = (0..matrix.len()).filter(|&i| matrix[i][i] == 0.0).collect();
        if !empty.is_empty() {
            let msg = format!(
                "unused categories left out of the map: {}",
                empty.iter().map(|&i| row_labels[i].as_str()).collect::<Vec<_>>().join(", ")
            );
            warn!("{msg}");
            warnings.push(msg);
            let keep: Vec<usize> = (0..matrix.len()).filter(|i| !empty.contains(i)).collect();
            matrix = keep.iter().map(|&i| matrix[i].clone()).collect();
            row_labels = keep.iter().map(|&i| row_labels[i].clone()).collect();
        }
    }
    let ca = ca_transform(&matrix)?;
    warnings.extend(ca.warnings);
    let column_labels = ca.kept_columns.iter().map(|&j| encoded.column_labels[j].clone()).collect();
    let map = batch_som_train(&ca.rows, lattice, schedule, seed)?;
    Ok(CategoricalMap {
        encoding,
        row_labels,
        column_labels,
        map,
        warnings,
    })
}
