use std::cmp::Ordering;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::dataset::{Column, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FillValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeStrategy {
    ColumnMean,
    ColumnMode,
    Constant(FillValue),
}

/// Strategy per column type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputePlan {
    pub numeric: ImputeStrategy,
    pub categorical: ImputeStrategy,
}

impl Default for ImputePlan {
    fn default() -> Self {
        Self {
            numeric: ImputeStrategy::ColumnMean,
            categorical: ImputeStrategy::ColumnMode,
        }
    }
}

/// Fill values learned from one dataset, applicable to another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    fills: IndexMap<String, FillValue>,
}

/// Most frequent value; ties go to the smallest so row order never matters.
fn mode_of<T: Clone>(
    values: impl Iterator<Item = T>,
    cmp: impl Fn(&T, &T) -> Ordering,
) -> Option<T> {
    let mut sorted: Vec<T> = values.collect();
    sorted.sort_by(&cmp);
    let mut best: Option<(&T, usize)> = None;
    for run in sorted.chunk_by(|a, b| cmp(a, b) == Ordering::Equal) {
        if best.is_none_or(|(_, c)| run.len() > c) {
            best = Some((&run[0], run.len()));
        }
    }
    best.map(|(v, _)| v.clone())
}

fn fill_for(name: &str, column: &Column, strategy: &ImputeStrategy) -> Result<FillValue> {
    match (column, strategy) {
        (Column::Numeric(v), ImputeStrategy::ColumnMean) => {
            let present: Vec<f64> = v.iter().flatten().copied().collect();
            if present.is_empty() {
                return Err(Error::AllMissing(name.to_string()));
            }
            Ok(FillValue::Number(
                present.iter().sum::<f64>() / present.len() as f64,
            ))
        }
        (Column::Categorical(_), ImputeStrategy::ColumnMean) => Err(Error::ColumnType {
            column: name.to_string(),
            expected: "numeric (column_mean)",
        }),
        (Column::Numeric(v), ImputeStrategy::ColumnMode) => {
            mode_of(v.iter().flatten().copied(), f64::total_cmp)
                .map(FillValue::Number)
                .ok_or_else(|| Error::AllMissing(name.to_string()))
        }
        (Column::Categorical(v), ImputeStrategy::ColumnMode) => {
            mode_of(v.iter().flatten(), |a, b| a.cmp(b))
                .map(|s| FillValue::Text(s.clone()))
                .ok_or_else(|| Error::AllMissing(name.to_string()))
        }
        (Column::Numeric(_), ImputeStrategy::Constant(FillValue::Number(x))) => {
            Ok(FillValue::Number(*x))
        }
        (Column::Categorical(_), ImputeStrategy::Constant(FillValue::Text(s))) => {
            Ok(FillValue::Text(s.clone()))
        }
        (Column::Numeric(_), ImputeStrategy::Constant(_)) => Err(Error::ColumnType {
            column: name.to_string(),
            expected: "compatible with a text constant",
        }),
        (Column::Categorical(_), ImputeStrategy::Constant(_)) => Err(Error::ColumnType {
            column: name.to_string(),
            expected: "compatible with a numeric constant",
        }),
    }
}

impl Imputer {
    /// Learn fill values for the named columns.
    pub fn fit(ds: &Dataset, columns: &[&str], plan: &ImputePlan) -> Result<Self> {
        let mut fills = IndexMap::new();
        for &name in columns {
            let col = ds.column(name)?;
            let strategy = match col {
                Column::Numeric(_) => &plan.numeric,
                Column::Categorical(_) => &plan.categorical,
            };
            fills.insert(name.to_string(), fill_for(name, col, strategy)?);
        }
        Ok(Self { fills })
    }

    pub fn fill_value(&self, column: &str) -> Option<&FillValue> {
        self.fills.get(column)
    }

    /// Replace missing cells of every fitted column. Present cells are never touched.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut out = ds.clone();
        for (name, fill) in &self.fills {
            let col = match (ds.column(name)?, fill) {
                (Column::Numeric(v), FillValue::Number(x)) => {
                    Column::Numeric(v.iter().map(|c| Some(c.unwrap_or(*x))).collect())
                }
                (Column::Categorical(v), FillValue::Text(s)) => Column::Categorical(
                    v.iter()
                        .map(|c| Some(c.clone().unwrap_or_else(|| s.clone())))
                        .collect(),
                ),
                _ => {
                    return Err(Error::ColumnType {
                        column: name.clone(),
                        expected: "of the type it was fitted on",
                    })
                }
            };
            out.set_column(name.clone(), col)?;
        }
        Ok(out)
    }
}

/// Impute every column that has missing cells with one strategy.
pub fn impute(ds: &Dataset, strategy: &ImputeStrategy) -> Result<Dataset> {
    let cols: Vec<String> = ds
        .columns()
        .filter(|(_, c)| c.missing_count() > 0)
        .map(|(n, _)| n.to_string())
        .collect();
    let plan = ImputePlan {
        numeric: strategy.clone(),
        categorical: strategy.clone(),
    };
    let names: Vec<&str> = cols.iter().map(String::as_str).collect();
    Imputer::fit(ds, &names, &plan)?.apply(ds)
}
