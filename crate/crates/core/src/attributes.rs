//! Per-node covariates aligned to graph node indices.
//!
//! A missing cell is `None`, never an in-band label, so that imputed cells
//! can always be told apart from observed ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttributeError {
    #[error("no attribute column named `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not categorical")]
    NotCategorical(String),
    #[error("column `{0}` is not continuous")]
    NotContinuous(String),
    #[error("column `{column}` has {got} values, expected {expected}")]
    LengthMismatch {
        column: String,
        got: usize,
        expected: usize,
    },
    #[error("column `{column}` has no level `{level}`")]
    UnknownLevel { column: String, level: String },
    #[error("column `{column}` has value index {index} but only {levels} levels")]
    LevelOutOfRange {
        column: String,
        index: u32,
        levels: usize,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` declares the same level twice")]
    DuplicateLevel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnData {
    Categorical {
        levels: Vec<String>,
        values: Vec<Option<u32>>,
    },
    Continuous {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        units: Option<String>,
        values: Vec<Option<f64>>,
    },
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Categorical { values, .. } => values.len(),
            ColumnData::Continuous { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Categorical { values, .. } => values[row].is_none(),
            ColumnData::Continuous { values, .. } => values[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&r| self.is_missing(r)).count()
    }

    fn select_rows(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Categorical { levels, values } => ColumnData::Categorical {
                levels: levels.clone(),
                values: rows.iter().map(|&r| values[r]).collect(),
            },
            ColumnData::Continuous { units, values } => ColumnData::Continuous {
                units: units.clone(),
                values: rows.iter().map(|&r| values[r]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub data: ColumnData,
}

impl Column {
    pub fn categorical(
        name: impl Into<String>,
        levels: Vec<String>,
        values: Vec<Option<u32>>,
    ) -> Result<Self, AttributeError> {
        let name = name.into();
        for (k, l) in levels.iter().enumerate() {
            if levels[..k].contains(l) {
                return Err(AttributeError::DuplicateLevel(name));
            }
        }
        for &index in values.iter().flatten() {
            if index as usize >= levels.len() {
                return Err(AttributeError::LevelOutOfRange {
                    column: name,
                    index,
                    levels: levels.len(),
                });
            }
        }
        Ok(Column {
            name,
            data: ColumnData::Categorical { levels, values },
        })
    }

    /// Categorical column from labels; `None` marks a missing cell.
    pub fn from_labels<S: AsRef<str>>(
        name: impl Into<String>,
        levels: &[&str],
        labels: &[Option<S>],
    ) -> Result<Self, AttributeError> {
        let name = name.into();
        let levels: Vec<String> = levels.iter().map(|s| s.to_string()).collect();
        let mut values = Vec::with_capacity(labels.len());
        for label in labels {
            values.push(match label {
                None => None,
                Some(l) => Some(
                    levels
                        .iter()
                        .position(|x| x == l.as_ref())
                        .ok_or_else(|| AttributeError::UnknownLevel {
                            column: name.clone(),
                            level: l.as_ref().to_string(),
                        })? as u32,
                ),
            });
        }
        Column::categorical(name, levels, values)
    }

    pub fn continuous(
        name: impl Into<String>,
        units: Option<String>,
        values: Vec<Option<f64>>,
    ) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Continuous { units, values },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.data, ColumnData::Categorical { .. })
    }
}

/// Named columns, each with exactly one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeTable {
    rows: usize,
    columns: Vec<Column>,
}

impl AttributeTable {
    /// Table with `rows` rows and no columns.
    pub fn new(rows: usize) -> Self {
        AttributeTable {
            rows,
            columns: Vec::new(),
        }
    }

    pub fn with_columns(rows: usize, columns: Vec<Column>) -> Result<Self, AttributeError> {
        let mut t = AttributeTable::new(rows);
        for c in columns {
            t.push(c)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, column: Column) -> Result<(), AttributeError> {
        if column.data.len() != self.rows {
            return Err(AttributeError::LengthMismatch {
                column: column.name,
                got: column.data.len(),
                expected: self.rows,
            });
        }
        if self.index_of(&column.name).is_some() {
            return Err(AttributeError::DuplicateColumn(column.name));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column, AttributeError> {
        self.index_of(name)
            .map(|k| &self.columns[k])
            .ok_or_else(|| AttributeError::UnknownColumn(name.to_string()))
    }

    pub(crate) fn column_mut(&mut self, name: &str) -> Result<&mut Column, AttributeError> {
        let k = self
            .index_of(name)
            .ok_or_else(|| AttributeError::UnknownColumn(name.to_string()))?;
        Ok(&mut self.columns[k])
    }

    /// Levels and values of a categorical column.
    pub fn categorical(&self, name: &str) -> Result<(&[String], &[Option<u32>]), AttributeError> {
        match &self.column(name)?.data {
            ColumnData::Categorical { levels, values } => Ok((levels, values)),
            ColumnData::Continuous { .. } => Err(AttributeError::NotCategorical(name.to_string())),
        }
    }

    pub fn continuous(&self, name: &str) -> Result<&[Option<f64>], AttributeError> {
        match &self.column(name)?.data {
            ColumnData::Continuous { values, .. } => Ok(values),
            ColumnData::Categorical { .. } => Err(AttributeError::NotContinuous(name.to_string())),
        }
    }

    /// Level label of a categorical cell, `None` when missing.
    pub fn label(&self, name: &str, row: usize) -> Result<Option<&str>, AttributeError> {
        let (levels, values) = self.categorical(name)?;
        Ok(values[row].map(|v| levels[v as usize].as_str()))
    }

    /// Same columns restricted to (and reordered by) `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> AttributeTable {
        AttributeTable {
            rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.select_rows(rows),
                })
                .collect(),
        }
    }

    /// Rows with no missing cell in any of `names`.
    pub fn complete_rows(&self, names: &[&str]) -> Result<Vec<usize>, AttributeError> {
        let cols = names
            .iter()
            .map(|n| self.column(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..self.rows)
            .filter(|&r| cols.iter().all(|c| !c.data.is_missing(r)))
            .collect())
    }

    pub fn missing_mask(&self) -> MissingnessMask {
        MissingnessMask {
            columns: self.columns.iter().map(|c| c.name.clone()).collect(),
            missing: self
                .columns
                .iter()
                .map(|c| (0..self.rows).map(|r| c.data.is_missing(r)).collect())
                .collect(),
        }
    }
}

/// Per-cell missingness flags, column-major, aligned with an
/// [`AttributeTable`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingnessMask {
    pub columns: Vec<String>,
    pub missing: Vec<Vec<bool>>,
}

impl MissingnessMask {
    pub fn is_missing(&self, column: &str, row: usize) -> bool {
        self.columns
            .iter()
            .position(|c| c == column)
            .map(|k| self.missing[k][row])
            .unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.missing.iter().flatten().filter(|&&m| m).count()
    }

    pub fn column_count(&self, column: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c == column)
            .map(|k| self.missing[k].iter().filter(|&&m| m).count())
            .unwrap_or(0)
    }
}
