//! Attribute schema, raw CSV ingestion and level recoding.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeError, AttributeTable, Column, ColumnData};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("column `{column}`: label `{label}` has no recode rule")]
    UnmappedLabel { column: String, label: String },
    #[error("column `{column}`: recode target `{level}` is not a declared level")]
    UndeclaredLevel { column: String, level: String },
    #[error("column `{column}`: reference `{level}` is not a declared level")]
    BadReference { column: String, level: String },
    #[error("schema declares column `{0}` twice")]
    DuplicateColumn(String),
    #[error("attribute file has no column `{0}`")]
    MissingCsvColumn(String),
    #[error("column `{column}`, row {row}: `{value}` is not a number")]
    NotANumber { column: String, row: usize, value: String },
    #[error("attribute file: {0}")]
    Csv(String),
    #[error(transparent)]
    Attribute(#[from] AttributeError),
}

fn default_id_column() -> String {
    "id".into()
}

fn default_missing_labels() -> Vec<String> {
    vec!["".into(), "NA".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical {
        /// Analysis levels in reporting order.
        levels: Vec<String>,
        /// Default reference level for factor and mix terms.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<String>,
        /// Raw label to analysis level; `null` marks the label as missing.
        /// Without a map, raw labels must already be levels.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        recode: Option<BTreeMap<String, Option<String>>>,
    },
    Continuous {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        units: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default = "default_id_column")]
    pub id_column: String,
    /// Raw cell values read as missing.
    #[serde(default = "default_missing_labels")]
    pub missing_labels: Vec<String>,
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn validate(&self) -> Result<(), SchemaError> {
        for (k, c) in self.columns.iter().enumerate() {
            if self.columns[..k].iter().any(|d| d.name == c.name) {
                return Err(SchemaError::DuplicateColumn(c.name.clone()));
            }
            if let ColumnKind::Categorical { levels, reference, recode } = &c.kind {
                for (k, l) in levels.iter().enumerate() {
                    if levels[..k].contains(l) {
                        return Err(AttributeError::DuplicateLevel(c.name.clone()).into());
                    }
                }
                if let Some(r) = reference.as_ref().filter(|r| !levels.contains(r)) {
                    return Err(SchemaError::BadReference { column: c.name.clone(), level: r.clone() });
                }
                for target in recode.iter().flat_map(|m| m.values()).flatten() {
                    if !levels.contains(target) {
                        return Err(SchemaError::UndeclaredLevel {
                            column: c.name.clone(),
                            level: target.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Declared levels of a categorical column.
    pub fn levels(&self, name: &str) -> Option<&[String]> {
        match &self.column(name)?.kind {
            ColumnKind::Categorical { levels, .. } => Some(levels),
            ColumnKind::Continuous { .. } => None,
        }
    }

    /// Reference level of a categorical column: the declared one, else the
    /// first level.
    pub fn reference(&self, name: &str) -> Option<&str> {
        match &self.column(name)?.kind {
            ColumnKind::Categorical { levels, reference, .. } => {
                reference.as_deref().or(levels.first().map(String::as_str))
            }
            ColumnKind::Continuous { .. } => None,
        }
    }

    /// One rule per categorical column.
    pub fn recode_rules(&self) -> Vec<RecodeRule> {
        self.columns
            .iter()
            .filter_map(|c| match &c.kind {
                ColumnKind::Categorical { levels, recode, .. } => Some(RecodeRule {
                    column: c.name.clone(),
                    levels: levels.clone(),
                    mapping: recode.clone().unwrap_or_else(|| {
                        levels.iter().map(|l| (l.clone(), Some(l.clone()))).collect()
                    }),
                }),
                ColumnKind::Continuous { .. } => None,
            })
            .collect()
    }
}

/// Collapses the raw labels of one categorical column onto analysis levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecodeRule {
    pub column: String,
    pub levels: Vec<String>,
    pub mapping: BTreeMap<String, Option<String>>,
}

/// Applies `rules`; columns without a rule are copied. Every observed raw
/// label must be mapped.
pub fn recode(attrs: &AttributeTable, rules: &[RecodeRule]) -> Result<AttributeTable, SchemaError> {
    let mut out = AttributeTable::new(attrs.row_count());
    for col in attrs.columns() {
        let rule = rules.iter().find(|r| r.column == col.name);
        let new = match (rule, &col.data) {
            (Some(rule), ColumnData::Categorical { levels, values }) => {
                let mut map: Vec<Option<u32>> = Vec::with_capacity(levels.len());
                for (k, raw) in levels.iter().enumerate() {
                    let used = values.contains(&Some(k as u32));
                    let target = match rule.mapping.get(raw) {
                        Some(t) => t.as_ref(),
                        None if used => {
                            return Err(SchemaError::UnmappedLabel {
                                column: col.name.clone(),
                                label: raw.clone(),
                            })
                        }
                        None => None,
                    };
                    map.push(match target {
                        None => None,
                        Some(t) => Some(rule.levels.iter().position(|l| l == t).ok_or_else(|| {
                            SchemaError::UndeclaredLevel { column: col.name.clone(), level: t.clone() }
                        })? as u32),
                    });
                }
                let values = values.iter().map(|v| v.and_then(|k| map[k as usize])).collect();
                Column::categorical(col.name.clone(), rule.levels.clone(), values)?
            }
            (Some(_), ColumnData::Continuous { .. }) => {
                return Err(AttributeError::NotCategorical(col.name.clone()).into())
            }
            (None, _) => col.clone(),
        };
        out.push(new)?;
    }
    Ok(out)
}

/// Node ids and a raw attribute table read from CSV. Categorical columns
/// keep their raw labels as levels, in order of first appearance, ready for
/// [`recode`].
pub fn read_attributes<R: Read>(reader: R, schema: &Schema) -> Result<(Vec<String>, AttributeTable), SchemaError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| SchemaError::Csv(e.to_string()))?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SchemaError::MissingCsvColumn(name.to_string()))
    };
    let id_pos = position(&schema.id_column)?;
    let col_pos: Vec<usize> = schema.columns.iter().map(|c| position(&c.name)).collect::<Result<_, _>>()?;

    let mut ids = Vec::new();
    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); schema.columns.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| SchemaError::Csv(e.to_string()))?;
        ids.push(record.get(id_pos).unwrap_or("").to_string());
        for (k, &p) in col_pos.iter().enumerate() {
            let raw = record.get(p).unwrap_or("");
            let missing = schema.missing_labels.iter().any(|m| m == raw);
            cells[k].push((!missing).then(|| raw.to_string()));
        }
    }

    let mut table = AttributeTable::new(ids.len());
    for (c, raw) in schema.columns.iter().zip(cells) {
        let column = match &c.kind {
            ColumnKind::Categorical { .. } => {
                let mut levels: Vec<String> = Vec::new();
                let values = raw
                    .iter()
                    .map(|cell| {
                        cell.as_ref().map(|label| match levels.iter().position(|l| l == label) {
                            Some(k) => k as u32,
                            None => {
                                levels.push(label.clone());
                                (levels.len() - 1) as u32
                            }
                        })
                    })
                    .collect();
                Column::categorical(c.name.clone(), levels, values)?
            }
            ColumnKind::Continuous { units } => {
                let mut values = Vec::with_capacity(raw.len());
                for (row, cell) in raw.into_iter().enumerate() {
                    values.push(match cell {
                        None => None,
                        Some(s) => Some(s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or(
                            SchemaError::NotANumber { column: c.name.clone(), row, value: s },
                        )?),
                    });
                }
                Column::continuous(c.name.clone(), units.clone(), values)
            }
        };
        table.push(column)?;
    }
    Ok((ids, table))
}
