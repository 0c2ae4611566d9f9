//! Writing a graph and attribute table in the pipeline's input format.

use std::fs;
use std::path::{Path, PathBuf};

use crate::attributes::{AttributeTable, ColumnData};
use crate::graph::Graph;

use super::schema::{ColumnKind, ColumnSchema, Schema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub attributes: PathBuf,
    pub schema: PathBuf,
}

/// Schema declaring each column of `attrs` with its current levels; the
/// first level is the reference.
pub fn schema_of(attrs: &AttributeTable) -> Schema {
    let columns = attrs
        .columns()
        .iter()
        .map(|c| ColumnSchema {
            name: c.name.clone(),
            kind: match &c.data {
                ColumnData::Categorical { levels, .. } => ColumnKind::Categorical {
                    levels: levels.clone(),
                    reference: levels.first().cloned(),
                    recode: None,
                },
                ColumnData::Continuous { units, .. } => ColumnKind::Continuous { units: units.clone() },
            },
        })
        .collect();
    Schema {
        id_column: "id".into(),
        missing_labels: vec!["".into()],
        columns,
    }
}

/// Writes `edges.csv`, `attributes.csv` and `schema.json` into `dir`. Node
/// `k` gets id `k + 1`; missing cells are empty.
pub fn write_dataset(dir: &Path, g: &Graph, attrs: &AttributeTable) -> std::io::Result<DatasetPaths> {
    fs::create_dir_all(dir)?;
    let paths = DatasetPaths {
        edges: dir.join("edges.csv"),
        attributes: dir.join("attributes.csv"),
        schema: dir.join("schema.json"),
    };
    let mut w = csv::Writer::from_path(&paths.edges)?;
    w.write_record(["source", "target"])?;
    for (i, j) in g.edges() {
        w.write_record([(i + 1).to_string(), (j + 1).to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths.attributes)?;
    let mut header = vec!["id".to_string()];
    header.extend(attrs.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for r in 0..attrs.row_count() {
        let mut row = vec![(r + 1).to_string()];
        for c in attrs.columns() {
            row.push(match &c.data {
                ColumnData::Categorical { levels, values } => values[r].map(|v| levels[v as usize].clone()).unwrap_or_default(),
                ColumnData::Continuous { values, .. } => values[r].map(|v| v.to_string()).unwrap_or_default(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut text = serde_json::to_string_pretty(&schema_of(attrs))?;
    text.push('\n');
    fs::write(&paths.schema, text)?;
    Ok(paths)
}
