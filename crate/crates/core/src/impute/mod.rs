//! Completion of missing attribute cells.
//!
//! Both imputers treat nodes as independent observations and never touch
//! an observed cell.

pub mod forest;
mod missforest;
mod psm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeError, AttributeTable, ColumnData, MissingnessMask};

pub use forest::{fit_random_forest, Forest, ForestConfig, ForestError, Labels, Prediction};
pub use missforest::{impute_missforest, MAX_MISSFOREST_ITERATIONS};
pub use psm::impute_psm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImputeError {
    #[error(transparent)]
    Attribute(#[from] AttributeError),
    #[error("column `{0}` has no observed values")]
    AllMissing(String),
    #[error("covariate `{column}` is missing for node {row}")]
    CovariateMissing { column: String, row: usize },
    #[error("propensity model is degenerate: {0}")]
    PropensityDegenerate(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("invalid imputation configuration: {0}")]
    ConfigInvalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputationMethod {
    Psm,
    MissForest,
}

/// A matched donor for one imputed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Donor {
    pub column: String,
    pub recipient: usize,
    pub donor: usize,
    pub recipient_score: f64,
    pub donor_score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImputationDiagnostics {
    pub imputed_counts: BTreeMap<String, usize>,
    /// missForest passes run.
    pub iterations: usize,
    pub oob_errors: BTreeMap<String, Option<f64>>,
    /// Propensity model coefficients, continuous covariates standardised.
    pub propensity_coefficients: Vec<(String, f64)>,
    pub donors: Vec<Donor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationResult {
    pub completed: AttributeTable,
    /// Cells that were filled in.
    pub provenance: MissingnessMask,
    pub method: ImputationMethod,
    pub diagnostics: ImputationDiagnostics,
}

impl ImputationResult {
    pub(crate) fn new(
        original: &AttributeTable,
        completed: AttributeTable,
        targets: &[&str],
        method: ImputationMethod,
        mut diagnostics: ImputationDiagnostics,
    ) -> Self {
        let mut provenance = original.missing_mask();
        for (k, name) in provenance.columns.clone().iter().enumerate() {
            if !targets.contains(&name.as_str()) {
                provenance.missing[k].iter_mut().for_each(|m| *m = false);
            } else {
                diagnostics
                    .imputed_counts
                    .insert(name.clone(), provenance.missing[k].iter().filter(|&&m| m).count());
            }
        }
        ImputationResult {
            completed,
            provenance,
            method,
            diagnostics,
        }
    }
}

/// Most frequent observed level (first on ties).
pub fn column_mode(values: &[Option<u32>], levels: usize) -> Option<u32> {
    let mut counts = vec![0usize; levels];
    for v in values.iter().flatten() {
        counts[*v as usize] += 1;
    }
    let mut best: Option<u32> = None;
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|b| c > counts[b as usize]) {
            best = Some(k as u32);
        }
    }
    best
}

pub fn column_mean(values: &[Option<f64>]) -> Option<f64> {
    let obs: Vec<f64> = values.iter().flatten().copied().collect();
    (!obs.is_empty()).then(|| obs.iter().sum::<f64>() / obs.len() as f64)
}

/// Fills missing cells of `columns` with the observed mode (categorical) or
/// mean (continuous).
pub fn impute_mode_mean(attrs: &AttributeTable, columns: &[&str]) -> Result<AttributeTable, ImputeError> {
    let mut out = attrs.clone();
    for &name in columns {
        let col = out.column_mut(name)?;
        match &mut col.data {
            ColumnData::Categorical { levels, values } => {
                let mode = column_mode(values, levels.len())
                    .ok_or_else(|| ImputeError::AllMissing(name.to_string()))?;
                values.iter_mut().filter(|v| v.is_none()).for_each(|v| *v = Some(mode));
            }
            ColumnData::Continuous { values, .. } => {
                let mean = column_mean(values).ok_or_else(|| ImputeError::AllMissing(name.to_string()))?;
                values.iter_mut().filter(|v| v.is_none()).for_each(|v| *v = Some(mean));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::Column;

    #[test]
    fn mode_and_mean_fill() {
        let t = AttributeTable::with_columns(
            4,
            vec![
                Column::from_labels("c", &["a", "b"], &[Some("b"), None, Some("b"), Some("a")]).unwrap(),
                Column::continuous("x", None, vec![Some(1.0), Some(3.0), None, None]),
            ],
        )
        .unwrap();
        let f = impute_mode_mean(&t, &["c", "x"]).unwrap();
        assert_eq!(f.label("c", 1).unwrap(), Some("b"));
        assert_eq!(f.continuous("x").unwrap()[3], Some(2.0));
        assert_eq!(column_mode(&[Some(1), Some(0)], 2), Some(0));
    }
}
