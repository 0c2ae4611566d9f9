//! Univariate screening of candidate terms against an edges-only baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_mple_model, FitError, FitResult};
use crate::attributes::AttributeTable;
use crate::graph::Graph;
use crate::model::{Model, ModelSpec, TermSpec};

pub const DEFAULT_SCREEN_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenEntry {
    pub term: TermSpec,
    /// Smallest p-value among the term's statistics.
    pub min_p_value: Option<f64>,
    pub selected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub alpha: f64,
    pub entries: Vec<ScreenEntry>,
}

impl ScreenReport {
    /// Selected terms in candidate order.
    pub fn selected(&self) -> Vec<TermSpec> {
        self.entries
            .iter()
            .filter(|e| e.selected)
            .map(|e| e.term.clone())
            .collect()
    }
}

fn screen_one(g: &Graph, attrs: &AttributeTable, term: &TermSpec, alpha: f64) -> ScreenEntry {
    let result: Result<FitResult, FitError> = (|| {
        let model = Model::new(&ModelSpec::edges().with(term.clone()), attrs)?;
        model.check_graph(g)?;
        fit_mple_model(&model, g)
    })();
    match result {
        Ok(fit) => {
            // the first row is edges
            let min_p = fit.or_table[1..]
                .iter()
                .map(|r| r.p_value)
                .fold(f64::INFINITY, f64::min);
            ScreenEntry {
                term: term.clone(),
                min_p_value: Some(min_p),
                selected: min_p < alpha,
                fit: Some(fit),
                error: None,
            }
        }
        Err(e) => ScreenEntry {
            term: term.clone(),
            min_p_value: None,
            selected: false,
            fit: None,
            error: Some(e.to_string()),
        },
    }
}

/// Fits `edges + term` by MPLE for each candidate. A term is selected when
/// any of its statistics has p < `alpha`; failed fits are recorded and not
/// selected.
pub fn screen_univariate(
    g: &Graph,
    attrs: &AttributeTable,
    candidates: &[TermSpec],
    alpha: f64,
) -> ScreenReport {
    let entries = candidates
        .par_iter()
        .map(|t| screen_one(g, attrs, t, alpha))
        .collect();
    ScreenReport { alpha, entries }
}
