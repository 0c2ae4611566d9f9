//! Estimation, Wald inference and goodness of fit.

pub mod gof;
pub mod logistic;
pub mod mcmle;
pub mod screen;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::attributes::AttributeTable;
use crate::graph::Graph;
use crate::model::{Model, ModelError, ModelSpec};
use crate::sampler::SamplerError;
use logistic::{IrlsOptions, LogisticData, LogisticError};

pub use gof::{gof, GofReport, GofRow};
pub use mcmle::{fit_mcmle, McmleConfig};
pub use screen::{screen_univariate, ScreenEntry, ScreenReport, DEFAULT_SCREEN_ALPHA};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("statistics are collinear: {}", terms.join(", "))]
    RankDeficient { terms: Vec<String> },
    #[error("`{term}` perfectly predicts ties; its estimate diverges to {}", if *positive { "+inf" } else { "-inf" })]
    Separation { term: String, positive: bool },
    #[error("model is degenerate: sampled statistics {sampled:?} collapse away from observed {observed:?}")]
    Degeneracy {
        names: Vec<String>,
        observed: Vec<f64>,
        sampled: Vec<f64>,
    },
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mple,
    Mcmle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Norm of the (estimated) log-likelihood gradient at the estimate.
    pub gradient_norm: f64,
    pub converged: bool,
    /// Smallest per-statistic effective sample size of the final MCMC
    /// sample; absent for MPLE.
    pub effective_sample_size: Option<f64>,
    /// Monte Carlo standard error of each coefficient; absent for MPLE.
    pub mc_standard_errors: Option<Vec<f64>>,
    pub log_likelihood: Option<f64>,
}

/// One row of the odds-ratio table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrRow {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub or: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub theta: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub or_table: Vec<OrRow>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub(crate) fn new(
        names: Vec<String>,
        theta: Vec<f64>,
        covariance: &DMatrix<f64>,
        method: Method,
        diagnostics: Diagnostics,
    ) -> Self {
        let p = theta.len();
        // symmetrise away round-off
        let covariance: Vec<Vec<f64>> = (0..p)
            .map(|a| (0..p).map(|b| 0.5 * (covariance[(a, b)] + covariance[(b, a)])).collect())
            .collect();
        let rows = or_table(&names, &theta, &covariance, Z_95);
        FitResult {
            names,
            theta,
            covariance,
            or_table: rows,
            method,
            diagnostics,
        }
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.theta.len())
            .map(|k| self.covariance[k][k].max(0.0).sqrt())
            .collect()
    }

    pub const CSV_HEADER: [&'static str; 8] =
        ["term", "estimate", "SE", "OR", "ci_low", "ci_high", "p", "stars"];

    pub fn csv_rows(&self) -> Vec<[String; 8]> {
        self.or_table
            .iter()
            .map(|r| {
                [
                    r.term.clone(),
                    format!("{:.6}", r.estimate),
                    format!("{:.6}", r.se),
                    format!("{:.6}", r.or),
                    format!("{:.6}", r.ci_low),
                    format!("{:.6}", r.ci_high),
                    format!("{:.6}", r.p_value),
                    r.stars.clone(),
                ]
            })
            .collect()
    }
}

/// Significance marker: `*` p < 0.05, `†` p < 0.01, `‡` p < 0.001.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "‡"
    } else if p < 0.01 {
        "†"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Two-sided Wald p-value.
pub fn wald_p_value(estimate: f64, se: f64) -> f64 {
    if se > 0.0 {
        erfc((estimate / se).abs() / std::f64::consts::SQRT_2)
    } else if estimate == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Odds ratios exp(θ), Wald intervals exp(θ ± z·SE) and p-values.
pub fn or_table(names: &[String], theta: &[f64], covariance: &[Vec<f64>], z: f64) -> Vec<OrRow> {
    theta
        .iter()
        .enumerate()
        .map(|(k, &est)| {
            let se = covariance[k][k].max(0.0).sqrt();
            let p_value = wald_p_value(est, se);
            OrRow {
                term: names[k].clone(),
                estimate: est,
                se,
                or: est.exp(),
                ci_low: (est - z * se).exp(),
                ci_high: (est + z * se).exp(),
                p_value,
                stars: stars(p_value).to_string(),
            }
        })
        .collect()
}

/// Dyad rows with identical change statistics collapsed into binomial
/// counts, in a deterministic order.
pub fn pseudo_likelihood_data(model: &Model, g: &Graph) -> Result<LogisticData, FitError> {
    let dm = model.design_matrix(g)?;
    let mut groups: BTreeMap<Vec<u64>, (Vec<f64>, f64, f64)> = BTreeMap::new();
    for r in 0..dm.len() {
        let row = dm.row(r);
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        let entry = groups.entry(key).or_insert_with(|| (row.to_vec(), 0.0, 0.0));
        entry.1 += dm.labels[r] as u8 as f64;
        entry.2 += 1.0;
    }
    let mut data = LogisticData::new(model.dim());
    for (row, succ, trials) in groups.into_values() {
        data.push(&row, succ, trials);
    }
    Ok(data)
}

pub(crate) fn map_logistic_error(names: &[String], e: LogisticError) -> FitError {
    match e {
        LogisticError::RankDeficient { column, with } => {
            let mut terms: Vec<String> = with.iter().map(|&k| names[k].clone()).collect();
            terms.push(names[column].clone());
            FitError::RankDeficient { terms }
        }
        LogisticError::Separation { column, positive } => FitError::Separation {
            term: names[column].clone(),
            positive,
        },
        LogisticError::NoData => FitError::InvalidConfig("no dyads to fit".into()),
    }
}

/// Maximum pseudo-likelihood: logistic regression of dyad indicators on
/// change statistics.
pub fn fit_mple_model(model: &Model, g: &Graph) -> Result<FitResult, FitError> {
    let data = pseudo_likelihood_data(model, g)?;
    let fit = logistic::fit(&data, IrlsOptions::default())
        .map_err(|e| map_logistic_error(model.names(), e))?;
    Ok(FitResult::new(
        model.names().to_vec(),
        fit.coef,
        &fit.covariance,
        Method::Mple,
        Diagnostics {
            iterations: fit.iterations,
            gradient_norm: fit.max_abs_score,
            converged: fit.converged,
            effective_sample_size: None,
            mc_standard_errors: None,
            log_likelihood: Some(fit.log_likelihood),
        },
    ))
}

pub fn fit_mple(g: &Graph, attrs: &AttributeTable, model: &ModelSpec) -> Result<FitResult, FitError> {
    let m = Model::new(model, attrs)?;
    fit_mple_model(&m, g)
}
