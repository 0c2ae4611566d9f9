//! Synthetic networks with known parameters and controlled missingness.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeTable, Column, MissingnessMask};
use crate::fit::logistic::logistic;
use crate::graph::Graph;
use crate::model::{Model, ModelError, ModelSpec};
use crate::rng;
use crate::sampler::{sample_stats, SamplerConfig, SamplerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SynthColumnKind {
    Categorical { levels: Vec<String>, probabilities: Vec<f64> },
    Continuous { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthColumn {
    pub name: String,
    #[serde(flatten)]
    pub kind: SynthColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum Mechanism {
    Mcar,
    /// Missingness probability logistic(logit(rate) + slope·z), where z is
    /// the standardised value (level index for categorical) of `covariate`.
    Mar { covariate: String, slope: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingSpec {
    pub column: String,
    pub rate: f64,
    #[serde(flatten)]
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub columns: Vec<SynthColumn>,
    pub model: ModelSpec,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub missingness: Vec<MissingSpec>,
    pub seed: u64,
    /// Proposals run from the empty graph; default 10·n².
    #[serde(default)]
    pub burn_in: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub graph: Graph,
    /// Attributes before missingness was injected.
    pub complete: AttributeTable,
    /// Attributes with injected gaps.
    pub observed: AttributeTable,
    pub mask: MissingnessMask,
    pub theta: Vec<f64>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::ConfigInvalid(m));
        for c in &self.columns {
            match &c.kind {
                SynthColumnKind::Categorical { levels, probabilities } => {
                    if levels.is_empty() || levels.len() != probabilities.len() {
                        return bad(format!("column `{}` needs one probability per level", c.name));
                    }
                    let total: f64 = probabilities.iter().sum();
                    if probabilities.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
                        return bad(format!("probabilities of `{}` must be non-negative and sum to 1", c.name));
                    }
                }
                SynthColumnKind::Continuous { sd, mean } => {
                    if !(sd.is_finite() && *sd >= 0.0 && mean.is_finite()) {
                        return bad(format!("column `{}` needs a finite mean and sd >= 0", c.name));
                    }
                }
            }
        }
        for m in &self.missingness {
            if !(0.0..1.0).contains(&m.rate) {
                return bad(format!("missingness rate for `{}` must be in [0, 1)", m.column));
            }
            if !self.columns.iter().any(|c| c.name == m.column) {
                return bad(format!("missingness names unknown column `{}`", m.column));
            }
            if let Mechanism::Mar { covariate, .. } = &m.mechanism {
                if !self.columns.iter().any(|c| &c.name == covariate) {
                    return bad(format!("MAR covariate `{covariate}` is not a column"));
                }
            }
        }
        if self.n < 2 {
            return bad("need at least 2 nodes".into());
        }
        Ok(())
    }
}

fn draw_attributes(spec: &SynthSpec, rng: &mut rng::Rng) -> Result<AttributeTable, SynthError> {
    let mut table = AttributeTable::new(spec.n);
    for c in &spec.columns {
        let column = match &c.kind {
            SynthColumnKind::Categorical { levels, probabilities } => {
                let values = (0..spec.n)
                    .map(|_| {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut pick = probabilities.len() - 1;
                        for (k, p) in probabilities.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                pick = k;
                                break;
                            }
                        }
                        Some(pick as u32)
                    })
                    .collect();
                Column::categorical(c.name.clone(), levels.clone(), values)
                    .map_err(|e| SynthError::ConfigInvalid(e.to_string()))?
            }
            SynthColumnKind::Continuous { mean, sd } => {
                let normal = Normal::new(*mean, *sd).map_err(|e| SynthError::ConfigInvalid(e.to_string()))?;
                Column::continuous(c.name.clone(), None, (0..spec.n).map(|_| Some(normal.sample(rng))).collect())
            }
        };
        table
            .push(column)
            .map_err(|e| SynthError::ConfigInvalid(e.to_string()))?;
    }
    Ok(table)
}

fn numeric(table: &AttributeTable, name: &str) -> Vec<f64> {
    match table.categorical(name) {
        Ok((_, v)) => v.iter().map(|x| x.map(|k| k as f64).unwrap_or(0.0)).collect(),
        Err(_) => table
            .continuous(name)
            .map(|v| v.iter().map(|x| x.unwrap_or(0.0)).collect())
            .unwrap_or_default(),
    }
}

fn inject_missingness(
    spec: &SynthSpec,
    complete: &AttributeTable,
    rng: &mut rng::Rng,
) -> Result<AttributeTable, SynthError> {
    let mut observed = complete.clone();
    for m in &spec.missingness {
        let probs: Vec<f64> = match &m.mechanism {
            Mechanism::Mcar => vec![m.rate; spec.n],
            Mechanism::Mar { covariate, slope } => {
                let x = numeric(complete, covariate);
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
                let base = if m.rate > 0.0 { (m.rate / (1.0 - m.rate)).ln() } else { f64::NEG_INFINITY };
                x.iter()
                    .map(|v| {
                        let z = if sd > 0.0 { (v - mean) / sd } else { 0.0 };
                        if base.is_finite() { logistic(base + slope * z) } else { 0.0 }
                    })
                    .collect()
            }
        };
        let col = observed
            .column_mut(&m.column)
            .map_err(|e| SynthError::ConfigInvalid(e.to_string()))?;
        for (row, p) in probs.into_iter().enumerate() {
            if rng.random::<f64>() < p {
                match &mut col.data {
                    crate::attributes::ColumnData::Categorical { values, .. } => values[row] = None,
                    crate::attributes::ColumnData::Continuous { values, .. } => values[row] = None,
                }
            }
        }
    }
    Ok(observed)
}

/// Draws attributes, then a graph by a long MH run from the empty graph at
/// `spec.theta`, then missingness. Stream 0 of the seed feeds attributes,
/// stream 1 the sampler and stream 2 the missingness.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let complete = draw_attributes(spec, &mut rng::substream(spec.seed, 0))?;
    let model = Model::new(&spec.model, &complete)?;
    let n2 = (spec.n * spec.n) as u64;
    let cfg = SamplerConfig {
        burn_in: spec.burn_in.unwrap_or(10 * n2),
        thin: 1,
        sample_count: 1,
        seed: rng::derive_seed(spec.seed, 1),
    };
    let run = sample_stats(&Graph::empty(spec.n), &spec.theta, &model, &cfg)?;
    let observed = inject_missingness(spec, &complete, &mut rng::substream(spec.seed, 2))?;
    let mask = observed.missing_mask();
    Ok(SynthOutput {
        graph: run.final_graph,
        complete,
        observed,
        mask,
        theta: spec.theta.clone(),
    })
}
