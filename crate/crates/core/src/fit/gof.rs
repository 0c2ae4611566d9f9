//! Simulation-based goodness of fit on model statistics and the degree
//! distribution.

use serde::{Deserialize, Serialize};

use super::FitError;
use crate::attributes::AttributeTable;
use crate::graph::Graph;
use crate::model::{Model, ModelSpec};
use crate::sampler::{sample_with, SamplerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofRow {
    pub statistic: String,
    pub observed: f64,
    pub simulated_mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_value: f64,
}

impl GofRow {
    fn new(statistic: String, observed: f64, mut sims: Vec<f64>) -> Self {
        let s = sims.len() as f64;
        let simulated_mean = sims.iter().sum::<f64>() / s;
        let below = sims.iter().filter(|&&x| x <= observed).count() as f64 / s;
        let above = sims.iter().filter(|&&x| x >= observed).count() as f64 / s;
        sims.sort_by(f64::total_cmp);
        GofRow {
            statistic,
            observed,
            simulated_mean,
            lower: quantile(&sims, 0.025),
            upper: quantile(&sims, 0.975),
            p_value: (2.0 * below.min(above)).min(1.0),
        }
    }

    pub fn inside_band(&self) -> bool {
        self.lower <= self.observed && self.observed <= self.upper
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub simulations: usize,
    pub model_statistics: Vec<GofRow>,
    /// Rows `degree0`, `degree1`, ... counting nodes of each degree.
    pub degree_distribution: Vec<GofRow>,
    /// Every model statistic lies inside its central 95% simulation band.
    pub no_lack_of_fit: bool,
}

impl GofReport {
    pub const CSV_HEADER: [&'static str; 6] =
        ["statistic", "observed", "simulated_mean", "lower", "upper", "p"];

    pub fn csv_rows(&self) -> Vec<[String; 6]> {
        self.model_statistics
            .iter()
            .chain(&self.degree_distribution)
            .map(|r| {
                [
                    r.statistic.clone(),
                    format!("{:.6}", r.observed),
                    format!("{:.6}", r.simulated_mean),
                    format!("{:.6}", r.lower),
                    format!("{:.6}", r.upper),
                    format!("{:.6}", r.p_value),
                ]
            })
            .collect()
    }
}

fn degree_counts(g: &Graph) -> Vec<f64> {
    let mut counts = Vec::new();
    for d in g.degree_sequence() {
        if counts.len() <= d {
            counts.resize(d + 1, 0.0);
        }
        counts[d] += 1.0;
    }
    counts
}

/// Simulates `cfg.sample_count` networks at `theta` from the observed graph.
pub fn gof_model(
    model: &Model,
    g: &Graph,
    theta: &[f64],
    cfg: &SamplerConfig,
) -> Result<GofReport, FitError> {
    if cfg.sample_count == 0 {
        return Err(FitError::InvalidConfig("goodness of fit needs at least one simulation".into()));
    }
    let mut degrees: Vec<Vec<f64>> = Vec::with_capacity(cfg.sample_count);
    let run = sample_with(g, theta, model, cfg, |sim, _| degrees.push(degree_counts(sim)))?;
    let observed = model.statistics(g);
    let model_statistics: Vec<GofRow> = model
        .names()
        .iter()
        .enumerate()
        .map(|(k, name)| GofRow::new(name.clone(), observed[k], run.stats.iter().map(|s| s[k]).collect()))
        .collect();
    let obs_deg = degree_counts(g);
    let max_deg = degrees
        .iter()
        .map(Vec::len)
        .chain(std::iter::once(obs_deg.len()))
        .max()
        .unwrap_or(0);
    let at = |v: &Vec<f64>, d: usize| v.get(d).copied().unwrap_or(0.0);
    let degree_distribution = (0..max_deg)
        .map(|d| {
            GofRow::new(
                format!("degree{d}"),
                at(&obs_deg, d),
                degrees.iter().map(|v| at(v, d)).collect(),
            )
        })
        .collect();
    let no_lack_of_fit = model_statistics.iter().all(GofRow::inside_band);
    Ok(GofReport {
        simulations: cfg.sample_count,
        model_statistics,
        degree_distribution,
        no_lack_of_fit,
    })
}

pub fn gof(
    g: &Graph,
    attrs: &AttributeTable,
    model: &ModelSpec,
    theta: &[f64],
    cfg: &SamplerConfig,
) -> Result<GofReport, FitError> {
    let m = Model::new(model, attrs)?;
    m.check_graph(g)?;
    gof_model(&m, g, theta, cfg)
}
