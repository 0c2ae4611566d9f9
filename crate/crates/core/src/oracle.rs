//! Exact ERGM computations by enumerating every graph on a small node set.
//!
//! Graphs are indexed by an edge-set bitmask over dyads in lexicographic
//! order: bit `r` is dyad `dyad_at(n, r)`. Everything is kept in log space.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::attributes::AttributeTable;
use crate::graph::Graph;
use crate::model::{dyad_at, Model, ModelError, ModelSpec, StatVector};

/// Largest node count the oracle will enumerate (2^15 graphs).
pub const MAX_NODES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("exact enumeration supports at most {MAX_NODES} nodes, got {0}")]
    TooLarge(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("parameter vector has length {got}, model has {expected} statistics")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("observed `{0}` is on the boundary of attainable values; the MLE does not exist")]
    HullBoundary(String),
    #[error("Newton iteration did not converge (gradient norm {0:.3e})")]
    NonConvergence(f64),
}

pub fn graph_from_mask(n: usize, mask: u64) -> Graph {
    let dyads = n * n.saturating_sub(1) / 2;
    let mut g = Graph::empty(n);
    for r in 0..dyads {
        if mask >> r & 1 == 1 {
            let (i, j) = dyad_at(n, r);
            g.add_edge(i, j);
        }
    }
    g
}

pub fn mask_of(g: &Graph) -> u64 {
    let n = g.node_count();
    let mut mask = 0u64;
    let mut r = 0;
    for i in 0..n {
        for j in i + 1..n {
            if g.has_edge(i, j) {
                mask |= 1 << r;
            }
            r += 1;
        }
    }
    mask
}

/// Statistics of every graph on `n` nodes for one model. Independent of θ,
/// so several distributions can share one enumeration.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub n: usize,
    pub names: Vec<String>,
    /// `stats[mask]`
    pub stats: Vec<StatVector>,
}

impl Enumeration {
    pub fn new(n: usize, attrs: &AttributeTable, model: &ModelSpec) -> Result<Self, OracleError> {
        if n > MAX_NODES {
            return Err(OracleError::TooLarge(n));
        }
        let m = Model::new(model, attrs)?;
        m.check_graph(&Graph::empty(n))?;
        let count = 1u64 << (n * n.saturating_sub(1) / 2);
        let stats = (0..count)
            .into_par_iter()
            .map(|mask| m.statistics(&graph_from_mask(n, mask)))
            .collect();
        Ok(Enumeration {
            n,
            names: m.names().to_vec(),
            stats,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn distribution(&self, theta: &[f64]) -> Result<ExactDistribution, OracleError> {
        if theta.len() != self.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        let log_weights: Vec<f64> = self
            .stats
            .iter()
            .map(|s| s.iter().zip(theta).map(|(a, b)| a * b).sum())
            .collect();
        let log_k = log_sum_exp(&log_weights);
        Ok(ExactDistribution {
            n: self.n,
            log_k,
            log_probs: log_weights.into_iter().map(|w| w - log_k).collect(),
        })
    }

    /// Exact log-likelihood, its gradient g(y) - E[g] and the Fisher
    /// information Cov[g].
    pub fn log_likelihood(
        &self,
        observed: &[f64],
        theta: &[f64],
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>), OracleError> {
        let dist = self.distribution(theta)?;
        let p = self.dim();
        let mean = DVector::from_vec(dist.expected_stats(self));
        let mut cov = DMatrix::zeros(p, p);
        for (s, lp) in self.stats.iter().zip(&dist.log_probs) {
            let w = lp.exp();
            let d = DVector::from_fn(p, |a, _| s[a] - mean[a]);
            cov += w * &d * d.transpose();
        }
        let ll = observed.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - dist.log_k;
        let grad = DVector::from_fn(p, |a, _| observed[a] - mean[a]);
        Ok((ll, grad, cov))
    }
}

/// Normalised ERGM probabilities of every graph on `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub n: usize,
    /// log k(θ)
    pub log_k: f64,
    /// `log_probs[mask]`
    pub log_probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn probability(&self, mask: u64) -> f64 {
        self.log_probs[mask as usize].exp()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn expected_stats(&self, enumeration: &Enumeration) -> StatVector {
        let mut out = vec![0.0; enumeration.dim()];
        for (s, lp) in enumeration.stats.iter().zip(&self.log_probs) {
            let w = lp.exp();
            for (o, v) in out.iter_mut().zip(s) {
                *o += w * v;
            }
        }
        out
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn exact_distribution(
    n: usize,
    attrs: &AttributeTable,
    model: &ModelSpec,
    theta: &[f64],
) -> Result<ExactDistribution, OracleError> {
    Enumeration::new(n, attrs, model)?.distribution(theta)
}

/// Σ_y P(y) g(y).
pub fn exact_expected_stats(
    n: usize,
    attrs: &AttributeTable,
    model: &ModelSpec,
    theta: &[f64],
) -> Result<StatVector, OracleError> {
    let e = Enumeration::new(n, attrs, model)?;
    Ok(e.distribution(theta)?.expected_stats(&e))
}

/// Exact MLE by Newton's method on the enumerated log-likelihood.
pub fn exact_mle(
    g_obs: &Graph,
    attrs: &AttributeTable,
    model: &ModelSpec,
) -> Result<Vec<f64>, OracleError> {
    let e = Enumeration::new(g_obs.node_count(), attrs, model)?;
    let observed = Model::new(model, attrs)?.statistics(g_obs);
    exact_mle_enumerated(&e, &observed)
}

pub fn exact_mle_enumerated(e: &Enumeration, observed: &[f64]) -> Result<Vec<f64>, OracleError> {
    let p = e.dim();
    for k in 0..p {
        let lo = e.stats.iter().map(|s| s[k]).fold(f64::INFINITY, f64::min);
        let hi = e.stats.iter().map(|s| s[k]).fold(f64::NEG_INFINITY, f64::max);
        if observed[k] <= lo || observed[k] >= hi {
            return Err(OracleError::HullBoundary(e.names[k].clone()));
        }
    }
    let mut theta = vec![0.0; p];
    let (mut ll, mut grad, mut info) = e.log_likelihood(observed, &theta)?;
    for _ in 0..200 {
        if grad.norm() <= 1e-10 {
            return Ok(theta);
        }
        let step = info
            .clone()
            .cholesky()
            .ok_or_else(|| OracleError::HullBoundary(e.names.join(", ")))?
            .solve(&grad);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let (cll, cgrad, cinfo) = e.log_likelihood(observed, &cand)?;
            if cll >= ll - 1e-14 * ll.abs().max(1.0) || t < 1e-8 {
                theta = cand;
                (ll, grad, info) = (cll, cgrad, cinfo);
                break;
            }
            t *= 0.5;
        }
        if theta.iter().any(|t| t.abs() > 50.0) {
            return Err(OracleError::HullBoundary(e.names.join(", ")));
        }
    }
    if grad.norm() <= 1e-10 {
        Ok(theta)
    } else {
        Err(OracleError::NonConvergence(grad.norm()))
    }
}
