//! Metropolis-Hastings sampling of graphs from an ERGM.
//!
//! The proposal toggles one uniformly chosen dyad. Adding an edge is
//! accepted with probability min(1, exp(θᵀΔ)), removing one with
//! min(1, exp(-θᵀΔ)), where Δ is the change statistic of the dyad.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::model::{Model, StatVector};
use crate::rng::{self, Rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("thin must be at least 1")]
    ZeroThin,
    #[error("sample_count must be at least 1")]
    ZeroSamples,
    #[error("parameter vector has length {got}, model has {expected} statistics")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector is not finite")]
    NonFinite,
    #[error("sampling needs at least 2 nodes")]
    TooFewNodes,
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Proposals discarded before the first retained sample.
    pub burn_in: u64,
    /// Proposals between retained samples.
    pub thin: u64,
    pub sample_count: usize,
    pub seed: u64,
}

impl SamplerConfig {
    /// `burn_in = 10 n²`, `thin = n²`.
    pub fn for_nodes(n: usize, sample_count: usize, seed: u64) -> Self {
        let n2 = (n * n) as u64;
        SamplerConfig {
            burn_in: 10 * n2,
            thin: n2.max(1),
            sample_count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.thin == 0 {
            return Err(SamplerError::ZeroThin);
        }
        if self.sample_count == 0 {
            return Err(SamplerError::ZeroSamples);
        }
        Ok(())
    }
}

/// A single MH chain owning its graph and incrementally maintained
/// statistics.
#[derive(Debug, Clone)]
pub struct Chain<'m> {
    model: &'m Model,
    theta: Vec<f64>,
    graph: Graph,
    stats: StatVector,
    delta: Vec<f64>,
    rng: Rng,
    proposals: u64,
    accepted: u64,
}

impl<'m> Chain<'m> {
    pub fn new(model: &'m Model, theta: &[f64], start: Graph, rng: Rng) -> Result<Self, SamplerError> {
        if theta.len() != model.dim() {
            return Err(SamplerError::DimensionMismatch {
                expected: model.dim(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(SamplerError::NonFinite);
        }
        model.check_graph(&start)?;
        if start.node_count() < 2 {
            return Err(SamplerError::TooFewNodes);
        }
        let stats = model.statistics(&start);
        Ok(Chain {
            model,
            theta: theta.to_vec(),
            graph: start,
            stats,
            delta: vec![0.0; model.dim()],
            rng,
            proposals: 0,
            accepted: 0,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// One toggle proposal; returns whether it was accepted.
    pub fn step(&mut self) -> bool {
        mh_step(
            &mut self.graph,
            &mut self.stats,
            &mut self.delta,
            &self.theta,
            self.model,
            &mut self.rng,
        )
        .map(|acc| {
            self.proposals += 1;
            self.accepted += acc as u64;
            acc
        })
        .unwrap_or(false)
    }

    pub fn advance(&mut self, proposals: u64) {
        for _ in 0..proposals {
            self.step();
        }
    }

    /// Recomputes the statistics from scratch and returns the largest
    /// absolute difference from the incremental values.
    pub fn resync(&mut self) -> f64 {
        let full = self.model.statistics(&self.graph);
        let drift = full
            .iter()
            .zip(&self.stats)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.stats = full;
        drift
    }

    pub fn into_graph(self) -> Graph {
        self.graph
    }
}

/// One Metropolis-Hastings toggle on `state`. `stats` must hold the current
/// statistics and is updated on acceptance; `scratch` has length p.
///
/// Returns `None` when the graph has fewer than two nodes.
pub fn mh_step(
    state: &mut Graph,
    stats: &mut [f64],
    scratch: &mut [f64],
    theta: &[f64],
    model: &Model,
    rng: &mut Rng,
) -> Option<bool> {
    let n = state.node_count();
    if n < 2 {
        return None;
    }
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    scratch.iter_mut().for_each(|d| *d = 0.0);
    model.add_change_stats(state, i, j, 1.0, scratch);
    let present = state.has_edge(i, j);
    let sign = if present { -1.0 } else { 1.0 };
    let log_ratio = sign * theta.iter().zip(scratch.iter()).map(|(t, d)| t * d).sum::<f64>();
    let accept = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
    if accept {
        state.toggle(i, j);
        for (s, d) in stats.iter_mut().zip(scratch.iter()) {
            *s += sign * d;
        }
    }
    Some(accept)
}

/// Output of [`sample`] and [`sample_stats`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    /// Retained graphs; empty when only statistics were requested.
    pub graphs: Vec<Graph>,
    pub stats: Vec<StatVector>,
    pub acceptance_rate: f64,
    /// Largest gap between incremental and recomputed statistics on the
    /// final state.
    pub max_drift: f64,
    pub final_graph: Graph,
}

fn run_chain(
    g0: &Graph,
    theta: &[f64],
    model: &Model,
    cfg: &SamplerConfig,
    rng: Rng,
    keep_graphs: bool,
    mut visit: impl FnMut(&Graph, &[f64]),
) -> Result<SampleRun, SamplerError> {
    cfg.validate()?;
    let mut chain = Chain::new(model, theta, g0.clone(), rng)?;
    chain.advance(cfg.burn_in);
    let mut graphs = Vec::new();
    let mut stats = Vec::with_capacity(cfg.sample_count);
    for _ in 0..cfg.sample_count {
        chain.advance(cfg.thin);
        visit(chain.graph(), chain.stats());
        if keep_graphs {
            graphs.push(chain.graph().clone());
        }
        stats.push(chain.stats().to_vec());
    }
    let max_drift = chain.resync();
    Ok(SampleRun {
        graphs,
        stats,
        acceptance_rate: chain.acceptance_rate(),
        max_drift,
        final_graph: chain.into_graph(),
    })
}

/// Runs `burn_in + thin * sample_count` proposals from `g0` and retains the
/// state after every `thin` proposals. Deterministic in `cfg.seed`.
pub fn sample(
    g0: &Graph,
    theta: &[f64],
    model: &Model,
    cfg: &SamplerConfig,
) -> Result<SampleRun, SamplerError> {
    run_chain(g0, theta, model, cfg, rng::from_seed(cfg.seed), true, |_, _| {})
}

/// Like [`sample`] without storing graphs.
pub fn sample_stats(
    g0: &Graph,
    theta: &[f64],
    model: &Model,
    cfg: &SamplerConfig,
) -> Result<SampleRun, SamplerError> {
    run_chain(g0, theta, model, cfg, rng::from_seed(cfg.seed), false, |_, _| {})
}

/// Like [`sample_stats`], calling `visit` on every retained state.
pub fn sample_with(
    g0: &Graph,
    theta: &[f64],
    model: &Model,
    cfg: &SamplerConfig,
    visit: impl FnMut(&Graph, &[f64]),
) -> Result<SampleRun, SamplerError> {
    run_chain(g0, theta, model, cfg, rng::from_seed(cfg.seed), false, visit)
}

/// `chains` independent chains run in parallel, each on sub-stream `c` of
/// `cfg.seed` with `cfg.sample_count` retained samples. Outputs are ordered
/// by chain index.
pub fn sample_chains(
    g0: &Graph,
    theta: &[f64],
    model: &Model,
    cfg: &SamplerConfig,
    chains: usize,
) -> Result<Vec<SampleRun>, SamplerError> {
    (0..chains.max(1))
        .into_par_iter()
        .map(|c| {
            run_chain(
                g0,
                theta,
                model,
                cfg,
                rng::substream(cfg.seed, c as u64),
                false,
                |_, _| {},
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::AttributeTable;
    use crate::model::ModelSpec;

    fn edges_model(n: usize) -> Model {
        Model::new(&ModelSpec::edges(), &AttributeTable::new(n)).unwrap()
    }

    #[test]
    fn zero_theta_accepts_everything() {
        let m = edges_model(6);
        let mut chain = Chain::new(&m, &[0.0], Graph::empty(6), rng::from_seed(1)).unwrap();
        for _ in 0..500 {
            assert!(chain.step());
        }
    }

    #[test]
    fn very_negative_edges_keeps_graph_empty() {
        let m = edges_model(6);
        let run = sample_stats(
            &Graph::empty(6),
            &[-50.0],
            &m,
            &SamplerConfig { burn_in: 1000, thin: 10, sample_count: 200, seed: 3 },
        )
        .unwrap();
        assert!(run.stats.iter().all(|s| s[0] == 0.0));
    }

    #[test]
    fn single_proposal() {
        let m = edges_model(4);
        let cfg = SamplerConfig { burn_in: 0, thin: 1, sample_count: 1, seed: 9 };
        let run = sample(&Graph::empty(4), &[0.0], &m, &cfg).unwrap();
        // θ = 0 accepts, so exactly one dyad was toggled on
        assert_eq!(run.graphs.len(), 1);
        assert_eq!(run.graphs[0].edge_count(), 1);
        assert_eq!(run.stats, vec![vec![1.0]]);
    }

    #[test]
    fn seed_determinism() {
        let m = edges_model(7);
        let cfg = SamplerConfig { burn_in: 100, thin: 5, sample_count: 50, seed: 42 };
        let a = sample(&Graph::empty(7), &[-0.3], &m, &cfg).unwrap();
        let b = sample(&Graph::empty(7), &[-0.3], &m, &cfg).unwrap();
        assert_eq!(a, b);
        let c = sample(&Graph::empty(7), &[-0.3], &m, &SamplerConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.stats, c.stats);
    }

    #[test]
    fn config_validation() {
        let m = edges_model(3);
        let bad = SamplerConfig { burn_in: 0, thin: 0, sample_count: 1, seed: 0 };
        assert_eq!(sample(&Graph::empty(3), &[0.0], &m, &bad), Err(SamplerError::ZeroThin));
        assert!(matches!(
            sample(&Graph::empty(3), &[0.0, 1.0], &m, &SamplerConfig::for_nodes(3, 1, 0)),
            Err(SamplerError::DimensionMismatch { .. })
        ));
        let d = SamplerConfig::for_nodes(10, 5, 0);
        assert_eq!((d.burn_in, d.thin), (1000, 100));
    }
}
