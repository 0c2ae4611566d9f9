//! Monte Carlo maximum likelihood by Geyer-Thompson importance sampling.
//!
//! With graphs Y_1..Y_M drawn at θ_t, the log-likelihood ratio
//!
//! ```text
//! ℓ(θ) - ℓ(θ_t) ≈ (θ-θ_t)ᵀ g(y_obs) - log( (1/M) Σ_m exp((θ-θ_t)ᵀ g(Y_m)) )
//! ```
//!
//! is maximised by Newton steps, restricted to the region where the
//! importance weights keep an adequate effective sample size. The outer loop
//! resamples at the new point until the step is no longer restricted and
//! the estimated gradient is below tolerance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{fit_mple_model, Diagnostics, FitError, FitResult, Method};
use crate::attributes::AttributeTable;
use crate::graph::Graph;
use crate::model::{Model, ModelSpec, StatVector};
use crate::rng;
use crate::sampler::{sample_chains, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmleConfig {
    /// Per-chain settings; each outer iteration draws
    /// `chains * sampler.sample_count` graphs.
    pub sampler: SamplerConfig,
    pub chains: usize,
    pub max_iterations: usize,
    /// Gradient tolerance; `None` means 1e-3 times the number of statistics.
    pub gradient_tolerance: Option<f64>,
    /// Smallest importance-weight effective sample size, as a fraction of
    /// the draws, that a step may reach.
    pub min_ess_fraction: f64,
}

impl McmleConfig {
    pub fn new(sampler: SamplerConfig) -> Self {
        McmleConfig {
            sampler,
            chains: 4,
            max_iterations: 20,
            gradient_tolerance: None,
            min_ess_fraction: 0.5,
        }
    }

    /// Defaults for a graph on `n` nodes.
    pub fn for_nodes(n: usize, seed: u64) -> Self {
        McmleConfig::new(SamplerConfig::for_nodes(n, 1024, seed))
    }
}

struct Draws {
    /// g(Y_m) - g(y_obs), row-major
    diffs: Vec<f64>,
    p: usize,
    /// chain boundaries in `diffs`, for batch means
    chain_len: usize,
    chains: usize,
}

impl Draws {
    fn len(&self) -> usize {
        self.diffs.len() / self.p
    }

    fn row(&self, m: usize) -> &[f64] {
        &self.diffs[m * self.p..(m + 1) * self.p]
    }

    /// Normalised importance weights for offset `delta`.
    fn weights(&self, delta: &[f64]) -> Vec<f64> {
        let logw: Vec<f64> = (0..self.len())
            .map(|m| self.row(m).iter().zip(delta).map(|(d, t)| d * t).sum())
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    fn weighted_moments(&self, w: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.p;
        let mut mean = DVector::zeros(p);
        for (m, wm) in w.iter().enumerate() {
            for (a, d) in self.row(m).iter().enumerate() {
                mean[a] += wm * d;
            }
        }
        let mut cov = DMatrix::zeros(p, p);
        for (m, wm) in w.iter().enumerate() {
            let r = self.row(m);
            for a in 0..p {
                let da = r[a] - mean[a];
                for b in a..p {
                    cov[(a, b)] += wm * da * (r[b] - mean[b]);
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                cov[(a, b)] = cov[(b, a)];
            }
        }
        (mean, cov)
    }

    /// Covariance of the sample mean from batch means within chains.
    fn mean_covariance(&self) -> DMatrix<f64> {
        let p = self.p;
        let per_chain = ((self.chain_len as f64).sqrt() as usize).clamp(1, 50);
        let batch = (self.chain_len / per_chain).max(1);
        let mut means: Vec<DVector<f64>> = Vec::new();
        for c in 0..self.chains {
            for b in 0..per_chain {
                let start = c * self.chain_len + b * batch;
                let end = if b + 1 == per_chain { (c + 1) * self.chain_len } else { start + batch };
                let mut mu = DVector::zeros(p);
                for m in start..end {
                    for a in 0..p {
                        mu[a] += self.row(m)[a];
                    }
                }
                means.push(mu / (end - start) as f64);
            }
        }
        let k = means.len();
        let grand = means.iter().fold(DVector::zeros(p), |acc, m| acc + m) / k as f64;
        let mut cov = DMatrix::zeros(p, p);
        for m in &means {
            let d = m - &grand;
            cov += &d * d.transpose();
        }
        if k > 1 {
            cov / ((k - 1) as f64 * k as f64)
        } else {
            cov
        }
    }
}

fn ess(w: &[f64]) -> f64 {
    1.0 / w.iter().map(|x| x * x).sum::<f64>()
}

/// Maximises the importance-sampled log-likelihood ratio over the offset
/// from the sampling parameter. Returns the offset and whether the
/// effective-sample-size bound cut the search short.
fn maximise_ratio(draws: &Draws, min_ess: f64) -> Result<(Vec<f64>, bool), ()> {
    let p = draws.p;
    let mut delta = vec![0.0; p];
    for _ in 0..100 {
        let w = draws.weights(&delta);
        let (mean, cov) = draws.weighted_moments(&w);
        // gradient of the ratio is -E_w[d]; Hessian is -Cov_w[d]
        let step = cov.cholesky().ok_or(())?.solve(&(-&mean));
        if step.amax() < 1e-12 * (1.0 + delta.iter().fold(0.0f64, |a, d| a.max(d.abs()))) {
            return Ok((delta, false));
        }
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = delta.iter().zip(step.iter()).map(|(d, s)| d + t * s).collect();
            if ess(&draws.weights(&cand)) >= min_ess {
                delta = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-3 {
                return Ok((delta, true));
            }
        }
        if t < 1.0 {
            return Ok((delta, true));
        }
    }
    Ok((delta, false))
}

/// MC-MLE for a compiled model. `theta0` defaults to the MPLE.
pub fn fit_mcmle_model(
    model: &Model,
    g: &Graph,
    cfg: &McmleConfig,
    theta0: Option<&[f64]>,
) -> Result<FitResult, FitError> {
    cfg.sampler.validate()?;
    if cfg.chains == 0 || cfg.max_iterations == 0 {
        return Err(FitError::InvalidConfig(
            "chains and max_iterations must be positive".into(),
        ));
    }
    let p = model.dim();
    let observed = model.statistics(g);
    let mut theta: Vec<f64> = match theta0 {
        Some(t) if t.len() == p => t.to_vec(),
        Some(t) => {
            return Err(FitError::InvalidConfig(format!(
                "initial parameter has length {}, model has {p} statistics",
                t.len()
            )))
        }
        None => fit_mple_model(model, g)?.theta,
    };
    let tol = cfg.gradient_tolerance.unwrap_or(1e-3 * p as f64);
    let mut last_norm = f64::INFINITY;
    for iteration in 0..cfg.max_iterations {
        let sampler = SamplerConfig {
            seed: rng::derive_seed(cfg.sampler.seed, iteration as u64),
            ..cfg.sampler
        };
        let runs = sample_chains(g, &theta, model, &sampler, cfg.chains)?;
        let mut diffs = Vec::with_capacity(cfg.chains * sampler.sample_count * p);
        for run in &runs {
            for s in &run.stats {
                diffs.extend(s.iter().zip(&observed).map(|(a, b)| a - b));
            }
        }
        let draws = Draws {
            diffs,
            p,
            chain_len: sampler.sample_count,
            chains: runs.len(),
        };
        let m = draws.len() as f64;
        let uniform = vec![1.0 / m; draws.len()];
        let (mean_diff, cov) = draws.weighted_moments(&uniform);
        check_degeneracy(model, &observed, &mean_diff, &cov)?;

        let (delta, truncated) = maximise_ratio(&draws, cfg.min_ess_fraction * m)
            .map_err(|_| degeneracy(model, &observed, &mean_diff))?;
        let w = draws.weights(&delta);
        let (wmean, wcov) = draws.weighted_moments(&w);
        let grad_norm = wmean.norm();
        last_norm = grad_norm;
        for (t, d) in theta.iter_mut().zip(&delta) {
            *t += d;
        }
        if !truncated && grad_norm <= tol {
            let info_inv = wcov
                .clone()
                .cholesky()
                .ok_or_else(|| degeneracy(model, &observed, &mean_diff))?
                .inverse();
            let mean_cov = draws.mean_covariance();
            let mc_cov = &info_inv * mean_cov.clone() * &info_inv;
            let mc_se = (0..p).map(|k| mc_cov[(k, k)].max(0.0).sqrt()).collect();
            let ess_min = (0..p)
                .filter(|&k| mean_cov[(k, k)] > 0.0)
                .map(|k| cov[(k, k)] / mean_cov[(k, k)])
                .fold(f64::INFINITY, f64::min);
            return Ok(FitResult::new(
                model.names().to_vec(),
                theta,
                &info_inv,
                Method::Mcmle,
                Diagnostics {
                    iterations: iteration + 1,
                    gradient_norm: grad_norm,
                    converged: true,
                    effective_sample_size: Some(if ess_min.is_finite() { ess_min } else { m }),
                    mc_standard_errors: Some(mc_se),
                    log_likelihood: None,
                },
            ));
        }
    }
    Err(FitError::NonConvergence {
        iterations: cfg.max_iterations,
        gradient_norm: last_norm,
    })
}

fn degeneracy(model: &Model, observed: &[f64], mean_diff: &DVector<f64>) -> FitError {
    FitError::Degeneracy {
        names: model.names().to_vec(),
        observed: observed.to_vec(),
        sampled: observed.iter().zip(mean_diff.iter()).map(|(o, d)| o + d).collect(),
    }
}

/// A statistic that never moves in the sample while differing from the
/// observed value means the chain is stuck far from the data.
fn check_degeneracy(
    model: &Model,
    observed: &StatVector,
    mean_diff: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Result<(), FitError> {
    for k in 0..observed.len() {
        let scale = 1.0 + observed[k].abs();
        if cov[(k, k)] <= 1e-12 * scale * scale {
            return Err(degeneracy(model, observed, mean_diff));
        }
    }
    Ok(())
}

pub fn fit_mcmle(
    g: &Graph,
    attrs: &AttributeTable,
    model: &ModelSpec,
    cfg: &McmleConfig,
    theta0: Option<&[f64]>,
) -> Result<FitResult, FitError> {
    let m = Model::new(model, attrs)?;
    m.check_graph(g)?;
    fit_mcmle_model(&m, g, cfg, theta0)
}

/// Importance-sampled log-likelihood ratio ℓ(θ) - ℓ(θ_ref) from statistics
/// sampled at θ_ref.
pub fn log_likelihood_ratio(
    theta: &[f64],
    theta_ref: &[f64],
    observed: &[f64],
    sampled: &[StatVector],
) -> f64 {
    let delta: Vec<f64> = theta.iter().zip(theta_ref).map(|(a, b)| a - b).collect();
    let lin = |s: &[f64]| s.iter().zip(&delta).map(|(x, d)| x * d).sum::<f64>();
    let logs: Vec<f64> = sampled.iter().map(|s| lin(s)).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return lin(observed);
    }
    let lse = max + (logs.iter().map(|l| (l - max).exp()).sum::<f64>() / logs.len() as f64).ln();
    lin(observed) - lse
}
