//! Grouped-binomial logistic regression by iteratively reweighted least
//! squares (Newton-Raphson on the log-likelihood).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogisticError {
    /// Column `column` is a linear combination of `with`.
    #[error("column {column} is collinear with columns {with:?}")]
    RankDeficient { column: usize, with: Vec<usize> },
    /// The outcome is perfectly predicted along `column`; the estimate of its
    /// coefficient diverges towards `+inf` when `positive`.
    #[error("column {column} perfectly predicts the outcome")]
    Separation { column: usize, positive: bool },
    #[error("logistic regression needs at least one observation")]
    NoData,
}

/// Rows of covariates with `successes` out of `trials` per row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogisticData {
    pub p: usize,
    /// row-major, `p` columns
    pub x: Vec<f64>,
    pub successes: Vec<f64>,
    pub trials: Vec<f64>,
}

impl LogisticData {
    pub fn new(p: usize) -> Self {
        LogisticData {
            p,
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: &[f64], successes: f64, trials: f64) {
        debug_assert_eq!(row.len(), self.p);
        self.x.extend_from_slice(row);
        self.successes.push(successes);
        self.trials.push(trials);
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.x[r * self.p..(r + 1) * self.p]
    }

    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        (0..self.len())
            .map(|r| {
                let eta = dot(self.row(r), beta);
                self.successes[r] * eta - self.trials[r] * log1pexp(eta)
            })
            .sum()
    }

    /// Score vector and observed information at `beta`.
    pub fn score_and_information(&self, beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.p;
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for r in 0..self.len() {
            let x = self.row(r);
            let mu = logistic(dot(x, beta));
            let resid = self.successes[r] - self.trials[r] * mu;
            let w = self.trials[r] * mu * (1.0 - mu);
            for a in 0..p {
                score[a] += x[a] * resid;
                if x[a] != 0.0 {
                    for b in a..p {
                        info[(a, b)] += w * x[a] * x[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        (score, info)
    }

    /// Finds the first column that is a linear combination of earlier ones,
    /// using the trial-weighted Gram matrix.
    pub fn collinearity(&self) -> Option<(usize, Vec<usize>)> {
        let p = self.p;
        let mut gram = DMatrix::<f64>::zeros(p, p);
        for r in 0..self.len() {
            let x = self.row(r);
            for a in 0..p {
                for b in 0..p {
                    gram[(a, b)] += self.trials[r] * x[a] * x[b];
                }
            }
        }
        let mut kept: Vec<usize> = Vec::new();
        for k in 0..p {
            let gkk = gram[(k, k)];
            if gkk <= 0.0 {
                return Some((k, Vec::new()));
            }
            if kept.is_empty() {
                kept.push(k);
                continue;
            }
            let sub = DMatrix::from_fn(kept.len(), kept.len(), |a, b| gram[(kept[a], kept[b])]);
            let rhs = DVector::from_fn(kept.len(), |a, _| gram[(kept[a], k)]);
            let coef = match sub.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => return Some((k, kept)),
            };
            let resid = gkk - rhs.dot(&coef);
            if resid <= 1e-9 * gkk {
                let scale = coef.amax().max(1e-300);
                let with = kept
                    .iter()
                    .zip(coef.iter())
                    .filter(|(_, c)| c.abs() > 1e-8 * scale)
                    .map(|(&c, _)| c)
                    .collect();
                return Some((k, with));
            }
            kept.push(k);
        }
        None
    }

    /// A sign-constant column whose nonzero rows are all successes or all
    /// failures drives its coefficient to infinity.
    pub fn separation(&self) -> Option<(usize, bool)> {
        for k in 0..self.p {
            let col = (0..self.len()).map(|r| self.row(r)[k]);
            let nonneg = col.clone().all(|v| v >= 0.0);
            let nonpos = col.clone().all(|v| v <= 0.0);
            if !(nonneg || nonpos) {
                continue;
            }
            let (mut succ, mut fail, mut any) = (0.0, 0.0, false);
            for r in 0..self.len() {
                if self.row(r)[k] != 0.0 && self.trials[r] > 0.0 {
                    any = true;
                    succ += self.successes[r];
                    fail += self.trials[r] - self.successes[r];
                }
            }
            if !any {
                continue;
            }
            if succ == 0.0 {
                return Some((k, !nonneg));
            }
            if fail == 0.0 {
                return Some((k, nonneg));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coef: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub max_abs_score: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub max_iterations: usize,
    pub score_tolerance: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_iterations: 50,
            score_tolerance: 1e-8,
        }
    }
}

/// Maximum-likelihood fit starting from zero.
pub fn fit(data: &LogisticData, opts: IrlsOptions) -> Result<LogisticFit, LogisticError> {
    if data.is_empty() || data.trials.iter().sum::<f64>() <= 0.0 {
        return Err(LogisticError::NoData);
    }
    if let Some((column, with)) = data.collinearity() {
        return Err(LogisticError::RankDeficient { column, with });
    }
    if let Some((column, positive)) = data.separation() {
        return Err(LogisticError::Separation { column, positive });
    }
    let p = data.p;
    let mut beta = vec![0.0; p];
    let mut ll = data.log_likelihood(&beta);
    let mut iterations = 0;
    let (mut score, mut info) = data.score_and_information(&beta);
    let mut max_abs_score = score.amax();
    while max_abs_score > opts.score_tolerance && iterations < opts.max_iterations {
        let step = match info.clone().cholesky() {
            Some(ch) => ch.solve(&score),
            None => return Err(diverging(&beta)),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let cand_ll = data.log_likelihood(&cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        (score, info) = data.score_and_information(&beta);
        max_abs_score = score.amax();
        if !accepted {
            break;
        }
    }
    if beta.iter().any(|b| b.abs() > 30.0) {
        return Err(diverging(&beta));
    }
    let covariance = info
        .clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| diverging(&beta))?;
    Ok(LogisticFit {
        coef: beta,
        covariance,
        log_likelihood: ll,
        iterations,
        max_abs_score,
        converged: max_abs_score <= opts.score_tolerance,
    })
}

fn diverging(beta: &[f64]) -> LogisticError {
    let (column, b) = beta
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (k, &b)| if b.abs() > acc.1.abs() { (k, b) } else { acc });
    LogisticError::Separation {
        column,
        positive: b > 0.0,
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow.
#[inline]
pub fn log1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_is_logit_of_rate() {
        let mut d = LogisticData::new(1);
        d.push(&[1.0], 3.0, 10.0);
        let f = fit(&d, IrlsOptions::default()).unwrap();
        assert!((f.coef[0] - (0.3f64 / 0.7).ln()).abs() < 1e-12);
        // Var = 1 / (n p (1-p))
        assert!((f.covariance[(0, 0)] - 1.0 / (10.0 * 0.21)).abs() < 1e-10);
        assert!(f.converged);
    }

    #[test]
    fn detects_collinear_columns() {
        let mut d = LogisticData::new(3);
        d.push(&[1.0, 1.0, 0.0], 1.0, 2.0);
        d.push(&[1.0, 0.0, 1.0], 1.0, 2.0);
        d.push(&[1.0, 1.0, 0.0], 0.0, 1.0);
        assert_eq!(
            fit(&d, IrlsOptions::default()),
            Err(LogisticError::RankDeficient { column: 2, with: vec![0, 1] })
        );
    }

    #[test]
    fn detects_separation() {
        let mut d = LogisticData::new(2);
        d.push(&[1.0, 0.0], 2.0, 5.0);
        d.push(&[1.0, 1.0], 0.0, 5.0);
        assert_eq!(
            fit(&d, IrlsOptions::default()),
            Err(LogisticError::Separation { column: 1, positive: false })
        );
    }

    #[test]
    fn stable_helpers() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0);
        assert!((log1pexp(800.0) - 800.0).abs() < 1e-12);
        assert!((log1pexp(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
