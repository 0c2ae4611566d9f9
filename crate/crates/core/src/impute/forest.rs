//! Bagged CART forests for classification (Gini) and regression (variance
//! reduction).

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("invalid forest configuration: {0}")]
    ConfigInvalid(String),
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("feature rows have inconsistent lengths")]
    RaggedFeatures,
    #[error("{labels} labels for {rows} feature rows")]
    LabelCount { labels: usize, rows: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    /// Features tried per split; `None` means ⌈√features⌉.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    /// Train each tree on a bootstrap resample (otherwise on all rows).
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            mtry: None,
            min_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Class { values: Vec<u32>, classes: usize },
    Real(Vec<f64>),
}

impl Labels {
    fn len(&self) -> usize {
        match self {
            Labels::Class { values, .. } => values.len(),
            Labels::Real(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Class(u32),
    Real(f64),
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Prediction),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> Prediction {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf(p) => return *p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
    classes: Option<usize>,
    /// Misclassification rate (classification) or mean squared error
    /// (regression) over rows with at least one out-of-bag tree.
    pub oob_error: Option<f64>,
}

impl Forest {
    pub fn predict(&self, row: &[f64]) -> Prediction {
        match self.classes {
            Some(c) => {
                let mut votes = vec![0usize; c];
                for t in &self.trees {
                    if let Prediction::Class(k) = t.predict(row) {
                        votes[k as usize] += 1;
                    }
                }
                Prediction::Class(argmax(&votes))
            }
            None => {
                let total: f64 = self
                    .trees
                    .iter()
                    .map(|t| match t.predict(row) {
                        Prediction::Real(v) => v,
                        Prediction::Class(k) => k as f64,
                    })
                    .sum();
                Prediction::Real(total / self.trees.len() as f64)
            }
        }
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }
}

/// First index of the maximum count.
fn argmax(counts: &[usize]) -> u32 {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best as u32
}

struct Builder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a Labels,
    mtry: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf_value(&self, rows: &[usize]) -> Prediction {
        match self.labels {
            Labels::Class { values, classes } => {
                let mut counts = vec![0usize; *classes];
                for &r in rows {
                    counts[values[r] as usize] += 1;
                }
                Prediction::Class(argmax(&counts))
            }
            Labels::Real(v) => {
                Prediction::Real(rows.iter().map(|&r| v[r]).sum::<f64>() / rows.len() as f64)
            }
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.labels {
            Labels::Class { values, .. } => rows.iter().all(|&r| values[r] == values[rows[0]]),
            Labels::Real(v) => rows.iter().all(|&r| v[r] == v[rows[0]]),
        }
    }

    /// Impurity of a node times its size: Gini·n or the sum of squared
    /// deviations.
    fn impurity(&self, rows: &[usize]) -> f64 {
        match self.labels {
            Labels::Class { values, classes } => {
                let mut counts = vec![0.0; *classes];
                for &r in rows {
                    counts[values[r] as usize] += 1.0;
                }
                gini_weighted(&counts, rows.len() as f64)
            }
            Labels::Real(v) => {
                let n = rows.len() as f64;
                let s: f64 = rows.iter().map(|&r| v[r]).sum();
                let ss: f64 = rows.iter().map(|&r| v[r] * v[r]).sum();
                ss - s * s / n
            }
        }
    }

    /// Best threshold on one feature: (weighted child impurity, threshold).
    fn best_split(&self, rows: &mut [usize], feature: usize) -> Option<(f64, f64)> {
        let x = |r: usize| self.features[r][feature];
        rows.sort_by(|&a, &b| x(a).total_cmp(&x(b)).then(a.cmp(&b)));
        let n = rows.len();
        let mut best: Option<(f64, f64)> = None;
        match self.labels {
            Labels::Class { values, classes } => {
                let mut left = vec![0.0; *classes];
                let mut right = vec![0.0; *classes];
                for &r in rows.iter() {
                    right[values[r] as usize] += 1.0;
                }
                for k in 0..n - 1 {
                    let c = values[rows[k]] as usize;
                    left[c] += 1.0;
                    right[c] -= 1.0;
                    let nl = k + 1;
                    if nl < self.min_leaf || n - nl < self.min_leaf || x(rows[k]) == x(rows[k + 1]) {
                        continue;
                    }
                    let score =
                        gini_weighted(&left, nl as f64) + gini_weighted(&right, (n - nl) as f64);
                    if best.is_none_or(|(s, _)| score < s) {
                        best = Some((score, 0.5 * (x(rows[k]) + x(rows[k + 1]))));
                    }
                }
            }
            Labels::Real(v) => {
                let total: f64 = rows.iter().map(|&r| v[r]).sum();
                let total_sq: f64 = rows.iter().map(|&r| v[r] * v[r]).sum();
                let (mut s, mut ss) = (0.0, 0.0);
                for k in 0..n - 1 {
                    let y = v[rows[k]];
                    s += y;
                    ss += y * y;
                    let nl = (k + 1) as f64;
                    let nr = (n - k - 1) as f64;
                    if k + 1 < self.min_leaf || n - k - 1 < self.min_leaf || x(rows[k]) == x(rows[k + 1]) {
                        continue;
                    }
                    let score = (ss - s * s / nl) + ((total_sq - ss) - (total - s).powi(2) / nr);
                    if best.is_none_or(|(b, _)| score < b) {
                        best = Some((score, 0.5 * (x(rows[k]) + x(rows[k + 1]))));
                    }
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &mut [usize], rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(self.leaf_value(rows)));
        if rows.len() < 2 * self.min_leaf || self.is_pure(rows) {
            return id;
        }
        let parent = self.impurity(rows);
        let n_features = self.features[0].len();
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in sample_indices(rng, n_features, self.mtry).into_iter() {
            if let Some((score, threshold)) = self.best_split(rows, feature) {
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, feature, threshold));
                }
            }
        }
        let Some((score, feature, threshold)) = best else {
            return id;
        };
        if score >= parent - 1e-12 * parent.abs().max(1.0) {
            return id;
        }
        let x = |r: &usize| self.features[*r][feature];
        rows.sort_by(|a, b| x(a).total_cmp(&x(b)).then(a.cmp(b)));
        let split = rows.partition_point(|r| x(r) <= threshold);
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

fn gini_weighted(counts: &[f64], n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    n - counts.iter().map(|c| c * c).sum::<f64>() / n
}

/// Trains `cfg.trees` trees; tree `t` uses sub-stream `t` of `seed`.
pub fn fit_random_forest(
    features: &[Vec<f64>],
    labels: &Labels,
    cfg: &ForestConfig,
    seed: u64,
) -> Result<Forest, ForestError> {
    let n = features.len();
    if labels.len() != n {
        return Err(ForestError::LabelCount {
            labels: labels.len(),
            rows: n,
        });
    }
    if cfg.trees < 1 {
        return Err(ForestError::ConfigInvalid("trees must be at least 1".into()));
    }
    if cfg.min_leaf < 1 {
        return Err(ForestError::ConfigInvalid("min_leaf must be at least 1".into()));
    }
    if n < 2 {
        return Err(ForestError::TooFewRows(n));
    }
    let p = features[0].len();
    if features.iter().any(|r| r.len() != p) {
        return Err(ForestError::RaggedFeatures);
    }
    let mtry = cfg.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize);
    if p > 0 && (mtry < 1 || mtry > p) {
        return Err(ForestError::ConfigInvalid(format!("mtry must be in 1..={p}, got {mtry}")));
    }
    if let Labels::Class { values, classes } = labels {
        if values.iter().any(|&v| v as usize >= *classes) {
            return Err(ForestError::ConfigInvalid("class label out of range".into()));
        }
    }
    let built: Vec<(Tree, Vec<bool>)> = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::substream(seed, t as u64);
            let mut in_bag = vec![false; n];
            let mut rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            for &r in &rows {
                in_bag[r] = true;
            }
            let mut b = Builder {
                features,
                labels,
                mtry: mtry.min(p),
                min_leaf: cfg.min_leaf,
                nodes: Vec::new(),
            };
            if p == 0 {
                b.nodes.push(Node::Leaf(b.leaf_value(&rows)));
            } else {
                b.grow(&mut rows, &mut rng);
            }
            (Tree { nodes: b.nodes }, in_bag)
        })
        .collect();
    let classes = match labels {
        Labels::Class { classes, .. } => Some(*classes),
        Labels::Real(_) => None,
    };
    let oob_error = oob_error(&built, features, labels, classes);
    Ok(Forest {
        trees: built.into_iter().map(|(t, _)| t).collect(),
        classes,
        oob_error,
    })
}

fn oob_error(
    built: &[(Tree, Vec<bool>)],
    features: &[Vec<f64>],
    labels: &Labels,
    classes: Option<usize>,
) -> Option<f64> {
    let (mut err, mut used) = (0.0, 0usize);
    for (r, row) in features.iter().enumerate() {
        let preds: Vec<Prediction> = built
            .iter()
            .filter(|(_, bag)| !bag[r])
            .map(|(t, _)| t.predict(row))
            .collect();
        if preds.is_empty() {
            continue;
        }
        used += 1;
        match (labels, classes) {
            (Labels::Class { values, .. }, Some(c)) => {
                let mut votes = vec![0usize; c];
                for p in &preds {
                    if let Prediction::Class(k) = p {
                        votes[*k as usize] += 1;
                    }
                }
                err += (argmax(&votes) != values[r]) as u8 as f64;
            }
            (Labels::Real(v), _) => {
                let mean = preds
                    .iter()
                    .map(|p| match p {
                        Prediction::Real(x) => *x,
                        Prediction::Class(k) => *k as f64,
                    })
                    .sum::<f64>()
                    / preds.len() as f64;
                err += (mean - v[r]).powi(2);
            }
            _ => unreachable!(),
        }
    }
    (used > 0).then(|| err / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_labels_give_constant_predictor() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y = Labels::Class { values: vec![1; 20], classes: 3 };
        let f = fit_random_forest(&x, &y, &ForestConfig { trees: 25, ..Default::default() }, 1).unwrap();
        assert_eq!(f.oob_error, Some(0.0));
        for row in &x {
            assert_eq!(f.predict(row), Prediction::Class(1));
        }
    }

    #[test]
    fn one_binary_feature_separates_classes() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 2) as f64, (i * 7 % 5) as f64]).collect();
        let y = Labels::Class { values: (0..30).map(|i| (i % 2) as u32).collect(), classes: 2 };
        let cfg = ForestConfig { trees: 50, mtry: Some(2), ..Default::default() };
        let f = fit_random_forest(&x, &y, &cfg, 4).unwrap();
        for (i, row) in x.iter().enumerate() {
            assert_eq!(f.predict(row), Prediction::Class((i % 2) as u32));
        }
    }

    #[test]
    fn regression_on_identity() {
        let x: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let mean = y.iter().sum::<f64>() / 200.0;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 200.0;
        let f = fit_random_forest(&x, &Labels::Real(y.clone()), &ForestConfig::default(), 5).unwrap();
        let mse = x
            .iter()
            .zip(&y)
            .map(|(r, t)| match f.predict(r) {
                Prediction::Real(p) => (p - t).powi(2),
                _ => unreachable!(),
            })
            .sum::<f64>()
            / 200.0;
        assert!(mse <= var / 10.0, "mse {mse} var {var}");
    }

    #[test]
    fn config_errors() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = Labels::Real(vec![0.0, 1.0]);
        assert!(matches!(
            fit_random_forest(&x, &y, &ForestConfig { trees: 0, ..Default::default() }, 0),
            Err(ForestError::ConfigInvalid(_))
        ));
        assert!(matches!(
            fit_random_forest(&x[..1], &Labels::Real(vec![0.0]), &ForestConfig::default(), 0),
            Err(ForestError::TooFewRows(1))
        ));
    }

    #[test]
    fn seed_determinism() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect();
        let y = Labels::Real((0..50).map(|i| (i % 7) as f64 * 0.5).collect());
        let a = fit_random_forest(&x, &y, &ForestConfig::default(), 11).unwrap();
        let b = fit_random_forest(&x, &y, &ForestConfig::default(), 11).unwrap();
        assert_eq!(a.oob_error, b.oob_error);
        assert_eq!(a.predict(&[3.0, 1.0]), b.predict(&[3.0, 1.0]));
    }
}
