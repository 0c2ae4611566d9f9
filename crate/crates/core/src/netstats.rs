//! Whole-network descriptive statistics.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("need at least {needed} nodes, graph has {n}")]
    TooFewNodes { needed: usize, n: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("graph has no edges")]
    NoEdges,
}

/// Edge count over the number of node pairs.
pub fn density(g: &Graph) -> Result<f64, StatsError> {
    let n = g.node_count();
    if n < 2 {
        return Err(StatsError::TooFewNodes { needed: 2, n });
    }
    Ok(g.edge_count() as f64 / g.dyad_count() as f64)
}

/// Mean degree and population standard deviation of the degree sequence.
pub fn average_degree(g: &Graph) -> Result<(f64, f64), StatsError> {
    let n = g.node_count();
    if n == 0 {
        return Err(StatsError::EmptyGraph);
    }
    let mean = 2.0 * g.edge_count() as f64 / n as f64;
    let var = g
        .degree_sequence()
        .iter()
        .map(|&d| (d as f64 - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok((mean, var.sqrt()))
}

/// Global clustering coefficient: three times the triangle count over the
/// number of connected triples, zero when there are no triples.
pub fn transitivity(g: &Graph) -> f64 {
    let mut closed = 0u64;
    let mut triples = 0u64;
    for v in 0..g.node_count() {
        let d = g.degree(v) as u64;
        triples += d * d.saturating_sub(1) / 2;
        let nb: Vec<usize> = g.neighbors(v).collect();
        for (a, &u) in nb.iter().enumerate() {
            for &w in &nb[a + 1..] {
                if g.has_edge(u, w) {
                    closed += 1;
                }
            }
        }
    }
    // every triangle is closed at each of its three corners
    if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    }
}

/// Shortest-path betweenness of every node, normalised by the number of
/// pairs not involving it, (n-1)(n-2)/2.
pub fn betweenness(g: &Graph) -> Result<Vec<f64>, StatsError> {
    let n = g.node_count();
    if n < 3 {
        return Err(StatsError::TooFewNodes { needed: 3, n });
    }
    let per_source: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| source_dependencies(g, s))
        .collect();
    let mut total = vec![0.0; n];
    for deps in &per_source {
        for (t, d) in total.iter_mut().zip(deps) {
            *t += d;
        }
    }
    // each unordered pair is reached once from either endpoint
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    Ok(total.into_iter().map(|b| b * scale).collect())
}

pub fn mean_betweenness(g: &Graph) -> Result<f64, StatsError> {
    let b = betweenness(g)?;
    Ok(b.iter().sum::<f64>() / b.len() as f64)
}

/// Brandes single-source dependency accumulation.
fn source_dependencies(g: &Graph, s: usize) -> Vec<f64> {
    let n = g.node_count();
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for w in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    for &w in order.iter().rev() {
        for v in g.neighbors(w) {
            if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
        }
    }
    delta[s] = 0.0;
    delta
}

/// Pearson correlation of endpoint degrees over edges taken in both
/// orientations. `Ok(None)` when the degree variance over endpoints is zero.
pub fn degree_assortativity(g: &Graph) -> Result<Option<f64>, StatsError> {
    if g.edge_count() == 0 {
        return Err(StatsError::NoEdges);
    }
    let deg = g.degree_sequence();
    let m = 2.0 * g.edge_count() as f64;
    let (mut sx, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
    for (i, j) in g.edges() {
        let (a, b) = (deg[i] as f64, deg[j] as f64);
        sx += a + b;
        sxx += a * a + b * b;
        sxy += 2.0 * a * b;
    }
    // both orientations make the two marginals identical
    let mean = sx / m;
    let var = sxx / m - mean * mean;
    if var <= 1e-12 * mean.max(1.0).powi(2) {
        return Ok(None);
    }
    let r = (sxy / m - mean * mean) / var;
    Ok(Some(r.clamp(-1.0, 1.0)))
}

/// One column of the network descriptive table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub degree_assortativity: Option<f64>,
    pub transitivity: f64,
    pub average_degree: f64,
    pub degree_sd: f64,
    pub mean_betweenness: Option<f64>,
    pub density: Option<f64>,
}

impl NetworkSummary {
    pub fn of(g: &Graph) -> Result<Self, StatsError> {
        let (average_degree, degree_sd) = average_degree(g)?;
        Ok(NetworkSummary {
            node_count: g.node_count(),
            edge_count: g.edge_count(),
            degree_assortativity: match degree_assortativity(g) {
                Ok(r) => r,
                Err(StatsError::NoEdges) => None,
                Err(e) => return Err(e),
            },
            transitivity: transitivity(g),
            average_degree,
            degree_sd,
            mean_betweenness: mean_betweenness(g).ok(),
            density: density(g).ok(),
        })
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "node_count",
        "edge_count",
        "assortativity",
        "transitivity",
        "average_degree",
        "degree_sd",
        "mean_betweenness",
        "density",
    ];

    /// Values in table column order; undefined entries are empty strings.
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        vec![
            self.node_count.to_string(),
            self.edge_count.to_string(),
            opt(self.degree_assortativity),
            format!("{:.6}", self.transitivity),
            format!("{:.6}", self.average_degree),
            format!("{:.6}", self.degree_sd),
            opt(self.mean_betweenness),
            opt(self.density),
        ]
    }

    /// Rendering at the printed precision of the published table.
    pub fn table_cells(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>, d: usize| {
            v.map(|x| format!("{x:.d$}")).unwrap_or_else(|| "-".into())
        };
        vec![
            ("Node Count", self.node_count.to_string()),
            ("Edge Count", self.edge_count.to_string()),
            ("Assortativity", opt(self.degree_assortativity, 4)),
            ("Transitivity", format!("{:.2}", self.transitivity)),
            (
                "Average degree (SD)",
                format!("{:.2} ({:.2})", self.average_degree, self.degree_sd),
            ),
            ("Average betweenness centrality", opt(self.mean_betweenness, 4)),
            ("Density", opt(self.density, 3)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, e: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, e.iter().copied()).unwrap()
    }

    #[test]
    fn density_values() {
        assert_eq!(density(&Graph::complete(4)).unwrap(), 1.0);
        assert!(matches!(density(&Graph::empty(1)), Err(StatsError::TooFewNodes { .. })));
    }

    #[test]
    fn triangle_and_path() {
        let tri = g(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(average_degree(&tri).unwrap(), (2.0, 0.0));
        assert_eq!(transitivity(&tri), 1.0);
        assert_eq!(transitivity(&g(3, &[(0, 1), (1, 2)])), 0.0);
        assert_eq!(transitivity(&Graph::empty(3)), 0.0);
    }

    #[test]
    fn betweenness_small_cases() {
        let path = g(3, &[(0, 1), (1, 2)]);
        assert_eq!(betweenness(&path).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!((mean_betweenness(&path).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_betweenness(&Graph::complete(4)).unwrap(), 0.0);
        let star = g(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let b = betweenness(&star).unwrap();
        assert_eq!(b[0], 1.0);
        assert!((mean_betweenness(&star).unwrap() - 0.2).abs() < 1e-15);
        assert!(mean_betweenness(&g(2, &[(0, 1)])).is_err());
    }

    #[test]
    fn assortativity_regular_and_star() {
        let cycle = g(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(degree_assortativity(&cycle).unwrap(), None);
        let star = g(4, &[(0, 1), (0, 2), (0, 3)]);
        let r = degree_assortativity(&star).unwrap().unwrap();
        assert!((r + 1.0).abs() < 1e-12);
        assert_eq!(degree_assortativity(&Graph::empty(3)), Err(StatsError::NoEdges));
    }

    #[test]
    fn summary_of_edgeless_graph() {
        let s = NetworkSummary::of(&Graph::empty(4)).unwrap();
        assert_eq!(s.degree_assortativity, None);
        assert_eq!(s.density, Some(0.0));
        assert_eq!(s.csv_row().len(), NetworkSummary::CSV_HEADER.len());
    }
}
