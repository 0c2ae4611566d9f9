//! Model terms, sufficient statistics and change statistics.
//!
//! A [`ModelSpec`] names terms against attribute columns; compiling it with
//! an [`AttributeTable`] yields a [`Model`] whose statistic vector has one
//! entry per estimated coefficient. All terms are sums over present edges
//! except `gwdegree`, which depends on the degree distribution.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeError, AttributeTable};
use crate::graph::Graph;

pub type StatVector = Vec<f64>;

/// Default geometric decay for `gwdegree`.
pub const DEFAULT_GWDEGREE_DECAY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Attribute(#[from] AttributeError),
    #[error("column `{column}` is missing a value for node {row}")]
    MissingAttribute { column: String, row: usize },
    #[error("column `{column}` has no level `{level}`")]
    UnknownLevel { column: String, level: String },
    #[error("model lists `edges` more than once")]
    DuplicateEdges,
    #[error("statistic `{0}` appears twice in the model")]
    DuplicateStatistic(String),
    #[error("gwdegree decay must be finite and positive, got {0}")]
    InvalidDecay(f64),
    #[error("term `{0}` has no free statistics")]
    EmptyTerm(String),
    #[error("model expects {expected} nodes, graph has {got}")]
    NodeCountMismatch { expected: usize, got: usize },
    #[error("dyad ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("need at least 2 nodes for a dyad design matrix")]
    TooFewNodes,
}

fn default_true() -> bool {
    true
}

fn default_decay() -> f64 {
    DEFAULT_GWDEGREE_DECAY
}

/// One model term. Serialised with a `term` tag, e.g.
/// `{"term": "nodemix", "attr": "living", "reference": ["Homeless", "Homeless"]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "lowercase")]
pub enum TermSpec {
    Edges,
    NodeMatch {
        attr: String,
        #[serde(default = "default_true")]
        differential: bool,
    },
    NodeFactor {
        attr: String,
        reference: String,
    },
    NodeMix {
        attr: String,
        reference: (String, String),
    },
    GwDegree {
        #[serde(default = "default_decay")]
        decay: f64,
    },
}

impl TermSpec {
    pub fn node_match(attr: &str) -> Self {
        TermSpec::NodeMatch {
            attr: attr.into(),
            differential: true,
        }
    }

    pub fn node_factor(attr: &str, reference: &str) -> Self {
        TermSpec::NodeFactor {
            attr: attr.into(),
            reference: reference.into(),
        }
    }

    pub fn node_mix(attr: &str, a: &str, b: &str) -> Self {
        TermSpec::NodeMix {
            attr: attr.into(),
            reference: (a.into(), b.into()),
        }
    }

    pub fn attribute(&self) -> Option<&str> {
        match self {
            TermSpec::NodeMatch { attr, .. }
            | TermSpec::NodeFactor { attr, .. }
            | TermSpec::NodeMix { attr, .. } => Some(attr),
            TermSpec::Edges | TermSpec::GwDegree { .. } => None,
        }
    }

    /// Whether the term's change statistic ignores the rest of the graph.
    pub fn is_dyad_independent(&self) -> bool {
        !matches!(self, TermSpec::GwDegree { .. })
    }

    pub fn label(&self) -> String {
        match self {
            TermSpec::Edges => "edges".into(),
            TermSpec::NodeMatch { attr, .. } => format!("nodematch.{attr}"),
            TermSpec::NodeFactor { attr, .. } => format!("nodefactor.{attr}"),
            TermSpec::NodeMix { attr, .. } => format!("mix.{attr}"),
            TermSpec::GwDegree { decay } => format!("gwdeg.fixed.{decay}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelSpec {
    pub terms: Vec<TermSpec>,
}

impl ModelSpec {
    pub fn new(terms: Vec<TermSpec>) -> Self {
        ModelSpec { terms }
    }

    pub fn edges() -> Self {
        ModelSpec::new(vec![TermSpec::Edges])
    }

    pub fn with(mut self, term: TermSpec) -> Self {
        self.terms.push(term);
        self
    }

    pub fn is_dyad_independent(&self) -> bool {
        self.terms.iter().all(TermSpec::is_dyad_independent)
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Edges,
    Match {
        values: Vec<u32>,
        differential: bool,
    },
    Factor {
        values: Vec<u32>,
        /// statistic slot per level; `None` for the reference level
        slot: Vec<Option<usize>>,
    },
    Mix {
        values: Vec<u32>,
        levels: usize,
        /// symmetric levels x levels table of statistic slots
        slot: Vec<Option<usize>>,
    },
    GwDegree {
        /// e^decay
        scale: f64,
        /// 1 - e^-decay
        ratio: f64,
    },
}

#[derive(Debug, Clone)]
struct CompiledTerm {
    offset: usize,
    len: usize,
    kind: Compiled,
}

/// A model specification bound to a concrete attribute table.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    terms: Vec<CompiledTerm>,
    names: Vec<String>,
    node_count: Option<usize>,
}

fn complete_levels(
    attrs: &AttributeTable,
    column: &str,
) -> Result<(Vec<String>, Vec<u32>), ModelError> {
    let (levels, values) = attrs.categorical(column)?;
    let values = values
        .iter()
        .enumerate()
        .map(|(row, v)| {
            v.ok_or_else(|| ModelError::MissingAttribute {
                column: column.to_string(),
                row,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((levels.to_vec(), values))
}

fn level_index(levels: &[String], column: &str, level: &str) -> Result<usize, ModelError> {
    levels
        .iter()
        .position(|l| l == level)
        .ok_or_else(|| ModelError::UnknownLevel {
            column: column.to_string(),
            level: level.to_string(),
        })
}

impl Model {
    pub fn new(spec: &ModelSpec, attrs: &AttributeTable) -> Result<Self, ModelError> {
        let mut terms = Vec::with_capacity(spec.terms.len());
        let mut names: Vec<String> = Vec::new();
        let mut node_count = None;
        let mut seen_edges = false;
        for term in &spec.terms {
            let offset = names.len();
            let kind = match term {
                TermSpec::Edges => {
                    if seen_edges {
                        return Err(ModelError::DuplicateEdges);
                    }
                    seen_edges = true;
                    names.push("edges".into());
                    Compiled::Edges
                }
                TermSpec::NodeMatch { attr, differential } => {
                    let (levels, values) = complete_levels(attrs, attr)?;
                    node_count = Some(values.len());
                    if *differential {
                        names.extend(levels.iter().map(|l| format!("nodematch.{attr}.{l}")));
                    } else {
                        names.push(format!("nodematch.{attr}"));
                    }
                    Compiled::Match {
                        values,
                        differential: *differential,
                    }
                }
                TermSpec::NodeFactor { attr, reference } => {
                    let (levels, values) = complete_levels(attrs, attr)?;
                    node_count = Some(values.len());
                    let reference = level_index(&levels, attr, reference)?;
                    let mut slot = vec![None; levels.len()];
                    for (k, level) in levels.iter().enumerate() {
                        if k != reference {
                            slot[k] = Some(names.len() - offset);
                            names.push(format!("nodefactor.{attr}.{level}"));
                        }
                    }
                    Compiled::Factor { values, slot }
                }
                TermSpec::NodeMix { attr, reference } => {
                    let (levels, values) = complete_levels(attrs, attr)?;
                    node_count = Some(values.len());
                    let a = level_index(&levels, attr, &reference.0)?;
                    let b = level_index(&levels, attr, &reference.1)?;
                    let reference = (a.min(b), a.max(b));
                    let l = levels.len();
                    let mut slot = vec![None; l * l];
                    for a in 0..l {
                        for b in a..l {
                            if (a, b) != reference {
                                let s = Some(names.len() - offset);
                                slot[a * l + b] = s;
                                slot[b * l + a] = s;
                                names.push(format!("mix.{attr}.{}.{}", levels[a], levels[b]));
                            }
                        }
                    }
                    Compiled::Mix {
                        values,
                        levels: l,
                        slot,
                    }
                }
                TermSpec::GwDegree { decay } => {
                    if !(decay.is_finite() && *decay > 0.0) {
                        return Err(ModelError::InvalidDecay(*decay));
                    }
                    names.push(format!("gwdeg.fixed.{decay}"));
                    Compiled::GwDegree {
                        scale: decay.exp(),
                        ratio: 1.0 - (-decay).exp(),
                    }
                }
            };
            let len = names.len() - offset;
            if len == 0 {
                return Err(ModelError::EmptyTerm(term.label()));
            }
            terms.push(CompiledTerm { offset, len, kind });
        }
        for (k, name) in names.iter().enumerate() {
            if names[..k].contains(name) {
                return Err(ModelError::DuplicateStatistic(name.clone()));
            }
        }
        Ok(Model {
            spec: spec.clone(),
            terms,
            names,
            node_count,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Number of statistics (coefficients).
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Statistic indices belonging to the `k`-th term of the spec.
    pub fn term_range(&self, k: usize) -> Range<usize> {
        let t = &self.terms[k];
        t.offset..t.offset + t.len
    }

    pub fn is_dyad_independent(&self) -> bool {
        self.spec.is_dyad_independent()
    }

    pub fn check_graph(&self, g: &Graph) -> Result<(), ModelError> {
        match self.node_count {
            Some(expected) if expected != g.node_count() => Err(ModelError::NodeCountMismatch {
                expected,
                got: g.node_count(),
            }),
            _ => Ok(()),
        }
    }

    /// Full statistic vector g(y, x).
    pub fn statistics(&self, g: &Graph) -> StatVector {
        let mut out = vec![0.0; self.dim()];
        for (i, j) in g.edges() {
            for t in &self.terms {
                add_edge_term(t, i, j, 1.0, &mut out);
            }
        }
        for t in &self.terms {
            if let Compiled::GwDegree { scale, ratio } = t.kind {
                out[t.offset] = (0..g.node_count())
                    .map(|v| gw_weight(scale, ratio, g.degree(v)))
                    .sum();
            }
        }
        out
    }

    /// Adds `sign` times the change statistic of dyad `{i, j}` to `out`.
    ///
    /// The change statistic is g(y with the edge) - g(y without it) and does
    /// not depend on whether the edge is currently present.
    pub fn add_change_stats(&self, g: &Graph, i: usize, j: usize, sign: f64, out: &mut [f64]) {
        debug_assert_ne!(i, j);
        let present = g.has_edge(i, j) as usize;
        for t in &self.terms {
            match t.kind {
                Compiled::GwDegree { ratio, .. } => {
                    let di = (g.degree(i) - present) as i32;
                    let dj = (g.degree(j) - present) as i32;
                    out[t.offset] += sign * (ratio.powi(di) + ratio.powi(dj));
                }
                _ => add_edge_term(t, i, j, sign, out),
            }
        }
    }

    pub fn change_stats(&self, g: &Graph, i: usize, j: usize) -> StatVector {
        let mut out = vec![0.0; self.dim()];
        self.add_change_stats(g, i, j, 1.0, &mut out);
        out
    }

    /// Change statistics of every dyad, lexicographic `(i, j)` with `i < j`,
    /// together with the observed tie indicators.
    pub fn design_matrix(&self, g: &Graph) -> Result<DesignMatrix, ModelError> {
        self.check_graph(g)?;
        let n = g.node_count();
        if n < 2 {
            return Err(ModelError::TooFewNodes);
        }
        let p = self.dim();
        let blocks: Vec<(Vec<f64>, Vec<bool>)> = (0..n - 1)
            .into_par_iter()
            .map(|i| {
                let mut rows = vec![0.0; (n - 1 - i) * p];
                let mut labels = Vec::with_capacity(n - 1 - i);
                for (k, j) in (i + 1..n).enumerate() {
                    self.add_change_stats(g, i, j, 1.0, &mut rows[k * p..(k + 1) * p]);
                    labels.push(g.has_edge(i, j));
                }
                (rows, labels)
            })
            .collect();
        let mut rows = Vec::with_capacity(g.dyad_count() * p);
        let mut labels = Vec::with_capacity(g.dyad_count());
        for (r, l) in blocks {
            rows.extend(r);
            labels.extend(l);
        }
        Ok(DesignMatrix {
            names: self.names.clone(),
            n,
            rows,
            labels,
        })
    }
}

#[inline]
fn gw_weight(scale: f64, ratio: f64, degree: usize) -> f64 {
    scale * (1.0 - ratio.powi(degree as i32))
}

#[inline]
fn add_edge_term(t: &CompiledTerm, i: usize, j: usize, sign: f64, out: &mut [f64]) {
    match &t.kind {
        Compiled::Edges => out[t.offset] += sign,
        Compiled::Match {
            values,
            differential,
        } => {
            let (a, b) = (values[i], values[j]);
            if a == b {
                let k = if *differential { a as usize } else { 0 };
                out[t.offset + k] += sign;
            }
        }
        Compiled::Factor { values, slot } => {
            for v in [values[i], values[j]] {
                if let Some(k) = slot[v as usize] {
                    out[t.offset + k] += sign;
                }
            }
        }
        Compiled::Mix {
            values,
            levels,
            slot,
        } => {
            let (a, b) = (values[i] as usize, values[j] as usize);
            if let Some(k) = slot[a * levels + b] {
                out[t.offset + k] += sign;
            }
        }
        Compiled::GwDegree { .. } => {}
    }
}

/// Dyad-level regression data: one row of change statistics per unordered
/// node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub n: usize,
    /// row-major, `names.len()` columns
    pub rows: Vec<f64>,
    pub labels: Vec<bool>,
}

impl DesignMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let p = self.dim();
        &self.rows[r * p..(r + 1) * p]
    }

    /// Dyad `(i, j)` of row `r`.
    pub fn dyad(&self, r: usize) -> (usize, usize) {
        dyad_at(self.n, r)
    }
}

/// Inverse of the lexicographic dyad enumeration.
pub fn dyad_at(n: usize, mut r: usize) -> (usize, usize) {
    let mut i = 0;
    while r >= n - 1 - i {
        r -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + r)
}

/// Compiles `model` and evaluates g(y, x).
pub fn statistics(
    g: &Graph,
    attrs: &AttributeTable,
    model: &ModelSpec,
) -> Result<StatVector, ModelError> {
    let m = Model::new(model, attrs)?;
    m.check_graph(g)?;
    Ok(m.statistics(g))
}

pub fn change_statistics(
    g: &Graph,
    attrs: &AttributeTable,
    model: &ModelSpec,
    dyad: (usize, usize),
) -> Result<StatVector, ModelError> {
    let (i, j) = dyad;
    if i == j {
        return Err(ModelError::SelfLoop(i));
    }
    let m = Model::new(model, attrs)?;
    m.check_graph(g)?;
    Ok(m.change_stats(g, i, j))
}

pub fn dyad_design_matrix(
    g: &Graph,
    attrs: &AttributeTable,
    model: &ModelSpec,
) -> Result<DesignMatrix, ModelError> {
    Model::new(model, attrs)?.design_matrix(g)
}
