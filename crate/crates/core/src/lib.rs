//! Exponential random graph models for undirected networks with categorical
//! node attributes.
//!
//! The crate covers the whole analysis path: loading an edge list and node
//! attributes, descriptive network statistics, `nodematch` / `nodefactor` /
//! `nodemix` / `gwdegree` model terms, Metropolis-Hastings simulation,
//! pseudo-likelihood and Monte Carlo maximum-likelihood estimation with
//! odds-ratio tables, simulation-based goodness of fit, and completion of
//! missing attributes by propensity-score matching or iterative random
//! forests. The [`oracle`] module computes the same quantities exactly by
//! enumerating every graph on up to six nodes.

pub mod attributes;
pub mod fit;
pub mod graph;
pub mod impute;
pub mod model;
pub mod netstats;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod synth;

pub use attributes::{AttributeTable, Column, ColumnData, MissingnessMask};
pub use fit::{fit_mcmle, fit_mple, gof, or_table, screen_univariate, FitError, FitResult, McmleConfig};
pub use graph::{degree_sequence, largest_connected_component, load_graph, Graph, GraphError};
pub use model::{change_statistics, dyad_design_matrix, statistics, Model, ModelSpec, TermSpec};
pub use netstats::NetworkSummary;
pub use sampler::{sample, SamplerConfig};
