//! End-to-end analysis runs driven by a JSON configuration.
//!
//! A run reads an edge list, an attribute file and a schema, recodes the
//! attributes, optionally restricts to the largest connected component,
//! handles missing cells, fits the `match`, `factor` and `mix` model
//! families, screens every candidate term, fits the final model and checks
//! goodness of fit. Each stage writes its tables (CSV and JSON) as soon as
//! it finishes; a failing stage leaves a `FAILED` marker beside whatever was
//! already written.

pub mod dataset;
mod output;
pub mod schema;
pub mod summary;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeTable, ColumnData};
use crate::fit::{
    fit_mcmle, fit_mple, gof, screen_univariate, FitError, FitResult, GofReport, McmleConfig, ScreenReport,
    DEFAULT_SCREEN_ALPHA,
};
use crate::graph::{largest_connected_component, load_graph, Graph};
use crate::impute::{impute_missforest, impute_psm, ForestConfig, ImputationDiagnostics, ImputationMethod};
use crate::model::{ModelSpec, TermSpec};
use crate::netstats::NetworkSummary;
use crate::rng;
use crate::sampler::SamplerConfig;

use output::Output;
pub use dataset::{schema_of, write_dataset, DatasetPaths};
pub use schema::{read_attributes, recode, ColumnKind, ColumnSchema, RecodeRule, Schema, SchemaError};
pub use summary::{summarize_attributes, ColumnSummary, LevelCount};

/// Name of the marker file left in the output directory by a failed run.
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or inconsistent configuration, schema or input paths.
    Config,
    /// Input data that cannot be analysed as given.
    Data,
    /// Estimation failed: degeneracy, separation, collinearity or no
    /// convergence.
    Fit,
    /// Output could not be written.
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Fit => 3,
            ErrorKind::Data => 4,
            ErrorKind::Io => 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("stage `{stage}` failed: {message}")]
pub struct PipelineError {
    pub stage: String,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    fn new(stage: impl Into<String>, kind: ErrorKind, message: impl fmt::Display) -> Self {
        PipelineError {
            stage: stage.into(),
            kind,
            message: message.to_string(),
        }
    }

    fn fit(stage: &str, e: FitError) -> Self {
        let kind = match e {
            FitError::Model(_) => ErrorKind::Data,
            FitError::InvalidConfig(_) | FitError::Sampler(_) => ErrorKind::Config,
            _ => ErrorKind::Fit,
        };
        PipelineError::new(stage, kind, e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    #[default]
    Full,
    Lcc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    #[serde(alias = "complete-case")]
    CompleteCase,
    Psm,
    #[serde(alias = "missForest")]
    Missforest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Match,
    Factor,
    Mix,
    Final,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Match, Family::Factor, Family::Mix, Family::Final];

    pub fn name(self) -> &'static str {
        match self {
            Family::Match => "match",
            Family::Factor => "factor",
            Family::Mix => "mix",
            Family::Final => "final",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    /// MPLE for dyad-independent models (where it is the MLE), MC-MLE
    /// otherwise.
    #[default]
    Auto,
    Mple,
    Mcmle,
}

/// A categorical attribute entering the model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub attribute: String,
    /// Reference level of the factor term; defaults to the schema reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    /// Reference pair of the mix term; defaults to the factor reference
    /// paired with itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix_reference: Option<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    /// Defaults to 10·n².
    pub burn_in: Option<u64>,
    /// Defaults to n².
    pub thin: Option<u64>,
}

impl SamplerSettings {
    fn config(&self, n: usize, sample_count: usize, seed: u64) -> SamplerConfig {
        let base = SamplerConfig::for_nodes(n, sample_count, seed);
        SamplerConfig {
            burn_in: self.burn_in.unwrap_or(base.burn_in),
            thin: self.thin.unwrap_or(base.thin),
            ..base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub method: MethodChoice,
    pub chains: usize,
    pub samples_per_chain: usize,
    pub max_iterations: usize,
    pub min_ess_fraction: f64,
    pub screen_alpha: f64,
    #[serde(flatten)]
    pub sampler: SamplerSettings,
}

impl Default for FitSettings {
    fn default() -> Self {
        let m = McmleConfig::for_nodes(1, 0);
        FitSettings {
            method: MethodChoice::Auto,
            chains: m.chains,
            samples_per_chain: m.sampler.sample_count,
            max_iterations: m.max_iterations,
            min_ess_fraction: m.min_ess_fraction,
            screen_alpha: DEFAULT_SCREEN_ALPHA,
            sampler: SamplerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GofSettings {
    pub simulations: usize,
    #[serde(flatten)]
    pub sampler: SamplerSettings,
}

impl Default for GofSettings {
    fn default() -> Self {
        GofSettings {
            simulations: 100,
            sampler: SamplerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeSettings {
    /// Propensity-model covariates; defaults to every schema column that is
    /// fully observed. missForest uses all schema columns.
    pub covariates: Option<Vec<String>>,
    pub trees: usize,
    pub mtry: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ImputeSettings {
    fn default() -> Self {
        let f = ForestConfig::default();
        ImputeSettings {
            covariates: None,
            trees: f.trees,
            mtry: f.mtry,
            min_leaf: f.min_leaf,
        }
    }
}

fn default_families() -> Vec<Family> {
    Family::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// CSV with `source,target` columns of node ids.
    pub edges: PathBuf,
    /// CSV with an id column and one column per schema entry.
    pub attributes: PathBuf,
    /// JSON [`Schema`].
    pub schema: PathBuf,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    pub candidates: Vec<Candidate>,
    /// Decay of a `gwdegree` term added to the final model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gwdegree: Option<f64>,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub gof: GofSettings,
    #[serde(default)]
    pub imputation: ImputeSettings,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Reads a config file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let err = |e: &dyn fmt::Display| PipelineError::new("config", ErrorKind::Config, format!("{}: {e}", path.display()));
        let text = fs::read_to_string(path).map_err(|e| err(&e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| err(&e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.edges, &mut cfg.attributes, &mut cfg.schema, &mut cfg.out] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_schema(&self) -> Result<Schema, PipelineError> {
        let err = |e: &dyn fmt::Display| {
            PipelineError::new("config", ErrorKind::Config, format!("schema {}: {e}", self.schema.display()))
        };
        let text = fs::read_to_string(&self.schema).map_err(|e| err(&e))?;
        let schema: Schema = serde_json::from_str(&text).map_err(|e| err(&e))?;
        schema.validate().map_err(|e| err(&e))?;
        Ok(schema)
    }

    /// Checks inputs exist and candidates and references agree with the
    /// schema.
    pub fn validate(&self, schema: &Schema) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::new("config", ErrorKind::Config, m));
        for p in [&self.edges, &self.attributes] {
            if !p.is_file() {
                return bad(format!("input file {} does not exist", p.display()));
            }
        }
        if self.families.is_empty() {
            return bad("no model families requested".into());
        }
        for (k, c) in self.candidates.iter().enumerate() {
            if self.candidates[..k].iter().any(|d| d.attribute == c.attribute) {
                return bad(format!("candidate `{}` listed twice", c.attribute));
            }
            let Some(levels) = schema.levels(&c.attribute) else {
                return bad(format!("candidate `{}` is not a categorical schema column", c.attribute));
            };
            let refs = c.reference.iter().chain(c.mix_reference.iter().flat_map(|(a, b)| [a, b]));
            for r in refs {
                if !levels.contains(r) {
                    return bad(format!("`{r}` is not a level of `{}`", c.attribute));
                }
            }
        }
        if let Some(d) = self.gwdegree {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("gwdegree decay must be positive, got {d}"));
            }
        }
        if self.fit.chains == 0 || self.fit.samples_per_chain == 0 || self.fit.max_iterations == 0 {
            return bad("chains, samples_per_chain and max_iterations must be positive".into());
        }
        if self.gof.simulations == 0 {
            return bad("gof.simulations must be positive".into());
        }
        if self.imputation.trees == 0 || self.imputation.min_leaf == 0 {
            return bad("imputation trees and min_leaf must be positive".into());
        }
        if let Some(covs) = &self.imputation.covariates {
            if let Some(c) = covs.iter().find(|c| schema.column(c).is_none()) {
                return bad(format!("imputation covariate `{c}` is not a schema column"));
            }
        }
        Ok(())
    }

    pub fn stage_seed(&self, stage: Stage) -> u64 {
        rng::derive_seed(self.seed, stage.tag())
    }
}

/// Seeded stages of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Imputation,
    Fit(Family),
    Gof(Family),
}

impl Stage {
    fn tag(self) -> u64 {
        match self {
            Stage::Imputation => 1,
            Stage::Fit(f) => 10 + f.index(),
            Stage::Gof(f) => 20 + f.index(),
        }
    }

    fn name(self) -> String {
        match self {
            Stage::Imputation => "imputation".into(),
            Stage::Fit(f) => format!("fit.{}", f.name()),
            Stage::Gof(f) => format!("gof.{}", f.name()),
        }
    }
}

/// How far a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Goal {
    /// Network and attribute descriptives.
    Stats,
    /// Plus missing-data handling and the completed attribute table.
    Impute,
    /// Plus the univariate screen.
    Screen,
    /// Plus the requested model families.
    Fit,
    /// Plus goodness of fit for every fitted family.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Size {
    pub nodes: usize,
    pub edges: usize,
}

impl Size {
    fn of(g: &Graph) -> Self {
        Size {
            nodes: g.node_count(),
            edges: g.edge_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub input: Size,
    /// After restricting to the requested scope.
    pub scoped: Size,
    /// The graph that is modelled.
    pub analysed: Size,
    /// Nodes removed by complete-case filtering.
    pub dropped_incomplete: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationSummary {
    pub method: ImputationMethod,
    pub targets: Vec<String>,
    pub covariates: Vec<String>,
    pub imputed_cells: usize,
    pub diagnostics: Vec<(String, ImputationDiagnostics)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub family: Family,
    pub model: ModelSpec,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub counts: NodeCounts,
    pub network: NetworkSummary,
    pub attributes: Vec<ColumnSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imputation: Option<ImputationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenReport>,
    pub fits: Vec<FamilyFit>,
    pub gof: Vec<(Family, GofReport)>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InputFile {
    file: String,
    bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    package: String,
    version: String,
    rng: String,
    seed: u64,
    stage_seeds: BTreeMap<String, u64>,
    scope: Scope,
    missing_policy: MissingPolicy,
    families: Vec<Family>,
    candidates: Vec<Candidate>,
    gwdegree: Option<f64>,
    fit: FitSettings,
    gof: GofSettings,
    imputation: ImputeSettings,
    inputs: BTreeMap<String, InputFile>,
}

fn manifest(cfg: &RunConfig) -> Manifest {
    let mut stage_seeds = BTreeMap::new();
    stage_seeds.insert(Stage::Imputation.name(), cfg.stage_seed(Stage::Imputation));
    for &f in &cfg.families {
        for s in [Stage::Fit(f), Stage::Gof(f)] {
            stage_seeds.insert(s.name(), cfg.stage_seed(s));
        }
    }
    let inputs = [("edges", &cfg.edges), ("attributes", &cfg.attributes), ("schema", &cfg.schema)]
        .into_iter()
        .map(|(k, p)| {
            let file = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let bytes = fs::metadata(p).map(|m| m.len()).unwrap_or(0);
            (k.to_string(), InputFile { file, bytes })
        })
        .collect();
    Manifest {
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        rng: rng::RNG_NAME.into(),
        seed: cfg.seed,
        stage_seeds,
        scope: cfg.scope,
        missing_policy: cfg.missing_policy,
        families: cfg.families.clone(),
        candidates: cfg.candidates.clone(),
        gwdegree: cfg.gwdegree,
        fit: cfg.fit,
        gof: cfg.gof,
        imputation: cfg.imputation.clone(),
        inputs,
    }
}

/// Reads `source,target` pairs of node ids.
pub fn read_edges(path: &Path) -> Result<Vec<(String, String)>, PipelineError> {
    let err = |e: &dyn fmt::Display| PipelineError::new("ingest", ErrorKind::Data, format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| err(&e))?;
    let headers = rdr.headers().map_err(|e| err(&e))?.clone();
    let pos = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| err(&format!("no `{name}` column")));
    let (s, t) = (pos("source")?, pos("target")?);
    let mut edges = Vec::new();
    for record in rdr.records() {
        let r = record.map_err(|e| err(&e))?;
        edges.push((r.get(s).unwrap_or("").to_string(), r.get(t).unwrap_or("").to_string()));
    }
    Ok(edges)
}

/// Graph, ids and recoded attributes from the configured inputs.
pub fn ingest(cfg: &RunConfig, schema: &Schema) -> Result<(Graph, Vec<String>, AttributeTable), PipelineError> {
    let file = fs::File::open(&cfg.attributes)
        .map_err(|e| PipelineError::new("ingest", ErrorKind::Config, format!("{}: {e}", cfg.attributes.display())))?;
    let (ids, raw) = read_attributes(file, schema).map_err(|e| PipelineError::new("ingest", ErrorKind::Data, e))?;
    let edges = read_edges(&cfg.edges)?;
    let g = load_graph(&edges, &ids).map_err(|e| PipelineError::new("ingest", ErrorKind::Data, e))?;
    let attrs = recode(&raw, &schema.recode_rules()).map_err(|e| PipelineError::new("recode", ErrorKind::Data, e))?;
    Ok((g, ids, attrs))
}

/// The analysis data at one point of the run: graph, attribute rows and the
/// original ids of its nodes.
#[derive(Debug, Clone)]
struct Data {
    g: Graph,
    ids: Vec<String>,
    attrs: AttributeTable,
}

impl Data {
    fn select(&self, g: Graph, rows: &[usize]) -> Data {
        Data {
            g,
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            attrs: self.attrs.select_rows(rows),
        }
    }
}

fn candidate_terms(cfg: &RunConfig, schema: &Schema, family: Family) -> Vec<TermSpec> {
    cfg.candidates
        .iter()
        .map(|c| {
            let reference = c
                .reference
                .clone()
                .or_else(|| schema.reference(&c.attribute).map(str::to_string))
                .unwrap_or_default();
            match family {
                Family::Match | Family::Final => TermSpec::node_match(&c.attribute),
                Family::Factor => TermSpec::node_factor(&c.attribute, &reference),
                Family::Mix => {
                    let (a, b) = c.mix_reference.clone().unwrap_or((reference.clone(), reference));
                    TermSpec::node_mix(&c.attribute, &a, &b)
                }
            }
        })
        .collect()
}

/// Every match, factor and mix term, grouped by attribute.
fn screen_candidates(cfg: &RunConfig, schema: &Schema) -> Vec<TermSpec> {
    let per_family: Vec<Vec<TermSpec>> = [Family::Match, Family::Factor, Family::Mix]
        .iter()
        .map(|&f| candidate_terms(cfg, schema, f))
        .collect();
    (0..cfg.candidates.len())
        .flat_map(|k| per_family.iter().map(move |terms| terms[k].clone()))
        .collect()
}

/// Final model: edges, then for each attribute the selected term with the
/// smallest screening p-value (match, factor and mix terms of one attribute
/// are nested and cannot all be estimated together), then `gwdegree`.
pub fn final_model(screen: &ScreenReport, gwdegree: Option<f64>) -> ModelSpec {
    let mut chosen: Vec<(&str, f64, &TermSpec)> = Vec::new();
    for e in screen.entries.iter().filter(|e| e.selected) {
        let (Some(attr), Some(p)) = (e.term.attribute(), e.min_p_value) else { continue };
        match chosen.iter_mut().find(|c| c.0 == attr) {
            Some(c) if p < c.1 => *c = (attr, p, &e.term),
            Some(_) => {}
            None => chosen.push((attr, p, &e.term)),
        }
    }
    let mut spec = ModelSpec::edges();
    for (_, _, t) in chosen {
        spec = spec.with(t.clone());
    }
    if let Some(decay) = gwdegree {
        spec = spec.with(TermSpec::GwDegree { decay });
    }
    spec
}

fn impute(cfg: &RunConfig, schema: &Schema, data: &mut Data) -> Result<Option<ImputationSummary>, PipelineError> {
    let stage = "missing";
    let modelled: Vec<&str> = cfg.candidates.iter().map(|c| c.attribute.as_str()).collect();
    let data_err = |e: &dyn fmt::Display| PipelineError::new(stage, ErrorKind::Data, e.to_string());
    match cfg.missing_policy {
        MissingPolicy::CompleteCase => {
            let rows = data.attrs.complete_rows(&modelled).map_err(|e| data_err(&e))?;
            if rows.len() < data.attrs.row_count() {
                *data = data.select(data.g.induced_subgraph(&rows), &rows);
            }
            Ok(None)
        }
        policy => {
            let targets: Vec<&str> = modelled
                .iter()
                .copied()
                .filter(|t| data.attrs.column(t).map(|c| c.data.missing_count() > 0).unwrap_or(false))
                .collect();
            let all: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
            let covariates: Vec<&str> = match &cfg.imputation.covariates {
                Some(c) => c.iter().map(String::as_str).collect(),
                None if policy == MissingPolicy::Psm => all
                    .iter()
                    .copied()
                    .filter(|c| data.attrs.column(c).map(|c| c.data.missing_count() == 0).unwrap_or(false))
                    .collect(),
                None => all.iter().copied().filter(|c| !targets.contains(c)).collect(),
            };
            let seed = cfg.stage_seed(Stage::Imputation);
            let before = data.attrs.missing_mask();
            let mut diagnostics = Vec::new();
            let method = if policy == MissingPolicy::Psm {
                let mut completed = data.attrs.clone();
                for &t in &targets {
                    let covs: Vec<&str> = covariates.iter().copied().filter(|c| *c != t).collect();
                    let r = impute_psm(&data.attrs, t, &covs, seed).map_err(|e| data_err(&e))?;
                    let col = r.completed.column(t).map_err(|e| data_err(&e))?.clone();
                    *completed.column_mut(t).map_err(|e| data_err(&e))? = col;
                    diagnostics.push((t.to_string(), r.diagnostics));
                }
                data.attrs = completed;
                ImputationMethod::Psm
            } else if !targets.is_empty() {
                let forest = ForestConfig {
                    trees: cfg.imputation.trees,
                    mtry: cfg.imputation.mtry,
                    min_leaf: cfg.imputation.min_leaf,
                    bootstrap: true,
                };
                let r = impute_missforest(&data.attrs, &targets, &covariates, &forest, seed)
                    .map_err(|e| data_err(&e))?;
                diagnostics.push((targets.join(","), r.diagnostics));
                data.attrs = r.completed;
                ImputationMethod::MissForest
            } else {
                ImputationMethod::MissForest
            };
            let imputed_cells = targets.iter().map(|t| before.column_count(t)).sum();
            Ok(Some(ImputationSummary {
                method,
                targets: targets.iter().map(|s| s.to_string()).collect(),
                covariates: covariates.iter().map(|s| s.to_string()).collect(),
                imputed_cells,
                diagnostics,
            }))
        }
    }
}

fn fit_family(cfg: &RunConfig, data: &Data, family: Family, spec: &ModelSpec) -> Result<FitResult, PipelineError> {
    let stage = Stage::Fit(family).name();
    let mcmle = match cfg.fit.method {
        MethodChoice::Mple => false,
        MethodChoice::Mcmle => true,
        MethodChoice::Auto => !spec.is_dyad_independent(),
    };
    let result = if mcmle {
        let n = data.g.node_count();
        let mc = McmleConfig {
            sampler: cfg.fit.sampler.config(n, cfg.fit.samples_per_chain, cfg.stage_seed(Stage::Fit(family))),
            chains: cfg.fit.chains,
            max_iterations: cfg.fit.max_iterations,
            gradient_tolerance: None,
            min_ess_fraction: cfg.fit.min_ess_fraction,
        };
        fit_mcmle(&data.g, &data.attrs, spec, &mc, None)
    } else {
        fit_mple(&data.g, &data.attrs, spec)
    };
    result.map_err(|e| PipelineError::fit(&stage, e))
}

fn completed_rows(data: &Data, imputed: &crate::attributes::MissingnessMask) -> (Vec<String>, Vec<Vec<String>>, Vec<[String; 2]>) {
    let mut header = vec!["id".to_string()];
    header.extend(data.attrs.columns().iter().map(|c| c.name.clone()));
    let rows = (0..data.attrs.row_count())
        .map(|r| {
            let mut row = vec![data.ids[r].clone()];
            for c in data.attrs.columns() {
                row.push(match &c.data {
                    ColumnData::Categorical { levels, values } => {
                        values[r].map(|v| levels[v as usize].clone()).unwrap_or_default()
                    }
                    ColumnData::Continuous { values, .. } => values[r].map(|v| v.to_string()).unwrap_or_default(),
                });
            }
            row
        })
        .collect();
    let mut cells = Vec::new();
    for (k, name) in imputed.columns.iter().enumerate() {
        for (r, &m) in imputed.missing[k].iter().enumerate() {
            if m {
                cells.push([data.ids[r].clone(), name.clone()]);
            }
        }
    }
    (header, rows, cells)
}

/// Runs the whole analysis.
pub fn run(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    run_until(cfg, Goal::Full)
}

/// Runs the stages up to `goal`, writing tables into `cfg.out`. On error the
/// tables already written stay and a `FAILED` file names the stage.
pub fn run_until(cfg: &RunConfig, goal: Goal) -> Result<RunReport, PipelineError> {
    let schema = cfg.load_schema()?;
    cfg.validate(&schema)?;
    let mut out = Output::create(&cfg.out)?;
    let result = stages(cfg, &schema, goal, &mut out);
    match result {
        Ok(mut report) => {
            report.files = out.files().to_vec();
            report.files.push("report.json".into());
            out.json("report.json", &report)?;
            Ok(report)
        }
        Err(e) => {
            out.mark_failed(&e)?;
            Err(e)
        }
    }
}

fn stages(cfg: &RunConfig, schema: &Schema, goal: Goal, out: &mut Output) -> Result<RunReport, PipelineError> {
    out.json("manifest.json", &manifest(cfg))?;
    let (g, ids, attrs) = ingest(cfg, schema)?;
    let input = Size::of(&g);
    let mut data = Data { g, ids, attrs };

    if cfg.scope == Scope::Lcc {
        let (g, _, nodes) = largest_connected_component(&data.g, &data.attrs)
            .map_err(|e| PipelineError::new("scope", ErrorKind::Data, e))?;
        data = data.select(g, &nodes);
    }
    let scoped = Size::of(&data.g);

    let network = NetworkSummary::of(&data.g).map_err(|e| PipelineError::new("summary", ErrorKind::Data, e))?;
    out.csv("network_summary.csv", &NetworkSummary::CSV_HEADER, [network.csv_row()])?;
    out.json("network_summary.json", &network)?;
    let attributes = summarize_attributes(&data.attrs);
    out.csv("attribute_summary.csv", &summary::SUMMARY_CSV_HEADER, summary::summary_csv_rows(&attributes))?;
    out.json("attribute_summary.json", &attributes)?;

    let mut report = RunReport {
        counts: NodeCounts {
            input,
            scoped,
            analysed: scoped,
            dropped_incomplete: 0,
        },
        network,
        attributes,
        imputation: None,
        screen: None,
        fits: Vec::new(),
        gof: Vec::new(),
        files: Vec::new(),
    };
    if goal == Goal::Stats {
        out.json("node_counts.json", &report.counts)?;
        return Ok(report);
    }

    let before = data.attrs.missing_mask();
    report.imputation = impute(cfg, schema, &mut data)?;
    report.counts.analysed = Size::of(&data.g);
    report.counts.dropped_incomplete = scoped.nodes - data.g.node_count();
    out.json("node_counts.json", &report.counts)?;
    let mut imputed = data.attrs.missing_mask();
    if report.imputation.is_some() {
        // cells missing before and filled now
        for (k, name) in imputed.columns.clone().iter().enumerate() {
            for r in 0..imputed.missing[k].len() {
                imputed.missing[k][r] = before.is_missing(name, r) && !data.attrs.column(name).unwrap().data.is_missing(r);
            }
        }
    } else {
        imputed.missing.iter_mut().for_each(|m| m.iter_mut().for_each(|x| *x = false));
    }
    let (header, rows, cells) = completed_rows(&data, &imputed);
    out.csv("analysis_attributes.csv", &header, rows)?;
    out.csv("imputed_cells.csv", &["id", "column"], cells)?;
    if let Some(s) = &report.imputation {
        out.json("imputation.json", s)?;
    }
    if goal == Goal::Impute {
        return Ok(report);
    }

    let wants_final = cfg.families.contains(&Family::Final);
    if goal == Goal::Screen || (goal >= Goal::Fit && wants_final) {
        let screen = screen_univariate(&data.g, &data.attrs, &screen_candidates(cfg, schema), cfg.fit.screen_alpha);
        let rows = screen.entries.iter().map(|e| {
            [
                e.term.label(),
                e.min_p_value.map(|p| format!("{p:.6}")).unwrap_or_default(),
                e.selected.to_string(),
                e.error.clone().unwrap_or_default(),
            ]
        });
        out.csv("screen.csv", &["term", "min_p", "selected", "error"], rows)?;
        out.json("screen.json", &screen)?;
        report.screen = Some(screen);
    }
    if goal == Goal::Screen {
        return Ok(report);
    }

    let mut families = cfg.families.clone();
    families.sort();
    families.dedup();
    for family in families {
        let spec = match family {
            Family::Final => final_model(report.screen.as_ref().expect("screen ran"), cfg.gwdegree),
            f => candidate_terms(cfg, schema, f).into_iter().fold(ModelSpec::edges(), ModelSpec::with),
        };
        let fit = fit_family(cfg, &data, family, &spec)?;
        let name = family.name();
        out.csv(&format!("fit_{name}.csv"), &FitResult::CSV_HEADER, fit.csv_rows())?;
        out.json(&format!("fit_{name}.json"), &fit)?;
        report.fits.push(FamilyFit { family, model: spec, fit });
    }
    if goal == Goal::Fit {
        return Ok(report);
    }

    for ff in &report.fits {
        let stage = Stage::Gof(ff.family);
        let sampler = cfg.gof.sampler.config(data.g.node_count(), cfg.gof.simulations, cfg.stage_seed(stage));
        let r = gof(&data.g, &data.attrs, &ff.model, &ff.fit.theta, &sampler)
            .map_err(|e| PipelineError::fit(&stage.name(), e))?;
        let name = ff.family.name();
        out.csv(&format!("gof_{name}.csv"), &GofReport::CSV_HEADER, r.csv_rows())?;
        out.json(&format!("gof_{name}.json"), &r)?;
        report.gof.push((ff.family, r));
    }
    Ok(report)
}
