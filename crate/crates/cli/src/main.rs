//! `ergm`: command-line front end for the analysis pipeline.

mod verify;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ergm::pipeline::{self, write_dataset, ErrorKind, Family, Goal, MissingPolicy, PipelineError, RunConfig, RunReport, Scope};
use ergm::synth::{generate, SynthSpec};
use ergm::Model;

#[derive(Parser)]
#[command(name = "ergm", version, about = "Exponential random graph models for attributed networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Network descriptives (node and edge counts, assortativity,
    /// transitivity, degree, betweenness, density) and attribute counts.
    Stats(RunArgs),
    /// Fit the requested model families.
    Fit(RunArgs),
    /// Handle missing attribute cells and write the analysis table.
    Impute(RunArgs),
    /// Fit, then simulate goodness of fit for every fitted family.
    Gof(RunArgs),
    /// Univariate screen of every candidate term against edges only.
    Screen(RunArgs),
    /// The whole pipeline.
    Run(RunArgs),
    /// Check samplers and estimators against exact enumeration on tiny
    /// graphs.
    Verify,
    /// Simulate a network with known parameters and write it as pipeline
    /// input.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Full,
    Lcc,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    CompleteCase,
    Psm,
    Missforest,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Match,
    Factor,
    Mix,
    Final,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scope: Option<ScopeArg>,
    #[arg(long, value_enum)]
    missing: Option<MissingArg>,
    /// Fit only this family.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic data specification (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.scope {
            cfg.scope = match s {
                ScopeArg::Full => Scope::Full,
                ScopeArg::Lcc => Scope::Lcc,
            };
        }
        if let Some(m) = self.missing {
            cfg.missing_policy = match m {
                MissingArg::CompleteCase => MissingPolicy::CompleteCase,
                MissingArg::Psm => MissingPolicy::Psm,
                MissingArg::Missforest => MissingPolicy::Missforest,
            };
        }
        if let Some(f) = self.family {
            cfg.families = vec![match f {
                FamilyArg::Match => Family::Match,
                FamilyArg::Factor => Family::Factor,
                FamilyArg::Mix => Family::Mix,
                FamilyArg::Final => Family::Final,
            }];
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

fn print_report(report: &RunReport, goal: Goal) {
    let c = &report.counts;
    println!(
        "nodes {} -> {} (scope) -> {} (analysed); edges {} -> {} -> {}",
        c.input.nodes, c.scoped.nodes, c.analysed.nodes, c.input.edges, c.scoped.edges, c.analysed.edges
    );
    if goal == Goal::Stats {
        for (label, value) in report.network.table_cells() {
            println!("{label:<32} {value}");
        }
    }
    if let Some(imp) = &report.imputation {
        println!("imputed {} cells in {:?}", imp.imputed_cells, imp.targets);
    }
    if let Some(screen) = &report.screen {
        let selected: Vec<String> = screen.selected().iter().map(|t| t.label()).collect();
        println!("screen (p < {}): {}", screen.alpha, selected.join(", "));
    }
    for f in &report.fits {
        println!("\n{} model ({:?})", f.family.name(), f.fit.method);
        for r in &f.fit.or_table {
            println!(
                "  {:<36} {:>8.2} ({:.2}, {:.2}){}",
                r.term, r.or, r.ci_low, r.ci_high, r.stars
            );
        }
    }
    for (family, g) in &report.gof {
        println!("gof {}: no lack of fit = {}", family.name(), g.no_lack_of_fit);
    }
}

fn run_pipeline(args: &RunArgs, goal: Goal) -> ExitCode {
    let result = args.load().and_then(|cfg| pipeline::run_until(&cfg, goal));
    match result {
        Ok(report) => {
            print_report(&report, goal);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}

fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.config).with_context(|| args.config.display().to_string())?;
    let mut spec: SynthSpec = serde_json::from_str(&text).context("synthetic spec")?;
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let out = generate(&spec)?;
    write_dataset(&args.out, &out.graph, &out.observed)?;
    write_dataset(&args.out.join("complete"), &out.graph, &out.complete)?;
    let names = Model::new(&spec.model, &out.complete)?.names().to_vec();
    let missing: serde_json::Map<String, serde_json::Value> = out
        .mask
        .columns
        .iter()
        .map(|c| (c.clone(), out.mask.column_count(c).into()))
        .collect();
    let truth = serde_json::json!({
        "seed": spec.seed,
        "model": spec.model,
        "names": names,
        "theta": out.theta,
        "nodes": out.graph.node_count(),
        "edges": out.graph.edge_count(),
        "missing_cells": missing,
    });
    fs::write(args.out.join("truth.json"), serde_json::to_string_pretty(&truth)? + "\n")?;
    println!(
        "wrote {} nodes, {} edges to {}",
        out.graph.node_count(),
        out.graph.edge_count(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Stats(a) => run_pipeline(a, Goal::Stats),
        Command::Impute(a) => run_pipeline(a, Goal::Impute),
        Command::Screen(a) => run_pipeline(a, Goal::Screen),
        Command::Fit(a) => run_pipeline(a, Goal::Fit),
        Command::Gof(a) | Command::Run(a) => run_pipeline(a, Goal::Full),
        Command::Verify => {
            if verify::run() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Synth(a) => match synth(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(ErrorKind::Config.exit_code() as u8)
            }
        },
    }
}
