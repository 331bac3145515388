//! `dmed`: run median-consensus experiments and emit CSV.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on any failure
//! while running. Logging is controlled by `RUST_LOG`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dmed_core::harness::{self, output, ExperimentConfig};
use dmed_core::observation::RecursionParams;
use dmed_core::topology::generate_with_target_lambda2;
use dmed_core::{SeedTree, StaticGraph};

#[derive(Debug, Parser)]
#[command(name = "dmed", version, about = "Distributed median estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every trial of a config file and write the aggregated series.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate or inspect edge-list graphs.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Run the scalar averaging recursion and write the scaled squared error.
    Lemma1(RecursionArgs),
    /// Check a config file, reporting every violated schedule constraint.
    Validate { config: PathBuf },
}

#[derive(Debug, Subcommand)]
enum GraphCommand {
    /// Random geometric graph whose algebraic connectivity is near a target.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        target_lambda2: f64,
        #[arg(long, default_value_t = 0.5)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print node count, edge count and algebraic connectivity.
    Info { edgelist: PathBuf },
}

#[derive(Debug, clap::Args)]
struct RecursionArgs {
    #[arg(long)]
    a1: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    a2: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    tmax: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    out: PathBuf,
    /// Slack subtracted from the rate exponent.
    #[arg(long, default_value_t = 0.1)]
    eps0: f64,
    #[arg(long, default_value_t = 0.0)]
    z0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    record_every: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Graph { command } => match command {
            GraphCommand::Gen {
                nodes,
                target_lambda2,
                tolerance,
                seed,
                out,
            } => graph_gen(nodes, target_lambda2, tolerance, seed, &out),
            GraphCommand::Info { edgelist } => graph_info(&edgelist),
        },
        Command::Lemma1(args) => lemma1(&args),
        Command::Validate { config } => validate(&config),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn simulate(config_path: &Path, out: &Path) -> Result<()> {
    let config = load(config_path)?;
    let series = harness::run_experiment(&config, config_path.parent())?;
    output::emit_csv(&series, out)?;
    log::info!("wrote {} rows to {}", series.rows.len(), out.display());
    Ok(())
}

fn graph_gen(nodes: usize, target: f64, tolerance: f64, seed: u64, out: &Path) -> Result<()> {
    let mut rng = SeedTree::new(seed).graph_rng();
    let (graph, radius) = generate_with_target_lambda2(nodes, target, tolerance, &mut rng)?;
    graph.write_edge_list(out)?;
    println!("nodes: {}", graph.n_nodes());
    println!("edges: {}", graph.edge_count());
    println!("radius: {radius:.6}");
    println!("lambda2: {:.6}", graph.lambda2());
    Ok(())
}

fn graph_info(path: &Path) -> Result<()> {
    let graph = StaticGraph::read_edge_list(path)?;
    println!("nodes: {}", graph.n_nodes());
    println!("edges: {}", graph.edge_count());
    println!("lambda2: {:.6}", graph.lambda2());
    Ok(())
}

fn lemma1(args: &RecursionArgs) -> Result<()> {
    let params = RecursionParams {
        a1: args.a1,
        mu: args.mu,
        a2: args.a2,
        delta: args.delta,
        sigma: args.sigma,
        z0: args.z0,
    };
    let rows = harness::run_recursion_experiment(
        &params,
        args.eps0,
        args.tmax,
        args.trials,
        args.record_every,
        SeedTree::new(args.seed),
    )?;
    output::emit_recursion_csv(&rows, &args.out)?;
    Ok(())
}

fn validate(config_path: &Path) -> Result<()> {
    let config = load(config_path)?;
    let p = config.schedule_params();
    let delta0 = p.delta0();
    println!("δ0 = {delta0}");
    println!(
        "τ3 < min{{1 - τ1, 0.5 δ0}} = min{{{}, {}}} = {}",
        1.0 - p.tau1,
        0.5 * delta0,
        p.tau3_bound()
    );
    let violations = p.violations();
    for v in &violations {
        eprintln!("violation: {v}");
    }
    if !violations.is_empty() {
        bail!("{} schedule constraint(s) violated", violations.len());
    }
    config.validate()?;
    println!("τ3 = {} admissible", p.tau3);
    Ok(())
}
