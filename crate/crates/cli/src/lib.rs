//! Command-line driver: network generation, ensemble runs, averaging and
//! scaling benchmarks.

pub mod average;
pub mod bench;
pub mod run;

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use spreadsim::network::{geometric_radius_for_degree, write_edge_list};
use spreadsim::{generate, GeneratorKind, Mode};

use bench::{BenchSettings, EngineKind, Sweep};
use run::{ModelSource, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "spreadsim",
    version,
    about = "Exact spreading-process simulation on multilayer networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random network as an undirected edge list.
    Generate(GenerateArgs),
    /// Simulate an ensemble and write one event log per run.
    Run(RunArgs),
    /// Average a directory of event logs onto a uniform time grid.
    Average(AverageArgs),
    /// Measure per-event time across a parameter sweep.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Er,
    Geometric,
    Ba,
    Ws,
    Complete,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub kind: Kind,
    #[arg(long)]
    pub n: usize,
    /// Edge probability (er) or rewiring probability (ws).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, conflicts_with = "target_degree")]
    pub radius: Option<f64>,
    /// Mean degree for geometric graphs; the radius is solved for.
    #[arg(long)]
    pub target_degree: Option<f64>,
    /// Edges per new node (ba).
    #[arg(long)]
    pub m: Option<usize>,
    /// Lattice degree (ws).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sparse,
    Dense,
    Auto,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sparse => Mode::Sparse,
            ModeArg::Dense => Mode::Dense,
            ModeArg::Auto => Mode::Auto,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML model file.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub model: Option<PathBuf>,
    /// Built-in model, e.g. `sir:beta=0.005,delta=0.01`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Edge list per layer for a preset; one file is shared by all layers.
    #[arg(long, requires = "preset")]
    pub network: Vec<PathBuf>,
    /// Read preset edge lists as directed arcs.
    #[arg(long)]
    pub directed: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    #[arg(long, value_enum, default_value_t = EngineKind::Fast)]
    pub engine: EngineKind,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    /// `absorption`, `time:T`, `events:K`, `count:STATE>=K` or `count:STATE<=K`.
    #[arg(long, default_value = "absorption")]
    pub stop: String,
    /// Initial counts `STATE=COUNT,...`; remaining nodes start in the first state.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Audit incremental state every K events.
    #[arg(long)]
    pub audit_every: Option<u64>,
    /// Recompute influence and rates from scratch every K events.
    #[arg(long)]
    pub resync_every: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// End of the grid; defaults to the latest time covered by every log.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub sweep: Sweep,
    /// Comma-separated parameter values: N, edge probability, or layer count.
    #[arg(long)]
    pub range: String,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = EngineKind::Fast)]
    pub engine: EngineKind,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long)]
    pub weighted: bool,
    /// Node count for edge and layer sweeps.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Mean degree for node and layer sweeps.
    #[arg(long, default_value_t = 11.0)]
    pub degree: f64,
    /// Events timed per trial.
    #[arg(long, default_value_t = 20_000)]
    pub max_events: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn generator(args: &GenerateArgs) -> Result<GeneratorKind> {
    let need = |v: Option<f64>, flag: &str| v.with_context(|| format!("--{flag} is required"));
    Ok(match args.kind {
        Kind::Er => GeneratorKind::ErdosRenyi {
            p: need(args.p, "p")?,
        },
        Kind::Geometric => {
            let radius = match (args.radius, args.target_degree) {
                (Some(r), _) => r,
                (None, Some(d)) => geometric_radius_for_degree(args.n, d)?,
                (None, None) => bail!("--radius or --target-degree is required"),
            };
            GeneratorKind::Geometric { radius }
        }
        Kind::Ba => GeneratorKind::BarabasiAlbert {
            m: args.m.context("--m is required")?,
        },
        Kind::Ws => GeneratorKind::WattsStrogatz {
            k: args.k.context("--k is required")?,
            p_rewire: need(args.p, "p")?,
        },
        Kind::Complete => GeneratorKind::Complete,
    })
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let g = generate(generator(args)?, args.n, args.seed)?;
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_edge_list(&g, BufWriter::new(file), true)?;
    Ok(())
}

pub fn manifest(args: &RunArgs) -> RunManifest {
    let model = match (&args.model, &args.preset) {
        (Some(path), _) => ModelSource::File(path.clone()),
        (None, spec) => ModelSource::Preset {
            spec: spec.clone().unwrap_or_default(),
            networks: args.network.clone(),
            directed: args.directed,
        },
    };
    RunManifest {
        model,
        seed: args.seed,
        runs: args.runs,
        engine: args.engine,
        mode: args.mode.into(),
        stop: args.stop.clone(),
        init: args.init.clone(),
        audit_every: args.audit_every,
        resync_every: args.resync_every,
        jobs: args.jobs.max(1),
        out: args.out.clone(),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let summary = run::run_ensemble(&manifest(args))?;
    eprintln!(
        "{} runs, {} events in {:.3} s ({:.0} events/s)",
        summary.runs.len(),
        summary.total_events,
        summary.wall_s,
        summary.events_per_s
    );
    Ok(())
}

pub fn cmd_average(args: &AverageArgs) -> Result<()> {
    let series = average::average_dir(&args.dir, args.points, args.t_max)?;
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    series.write_csv(file)?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let range = bench::parse_range(&args.range)?;
    let settings = BenchSettings {
        trials: args.trials,
        engine: args.engine,
        mode: args.mode.into(),
        weighted: args.weighted,
        nodes: args.n,
        degree: args.degree,
        max_events: args.max_events,
        seed: args.seed,
    };
    let rows = bench::run_sweep(args.sweep, &range, &settings)?;
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    bench::write_rows(&rows, BufWriter::new(file))?;
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Average(a) => cmd_average(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn run_needs_a_model() {
        assert!(Cli::try_parse_from(["spreadsim", "run", "--out", "x"]).is_err());
        assert!(Cli::try_parse_from([
            "spreadsim",
            "run",
            "--model",
            "m.toml",
            "--preset",
            "sir:beta=1,delta=1",
            "--out",
            "x"
        ])
        .is_err());
        let ok = Cli::try_parse_from([
            "spreadsim",
            "run",
            "--preset",
            "sir:beta=1,delta=1",
            "--network",
            "a.txt",
            "--out",
            "x",
            "--engine",
            "oracle",
            "--mode",
            "dense",
        ])
        .unwrap();
        match ok.command {
            Command::Run(a) => {
                assert_eq!(a.engine, EngineKind::Oracle);
                assert_eq!(Mode::from(a.mode), Mode::Dense);
                assert_eq!(a.runs, 1);
            }
            _ => unreachable!(),
        }
    }
}
