//! Ensemble runs: one event log per run plus a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use spreadsim::engine::select_mode;
use spreadsim::model::Preset;
use spreadsim::network::load_edge_list;
use spreadsim::{
    engine, oracle_run, CompiledModel, InitialCondition, LayerGraph, Mode, ModelConfig,
    MultilayerNetwork, RunConfig, RunOutcome, StopCondition,
};

use crate::bench::EngineKind;

/// Where the model comes from.
#[derive(Clone, Debug)]
pub enum ModelSource {
    /// TOML model file; networks are named inside it.
    File(PathBuf),
    /// Built-in model with one edge list per layer, or a single edge list
    /// shared by every layer.
    Preset {
        spec: String,
        networks: Vec<PathBuf>,
        directed: bool,
    },
}

/// Everything needed to launch an ensemble.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub model: ModelSource,
    pub seed: u64,
    pub runs: u64,
    pub engine: EngineKind,
    pub mode: Mode,
    pub stop: String,
    /// `STATE=COUNT,...`; `None` seeds one node in the first layer's inducer.
    pub init: Option<String>,
    pub audit_every: Option<u64>,
    pub resync_every: Option<u64>,
    pub jobs: usize,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.runs >= 1, "--runs must be at least 1");
        let paths: Vec<&Path> = match &self.model {
            ModelSource::File(p) => vec![p.as_path()],
            ModelSource::Preset { networks, .. } => {
                ensure!(
                    !networks.is_empty(),
                    "a preset needs at least one --network"
                );
                networks.iter().map(PathBuf::as_path).collect()
            }
        };
        for p in paths {
            ensure!(p.exists(), "{} does not exist", p.display());
        }
        Ok(())
    }

    /// Loads networks and compiles the model.
    pub fn compile(&self) -> Result<CompiledModel> {
        match &self.model {
            ModelSource::File(path) => {
                let cfg = ModelConfig::load(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let schema = cfg.schema()?;
                let base = path.parent().unwrap_or(Path::new("."));
                let net = cfg.load_network(base)?;
                Ok(CompiledModel::compile(schema, net)?)
            }
            ModelSource::Preset {
                spec,
                networks,
                directed,
            } => {
                let preset: Preset = spec.parse()?;
                let layers = preset.layer_count();
                let graphs = networks
                    .iter()
                    .map(|p| {
                        load_edge_list(p, *directed, 1.0)
                            .map(Arc::new)
                            .with_context(|| format!("reading {}", p.display()))
                    })
                    .collect::<Result<Vec<Arc<LayerGraph>>>>()?;
                let graphs = match graphs.len() {
                    1 => vec![graphs[0].clone(); layers],
                    k if k == layers => graphs,
                    k => bail!("preset has {layers} layers but {k} networks were given"),
                };
                let n = graphs.iter().map(|g| g.node_count()).max().unwrap_or(0);
                let graphs = graphs
                    .into_iter()
                    .map(|g| {
                        if g.node_count() == n {
                            Ok(g)
                        } else {
                            Ok(Arc::new(g.with_node_count(n)?))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let net = MultilayerNetwork::new(graphs)?;
                Ok(CompiledModel::compile(preset.schema()?, net)?)
            }
        }
    }

    pub fn run_config(&self, model: &CompiledModel) -> Result<RunConfig> {
        let schema = model.schema();
        let stop = StopCondition::parse(&self.stop, schema)?;
        let initial = match &self.init {
            Some(spec) => InitialCondition::parse_counts(spec, schema, model.node_count())?,
            None => {
                ensure!(
                    model.layer_count() > 0,
                    "--init is required for models without layers"
                );
                let name = &schema.state_names[model.inducer(0)];
                InitialCondition::parse_counts(&format!("{name}=1"), schema, model.node_count())?
            }
        };
        let mut cfg = RunConfig::new(initial, stop, self.seed).with_mode(self.mode);
        cfg.audit_every = self.audit_every;
        cfg.resync_every = self.resync_every;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub run: u64,
    pub log: String,
    pub events: usize,
    pub final_time: f64,
    pub termination: String,
    pub final_counts: Vec<usize>,
    pub wall_s: f64,
}

#[derive(Debug, Serialize)]
pub struct EnsembleSummary {
    pub engine: String,
    pub mode: String,
    pub seed: u64,
    pub stop: String,
    pub nodes: usize,
    pub states: Vec<String>,
    pub model_digest: String,
    pub runs: Vec<RunSummary>,
    pub total_events: u64,
    pub wall_s: f64,
    pub events_per_s: f64,
}

pub fn log_name(run: u64) -> String {
    format!("run_{run:04}.csv")
}

fn one_run(model: &CompiledModel, cfg: &RunConfig, engine: EngineKind) -> Result<RunOutcome> {
    Ok(match engine {
        EngineKind::Fast => engine::run(model, cfg)?,
        EngineKind::Oracle => oracle_run(model, cfg)?,
    })
}

/// Executes the ensemble, writing logs and `summary.json` into `out`.
pub fn run_ensemble(manifest: &RunManifest) -> Result<EnsembleSummary> {
    manifest.validate()?;
    let model = manifest.compile()?;
    let cfg = manifest.run_config(&model)?;
    fs::create_dir_all(&manifest.out)
        .with_context(|| format!("creating {}", manifest.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.jobs)
        .build()?;
    let start = Instant::now();
    let runs: Vec<RunSummary> = pool.install(|| {
        (0..manifest.runs)
            .into_par_iter()
            .map(|run| {
                let t0 = Instant::now();
                let out = one_run(&model, &cfg.clone().with_run(run), manifest.engine)
                    .with_context(|| format!("run {run}"))?;
                let wall_s = t0.elapsed().as_secs_f64();
                let name = log_name(run);
                out.log
                    .write_path(manifest.out.join(&name))
                    .with_context(|| format!("writing {name}"))?;
                Ok(RunSummary {
                    run,
                    log: name,
                    events: out.log.records.len(),
                    final_time: out.final_time(),
                    termination: out.termination().to_string(),
                    final_counts: out.final_counts(model.state_count()),
                    wall_s,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let wall_s = start.elapsed().as_secs_f64();
    let total_events: u64 = runs.iter().map(|r| r.events as u64).sum();
    let mode = match manifest.engine {
        EngineKind::Fast => {
            format!("{:?}", select_mode(model.network(), manifest.mode)).to_lowercase()
        }
        EngineKind::Oracle => "direct".to_string(),
    };
    let summary = EnsembleSummary {
        engine: manifest.engine.to_string(),
        mode,
        seed: manifest.seed,
        stop: manifest.stop.clone(),
        nodes: model.node_count(),
        states: model.schema().state_names.clone(),
        model_digest: model.digest().to_string(),
        runs,
        total_events,
        wall_s,
        events_per_s: if wall_s > 0.0 {
            total_events as f64 / wall_s
        } else {
            0.0
        },
    };
    let path = manifest.out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}
