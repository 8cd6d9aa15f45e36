//! Scaling sweeps: per-event wall time as nodes, edges or layers grow.
//!
//! Each trial builds the network and model, initializes a simulation, and
//! then times only the event loop.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spreadsim::engine::{select_mode, Simulation};
use spreadsim::network::geometric_radius_for_degree;
use spreadsim::oracle::OracleSimulation;
use spreadsim::{
    generate, preset, CompiledModel, FlatSchedule, GeneratorKind, IndexedQueue, InitialCondition,
    LayerGraph, Mode, ModelSchema, MultilayerNetwork, RunConfig, Schedule, StopCondition,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EngineKind {
    Fast,
    Oracle,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Fast => "fast",
            EngineKind::Oracle => "oracle",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Sweep {
    /// Random geometric SIR at constant mean degree; the range lists N.
    Nodes,
    /// Erdős–Rényi SIR at fixed N; the range lists the edge probability p.
    Edges,
    /// Competitive SIS on identical-topology layers; the range lists L.
    Layers,
}

/// Parameters shared by all sweeps.
#[derive(Clone, Debug)]
pub struct BenchSettings {
    pub trials: usize,
    pub engine: EngineKind,
    pub mode: Mode,
    /// Multiply every arc by an independent weight from `U(0.5, 1.5)`.
    pub weighted: bool,
    /// Node count for the edge and layer sweeps.
    pub nodes: usize,
    /// Mean degree for the node and layer sweeps.
    pub degree: f64,
    /// Events timed per trial.
    pub max_events: u64,
    pub seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            trials: 5,
            engine: EngineKind::Fast,
            mode: Mode::Auto,
            weighted: false,
            nodes: 5000,
            degree: 11.0,
            max_events: 20_000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub param: f64,
    pub mean_event_time_s: f64,
    pub std: f64,
    pub events: u64,
}

/// One timed run: wall time of the event loop and the number of events.
#[derive(Clone, Copy, Debug)]
pub struct Timing {
    pub seconds: f64,
    pub events: u64,
}

impl Timing {
    pub fn per_event(&self) -> f64 {
        self.seconds / self.events.max(1) as f64
    }
}

/// Times up to `max_events` events after initialization.
pub fn time_events(model: &CompiledModel, cfg: &RunConfig, engine: EngineKind) -> Result<Timing> {
    let mut cfg = cfg.clone();
    cfg.audit_every = None;
    match engine {
        EngineKind::Fast => match select_mode(model.network(), cfg.mode) {
            Mode::Dense => time_fast::<FlatSchedule>(model, &cfg),
            _ => time_fast::<IndexedQueue>(model, &cfg),
        },
        EngineKind::Oracle => {
            let cap = match cfg.stop {
                StopCondition::MaxEvents(k) => k,
                _ => u64::MAX,
            };
            let mut sim = OracleSimulation::new(model, &cfg)?;
            let start = Instant::now();
            let mut events = 0;
            while events < cap && sim.step().is_some() {
                events += 1;
            }
            Ok(Timing {
                seconds: start.elapsed().as_secs_f64(),
                events,
            })
        }
    }
}

fn time_fast<Q: Schedule>(model: &CompiledModel, cfg: &RunConfig) -> Result<Timing> {
    let mut sim = Simulation::<Q>::new(model, cfg)?;
    let start = Instant::now();
    sim.advance(|_| {})?;
    Ok(Timing {
        seconds: start.elapsed().as_secs_f64(),
        events: sim.event_count(),
    })
}

fn weighted_copy(g: &LayerGraph, seed: u64) -> Result<LayerGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fa7_c5e5);
    // Undirected edges keep a symmetric weight: derive it from the pair.
    let salt: u64 = rng.random();
    Ok(g.reweighted(|i, j, _| {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let mut r = ChaCha8Rng::seed_from_u64(salt ^ ((a as u64) << 32 | b as u64));
        r.random_range(0.5..1.5)
    })?)
}

/// Random geometric layer with the requested mean degree.
pub fn geometric_layer(n: usize, degree: f64, seed: u64) -> Result<LayerGraph> {
    let radius = geometric_radius_for_degree(n, degree)?;
    Ok(generate(GeneratorKind::Geometric { radius }, n, seed)?)
}

fn infected_share(n: usize) -> usize {
    (n / 10).max(1)
}

/// Builds the model for one trial of a sweep at parameter `param`.
pub fn sweep_instance(
    sweep: Sweep,
    param: f64,
    trial: u64,
    s: &BenchSettings,
) -> Result<(CompiledModel, RunConfig)> {
    let seed = s.seed.wrapping_mul(1_000_003).wrapping_add(trial);
    let finish = |g: LayerGraph| -> Result<LayerGraph> {
        if s.weighted {
            weighted_copy(&g, seed)
        } else {
            Ok(g)
        }
    };
    let (schema, net, counts): (ModelSchema, MultilayerNetwork, Vec<usize>) = match sweep {
        Sweep::Nodes => {
            let n = param as usize;
            if n < 2 || param.fract() != 0.0 {
                bail!("node sweep needs integer sizes of at least 2, got {param}");
            }
            let g = finish(geometric_layer(n, s.degree, seed)?)?;
            let k = infected_share(n);
            (
                preset::sir(0.005, 0.01)?,
                MultilayerNetwork::single(g),
                vec![n - k, k, 0],
            )
        }
        Sweep::Edges => {
            if !(0.0..=1.0).contains(&param) {
                bail!("edge sweep needs probabilities in [0, 1], got {param}");
            }
            let n = s.nodes;
            let g = finish(generate(GeneratorKind::ErdosRenyi { p: param }, n, seed)?)?;
            let k = infected_share(n);
            (
                preset::sir(0.005, 0.01)?,
                MultilayerNetwork::single(g),
                vec![n - k, k, 0],
            )
        }
        Sweep::Layers => {
            let layers = param as usize;
            if layers == 0 || param.fract() != 0.0 {
                bail!("layer sweep needs positive integer layer counts, got {param}");
            }
            let n = s.nodes;
            let g = Arc::new(finish(geometric_layer(n, s.degree, seed)?)?);
            let net = MultilayerNetwork::new(std::iter::repeat_n(g, layers))?;
            // Each competitor starts on a fixed share of nodes.
            let per = (n / 20 / layers).max(1);
            let mut counts = vec![per; layers + 1];
            counts[0] = n - per * layers;
            (
                preset::competitive_sis(&vec![0.3; layers], 1.0)?,
                net,
                counts,
            )
        }
    };
    let model = CompiledModel::compile(schema, net)?;
    let cfg = RunConfig::new(
        InitialCondition::Counts(counts),
        StopCondition::MaxEvents(s.max_events),
        seed,
    )
    .with_mode(s.mode);
    Ok((model, cfg))
}

/// Runs a sweep and returns one row per parameter value.
pub fn run_sweep(sweep: Sweep, range: &[f64], s: &BenchSettings) -> Result<Vec<BenchRow>> {
    if s.trials == 0 {
        bail!("at least one trial is needed");
    }
    let mut rows = Vec::with_capacity(range.len());
    for &param in range {
        let mut per_event = Vec::with_capacity(s.trials);
        let mut events = 0;
        for trial in 0..s.trials as u64 {
            let (model, cfg) = sweep_instance(sweep, param, trial, s)?;
            let t = time_events(&model, &cfg, s.engine)?;
            events += t.events;
            per_event.push(t.per_event());
        }
        let (mean, std) = mean_std(&per_event);
        rows.push(BenchRow {
            param,
            mean_event_time_s: mean,
            std,
            events,
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn write_rows<W: Write>(rows: &[BenchRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "param,mean_event_time_s,std,events")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{}",
            r.param, r.mean_event_time_s, r.std, r.events
        )?;
    }
    Ok(())
}

/// Parses `a,b,c`.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let values = s
        .split(',')
        .map(|v| f64::from_str(v.trim()).map_err(|_| anyhow::anyhow!("bad range value {v:?}")))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("empty range");
    }
    Ok(values)
}
