//! The event-driven simulator.
//!
//! Every node with a positive total rate holds one absolute transition time
//! in a schedule. An event pops the earliest node, samples its destination
//! state, draws its next time, and then reschedules only those out-neighbors
//! whose rate actually changed: neighbors on layers induced by the old or new
//! state whose own state has a nonzero edge-based row on that layer. All other
//! scheduled times stay valid because exponential clocks are memoryless.

mod rng;
mod sim;

use std::fmt;
use std::str::FromStr;

pub use rng::SimRng;
pub use sim::{AuditReport, Simulation};

use crate::model::{CompiledModel, ModelError, ModelSchema, StateId};
use crate::network::MultilayerNetwork;
use crate::observables::{EventLog, LogHeader};
use crate::queue::{FlatSchedule, IndexedQueue, QueueError};

/// Rates within this distance below zero are rounding noise and clamp to 0.
pub const NEGATIVE_RATE_TOLERANCE: f64 = 1e-9;

/// Relative tolerance of the incremental-consistency audit.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// `auto` picks dense mode when the mean degree exceeds this fraction of N.
pub const DENSE_DEGREE_FRACTION: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("waiting time requested for non-positive rate {0}")]
    NonPositiveRate(f64),
    #[error("audit failed after {events} events: {report}")]
    Audit { events: u64, report: AuditReport },
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One node transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub node: u32,
    pub from: StateId,
    pub to: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialCondition {
    /// Explicit state for every node.
    States(Vec<StateId>),
    /// How many nodes start in each state; placement is a uniform random
    /// permutation drawn from the run's stream before any waiting time.
    Counts(Vec<usize>),
}

impl InitialCondition {
    /// Parses `NAME=COUNT,...`; nodes not covered start in the first state.
    pub fn parse_counts(spec: &str, schema: &ModelSchema, nodes: usize) -> Result<Self, SimError> {
        let mut counts = vec![0usize; schema.state_count()];
        for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
            let (name, count) = part
                .split_once('=')
                .ok_or_else(|| SimError::Config(format!("expected STATE=COUNT, got {part:?}")))?;
            let s = schema
                .state_index(name.trim())
                .ok_or_else(|| SimError::Config(format!("unknown state {name:?}")))?;
            counts[s] += count
                .trim()
                .parse::<usize>()
                .map_err(|_| SimError::Config(format!("bad count {count:?}")))?;
        }
        let placed: usize = counts.iter().sum();
        if placed > nodes {
            return Err(SimError::Config(format!(
                "initial counts total {placed} but the network has {nodes} nodes"
            )));
        }
        counts[0] += nodes - placed;
        Ok(InitialCondition::Counts(counts))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    AtLeast,
    AtMost,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopCondition {
    /// No event later than this time is emitted; the run ends at the horizon.
    MaxTime(f64),
    MaxEvents(u64),
    /// Run until no node can transition.
    Absorption,
    /// Stop as soon as the count of `state` compares to `threshold`.
    StateCount {
        state: usize,
        cmp: Comparison,
        threshold: usize,
    },
}

impl StopCondition {
    /// Parses `absorption`, `time:T`, `events:K`, `count:STATE>=K` or `count:STATE<=K`.
    pub fn parse(spec: &str, schema: &ModelSchema) -> Result<Self, SimError> {
        let bad = || SimError::Config(format!("bad stop condition {spec:?}"));
        let spec = spec.trim();
        if spec == "absorption" {
            return Ok(StopCondition::Absorption);
        }
        let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
        match kind {
            "time" => {
                let t: f64 = arg.parse().map_err(|_| bad())?;
                if !(t.is_finite() && t >= 0.0) {
                    return Err(bad());
                }
                Ok(StopCondition::MaxTime(t))
            }
            "events" => Ok(StopCondition::MaxEvents(arg.parse().map_err(|_| bad())?)),
            "count" => {
                let (name, cmp, k) = if let Some((a, b)) = arg.split_once(">=") {
                    (a, Comparison::AtLeast, b)
                } else if let Some((a, b)) = arg.split_once("<=") {
                    (a, Comparison::AtMost, b)
                } else {
                    return Err(bad());
                };
                let state = schema
                    .state_index(name.trim())
                    .ok_or_else(|| SimError::Config(format!("unknown state {name:?}")))?;
                Ok(StopCondition::StateCount {
                    state,
                    cmp,
                    threshold: k.trim().parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }

    pub(crate) fn count_reached(&self, counts: &[usize]) -> bool {
        match *self {
            StopCondition::StateCount {
                state,
                cmp,
                threshold,
            } => match cmp {
                Comparison::AtLeast => counts[state] >= threshold,
                Comparison::AtMost => counts[state] <= threshold,
            },
            _ => false,
        }
    }

    pub(crate) fn horizon(&self) -> Option<f64> {
        match *self {
            StopCondition::MaxTime(t) => Some(t),
            _ => None,
        }
    }
}

/// Why a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Absorbed,
    Horizon,
    MaxEvents,
    StateCount,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Absorbed => "absorbed",
            Termination::Horizon => "horizon",
            Termination::MaxEvents => "max_events",
            Termination::StateCount => "state_count",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absorbed" => Ok(Termination::Absorbed),
            "horizon" => Ok(Termination::Horizon),
            "max_events" => Ok(Termination::MaxEvents),
            "state_count" => Ok(Termination::StateCount),
            _ => Err(format!("unknown termination {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Indexed binary heap.
    Sparse,
    /// Flat time array with a linear-scan minimum.
    Dense,
    #[default]
    Auto,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sparse" => Ok(Mode::Sparse),
            "dense" => Ok(Mode::Dense),
            "auto" => Ok(Mode::Auto),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

/// Resolves `Auto` to dense when the mean degree over layers exceeds
/// `0.05 * N`; explicit requests are returned unchanged.
pub fn select_mode(net: &MultilayerNetwork, requested: Mode) -> Mode {
    match requested {
        Mode::Auto => {
            if net.mean_degree() > DENSE_DEGREE_FRACTION * net.node_count() as f64 {
                Mode::Dense
            } else {
                Mode::Sparse
            }
        }
        m => m,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub initial: InitialCondition,
    pub stop: StopCondition,
    pub seed: u64,
    /// Selects the random stream within `seed`; ensembles use the run number.
    pub run: u64,
    pub mode: Mode,
    /// Full from-scratch audit every `K` events; a violation aborts the run.
    pub audit_every: Option<u64>,
    /// Full recompute of influence and rates every `K` events.
    pub resync_every: Option<u64>,
}

impl RunConfig {
    pub fn new(initial: InitialCondition, stop: StopCondition, seed: u64) -> Self {
        Self {
            initial,
            stop,
            seed,
            run: 0,
            mode: Mode::Auto,
            audit_every: None,
            resync_every: None,
        }
    }

    pub fn with_run(mut self, run: u64) -> Self {
        self.run = run;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_audit_every(mut self, k: u64) -> Self {
        self.audit_every = Some(k);
        self
    }
}

/// A finished run: its event log and the final state of every node.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub log: EventLog,
    pub final_states: Vec<StateId>,
}

impl RunOutcome {
    pub fn termination(&self) -> Termination {
        self.log.header.termination
    }

    pub fn final_time(&self) -> f64 {
        self.log.header.final_time
    }

    pub fn final_counts(&self, state_count: usize) -> Vec<usize> {
        let mut counts = vec![0; state_count];
        for &s in &self.final_states {
            counts[s as usize] += 1;
        }
        counts
    }
}

/// Draws an `Exp(rate)` waiting time.
pub fn sample_waiting_time(rate: f64, rng: &mut SimRng) -> Result<f64, SimError> {
    if rate > 0.0 && rate.is_finite() {
        Ok(rng.exponential(rate))
    } else {
        Err(SimError::NonPositiveRate(rate))
    }
}

/// Total rate of node `i` from its state and per-layer influence row.
pub fn node_rate(
    model: &CompiledModel,
    states: &[StateId],
    influence_row: &[f64],
    i: usize,
) -> f64 {
    model.node_rate(states[i] as usize, influence_row)
}

/// Runs the event-driven engine to its stop condition.
pub fn run(model: &CompiledModel, cfg: &RunConfig) -> Result<RunOutcome, SimError> {
    match select_mode(model.network(), cfg.mode) {
        Mode::Dense => Simulation::<FlatSchedule>::new(model, cfg)?.run_to_end(),
        _ => Simulation::<IndexedQueue>::new(model, cfg)?.run_to_end(),
    }
}

/// Resolves the initial condition into a per-node state vector.
pub(crate) fn initial_states(
    model: &CompiledModel,
    initial: &InitialCondition,
    rng: &mut SimRng,
) -> Result<Vec<StateId>, SimError> {
    let n = model.node_count();
    let m = model.state_count();
    match initial {
        InitialCondition::States(states) => {
            if states.len() != n {
                return Err(SimError::Config(format!(
                    "initial state vector has {} entries for {n} nodes",
                    states.len()
                )));
            }
            if let Some(&bad) = states.iter().find(|&&s| s as usize >= m) {
                return Err(SimError::Config(format!(
                    "initial state {bad} out of range"
                )));
            }
            Ok(states.clone())
        }
        InitialCondition::Counts(counts) => {
            if counts.len() != m {
                return Err(SimError::Config(format!(
                    "{} initial counts for {m} states",
                    counts.len()
                )));
            }
            let total: usize = counts.iter().sum();
            if total != n {
                return Err(SimError::Config(format!(
                    "initial counts sum to {total}, expected {n}"
                )));
            }
            let mut order: Vec<u32> = (0..n as u32).collect();
            for i in (1..n).rev() {
                let j = rng.below(i + 1);
                order.swap(i, j);
            }
            let mut states = vec![0 as StateId; n];
            let mut cursor = 0;
            for (s, &c) in counts.iter().enumerate() {
                for &node in &order[cursor..cursor + c] {
                    states[node as usize] = s as StateId;
                }
                cursor += c;
            }
            Ok(states)
        }
    }
}

/// Influence sums and inducer-arc counts recomputed from the in-arcs of
/// every node, row-major `N × L`.
pub(crate) fn scratch_influence(model: &CompiledModel, states: &[StateId]) -> (Vec<f64>, Vec<u32>) {
    let n = states.len();
    let layers = model.layer_count();
    let mut influence = vec![0.0; n * layers];
    let mut inducers = vec![0u32; n * layers];
    for l in 0..layers {
        let q = model.inducer(l) as StateId;
        let g = model.network().layer(l);
        for i in 0..n {
            for (j, w) in g.in_row(i).iter() {
                if states[j] == q {
                    influence[i * layers + l] += w;
                    inducers[i * layers + l] += 1;
                }
            }
        }
    }
    (influence, inducers)
}

/// Wraps a finished trajectory into a [`RunOutcome`].
pub(crate) fn assemble_outcome(
    model: &CompiledModel,
    cfg: &RunConfig,
    initial: Vec<StateId>,
    records: Vec<EventRecord>,
    final_states: Vec<StateId>,
    final_time: f64,
    termination: Termination,
) -> RunOutcome {
    let header = LogHeader {
        nodes: model.node_count(),
        state_names: model.schema().state_names.clone(),
        seed: cfg.seed,
        run: cfg.run,
        model_digest: model.digest().to_string(),
        final_time,
        termination,
    };
    RunOutcome {
        log: EventLog {
            header,
            initial,
            records,
        },
        final_states,
    }
}

/// Picks an index with probability proportional to `weights`.
pub(crate) fn categorical(weights: &[f64], total: f64, u: f64) -> Option<usize> {
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}
