//! Conventional direct-method simulator used as statistical ground truth.
//!
//! Every event redraws a waiting time for every node with a positive rate,
//! takes the minimum, applies the sampled transition and recomputes all
//! influence sums and rates from scratch. Per-event cost is linear in the
//! network size; nothing is cached between events.

use crate::engine::{
    assemble_outcome, categorical, initial_states, scratch_influence, EventRecord, RunConfig,
    RunOutcome, SimError, SimRng, StopCondition, Termination,
};
use crate::model::{CompiledModel, StateId};

pub struct OracleSimulation<'m> {
    model: &'m CompiledModel,
    initial: Vec<StateId>,
    states: Vec<StateId>,
    influence: Vec<f64>,
    rates: Vec<f64>,
    counts: Vec<usize>,
    now: f64,
    events: u64,
    rng: SimRng,
    scratch: Vec<f64>,
    cfg: RunConfig,
}

impl<'m> OracleSimulation<'m> {
    /// Uses the same random stream and initial placement as the engine.
    pub fn new(model: &'m CompiledModel, cfg: &RunConfig) -> Result<Self, SimError> {
        let mut rng = SimRng::for_run(cfg.seed, cfg.run);
        let states = initial_states(model, &cfg.initial, &mut rng)?;
        let mut counts = vec![0usize; model.state_count()];
        for &s in &states {
            counts[s as usize] += 1;
        }
        let mut sim = Self {
            model,
            initial: states.clone(),
            states,
            influence: Vec::new(),
            rates: Vec::new(),
            counts,
            now: 0.0,
            events: 0,
            rng,
            scratch: Vec::new(),
            cfg: cfg.clone(),
        };
        sim.recompute();
        Ok(sim)
    }

    fn recompute(&mut self) {
        let layers = self.model.layer_count();
        self.influence = scratch_influence(self.model, &self.states).0;
        self.rates = (0..self.states.len())
            .map(|i| {
                self.model.node_rate(
                    self.states[i] as usize,
                    &self.influence[i * layers..(i + 1) * layers],
                )
            })
            .collect();
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Draws the next event without applying it: `(node, waiting time)`.
    fn race(&mut self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &rate) in self.rates.iter().enumerate() {
            if rate > 0.0 {
                let tau = self.rng.exponential(rate);
                if best.is_none_or(|(_, b)| tau < b) {
                    best = Some((i, tau));
                }
            }
        }
        best
    }

    fn apply(&mut self, node: usize, time: f64) -> EventRecord {
        let layers = self.model.layer_count();
        let old = self.states[node] as usize;
        let row = &self.influence[node * layers..(node + 1) * layers];
        let total = self.model.destination_rates(old, row, &mut self.scratch);
        let u = self.rng.uniform();
        let pick = categorical(&self.scratch, total, u).expect("winner has a positive rate");
        let new = self.model.outgoing(old)[pick].to as usize;
        self.states[node] = new as StateId;
        self.counts[old] -= 1;
        self.counts[new] += 1;
        self.now = time;
        self.events += 1;
        self.recompute();
        EventRecord {
            time,
            node: node as u32,
            from: old as StateId,
            to: new as StateId,
        }
    }

    /// One event, or `None` when every rate is zero.
    pub fn step(&mut self) -> Option<EventRecord> {
        let (node, tau) = self.race()?;
        let t = self.now + tau;
        Some(self.apply(node, t))
    }

    /// Runs to the configured stop condition with the engine's semantics.
    pub fn run_to_end(mut self) -> Result<RunOutcome, SimError> {
        let stop = self.cfg.stop;
        let mut records = Vec::new();
        let termination = loop {
            if stop.count_reached(&self.counts) {
                break Termination::StateCount;
            }
            if let StopCondition::MaxEvents(k) = stop {
                if self.events >= k {
                    break Termination::MaxEvents;
                }
            }
            let Some((node, tau)) = self.race() else {
                break Termination::Absorbed;
            };
            let t = self.now + tau;
            if let Some(h) = stop.horizon() {
                if t > h {
                    self.now = h;
                    break Termination::Horizon;
                }
            }
            records.push(self.apply(node, t));
        };
        Ok(assemble_outcome(
            self.model,
            &self.cfg,
            self.initial,
            records,
            self.states,
            self.now,
            termination,
        ))
    }
}

/// Runs the direct-method simulator; the counterpart of [`crate::engine::run`].
pub fn oracle_run(model: &CompiledModel, cfg: &RunConfig) -> Result<RunOutcome, SimError> {
    if let StopCondition::MaxTime(t) = cfg.stop {
        if !(t.is_finite() && t >= 0.0) {
            return Err(SimError::Config(format!("bad horizon {t}")));
        }
    }
    OracleSimulation::new(model, cfg)?.run_to_end()
}
