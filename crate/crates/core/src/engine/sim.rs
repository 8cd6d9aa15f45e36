use std::fmt;

use super::{
    assemble_outcome, categorical, initial_states, scratch_influence, EventRecord, RunConfig,
    RunOutcome, SimError, SimRng, StopCondition, Termination, AUDIT_TOLERANCE,
    NEGATIVE_RATE_TOLERANCE,
};
use crate::model::{CompiledModel, StateId};
use crate::queue::Schedule;

/// Live state of one run.
///
/// `influence[i * L + l]` is the total weight of in-arcs into `i` on layer
/// `l` from nodes in that layer's inducer state; `inducers` counts those arcs
/// so the sum can be reset to exactly zero when the last one leaves.
pub struct Simulation<'m, Q: Schedule> {
    model: &'m CompiledModel,
    layers: usize,
    initial: Vec<StateId>,
    states: Vec<StateId>,
    influence: Vec<f64>,
    inducers: Vec<u32>,
    rates: Vec<f64>,
    queue: Q,
    now: f64,
    events: u64,
    counts: Vec<usize>,
    rng: SimRng,
    scratch: Vec<f64>,
    /// Neighbors rescheduled by the latest event.
    rescheduled: Vec<usize>,
    stop: StopCondition,
    cfg: RunConfig,
    audit_every: Option<u64>,
    resync_every: Option<u64>,
}

impl<'m, Q: Schedule> Simulation<'m, Q> {
    /// Sets the initial states, computes influence and rates from scratch,
    /// and schedules every node with a positive rate at `Exp(rate)`.
    pub fn new(model: &'m CompiledModel, cfg: &RunConfig) -> Result<Self, SimError> {
        if let StopCondition::MaxTime(t) = cfg.stop {
            if !(t.is_finite() && t >= 0.0) {
                return Err(SimError::Config(format!("bad horizon {t}")));
            }
        }
        let n = model.node_count();
        let layers = model.layer_count();
        let mut rng = SimRng::for_run(cfg.seed, cfg.run);
        let states = initial_states(model, &cfg.initial, &mut rng)?;
        let mut counts = vec![0usize; model.state_count()];
        for &s in &states {
            counts[s as usize] += 1;
        }
        let mut sim = Self {
            model,
            layers,
            initial: states.clone(),
            states,
            influence: vec![0.0; n * layers],
            inducers: vec![0; n * layers],
            rates: vec![0.0; n],
            queue: Q::with_capacity(n),
            now: 0.0,
            events: 0,
            counts,
            rng,
            scratch: Vec::new(),
            rescheduled: Vec::new(),
            stop: cfg.stop,
            cfg: cfg.clone(),
            audit_every: cfg.audit_every.filter(|&k| k > 0),
            resync_every: cfg.resync_every.filter(|&k| k > 0),
        };
        // Influence is pushed out from the current inducers, visiting sources
        // in increasing id order; the audit sums in-arcs in the same order.
        for l in 0..layers {
            let q = model.inducer(l) as StateId;
            let g = model.network().layer(l);
            for i in 0..n {
                if sim.states[i] != q {
                    continue;
                }
                for (j, w) in g.out_row(i).iter() {
                    sim.influence[j * layers + l] += w;
                    sim.inducers[j * layers + l] += 1;
                }
            }
        }
        for i in 0..n {
            let rate = model.node_rate(sim.states[i] as usize, sim.influence_row(i));
            sim.rates[i] = rate;
            if rate > 0.0 {
                let t = sim.rng.exponential(rate);
                sim.queue.push(i, t)?;
            }
        }
        Ok(sim)
    }

    pub fn model(&self) -> &CompiledModel {
        self.model
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn influence_row(&self, node: usize) -> &[f64] {
        &self.influence[node * self.layers..(node + 1) * self.layers]
    }

    pub fn queue(&self) -> &Q {
        &self.queue
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    /// Performs one event. Returns `None` once nothing can transition.
    pub fn step(&mut self) -> Result<Option<EventRecord>, SimError> {
        let Some((node, t)) = self.queue.pop_min() else {
            return Ok(None);
        };
        self.now = t;
        let old = self.states[node] as usize;
        let base = node * self.layers;
        let row = &self.influence[base..base + self.layers];

        let total = self.model.destination_rates(old, row, &mut self.scratch);
        if !(total > 0.0) {
            return Err(SimError::Consistency(format!(
                "node {node} popped with total rate {total}"
            )));
        }
        let u = self.rng.uniform();
        let pick =
            categorical(&self.scratch, total, u).expect("positive total has a positive entry");
        let new = self.model.outgoing(old)[pick].to as usize;

        self.states[node] = new as StateId;
        self.counts[old] -= 1;
        self.counts[new] += 1;

        let rate = self.model.node_rate(new, row);
        self.rates[node] = rate;
        if rate > 0.0 {
            let next = t + self.rng.exponential(rate);
            self.queue.push(node, next)?;
        }
        self.cautious_update(node, old, new)?;
        self.events += 1;
        Ok(Some(EventRecord {
            time: t,
            node: node as u32,
            from: old as StateId,
            to: new as StateId,
        }))
    }

    /// Propagates a transition `old → new` of `node` to its out-neighbors on
    /// every layer induced by `old` or `new`.
    ///
    /// Influence sums are kept exact for every neighbor. Rates and schedule
    /// entries change only for neighbors whose current state has a nonzero
    /// edge-based row on that layer. Neighbors are visited in increasing
    /// `(layer, node)` order, which fixes the order of random draws.
    fn cautious_update(
        &mut self,
        node: usize,
        old: usize,
        new: usize,
    ) -> Result<&[usize], SimError> {
        let mut touched = std::mem::take(&mut self.rescheduled);
        touched.clear();
        let from_old = self.model.layers_induced_by(old);
        let from_new = self.model.layers_induced_by(new);
        let (mut a, mut b) = (0, 0);
        while a < from_old.len() || b < from_new.len() {
            let (layer, gain) = match (from_old.get(a), from_new.get(b)) {
                (Some(&x), Some(&y)) if x < y => {
                    a += 1;
                    (x, false)
                }
                (Some(_), Some(&y)) => {
                    b += 1;
                    (y, true)
                }
                (Some(&x), None) => {
                    a += 1;
                    (x, false)
                }
                (None, Some(&y)) => {
                    b += 1;
                    (y, true)
                }
                (None, None) => unreachable!(),
            };
            self.update_layer(node, layer, gain, &mut touched)?;
        }
        self.rescheduled = touched;
        Ok(&self.rescheduled)
    }

    fn update_layer(
        &mut self,
        node: usize,
        layer: usize,
        gain: bool,
        touched: &mut Vec<usize>,
    ) -> Result<(), SimError> {
        let layers = self.layers;
        let model = self.model;
        let sign = if gain { 1.0 } else { -1.0 };
        let row = model.network().layer(layer).out_row(node);
        for (&j, &w) in row.ids.iter().zip(row.weights) {
            let j = j as usize;
            let idx = j * layers + layer;
            let emptied = if gain {
                self.inducers[idx] += 1;
                self.influence[idx] += w;
                false
            } else {
                self.inducers[idx] -= 1;
                if self.inducers[idx] == 0 {
                    self.influence[idx] = 0.0;
                    true
                } else {
                    self.influence[idx] -= w;
                    false
                }
            };
            let state = self.states[j] as usize;
            let exit = model.edge_exit(layer, state);
            if exit == 0.0 {
                continue;
            }
            let mut rate = if emptied {
                model.node_rate(state, &self.influence[j * layers..(j + 1) * layers])
            } else {
                self.rates[j] + sign * w * exit
            };
            if rate < 0.0 {
                if rate < -NEGATIVE_RATE_TOLERANCE {
                    return Err(SimError::Consistency(format!(
                        "rate of node {j} fell to {rate}"
                    )));
                }
                rate = 0.0;
            }
            self.rates[j] = rate;
            if rate > 0.0 {
                let t = self.now + self.rng.exponential(rate);
                self.queue.schedule(j, t)?;
            } else {
                self.queue.unschedule(j)?;
            }
            touched.push(j);
        }
        Ok(())
    }

    /// Steps until the stop condition or absorption, collecting the log.
    pub fn run_to_end(mut self) -> Result<RunOutcome, SimError> {
        let mut records = Vec::new();
        let termination = self.advance(|r| records.push(r))?;
        Ok(self.finish(records, termination))
    }

    /// Steps until the stop condition or absorption, handing each event to `sink`.
    pub fn advance<F: FnMut(EventRecord)>(&mut self, mut sink: F) -> Result<Termination, SimError> {
        loop {
            if self.stop.count_reached(&self.counts) {
                return Ok(Termination::StateCount);
            }
            if let StopCondition::MaxEvents(k) = self.stop {
                if self.events >= k {
                    return Ok(Termination::MaxEvents);
                }
            }
            match (self.queue.peek_min(), self.stop.horizon()) {
                (None, _) => return Ok(Termination::Absorbed),
                (Some((_, t)), Some(h)) if t > h => {
                    self.now = h;
                    return Ok(Termination::Horizon);
                }
                _ => {}
            }
            let record = self.step()?.expect("peeked a scheduled node");
            sink(record);
            if let Some(k) = self.resync_every {
                if self.events.is_multiple_of(k) {
                    self.resync()?;
                }
            }
            if let Some(k) = self.audit_every {
                if self.events.is_multiple_of(k) {
                    let report = self.audit();
                    if !report.is_clean() {
                        return Err(SimError::Audit {
                            events: self.events,
                            report,
                        });
                    }
                }
            }
        }
    }

    /// Packages the run so far into an outcome.
    pub fn finish(self, records: Vec<EventRecord>, termination: Termination) -> RunOutcome {
        let final_time = match termination {
            Termination::Horizon => self.stop.horizon().unwrap_or(self.now),
            _ => self.now,
        };
        assemble_outcome(
            self.model,
            &self.cfg,
            self.initial,
            records,
            self.states,
            final_time,
            termination,
        )
    }

    /// Recomputes influence and rates from scratch and compares them with the
    /// incrementally maintained values.
    pub fn audit(&self) -> AuditReport {
        let (influence, inducers) = scratch_influence(self.model, &self.states);
        let mut report = AuditReport::default();
        let layers = self.layers;
        for i in 0..self.states.len() {
            for l in 0..layers {
                let idx = i * layers + l;
                if inducers[idx] != self.inducers[idx]
                    || !close(influence[idx], self.influence[idx])
                {
                    report.influence_mismatches += 1;
                    report.note(format!(
                        "influence[{i},{l}] = {} (maintained {})",
                        influence[idx], self.influence[idx]
                    ));
                }
            }
            let rate = self.model.node_rate(
                self.states[i] as usize,
                &influence[i * layers..(i + 1) * layers],
            );
            if !close(rate, self.rates[i]) {
                report.rate_mismatches += 1;
                report.note(format!("rate[{i}] = {rate} (maintained {})", self.rates[i]));
            }
            if self.queue.contains(i) != (rate > 0.0)
                || self.queue.contains(i) != (self.rates[i] > 0.0)
            {
                report.membership_mismatches += 1;
                report.note(format!(
                    "node {i}: scheduled = {}, rate = {rate}",
                    self.queue.contains(i)
                ));
            }
        }
        let mut counts = vec![0usize; self.counts.len()];
        for &s in &self.states {
            counts[s as usize] += 1;
        }
        if counts != self.counts {
            report.count_mismatches += 1;
            report.note(format!(
                "state counts {counts:?} (maintained {:?})",
                self.counts
            ));
        }
        report
    }

    /// Replaces the maintained influence and rates with a fresh computation.
    /// Nodes whose rate changed are redrawn from the current time.
    pub fn resync(&mut self) -> Result<(), SimError> {
        let (influence, inducers) = scratch_influence(self.model, &self.states);
        self.influence = influence;
        self.inducers = inducers;
        for i in 0..self.states.len() {
            let rate = self
                .model
                .node_rate(self.states[i] as usize, self.influence_row(i));
            if rate.to_bits() == self.rates[i].to_bits() && self.queue.contains(i) == (rate > 0.0) {
                continue;
            }
            self.rates[i] = rate;
            if rate > 0.0 {
                let t = self.now + self.rng.exponential(rate);
                self.queue.schedule(i, t)?;
            } else {
                self.queue.unschedule(i)?;
            }
        }
        Ok(())
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= AUDIT_TOLERANCE * a.abs().max(b.abs())
}

/// Result of comparing maintained values with a from-scratch recomputation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub influence_mismatches: usize,
    pub rate_mismatches: usize,
    pub membership_mismatches: usize,
    pub count_mismatches: usize,
    /// The first few mismatches, for diagnostics.
    pub details: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.total() == 0
    }

    pub fn total(&self) -> usize {
        self.influence_mismatches
            + self.rate_mismatches
            + self.membership_mismatches
            + self.count_mismatches
    }

    fn note(&mut self, msg: String) {
        if self.details.len() < 8 {
            self.details.push(msg);
        }
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} influence, {} rate, {} membership, {} count mismatches",
            self.influence_mismatches,
            self.rate_mismatches,
            self.membership_mismatches,
            self.count_mismatches
        )?;
        for d in &self.details {
            write!(f, "; {d}")?;
        }
        Ok(())
    }
}
