use std::fmt::Write as _;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{ModelError, ModelSchema, StateId};
use crate::network::MultilayerNetwork;

/// One possible destination from a given state.
#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub to: StateId,
    pub node_rate: f64,
    /// `(layer, rate per unit inducing weight)` for every layer that can cause it.
    pub edge_rates: Vec<(usize, f64)>,
}

/// States touched by a layer's edge-based matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LayerRelevance {
    /// States with a nonzero row: their rate depends on this layer's influence.
    pub sources: Vec<usize>,
    /// States with a nonzero column: reachable through this layer.
    pub targets: Vec<usize>,
}

/// A validated schema bound to a network, with the lookup tables the
/// simulators need on every event.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    schema: ModelSchema,
    network: Arc<MultilayerNetwork>,
    node_exit: Vec<f64>,
    /// `edge_exit[l * M + s]`: row sum of layer `l`'s matrix at state `s`.
    edge_exit: Vec<f64>,
    can_exit: Vec<bool>,
    outgoing: Vec<Vec<Outgoing>>,
    layers_by_inducer: Vec<Vec<usize>>,
    relevance: Vec<LayerRelevance>,
    digest: String,
}

impl CompiledModel {
    pub fn compile(
        schema: ModelSchema,
        network: impl Into<Arc<MultilayerNetwork>>,
    ) -> Result<Self, ModelError> {
        let network = network.into();
        schema.validate().into_result()?;
        if schema.layer_count() != network.layer_count() {
            return Err(ModelError::LayerCountMismatch {
                schema: schema.layer_count(),
                network: network.layer_count(),
            });
        }
        let m = schema.state_count();
        let layers = schema.layer_count();

        let node_exit: Vec<f64> = (0..m).map(|s| schema.node_rates.row_sum(s)).collect();
        let mut edge_exit = vec![0.0; layers * m];
        for (l, mech) in schema.layers.iter().enumerate() {
            for s in 0..m {
                edge_exit[l * m + s] = mech.rates.row_sum(s);
            }
        }
        let can_exit = (0..m)
            .map(|s| node_exit[s] > 0.0 || (0..layers).any(|l| edge_exit[l * m + s] > 0.0))
            .collect();

        let outgoing = (0..m)
            .map(|from| {
                (0..m)
                    .filter_map(|to| {
                        let node_rate = schema.node_rates.get(from, to);
                        let edge_rates: Vec<(usize, f64)> = schema
                            .layers
                            .iter()
                            .enumerate()
                            .map(|(l, mech)| (l, mech.rates.get(from, to)))
                            .filter(|&(_, r)| r != 0.0)
                            .collect();
                        (node_rate != 0.0 || !edge_rates.is_empty()).then_some(Outgoing {
                            to: to as StateId,
                            node_rate,
                            edge_rates,
                        })
                    })
                    .collect()
            })
            .collect();

        let mut layers_by_inducer = vec![Vec::new(); m];
        for (l, mech) in schema.layers.iter().enumerate() {
            layers_by_inducer[mech.inducer].push(l);
        }

        let relevance = schema
            .layers
            .iter()
            .map(|mech| LayerRelevance {
                sources: (0..m).filter(|&s| mech.rates.row_nonzero(s)).collect(),
                targets: (0..m).filter(|&s| mech.rates.col_nonzero(s)).collect(),
            })
            .collect();

        let digest = schema_digest(&schema);
        Ok(Self {
            schema,
            network,
            node_exit,
            edge_exit,
            can_exit,
            outgoing,
            layers_by_inducer,
            relevance,
            digest,
        })
    }

    pub fn schema(&self) -> &ModelSchema {
        &self.schema
    }

    pub fn network(&self) -> &MultilayerNetwork {
        &self.network
    }

    pub fn network_arc(&self) -> &Arc<MultilayerNetwork> {
        &self.network
    }

    pub fn node_count(&self) -> usize {
        self.network.node_count()
    }

    pub fn state_count(&self) -> usize {
        self.node_exit.len()
    }

    pub fn layer_count(&self) -> usize {
        self.schema.layers.len()
    }

    pub fn inducer(&self, layer: usize) -> usize {
        self.schema.layers[layer].inducer
    }

    /// Total node-based exit rate of `state`.
    #[inline]
    pub fn node_exit(&self, state: usize) -> f64 {
        self.node_exit[state]
    }

    /// Total edge-based exit rate of `state` on `layer` per unit inducing weight.
    #[inline]
    pub fn edge_exit(&self, layer: usize, state: usize) -> f64 {
        self.edge_exit[layer * self.node_exit.len() + state]
    }

    /// Whether a node in `state` has any outgoing transition at all.
    pub fn can_exit(&self, state: usize) -> bool {
        self.can_exit[state]
    }

    pub fn outgoing(&self, state: usize) -> &[Outgoing] {
        &self.outgoing[state]
    }

    /// Layers whose inducer is `state`, in increasing order.
    #[inline]
    pub fn layers_induced_by(&self, state: usize) -> &[usize] {
        &self.layers_by_inducer[state]
    }

    pub fn relevance(&self, layer: usize) -> &LayerRelevance {
        &self.relevance[layer]
    }

    /// Hex SHA-256 of the schema's canonical text form.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Total transition rate of a node in `state` whose per-layer inducing
    /// weights are `influence` (one entry per layer).
    #[inline]
    pub fn node_rate(&self, state: usize, influence: &[f64]) -> f64 {
        let m = self.node_exit.len();
        let mut rate = self.node_exit[state];
        for (l, &w) in influence.iter().enumerate() {
            let e = self.edge_exit[l * m + state];
            if e != 0.0 {
                rate += e * w;
            }
        }
        rate
    }

    /// Per-destination rates for a node in `state`, written into `out` in the
    /// order of [`Self::outgoing`]. Returns their sum.
    pub fn destination_rates(&self, state: usize, influence: &[f64], out: &mut Vec<f64>) -> f64 {
        out.clear();
        let mut total = 0.0;
        for o in &self.outgoing[state] {
            let mut r = o.node_rate;
            for &(l, b) in &o.edge_rates {
                r += b * influence[l];
            }
            out.push(r);
            total += r;
        }
        total
    }
}

fn schema_digest(schema: &ModelSchema) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "states={}", schema.state_names.join(","));
    let m = schema.state_count();
    let mut dump = |label: &str, mat: &super::RateMatrix| {
        let _ = write!(text, "{label}:");
        for from in 0..m {
            for to in 0..m {
                let _ = write!(text, "{:?},", mat.get(from, to));
            }
        }
        text.push('\n');
    };
    dump("node", &schema.node_rates);
    for mech in &schema.layers {
        dump(
            &format!("layer[{}|{}]", mech.name, mech.inducer),
            &mech.rates,
        );
    }
    hex::encode(Sha256::digest(text.as_bytes()))
}
