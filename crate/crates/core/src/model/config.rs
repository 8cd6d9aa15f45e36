//! TOML model files.
//!
//! ```toml
//! states = ["S", "I", "R"]
//! node_transitions = [{ from = "I", to = "R", rate = 0.01 }]
//!
//! [[layers]]
//! name = "contact"
//! inducer = "I"
//! edge_transitions = [{ from = "S", to = "I", rate = 0.005 }]
//! network = "contact.txt"
//! directed = false
//! default_weight = 1.0
//! ```
//!
//! Network paths are resolved relative to the model file. Layers naming the
//! same file with the same flags share one in-memory graph.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ModelError, ModelSchema};
use crate::network::{load_edge_list, LayerGraph, MultilayerNetwork};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionConfig {
    pub from: String,
    pub to: String,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub name: String,
    pub inducer: String,
    #[serde(default)]
    pub edge_transitions: Vec<TransitionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub directed: bool,
    #[serde(default = "unit_weight")]
    pub default_weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub states: Vec<String>,
    #[serde(default)]
    pub node_transitions: Vec<TransitionConfig>,
    #[serde(default)]
    pub layers: Vec<LayerConfig>,
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model config always serializes")
    }

    /// Resolves state names and builds the validated schema.
    pub fn schema(&self) -> Result<ModelSchema, ModelError> {
        let mut schema = ModelSchema::new(self.states.iter().cloned());
        let index = |name: &str| {
            schema_index(&self.states, name).ok_or_else(|| ModelError::UnknownState(name.into()))
        };
        let mut seen = HashMap::new();
        for t in &self.node_transitions {
            let (from, to) = (index(&t.from)?, index(&t.to)?);
            if seen.insert((None, from, to), ()).is_some() {
                return Err(ModelError::Config(format!(
                    "node transition {}->{} listed twice",
                    t.from, t.to
                )));
            }
            schema.node_rates.set(from, to, t.rate);
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let inducer = index(&layer.inducer)?;
            let mut transitions = Vec::new();
            for t in &layer.edge_transitions {
                let (from, to) = (index(&t.from)?, index(&t.to)?);
                if seen.insert((Some(l), from, to), ()).is_some() {
                    return Err(ModelError::Config(format!(
                        "layer {:?}: edge transition {}->{} listed twice",
                        layer.name, t.from, t.to
                    )));
                }
                transitions.push((from, to, t.rate));
            }
            schema = schema.with_layer(layer.name.clone(), inducer, &transitions);
        }
        schema.validate().into_result()?;
        Ok(schema)
    }

    /// Loads every layer's edge list, relative to `base_dir`.
    pub fn load_network(&self, base_dir: &Path) -> Result<MultilayerNetwork, ModelError> {
        let mut cache: HashMap<(PathBuf, bool, u64), Arc<LayerGraph>> = HashMap::new();
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let rel = layer.network.as_ref().ok_or_else(|| {
                ModelError::Config(format!("layer {:?} has no network path", layer.name))
            })?;
            let path = base_dir.join(rel);
            let key = (path.clone(), layer.directed, layer.default_weight.to_bits());
            let graph = match cache.get(&key) {
                Some(g) => g.clone(),
                None => {
                    let g = Arc::new(load_edge_list(&path, layer.directed, layer.default_weight)?);
                    cache.insert(key, g.clone());
                    g
                }
            };
            layers.push(graph);
        }
        let n = layers.iter().map(|g| g.node_count()).max().unwrap_or(0);
        let mut padded: HashMap<*const LayerGraph, Arc<LayerGraph>> = HashMap::new();
        let layers = layers
            .into_iter()
            .map(|g| {
                if g.node_count() == n {
                    return Ok(g);
                }
                if let Some(p) = padded.get(&Arc::as_ptr(&g)) {
                    return Ok(p.clone());
                }
                let p = Arc::new(g.with_node_count(n)?);
                padded.insert(Arc::as_ptr(&g), p.clone());
                Ok(p)
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(MultilayerNetwork::new(layers)?)
    }
}

fn schema_index(states: &[String], name: &str) -> Option<usize> {
    states.iter().position(|s| s == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIR: &str = r#"
states = ["S", "I", "R"]
node_transitions = [{ from = "I", to = "R", rate = 0.01 }]

[[layers]]
name = "contact"
inducer = "I"
edge_transitions = [{ from = "S", to = "I", rate = 0.005 }]
network = "net.txt"
"#;

    #[test]
    fn parses_sir() {
        let cfg = ModelConfig::from_toml_str(SIR).unwrap();
        let schema = cfg.schema().unwrap();
        assert_eq!(schema, crate::model::preset::sir(0.005, 0.01).unwrap());
        assert_eq!(cfg.layers[0].default_weight, 1.0);
        assert!(!cfg.layers[0].directed);
        let again = ModelConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_states_and_fields() {
        let bad = SIR.replace("inducer = \"I\"", "inducer = \"X\"");
        assert!(matches!(
            ModelConfig::from_toml_str(&bad).unwrap().schema(),
            Err(ModelError::UnknownState(s)) if s == "X"
        ));
        let bad = SIR.replace("directed", "directd");
        assert!(ModelConfig::from_toml_str(&format!("{bad}\ndirectd = true")).is_err());
        let bad = SIR.replace("rate = 0.01", "rate = -0.01");
        assert!(matches!(
            ModelConfig::from_toml_str(&bad).unwrap().schema(),
            Err(ModelError::Invalid(_))
        ));
    }

    #[test]
    fn shared_network_files_load_once() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "0 1\n1 2\n").unwrap();
        std::fs::write(dir.path().join("b.txt"), "3 0 2.0\n").unwrap();
        let text = r#"
states = ["S", "A", "B"]
[[layers]]
name = "one"
inducer = "A"
edge_transitions = [{ from = "S", to = "A", rate = 1.0 }]
network = "a.txt"
[[layers]]
name = "two"
inducer = "B"
edge_transitions = [{ from = "S", to = "B", rate = 1.0 }]
network = "a.txt"
[[layers]]
name = "three"
inducer = "B"
network = "b.txt"
directed = true
"#;
        let cfg = ModelConfig::from_toml_str(text).unwrap();
        let net = cfg.load_network(dir.path()).unwrap();
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.layer_count(), 3);
        assert!(Arc::ptr_eq(&net.layers()[0], &net.layers()[1]));
        assert_eq!(net.layer(2).arc_count(), 1);
        assert_eq!(net.layer(0).arc_count(), 4);
    }
}
