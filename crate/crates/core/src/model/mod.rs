//! Multi-compartment mechanistic models.
//!
//! A model has `M` states, a node-based rate matrix (transitions that happen
//! regardless of neighbors) and, per network layer, an edge-based rate matrix
//! scaled by the total weight of in-neighbors currently in that layer's
//! inducer state.

mod compiled;
mod config;
pub mod preset;

use std::collections::HashSet;
use std::fmt;

pub use compiled::{CompiledModel, LayerRelevance, Outgoing};
pub use config::{LayerConfig, ModelConfig, TransitionConfig};
pub use preset::Preset;

use crate::network::NetworkError;

/// State index; models are limited to `u16::MAX` compartments.
pub type StateId = u16;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(ValidationReport),
    #[error("model has {schema} mechanism layer(s) but the network has {network}")]
    LayerCountMismatch { schema: usize, network: usize },
    #[error("{0}")]
    Domain(String),
    #[error("model config: {0}")]
    Config(String),
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense square matrix of non-negative transition rates, row = from, col = to.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    size: usize,
    data: Vec<f64>,
}

impl RateMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.size + to]
    }

    pub fn set(&mut self, from: usize, to: usize, rate: f64) {
        assert!(
            from < self.size && to < self.size,
            "rate index out of range"
        );
        self.data[from * self.size + to] = rate;
    }

    pub fn with(mut self, from: usize, to: usize, rate: f64) -> Self {
        self.set(from, to, rate);
        self
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.size..(from + 1) * self.size]
    }

    pub fn row_sum(&self, from: usize) -> f64 {
        self.row(from).iter().sum()
    }

    pub fn row_nonzero(&self, from: usize) -> bool {
        self.row(from).iter().any(|&r| r != 0.0)
    }

    pub fn col_nonzero(&self, to: usize) -> bool {
        (0..self.size).any(|from| self.get(from, to) != 0.0)
    }
}

/// Edge-based transitions carried by one network layer.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMechanism {
    pub name: String,
    /// The single state whose occupants exert influence over this layer.
    pub inducer: usize,
    /// Rates per unit of inducing edge weight.
    pub rates: RateMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSchema {
    pub state_names: Vec<String>,
    pub node_rates: RateMatrix,
    pub layers: Vec<EdgeMechanism>,
}

impl ModelSchema {
    /// A schema with the given states and no transitions yet.
    pub fn new<S: Into<String>>(states: impl IntoIterator<Item = S>) -> Self {
        let state_names: Vec<String> = states.into_iter().map(Into::into).collect();
        let m = state_names.len();
        Self {
            state_names,
            node_rates: RateMatrix::zeros(m),
            layers: Vec::new(),
        }
    }

    pub fn with_node_rate(mut self, from: usize, to: usize, rate: f64) -> Self {
        self.node_rates.set(from, to, rate);
        self
    }

    /// Appends a mechanism layer with the given edge-based transitions.
    pub fn with_layer(
        mut self,
        name: impl Into<String>,
        inducer: usize,
        transitions: &[(usize, usize, f64)],
    ) -> Self {
        let mut rates = RateMatrix::zeros(self.state_count());
        for &(from, to, rate) in transitions {
            rates.set(from, to, rate);
        }
        self.layers.push(EdgeMechanism {
            name: name.into(),
            inducer,
            rates,
        });
        self
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|s| s == name)
    }

    /// Checks the structural prerequisites, collecting every violation.
    pub fn validate(&self) -> ValidationReport {
        let m = self.state_count();
        let mut violations = Vec::new();
        if m < 2 {
            violations.push(Violation::TooFewStates(m));
        }
        if m > StateId::MAX as usize {
            violations.push(Violation::TooManyStates(m));
        }
        let mut seen = HashSet::new();
        for name in &self.state_names {
            if !seen.insert(name.as_str()) {
                violations.push(Violation::DuplicateStateName(name.clone()));
            }
        }
        check_matrix(&self.node_rates, MatrixRef::Node, m, &mut violations);
        for (l, layer) in self.layers.iter().enumerate() {
            check_matrix(&layer.rates, MatrixRef::Layer(l), m, &mut violations);
            if layer.inducer >= m {
                violations.push(Violation::InducerOutOfRange {
                    layer: l,
                    inducer: layer.inducer,
                });
            }
        }
        ValidationReport { violations }
    }
}

fn check_matrix(mat: &RateMatrix, which: MatrixRef, m: usize, out: &mut Vec<Violation>) {
    if mat.size() != m {
        out.push(Violation::DimensionMismatch {
            matrix: which,
            found: mat.size(),
            expected: m,
        });
        return;
    }
    for from in 0..m {
        for to in 0..m {
            let r = mat.get(from, to);
            if !(r.is_finite() && r >= 0.0) {
                out.push(Violation::BadRate {
                    matrix: which,
                    from,
                    to,
                    value: r,
                });
            } else if from == to && r != 0.0 {
                out.push(Violation::NonzeroDiagonal {
                    matrix: which,
                    state: from,
                });
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixRef {
    Node,
    Layer(usize),
}

impl fmt::Display for MatrixRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixRef::Node => write!(f, "node rates"),
            MatrixRef::Layer(l) => write!(f, "layer {l} edge rates"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    TooFewStates(usize),
    TooManyStates(usize),
    DuplicateStateName(String),
    DimensionMismatch {
        matrix: MatrixRef,
        found: usize,
        expected: usize,
    },
    BadRate {
        matrix: MatrixRef,
        from: usize,
        to: usize,
        value: f64,
    },
    NonzeroDiagonal {
        matrix: MatrixRef,
        state: usize,
    },
    InducerOutOfRange {
        layer: usize,
        inducer: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewStates(m) => write!(f, "need at least 2 states, found {m}"),
            Violation::TooManyStates(m) => write!(f, "too many states ({m})"),
            Violation::DuplicateStateName(s) => write!(f, "duplicate state name {s:?}"),
            Violation::DimensionMismatch {
                matrix,
                found,
                expected,
            } => write!(
                f,
                "{matrix}: matrix is {found}x{found}, expected {expected}x{expected}"
            ),
            Violation::BadRate {
                matrix,
                from,
                to,
                value,
            } => write!(
                f,
                "{matrix}: rate ({from}->{to}) = {value} is negative or not finite"
            ),
            Violation::NonzeroDiagonal { matrix, state } => {
                write!(f, "{matrix}: nonzero diagonal at state {state}")
            }
            Violation::InducerOutOfRange { layer, inducer } => {
                write!(f, "layer {layer}: inducer out of range ({inducer})")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), ModelError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(ModelError::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Converts a per-step transition probability `p` of a discrete-time model
/// with step `dt` into the equivalent continuous-time rate `-ln(1 - p) / dt`.
pub fn dtmc_to_ctmc_rate(p: f64, dt: f64) -> Result<f64, ModelError> {
    if !(0.0..1.0).contains(&p) {
        return Err(ModelError::Domain(format!(
            "probability must lie in [0, 1), got {p}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ModelError::Domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    Ok(-(-p).ln_1p() / dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sis() -> ModelSchema {
        ModelSchema::new(["S", "I"])
            .with_node_rate(1, 0, 0.7)
            .with_layer("contact", 1, &[(0, 1, 0.5)])
    }

    #[test]
    fn sis_validates() {
        assert!(sis().validate().is_ok());
    }

    #[test]
    fn nonzero_diagonal_reported() {
        let report = sis().with_node_rate(0, 0, 0.1).validate();
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("nonzero diagonal"), "{report}");
    }

    #[test]
    fn inducer_out_of_range_reported() {
        let mut s = sis();
        s.layers[0].inducer = 2;
        let report = s.validate();
        assert!(
            report.to_string().contains("inducer out of range"),
            "{report}"
        );
    }

    #[test]
    fn violations_are_exhaustive() {
        let mut s = ModelSchema::new(["A", "A"])
            .with_node_rate(0, 1, -1.0)
            .with_layer("x", 5, &[(1, 0, f64::NAN), (1, 1, 2.0)]);
        s.layers.push(EdgeMechanism {
            name: "bad".into(),
            inducer: 0,
            rates: RateMatrix::zeros(3),
        });
        let report = s.validate();
        assert_eq!(report.violations.len(), 6, "{report}");
        assert!(ModelSchema::new(["only"])
            .validate()
            .violations
            .contains(&Violation::TooFewStates(1)));
        assert!(matches!(report.into_result(), Err(ModelError::Invalid(_))));
    }

    #[test]
    fn dtmc_conversion_values() {
        assert_eq!(dtmc_to_ctmc_rate(0.0, 1.0).unwrap(), 0.0);
        // -ln(0.99) = 0.010050335853501441...
        assert!((dtmc_to_ctmc_rate(0.01, 1.0).unwrap() - 0.010_050_335_853_501_44).abs() < 1e-17);
        // -ln(0.5)/2 = 0.34657359027997264...
        assert!((dtmc_to_ctmc_rate(0.5, 2.0).unwrap() - 0.346_573_590_279_972_64).abs() < 1e-16);
        for (p, dt) in [
            (1.0, 1.0),
            (-0.1, 1.0),
            (0.5, 0.0),
            (0.5, -1.0),
            (f64::NAN, 1.0),
        ] {
            assert!(
                matches!(dtmc_to_ctmc_rate(p, dt), Err(ModelError::Domain(_))),
                "{p} {dt}"
            );
        }
    }

    proptest! {
        #[test]
        fn dtmc_rate_round_trips(p in 0.0f64..0.999, dt in 1e-3f64..100.0) {
            let rate = dtmc_to_ctmc_rate(p, dt).unwrap();
            let back = -(-rate * dt).exp_m1();
            prop_assert!((back - p).abs() <= 1e-12 * p.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn dtmc_rate_monotone(a in 0.0f64..0.999, b in 0.0f64..0.999, dt in 0.01f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(dtmc_to_ctmc_rate(lo, dt).unwrap() <= dtmc_to_ctmc_rate(hi, dt).unwrap());
        }
    }
}
