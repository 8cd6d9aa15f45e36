//! Exact event-driven simulation of multi-compartment spreading processes on
//! weighted, directed, multilayer networks.
//!
//! A [`ModelSchema`] lists the compartments, the node-level transition rates
//! and, per layer, an inducer compartment with edge-level rates. It is
//! compiled against a [`MultilayerNetwork`] and simulated either by the
//! event-driven [`engine`] or by the direct-method [`oracle`]. Both produce an
//! [`EventLog`] that [`observables`] turns into time series and ensembles.
//!
//! ```
//! use spreadsim::{engine, generate, preset, CompiledModel, GeneratorKind, InitialCondition,
//!     MultilayerNetwork, RunConfig, StopCondition};
//!
//! let g = generate(GeneratorKind::ErdosRenyi { p: 0.1 }, 200, 1).unwrap();
//! let model = CompiledModel::compile(preset::sir(0.3, 0.1).unwrap(), MultilayerNetwork::single(g)).unwrap();
//! let cfg = RunConfig::new(InitialCondition::Counts(vec![195, 5, 0]), StopCondition::Absorption, 42);
//! let out = engine::run(&model, &cfg).unwrap();
//! assert_eq!(out.final_counts(3)[1], 0);
//! ```

// Comparisons like `!(x > 0.0)` are meant to catch NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod model;
pub mod network;
pub mod observables;
pub mod oracle;
pub mod queue;

pub use engine::{
    EventRecord, InitialCondition, Mode, RunConfig, RunOutcome, SimError, StopCondition,
    Termination,
};
pub use model::{preset, CompiledModel, ModelConfig, ModelError, ModelSchema, StateId};
pub use network::{generate, GeneratorKind, LayerGraph, MultilayerNetwork, NetworkError, NodeId};
pub use observables::{
    counts_on_grid, ensemble_mean, uniform_grid, EnsembleAccumulator, EnsembleSeries, EventLog,
    TimeSeries,
};
pub use oracle::oracle_run;
pub use queue::{FlatSchedule, IndexedQueue, Schedule};
