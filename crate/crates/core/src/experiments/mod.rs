//! Config-driven reproductions: memory curves, memory against input
//! correlation, NARMA10, Mackey-Glass prediction and the topology sweep.
//!
//! Instance `i` of a grid point uses seed `base_seed + i` for its input
//! weights, randomized links and input sequence, so results are identical
//! whatever the execution strategy.

pub mod config;
pub mod output;
pub mod runners;

pub use config::{default_ell_grid, load_config, ExperimentConfig, ExperimentKind};
pub use output::{aggregate, read_aggregate, read_raw, write_outputs, AggregateRow, ExperimentResult, Row, TraceRow, SCHEMA_VERSION};
pub use runners::{
    build_network, run_experiment, run_mackey_glass, run_memory_curve, run_memory_vs_alpha, run_narma10,
    run_topology_sweep, TaskOutcome,
};
