//! Simulation toolkit for two spin ensembles coupled through a large
//! Josephson junction: entanglement generation, holonomic and dispersive
//! two-qubit gates, open-system dynamics, and gate-quality metrics, with a
//! deterministic experiment-runner CLI.

pub mod cli;
pub mod dynamics;
pub mod gates;
pub mod metrics;
pub mod model;
pub mod qcore;
