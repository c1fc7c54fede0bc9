//! Cycle-level simulator of a torus-connected FPGA cluster: routing
//! fabric, communication endpoints, a process-network task runtime and the
//! YAML composition front end.

pub mod fabric;
pub mod node;
pub mod compose;
pub mod runtime;
