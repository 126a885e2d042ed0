//! Functional simulator for a spiking-transformer processing-in-memory
//! accelerator.

pub mod experiment;
pub mod hw_cost;
pub mod io;
pub mod optimizer;
pub mod pruning;
pub mod sdt;
pub mod spike;
