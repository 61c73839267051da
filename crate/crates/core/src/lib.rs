//! Passive linear quantum networks: SLH composition, state-space analysis,
//! pulse synthesis and single-photon memory simulation.

pub mod error;
pub mod linalg;
pub mod linear;
pub mod memory;
pub mod netdsl;
pub mod pulse;
pub mod sim;
pub mod slh;

pub use error::{Error, Result};
pub use linear::{analyze, dfs_decompose, rotate, to_state_space, StateSpace};
pub use memory::{qubit_config, qudit_config, MemorySpec, Mirror, Routing};
pub use pulse::{overlap, Grid, Pulse};
pub use sim::{coherent_run, mismatch_sweep, propagate, run_protocol, ProtocolResult, ProtocolTimes};
pub use slh::{feedback_reduce, parallel_sum, series, AdjacencyMap, SlhModel};
