//! Deterministic discrete-event simulator for TSCH mesh networks.
//!
//! Nodes hop channels slot by slot, build an RPL DODAG paced by trickle
//! timers, and derive their TSCH schedule either from Orchestra's autonomous
//! rules or from the single shared cell of the 6TiSCH minimal schedule.

pub mod energy;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod mac;
pub mod medium;
pub mod network;
pub mod rpl;
pub mod scheduling;
pub mod trace;

pub type NodeId = u32;

pub use error::{ConfigError, SimError};
pub use experiment::{
    compare, compare_to_dir, detect_steady, run, run_to_dir, CompareOutput, Comparison, RunOutput,
    RunReport, Scenario, SchedulerKind, SteadyCriterion, SteadyInput,
};
pub use kernel::SimTime;
pub use network::{Network, NetworkConfig, NodeSpec, Role};
