//! U(1)-symmetric collapse trees at finite qudit dimension.

pub mod critical;
pub mod gate;
pub mod node;
pub mod pool;
pub mod reference;
pub mod state;

pub use critical::{bracket, classify, estimate_critical, Bracket, Phase};
pub use gate::{BlockUnitary, ChargeLayout};
pub use node::{diagonal_node, node_collapse, node_conditional, NodeBranches, NodeOutcome};
pub use pool::{pool_evolve, pool_evolve_with, GenerationStats, PoolConfig, Protocol, Z_FLOOR};
pub use state::{QubitSummary, SiteState, StateKind, Summary};
