//! Imitating an expert from agent-level data: synthetic datasets,
//! Nadaraya–Watson estimators and interactive imitation with networks.

mod dataset;
mod interactive;
mod nw;

pub use dataset::{generate_dataset, simulate_agents, AgentRollout, ExpertDataset, DATASET_MAGIC};
pub use interactive::{interactive_il, IlConfig};
pub use nw::{nw_adaptive, nw_vanilla, KernelConfig};
