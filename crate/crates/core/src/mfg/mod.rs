//! Distributions, policies, mean-field propagation and values.

mod flow;
mod model;
mod noise;
mod policy;
mod simplex;
mod value;

pub use flow::{
    deviation_flow, mean_field_step, population_flow, state_action_dist, step_into,
    FlowTrajectory,
};
pub use model::{check_dims, MfgModel};
pub use noise::{NoisePath, NoiseSymbol};
pub use policy::{AdaptiveGrid, KernelNw, Policy, VanillaTabular};
pub use simplex::{l1_distance, Simplex, StateActionDist, MASS_ABORT_TOL, MASS_RENORM_TOL};
pub use value::{
    exploitability, exploitability_against, sample_paths, value, value_on_paths, BestResponse,
    Estimate, Exploitability,
};
pub(crate) use flow::{deviation_fields_raw, population_fields};
pub(crate) use policy::locate_on_grid;
