//! Equilibrium computation: grid backward induction and Mann iteration for
//! the two-state model, fictitious play with neural best responses and flow
//! distillation for the larger environments.

mod fp;
mod grid;

pub use fp::{
    fictitious_play, mf_il_distill, nn_best_response, train_best_response, FpConfig, FpState,
    NnBestResponse, NnTrainConfig, NoiseBank, TrainReport,
};
pub use grid::{
    backward_induction, backward_induction_br, mann_iteration, GridBestResponse, GridValueTable,
    MeanFieldGrid,
};
