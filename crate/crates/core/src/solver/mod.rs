//! Verification layer: a d = 1 kinetic finite-volume solver and a particle
//! ensemble for the same dynamics, used to test certified decay envelopes
//! against direct simulation.

pub mod grid;
pub mod pde;
pub mod sde;

pub use grid::{GridCfg, PhaseGrid};
pub use pde::{
    initial_observable, richardson_budget, run_decay, step_pde, weak_dissipation_check,
    DecaySeries, DissipationAudit, InitKind, PdeCfg, Sample, Scratch, WindowedSeries,
};
pub use sde::{estimate_observable_decay, SdeCfg, SdeEnsemble};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("transport substep {dt} exceeds the Courant limit {limit}")]
    Courant { dt: f64, limit: f64 },
    #[error("run became unstable at t = {t}: {detail}")]
    Unstable { t: f64, detail: String },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}
