//! Recovery of the spatial factor `f` of a separated source `f R` from the
//! single snapshot `u(., t0)`, and the empirical stability experiment.

pub mod basis;
pub mod experiment;
pub mod model;
pub mod observation;
pub mod reconstruct;

pub use basis::HatBasis;
pub use experiment::{error_h2, fit_line, h4, stability_experiment, white_noise, LogLogFit, NOISELESS_ALPHA, synthetic_data, ExperimentOptions, StabilityExperimentReport, TrialRecord};
pub use model::{ForwardModel, SpaceFn, SpaceTimeFn};
pub use observation::{r_min_on_region, ObservationMap};
pub use reconstruct::{data_norm, reconstruct, reconstruct_with, Regularizer, DEFAULT_TAU, AlphaChoice, DiscrepancyStatus, Method, ReconstructionResult};
