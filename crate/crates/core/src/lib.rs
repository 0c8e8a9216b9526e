//! Joint estimation of the cascaded channels and the transmitted signal of a
//! RIS-assisted MIMO link by two-layer bidirectional message passing.
//!
//! The crate is organised as
//! - [`model`]: system model, synthetic channels and observations;
//! - [`priors`]: scalar Gaussian-message algebra and denoisers;
//! - [`bamp`]: the estimator (BAMP/BUTAMP), ambiguity removal and the
//!   pilot-only stage;
//! - [`harness`]: metrics, Monte Carlo trials, sweeps, the BiG-AMP+LS
//!   baseline and result files.

pub mod bamp;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod priors;

pub use bamp::{
    anchor_ambiguity, bilinear_pilot_stage, run, run_observed, BampConfig, EstimateSet, PriorSet,
    Scheme, SideInfo, XDenoising,
};
pub use error::{Error, Result};
pub use harness::{
    monte_carlo, monte_carlo_paired, run_trial, ExperimentSpec, Receiver, SweepAxis, SweepResult,
    TrialResult,
};
pub use model::{
    scenario, simulate, ChannelMode, ChannelSet, GenConfig, Observation, SignalFrame, SignalPrior,
    SystemDims,
};
pub use priors::{denoise, ep_extrinsic, gauss_combine, GaussianMsg, PriorKind, PriorSpec, Variable};
