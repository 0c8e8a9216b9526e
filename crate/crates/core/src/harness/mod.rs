//! Monte Carlo experiments: metrics, trials, sweeps, the pilot-window
//! baseline and result files.

pub mod baseline;
pub mod emit;
pub mod fixtures;
pub mod metrics;
pub mod selftest;
pub mod sweep;
pub mod trial;

pub use baseline::{baseline_bigamp_ls, ls_detect, BaselineOutput, LsDetection};
pub use emit::{emit, read_sidecar, write_csv, write_trace, Emitted, Sidecar, CSV_HEADER};
pub use metrics::{nmse, nmse_db, per_entry_mse, EntryMse, NmseTriple, NMSE_FLOOR_DB};
pub use sweep::{monte_carlo, monte_carlo_paired, monte_carlo_with, NmseStats, SweepPoint, SweepResult};
pub use trial::{
    run_paired_trial, run_trial, run_trial_traced, ExperimentSpec, PairedTrial, Receiver, SweepAxis,
    TraceRow, TrialResult, FAILED_TRIAL_NMSE_DB,
};
