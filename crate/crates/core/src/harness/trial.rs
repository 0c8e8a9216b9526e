//! Experiment description and single Monte Carlo trials.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bamp::{anchor_ambiguity, run, run_observed, BampConfig, EstimateSet, SideInfo};
use crate::error::{Error, Result};
use crate::model::{scenario, ChannelSet, GenConfig, Observation, SignalFrame};

use super::baseline::baseline_bigamp_ls;
use super::metrics::{nmse, NmseTriple};

/// The parameter varied across sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb(Vec<f64>),
    PilotLen(Vec<usize>),
    AnchorRows(Vec<usize>),
    RisElements(Vec<usize>),
    Damping(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb(_) => "snr_db",
            SweepAxis::PilotLen(_) => "pilot_len",
            SweepAxis::AnchorRows(_) => "anchor_rows",
            SweepAxis::RisElements(_) => "ris_elements",
            SweepAxis::Damping(_) => "damping",
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sweep values as numbers, in order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::SnrDb(v) | SweepAxis::Damping(v) => v.clone(),
            SweepAxis::PilotLen(v) | SweepAxis::AnchorRows(v) | SweepAxis::RisElements(v) => {
                v.iter().map(|&n| n as f64).collect()
            }
        }
    }
}

/// Which receiver a trial evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    /// The two-layer estimator on the whole frame.
    Joint,
    /// Pilot-window channel estimation followed by least squares.
    Baseline,
}

/// Missing fields of a JSON spec take the values of [`ExperimentSpec::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub gen: GenConfig,
    pub bamp: BampConfig,
    pub sweep: SweepAxis,
    pub n_trials: usize,
    /// Trial `i` of every sweep point uses seed `base_seed + i`.
    pub base_seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    /// Desk scale, SNR 0 to 30 dB in 5 dB steps, 100 trials.
    fn default() -> Self {
        Self::desk((0..=6).map(|i| 5.0 * i as f64).collect(), 100)
    }
}

/// Resolved configuration of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub value: f64,
    pub gen: GenConfig,
    pub bamp: BampConfig,
}

impl ExperimentSpec {
    /// Desk-scale SNR sweep with matching priors.
    pub fn desk(snr_db: Vec<f64>, n_trials: usize) -> Self {
        Self {
            gen: GenConfig::desk(),
            bamp: BampConfig::desk(),
            sweep: SweepAxis::SnrDb(snr_db),
            n_trials,
            base_seed: 0,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        self.points().map(|_| ())
    }

    /// Generator and estimator configuration of every sweep point.
    pub fn points(&self) -> Result<Vec<PointConfig>> {
        let mut out = Vec::with_capacity(self.sweep.len());
        let values = self.sweep.values();
        for (i, &value) in values.iter().enumerate() {
            let mut gen = self.gen.clone();
            let mut bamp = self.bamp.clone();
            match &self.sweep {
                SweepAxis::SnrDb(v) => {
                    if v[i].is_nan() || v[i] == f64::NEG_INFINITY {
                        return Err(Error::config(format!("invalid SNR {}", v[i])));
                    }
                    gen.snr_db = v[i];
                }
                SweepAxis::PilotLen(v) => gen.dims.t_p = positive(v[i], "T_p")?,
                SweepAxis::AnchorRows(v) => gen.dims.k_p = positive(v[i], "K_p")?,
                SweepAxis::RisElements(v) => gen.dims.n = positive(v[i], "N")?,
                SweepAxis::Damping(v) => bamp.damping = v[i],
            }
            gen.validate()?;
            bamp.validate()?;
            out.push(PointConfig { value, gen, bamp });
        }
        Ok(out)
    }
}

fn positive(v: usize, name: &str) -> Result<usize> {
    if v == 0 {
        Err(Error::config(format!("{name} sweep values must be positive")))
    } else {
        Ok(v)
    }
}

/// NMSE reported for a trial that produced no estimate: the error of the
/// all-zero estimator.
pub const FAILED_TRIAL_NMSE_DB: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    /// dB; [`FAILED_TRIAL_NMSE_DB`] when `diverged`.
    pub nmse_b: f64,
    pub nmse_r: f64,
    pub nmse_x: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Seconds; the only field not determined by the seed.
    pub wall_time: f64,
    /// Reason the trial produced no estimate.
    #[serde(default)]
    pub error: Option<String>,
}

impl TrialResult {
    fn failed(seed: u64, iterations: usize, wall_time: f64, err: &Error) -> Self {
        Self {
            seed,
            nmse_b: FAILED_TRIAL_NMSE_DB,
            nmse_r: FAILED_TRIAL_NMSE_DB,
            nmse_x: FAILED_TRIAL_NMSE_DB,
            iterations,
            converged: false,
            diverged: true,
            wall_time,
            error: Some(err.to_string()),
        }
    }

    fn scored(seed: u64, est: &EstimateSet, m: NmseTriple, converged: bool, wall_time: f64) -> Self {
        Self {
            seed,
            nmse_b: m.b,
            nmse_r: m.r,
            nmse_x: m.x,
            iterations: est.iterations,
            converged,
            diverged: false,
            wall_time,
            error: None,
        }
    }

    /// Equality ignoring `wall_time`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { wall_time: 0.0, ..self.clone() } == Self { wall_time: 0.0, ..other.clone() }
    }
}

/// Ground truth and observation of one seed.
pub struct TrialData {
    pub ch: ChannelSet,
    pub sig: SignalFrame,
    pub obs: Observation,
    pub side: SideInfo,
}

pub fn trial_data(gen: &GenConfig, seed: u64) -> Result<TrialData> {
    let mut gen = gen.clone();
    gen.seed = seed;
    let (ch, sig, obs) = scenario(&gen)?;
    let side = SideInfo::from_truth(&ch, &sig, gen.dims.k_p);
    Ok(TrialData { ch, sig, obs, side })
}

/// Remove the scaling ambiguity when anchors and pilots are available.
pub fn align(est: &EstimateSet, side: &SideInfo) -> Result<EstimateSet> {
    if side.anchors.nrows() == 0 || side.pilots.ncols() == 0 {
        return Ok(est.clone());
    }
    anchor_ambiguity(est, &side.anchors, &side.phi, &side.pilots)
}

fn iteration_of(err: &Error) -> usize {
    match err {
        Error::Diverged { iteration, .. } => *iteration,
        _ => 0,
    }
}

/// Errors that end a trial as diverged rather than aborting the experiment.
fn is_trial_failure(err: &Error) -> bool {
    matches!(
        err,
        Error::Diverged { .. } | Error::DegenerateAnchor { .. } | Error::Degenerate(_) | Error::NonFinite(_) | Error::Svd(_)
    )
}

fn score(data: &TrialData, receiver: Receiver, cfg: &BampConfig, seed: u64) -> Result<TrialResult> {
    let start = Instant::now();
    let outcome = match receiver {
        Receiver::Joint => run(&data.obs, &data.side, cfg).and_then(|est| {
            let converged = est.converged;
            align(&est, &data.side).map(|a| (a, converged))
        }),
        Receiver::Baseline => baseline_bigamp_ls(&data.obs, &data.side, cfg).map(|out| {
            let converged = out.est.converged && !out.detection.underdetermined;
            (out.est, converged)
        }),
    };
    let elapsed = start.elapsed().as_secs_f64();
    match outcome {
        Ok((est, converged)) => {
            let m = nmse(&est, &data.ch, &data.sig)?;
            Ok(TrialResult::scored(seed, &est, m, converged, elapsed))
        }
        Err(e) if is_trial_failure(&e) => Ok(TrialResult::failed(seed, iteration_of(&e), elapsed, &e)),
        Err(e) => Err(e),
    }
}

/// Generate the scenario for `seed`, run `receiver`, align and score.
pub fn run_trial(gen: &GenConfig, cfg: &BampConfig, seed: u64, receiver: Receiver) -> Result<TrialResult> {
    let data = trial_data(gen, seed)?;
    score(&data, receiver, cfg, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTrial {
    pub joint: TrialResult,
    pub baseline: TrialResult,
}

/// Both receivers on the same observation.
pub fn run_paired_trial(gen: &GenConfig, cfg: &BampConfig, seed: u64) -> Result<PairedTrial> {
    let data = trial_data(gen, seed)?;
    Ok(PairedTrial {
        joint: score(&data, Receiver::Joint, cfg, seed)?,
        baseline: score(&data, Receiver::Baseline, cfg, seed)?,
    })
}

/// One line of the per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub layer: u8,
    pub residual: f64,
    pub nmse_x: f64,
    pub nmse_b: f64,
    pub nmse_r: f64,
}

/// [`run_trial`] for the joint receiver, recording the relative change of
/// each layer's output and the aligned NMSEs after every iteration.
///
/// Iterations whose state cannot be aligned report the unaligned NMSEs.
pub fn run_trial_traced(gen: &GenConfig, cfg: &BampConfig, seed: u64) -> Result<(TrialResult, Vec<TraceRow>)> {
    let data = trial_data(gen, seed)?;
    let mut rows = Vec::new();
    let mut trace_err: Option<Error> = None;
    let start = Instant::now();
    let res = run_observed(&data.obs, &data.side, cfg, |info| {
        if trace_err.is_some() {
            return;
        }
        let raw = EstimateSet::from_state(info.state, &data.side.phi);
        let est = align(&raw, &data.side).unwrap_or(raw);
        match nmse(&est, &data.ch, &data.sig) {
            Ok(m) => {
                for (layer, residual) in [(1u8, info.residual), (2u8, info.residual_layer2)] {
                    rows.push(TraceRow {
                        iter: info.iter,
                        layer,
                        residual,
                        nmse_x: m.x,
                        nmse_b: m.b,
                        nmse_r: m.r,
                    });
                }
            }
            Err(e) => trace_err = Some(e),
        }
    });
    if let Some(e) = trace_err {
        return Err(e);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let result = match res.and_then(|est| {
        let converged = est.converged;
        align(&est, &data.side).map(|a| (a, converged))
    }) {
        Ok((est, converged)) => {
            let m = nmse(&est, &data.ch, &data.sig)?;
            TrialResult::scored(seed, &est, m, converged, elapsed)
        }
        Err(e) if is_trial_failure(&e) => TrialResult::failed(seed, iteration_of(&e), elapsed, &e),
        Err(e) => return Err(e),
    };
    Ok((result, rows))
}
