//! Monte Carlo sweeps and their aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::metrics::{from_db, to_db, NmseTriple};
use super::trial::{run_paired_trial, run_trial, ExperimentSpec, Receiver, TrialResult};

/// Mean and median NMSE (dB) over a set of trials. Means are taken in the
/// linear domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmseStats {
    pub mean: NmseTriple,
    pub median: NmseTriple,
}

impl NmseStats {
    fn of<'a>(trials: impl Iterator<Item = &'a TrialResult> + Clone) -> Option<Self> {
        let count = trials.clone().count();
        if count == 0 {
            return None;
        }
        let mean = |f: fn(&TrialResult) -> f64| {
            to_db(trials.clone().map(|t| from_db(f(t))).sum::<f64>() / count as f64)
        };
        let median = |f: fn(&TrialResult) -> f64| {
            let mut v: Vec<f64> = trials.clone().map(f).collect();
            v.sort_by(f64::total_cmp);
            if count % 2 == 1 {
                v[count / 2]
            } else {
                0.5 * (v[count / 2 - 1] + v[count / 2])
            }
        };
        Some(Self {
            mean: NmseTriple {
                b: mean(|t| t.nmse_b),
                r: mean(|t| t.nmse_r),
                x: mean(|t| t.nmse_x),
            },
            median: NmseTriple {
                b: median(|t| t.nmse_b),
                r: median(|t| t.nmse_r),
                x: median(|t| t.nmse_x),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub n_trials: usize,
    pub n_diverged: usize,
    pub divergence_rate: f64,
    /// Over trials that did not diverge; `None` when all diverged.
    pub excluding_diverged: Option<NmseStats>,
    /// Over all trials, diverged ones counted at the 0 dB sentinel.
    pub including_diverged: NmseStats,
    /// Sorted by seed.
    pub trials: Vec<TrialResult>,
}

impl SweepPoint {
    /// Aggregate `trials` (any order). Panics on an empty slice.
    pub fn aggregate(value: f64, mut trials: Vec<TrialResult>) -> Self {
        assert!(!trials.is_empty(), "sweep point without trials");
        trials.sort_by_key(|t| t.seed);
        let n_trials = trials.len();
        let n_diverged = trials.iter().filter(|t| t.diverged).count();
        let ok = trials.iter().filter(|t| !t.diverged);
        Self {
            value,
            n_trials,
            n_diverged,
            divergence_rate: n_diverged as f64 / n_trials as f64,
            excluding_diverged: NmseStats::of(ok),
            including_diverged: NmseStats::of(trials.iter()).expect("non-empty"),
            trials,
        }
    }

    /// Mean NMSE triple excluding diverged trials.
    pub fn mean(&self) -> Option<&NmseTriple> {
        self.excluding_diverged.as_ref().map(|s| &s.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub receiver: Receiver,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn any_diverged(&self) -> bool {
        self.points.iter().any(|p| p.n_diverged > 0)
    }
}

/// Joint receiver over every sweep point of `spec`.
pub fn monte_carlo(spec: &ExperimentSpec) -> Result<SweepResult> {
    monte_carlo_with(spec, Receiver::Joint)
}

pub fn monte_carlo_with(spec: &ExperimentSpec, receiver: Receiver) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec.points()?;
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..spec.n_trials as u64).map(move |i| (p, spec.base_seed + i)))
        .collect();
    let results: Vec<(usize, TrialResult)> = jobs
        .par_iter()
        .map(|&(p, seed)| run_trial(&points[p].gen, &points[p].bamp, seed, receiver).map(|r| (p, r)))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axis: spec.sweep.name().to_string(),
        receiver,
        points: group(&points.iter().map(|p| p.value).collect::<Vec<_>>(), results),
    })
}

/// Joint and baseline receivers on identical observations.
pub fn monte_carlo_paired(spec: &ExperimentSpec) -> Result<(SweepResult, SweepResult)> {
    spec.validate()?;
    let points = spec.points()?;
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..spec.n_trials as u64).map(move |i| (p, spec.base_seed + i)))
        .collect();
    let results: Vec<(usize, super::trial::PairedTrial)> = jobs
        .par_iter()
        .map(|&(p, seed)| run_paired_trial(&points[p].gen, &points[p].bamp, seed).map(|r| (p, r)))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    let (joint, baseline): (Vec<_>, Vec<_>) = results
        .into_iter()
        .map(|(p, r)| ((p, r.joint), (p, r.baseline)))
        .unzip();
    let axis = spec.sweep.name().to_string();
    Ok((
        SweepResult {
            axis: axis.clone(),
            receiver: Receiver::Joint,
            points: group(&values, joint),
        },
        SweepResult {
            axis,
            receiver: Receiver::Baseline,
            points: group(&values, baseline),
        },
    ))
}

fn group(values: &[f64], results: Vec<(usize, TrialResult)>) -> Vec<SweepPoint> {
    let mut buckets: Vec<Vec<TrialResult>> = vec![Vec::new(); values.len()];
    for (p, r) in results {
        buckets[p].push(r);
    }
    values
        .iter()
        .zip(buckets)
        .map(|(&v, trials)| SweepPoint::aggregate(v, trials))
        .collect()
}
