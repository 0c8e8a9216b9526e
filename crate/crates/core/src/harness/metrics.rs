//! Normalized and per-entry error metrics.

use serde::{Deserialize, Serialize};

use crate::bamp::EstimateSet;
use crate::error::{Error, Result};
use crate::linalg::{fro_dist_sq, fro_norm_sq, CMatrix};
use crate::model::{ChannelSet, SignalFrame};

/// Lowest NMSE reported, in dB. Exact recovery maps here instead of −∞.
pub const NMSE_FLOOR_DB: f64 = -120.0;

/// `‖est − truth‖²_F / ‖truth‖²_F`, linear.
pub fn nmse_linear(est: &CMatrix, truth: &CMatrix) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(Error::dim(format!(
            "estimate {:?} vs truth {:?}",
            est.shape(),
            truth.shape()
        )));
    }
    let den = fro_norm_sq(truth);
    if !(den > 0.0) {
        return Err(Error::Degenerate("NMSE against a zero-norm truth".into()));
    }
    Ok(fro_dist_sq(est, truth) / den)
}

/// Linear NMSE to dB, clipped at [`NMSE_FLOOR_DB`].
pub fn to_db(linear: f64) -> f64 {
    if linear <= 0.0 {
        return NMSE_FLOOR_DB;
    }
    (10.0 * linear.log10()).max(NMSE_FLOOR_DB)
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn nmse_db(est: &CMatrix, truth: &CMatrix) -> Result<f64> {
    nmse_linear(est, truth).map(to_db)
}

/// NMSE of `Hb`, `Hr` and `X` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseTriple {
    pub b: f64,
    pub r: f64,
    pub x: f64,
}

/// Expects `est` to be aligned already.
pub fn nmse(est: &EstimateSet, ch: &ChannelSet, sig: &SignalFrame) -> Result<NmseTriple> {
    Ok(NmseTriple {
        b: nmse_db(&est.hb, &ch.hb)?,
        r: nmse_db(&est.hr, &ch.hr)?,
        x: nmse_db(&est.x, &sig.x)?,
    })
}

/// Squared Frobenius errors divided by the number of entries
/// (`NM`, `KN`, `MT`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryMse {
    pub b: f64,
    pub r: f64,
    pub x: f64,
}

pub fn per_entry_mse(est: &EstimateSet, ch: &ChannelSet, sig: &SignalFrame) -> Result<EntryMse> {
    let per = |e: &CMatrix, t: &CMatrix| -> Result<f64> {
        if e.shape() != t.shape() {
            return Err(Error::dim(format!("estimate {:?} vs truth {:?}", e.shape(), t.shape())));
        }
        Ok(fro_dist_sq(e, t) / t.len() as f64)
    };
    Ok(EntryMse {
        b: per(&est.hb, &ch.hb)?,
        r: per(&est.hr, &ch.hr)?,
        x: per(&est.x, &sig.x)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn unit(n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0 / (n as f64).sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn exact_estimate_hits_floor() {
        let t = unit(3);
        assert_eq!(nmse_db(&t, &t).unwrap(), NMSE_FLOOR_DB);
    }

    #[test]
    fn zero_estimate_is_zero_db() {
        let t = unit(4);
        let z = CMatrix::zeros(4, 4);
        assert!(nmse_db(&z, &t).unwrap().abs() < 1e-12);
    }

    #[test]
    fn zero_truth_is_rejected() {
        let z = CMatrix::zeros(2, 2);
        assert!(matches!(nmse_db(&z, &z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn db_round_trip() {
        for db in [-60.0, -3.0, 0.0, 7.5] {
            assert!((to_db(from_db(db)) - db).abs() < 1e-12);
        }
    }
}
