//! Two-stage reference receiver: channel estimation on the pilot window,
//! then least-squares detection of the data columns.

use crate::bamp::{bilinear_pilot_stage, BampConfig, EstimateSet, SideInfo};
use crate::error::{Error, Result};
use crate::linalg::{fro_dist_sq, fro_norm_sq, pinv, CMatrix};
use crate::model::Observation;

/// Least-squares detection result.
#[derive(Debug, Clone)]
pub struct LsDetection {
    /// `G⁺·Y_d`.
    pub x: CMatrix,
    /// Numerical rank of `G`. Singular values below
    /// `max(K, M)·σ_max·ε` are discarded.
    pub rank: usize,
    /// `rank < M`: the data columns are not identifiable.
    pub underdetermined: bool,
    /// `‖Y_d − G·X̂_d‖²_F / ‖Y_d‖²_F` (0 for an all-zero `Y_d`).
    pub residual: f64,
}

/// Minimum-norm least-squares solution of `Y_d ≈ G·X_d`.
pub fn ls_detect(g: &CMatrix, y_d: &CMatrix) -> Result<LsDetection> {
    if g.nrows() != y_d.nrows() {
        return Err(Error::dim(format!(
            "cascade has {} rows, data block {}",
            g.nrows(),
            y_d.nrows()
        )));
    }
    let (g_pinv, rank) = pinv(g);
    let x = &g_pinv * y_d;
    let energy = fro_norm_sq(y_d);
    let residual = if energy > 0.0 {
        fro_dist_sq(y_d, &(g * &x)) / energy
    } else {
        0.0
    };
    Ok(LsDetection {
        x,
        rank,
        underdetermined: rank < g.ncols(),
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    /// Pilot-stage channels with `x = [X_p, X̂_d]`.
    pub est: EstimateSet,
    pub detection: LsDetection,
    /// The pilot stage had fewer pilot columns than transmit antennas.
    pub pilot_underdetermined: bool,
}

/// Stage 1 runs [`bilinear_pilot_stage`] on the first `T_p` columns of `Y`;
/// stage 2 detects the remaining columns with `(Q̂·Ĥb)⁺` (`Q̂·Ĥb = Ĥr·Φ·Ĥb`).
pub fn baseline_bigamp_ls(obs: &Observation, side: &SideInfo, cfg: &BampConfig) -> Result<BaselineOutput> {
    let t_p = side.pilots.ncols();
    let t = obs.y.ncols();
    if t_p == 0 {
        return Err(Error::dim("baseline needs T_p ≥ 1"));
    }
    if t_p > t {
        return Err(Error::dim(format!("{t_p} pilot columns for T = {t}")));
    }
    let y_p = obs.y.columns(0, t_p).into_owned();
    let stage = bilinear_pilot_stage(&y_p, &side.pilots, &side.phi, &side.anchors, obs.noise_var, cfg)?;

    let g = &stage.est.q * &stage.est.hb;
    let y_d = obs.y.columns(t_p, t - t_p).into_owned();
    let detection = ls_detect(&g, &y_d)?;

    let m = side.pilots.nrows();
    let mut x = CMatrix::zeros(m, t);
    x.columns_mut(0, t_p).copy_from(&side.pilots);
    x.columns_mut(t_p, t - t_p).copy_from(&detection.x);

    let mut est = stage.est;
    est.u = &est.hb * &x;
    est.x = x;
    Ok(BaselineOutput {
        est,
        detection,
        pilot_underdetermined: stage.underdetermined,
    })
}
