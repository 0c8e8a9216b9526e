//! Channel estimation from the pilot window alone.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::Observation;

use super::{anchor_ambiguity, run, BampConfig, EstimateSet, SideInfo};

#[derive(Debug, Clone)]
pub struct PilotStage {
    /// Aligned estimates of `Hb`, `Q` and `Hr`; `x` equals the pilots.
    pub est: EstimateSet,
    /// `T_p < M`: the pilot block cannot identify `Hb`.
    pub underdetermined: bool,
}

/// Run the two-layer engine on `Y_p` (`K×T_p`) with every column of `X`
/// known. Layer 1 is then a linear map of `Hb`, and the scaling of each
/// `Hr` column is fixed by least squares against the anchored rows.
///
/// When `T_p < M` the result is returned with `converged = false`.
pub fn bilinear_pilot_stage(
    y_p: &CMatrix,
    x_p: &CMatrix,
    phi: &[Complex64],
    anchors: &CMatrix,
    noise_var: f64,
    cfg: &BampConfig,
) -> Result<PilotStage> {
    let (m, t_p) = x_p.shape();
    if y_p.ncols() != t_p {
        return Err(Error::dim(format!(
            "Y_p has {} columns but X_p has {t_p}",
            y_p.ncols()
        )));
    }
    if t_p == 0 {
        return Err(Error::dim("pilot stage needs T_p ≥ 1"));
    }
    let obs = Observation {
        y: y_p.clone(),
        noise_var,
        u_true: CMatrix::zeros(phi.len(), t_p),
    };
    let side = SideInfo::new(phi.to_vec(), x_p.clone(), anchors.clone());
    let raw = run(&obs, &side, cfg)?;
    let mut est = if anchors.nrows() > 0 {
        anchor_ambiguity(&raw, anchors, phi, x_p)?
    } else {
        raw
    };
    let underdetermined = t_p < m;
    if underdetermined {
        est.converged = false;
    }
    Ok(PilotStage { est, underdetermined })
}
