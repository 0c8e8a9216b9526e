//! Removal of the diagonal scaling ambiguities of the bilinear model.
//!
//! `Q·Hb·X = (Q·D)·(D⁻¹·Hb·C⁻¹)·(C·X)` for any invertible diagonal `D`
//! (`N×N`) and `C` (`M×M`). The anchored rows of `Hr` fix `D`; the pilot
//! columns of `X` fix `C`. Both scalings are least-squares fits over all
//! known entries of a column (resp. row).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

use super::{q_to_hr, EstimateSet};

/// Known columns (resp. rows) whose energy is below this are left unscaled.
const NEGLIGIBLE: f64 = 1e-300;

/// Least-squares scale `d` minimising `Σ |known − d·est|²`. `None` when the
/// estimate carries no energy on a non-zero known block.
fn ls_scale<'a>(
    est: impl Iterator<Item = &'a Complex64>,
    known: impl Iterator<Item = &'a Complex64>,
) -> Option<Complex64> {
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    let mut known_energy = 0.0;
    for (e, k) in est.zip(known) {
        num += e.conj() * k;
        den += e.norm_sqr();
        known_energy += k.norm_sqr();
    }
    if known_energy <= NEGLIGIBLE {
        return Some(Complex64::new(1.0, 0.0));
    }
    let d = num / den;
    if !(den > NEGLIGIBLE) || !d.re.is_finite() || !d.im.is_finite() || d.norm() <= 1e-150 {
        return None;
    }
    Some(d)
}

/// Align `est` to the anchored rows of `Hr` (`known_rows`, `K_p×N`) and to
/// the pilot block (`M×T_p`).
///
/// A column of `known_rows` (row of `pilots`) that is identically zero
/// carries no scale information and is skipped. An estimated anchored
/// column without energy against a non-zero known column is an error.
pub fn anchor_ambiguity(
    est: &EstimateSet,
    known_rows: &CMatrix,
    phi: &[Complex64],
    pilots: &CMatrix,
) -> Result<EstimateSet> {
    let (k_p, n) = known_rows.shape();
    let (m, t_p) = pilots.shape();
    if k_p == 0 || t_p == 0 {
        return Err(Error::dim("alignment needs K_p ≥ 1 and T_p ≥ 1"));
    }
    if n != est.hr.ncols() || k_p > est.hr.nrows() || phi.len() != n {
        return Err(Error::dim(format!(
            "anchors {:?} do not match Ĥr {:?}",
            known_rows.shape(),
            est.hr.shape()
        )));
    }
    if m != est.x.nrows() || t_p > est.x.ncols() {
        return Err(Error::dim(format!(
            "pilots {:?} do not match X̂ {:?}",
            pilots.shape(),
            est.x.shape()
        )));
    }

    let mut out = est.clone();
    for col in 0..n {
        let d = ls_scale(
            est.hr.view((0, col), (k_p, 1)).iter(),
            known_rows.column(col).iter(),
        )
        .ok_or(Error::DegenerateAnchor { column: col })?;
        out.q.column_mut(col).iter_mut().for_each(|z| *z *= d);
        let inv = d.inv();
        out.u.row_mut(col).iter_mut().for_each(|z| *z *= inv);
        out.hb.row_mut(col).iter_mut().for_each(|z| *z *= inv);
    }
    out.hr = q_to_hr(&out.q, phi);

    for row in 0..m {
        let c = ls_scale(
            est.x.view((row, 0), (1, t_p)).iter(),
            pilots.row(row).iter(),
        )
        .ok_or_else(|| Error::Degenerate(format!("row {row} of X̂ has no energy on the pilots")))?;
        out.x.row_mut(row).iter_mut().for_each(|z| *z *= c);
        let inv = c.inv();
        out.hb.column_mut(row).iter_mut().for_each(|z| *z *= inv);
    }
    Ok(out)
}
