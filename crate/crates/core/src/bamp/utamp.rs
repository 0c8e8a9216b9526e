//! Unitary-transform AMP refinement of `Q` given the current `Û`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, fro_norm_sq, CMatrix, RMatrix};
use crate::priors::{denoise, GaussianMsg, PriorKind};

use super::state::LayerState;

#[derive(Debug, Clone)]
pub struct UtampOutput {
    pub q: CMatrix,
    pub v_q: RMatrix,
    /// Relative gap between `‖Y − Q·Û‖_F` and its transformed-domain
    /// counterpart, for the `Q̂` entering the refinement.
    pub identity_err: f64,
}

/// Thin SVD of `Û` truncated to numerical rank: `(𝒰, λ, 𝒱)` with `𝒰` `N×r`,
/// `𝒱` `r×T`.
pub fn thin_svd(u_hat: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    if !all_finite(u_hat) {
        return Err(Error::Svd("non-finite entries in Û".into()));
    }
    let (n, t) = u_hat.shape();
    let svd = u_hat.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Svd("singular vectors were not computed".into()));
    };
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = n.max(t) as f64 * sigma_max * f64::EPSILON;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let r = keep.len();
    let uu = CMatrix::from_fn(n, r, |row, j| u[(row, keep[j])]);
    let vv = CMatrix::from_fn(r, t, |j, col| v_t[(keep[j], col)]);
    let lam = keep.iter().map(|&i| svd.singular_values[i]).collect();
    Ok((uu, lam, vv))
}

/// Relative deviation between `‖Y − Q·Û‖_F` and the same residual after
/// right-multiplying by the unitary completion of `𝒱ᴴ`: the thin part
/// `‖R − Q·Ũ‖²` plus the energy of `Y` outside the row space of `Û`.
pub fn unitary_identity_err(y: &CMatrix, q: &CMatrix, u_hat: &CMatrix, svd: &(CMatrix, Vec<f64>, CMatrix)) -> f64 {
    let (uu, lam, vv) = svd;
    let r_mat = y * vv.adjoint();
    let u_tilde = uu * DMatrix::from_diagonal(&DVector::from_iterator(
        lam.len(),
        lam.iter().map(|l| Complex64::new(*l, 0.0)),
    ));
    let direct = fro_norm_sq(&(y - q * u_hat)).sqrt();
    let thin = fro_norm_sq(&(&r_mat - q * u_tilde));
    let complement = fro_norm_sq(&(y - &r_mat * vv));
    let transformed = (thin + complement).sqrt();
    let scale = direct.max(transformed);
    if scale == 0.0 {
        0.0
    } else {
        (direct - transformed).abs() / scale
    }
}

/// Refine every non-anchored row of `Q` by `inner_iters` iterations of
/// unitary-transform AMP on `r_k = Λ·𝒰ᵀ·q_kᵀ + noise`, where `R = Y·𝒱ᴴ`.
///
/// Each row is warm-started from the current `q̂_k`. The effective noise
/// adds the uncertainty of `Û`: `v_w + Σ_n (|q̂_kn|² + v^q_kn)·mean_t v^u_nt`.
pub fn utamp_refine_q(
    st: &LayerState,
    y: &CMatrix,
    noise_var: f64,
    prior: &PriorKind,
    inner_iters: usize,
) -> Result<UtampOutput> {
    let svd = thin_svd(&st.u_hat)?;
    let identity_err = unitary_identity_err(y, &st.q_hat, &st.u_hat, &svd);
    let (uu, lam, vv) = &svd;
    let (k, n) = st.q_hat.shape();
    let r = lam.len();
    let r_mat = y * vv.adjoint();
    // A = Λ·𝒰ᵀ (r×N) and its adjoint.
    let a = CMatrix::from_fn(r, n, |j, col| uu[(col, j)] * lam[j]);
    let a_h = a.adjoint();
    let lam2: Vec<f64> = lam.iter().map(|l| l * l).collect();
    let t = st.u_hat.ncols() as f64;
    let mean_vu: Vec<f64> = (0..n).map(|row| st.v_u.row(row).sum() / t).collect();

    let mut q = st.q_hat.clone();
    let mut v_q = st.v_q.clone();
    if r == 0 {
        return Ok(UtampOutput { q, v_q, identity_err });
    }
    for row in 0..k {
        if st.q_known[row] {
            continue;
        }
        let mut x = DVector::from_iterator(n, st.q_hat.row(row).iter().cloned());
        let mut tau_x = st.v_q.row(row).sum() / n as f64;
        let vw_eff = noise_var
            + (0..n)
                .map(|col| (st.q_hat[(row, col)].norm_sqr() + st.v_q[(row, col)]) * mean_vu[col])
                .sum::<f64>();
        let obs = DVector::from_iterator(r, r_mat.row(row).iter().cloned());
        let mut s = DVector::<Complex64>::zeros(r);
        let mut v_row = vec![tau_x; n];
        for _ in 0..inner_iters {
            let ax = &a * &x;
            let mut prec_sum = 0.0;
            for j in 0..r {
                let tau_p = lam2[j] * tau_x;
                let p = ax[j] - s[j] * tau_p;
                let tau_s = 1.0 / (tau_p + vw_eff);
                s[j] = (obs[j] - p) * tau_s;
                prec_sum += lam2[j] * tau_s;
            }
            let tau_q = n as f64 / prec_sum;
            let back = &a_h * &s;
            let mut v_total = 0.0;
            for col in 0..n {
                let out = denoise(prior, GaussianMsg::new(x[col] + back[col] * tau_q, tau_q))?;
                x[col] = out.mean;
                v_row[col] = out.var;
                v_total += out.var;
            }
            tau_x = v_total / n as f64;
        }
        for col in 0..n {
            q[(row, col)] = x[col];
            v_q[(row, col)] = v_row[col];
        }
    }
    Ok(UtampOutput { q, v_q, identity_err })
}
