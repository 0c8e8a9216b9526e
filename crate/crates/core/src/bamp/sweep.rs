//! Entrywise message updates of one backward/forward sweep.
//!
//! Sums over a shared index are written as matrix products, e.g.
//! `Σ_k |q̂_kn|²·vs_kt` is `(|Q̂|²)ᵀ·vs`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{CMatrix, RMatrix};
use crate::priors::{denoise, ep_extrinsic, gauss_combine, GaussianMsg, PriorKind, VAR_FLOOR, VAR_MAX};

use super::state::LayerState;
use super::{BampConfig, XDenoising};

/// Which set of terms the extrinsic statistics keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Simplification {
    /// The reduced recursion: variances use only `|mean|²·vs` terms.
    Simplified,
    /// Variances and mean corrections keep the `v·vs` and `v·|s|²` terms.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    X,
    B,
    U,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    One,
    Two,
}

fn abs2(m: &CMatrix) -> RMatrix {
    m.map(|z| z.norm_sqr())
}

fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Plug-in product mean `A·B` and variance `v_A·|B|² + |A|²·v_B`.
pub fn plug_in(a: &CMatrix, va: &RMatrix, b: &CMatrix, vb: &RMatrix) -> (CMatrix, RMatrix) {
    let z = a * b;
    let v = va * abs2(b) + abs2(a) * vb;
    (z, v)
}

/// `vbar + v_A·v_B`, floored.
pub fn add_cross(vbar: &RMatrix, va: &RMatrix, vb: &RMatrix, floor: f64) -> RMatrix {
    let mut v = vbar + va * vb;
    v.apply(|x| *x = x.max(floor));
    v
}

/// Combine the layer-2 plug-in density `CN(Z, V)` with the AWGN likelihood
/// of `y`. Returns `(z̃, ṽ)`.
pub fn output_posterior(z2: &CMatrix, v2: &RMatrix, y: &CMatrix, noise_var: f64) -> (CMatrix, RMatrix) {
    combine_fields(z2, v2, y, &RMatrix::from_element(y.nrows(), y.ncols(), noise_var))
}

/// Entrywise [`gauss_combine`] of two message fields.
pub fn combine_fields(z: &CMatrix, v: &RMatrix, r: &CMatrix, sig: &RMatrix) -> (CMatrix, RMatrix) {
    let mut zt = CMatrix::zeros(z.nrows(), z.ncols());
    let mut vt = RMatrix::zeros(z.nrows(), z.ncols());
    for i in 0..z.len() {
        let out = gauss_combine(
            GaussianMsg::new(z.as_slice()[i], v.as_slice()[i]),
            GaussianMsg::new(r.as_slice()[i], sig.as_slice()[i]),
        );
        zt.as_mut_slice()[i] = out.mean;
        vt.as_mut_slice()[i] = out.var;
    }
    (zt, vt)
}

/// Scaled residual `s = (z̃ − Z)/V` and precision `vs = (V − ṽ)/V²`, floored.
pub fn residual_update(
    z: &CMatrix,
    v: &RMatrix,
    z_post: &CMatrix,
    v_post: &RMatrix,
    floor: f64,
) -> (CMatrix, RMatrix) {
    let mut s = CMatrix::zeros(z.nrows(), z.ncols());
    let mut vs = RMatrix::zeros(z.nrows(), z.ncols());
    for i in 0..z.len() {
        let vv = v.as_slice()[i];
        s.as_mut_slice()[i] = (z_post.as_slice()[i] - z.as_slice()[i]) / vv;
        vs.as_mut_slice()[i] = ((vv - v_post.as_slice()[i]) / (vv * vv)).max(floor);
    }
    (s, vs)
}

/// Convex mix `(1 − β)·prev + β·new`, floored.
pub fn damp(prev: &RMatrix, new: &RMatrix, beta: f64, floor: f64) -> RMatrix {
    if beta >= 1.0 {
        return new.clone();
    }
    prev.zip_map(new, |p, n| ((1.0 - beta) * p + beta * n).max(floor))
}

/// Damping factor applied to posterior means.
fn mean_beta(cfg: &BampConfig) -> f64 {
    if cfg.damp_means {
        cfg.damping
    } else {
        1.0
    }
}

/// Complex counterpart of [`damp`], without a floor.
pub fn damp_means(prev: &CMatrix, new: CMatrix, beta: f64) -> CMatrix {
    if beta >= 1.0 {
        return new;
    }
    prev.zip_map(&new, |p, n| p * (1.0 - beta) + n * beta)
}

/// Extrinsic variance and mean for one target.
///
/// For `X` (and symmetrically the others) the simplified form is
/// `Σ = (Σ_n |ĥ_nm|² vs_nt)⁻¹` and
/// `R = x̂·(1 − Σ·Σ_n v^b_nm vs_nt) + Σ·Σ_n ĥ*_nm s_nt`. The `B`, `U` and `Q`
/// corrections additionally carry the `v·|s|²` term. Coordinates whose
/// precision vanishes get an uninformative message `(mean, VAR_MAX)`.
///
/// With `clamp_gain` the factor multiplying the mean is limited to `[0, 1]`.
pub fn extrinsic_stats(
    st: &LayerState,
    target: Target,
    mode: Simplification,
    clamp_gain: bool,
) -> (RMatrix, CMatrix) {
    let full = mode == Simplification::Full;
    // `lin`: precision from the plug-in means, `corr`: Σ v·(|s|² − vs) or Σ v·vs,
    // `back`: back-projected residual, `mean`: current posterior mean.
    let (lin, corr_vs, corr_s2, back, mean) = match target {
        Target::X => {
            let b2t = abs2(&st.b_hat).transpose();
            let vbt = st.v_b.transpose();
            (
                &b2t * &st.vs1,
                &vbt * &st.vs1,
                &vbt * abs2(&st.s1),
                st.b_hat.adjoint() * &st.s1,
                &st.x_hat,
            )
        }
        Target::B => (
            &st.vs1 * abs2(&st.x_hat).transpose(),
            &st.vs1 * st.v_x.transpose(),
            abs2(&st.s1) * st.v_x.transpose(),
            &st.s1 * st.x_hat.adjoint(),
            &st.b_hat,
        ),
        Target::U => {
            let q2t = abs2(&st.q_hat).transpose();
            let vqt = st.v_q.transpose();
            (
                &q2t * &st.vs2,
                &vqt * &st.vs2,
                &vqt * abs2(&st.s2),
                st.q_hat.adjoint() * &st.s2,
                &st.u_hat,
            )
        }
        Target::Q => (
            &st.vs2 * abs2(&st.u_hat).transpose(),
            &st.vs2 * st.v_u.transpose(),
            abs2(&st.s2) * st.v_u.transpose(),
            &st.s2 * st.u_hat.adjoint(),
            &st.q_hat,
        ),
    };
    // The simplified X correction omits the |s|² term; B, U and Q keep it.
    let keep_s2 = full || target != Target::X;

    let mut sig = RMatrix::zeros(lin.nrows(), lin.ncols());
    let mut r = CMatrix::zeros(lin.nrows(), lin.ncols());
    for i in 0..lin.len() {
        let mut prec = lin.as_slice()[i];
        if full {
            prec += corr_vs.as_slice()[i] - corr_s2.as_slice()[i];
        }
        let m = mean.as_slice()[i];
        if !(prec > 1.0 / VAR_MAX) {
            sig.as_mut_slice()[i] = VAR_MAX;
            r.as_mut_slice()[i] = m;
            continue;
        }
        let s = 1.0 / prec;
        let mut c = -corr_vs.as_slice()[i];
        if keep_s2 {
            c += corr_s2.as_slice()[i];
        }
        sig.as_mut_slice()[i] = s.max(VAR_FLOOR);
        let mut gain = 1.0 + s * c;
        if clamp_gain {
            gain = gain.clamp(0.0, 1.0);
        }
        r.as_mut_slice()[i] = m * gain + back.as_slice()[i] * s;
    }
    (sig, r)
}

/// Combine the layer-1 plug-in density `CN(Z¹, V¹)` with the layer-2
/// extrinsic message on `U`.
pub fn interlayer_combine(st: &LayerState) -> (CMatrix, RMatrix) {
    combine_fields(&st.z1, &st.v1, &st.r_u, &st.sig_u)
}

fn denoise_field(prior: &PriorKind, r: &CMatrix, sig: &RMatrix) -> Result<(CMatrix, RMatrix)> {
    let mut mean = CMatrix::zeros(r.nrows(), r.ncols());
    let mut var = RMatrix::zeros(r.nrows(), r.ncols());
    for i in 0..r.len() {
        let out = denoise(prior, GaussianMsg::new(r.as_slice()[i], sig.as_slice()[i]))?;
        mean.as_mut_slice()[i] = out.mean;
        var.as_mut_slice()[i] = out.var;
    }
    Ok((mean, var))
}

/// Backward half-sweep: output layer, layer-2 extrinsics, inter-layer
/// combine, layer-1 extrinsics.
pub fn backward(st: &mut LayerState, y: &CMatrix, noise_var: f64, cfg: &BampConfig) {
    let floor = cfg.var_floor;
    let (zt2, vt2) = output_posterior(&st.z2, &st.v2, y, noise_var);
    let (s2, vs2) = residual_update(&st.z2, &st.v2, &zt2, &vt2, floor);
    st.s2 = s2;
    st.vs2 = damp(&st.prev_vs2, &vs2, cfg.damping, floor);
    st.prev_vs2 = st.vs2.clone();

    let clamp = cfg.onsager_gain_clamp;
    let (sig_u, r_u) = extrinsic_stats(st, Target::U, cfg.simplification, clamp);
    let (sig_q, r_q) = extrinsic_stats(st, Target::Q, cfg.simplification, clamp);
    st.sig_u = sig_u;
    st.r_u = r_u;
    st.sig_q = sig_q;
    st.r_q = r_q;

    let (zt1, vt1) = interlayer_combine(st);
    let (s1, vs1) = residual_update(&st.z1, &st.v1, &zt1, &vt1, floor);
    st.s1 = s1;
    st.vs1 = damp(&st.prev_vs1, &vs1, cfg.damping, floor);
    st.prev_vs1 = st.vs1.clone();

    let (sig_x, r_x) = extrinsic_stats(st, Target::X, cfg.simplification, clamp);
    let (sig_b, r_b) = extrinsic_stats(st, Target::B, cfg.simplification, clamp);
    st.sig_x = sig_x;
    st.r_x = r_x;
    st.sig_b = sig_b;
    st.r_b = r_b;
}

fn update_x(st: &mut LayerState, cfg: &BampConfig) -> Result<()> {
    let prior = &cfg.priors.x.kind;
    let use_ep = cfg.x_denoising == XDenoising::Ep && matches!(prior, PriorKind::Discrete { .. });
    if !use_ep {
        let (x, vx) = denoise_field(prior, &st.r_x, &st.sig_x)?;
        st.x_hat = damp_means(&st.x_hat, x, mean_beta(cfg));
        st.v_x = vx;
    } else {
        let (m, t) = st.x_hat.shape();
        let (ep_mean, ep_var) = st.x_ep.take().unwrap_or_else(|| {
            (
                CMatrix::from_element(m, t, prior.mean()),
                RMatrix::from_element(m, t, (prior.power() - prior.mean().norm_sqr()).max(cfg.var_floor)),
            )
        });
        let mut post_mean = CMatrix::zeros(m, t);
        let mut next_mean = CMatrix::zeros(m, t);
        let mut next_var = RMatrix::zeros(m, t);
        for i in 0..m * t {
            let msg = GaussianMsg::new(st.r_x.as_slice()[i], st.sig_x.as_slice()[i]);
            let approx = GaussianMsg::new(ep_mean.as_slice()[i], ep_var.as_slice()[i]);
            let post = gauss_combine(approx, msg);
            post_mean.as_mut_slice()[i] = post.mean;
            st.v_x.as_mut_slice()[i] = post.var;
            let belief = denoise(prior, msg)?;
            let ep = ep_extrinsic(belief, msg);
            next_mean.as_mut_slice()[i] = ep.mean;
            next_var.as_mut_slice()[i] = ep.var;
        }
        st.x_hat = damp_means(&st.x_hat, post_mean, mean_beta(cfg));
        st.x_ep = Some((next_mean, next_var));
    }
    st.clamp_x(cfg.var_floor);
    Ok(())
}

/// Forward half-sweep up to (and excluding) the `Q` update.
pub fn forward_layer1(st: &mut LayerState, cfg: &BampConfig) -> Result<()> {
    let floor = cfg.var_floor;
    update_x(st, cfg)?;
    let (b, vb) = denoise_field(&cfg.priors.hb.kind, &st.r_b, &st.sig_b)?;
    st.b_hat = damp_means(&st.b_hat, b, mean_beta(cfg));
    st.v_b = vb;

    let (zbar1, vbar1) = plug_in(&st.b_hat, &st.v_b, &st.x_hat, &st.v_x);
    let v1 = add_cross(&vbar1, &st.v_b, &st.v_x, floor);
    st.v1 = damp(&st.prev_v1, &v1, cfg.damping, floor);
    st.prev_v1 = st.v1.clone();
    st.z1 = zbar1 - st.s1.component_mul(&to_complex(&vbar1));

    // U is denoised against the layer-1 output message CN(Z¹, V¹).
    let (u, vu) = combine_fields(&st.z1, &st.v1, &st.r_u, &st.sig_u);
    st.u_hat = u;
    st.v_u = vu;
    Ok(())
}

/// Plain denoising of `Q` against its prior.
pub fn update_q(st: &mut LayerState, cfg: &BampConfig) -> Result<()> {
    let (q, vq) = denoise_field(&cfg.priors.q.kind, &st.r_q, &st.sig_q)?;
    st.q_hat = damp_means(&st.q_hat, q, mean_beta(cfg));
    st.v_q = vq;
    st.clamp_q(cfg.var_floor);
    Ok(())
}

/// Forward half-sweep: layer-2 plug-in and Onsager-corrected output.
///
/// Under BUTAMP `Q̂` comes from the transformed-domain solver and does not
/// depend on the current `s²`, so the Onsager term is dropped.
pub fn forward_layer2(st: &mut LayerState, cfg: &BampConfig) {
    let floor = cfg.var_floor;
    let (zbar2, vbar2) = plug_in(&st.q_hat, &st.v_q, &st.u_hat, &st.v_u);
    let v2 = add_cross(&vbar2, &st.v_q, &st.v_u, floor);
    st.v2 = damp(&st.prev_v2, &v2, cfg.damping, floor);
    st.prev_v2 = st.v2.clone();
    if cfg.scheme == super::Scheme::Butamp {
        st.z2 = zbar2;
    } else {
        st.z2 = zbar2 - st.s2.component_mul(&to_complex(&vbar2));
    }
}

/// Full forward half-sweep with plain `Q` denoising.
pub fn forward_update(st: &mut LayerState, cfg: &BampConfig) -> Result<()> {
    forward_layer1(st, cfg)?;
    update_q(st, cfg)?;
    forward_layer2(st, cfg);
    Ok(())
}
