use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix};

use super::{BampConfig, SideInfo};

/// Message state of the two-layer estimator.
///
/// Layer 1 maps `X` (`M×T`) through `Hb` (`N×M`) to `U` (`N×T`); layer 2 maps
/// `U` through `Q` (`K×N`) to the noiseless output (`K×T`). Field names follow
/// the role of each quantity: `z*`/`v*` are the Onsager-corrected plug-in
/// mean and variance of a layer output, `s*`/`vs*` the scaled residual and
/// its precision, `r_*`/`sig_*` the extrinsic means and variances, and the
/// `*_hat`/`v_*` pairs the posterior estimates.
#[derive(Debug, Clone)]
pub struct LayerState {
    pub z1: CMatrix,
    pub v1: RMatrix,
    pub s1: CMatrix,
    pub vs1: RMatrix,
    pub z2: CMatrix,
    pub v2: RMatrix,
    pub s2: CMatrix,
    pub vs2: RMatrix,

    pub r_x: CMatrix,
    pub sig_x: RMatrix,
    pub r_b: CMatrix,
    pub sig_b: RMatrix,
    pub r_u: CMatrix,
    pub sig_u: RMatrix,
    pub r_q: CMatrix,
    pub sig_q: RMatrix,

    pub x_hat: CMatrix,
    pub v_x: RMatrix,
    pub b_hat: CMatrix,
    pub v_b: RMatrix,
    pub u_hat: CMatrix,
    pub v_u: RMatrix,
    pub q_hat: CMatrix,
    pub v_q: RMatrix,

    /// Coordinates of `X` fixed to known pilot values.
    pub x_known: Vec<bool>,
    /// Coordinates of `Q` fixed to known anchor values.
    pub q_known: Vec<bool>,
    pub x_clamp: CMatrix,
    pub q_clamp: CMatrix,

    /// Gaussian approximation of a discrete `X` prior when the EP path is on.
    pub x_ep: Option<(CMatrix, RMatrix)>,

    /// Previous-iteration values used by damping and the stopping rule.
    pub prev_vs1: RMatrix,
    pub prev_vs2: RMatrix,
    pub prev_v1: RMatrix,
    pub prev_v2: RMatrix,
    pub prev_bx: CMatrix,
}

impl LayerState {
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let (m, t) = self.x_hat.shape();
        (m, self.q_hat.nrows(), self.b_hat.nrows(), t)
    }

    pub(crate) fn clamp_x(&mut self, floor: f64) {
        for (i, known) in self.x_known.iter().enumerate() {
            if *known {
                self.x_hat.as_mut_slice()[i] = self.x_clamp.as_slice()[i];
                self.v_x.as_mut_slice()[i] = floor;
            }
        }
    }

    pub(crate) fn clamp_q(&mut self, floor: f64) {
        for (i, known) in self.q_known.iter().enumerate() {
            if *known {
                self.q_hat.as_mut_slice()[i] = self.q_clamp.as_slice()[i];
                self.v_q.as_mut_slice()[i] = floor;
            }
        }
    }

    pub(crate) fn is_finite(&self) -> bool {
        use crate::linalg::{all_finite, all_finite_real};
        all_finite(&self.x_hat)
            && all_finite(&self.b_hat)
            && all_finite(&self.u_hat)
            && all_finite(&self.q_hat)
            && all_finite(&self.z1)
            && all_finite(&self.z2)
            && all_finite(&self.s1)
            && all_finite(&self.s2)
            && all_finite_real(&self.v_x)
            && all_finite_real(&self.v_b)
            && all_finite_real(&self.v_u)
            && all_finite_real(&self.v_q)
            && all_finite_real(&self.v1)
            && all_finite_real(&self.v2)
            && all_finite_real(&self.vs1)
            && all_finite_real(&self.vs2)
    }
}

/// Initial state: zero means and unit variances for every unknown, known
/// pilot columns of `X` and anchored rows of `Q` clamped at the variance
/// floor, plug-in `Z`/`V` for both layers, `s = 0` and `vs = 1`.
pub fn init_state(t: usize, k: usize, side: &SideInfo, cfg: &BampConfig) -> Result<LayerState> {
    let m = side.pilots.nrows();
    let n = side.phi.len();
    let t_p = side.pilots.ncols();
    let k_p = side.anchors.nrows();
    if m == 0 || n == 0 || t == 0 || k == 0 {
        return Err(Error::dim(format!("empty problem: M={m} N={n} K={k} T={t}")));
    }
    if t_p > t {
        return Err(Error::dim(format!("{t_p} pilot columns for T = {t}")));
    }
    if k_p > k {
        return Err(Error::dim(format!("{k_p} anchor rows for K = {k}")));
    }
    if k_p > 0 && side.anchors.ncols() != n {
        return Err(Error::dim(format!(
            "anchor rows have {} columns, expected N = {n}",
            side.anchors.ncols()
        )));
    }
    let floor = cfg.var_floor;

    let mut x_clamp = CMatrix::zeros(m, t);
    x_clamp.columns_mut(0, t_p).copy_from(&side.pilots);
    let x_known: Vec<bool> = (0..m * t).map(|i| i / m < t_p).collect();

    let mut q_clamp = CMatrix::zeros(k, n);
    for row in 0..k_p {
        for col in 0..n {
            q_clamp[(row, col)] = side.anchors[(row, col)] * side.phi[col];
        }
    }
    let q_known: Vec<bool> = (0..k * n).map(|i| i % k < k_p).collect();

    let mut st = LayerState {
        z1: CMatrix::zeros(n, t),
        v1: RMatrix::zeros(n, t),
        s1: CMatrix::zeros(n, t),
        vs1: RMatrix::from_element(n, t, 1.0),
        z2: CMatrix::zeros(k, t),
        v2: RMatrix::zeros(k, t),
        s2: CMatrix::zeros(k, t),
        vs2: RMatrix::from_element(k, t, 1.0),
        r_x: CMatrix::zeros(m, t),
        sig_x: RMatrix::from_element(m, t, 1.0),
        r_b: CMatrix::zeros(n, m),
        sig_b: RMatrix::from_element(n, m, 1.0),
        r_u: CMatrix::zeros(n, t),
        sig_u: RMatrix::from_element(n, t, 1.0),
        r_q: CMatrix::zeros(k, n),
        sig_q: RMatrix::from_element(k, n, 1.0),
        x_hat: CMatrix::zeros(m, t),
        v_x: RMatrix::from_element(m, t, 1.0),
        b_hat: CMatrix::zeros(n, m),
        v_b: RMatrix::from_element(n, m, 1.0),
        u_hat: CMatrix::zeros(n, t),
        v_u: RMatrix::zeros(n, t),
        q_hat: CMatrix::zeros(k, n),
        v_q: RMatrix::from_element(k, n, 1.0),
        x_known,
        q_known,
        x_clamp,
        q_clamp,
        x_ep: None,
        prev_vs1: RMatrix::from_element(n, t, 1.0),
        prev_vs2: RMatrix::from_element(k, t, 1.0),
        prev_v1: RMatrix::zeros(n, t),
        prev_v2: RMatrix::zeros(k, t),
        prev_bx: CMatrix::zeros(n, t),
    };
    st.clamp_x(floor);
    st.clamp_q(floor);

    let (z1, v1bar) = super::sweep::plug_in(&st.b_hat, &st.v_b, &st.x_hat, &st.v_x);
    let v1 = super::sweep::add_cross(&v1bar, &st.v_b, &st.v_x, floor);
    st.u_hat = z1.clone();
    st.v_u = v1.clone();
    st.z1 = z1;
    st.v1 = v1.clone();
    st.prev_v1 = v1;

    let (z2, v2bar) = super::sweep::plug_in(&st.q_hat, &st.v_q, &st.u_hat, &st.v_u);
    let v2 = super::sweep::add_cross(&v2bar, &st.v_q, &st.v_u, floor);
    st.z2 = z2;
    st.v2 = v2.clone();
    st.prev_v2 = v2;
    st.prev_bx = &st.b_hat * &st.x_hat;
    Ok(st)
}

impl LayerState {
    /// Number of clamped coordinates in `X` and `Q`.
    pub fn known_counts(&self) -> (usize, usize) {
        (
            self.x_known.iter().filter(|k| **k).count(),
            self.q_known.iter().filter(|k| **k).count(),
        )
    }
}
