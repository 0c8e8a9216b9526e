//! Two-layer bidirectional message passing for `Y = Q·Hb·X + W`.
//!
//! One outer iteration is a backward sweep (output layer down to the
//! extrinsic messages on `X` and `Hb`) followed by a forward sweep
//! (denoising, then the Onsager-corrected plug-in means of both layers).
//! The BUTAMP scheme replaces the plain `Q` denoising with a few iterations
//! of unitary-transform AMP on the SVD of `Û`.

pub mod ambiguity;
pub mod pilot;
pub mod state;
pub mod sweep;
pub mod utamp;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fro_dist_sq, fro_norm_sq, serde_cmat, CMatrix};
use crate::model::{ChannelSet, GenConfig, Observation, SignalFrame, SignalPrior};
use crate::priors::{PriorKind, PriorSpec, Variable, VAR_FLOOR};

pub use ambiguity::anchor_ambiguity;
pub use pilot::{bilinear_pilot_stage, PilotStage};
pub use state::{init_state, LayerState};
pub use sweep::Simplification;
pub use utamp::{utamp_refine_q, UtampOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Bamp,
    Butamp,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bamp" => Ok(Scheme::Bamp),
            "butamp" => Ok(Scheme::Butamp),
            other => Err(Error::config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Treatment of a discrete `X` prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XDenoising {
    /// Posterior moments under the discrete prior itself.
    Plain,
    /// Gaussian approximation of the prior refreshed by EP moment matching
    /// (one iteration behind).
    Ep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub x: PriorSpec,
    pub hb: PriorSpec,
    pub q: PriorSpec,
}

impl PriorSet {
    /// Gaussian `X`, Bernoulli–Gaussian `Hb` and `Q` with unit average power.
    pub fn for_densities(density_b: f64, density_r: f64) -> Self {
        Self {
            x: PriorSpec::new(Variable::X, PriorKind::standard_gaussian()),
            hb: PriorSpec::new(Variable::Hb, PriorKind::sparse(density_b)),
            q: PriorSpec::new(Variable::Q, PriorKind::sparse(density_r)),
        }
    }

    /// Priors matching the generator: Bernoulli–Gaussian channels at the
    /// generated densities and the generated signal prior.
    pub fn matching(gen: &GenConfig) -> Self {
        let mut set = Self::for_densities(gen.density_b, gen.density_r);
        if gen.signal_prior == SignalPrior::Qpsk {
            set.x = PriorSpec::new(Variable::X, PriorKind::qpsk());
        }
        set
    }

    pub fn validate(&self) -> Result<()> {
        for (spec, want) in [(&self.x, Variable::X), (&self.hb, Variable::Hb), (&self.q, Variable::Q)] {
            if spec.target != want {
                return Err(Error::config(format!(
                    "prior for {want:?} is tagged {:?}",
                    spec.target
                )));
            }
            spec.kind.validate()?;
        }
        Ok(())
    }
}

/// Fields missing from JSON take the values of [`BampConfig::desk`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default = "BampConfig::desk")]
pub struct BampConfig {
    pub scheme: Scheme,
    /// Damping factor β on `v^s` and `V`; 1 disables damping.
    pub damping: f64,
    pub max_iters: usize,
    /// Stop when the relative change of `Ĥb·X̂` falls to this value.
    pub tol: f64,
    pub var_floor: f64,
    /// Inner UTAMP iterations per outer iteration (BUTAMP only).
    pub inner_iters: usize,
    pub priors: PriorSet,
    pub x_denoising: XDenoising,
    pub simplification: Simplification,
    /// Divergence is declared when the relative change of `Ĥb·X̂` or the
    /// fit error `‖Y − Q̂·Û‖²_F / ‖Y‖²_F` exceeds this value.
    pub divergence_threshold: f64,
    /// Lower bound on the noise variance assumed by the estimator.
    pub min_noise_var: f64,
    /// Limit the factor `1 + Σ·c` on the previous mean in every extrinsic
    /// mean to `[0, 1]`.
    pub onsager_gain_clamp: bool,
    /// Also damp the posterior means of `X`, `Hb` and `Q` with `β`.
    pub damp_means: bool,
}

impl Default for BampConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Bamp,
            damping: 0.15,
            max_iters: 200,
            tol: 1e-8,
            var_floor: VAR_FLOOR,
            inner_iters: 5,
            priors: PriorSet::for_densities(1.0, 1.0),
            x_denoising: XDenoising::Plain,
            simplification: Simplification::Simplified,
            divergence_threshold: 1e6,
            min_noise_var: 1e-10,
            onsager_gain_clamp: true,
            damp_means: true,
        }
    }
}

impl BampConfig {
    /// Defaults with priors matching [`GenConfig::desk`].
    pub fn desk() -> Self {
        Self {
            priors: PriorSet::matching(&GenConfig::desk()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.var_floor > 0.0 && self.var_floor < 1.0) {
            return Err(Error::config(format!("var_floor must lie in (0, 1), got {}", self.var_floor)));
        }
        if self.scheme == Scheme::Butamp && self.inner_iters == 0 {
            return Err(Error::config("BUTAMP needs at least one inner iteration"));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::config("divergence_threshold must be positive"));
        }
        if !(self.min_noise_var >= 0.0) {
            return Err(Error::config("min_noise_var must be non-negative"));
        }
        self.priors.validate()
    }
}

/// What the receiver knows besides `Y`: the RIS configuration, the pilot
/// block (leading columns of `X`) and the anchored leading rows of `Hr`.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    pub phi: Vec<Complex64>,
    /// `M×T_p`.
    pub pilots: CMatrix,
    /// `K_p×N`.
    pub anchors: CMatrix,
}

impl SideInfo {
    pub fn new(phi: Vec<Complex64>, pilots: CMatrix, anchors: CMatrix) -> Self {
        Self { phi, pilots, anchors }
    }

    pub fn from_truth(ch: &ChannelSet, sig: &SignalFrame, k_p: usize) -> Self {
        Self::new(ch.phi.clone(), sig.pilots(), ch.anchor_rows(k_p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    #[serde(with = "serde_cmat")]
    pub hb: CMatrix,
    #[serde(with = "serde_cmat")]
    pub q: CMatrix,
    /// `Q̂·Φᴴ`.
    #[serde(with = "serde_cmat")]
    pub hr: CMatrix,
    #[serde(with = "serde_cmat")]
    pub x: CMatrix,
    #[serde(with = "serde_cmat")]
    pub u: CMatrix,
    pub iterations: usize,
    /// True when the stopping rule fired after at least two iterations.
    /// A tolerance met on the very first iteration compares against the
    /// all-zero initial product and does not count as convergence.
    pub converged: bool,
    /// `‖Ĥb·X̂ − previous‖²_F / ‖Ĥb·X̂‖²_F` per iteration.
    pub residual_trace: Vec<f64>,
    /// Largest relative deviation of the unitary residual identity over all
    /// BUTAMP SVDs of the run.
    pub unitary_identity_max_err: Option<f64>,
}

impl EstimateSet {
    pub(crate) fn from_state(st: &LayerState, phi: &[Complex64]) -> Self {
        Self {
            hb: st.b_hat.clone(),
            q: st.q_hat.clone(),
            hr: q_to_hr(&st.q_hat, phi),
            x: st.x_hat.clone(),
            u: st.u_hat.clone(),
            iterations: 0,
            converged: false,
            residual_trace: Vec::new(),
            unitary_identity_max_err: None,
        }
    }
}

/// `Q·Φᴴ` for a unit-modulus diagonal `Φ`.
pub fn q_to_hr(q: &CMatrix, phi: &[Complex64]) -> CMatrix {
    let mut hr = q.clone();
    for (col, p) in phi.iter().enumerate() {
        let c = p.conj();
        hr.column_mut(col).iter_mut().for_each(|z| *z *= c);
    }
    hr
}

/// Per-iteration view handed to [`run_observed`].
pub struct IterInfo<'a> {
    pub iter: usize,
    /// Relative change of `Ĥb·X̂`.
    pub residual: f64,
    /// Relative change of `Q̂·Û`.
    pub residual_layer2: f64,
    pub state: &'a LayerState,
}

pub fn run(obs: &Observation, side: &SideInfo, cfg: &BampConfig) -> Result<EstimateSet> {
    run_observed(obs, side, cfg, |_| {})
}

/// [`run`] with a callback after every outer iteration.
pub fn run_observed<F>(
    obs: &Observation,
    side: &SideInfo,
    cfg: &BampConfig,
    mut observer: F,
) -> Result<EstimateSet>
where
    F: FnMut(&IterInfo<'_>),
{
    cfg.validate()?;
    let (k, t) = obs.y.shape();
    if side.phi.iter().any(|p| (p.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::config("RIS phases must be unit modulus"));
    }
    if !crate::linalg::all_finite(&obs.y) || !obs.noise_var.is_finite() {
        return Err(Error::NonFinite("observation".into()));
    }
    let mut st = init_state(t, k, side, cfg)?;
    let noise_var = obs.noise_var.max(cfg.min_noise_var).max(cfg.var_floor);

    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut identity_err: Option<f64> = None;
    let mut converged = false;
    let mut prev_qu = &st.q_hat * &st.u_hat;
    let y_energy = fro_norm_sq(&obs.y).max(f64::MIN_POSITIVE);

    for iter in 1..=cfg.max_iters {
        sweep::backward(&mut st, &obs.y, noise_var, cfg);
        sweep::forward_layer1(&mut st, cfg).map_err(|e| diverged_from(e, iter, &trace))?;
        match cfg.scheme {
            Scheme::Bamp => sweep::update_q(&mut st, cfg).map_err(|e| diverged_from(e, iter, &trace))?,
            Scheme::Butamp => {
                let out = utamp_refine_q(&st, &obs.y, noise_var, &cfg.priors.q.kind, cfg.inner_iters)
                    .map_err(|e| diverged_from(e, iter, &trace))?;
                st.q_hat = out.q;
                st.v_q = out.v_q;
                st.clamp_q(cfg.var_floor);
                identity_err = Some(identity_err.unwrap_or(0.0).max(out.identity_err));
            }
        }
        sweep::forward_layer2(&mut st, cfg);

        let bx = &st.b_hat * &st.x_hat;
        let residual = relative_change(&bx, &st.prev_bx);
        let qu = &st.q_hat * &st.u_hat;
        let residual2 = relative_change(&qu, &prev_qu);
        st.prev_bx = bx;
        prev_qu = qu;

        let fit = fro_dist_sq(&obs.y, &prev_qu) / y_energy;
        if !st.is_finite()
            || !residual.is_finite()
            || residual > cfg.divergence_threshold
            || !(fit <= cfg.divergence_threshold)
        {
            return Err(Error::Diverged {
                iteration: iter,
                last_residual: residual,
                trace,
            });
        }
        trace.push(residual);
        observer(&IterInfo {
            iter,
            residual,
            residual_layer2: residual2,
            state: &st,
        });
        if residual <= cfg.tol {
            converged = iter >= 2;
            break;
        }
    }

    let mut est = EstimateSet::from_state(&st, &side.phi);
    est.iterations = trace.len();
    est.converged = converged;
    est.residual_trace = trace;
    est.unitary_identity_max_err = identity_err;
    Ok(est)
}

fn relative_change(now: &CMatrix, prev: &CMatrix) -> f64 {
    let num = fro_dist_sq(now, prev);
    let den = fro_norm_sq(now);
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn diverged_from(err: Error, iteration: usize, trace: &[f64]) -> Error {
    match err {
        Error::NonFinite(_) | Error::Svd(_) => Error::Diverged {
            iteration,
            last_residual: trace.last().copied().unwrap_or(f64::NAN),
            trace: trace.to_vec(),
        },
        other => other,
    }
}
