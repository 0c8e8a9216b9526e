//! Scalar posterior denoisers and Gaussian message algebra.
//!
//! Every variable update of the estimator reduces to one of three scalar
//! operations on circularly-symmetric complex Gaussian messages
//! `CN(x; mean, var)`, where `var = E|x − mean|²`:
//!
//! * [`denoise`] combines an extrinsic message with a prior and returns the
//!   posterior mean and variance,
//! * [`gauss_combine`] multiplies two Gaussian messages,
//! * [`ep_extrinsic`] divides a belief by a cavity message.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every variance produced by this crate.
pub const VAR_FLOOR: f64 = 1e-12;

/// Variance assigned to a message that carries no information.
pub const VAR_MAX: f64 = 1e10;

/// A Gaussian message `CN(mean, var)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMsg {
    pub mean: Complex64,
    pub var: f64,
}

impl GaussianMsg {
    pub fn new(mean: Complex64, var: f64) -> Self {
        Self { mean, var }
    }

    pub fn real(mean: f64, var: f64) -> Self {
        Self::new(Complex64::new(mean, 0.0), var)
    }

    fn check_finite(&self) -> Result<()> {
        if self.mean.re.is_finite() && self.mean.im.is_finite() && !self.var.is_nan() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("message {:?}", self)))
        }
    }
}

/// The variable a prior is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variable {
    X,
    Hb,
    Q,
    U,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    Gaussian {
        mean: Complex64,
        var: f64,
    },
    /// `(1 − density)·δ(x) + density·CN(0, var)`.
    BernoulliGaussian {
        density: f64,
        var: f64,
    },
    Discrete {
        points: Vec<Complex64>,
        probs: Vec<f64>,
    },
}

impl PriorKind {
    pub fn standard_gaussian() -> Self {
        PriorKind::Gaussian {
            mean: Complex64::new(0.0, 0.0),
            var: 1.0,
        }
    }

    /// Bernoulli–Gaussian prior with unit average power.
    pub fn sparse(density: f64) -> Self {
        PriorKind::BernoulliGaussian {
            density,
            var: 1.0 / density,
        }
    }

    /// Equiprobable QPSK alphabet `{±1 ± j}/√2`.
    pub fn qpsk() -> Self {
        PriorKind::Discrete {
            points: qpsk_points().to_vec(),
            probs: vec![0.25; 4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorKind::Gaussian { mean, var } => {
                if !(*var > 0.0 && var.is_finite()) || !mean.re.is_finite() || !mean.im.is_finite()
                {
                    return Err(Error::config(format!("gaussian prior needs var > 0, got {var}")));
                }
            }
            PriorKind::BernoulliGaussian { density, var } => {
                if !(*density > 0.0 && *density <= 1.0) {
                    return Err(Error::config(format!("density must lie in (0, 1], got {density}")));
                }
                if !(*var > 0.0 && var.is_finite()) {
                    return Err(Error::config(format!("bernoulli-gaussian var must be > 0, got {var}")));
                }
            }
            PriorKind::Discrete { points, probs } => {
                if points.is_empty() || points.len() != probs.len() {
                    return Err(Error::config("discrete prior needs matching non-empty points/probs"));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::config("discrete probabilities must be non-negative"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!("discrete probabilities sum to {total}")));
                }
            }
        }
        Ok(())
    }

    /// Second moment `E|x|²` under the prior.
    pub fn power(&self) -> f64 {
        match self {
            PriorKind::Gaussian { mean, var } => mean.norm_sqr() + var,
            PriorKind::BernoulliGaussian { density, var } => density * var,
            PriorKind::Discrete { points, probs } => points
                .iter()
                .zip(probs)
                .map(|(s, p)| p * s.norm_sqr())
                .sum(),
        }
    }

    /// Prior mean.
    pub fn mean(&self) -> Complex64 {
        match self {
            PriorKind::Gaussian { mean, .. } => *mean,
            PriorKind::BernoulliGaussian { .. } => Complex64::new(0.0, 0.0),
            PriorKind::Discrete { points, probs } => {
                points.iter().zip(probs).map(|(s, p)| s * *p).sum()
            }
        }
    }
}

pub fn qpsk_points() -> [Complex64; 4] {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    [
        Complex64::new(a, a),
        Complex64::new(-a, a),
        Complex64::new(-a, -a),
        Complex64::new(a, -a),
    ]
}

/// A prior together with the variable it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub target: Variable,
}

impl PriorSpec {
    pub fn new(target: Variable, kind: PriorKind) -> Self {
        Self { kind, target }
    }
}

/// Posterior mean and variance of `x` under `prior(x) · CN(msg.mean; x, msg.var)`.
pub fn denoise(prior: &PriorKind, msg: GaussianMsg) -> Result<GaussianMsg> {
    msg.check_finite()?;
    if !(msg.var > 0.0) {
        return Err(Error::NonFinite(format!("message variance must be > 0, got {}", msg.var)));
    }
    let r = msg.mean;
    let sigma = msg.var;
    let out = match prior {
        PriorKind::Gaussian { mean, var } => {
            if sigma.is_infinite() {
                GaussianMsg::new(*mean, *var)
            } else {
                let v = 1.0 / (1.0 / sigma + 1.0 / var);
                GaussianMsg::new((r / sigma + mean / var) * v, v)
            }
        }
        PriorKind::BernoulliGaussian { density, var } => {
            bernoulli_gaussian_posterior(*density, *var, r, sigma)
        }
        PriorKind::Discrete { points, probs } => discrete_posterior(points, probs, r, sigma),
    };
    Ok(GaussianMsg::new(out.mean, out.var.max(VAR_FLOOR)))
}

fn bernoulli_gaussian_posterior(rho: f64, v0: f64, r: Complex64, sigma: f64) -> GaussianMsg {
    if sigma.is_infinite() {
        return GaussianMsg::new(Complex64::new(0.0, 0.0), rho * v0);
    }
    let gain = v0 / (v0 + sigma);
    let active_mean = r * gain;
    let active_var = sigma * gain;
    let pi = if rho >= 1.0 {
        1.0
    } else {
        // log of  rho·CN(r; 0, Σ+v0) / ((1 − rho)·CN(r; 0, Σ))
        let r2 = r.norm_sqr();
        let llr = (rho / (1.0 - rho)).ln() + (sigma / (sigma + v0)).ln() + r2 / sigma
            - r2 / (sigma + v0);
        logistic(llr)
    };
    let mean = active_mean * pi;
    let var = pi * active_var + pi * (1.0 - pi) * active_mean.norm_sqr();
    GaussianMsg::new(mean, var)
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn discrete_posterior(points: &[Complex64], probs: &[f64], r: Complex64, sigma: f64) -> GaussianMsg {
    let logw: Vec<f64> = points
        .iter()
        .zip(probs)
        .map(|(s, &p)| {
            if p > 0.0 {
                p.ln() - (r - s).norm_sqr() / sigma
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    for (s, lw) in points.iter().zip(&logw) {
        let w = (lw - max).exp();
        total += w;
        mean += s * w;
        second += w * s.norm_sqr();
    }
    let mean = mean / total;
    GaussianMsg::new(mean, (second / total - mean.norm_sqr()).max(0.0))
}

/// Product of two Gaussian messages, renormalized.
pub fn gauss_combine(a: GaussianMsg, b: GaussianMsg) -> GaussianMsg {
    if a.var.is_infinite() {
        return b;
    }
    if b.var.is_infinite() {
        return a;
    }
    let var = 1.0 / (1.0 / a.var + 1.0 / b.var);
    GaussianMsg::new((a.mean / a.var + b.mean / b.var) * var, var.max(VAR_FLOOR))
}

/// Gaussian division `belief / cavity`.
///
/// When the resulting precision is not positive the variance is clamped to
/// [`VAR_FLOOR`] and the belief mean is kept.
pub fn ep_extrinsic(belief: GaussianMsg, cavity: GaussianMsg) -> GaussianMsg {
    let prec = 1.0 / belief.var - 1.0 / cavity.var;
    if !(prec > 0.0) || !prec.is_finite() {
        return GaussianMsg::new(belief.mean, VAR_FLOOR);
    }
    let var = 1.0 / prec;
    if var < VAR_FLOOR {
        return GaussianMsg::new(belief.mean, VAR_FLOOR);
    }
    GaussianMsg::new((belief.mean / belief.var - cavity.mean / cavity.var) * var, var)
}
