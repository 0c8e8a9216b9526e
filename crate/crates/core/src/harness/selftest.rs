//! Numerical self-checks runnable from the command line.
//!
//! Every check compares the production code against a reference computed
//! differently: posterior moments by trapezoidal quadrature on a grid,
//! Gaussian algebra by moment matching on the same grid, derivatives by
//! central differences.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bamp::{BampConfig, Scheme};
use crate::error::Result;
use crate::model::GenConfig;
use crate::priors::{denoise, ep_extrinsic, gauss_combine, GaussianMsg, PriorKind};

use super::fixtures::tiny_noiseless;
use super::trial::{run_trial, trial_data, Receiver};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest observed error or the measured quantity.
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }
}

/// `∫ f(x) w(x) dx` over `C` by the trapezoidal rule, where `w` is a
/// positive weight concentrated around `center` with scale `scale`.
fn grid_moments(center: Complex64, scale: f64, weight: impl Fn(Complex64) -> f64) -> (f64, Complex64, f64) {
    const HALF: i32 = 90;
    let h = 12.0 * scale / HALF as f64;
    let (mut z, mut m1, mut m2) = (0.0, Complex64::new(0.0, 0.0), 0.0);
    for i in -HALF..=HALF {
        for j in -HALF..=HALF {
            let x = center + Complex64::new(i as f64 * h, j as f64 * h);
            let w = weight(x);
            z += w;
            m1 += x * w;
            m2 += x.norm_sqr() * w;
        }
    }
    let da = h * h;
    (z * da, m1 * da, m2 * da)
}

fn cn_density(x: Complex64, mean: Complex64, var: f64) -> f64 {
    (-(x - mean).norm_sqr() / var).exp() / (std::f64::consts::PI * var)
}

/// Posterior mean and variance of `x` under `prior · CN(r; x, Σ)` by direct
/// integration (continuous parts) and enumeration (atoms).
pub fn reference_posterior(prior: &PriorKind, r: Complex64, sigma: f64) -> (Complex64, f64) {
    let (z, m1, m2) = match prior {
        PriorKind::Gaussian { mean, var } => {
            let pv = 1.0 / (1.0 / var + 1.0 / sigma);
            let c = (mean / var + r / sigma) * pv;
            grid_moments(c, pv.sqrt(), |x| cn_density(x, *mean, *var) * cn_density(r, x, sigma))
        }
        PriorKind::BernoulliGaussian { density, var } => {
            let pv = 1.0 / (1.0 / var + 1.0 / sigma);
            let c = (r / sigma) * pv;
            let (z, m1, m2) = grid_moments(c, pv.sqrt(), |x| {
                density * cn_density(x, Complex64::new(0.0, 0.0), *var) * cn_density(r, x, sigma)
            });
            // the atom at zero adds mass but no moments
            (z + (1.0 - density) * cn_density(r, Complex64::new(0.0, 0.0), sigma), m1, m2)
        }
        PriorKind::Discrete { points, probs } => {
            let mut acc = (0.0, Complex64::new(0.0, 0.0), 0.0);
            for (s, p) in points.iter().zip(probs) {
                let w = p * cn_density(r, *s, sigma);
                acc.0 += w;
                acc.1 += s * w;
                acc.2 += s.norm_sqr() * w;
            }
            acc
        }
    };
    let mean = m1 / z;
    (mean, m2 / z - mean.norm_sqr())
}

fn random_msg(rng: &mut ChaCha8Rng, spread: f64) -> (Complex64, f64) {
    let r = Complex64::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread));
    let sigma = 10f64.powf(rng.random_range(-1.3..0.7));
    (r, sigma)
}

fn test_priors() -> Vec<(&'static str, PriorKind)> {
    vec![
        (
            "gaussian",
            PriorKind::Gaussian {
                mean: Complex64::new(0.4, -0.3),
                var: 0.8,
            },
        ),
        ("bernoulli_gaussian", PriorKind::sparse(0.2)),
        (
            "discrete",
            PriorKind::Discrete {
                points: vec![
                    Complex64::new(1.0, 0.0),
                    Complex64::new(-0.5, 0.9),
                    Complex64::new(-0.5, -0.9),
                    Complex64::new(0.1, 0.2),
                ],
                probs: vec![0.4, 0.3, 0.2, 0.1],
            },
        ),
    ]
}

/// Largest absolute deviation of [`denoise`] from the quadrature reference
/// over `n` random messages, per prior kind.
pub fn denoiser_errors(n: usize, seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (name, prior) in test_priors() {
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let (r, sigma) = random_msg(&mut rng, 2.0);
            let got = denoise(&prior, GaussianMsg::new(r, sigma))?;
            let (mean, var) = reference_posterior(&prior, r, sigma);
            worst = worst.max((got.mean - mean).norm()).max((got.var - var).abs());
        }
        out.push((name, worst));
    }
    Ok(out)
}

/// Round trip `ep_extrinsic(gauss_combine(a, b), b) = a` and the
/// quadrature moments of the normalized product, worst case over `n` pairs.
pub fn gaussian_algebra_errors(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut round, mut quad): (f64, f64) = (0.0, 0.0);
    for _ in 0..n {
        let (ma, va) = random_msg(&mut rng, 2.0);
        let (mb, vb) = random_msg(&mut rng, 2.0);
        let a = GaussianMsg::new(ma, va);
        let b = GaussianMsg::new(mb, vb);
        let prod = gauss_combine(a, b);
        let back = ep_extrinsic(prod, b);
        round = round.max((back.mean - a.mean).norm() / (1.0 + a.mean.norm()));
        round = round.max((back.var - a.var).abs() / a.var);

        let pv = 1.0 / (1.0 / va + 1.0 / vb);
        let c = (ma / va + mb / vb) * pv;
        let (z, m1, m2) = grid_moments(c, pv.sqrt(), |x| cn_density(x, ma, va) * cn_density(x, mb, vb));
        let mean = m1 / z;
        let var = m2 / z - mean.norm_sqr();
        quad = quad.max((prod.mean - mean).norm()).max((prod.var - var).abs());
    }
    (round, quad)
}

/// Worst relative gap between the posterior variance and `Σ·∂g/∂r`
/// (Wirtinger derivative by central differences) over `n` random messages
/// and all test priors. Messages whose posterior variance sits at the
/// variance floor carry no derivative information and are skipped.
pub fn derivative_identity_error(n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (_, prior) in test_priors() {
        for _ in 0..n {
            let (r, sigma) = random_msg(&mut rng, 1.5);
            let h = 1e-4 * sigma.sqrt();
            let g = |z: Complex64| denoise(&prior, GaussianMsg::new(z, sigma)).map(|m| m.mean);
            let d_re = (g(r + h)? - g(r - h)?) / (2.0 * h);
            let d_im = (g(r + Complex64::new(0.0, h))? - g(r - Complex64::new(0.0, h))?) / (2.0 * h);
            let wirtinger = 0.5 * (d_re - Complex64::new(0.0, 1.0) * d_im);
            let var = denoise(&prior, GaussianMsg::new(r, sigma))?.var;
            if var <= 1e3 * crate::priors::VAR_FLOOR {
                continue;
            }
            let implied = sigma * wirtinger;
            let gap = ((implied.re - var).abs() + implied.im.abs()) / var;
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}

/// Largest unitary-identity deviation over a BUTAMP run at desk scale.
pub fn unitary_identity_error(gen: &GenConfig, cfg: &BampConfig, seed: u64) -> Result<f64> {
    let mut cfg = cfg.clone();
    cfg.scheme = Scheme::Butamp;
    let data = trial_data(gen, seed)?;
    let mut worst: f64 = 0.0;
    let res = crate::bamp::run_observed(&data.obs, &data.side, &cfg, |info| {
        let st = info.state;
        if let Ok(svd) = crate::bamp::utamp::thin_svd(&st.u_hat) {
            let e = crate::bamp::utamp::unitary_identity_err(&data.obs.y, &st.q_hat, &st.u_hat, &svd);
            worst = worst.max(e);
        }
    });
    let engine = match res {
        Ok(est) => est.unitary_identity_max_err.unwrap_or(0.0),
        Err(crate::error::Error::Diverged { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(worst.max(engine))
}

/// The full suite with the tolerances of the acceptance criteria.
pub fn run_all() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (name, err) in denoiser_errors(20, 11)? {
        checks.push(Check::at_most(&format!("denoiser_{name}"), err, 1e-6));
    }
    let (round, quad) = gaussian_algebra_errors(20, 12);
    checks.push(Check::at_most("gauss_round_trip", round, 1e-8));
    checks.push(Check::at_most("gauss_quadrature", quad, 1e-8));
    checks.push(Check::at_most("derivative_identity", derivative_identity_error(20, 13)?, 1e-5));

    let (gen, cfg) = tiny_noiseless();
    let r = run_trial(&gen, &cfg, 0, Receiver::Joint)?;
    let worst = if r.diverged { f64::INFINITY } else { r.nmse_b.max(r.nmse_r).max(r.nmse_x) };
    checks.push(Check::at_most("tiny_noiseless_recovery_db", worst, -80.0));

    let err = unitary_identity_error(&GenConfig::desk(), &BampConfig::desk(), 0)?;
    checks.push(Check::at_most("unitary_identity", err, 1e-10));
    Ok(checks)
}
