//! Reference computations shared by the integration tests. Nothing here
//! calls into the estimator's own formulas.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use ris_bamp::PriorKind;

/// Gauss–Hermite nodes and weights for `∫ f(t) e^{-t²} dt` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `∫ f(x) CN(x; c, v) dx` over the complex plane by a tensor Gauss–Hermite rule.
pub fn cn_expectation(c: Complex64, v: f64, nodes: &[(f64, f64)], mut f: impl FnMut(Complex64) -> f64) -> f64 {
    let s = v.sqrt();
    let mut acc = 0.0;
    for &(t1, w1) in nodes {
        for &(t2, w2) in nodes {
            acc += w1 * w2 * f(c + Complex64::new(t1, t2) * s);
        }
    }
    acc / std::f64::consts::PI
}

pub fn cn_pdf(x: Complex64, mean: Complex64, var: f64) -> f64 {
    (-(x - mean).norm_sqr() / var).exp() / (std::f64::consts::PI * var)
}

/// Posterior mean and variance of `x` under `prior(x)·CN(r; x, Σ)`.
///
/// Continuous parts are integrated against the Gaussian that the slab and
/// the likelihood form together, so the rule only sees the ratio of the
/// true integrand to that Gaussian. Atoms are summed exactly.
pub fn posterior_moments(prior: &PriorKind, r: Complex64, sigma: f64) -> (Complex64, f64) {
    let nodes = gauss_hermite(40);
    let zero = Complex64::new(0.0, 0.0);
    let (mut z, mut m1, mut m2) = (0.0, zero, 0.0);
    let mut slab = |mean: Complex64, var: f64, weight: f64| {
        let pv = 1.0 / (1.0 / var + 1.0 / sigma);
        let c = (mean / var + r / sigma) * pv;
        let integrand = |x: Complex64| weight * cn_pdf(x, mean, var) * cn_pdf(r, x, sigma) / cn_pdf(x, c, pv);
        z += cn_expectation(c, pv, &nodes, integrand);
        m1 += Complex64::new(
            cn_expectation(c, pv, &nodes, |x| x.re * integrand(x)),
            cn_expectation(c, pv, &nodes, |x| x.im * integrand(x)),
        );
        m2 += cn_expectation(c, pv, &nodes, |x| x.norm_sqr() * integrand(x));
    };
    match prior {
        PriorKind::Gaussian { mean, var } => slab(*mean, *var, 1.0),
        PriorKind::BernoulliGaussian { density, var } => {
            slab(zero, *var, *density);
            z += (1.0 - density) * cn_pdf(r, zero, sigma);
        }
        PriorKind::Discrete { points, probs } => {
            for (s, p) in points.iter().zip(probs) {
                let w = p * cn_pdf(r, *s, sigma);
                z += w;
                m1 += s * w;
                m2 += s.norm_sqr() * w;
            }
        }
    }
    let mean = m1 / z;
    (mean, m2 / z - mean.norm_sqr())
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
