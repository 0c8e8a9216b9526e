mod common;

use common::{c, posterior_moments};
use num_complex::Complex64;
use proptest::prelude::*;
use ris_bamp::priors::{VAR_FLOOR, VAR_MAX};
use ris_bamp::{denoise, ep_extrinsic, gauss_combine, GaussianMsg, PriorKind};

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn hermite_rule_integrates_moments() {
    let nodes = common::gauss_hermite(20);
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    let second: f64 = nodes.iter().map(|(t, w)| w * t * t).sum();
    assert!((second - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
}

#[test]
fn gaussian_prior_closed_form() {
    let out = denoise(&PriorKind::standard_gaussian(), GaussianMsg::real(2.0, 1.0)).unwrap();
    assert!(close(out.mean, c(1.0, 0.0), 1e-15));
    assert!((out.var - 0.5).abs() < 1e-15);
}

#[test]
fn vague_message_returns_the_prior() {
    let prior = PriorKind::Gaussian { mean: c(0.7, -1.1), var: 0.4 };
    for sigma in [f64::INFINITY, VAR_MAX] {
        let out = denoise(&prior, GaussianMsg::new(c(3.0, 3.0), sigma)).unwrap();
        assert!(close(out.mean, c(0.7, -1.1), 1e-9), "{out:?}");
        assert!((out.var - 0.4).abs() < 1e-9);
    }
}

#[test]
fn bernoulli_gaussian_matches_quadrature() {
    let prior = PriorKind::BernoulliGaussian { density: 0.3, var: 1.0 };
    let out = denoise(&prior, GaussianMsg::real(0.5, 0.2)).unwrap();
    let (mean, var) = posterior_moments(&prior, c(0.5, 0.0), 0.2);
    assert!(close(out.mean, mean, 1e-8), "{} vs {mean}", out.mean);
    assert!((out.var - var).abs() < 1e-8);
    // frozen; the closed-form spike-and-slab mixture gives the same digits
    assert!(close(out.mean, c(0.0701444257177608, 0.0), 1e-12), "{}", out.mean);
    assert!((out.var - 0.052364373876896866).abs() < 1e-12, "{}", out.var);
}

#[test]
fn discrete_prior_is_exact_enumeration() {
    let points = vec![c(1.0, 0.0), c(-1.0, 0.0)];
    let prior = PriorKind::Discrete { points, probs: vec![0.5, 0.5] };
    let out = denoise(&prior, GaussianMsg::real(0.3, 0.5)).unwrap();
    // two-point posterior: mean tanh(2·r/Σ) for real r
    let expect = (2.0 * 0.3 / 0.5f64).tanh();
    assert!(close(out.mean, c(expect, 0.0), 1e-14));
    assert!((out.var - (1.0 - expect * expect)).abs() < 1e-14);
}

#[test]
fn qpsk_posterior_variance_is_bounded_by_power() {
    for r in [c(0.0, 0.0), c(5.0, -5.0), c(0.1, 0.7)] {
        let out = denoise(&PriorKind::qpsk(), GaussianMsg::new(r, 0.3)).unwrap();
        assert!(out.var <= 1.0 + 1e-12);
    }
}

#[test]
fn ep_examples() {
    let out = ep_extrinsic(GaussianMsg::real(1.0, 0.5), GaussianMsg::real(1.0, 1.0));
    assert!(close(out.mean, c(1.0, 0.0), 1e-15));
    assert!((out.var - 1.0).abs() < 1e-15);

    let m = GaussianMsg::new(c(-0.4, 2.0), 0.9);
    let out = ep_extrinsic(m, m);
    assert_eq!(out.var, VAR_FLOOR);
    assert_eq!(out.mean, m.mean);

    // belief wider than the cavity: negative precision
    let out = ep_extrinsic(GaussianMsg::real(0.0, 2.0), GaussianMsg::real(1.0, 1.0));
    assert_eq!(out.var, VAR_FLOOR);
}

#[test]
fn combine_examples() {
    let out = gauss_combine(GaussianMsg::real(0.0, 1.0), GaussianMsg::real(4.0, 1.0));
    assert!(close(out.mean, c(2.0, 0.0), 1e-15));
    assert!((out.var - 0.5).abs() < 1e-15);
    let a = GaussianMsg::new(c(1.5, -0.5), 0.3);
    let out = gauss_combine(a, GaussianMsg::real(9.0, f64::INFINITY));
    assert_eq!(out, a);
}

#[test]
fn non_finite_input_is_an_error() {
    let err = denoise(&PriorKind::qpsk(), GaussianMsg::new(c(f64::INFINITY, 0.0), 1.0));
    assert!(matches!(err, Err(ris_bamp::Error::NonFinite(_))));
}

fn msg_strategy() -> impl Strategy<Value = GaussianMsg> {
    (-3.0..3.0f64, -3.0..3.0f64, -2.0..1.0f64).prop_map(|(re, im, lv)| GaussianMsg::new(c(re, im), 10f64.powf(lv)))
}

fn prior_strategy() -> impl Strategy<Value = PriorKind> {
    prop_oneof![
        (-1.0..1.0f64, -1.0..1.0f64, 0.1..3.0f64).prop_map(|(re, im, var)| PriorKind::Gaussian { mean: c(re, im), var }),
        (0.05..1.0f64, 0.2..5.0f64).prop_map(|(density, var)| PriorKind::BernoulliGaussian { density, var }),
        Just(PriorKind::qpsk()),
    ]
}

proptest! {
    #[test]
    fn denoiser_matches_oracle(prior in prior_strategy(), msg in msg_strategy()) {
        let out = denoise(&prior, msg).unwrap();
        let (mean, var) = posterior_moments(&prior, msg.mean, msg.var);
        prop_assert!(close(out.mean, mean, 1e-6), "{} vs {}", out.mean, mean);
        prop_assert!((out.var - var).abs() < 1e-6);
    }

    #[test]
    fn posterior_variance_is_floored_and_finite(prior in prior_strategy(), msg in msg_strategy()) {
        let out = denoise(&prior, msg).unwrap();
        prop_assert!(out.var >= VAR_FLOOR);
        prop_assert!(out.var.is_finite() && out.mean.re.is_finite() && out.mean.im.is_finite());
    }

    #[test]
    fn gaussian_posterior_contracts(
        re in -1.0..1.0f64, v0 in 0.1..3.0f64, msg in msg_strategy()
    ) {
        let out = denoise(&PriorKind::Gaussian { mean: c(re, 0.0), var: v0 }, msg).unwrap();
        prop_assert!(out.var <= msg.var && out.var <= v0);
    }

    #[test]
    fn combine_commutes_and_associates(a in msg_strategy(), b in msg_strategy(), d in msg_strategy()) {
        let ab = gauss_combine(a, b);
        let ba = gauss_combine(b, a);
        prop_assert!(close(ab.mean, ba.mean, 1e-10) && (ab.var - ba.var).abs() < 1e-10);
        let left = gauss_combine(ab, d);
        let right = gauss_combine(a, gauss_combine(b, d));
        prop_assert!(close(left.mean, right.mean, 1e-10) && (left.var - right.var).abs() < 1e-10);
    }

    #[test]
    fn extrinsic_undoes_combine(a in msg_strategy(), b in msg_strategy()) {
        let back = ep_extrinsic(gauss_combine(a, b), b);
        prop_assert!(close(back.mean, a.mean, 1e-10 * (1.0 + a.mean.norm())));
        prop_assert!((back.var - a.var).abs() < 1e-10 * a.var.max(1.0));
        // and multiplying back recovers the belief
        let belief = gauss_combine(a, b);
        let again = gauss_combine(back, b);
        prop_assert!(close(again.mean, belief.mean, 1e-10) && (again.var - belief.var).abs() < 1e-10);
    }
}
