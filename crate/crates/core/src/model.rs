//! Synthetic ground truth for a RIS-assisted downlink in beamspace.
//!
//! The observation model is `Y = Hr·Φ·Hb·X + W` with `Q = Hr·Φ` and
//! `U = Hb·X`. Channels are generated in the antenna domain from a few
//! propagation paths and moved to beamspace with unitary DFT factors
//! (`Hr = F1ᴴ·H̃r`, `Hb = H̃b·F2ᴴ`), or drawn directly as Bernoulli–Gaussian
//! beamspace matrices.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{seq::index::sample, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fro_norm_sq, serde_cmat, CMatrix, ZERO};
use crate::priors::qpsk_points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    /// BS antennas.
    pub m: usize,
    /// Single-antenna users.
    pub k: usize,
    /// RIS elements.
    pub n: usize,
    /// Time slots.
    pub t: usize,
    /// Leading pilot columns of `X`.
    pub t_p: usize,
    /// Leading rows of `Hr` known at the receiver.
    pub k_p: usize,
}

impl SystemDims {
    /// Reduced-scale default: `M=16, K=48, N=24, T=64, T_p=20, K_p=12`.
    pub const DESK: SystemDims = SystemDims {
        m: 16,
        k: 48,
        n: 24,
        t: 64,
        t_p: 20,
        k_p: 12,
    };

    pub fn new(m: usize, k: usize, n: usize, t: usize, t_p: usize, k_p: usize) -> Self {
        Self { m, k, n, t, t_p, k_p }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.n == 0 || self.t == 0 {
            return Err(Error::dim(format!("all of M, K, N, T must be positive: {self:?}")));
        }
        if self.t_p > self.t {
            return Err(Error::dim(format!("T_p = {} exceeds T = {}", self.t_p, self.t)));
        }
        if self.k_p > self.k {
            return Err(Error::dim(format!("K_p = {} exceeds K = {}", self.k_p, self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Multipath array-response channels, sparsified in beamspace.
    Geometric,
    /// Beamspace entries drawn directly: an exact-size random support with
    /// `CN(0, 1/ρ)` values.
    BernoulliGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPrior {
    Gaussian,
    Qpsk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub dims: SystemDims,
    /// Propagation paths per RIS element (resp. per BS-side row).
    pub paths: usize,
    pub wavelength: f64,
    pub spacing: f64,
    pub density_b: f64,
    pub density_r: f64,
    /// `+∞` disables the noise; written as the string `"inf"` in JSON.
    #[serde(with = "serde_snr")]
    pub snr_db: f64,
    pub seed: u64,
    pub channel_mode: ChannelMode,
    pub signal_prior: SignalPrior,
    /// Resolution of the RIS phase set: `2^phase_bits` uniformly spaced phases.
    pub phase_bits: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl GenConfig {
    /// Desk-scale experiment defaults: [`SystemDims::DESK`], dense `Hb`,
    /// `Hr` with a quarter of its beamspace entries non-zero, QPSK data.
    pub fn desk() -> Self {
        Self {
            density_b: 1.0,
            density_r: 0.25,
            signal_prior: SignalPrior::Qpsk,
            ..Self::new(SystemDims::DESK)
        }
    }

    pub fn new(dims: SystemDims) -> Self {
        Self {
            dims,
            paths: 3,
            wavelength: 1.0,
            spacing: 0.5,
            density_b: 1.0,
            density_r: 1.0,
            snr_db: 30.0,
            seed: 0,
            channel_mode: ChannelMode::BernoulliGaussian,
            signal_prior: SignalPrior::Gaussian,
            phase_bits: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.paths == 0 {
            return Err(Error::config("at least one propagation path is required"));
        }
        if !(self.wavelength > 0.0) || !(self.spacing > 0.0) {
            return Err(Error::config("wavelength and element spacing must be positive"));
        }
        for (name, rho) in [("density_b", self.density_b), ("density_r", self.density_r)] {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1], got {rho}")));
            }
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::config(format!("snr_db must be finite or +inf, got {}", self.snr_db)));
        }
        if self.phase_bits == 0 || self.phase_bits > 16 {
            return Err(Error::config("phase_bits must lie in 1..=16"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// Beamspace BS→RIS channel, `N×M`.
    #[serde(with = "serde_cmat")]
    pub hb: CMatrix,
    /// Beamspace RIS→users channel, `K×N`.
    #[serde(with = "serde_cmat")]
    pub hr: CMatrix,
    /// Diagonal of the RIS phase configuration (unit modulus).
    pub phi: Vec<Complex64>,
    /// `Hr·Φ`, `K×N`.
    #[serde(with = "serde_cmat")]
    pub q: CMatrix,
    #[serde(with = "serde_cmat")]
    pub f1: CMatrix,
    #[serde(with = "serde_cmat")]
    pub f2: CMatrix,
}

impl ChannelSet {
    pub fn phi_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_vec(self.phi.clone()))
    }

    /// The first `k_p` rows of `Hr`.
    pub fn anchor_rows(&self, k_p: usize) -> CMatrix {
        self.hr.rows(0, k_p).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFrame {
    /// Transmitted beamspace signal, `M×T`.
    #[serde(with = "serde_cmat")]
    pub x: CMatrix,
    pub pilot_mask: Vec<bool>,
    pub prior: SignalPrior,
}

impl SignalFrame {
    pub fn n_pilots(&self) -> usize {
        self.pilot_mask.iter().take_while(|p| **p).count()
    }

    /// The known `M×T_p` pilot block.
    pub fn pilots(&self) -> CMatrix {
        self.x.columns(0, self.n_pilots()).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Received beamspace signal, `K×T`.
    #[serde(with = "serde_cmat")]
    pub y: CMatrix,
    pub noise_var: f64,
    /// `Hb·X`, retained for diagnostics.
    #[serde(with = "serde_cmat")]
    pub u_true: CMatrix,
}

/// SNR as a JSON number, or `"inf"` for the noiseless case.
pub mod serde_snr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else if *v > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Err(serde::ser::Error::custom(format!("SNR {v} is not representable")))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad SNR `{t}`"))),
        }
    }
}

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Channels = 1,
    Signal = 2,
    Noise = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Unitary DFT matrix with entries `exp(−j2πpq/size)/√size`.
pub fn make_dft(size: usize) -> Result<CMatrix> {
    if size == 0 {
        return Err(Error::dim("DFT size must be at least 1"));
    }
    let scale = 1.0 / (size as f64).sqrt();
    Ok(CMatrix::from_fn(size, size, |p, q| {
        // reduce the exponent modulo size before the trig call to keep
        // large products exact
        let k = ((p * q) % size) as f64;
        Complex64::from_polar(scale, -2.0 * PI * k / size as f64)
    }))
}

/// Uniform linear array response of length `len` with unit norm.
pub fn steering_vector(len: usize, spacing_over_wavelength: f64, angle: f64) -> DVector<Complex64> {
    let scale = 1.0 / (len as f64).sqrt();
    let step = 2.0 * PI * spacing_over_wavelength * angle.sin();
    DVector::from_fn(len, |i, _| Complex64::from_polar(scale, step * i as f64))
}

/// Sum of path responses `Σ_l gain_l · e(angle_l)`.
pub fn geometric_column(
    len: usize,
    spacing_over_wavelength: f64,
    paths: &[(Complex64, f64)],
) -> DVector<Complex64> {
    paths.iter().fold(DVector::zeros(len), |acc, &(gain, angle)| {
        acc + steering_vector(len, spacing_over_wavelength, angle) * gain
    })
}

fn path_gains<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Vec<(Complex64, f64)> {
    (0..cfg.paths)
        .map(|_| {
            let alpha = cn(rng, 1.0);
            let distance = rng.random_range(0.0..100.0 * cfg.wavelength);
            let beta = alpha * Complex64::from_polar(1.0, -2.0 * PI * distance / cfg.wavelength);
            let angle = rng.random_range(-PI / 2.0..PI / 2.0);
            (beta, angle)
        })
        .collect()
}

/// Keep the `round(density·len)` largest-magnitude entries, then rescale so
/// the mean entry power is one.
pub fn sparsify(h: &mut CMatrix, density: f64) {
    let len = h.len();
    let keep = ((density * len as f64).round() as usize).clamp(1, len);
    if keep < len {
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&a, &b| {
            h.as_slice()[b]
                .norm_sqr()
                .total_cmp(&h.as_slice()[a].norm_sqr())
                .then(a.cmp(&b))
        });
        for &idx in &order[keep..] {
            h.as_mut_slice()[idx] = ZERO;
        }
    }
    let power = fro_norm_sq(h);
    if power > 0.0 {
        *h *= Complex64::new((len as f64 / power).sqrt(), 0.0);
    }
}

fn bernoulli_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    density: f64,
) -> CMatrix {
    let len = rows * cols;
    let keep = ((density * len as f64).round() as usize).clamp(1, len);
    let mut h = CMatrix::zeros(rows, cols);
    let var = 1.0 / density;
    let mut support = sample(rng, len, keep).into_vec();
    support.sort_unstable();
    for idx in support {
        h.as_mut_slice()[idx] = cn(rng, var);
    }
    h
}

pub fn phase_set(bits: u32) -> Vec<Complex64> {
    let levels = 1usize << bits;
    (0..levels)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / levels as f64))
        .collect()
}

pub fn gen_channels(cfg: &GenConfig) -> Result<ChannelSet> {
    gen_channels_with(cfg, &mut stream_rng(cfg.seed, Stream::Channels))
}

pub fn gen_channels_with<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<ChannelSet> {
    cfg.validate()?;
    let SystemDims { m, k, n, .. } = cfg.dims;
    let f1 = make_dft(k)?;
    let f2 = make_dft(m)?;
    let d_over_l = cfg.spacing / cfg.wavelength;

    let (hr, hb) = match cfg.channel_mode {
        ChannelMode::Geometric => {
            let mut hr_ant = CMatrix::zeros(k, n);
            for col in 0..n {
                let paths = path_gains(rng, cfg);
                hr_ant.set_column(col, &geometric_column(k, d_over_l, &paths));
            }
            let mut hb_ant = CMatrix::zeros(n, m);
            for row in 0..n {
                let paths = path_gains(rng, cfg);
                hb_ant.set_row(row, &geometric_column(m, d_over_l, &paths).transpose());
            }
            let mut hr = f1.adjoint() * hr_ant;
            let mut hb = hb_ant * f2.adjoint();
            sparsify(&mut hr, cfg.density_r);
            sparsify(&mut hb, cfg.density_b);
            (hr, hb)
        }
        ChannelMode::BernoulliGaussian => {
            let hr = bernoulli_gaussian_matrix(rng, k, n, cfg.density_r);
            let hb = bernoulli_gaussian_matrix(rng, n, m, cfg.density_b);
            (hr, hb)
        }
    };

    let phases = phase_set(cfg.phase_bits);
    let phi: Vec<Complex64> = (0..n).map(|_| phases[rng.random_range(0..phases.len())]).collect();
    let mut q = hr.clone();
    for (col, p) in phi.iter().enumerate() {
        for row in 0..k {
            q[(row, col)] *= p;
        }
    }
    Ok(ChannelSet { hb, hr, phi, q, f1, f2 })
}

/// Unit-modulus pilot block with full row rank `min(M, T_p)`: a slice of a
/// DFT matrix of size `max(M, T_p)`.
pub fn pilot_block(m: usize, t_p: usize) -> CMatrix {
    let size = m.max(t_p).max(1);
    CMatrix::from_fn(m, t_p, |r, c| {
        let k = ((r * c) % size) as f64;
        Complex64::from_polar(1.0, -2.0 * PI * k / size as f64)
    })
}

pub fn gen_signal(cfg: &GenConfig) -> Result<SignalFrame> {
    gen_signal_with(cfg, &mut stream_rng(cfg.seed, Stream::Signal))
}

pub fn gen_signal_with<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<SignalFrame> {
    let SystemDims { m, t, t_p, .. } = cfg.dims;
    if t_p > t {
        return Err(Error::dim(format!("T_p = {t_p} exceeds T = {t}")));
    }
    let mut x = CMatrix::zeros(m, t);
    x.columns_mut(0, t_p).copy_from(&pilot_block(m, t_p));
    let qpsk = qpsk_points();
    for col in t_p..t {
        for row in 0..m {
            x[(row, col)] = match cfg.signal_prior {
                SignalPrior::Gaussian => cn(rng, 1.0),
                SignalPrior::Qpsk => qpsk[rng.random_range(0..4)],
            };
        }
    }
    Ok(SignalFrame {
        x,
        pilot_mask: (0..t).map(|c| c < t_p).collect(),
        prior: cfg.signal_prior,
    })
}

/// Pass `X` through the cascade and add white noise at the requested SNR,
/// measured on the noiseless output `A = Q·Hb·X`. `snr_db = +∞` disables
/// the noise.
pub fn simulate<R: Rng + ?Sized>(
    ch: &ChannelSet,
    sig: &SignalFrame,
    snr_db: f64,
    rng: &mut R,
) -> Result<Observation> {
    if ch.hb.ncols() != sig.x.nrows() || ch.q.ncols() != ch.hb.nrows() {
        return Err(Error::dim(format!(
            "Q {:?}, Hb {:?}, X {:?} do not chain",
            ch.q.shape(),
            ch.hb.shape(),
            sig.x.shape()
        )));
    }
    let u = &ch.hb * &sig.x;
    let a = &ch.q * &u;
    let (k, t) = a.shape();
    if snr_db == f64::INFINITY {
        return Ok(Observation { y: a, noise_var: 0.0, u_true: u });
    }
    let snr = 10f64.powf(snr_db / 10.0);
    let noise_var = fro_norm_sq(&a) / ((k * t) as f64 * snr);
    let mut y = a;
    for v in y.iter_mut() {
        *v += cn(rng, noise_var);
    }
    Ok(Observation { y, noise_var, u_true: u })
}

/// Full scenario for one seed: channels, signal and observation drawn from
/// independent streams.
pub fn scenario(cfg: &GenConfig) -> Result<(ChannelSet, SignalFrame, Observation)> {
    let ch = gen_channels(cfg)?;
    let sig = gen_signal(cfg)?;
    let obs = simulate(&ch, &sig, cfg.snr_db, &mut stream_rng(cfg.seed, Stream::Noise))?;
    Ok((ch, sig, obs))
}
