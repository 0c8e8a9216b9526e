//! Named configurations shared by the self-test, the CLI and the tests.

use crate::bamp::{BampConfig, PriorSet};
use crate::model::{GenConfig, SignalPrior, SystemDims};

/// Noiseless anchored instance with `M=2, N=2, K=4, T=8, T_p=4, K_p=2`,
/// QPSK signal and dense channels. The stopping tolerance is tiny so the
/// run uses its full iteration budget.
pub fn tiny_noiseless() -> (GenConfig, BampConfig) {
    let mut gen = GenConfig::new(SystemDims::new(2, 4, 2, 8, 4, 2));
    gen.snr_db = f64::INFINITY;
    gen.signal_prior = SignalPrior::Qpsk;
    let bamp = BampConfig {
        priors: PriorSet::matching(&gen),
        tol: 1e-30,
        max_iters: 200,
        ..BampConfig::default()
    };
    (gen, bamp)
}
