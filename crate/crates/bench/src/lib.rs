//! Fixtures shared by the benchmarks.

use ris_bamp::harness::trial::trial_data;
use ris_bamp::{BampConfig, GenConfig, Observation, Result, SideInfo};

/// One desk-scale scenario with `t` time slots (`T_p = ⌈0.3·t⌉`) at 30 dB.
pub fn desk_fixture(t: usize, seed: u64) -> Result<(Observation, SideInfo, BampConfig)> {
    let mut gen = GenConfig::desk();
    gen.dims.t = t;
    gen.dims.t_p = (t * 3).div_ceil(10);
    let data = trial_data(&gen, seed)?;
    Ok((data.obs, data.side, BampConfig::desk()))
}

/// `cfg` limited to exactly `iters` outer iterations.
pub fn fixed_iterations(cfg: &BampConfig, iters: usize) -> BampConfig {
    BampConfig {
        max_iters: iters,
        tol: f64::MIN_POSITIVE,
        ..cfg.clone()
    }
}
