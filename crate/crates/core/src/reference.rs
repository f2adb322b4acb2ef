//! The reference deployment used throughout the test-suites and bundled
//! scenarios: three panels of four elements, 4 bit/s/Hz, four HARQ rounds.

use std::f64::consts::PI;

use crate::channel::{
    db_to_linear, path_gain, DirectLink, LosPhaseSeed, NetworkConfig, PathLossSpec, RisPanel,
};
use crate::error::Result;

pub const PANELS: usize = 3;
pub const ELEMENTS_PER_PANEL: usize = 4;
pub const RATE: f64 = 4.0;
pub const ROUNDS: u32 = 4;
pub const KAPPA_SD_DB: f64 = -5.0;
pub const KAPPA_RD_DB: f64 = 0.4;
pub const REFERENCE_DISTANCE: f64 = 20.0;

pub const DIRECT_PATH: PathLossSpec = PathLossSpec {
    distance: 70.0,
    reference_distance: REFERENCE_DISTANCE,
    exponent: 2.5,
};
pub const SOURCE_PANEL_PATH: PathLossSpec = PathLossSpec {
    distance: 50.0,
    reference_distance: REFERENCE_DISTANCE,
    exponent: 2.0,
};
pub const PANEL_DESTINATION_PATH: PathLossSpec = PathLossSpec {
    distance: 40.0,
    reference_distance: REFERENCE_DISTANCE,
    exponent: 2.2,
};

/// Per-panel phase-shift pattern `(0, π/6, π/4, π/3)`.
pub const THETA_PATTERN: [f64; 4] = [0.0, PI / 6.0, PI / 4.0, PI / 3.0];

/// LoS phases drawn from `los_seed` (see [`LosPhaseSeed`]).
pub fn network(elements_per_panel: usize, los_seed: u64) -> Result<NetworkConfig> {
    let seed = LosPhaseSeed(los_seed);
    let direct = DirectLink::new(
        path_gain(&DIRECT_PATH)?,
        db_to_linear(KAPPA_SD_DB),
        seed.direct(),
    )?;
    let beta_sr = path_gain(&SOURCE_PANEL_PATH)?;
    let beta_rd = path_gain(&PANEL_DESTINATION_PATH)?;
    let panels = (0..PANELS)
        .map(|k| {
            let (sr, rd) = seed.panel(k, elements_per_panel);
            RisPanel::new(beta_sr, beta_rd, db_to_linear(KAPPA_RD_DB), sr, rd)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkConfig::new(direct, panels))
}

/// SNR grid in dB, `0, 1, ..., 50`.
pub fn snr_grid_db() -> Vec<f64> {
    (0..=50).map(f64::from).collect()
}
