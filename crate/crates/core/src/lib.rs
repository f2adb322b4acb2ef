//! Outage analysis for HARQ-aided links assisted by multiple reconfigurable
//! intelligent surfaces (RIS).
//!
//! * [`specfun`]: incomplete gamma, log-domain Poisson weights, certified series truncation.
//! * [`channel`]: direct link, reflecting panels, LoS/NLoS powers of the equivalent channel.
//! * [`analytic`]: exact and asymptotic outage for Type-I HARQ and chase combining,
//!   coding gain and diversity-order fits.
//! * [`montecarlo`]: reproducible parallel simulation of the same link.
//! * [`optimizer`]: outage-minimizing phase shifts and baseline comparisons.

pub mod analytic;
pub mod channel;
pub mod error;
pub mod montecarlo;
pub mod optimizer;
pub mod reference;
pub mod specfun;

pub use analytic::{
    asymptotic_outage, coding_gain, exact_outage, fit_diversity, gain_cdf, outage_cc,
    outage_threshold, outage_type1, snr_offset_factor, sum_gain_cdf, DiversityFit, EstimateKind,
    HarqParams, OutageCurve, Scheme,
};
pub use channel::{
    compute_stats, ChannelStats, DirectLink, NetworkConfig, PathLossSpec, PhaseConfig, RisPanel,
};
pub use error::{Error, Result};
pub use montecarlo::{estimate_outage, OutageEstimate, SimulationPlan};
pub use optimizer::{compare_strategies, optimal_phases, PhaseSolution, PhaseStrategy};
pub use specfun::TruncationPolicy;
