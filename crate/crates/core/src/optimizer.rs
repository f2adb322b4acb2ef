//! Outage-minimizing phase shifts.
//!
//! Both asymptotic outages depend on the phases only through
//! `Ψ_gLoS(θ) = |a e^{jφ_sd} + Σ c_{k,n} e^{j(φ_{k,n} + θ_{k,n})}|²` and decrease
//! in it, so the optimum rotates every reflected phasor onto the direct LoS
//! phasor. That reaches the triangle-inequality bound `(a + Σ c)²`.

use std::f64::consts::FRAC_PI_3;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{exact_curve, HarqParams, OutageCurve};
use crate::channel::{compute_stats, wrap_phase, NetworkConfig, PhaseConfig};
use crate::error::{Error, Result};
use crate::specfun::TruncationPolicy;

/// Constant shift used by the `fixed` baseline.
pub const FIXED_BASELINE_PHASE: f64 = FRAC_PI_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSolution {
    pub phases: PhaseConfig,
    pub psi_glos_achieved: f64,
    pub upper_bound: f64,
    pub gap: f64,
}

/// Closed-form maximizer of the LoS power.
///
/// With no direct LoS component (`κ_sd = 0`) every reflected phasor is
/// aligned to phase 0 instead.
pub fn optimal_phases(net: &NetworkConfig) -> Result<PhaseSolution> {
    if net.total_elements() == 0 {
        return Err(Error::Degenerate(
            "network has no reflecting elements".into(),
        ));
    }
    let target = if net.direct.los_amplitude() > 0.0 {
        net.direct.los_phase
    } else {
        0.0
    };
    let thetas = net
        .panels
        .iter()
        .map(|p| {
            (0..p.n_elements())
                .map(|n| wrap_phase(target - p.los_phases_sr[n] - p.los_phases_rd[n]))
                .collect()
        })
        .collect();
    let phases = PhaseConfig::new(net, thetas)?;
    let achieved = compute_stats(net, &phases)?.psi_glos;
    let upper_bound = net.los_upper_bound();
    Ok(PhaseSolution {
        phases,
        psi_glos_achieved: achieved,
        upper_bound,
        gap: upper_bound - achieved,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseStrategy {
    Optimal,
    Fixed(f64),
    Random(u64),
}

impl PhaseStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            PhaseStrategy::Optimal => "optimal",
            PhaseStrategy::Fixed(_) => "fixed",
            PhaseStrategy::Random(_) => "random",
        }
    }

    pub fn phases(&self, net: &NetworkConfig) -> Result<PhaseConfig> {
        match *self {
            PhaseStrategy::Optimal => Ok(optimal_phases(net)?.phases),
            PhaseStrategy::Fixed(theta) => PhaseConfig::constant(net, theta),
            PhaseStrategy::Random(seed) => Ok(PhaseConfig::random(net, seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyCurve {
    pub strategy: PhaseStrategy,
    pub psi_glos: f64,
    pub curve: OutageCurve,
}

/// Exact outage curves for the optimal, fixed `π/3` and seeded random phase settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub solution: PhaseSolution,
    pub curves: Vec<StrategyCurve>,
}

impl StrategyComparison {
    pub fn curve(&self, label: &str) -> Option<&StrategyCurve> {
        self.curves.iter().find(|c| c.strategy.label() == label)
    }
}

pub fn compare_strategies(
    net: &NetworkConfig,
    harq: &HarqParams,
    policy: TruncationPolicy,
    random_seed: u64,
) -> Result<StrategyComparison> {
    let solution = optimal_phases(net)?;
    let strategies = [
        PhaseStrategy::Optimal,
        PhaseStrategy::Fixed(FIXED_BASELINE_PHASE),
        PhaseStrategy::Random(random_seed),
    ];
    let curves = strategies
        .par_iter()
        .map(|s| {
            let phases = match s {
                PhaseStrategy::Optimal => solution.phases.clone(),
                other => other.phases(net)?,
            };
            let stats = compute_stats(net, &phases)?;
            Ok(StrategyCurve {
                strategy: *s,
                psi_glos: stats.psi_glos,
                curve: exact_curve(&stats, harq, policy)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StrategyComparison { solution, curves })
}
