//! Link model: a Rician direct link plus `K` reflecting panels, and the
//! LoS/NLoS powers of the equivalent end-to-end channel.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Reflection amplitude of every element. Only lossless reflection is modelled.
pub const REFLECTION_AMPLITUDE: f64 = 1.0;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Share of a Rician link's power carried by the LoS component.
fn los_share(kappa: f64) -> f64 {
    if kappa.is_infinite() {
        1.0
    } else {
        kappa / (kappa + 1.0)
    }
}

/// Share of a Rician link's power carried by the scattered component.
fn nlos_share(kappa: f64) -> f64 {
    1.0 / (kappa + 1.0)
}

fn check_gain(name: &str, beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be positive and finite, got {beta}"
        )))
    }
}

fn check_kappa(name: &str, kappa: f64) -> Result<()> {
    if kappa >= 0.0 && !kappa.is_nan() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be nonnegative, got {kappa}"
        )))
    }
}

fn check_phases(name: &str, phases: &[f64]) -> Result<Vec<f64>> {
    phases
        .iter()
        .map(|&p| {
            if p.is_finite() {
                Ok(wrap_phase(p))
            } else {
                Err(Error::Config(format!("{name} contains a non-finite phase")))
            }
        })
        .collect()
}

/// Distance-based path loss `(d / d0)^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossSpec {
    pub distance: f64,
    pub reference_distance: f64,
    pub exponent: f64,
}

pub fn path_gain(spec: &PathLossSpec) -> Result<f64> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !(positive(spec.distance) && positive(spec.reference_distance) && positive(spec.exponent)) {
        return domain(format!(
            "path-loss parameters must be positive and finite: {spec:?}"
        ));
    }
    Ok((spec.distance / spec.reference_distance).powf(-spec.exponent))
}

/// Source-destination link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectLink {
    /// Linear path gain.
    pub beta: f64,
    /// Linear Rician factor; `f64::INFINITY` for a pure LoS link.
    pub kappa: f64,
    /// Argument of the unit-modulus LoS component, in `[0, 2π)`.
    pub los_phase: f64,
}

impl DirectLink {
    pub fn new(beta: f64, kappa: f64, los_phase: f64) -> Result<Self> {
        check_gain("direct path gain", beta)?;
        check_kappa("direct Rician factor", kappa)?;
        if !los_phase.is_finite() {
            return Err(Error::Config("direct LoS phase is not finite".into()));
        }
        Ok(Self {
            beta,
            kappa,
            los_phase: wrap_phase(los_phase),
        })
    }

    /// Amplitude of the deterministic LoS term.
    pub fn los_amplitude(&self) -> f64 {
        (self.beta * los_share(self.kappa)).sqrt()
    }

    /// Standard deviation of the scattered term.
    pub fn nlos_amplitude(&self) -> f64 {
        (self.beta * nlos_share(self.kappa)).sqrt()
    }

    pub fn nlos_power(&self) -> f64 {
        self.beta * nlos_share(self.kappa)
    }
}

/// One reflecting surface. The source-panel hop is pure LoS, the
/// panel-destination hop is Rician.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisPanel {
    pub beta_sr: f64,
    pub beta_rd: f64,
    pub kappa_rd: f64,
    pub los_phases_sr: Vec<f64>,
    pub los_phases_rd: Vec<f64>,
}

impl RisPanel {
    pub fn new(
        beta_sr: f64,
        beta_rd: f64,
        kappa_rd: f64,
        los_phases_sr: Vec<f64>,
        los_phases_rd: Vec<f64>,
    ) -> Result<Self> {
        check_gain("source-panel path gain", beta_sr)?;
        check_gain("panel-destination path gain", beta_rd)?;
        check_kappa("panel-destination Rician factor", kappa_rd)?;
        if los_phases_sr.is_empty() {
            return Err(Error::Config("a panel needs at least one element".into()));
        }
        if los_phases_sr.len() != los_phases_rd.len() {
            return Err(Error::Config(format!(
                "panel phase vectors differ in length ({} vs {})",
                los_phases_sr.len(),
                los_phases_rd.len()
            )));
        }
        Ok(Self {
            beta_sr,
            beta_rd,
            kappa_rd,
            los_phases_sr: check_phases("source-panel LoS phases", &los_phases_sr)?,
            los_phases_rd: check_phases("panel-destination LoS phases", &los_phases_rd)?,
        })
    }

    /// Panel with every LoS phase set to zero.
    pub fn aligned(n_elements: usize, beta_sr: f64, beta_rd: f64, kappa_rd: f64) -> Result<Self> {
        Self::new(
            beta_sr,
            beta_rd,
            kappa_rd,
            vec![0.0; n_elements],
            vec![0.0; n_elements],
        )
    }

    pub fn n_elements(&self) -> usize {
        self.los_phases_sr.len()
    }

    /// Amplitude of each element's deterministic cascaded term.
    pub fn los_amplitude(&self) -> f64 {
        (self.beta_sr * self.beta_rd * los_share(self.kappa_rd)).sqrt() * REFLECTION_AMPLITUDE
    }

    /// Standard deviation of each element's scattered cascaded term.
    pub fn nlos_amplitude(&self) -> f64 {
        (self.beta_sr * self.beta_rd * nlos_share(self.kappa_rd)).sqrt() * REFLECTION_AMPLITUDE
    }

    /// Sum of the LoS phases of element `n` along its two hops.
    pub fn cascaded_los_phase(&self, n: usize) -> f64 {
        self.los_phases_sr[n] + self.los_phases_rd[n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub direct: DirectLink,
    pub panels: Vec<RisPanel>,
}

impl NetworkConfig {
    pub fn new(direct: DirectLink, panels: Vec<RisPanel>) -> Self {
        Self { direct, panels }
    }

    pub fn total_elements(&self) -> usize {
        self.panels.iter().map(RisPanel::n_elements).sum()
    }

    /// `(a + Σ c_{k,n})²`, the largest LoS power any phase setting can reach.
    pub fn los_upper_bound(&self) -> f64 {
        let total = self.direct.los_amplitude()
            + self
                .panels
                .iter()
                .map(|p| p.n_elements() as f64 * p.los_amplitude())
                .sum::<f64>();
        total * total
    }
}

/// Draws `n` phases uniformly on `[0, 2π)` from a reproducible stream.
pub fn seeded_phases(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n)
        .map(|_| wrap_phase(rng.random::<f64>() * TAU))
        .collect()
}

/// Reproducible LoS phases for a whole network.
///
/// The direct link uses stream 0; panel `k` uses stream `2k + 1` for the
/// source-panel hop and `2k + 2` for the panel-destination hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LosPhaseSeed(pub u64);

impl LosPhaseSeed {
    pub fn direct(&self) -> f64 {
        seeded_phases(self.0, 0, 1)[0]
    }

    /// `(source-panel, panel-destination)` phases of panel `k`.
    pub fn panel(&self, k: usize, n_elements: usize) -> (Vec<f64>, Vec<f64>) {
        let k = k as u64;
        (
            seeded_phases(self.0, 2 * k + 1, n_elements),
            seeded_phases(self.0, 2 * k + 2, n_elements),
        )
    }
}

/// Phase shifts, one vector per panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    thetas: Vec<Vec<f64>>,
}

impl PhaseConfig {
    /// Validates shapes against `net` and wraps every angle into `[0, 2π)`.
    pub fn new(net: &NetworkConfig, thetas: Vec<Vec<f64>>) -> Result<Self> {
        if thetas.len() != net.panels.len() {
            return Err(Error::Config(format!(
                "phase configuration has {} panels, network has {}",
                thetas.len(),
                net.panels.len()
            )));
        }
        let mut wrapped = Vec::with_capacity(thetas.len());
        for (k, (t, panel)) in thetas.iter().zip(&net.panels).enumerate() {
            if t.len() != panel.n_elements() {
                return Err(Error::Config(format!(
                    "panel {k}: {} phase shifts for {} elements",
                    t.len(),
                    panel.n_elements()
                )));
            }
            wrapped.push(check_phases("phase shifts", t)?);
        }
        Ok(Self { thetas: wrapped })
    }

    /// Every element shifted by the same angle.
    pub fn constant(net: &NetworkConfig, theta: f64) -> Result<Self> {
        Self::new(
            net,
            net.panels
                .iter()
                .map(|p| vec![theta; p.n_elements()])
                .collect(),
        )
    }

    pub fn zeros(net: &NetworkConfig) -> Self {
        Self::constant(net, 0.0).expect("zero phases always fit the network")
    }

    /// Repeats `pattern` cyclically over each panel's elements.
    pub fn tiled(net: &NetworkConfig, pattern: &[f64]) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::Config("phase pattern is empty".into()));
        }
        Self::new(
            net,
            net.panels
                .iter()
                .map(|p| {
                    (0..p.n_elements())
                        .map(|n| pattern[n % pattern.len()])
                        .collect()
                })
                .collect(),
        )
    }

    /// Independent uniform phases on `[0, 2π)`, reproducible from `seed`.
    pub fn random(net: &NetworkConfig, seed: u64) -> Self {
        let thetas = net
            .panels
            .iter()
            .enumerate()
            .map(|(k, p)| seeded_phases(seed, k as u64, p.n_elements()))
            .collect();
        Self { thetas }
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.thetas
    }

    fn check_against(&self, net: &NetworkConfig) -> Result<()> {
        if self.thetas.len() != net.panels.len()
            || self
                .thetas
                .iter()
                .zip(&net.panels)
                .any(|(t, p)| t.len() != p.n_elements())
        {
            return Err(Error::Config(
                "phase configuration does not match the network shape".into(),
            ));
        }
        Ok(())
    }
}

/// LoS and NLoS power of the equivalent channel for one phase setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    /// Mean of the equivalent channel: the coherent sum of all LoS phasors.
    pub mu: Complex64,
    /// `|mu|²`.
    pub psi_glos: f64,
    /// Variance of the equivalent channel.
    pub psi_gnlos: f64,
}

impl ChannelStats {
    /// Stats with a real, nonnegative mean of the given power.
    pub fn from_powers(psi_glos: f64, psi_gnlos: f64) -> Result<Self> {
        if !(psi_glos.is_finite() && psi_glos >= 0.0) {
            return domain(format!(
                "LoS power must be nonnegative and finite, got {psi_glos}"
            ));
        }
        if !(psi_gnlos.is_finite() && psi_gnlos > 0.0) {
            return domain(format!(
                "NLoS power must be positive and finite, got {psi_gnlos}"
            ));
        }
        Ok(Self {
            mu: Complex64::new(psi_glos.sqrt(), 0.0),
            psi_glos,
            psi_gnlos,
        })
    }

    /// Non-centrality `L Ψ_gLoS / Ψ_gNLoS` of the `L`-round gain sum.
    pub fn xi(&self, rounds: u32) -> f64 {
        rounds as f64 * self.psi_glos / self.psi_gnlos
    }
}

/// Mean phasor sum and NLoS power of the equivalent channel.
pub fn compute_stats(net: &NetworkConfig, phases: &PhaseConfig) -> Result<ChannelStats> {
    phases.check_against(net)?;
    let mut mu = Complex64::from_polar(net.direct.los_amplitude(), net.direct.los_phase);
    let mut psi_gnlos = net.direct.nlos_power();
    for (panel, thetas) in net.panels.iter().zip(phases.thetas()) {
        let c = panel.los_amplitude();
        for (n, theta) in thetas.iter().enumerate() {
            mu += Complex64::from_polar(c, panel.cascaded_los_phase(n) + theta);
        }
        psi_gnlos += panel.n_elements() as f64 * panel.nlos_amplitude().powi(2);
    }
    Ok(ChannelStats {
        mu,
        psi_glos: mu.norm_sqr(),
        psi_gnlos,
    })
}
