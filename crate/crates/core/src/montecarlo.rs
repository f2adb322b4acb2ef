//! Monte-Carlo outage oracle.
//!
//! Every HARQ round of every trial draws from its own ChaCha8 stream keyed by
//! `(seed, trial, round)`, so estimates are bit-identical for any thread
//! count or chunking. Workers return integer outage counts that are summed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{outage_threshold, Scheme};
use crate::channel::{compute_stats, ChannelStats, NetworkConfig, PhaseConfig};
use crate::error::{domain, Error, Result};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_CHUNK: u64 = 8_192;

/// Key domains, so different sampling purposes never share a stream.
const DOMAIN_TRIAL: u64 = 0x4841_5251_5452_4941; // "HARQTRIA"
const DOMAIN_SUM_GAIN: u64 = 0x4841_5251_5355_4d47; // "HARQSUMG"

/// Generator for one `(seed, trial, round)` triple.
pub fn round_rng(seed: u64, trial: u64, round: u32) -> ChaCha8Rng {
    keyed_rng(DOMAIN_TRIAL, seed, trial, round as u64)
}

fn keyed_rng(domain: u64, seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([domain, seed, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Precomputed per-element factors for drawing the equivalent channel `h_l`.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    direct_los: Complex64,
    direct_nlos: f64,
    /// Per element: LoS part of the panel-destination hop, its scatter
    /// amplitude, and the fixed factor `e^{jθ} h^{(s,r)}`.
    elements: Vec<(Complex64, f64, Complex64)>,
}

impl ChannelSampler {
    pub fn new(net: &NetworkConfig, phases: &PhaseConfig) -> Result<Self> {
        // Shape check shared with the analytic path.
        compute_stats(net, phases)?;
        let direct_los = Complex64::from_polar(net.direct.los_amplitude(), net.direct.los_phase);
        let mut elements = Vec::with_capacity(net.total_elements());
        for (panel, thetas) in net.panels.iter().zip(phases.thetas()) {
            let rd_scale = panel.beta_rd.sqrt();
            let kappa = panel.kappa_rd;
            let (los_amp, nlos_amp) = if kappa.is_infinite() {
                (rd_scale, 0.0)
            } else {
                (
                    rd_scale * (kappa / (kappa + 1.0)).sqrt(),
                    rd_scale / (kappa + 1.0).sqrt(),
                )
            };
            for (n, theta) in thetas.iter().enumerate() {
                let rd_los = Complex64::from_polar(los_amp, panel.los_phases_rd[n]);
                let sr = Complex64::from_polar(panel.beta_sr.sqrt(), panel.los_phases_sr[n]);
                let reflect = Complex64::from_polar(crate::channel::REFLECTION_AMPLITUDE, *theta);
                elements.push((rd_los, nlos_amp, reflect * sr));
            }
        }
        Ok(Self {
            direct_los,
            direct_nlos: net.direct.nlos_amplitude(),
            elements,
        })
    }

    /// One draw of `h = h_sd + Σ h_rd e^{jθ} h_sr` with fresh scatter.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let mut h = self.direct_los;
        if self.direct_nlos > 0.0 {
            h += standard_complex_normal(rng) * self.direct_nlos;
        }
        for &(rd_los, rd_nlos, fixed) in &self.elements {
            let mut rd = rd_los;
            if rd_nlos > 0.0 {
                rd += standard_complex_normal(rng) * rd_nlos;
            }
            h += rd * fixed;
        }
        h
    }

    /// Per-round gains `|h_l|²` of one trial.
    pub fn trial_gains(&self, seed: u64, trial: u64, rounds: u32) -> Vec<f64> {
        (0..rounds)
            .map(|l| self.sample(&mut round_rng(seed, trial, l)).norm_sqr())
            .collect()
    }
}

/// One draw of the equivalent channel coefficient.
pub fn sample_equivalent_channel<R: Rng + ?Sized>(
    net: &NetworkConfig,
    phases: &PhaseConfig,
    rng: &mut R,
) -> Result<Complex64> {
    Ok(ChannelSampler::new(net, phases)?.sample(rng))
}

/// Mutual information after the given rounds; `snr_gains[l] = ρ|h_l|²`.
pub fn accumulated_information(snr_gains: &[f64], scheme: Scheme) -> Result<f64> {
    if snr_gains.is_empty() {
        return domain("accumulated information needs at least one round");
    }
    if snr_gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return domain("per-round SNR gains must be nonnegative and finite");
    }
    Ok(match scheme {
        Scheme::TypeI => {
            snr_gains.iter().copied().fold(0.0, f64::max).ln_1p() / std::f64::consts::LN_2
        }
        Scheme::ChaseCombining => snr_gains.iter().sum::<f64>().ln_1p() / std::f64::consts::LN_2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub trials: u64,
    pub seed: u64,
    pub max_rounds: u32,
    pub scheme: Scheme,
    pub rate: f64,
    pub rho: f64,
    pub chunk_size: u64,
}

impl SimulationPlan {
    pub fn new(
        scheme: Scheme,
        max_rounds: u32,
        rate: f64,
        rho: f64,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        let plan = Self {
            trials,
            seed,
            max_rounds,
            scheme,
            rate,
            rho,
            chunk_size: DEFAULT_CHUNK,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_chunk_size(mut self, chunk_size: u64) -> Result<Self> {
        self.chunk_size = chunk_size;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return domain("simulation needs at least one trial");
        }
        if self.chunk_size == 0 {
            return domain("chunk size must be positive");
        }
        if self.max_rounds == 0 {
            return domain("number of HARQ rounds must be at least 1");
        }
        outage_threshold(self.rate, self.rho).map(|_| ())
    }

    /// Trial ranges handed to workers; they tile `0..trials` exactly.
    pub fn chunks(&self) -> impl Iterator<Item = std::ops::Range<u64>> + '_ {
        let n = self.trials.div_ceil(self.chunk_size);
        (0..n).map(move |c| {
            let start = c * self.chunk_size;
            start..(start + self.chunk_size).min(self.trials)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub outages: u64,
    pub trials: u64,
    pub seed: u64,
}

impl OutageEstimate {
    pub fn from_counts(outages: u64, trials: u64, seed: u64) -> Self {
        let p_hat = outages as f64 / trials as f64;
        Self {
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
            outages,
            trials,
            seed,
        }
    }
}

/// Whether trial `trial` ends in outage. Stops at the first round that decodes.
fn trial_in_outage(
    sampler: &ChannelSampler,
    plan: &SimulationPlan,
    threshold: f64,
    trial: u64,
) -> bool {
    let mut combined = 0.0;
    for l in 0..plan.max_rounds {
        let g = sampler
            .sample(&mut round_rng(plan.seed, trial, l))
            .norm_sqr();
        let decoded = match plan.scheme {
            Scheme::TypeI => g >= threshold,
            Scheme::ChaseCombining => {
                combined += g;
                combined >= threshold
            }
        };
        if decoded {
            return false;
        }
    }
    true
}

/// Fraction of trials whose accumulated information stays below the rate.
pub fn estimate_outage(
    net: &NetworkConfig,
    phases: &PhaseConfig,
    plan: &SimulationPlan,
) -> Result<OutageEstimate> {
    plan.validate()?;
    let sampler = ChannelSampler::new(net, phases)?;
    // I < R  <=>  gain < (2^R - 1) / rho.
    let threshold = outage_threshold(plan.rate, plan.rho)?;
    let ranges: Vec<_> = plan.chunks().collect();
    let outages: u64 = ranges
        .into_par_iter()
        .map(|range| {
            range
                .filter(|&t| trial_in_outage(&sampler, plan, threshold, t))
                .count() as u64
        })
        .sum();
    Ok(OutageEstimate::from_counts(outages, plan.trials, plan.seed))
}

/// Outage counts for both schemes and every round limit `1..=max_rounds`,
/// from one shared set of draws (no early termination).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedOutageCounts {
    pub trials: u64,
    /// `type_i[l]`: outages with `l + 1` rounds.
    pub type_i: Vec<u64>,
    pub cc: Vec<u64>,
}

pub fn shared_outage_counts(
    net: &NetworkConfig,
    phases: &PhaseConfig,
    plan: &SimulationPlan,
) -> Result<SharedOutageCounts> {
    plan.validate()?;
    let sampler = ChannelSampler::new(net, phases)?;
    let threshold = outage_threshold(plan.rate, plan.rho)?;
    let rounds = plan.max_rounds as usize;
    let zero = || (vec![0u64; rounds], vec![0u64; rounds]);
    let ranges: Vec<_> = plan.chunks().collect();
    let (type_i, cc) = ranges
        .into_par_iter()
        .map(|range| {
            let (mut t1, mut cc) = zero();
            for trial in range {
                let mut best: f64 = 0.0;
                let mut sum = 0.0;
                for (l, g) in sampler
                    .trial_gains(plan.seed, trial, plan.max_rounds)
                    .into_iter()
                    .enumerate()
                {
                    best = best.max(g);
                    sum += g;
                    t1[l] += u64::from(best < threshold);
                    cc[l] += u64::from(sum < threshold);
                }
            }
            (t1, cc)
        })
        .reduce(zero, |(mut a1, mut a2), (b1, b2)| {
            for l in 0..rounds {
                a1[l] += b1[l];
                a2[l] += b2[l];
            }
            (a1, a2)
        });
    Ok(SharedOutageCounts {
        trials: plan.trials,
        type_i,
        cc,
    })
}

/// Samples of `sum_{l=1}^{L} |h_l|²` with `h_l ~ CN(mu, Ψ_gNLoS)` drawn directly
/// from the channel statistics.
pub fn sample_sum_gains(
    stats: &ChannelStats,
    rounds: u32,
    samples: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if rounds == 0 {
        return domain("number of HARQ rounds must be at least 1");
    }
    if !(stats.psi_gnlos.is_finite() && stats.psi_gnlos >= 0.0) {
        return Err(Error::Domain("NLoS power must be nonnegative".into()));
    }
    let sigma = stats.psi_gnlos.sqrt();
    let chunk = DEFAULT_CHUNK;
    let n_chunks = samples.div_ceil(chunk);
    let out: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = keyed_rng(DOMAIN_SUM_GAIN, seed, c, rounds as u64);
            let end = ((c + 1) * chunk).min(samples);
            (c * chunk..end)
                .map(|_| {
                    (0..rounds)
                        .map(|_| (stats.mu + standard_complex_normal(&mut rng) * sigma).norm_sqr())
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(out.concat())
}
