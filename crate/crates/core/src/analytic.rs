//! Closed-form outage results for Type-I HARQ and chase combining.
//!
//! Per-round gain `|h_l|²` is non-central chi-squared with two degrees of
//! freedom; the chase-combined sum over `L` rounds is non-central
//! chi-squared with `2L`. Both CDFs are Poisson mixtures of regularized
//! incomplete gamma functions and are evaluated by
//! [`poisson_mixed_gamma`](crate::specfun::poisson_mixed_gamma).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelStats;
use crate::error::{domain, Error, Result};
use crate::specfun::{factorial, poisson_mixed_gamma, SeriesValue, TruncationPolicy};

/// Overshoot beyond `[0, 1]` that is silently absorbed by clamping.
const CLAMP_SLACK: f64 = 1e-9;
/// Outage values below this are treated as numerically zero by the slope fit.
pub const FIT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "type-i")]
    TypeI,
    #[serde(rename = "cc")]
    ChaseCombining,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::TypeI, Scheme::ChaseCombining];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::TypeI => "type-i",
            Scheme::ChaseCombining => "cc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type-i" | "typei" | "type1" | "type-1" => Ok(Scheme::TypeI),
            "cc" | "chase" | "chase-combining" => Ok(Scheme::ChaseCombining),
            other => domain(format!(
                "unknown HARQ scheme `{other}` (expected type-i or cc)"
            )),
        }
    }
}

/// Retransmission scheme, round limit, target rate and SNR grid (linear).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarqParams {
    pub scheme: Scheme,
    pub max_rounds: u32,
    pub rate: f64,
    pub snr_grid: Vec<f64>,
}

impl HarqParams {
    pub fn new(scheme: Scheme, max_rounds: u32, rate: f64, snr_grid: Vec<f64>) -> Result<Self> {
        check_rounds(max_rounds)?;
        check_rate(rate)?;
        for &rho in &snr_grid {
            check_snr(rho)?;
        }
        Ok(Self {
            scheme,
            max_rounds,
            rate,
            snr_grid,
        })
    }
}

fn check_rounds(rounds: u32) -> Result<()> {
    if rounds == 0 {
        return domain("number of HARQ rounds must be at least 1");
    }
    Ok(())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate.is_finite() && rate > 0.0) {
        return domain(format!("rate must be positive and finite, got {rate}"));
    }
    Ok(())
}

fn check_snr(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return domain(format!("SNR must be positive and finite, got {rho}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Exact,
    Asymptotic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rho: f64,
    pub p_out: f64,
    pub kind: EstimateKind,
    pub stderr: Option<f64>,
}

/// Outage values over an SNR grid, sorted by SNR.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutageCurve {
    entries: Vec<CurvePoint>,
}

impl OutageCurve {
    pub fn new(mut entries: Vec<CurvePoint>) -> Result<Self> {
        for e in &entries {
            check_snr(e.rho)?;
            if !(0.0..=1.0).contains(&e.p_out) {
                return domain(format!("outage probability {} outside [0, 1]", e.p_out));
            }
            match (e.kind, e.stderr) {
                (EstimateKind::MonteCarlo, Some(s)) if s >= 0.0 => {}
                (EstimateKind::MonteCarlo, _) => {
                    return domain("Monte-Carlo entries need a nonnegative standard error")
                }
                (_, Some(_)) => return domain("only Monte-Carlo entries carry a standard error"),
                (_, None) => {}
            }
        }
        entries.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[CurvePoint] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn p_out(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.p_out)
    }
}

/// Least-squares line through `(log10 rho, log10 p_out)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityFit {
    /// Estimated diversity order, the negated log-log slope.
    pub diversity: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Linear SNR range the fit was restricted to.
    pub fit_window: (f64, f64),
    /// Largest absolute log10 deviation of a fitted point from the line.
    pub residual: f64,
    pub points: usize,
}

/// Outage threshold on the channel gain, `(2^R - 1) / rho`.
pub fn outage_threshold(rate: f64, rho: f64) -> Result<f64> {
    check_rate(rate)?;
    check_snr(rho)?;
    Ok((rate * std::f64::consts::LN_2).exp_m1() / rho)
}

fn clamp_probability(v: f64) -> f64 {
    if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&v) {
        log::warn!("series value {v:e} clamped into [0, 1]");
    }
    v.clamp(0.0, 1.0)
}

fn check_stats(stats: &ChannelStats) -> Result<()> {
    if !(stats.psi_gnlos.is_finite() && stats.psi_gnlos > 0.0) {
        return domain(format!(
            "the gain CDF needs positive NLoS power, got {}",
            stats.psi_gnlos
        ));
    }
    if !(stats.psi_glos.is_finite() && stats.psi_glos >= 0.0) {
        return domain(format!(
            "LoS power must be nonnegative, got {}",
            stats.psi_glos
        ));
    }
    Ok(())
}

fn check_x(x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return domain(format!(
            "CDF argument must be nonnegative and finite, got {x}"
        ));
    }
    Ok(())
}

/// CDF of `sum_{l=1}^{L} |h_l|²` with the truncation order that was used.
pub fn sum_gain_cdf_detailed(
    stats: &ChannelStats,
    rounds: u32,
    x: f64,
    policy: TruncationPolicy,
) -> Result<SeriesValue> {
    check_stats(stats)?;
    check_rounds(rounds)?;
    check_x(x)?;
    let raw = poisson_mixed_gamma(stats.xi(rounds), rounds as f64, x / stats.psi_gnlos, policy)?;
    Ok(SeriesValue {
        value: clamp_probability(raw.value),
        order: raw.order,
    })
}

/// CDF of the chase-combined gain `sum_{l=1}^{L} |h_l|²`.
pub fn sum_gain_cdf(
    stats: &ChannelStats,
    rounds: u32,
    x: f64,
    policy: TruncationPolicy,
) -> Result<f64> {
    Ok(sum_gain_cdf_detailed(stats, rounds, x, policy)?.value)
}

/// CDF of a single round's channel gain `|h_l|²`.
pub fn gain_cdf(stats: &ChannelStats, x: f64, policy: TruncationPolicy) -> Result<f64> {
    sum_gain_cdf(stats, 1, x, policy)
}

/// Exact outage of either scheme, with the truncation order that was used.
pub fn exact_outage_detailed(
    stats: &ChannelStats,
    scheme: Scheme,
    rounds: u32,
    rate: f64,
    rho: f64,
    policy: TruncationPolicy,
) -> Result<SeriesValue> {
    check_rounds(rounds)?;
    let psi = outage_threshold(rate, rho)?;
    match scheme {
        Scheme::TypeI => {
            let single = sum_gain_cdf_detailed(stats, 1, psi, policy)?;
            Ok(SeriesValue {
                value: single.value.powi(rounds as i32),
                order: single.order,
            })
        }
        Scheme::ChaseCombining => sum_gain_cdf_detailed(stats, rounds, psi, policy),
    }
}

/// Type-I outage: every one of the `L` rounds fails on its own.
pub fn outage_type1(
    stats: &ChannelStats,
    rounds: u32,
    rate: f64,
    rho: f64,
    policy: TruncationPolicy,
) -> Result<f64> {
    Ok(exact_outage_detailed(stats, Scheme::TypeI, rounds, rate, rho, policy)?.value)
}

/// Chase-combining outage: the summed gain over `L` rounds stays below threshold.
pub fn outage_cc(
    stats: &ChannelStats,
    rounds: u32,
    rate: f64,
    rho: f64,
    policy: TruncationPolicy,
) -> Result<f64> {
    Ok(exact_outage_detailed(stats, Scheme::ChaseCombining, rounds, rate, rho, policy)?.value)
}

pub fn exact_outage(
    stats: &ChannelStats,
    scheme: Scheme,
    rounds: u32,
    rate: f64,
    rho: f64,
    policy: TruncationPolicy,
) -> Result<f64> {
    Ok(exact_outage_detailed(stats, scheme, rounds, rate, rho, policy)?.value)
}

/// Leading high-SNR term of the outage probability.
///
/// Type-I: `exp(-L Ψ_gLoS/Ψ_gNLoS) (ψ/Ψ_gNLoS)^L`; chase combining divides by `L!`.
pub fn asymptotic_outage(
    stats: &ChannelStats,
    scheme: Scheme,
    rounds: u32,
    rate: f64,
    rho: f64,
) -> Result<f64> {
    check_stats(stats)?;
    check_rounds(rounds)?;
    let psi = outage_threshold(rate, rho)?;
    let l = rounds as f64;
    let log_p = -stats.xi(rounds) + l * (psi / stats.psi_gnlos).ln();
    let p = log_p.exp();
    Ok(match scheme {
        Scheme::TypeI => p,
        Scheme::ChaseCombining => p / factorial(rounds),
    })
}

/// Phase/LoS/NLoS factor `S = exp(-L Ψ_gLoS/Ψ_gNLoS) Ψ_gNLoS^(-L)`; shared by both schemes.
pub fn snr_offset_factor(stats: &ChannelStats, rounds: u32) -> Result<f64> {
    check_stats(stats)?;
    check_rounds(rounds)?;
    Ok((-stats.xi(rounds) - rounds as f64 * stats.psi_gnlos.ln()).exp())
}

/// Modulation and coding gain `C(R)`.
pub fn coding_gain(scheme: Scheme, rounds: u32, rate: f64) -> Result<f64> {
    check_rounds(rounds)?;
    check_rate(rate)?;
    let base = 1.0 / (rate * std::f64::consts::LN_2).exp_m1();
    Ok(match scheme {
        Scheme::TypeI => base,
        Scheme::ChaseCombining => factorial(rounds).powf(1.0 / rounds as f64) * base,
    })
}

/// Exact outage over `harq.snr_grid`, evaluated in parallel.
pub fn exact_curve(
    stats: &ChannelStats,
    harq: &HarqParams,
    policy: TruncationPolicy,
) -> Result<OutageCurve> {
    let entries = harq
        .snr_grid
        .par_iter()
        .map(|&rho| {
            exact_outage(stats, harq.scheme, harq.max_rounds, harq.rate, rho, policy).map(|p_out| {
                CurvePoint {
                    rho,
                    p_out,
                    kind: EstimateKind::Exact,
                    stderr: None,
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    OutageCurve::new(entries)
}

/// Asymptotic outage over `harq.snr_grid`, clamped to 1 at low SNR.
pub fn asymptotic_curve(stats: &ChannelStats, harq: &HarqParams) -> Result<OutageCurve> {
    let entries = harq
        .snr_grid
        .iter()
        .map(|&rho| {
            asymptotic_outage(stats, harq.scheme, harq.max_rounds, harq.rate, rho).map(|p| {
                CurvePoint {
                    rho,
                    p_out: p.min(1.0),
                    kind: EstimateKind::Asymptotic,
                    stderr: None,
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    OutageCurve::new(entries)
}

/// Ordinary least squares of `log10 p_out` on `log10 rho` within `window`.
///
/// Points with `p_out < 1e-14` are dropped as below the numeric floor.
pub fn fit_diversity(curve: &OutageCurve, window: (f64, f64)) -> Result<DiversityFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Fit(format!("invalid fit window ({lo}, {hi})")));
    }
    let pts: Vec<(f64, f64)> = curve
        .entries()
        .iter()
        .filter(|e| e.rho >= lo && e.rho <= hi && e.p_out >= FIT_FLOOR)
        .map(|e| (e.rho.log10(), e.p_out.log10()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 usable points in the window, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all fit points share one SNR".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts
        .iter()
        .map(|&(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Ok(DiversityFit {
        diversity: -slope,
        slope,
        intercept,
        fit_window: window,
        residual,
        points: pts.len(),
    })
}
