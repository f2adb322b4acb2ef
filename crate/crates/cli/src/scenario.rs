//! Declarative scenario files.
//!
//! A scenario is parsed into [`RawScenario`], which mirrors the file layout
//! and rejects unknown keys, then resolved into a [`Scenario`] holding linear
//! quantities only. Every dB value is converted exactly once, in [`resolve`].

use std::path::Path;

use ris_harq::channel::{db_to_linear, path_gain, LosPhaseSeed};
use ris_harq::montecarlo::{DEFAULT_CHUNK, DEFAULT_TRIALS};
use ris_harq::{
    DirectLink, NetworkConfig, PathLossSpec, PhaseConfig, PhaseStrategy, RisPanel, Scheme,
    TruncationPolicy,
};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliError, CliResult};

/// Width of the default diversity-fit window, counted down from the top of the grid.
pub const DEFAULT_FIT_SPAN_DB: f64 = 15.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<RawNetwork>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harq: Option<RawHarq>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<RawGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<RawPhases>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<RawMonteCarlo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity: Option<RawDiversity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNetwork {
    /// Draws every LoS phase from this seed. Mutually exclusive with explicit phases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los_phase_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct: Option<RawDirect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panels: Option<Vec<RawPanel>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDirect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_loss: Option<PathLossSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los_phase: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPanel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<usize>,
    /// Number of identical copies of this panel (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_sr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_loss_sr: Option<PathLossSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_rd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_loss_rd: Option<PathLossSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_rd_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los_phases_sr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los_phases_rd: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHarq {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<Scheme>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPhases {
    /// `optimal`, `fixed:<radians>`, `random:<seed>` or `explicit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    /// With `explicit`: one pattern repeated over every panel's elements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<f64>>,
    /// With `explicit`: one vector per panel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMonteCarlo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    /// Elements per panel; each value replaces every panel's element count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDiversity {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_db: Option<Vec<f64>>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub truncation: Option<TruncationPolicy>,
}

impl RawScenario {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(t) = o.trials {
            self.monte_carlo.get_or_insert_with(Default::default).trials = Some(t);
        }
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(p) = o.truncation {
            self.truncation = Some(p.to_string());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseSpec {
    Strategy(PhaseStrategy),
    Pattern(Vec<f64>),
    Explicit(Vec<Vec<f64>>),
}

impl PhaseSpec {
    pub fn phases(&self, net: &NetworkConfig) -> ris_harq::Result<PhaseConfig> {
        match self {
            PhaseSpec::Strategy(s) => s.phases(net),
            PhaseSpec::Pattern(p) => PhaseConfig::tiled(net, p),
            PhaseSpec::Explicit(t) => PhaseConfig::new(net, t.clone()),
        }
    }
}

/// One network of an element sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Total reflecting elements over all panels.
    pub elements: usize,
    pub network: NetworkConfig,
}

/// A validated scenario in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub networks: Vec<SweepPoint>,
    pub schemes: Vec<Scheme>,
    pub rounds: Vec<u32>,
    pub rate: f64,
    pub snr_db: Vec<f64>,
    pub snr_linear: Vec<f64>,
    pub truncation: TruncationPolicy,
    pub phases: PhaseSpec,
    pub seed: u64,
    pub trials: u64,
    pub chunk_size: u64,
    /// Diversity-fit window in dB.
    pub fit_window_db: (f64, f64),
}

impl Scenario {
    pub fn max_rounds(&self) -> u32 {
        self.rounds.iter().copied().max().unwrap_or(1)
    }
}

/// Reads and parses a TOML or JSON scenario without resolving it.
pub fn read_raw(path: &Path) -> CliResult<RawScenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    } else {
        toml::from_str(&text).map_err(|e| CliError::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

/// Parses, applies `overrides` and resolves a scenario file.
pub fn load_scenario(path: &Path, overrides: &Overrides) -> CliResult<(RawScenario, Scenario)> {
    let mut raw = read_raw(path)?;
    raw.apply(overrides);
    if raw.name.is_none() {
        raw.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    let scenario = resolve(&raw)?;
    Ok((raw, scenario))
}

fn require<T: Clone>(value: &Option<T>, field: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Validation(format!("missing required field `{field}`")))
}

fn at<T>(field: &str, r: ris_harq::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Validation(format!("`{field}`: {e}")))
}

fn gain(
    direct: Option<f64>,
    spec: Option<PathLossSpec>,
    gain_field: &str,
    spec_field: &str,
) -> CliResult<f64> {
    match (direct, spec) {
        (Some(g), None) => {
            if !(g.is_finite() && g > 0.0) {
                return invalid(format!(
                    "`{gain_field}` must be positive and finite, got {g}"
                ));
            }
            Ok(g)
        }
        (None, Some(s)) => at(spec_field, path_gain(&s)),
        (Some(_), Some(_)) => invalid(format!(
            "give only one of `{gain_field}` and `{spec_field}`"
        )),
        (None, None) => invalid(format!(
            "missing required field `{gain_field}` or `{spec_field}`"
        )),
    }
}

fn kappa(db: Option<f64>, field: &str) -> CliResult<f64> {
    let db = require(&db, field)?;
    if db.is_nan() {
        return invalid(format!("`{field}` is NaN"));
    }
    Ok(db_to_linear(db))
}

/// dB grid `start, start + step, ..., stop`.
pub fn snr_grid(raw: &RawGrid) -> CliResult<Vec<f64>> {
    let start = require(&raw.start, "snr_db.start")?;
    let stop = require(&raw.stop, "snr_db.stop")?;
    let step = require(&raw.step, "snr_db.step")?;
    if !(start.is_finite() && stop.is_finite()) {
        return invalid("`snr_db.start` and `snr_db.stop` must be finite");
    }
    if !(step.is_finite() && step > 0.0) {
        return invalid(format!("`snr_db.step` must be positive, got {step}"));
    }
    if stop < start {
        return invalid(format!(
            "`snr_db.stop` ({stop}) is below `snr_db.start` ({start})"
        ));
    }
    let n = ((stop - start) / step).round();
    if (start + n * step - stop).abs() > 1e-9 * step.max(1.0) {
        return invalid("`snr_db.stop` is not reachable from `snr_db.start` in whole steps");
    }
    if n > 1e6 {
        return invalid("`snr_db` grid has more than a million points");
    }
    Ok((0..=n as usize).map(|i| start + i as f64 * step).collect())
}

fn phase_spec(raw: &RawPhases) -> CliResult<PhaseSpec> {
    let strategy = require(&raw.strategy, "phases.strategy")?;
    let explicit = strategy.trim() == "explicit";
    if !explicit && (raw.pattern.is_some() || raw.thetas.is_some()) {
        return invalid(
            "`phases.pattern` and `phases.thetas` need `phases.strategy = \"explicit\"`",
        );
    }
    if !explicit {
        return parse_strategy(&strategy).map(PhaseSpec::Strategy);
    }
    match (&raw.pattern, &raw.thetas) {
        (Some(p), None) => Ok(PhaseSpec::Pattern(p.clone())),
        (None, Some(t)) => Ok(PhaseSpec::Explicit(t.clone())),
        _ => invalid("explicit phases need exactly one of `phases.pattern` and `phases.thetas`"),
    }
}

/// `optimal`, `fixed:<radians>` or `random:<seed>`.
pub fn parse_strategy(s: &str) -> CliResult<PhaseStrategy> {
    let s = s.trim();
    let bad = || CliError::Validation(format!("`phases.strategy`: cannot parse {s:?}"));
    match s.split_once(':') {
        None if s == "optimal" => Ok(PhaseStrategy::Optimal),
        Some(("fixed", v)) => {
            let theta: f64 = v.trim().parse().map_err(|_| bad())?;
            if !theta.is_finite() {
                return Err(bad());
            }
            Ok(PhaseStrategy::Fixed(theta))
        }
        Some(("random", v)) => v
            .trim()
            .parse()
            .map(PhaseStrategy::Random)
            .map_err(|_| bad()),
        _ => Err(bad()),
    }
}

fn network(raw: &RawNetwork, elements_override: Option<usize>) -> CliResult<NetworkConfig> {
    let seed = raw.los_phase_seed.map(LosPhaseSeed);
    let d = require(&raw.direct, "network.direct")?;
    let beta = gain(
        d.gain,
        d.path_loss,
        "network.direct.gain",
        "network.direct.path_loss",
    )?;
    let kappa_sd = kappa(d.kappa_db, "network.direct.kappa_db")?;
    let los_phase = match (seed, d.los_phase) {
        (Some(s), None) => s.direct(),
        (None, Some(p)) => p,
        (Some(_), Some(_)) => {
            return invalid("`network.direct.los_phase` conflicts with `network.los_phase_seed`")
        }
        (None, None) => {
            return invalid(
                "missing required field `network.direct.los_phase` or `network.los_phase_seed`",
            )
        }
    };
    let direct = at("network.direct", DirectLink::new(beta, kappa_sd, los_phase))?;

    let raw_panels = require(&raw.panels, "network.panels")?;
    let mut panels = Vec::new();
    for (i, p) in raw_panels.iter().enumerate() {
        let field = |name: &str| format!("network.panels[{i}].{name}");
        let beta_sr = gain(
            p.gain_sr,
            p.path_loss_sr,
            &field("gain_sr"),
            &field("path_loss_sr"),
        )?;
        let beta_rd = gain(
            p.gain_rd,
            p.path_loss_rd,
            &field("gain_rd"),
            &field("path_loss_rd"),
        )?;
        let kappa_rd = kappa(p.kappa_rd_db, &field("kappa_rd_db"))?;
        let repeat = p.repeat.unwrap_or(1);
        if repeat == 0 {
            return invalid(format!("`{}` must be at least 1", field("repeat")));
        }
        for _ in 0..repeat {
            let k = panels.len();
            let (sr, rd) = match (seed, &p.los_phases_sr, &p.los_phases_rd) {
                (Some(s), None, None) => {
                    let n = match elements_override {
                        Some(n) => n,
                        None => require(&p.elements, &field("elements"))?,
                    };
                    s.panel(k, n)
                }
                (None, Some(sr), Some(rd)) => {
                    if elements_override.is_some() {
                        return invalid("`sweep.elements` needs `network.los_phase_seed`");
                    }
                    if p.elements.is_some_and(|n| n != sr.len()) {
                        return invalid(format!(
                            "`{}` disagrees with the LoS phase vectors",
                            field("elements")
                        ));
                    }
                    (sr.clone(), rd.clone())
                }
                (Some(_), _, _) => {
                    return invalid(format!(
                        "`{}` conflicts with `network.los_phase_seed`",
                        field("los_phases_sr")
                    ))
                }
                (None, _, _) => {
                    return invalid(format!(
                        "missing required fields `{}` and `{}`, or `network.los_phase_seed`",
                        field("los_phases_sr"),
                        field("los_phases_rd")
                    ))
                }
            };
            panels.push(at(
                &format!("network.panels[{i}]"),
                RisPanel::new(beta_sr, beta_rd, kappa_rd, sr, rd),
            )?);
        }
    }
    Ok(NetworkConfig::new(direct, panels))
}

/// Validates `raw` and converts it to linear units.
pub fn resolve(raw: &RawScenario) -> CliResult<Scenario> {
    let net_raw = require(&raw.network, "network")?;
    let sweep = raw.sweep.as_ref().and_then(|s| s.elements.clone());
    let networks = match &sweep {
        None => vec![network(&net_raw, None)?],
        Some(list) => {
            if list.is_empty() {
                return invalid("`sweep.elements` is empty");
            }
            list.iter()
                .map(|&n| network(&net_raw, Some(n)))
                .collect::<CliResult<_>>()?
        }
    };
    let networks: Vec<SweepPoint> = networks
        .into_iter()
        .map(|network| SweepPoint {
            elements: network.total_elements(),
            network,
        })
        .collect();

    let harq = require(&raw.harq, "harq")?;
    let rate = require(&harq.rate, "harq.rate")?;
    if !(rate.is_finite() && rate > 0.0) {
        return invalid(format!("`harq.rate` must be positive, got {rate}"));
    }
    let rounds = require(&harq.rounds, "harq.rounds")?;
    if rounds.is_empty() || rounds.contains(&0) {
        return invalid("`harq.rounds` must list round limits of at least 1");
    }
    let schemes = harq.schemes.unwrap_or_else(|| Scheme::ALL.to_vec());
    if schemes.is_empty() {
        return invalid("`harq.schemes` is empty");
    }

    let snr_db = snr_grid(&require(&raw.snr_db, "snr_db")?)?;
    let snr_linear = snr_db.iter().map(|&d| db_to_linear(d)).collect();

    let truncation = match &raw.truncation {
        None => TruncationPolicy::default(),
        Some(s) => at("truncation", s.parse::<TruncationPolicy>())?,
    };
    let phases = phase_spec(&require(&raw.phases, "phases")?)?;
    for sp in &networks {
        at("phases", phases.phases(&sp.network))?;
    }

    let mc = raw.monte_carlo.clone().unwrap_or_default();
    let trials = mc.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return invalid("`monte_carlo.trials` must be at least 1");
    }
    let chunk_size = mc.chunk_size.unwrap_or(DEFAULT_CHUNK);
    if chunk_size == 0 {
        return invalid("`monte_carlo.chunk_size` must be at least 1");
    }

    let top = *snr_db.last().expect("grid has at least one point");
    let fit_window_db = match raw.diversity.as_ref().and_then(|d| d.window_db.clone()) {
        None => ((top - DEFAULT_FIT_SPAN_DB).max(snr_db[0]), top),
        Some(w) => match w[..] {
            [lo, hi] if lo.is_finite() && hi.is_finite() && lo <= hi => (lo, hi),
            _ => return invalid("`diversity.window_db` must be [low, high] in dB"),
        },
    };

    Ok(Scenario {
        name: raw.name.clone().unwrap_or_else(|| "scenario".into()),
        networks,
        schemes,
        rounds,
        rate,
        snr_db,
        snr_linear,
        truncation,
        phases,
        seed: raw.seed.unwrap_or(0),
        trials,
        chunk_size,
        fit_window_db,
    })
}
