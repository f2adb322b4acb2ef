//! Subcommand pipelines and the files they write.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use ris_harq::analytic::{
    asymptotic_outage, exact_outage_detailed, CurvePoint, EstimateKind, OutageCurve,
};
use ris_harq::channel::db_to_linear;
use ris_harq::montecarlo::{
    shared_outage_counts, OutageEstimate, SharedOutageCounts, SimulationPlan,
};
use ris_harq::optimizer::FIXED_BASELINE_PHASE;
use ris_harq::specfun::SeriesValue;
use ris_harq::{compute_stats, fit_diversity, optimal_phases, ChannelStats, PhaseStrategy, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::scenario::{resolve, PhaseSpec, RawScenario, Scenario};
use crate::table::{plain, sci, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    OpCurve,
    Asymptote,
    Mc,
    OptimizePhase,
    Diversity,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::OpCurve,
        Command::Asymptote,
        Command::Mc,
        Command::OptimizePhase,
        Command::Diversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::OpCurve => "op-curve",
            Command::Asymptote => "asymptote",
            Command::Mc => "mc",
            Command::OptimizePhase => "optimize-phase",
            Command::Diversity => "diversity",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub elements: usize,
    pub phases: String,
    pub psi_glos: f64,
    pub psi_gnlos: f64,
}

/// Smallest and largest series order used within one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub elements: usize,
    pub phases: String,
    pub scheme: Scheme,
    pub rounds: u32,
    pub min_order: usize,
    pub max_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub elements: usize,
    pub psi_glos_achieved: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub thetas: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything needed to repeat a run: the scenario as read (after command-line
/// overrides), its resolved linear form, and what the numerics actually did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub threads: usize,
    pub csv: String,
    pub scenario: RawScenario,
    pub resolved: Scenario,
    pub channels: Vec<ChannelRecord>,
    pub truncation_orders: Vec<OrderRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phase_solutions: Vec<SolutionRecord>,
    pub timings: Vec<StageTiming>,
}

/// In-memory result of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub channels: Vec<ChannelRecord>,
    pub orders: Vec<OrderRecord>,
    pub solutions: Vec<SolutionRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

/// A channel to evaluate: one network under one phase setting.
struct Case {
    elements: usize,
    phases: String,
    stats: ChannelStats,
}

fn phase_label(spec: &PhaseSpec) -> String {
    match spec {
        PhaseSpec::Strategy(s) => s.label().into(),
        PhaseSpec::Pattern(_) => "pattern".into(),
        PhaseSpec::Explicit(_) => "explicit".into(),
    }
}

fn scenario_cases(sc: &Scenario) -> CliResult<Vec<Case>> {
    sc.networks
        .iter()
        .map(|sp| {
            Ok(Case {
                elements: sp.elements,
                phases: phase_label(&sc.phases),
                stats: compute_stats(&sp.network, &sc.phases.phases(&sp.network)?)?,
            })
        })
        .collect()
}

fn channel_records(cases: &[Case]) -> Vec<ChannelRecord> {
    cases
        .iter()
        .map(|c| ChannelRecord {
            elements: c.elements,
            phases: c.phases.clone(),
            psi_glos: c.stats.psi_glos,
            psi_gnlos: c.stats.psi_gnlos,
        })
        .collect()
}

/// Exact outage for every case, scheme, round limit and grid point, in that
/// nesting order. Points are evaluated in parallel; the output order is fixed.
fn exact_points(cases: &[Case], sc: &Scenario, rhos: &[f64]) -> CliResult<Vec<SeriesValue>> {
    let mut tasks = Vec::new();
    for c in cases {
        for &scheme in &sc.schemes {
            for &rounds in &sc.rounds {
                for &rho in rhos {
                    tasks.push((c.stats, scheme, rounds, rho));
                }
            }
        }
    }
    Ok(tasks
        .into_par_iter()
        .map(|(stats, scheme, rounds, rho)| {
            exact_outage_detailed(&stats, scheme, rounds, sc.rate, rho, sc.truncation)
        })
        .collect::<ris_harq::Result<Vec<_>>>()?)
}

fn order_records(
    cases: &[Case],
    sc: &Scenario,
    points: &[SeriesValue],
    per_curve: usize,
) -> Vec<OrderRecord> {
    let mut chunks = points.chunks(per_curve);
    let mut out = Vec::new();
    for c in cases {
        for &scheme in &sc.schemes {
            for &rounds in &sc.rounds {
                let curve = chunks.next().expect("one chunk per curve");
                out.push(OrderRecord {
                    elements: c.elements,
                    phases: c.phases.clone(),
                    scheme,
                    rounds,
                    min_order: curve.iter().map(|v| v.order).min().unwrap_or(0),
                    max_order: curve.iter().map(|v| v.order).max().unwrap_or(0),
                });
            }
        }
    }
    out
}

fn op_curve(sc: &Scenario) -> CliResult<Report> {
    let cases = scenario_cases(sc)?;
    let points = exact_points(&cases, sc, &sc.snr_linear)?;
    let mut table = Table::new(&["snr_db", "scheme", "rounds", "elements", "p_out_exact"]);
    let mut it = points.iter();
    for c in &cases {
        for &scheme in &sc.schemes {
            for &rounds in &sc.rounds {
                for &db in &sc.snr_db {
                    let p = it.next().expect("one point per row");
                    table.push(vec![
                        plain(db),
                        scheme.to_string(),
                        rounds.to_string(),
                        c.elements.to_string(),
                        sci(p.value),
                    ]);
                }
            }
        }
    }
    Ok(Report {
        table,
        orders: order_records(&cases, sc, &points, sc.snr_db.len()),
        channels: channel_records(&cases),
        solutions: vec![],
    })
}

fn asymptote(sc: &Scenario) -> CliResult<Report> {
    let cases = scenario_cases(sc)?;
    let points = exact_points(&cases, sc, &sc.snr_linear)?;
    let mut table = Table::new(&[
        "snr_db",
        "scheme",
        "rounds",
        "elements",
        "p_out_exact",
        "p_out_asymptotic",
    ]);
    let mut it = points.iter();
    for c in &cases {
        for &scheme in &sc.schemes {
            for &rounds in &sc.rounds {
                for (&db, &rho) in sc.snr_db.iter().zip(&sc.snr_linear) {
                    let p = it.next().expect("one point per row");
                    let asym = asymptotic_outage(&c.stats, scheme, rounds, sc.rate, rho)?.min(1.0);
                    table.push(vec![
                        plain(db),
                        scheme.to_string(),
                        rounds.to_string(),
                        c.elements.to_string(),
                        sci(p.value),
                        sci(asym),
                    ]);
                }
            }
        }
    }
    Ok(Report {
        table,
        orders: order_records(&cases, sc, &points, sc.snr_db.len()),
        channels: channel_records(&cases),
        solutions: vec![],
    })
}

/// Every grid point reuses the same seed, so the simulated curves are
/// monotone in SNR and every scheme and round limit shares one set of draws.
fn monte_carlo(sc: &Scenario) -> CliResult<Report> {
    let cases = scenario_cases(sc)?;
    let mut counts: Vec<Vec<SharedOutageCounts>> = Vec::new();
    for sp in &sc.networks {
        let phases = sc.phases.phases(&sp.network)?;
        let mut per_snr = Vec::new();
        for &rho in &sc.snr_linear {
            let plan = SimulationPlan::new(
                Scheme::TypeI,
                sc.max_rounds(),
                sc.rate,
                rho,
                sc.trials,
                sc.seed,
            )?
            .with_chunk_size(sc.chunk_size)?;
            per_snr.push(shared_outage_counts(&sp.network, &phases, &plan)?);
        }
        counts.push(per_snr);
    }
    let points = exact_points(&cases, sc, &sc.snr_linear)?;
    let mut table = Table::new(&[
        "snr_db",
        "scheme",
        "rounds",
        "elements",
        "p_out_mc",
        "stderr",
        "outages",
        "trials",
        "p_out_exact",
    ]);
    let mut it = points.iter();
    for (c, per_snr) in cases.iter().zip(&counts) {
        for &scheme in &sc.schemes {
            for &rounds in &sc.rounds {
                for (&db, shared) in sc.snr_db.iter().zip(per_snr) {
                    let outages = match scheme {
                        Scheme::TypeI => shared.type_i[rounds as usize - 1],
                        Scheme::ChaseCombining => shared.cc[rounds as usize - 1],
                    };
                    let est = OutageEstimate::from_counts(outages, shared.trials, sc.seed);
                    let p = it.next().expect("one point per row");
                    table.push(vec![
                        plain(db),
                        scheme.to_string(),
                        rounds.to_string(),
                        c.elements.to_string(),
                        sci(est.p_hat),
                        sci(est.stderr),
                        est.outages.to_string(),
                        est.trials.to_string(),
                        sci(p.value),
                    ]);
                }
            }
        }
    }
    Ok(Report {
        table,
        orders: order_records(&cases, sc, &points, sc.snr_db.len()),
        channels: channel_records(&cases),
        solutions: vec![],
    })
}

/// Optimal phases against the fixed `π/3` and seeded random baselines.
fn optimize_phase(sc: &Scenario) -> CliResult<Report> {
    let strategies = [
        PhaseStrategy::Optimal,
        PhaseStrategy::Fixed(FIXED_BASELINE_PHASE),
        PhaseStrategy::Random(sc.seed),
    ];
    let mut cases = Vec::new();
    let mut solutions = Vec::new();
    for sp in &sc.networks {
        let sol = optimal_phases(&sp.network)?;
        for s in &strategies {
            let phases = match s {
                PhaseStrategy::Optimal => sol.phases.clone(),
                other => other.phases(&sp.network)?,
            };
            cases.push(Case {
                elements: sp.elements,
                phases: s.label().into(),
                stats: compute_stats(&sp.network, &phases)?,
            });
        }
        solutions.push(SolutionRecord {
            elements: sp.elements,
            psi_glos_achieved: sol.psi_glos_achieved,
            upper_bound: sol.upper_bound,
            gap: sol.gap,
            thetas: sol.phases.into_inner(),
        });
    }
    let points = exact_points(&cases, sc, &sc.snr_linear)?;
    let mut table = Table::new(&[
        "snr_db",
        "scheme",
        "rounds",
        "elements",
        "strategy",
        "psi_glos",
        "p_out_exact",
    ]);
    let mut it = points.iter();
    for c in &cases {
        for &scheme in &sc.schemes {
            for &rounds in &sc.rounds {
                for &db in &sc.snr_db {
                    let p = it.next().expect("one point per row");
                    table.push(vec![
                        plain(db),
                        scheme.to_string(),
                        rounds.to_string(),
                        c.elements.to_string(),
                        c.phases.clone(),
                        sci(c.stats.psi_glos),
                        sci(p.value),
                    ]);
                }
            }
        }
    }
    Ok(Report {
        table,
        orders: order_records(&cases, sc, &points, sc.snr_db.len()),
        channels: channel_records(&cases),
        solutions,
    })
}

fn curve(
    rhos: &[f64],
    values: impl Iterator<Item = f64>,
    kind: EstimateKind,
) -> CliResult<OutageCurve> {
    let entries = rhos
        .iter()
        .zip(values)
        .map(|(&rho, p_out)| CurvePoint {
            rho,
            p_out,
            kind,
            stderr: None,
        })
        .collect();
    Ok(OutageCurve::new(entries)?)
}

/// Log-log slope of the unclamped asymptote between the window edges. The
/// asymptote is a pure power law, so two points suffice and no floor applies.
fn asymptotic_slope(
    stats: &ChannelStats,
    scheme: Scheme,
    rounds: u32,
    rate: f64,
    window: (f64, f64),
) -> CliResult<f64> {
    let (lo, hi) = window;
    if hi <= lo || hi.is_nan() || lo.is_nan() {
        return Err(ris_harq::Error::Fit("diversity window has zero width".into()).into());
    }
    let p_lo = asymptotic_outage(stats, scheme, rounds, rate, lo)?;
    let p_hi = asymptotic_outage(stats, scheme, rounds, rate, hi)?;
    Ok(-(p_hi.log10() - p_lo.log10()) / (hi.log10() - lo.log10()))
}

/// Log-log slope fits of the exact and asymptotic curves inside the window.
fn diversity(sc: &Scenario) -> CliResult<Report> {
    let cases = scenario_cases(sc)?;
    let (lo_db, hi_db) = sc.fit_window_db;
    let rhos: Vec<f64> = sc
        .snr_db
        .iter()
        .zip(&sc.snr_linear)
        .filter(|(&db, _)| db >= lo_db && db <= hi_db)
        .map(|(_, &rho)| rho)
        .collect();
    let window = (db_to_linear(lo_db), db_to_linear(hi_db));
    let points = exact_points(&cases, sc, &rhos)?;
    let mut table = Table::new(&[
        "scheme",
        "rounds",
        "elements",
        "diversity",
        "asymptotic_diversity",
        "intercept",
        "residual",
        "points",
        "window_lo_db",
        "window_hi_db",
    ]);
    let mut chunks = points.chunks(rhos.len().max(1));
    for c in &cases {
        for &scheme in &sc.schemes {
            for &rounds in &sc.rounds {
                let exact = chunks.next().unwrap_or(&[]);
                let fit = fit_diversity(
                    &curve(&rhos, exact.iter().map(|v| v.value), EstimateKind::Exact)?,
                    window,
                )?;
                let asym_slope = asymptotic_slope(&c.stats, scheme, rounds, sc.rate, window)?;
                table.push(vec![
                    scheme.to_string(),
                    rounds.to_string(),
                    c.elements.to_string(),
                    sci(fit.diversity),
                    sci(asym_slope),
                    sci(fit.intercept),
                    sci(fit.residual),
                    fit.points.to_string(),
                    plain(lo_db),
                    plain(hi_db),
                ]);
            }
        }
    }
    Ok(Report {
        table,
        orders: order_records(&cases, sc, &points, rhos.len()),
        channels: channel_records(&cases),
        solutions: vec![],
    })
}

/// Runs `cmd` on a resolved scenario without touching the file system.
pub fn compute(cmd: Command, sc: &Scenario) -> CliResult<Report> {
    match cmd {
        Command::OpCurve => op_curve(sc),
        Command::Asymptote => asymptote(sc),
        Command::Mc => monte_carlo(sc),
        Command::OptimizePhase => optimize_phase(sc),
        Command::Diversity => diversity(sc),
    }
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Resolves `raw`, runs `cmd` and writes `<cmd>.csv` and `<cmd>.manifest.json` into `out_dir`.
pub fn run(cmd: Command, raw: RawScenario, out_dir: &Path) -> CliResult<RunOutcome> {
    let mut timings = Vec::new();
    let mut stage = |name: &str, start: Instant| {
        timings.push(StageTiming {
            stage: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        })
    };

    let t = Instant::now();
    let scenario = resolve(&raw)?;
    stage("resolve", t);

    let t = Instant::now();
    log::info!(
        "{cmd}: scenario {:?}, {} grid points",
        scenario.name,
        scenario.snr_db.len()
    );
    let report = compute(cmd, &scenario)?;
    stage("compute", t);

    let t = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let csv_name = format!("{cmd}.csv");
    let csv_path = out_dir.join(&csv_name);
    write(&csv_path, &report.table.to_csv())?;
    stage("write", t);

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        threads: rayon::current_num_threads(),
        csv: csv_name,
        scenario: raw,
        resolved: scenario,
        channels: report.channels,
        truncation_orders: report.orders,
        phase_solutions: report.solutions,
        timings,
    };
    let manifest_path = out_dir.join(format!("{cmd}.manifest.json"));
    let json = serde_json::to_string_pretty(&manifest).expect("manifest is always serializable");
    write(&manifest_path, &json)?;
    Ok(RunOutcome {
        csv_path,
        manifest_path,
        manifest,
    })
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Repeats the run recorded in a manifest.
pub fn rerun(manifest: &Path, out_dir: &Path) -> CliResult<RunOutcome> {
    let m = read_manifest(manifest)?;
    run(m.command, m.scenario, out_dir)
}
