//! Batch controller comparison and the report built from its traces.
//!
//! Runs execute in parallel; results always come back in
//! (mission, controller) order. The report is a pure function of the
//! traces, so rebuilding it from traces saved with [`save_outcomes`]
//! reproduces it byte for byte.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::control::{BangBang, Controller, DpBenchmark, MarkovPredictor, PerfectPredictor, Smpc};
use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;
use crate::sim::{metrics, run, DriveCycle, MetricsOptions, Mission, RunMetrics, SimulationTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    BangBang,
    Dp,
    Smpc,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::BangBang,
        ControllerKind::Smpc,
        ControllerKind::Dp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::BangBang => "bangbang",
            ControllerKind::Dp => "dp",
            ControllerKind::Smpc => "smpc",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bangbang" => Ok(ControllerKind::BangBang),
            "dp" => Ok(ControllerKind::Dp),
            "smpc" => Ok(ControllerKind::Smpc),
            other => Err(Error::invalid(
                "controller",
                format!("unknown controller {other:?}"),
            )),
        }
    }
}

/// Where the SMPC gets its speed forecasts.
#[derive(Debug, Clone)]
pub enum Forecast {
    Markov(Arc<TransitionMatrix>),
    Perfect,
}

/// Controller of the given kind configured from `cfg`.
pub fn build_controller(
    kind: ControllerKind,
    cfg: &SimConfig,
    forecast: Option<&Forecast>,
) -> Result<Box<dyn Controller>> {
    let plant = cfg.cabin_plant();
    Ok(match kind {
        ControllerKind::BangBang => Box::new(BangBang::new(cfg.bang_bang, cfg.plant)?),
        ControllerKind::Dp => Box::new(DpBenchmark::new(plant, cfg.cost, cfg.grid()?)),
        ControllerKind::Smpc => {
            let predictor: Box<dyn crate::control::SpeedPredictor> = match forecast {
                Some(Forecast::Markov(m)) => Box::new(MarkovPredictor::new(
                    m.clone(),
                    cfg.smpc.mode,
                    cfg.smpc.seed,
                )),
                Some(Forecast::Perfect) => Box::new(PerfectPredictor),
                None => {
                    return Err(Error::invalid(
                        "smpc",
                        "a fitted speed predictor is required",
                    ))
                }
            };
            Box::new(Smpc::new(
                plant,
                cfg.cost,
                cfg.grid()?,
                cfg.smpc.horizon,
                predictor,
            )?)
        }
    })
}

#[derive(Debug, Clone)]
pub struct CompareCase {
    pub mission: Mission,
    pub forecast: Option<Forecast>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub mission: String,
    pub controller: ControllerKind,
    /// The trace, or the error message of a failed run.
    pub trace: std::result::Result<SimulationTrace, String>,
}

/// Every (mission, controller) pair. A failing run is recorded and the
/// rest of the batch continues.
pub fn run_comparison(
    cases: &[CompareCase],
    kinds: &[ControllerKind],
    cfg: &SimConfig,
) -> Vec<RunOutcome> {
    let plant = cfg.cabin_plant();
    let jobs: Vec<(&CompareCase, ControllerKind)> = cases
        .iter()
        .flat_map(|c| kinds.iter().map(move |&k| (c, k)))
        .collect();
    jobs.par_iter()
        .map(|&(case, kind)| {
            let trace = build_controller(kind, cfg, case.forecast.as_ref())
                .and_then(|mut c| run(&case.mission, c.as_mut(), &plant))
                .map_err(|e| e.to_string());
            if let Err(e) = &trace {
                log::warn!("{} / {kind}: {e}", case.mission.name);
            }
            RunOutcome {
                mission: case.mission.name.clone(),
                controller: kind,
                trace,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub mission: String,
    pub controller: ControllerKind,
    pub metrics: std::result::Result<RunMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// Metrics per run, with savings against the bang-bang run of the same
    /// mission when there is one.
    pub fn build(outcomes: &[RunOutcome], opts: &MetricsOptions) -> Report {
        let baseline = |mission: &str| {
            outcomes
                .iter()
                .find(|o| o.mission == mission && o.controller == ControllerKind::BangBang)
                .and_then(|o| o.trace.as_ref().ok())
        };
        let rows = outcomes
            .iter()
            .map(|o| {
                let metrics = o.trace.clone().and_then(|t| {
                    let base = match o.controller {
                        ControllerKind::BangBang => None,
                        _ => baseline(&o.mission),
                    };
                    metrics(&t, base, opts).map_err(|e| e.to_string())
                });
                ReportRow {
                    mission: o.mission.clone(),
                    controller: o.controller,
                    metrics,
                }
            })
            .collect();
        Report { rows }
    }

    pub fn get(&self, mission: &str, controller: ControllerKind) -> Option<&RunMetrics> {
        self.rows
            .iter()
            .find(|r| r.mission == mission && r.controller == controller)
            .and_then(|r| r.metrics.as_ref().ok())
    }

    /// Missions where the DP benchmark used more energy than the SMPC by
    /// more than `tolerance` (relative).
    pub fn dp_bound_violations(&self, tolerance: f64) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            if r.controller != ControllerKind::Smpc {
                continue;
            }
            if let (Ok(s), Some(d)) = (&r.metrics, self.get(&r.mission, ControllerKind::Dp)) {
                if d.total_energy_j > s.total_energy_j * (1.0 + tolerance) {
                    out.push(r.mission.clone());
                }
            }
        }
        out
    }

    /// CSV with energy in joules, saving in percent and temperatures in °C.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("mission,controller,energy_j,saving_pct,mean_temp_c,temp_std_c,status\n");
        for r in &self.rows {
            match &r.metrics {
                Ok(m) => {
                    let saving = m
                        .saving
                        .map(|x| format!("{:.2}", 100.0 * x))
                        .unwrap_or_default();
                    let _ = writeln!(
                        s,
                        "{},{},{:.1},{},{:.3},{:.3},ok",
                        r.mission,
                        r.controller,
                        m.total_energy_j,
                        saving,
                        m.mean_temp_c,
                        m.temp_std_c
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        s,
                        "{},{},,,,,\"error: {}\"",
                        r.mission,
                        r.controller,
                        e.replace('"', "'")
                    );
                }
            }
        }
        s
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let header = [
            "Mission",
            "Controller",
            "Energy (1e6 J)",
            "Saving",
            "Mean Temperature",
            "Standard Deviation",
        ];
        let mut cells: Vec<[String; 6]> = vec![header.map(String::from)];
        for r in &self.rows {
            let row = match &r.metrics {
                Ok(m) => [
                    r.mission.clone(),
                    r.controller.to_string(),
                    format!("{:.4}", m.total_energy_j / 1e6),
                    m.saving
                        .map(|x| format!("{:.2}%", 100.0 * x))
                        .unwrap_or_else(|| "-".into()),
                    format!("{:.2}", m.mean_temp_c),
                    format!("{:.2}", m.temp_std_c),
                ],
                Err(e) => [
                    r.mission.clone(),
                    r.controller.to_string(),
                    format!("failed: {e}"),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            };
            cells.push(row);
        }
        let mut widths = [0usize; 6];
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(j, (c, w))| {
                    if j < 2 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(
                    out,
                    "{}",
                    "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
                );
            }
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    runs: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    mission: String,
    controller: ControllerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub const MANIFEST_FILE: &str = "runs.json";

fn trace_file_name(mission: &str, controller: ControllerKind) -> String {
    let safe: String = mission
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("trace_{safe}_{controller}.csv")
}

/// Write every trace plus a `runs.json` manifest into `dir`.
pub fn save_outcomes(outcomes: &[RunOutcome], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut runs = Vec::new();
    for o in outcomes {
        let entry = match &o.trace {
            Ok(t) => {
                let name = trace_file_name(&o.mission, o.controller);
                t.save(&dir.join(&name))?;
                ManifestEntry {
                    mission: o.mission.clone(),
                    controller: o.controller,
                    trace_file: Some(name),
                    error: None,
                }
            }
            Err(e) => ManifestEntry {
                mission: o.mission.clone(),
                controller: o.controller,
                trace_file: None,
                error: Some(e.clone()),
            },
        };
        runs.push(entry);
    }
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&Manifest { runs }).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

pub fn load_outcomes(dir: &Path) -> Result<Vec<RunOutcome>> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
    manifest
        .runs
        .into_iter()
        .map(|e| {
            let trace = match (e.trace_file, e.error) {
                (Some(f), _) => Ok(SimulationTrace::load(
                    &dir.join(f),
                    &e.mission,
                    e.controller.as_str(),
                )?),
                (None, Some(err)) => Err(err),
                (None, None) => Err("no trace recorded".to_string()),
            };
            Ok(RunOutcome {
                mission: e.mission,
                controller: e.controller,
                trace,
            })
        })
        .collect()
}

/// Hold out the last `test_count` cycles: `(train, test)`.
pub fn split_corpus(
    mut cycles: Vec<DriveCycle>,
    test_count: usize,
) -> Result<(Vec<DriveCycle>, Vec<DriveCycle>)> {
    if test_count >= cycles.len() {
        return Err(Error::invalid(
            "corpus split",
            format!(
                "cannot hold out {test_count} of {} cycles and still train",
                cycles.len()
            ),
        ));
    }
    let test = cycles.split_off(cycles.len() - test_count);
    Ok((cycles, test))
}
