//! Closed-loop simulation of the cabin and AC plant under a controller,
//! and the summary statistics computed from a run.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{Controller, ControllerInput};
use crate::dp::{stage_cost, StageCost};
use crate::error::{Error, Result};
use crate::interp;
use crate::model::CabinPlant;
use crate::plant::{clamp_command, compressor_speed};
use crate::thermal::EnvironmentSample;

pub const KMH_PER_MS: f64 = 3.6;

/// Vehicle speed sampled every second.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    pub name: String,
    pub time_s: Vec<f64>,
    pub speed_kmh: Vec<f64>,
}

impl DriveCycle {
    pub fn new(name: impl Into<String>, time_s: Vec<f64>, speed_kmh: Vec<f64>) -> Result<Self> {
        if time_s.len() != speed_kmh.len() {
            return Err(Error::invalid(
                "drive cycle",
                "time and speed columns differ in length",
            ));
        }
        for (i, w) in time_s.windows(2).enumerate() {
            if w[1] - w[0] != 1.0 {
                return Err(Error::invalid(
                    "drive cycle",
                    format!(
                        "sample {} at {} s does not follow {} s by exactly 1 s",
                        i + 1,
                        w[1],
                        w[0]
                    ),
                ));
            }
        }
        if let Some(i) = speed_kmh.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "drive cycle",
                format!("sample {i} has speed {}", speed_kmh[i]),
            ));
        }
        Ok(DriveCycle {
            name: name.into(),
            time_s,
            speed_kmh,
        })
    }

    /// Cycle starting at 0 s.
    pub fn from_speeds(name: impl Into<String>, speed_kmh: Vec<f64>) -> Self {
        let time_s = (0..speed_kmh.len()).map(|i| i as f64).collect();
        DriveCycle {
            name: name.into(),
            time_s,
            speed_kmh,
        }
    }

    pub fn len(&self) -> usize {
        self.speed_kmh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed_kmh.is_empty()
    }
}

/// Multiply every speed by `factor`; time stamps are unchanged.
pub fn scale_cycle(cycle: &DriveCycle, factor: f64) -> Result<DriveCycle> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid(
            "scale factor",
            format!("{factor} must be positive"),
        ));
    }
    Ok(DriveCycle {
        name: format!("{}x{}", cycle.name, factor),
        time_s: cycle.time_s.clone(),
        speed_kmh: cycle.speed_kmh.iter().map(|v| v * factor).collect(),
    })
}

/// Ambient temperature and solar flux at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    pub time_s: f64,
    pub ambient_c: f64,
    pub solar_wm2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionDefaults {
    pub initial_cabin_c: f64,
    pub initial_q_cool_w: f64,
}

impl Default for MissionDefaults {
    fn default() -> Self {
        MissionDefaults {
            initial_cabin_c: 40.0,
            initial_q_cool_w: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mission {
    pub name: String,
    pub time_s: Vec<f64>,
    pub speed_kmh: Vec<f64>,
    /// One sample per cycle step; the air speed is the vehicle speed.
    pub environment: Vec<EnvironmentSample>,
    pub initial_cabin_c: f64,
    pub initial_q_cool_w: f64,
    pub dt_s: f64,
}

impl Mission {
    /// Weather is linearly interpolated onto the cycle time stamps and held
    /// constant beyond its ends; a single sample means constant conditions.
    pub fn new(
        cycle: &DriveCycle,
        weather: &[WeatherSample],
        initial_cabin_c: f64,
        initial_q_cool_w: f64,
    ) -> Result<Self> {
        if weather.is_empty() {
            return Err(Error::Empty("environment trace has no samples".into()));
        }
        if weather.windows(2).any(|w| !(w[1].time_s >= w[0].time_s)) {
            return Err(Error::invalid(
                "environment trace",
                "time stamps must be nondecreasing",
            ));
        }
        if !initial_cabin_c.is_finite() || !initial_q_cool_w.is_finite() {
            return Err(Error::invalid("mission", "initial state must be finite"));
        }
        let wt: Vec<f64> = weather.iter().map(|w| w.time_s).collect();
        let amb: Vec<f64> = weather.iter().map(|w| w.ambient_c).collect();
        let sol: Vec<f64> = weather.iter().map(|w| w.solar_wm2).collect();
        let environment = cycle
            .time_s
            .iter()
            .zip(&cycle.speed_kmh)
            .map(|(&t, &v)| {
                let env = EnvironmentSample {
                    time_s: t,
                    ambient_c: interp::linear(&wt, &amb, t),
                    solar_wm2: interp::linear(&wt, &sol, t),
                    air_speed_m_s: v / KMH_PER_MS,
                };
                env.validate().map(|_| env)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mission {
            name: cycle.name.clone(),
            time_s: cycle.time_s.clone(),
            speed_kmh: cycle.speed_kmh.clone(),
            environment,
            initial_cabin_c,
            initial_q_cool_w,
            dt_s: 1.0,
        })
    }

    pub fn with_defaults(
        cycle: &DriveCycle,
        weather: &[WeatherSample],
        d: &MissionDefaults,
    ) -> Result<Self> {
        Mission::new(cycle, weather, d.initial_cabin_c, d.initial_q_cool_w)
    }

    pub fn len(&self) -> usize {
        self.speed_kmh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed_kmh.is_empty()
    }

    /// The remaining mission from `step` on.
    pub fn slice_from(&self, step: usize) -> Mission {
        let s = step.min(self.len());
        Mission {
            name: self.name.clone(),
            time_s: self.time_s[s..].to_vec(),
            speed_kmh: self.speed_kmh[s..].to_vec(),
            environment: self.environment[s..].to_vec(),
            initial_cabin_c: self.initial_cabin_c,
            initial_q_cool_w: self.initial_q_cool_w,
            dt_s: self.dt_s,
        }
    }

    pub fn truncated(&self, len: usize) -> Mission {
        let n = len.min(self.len());
        Mission {
            time_s: self.time_s[..n].to_vec(),
            speed_kmh: self.speed_kmh[..n].to_vec(),
            environment: self.environment[..n].to_vec(),
            ..self.clone()
        }
    }
}

/// One simulated step. `cabin_c` is the start-of-step temperature and
/// `cabin_next_c` the temperature at the end of the step.
///
/// CSV columns (units in the names): `time_s, speed_kmh, ambient_c,
/// solar_wm2, cabin_c, cabin_next_c, requested_w, q_cool_w,
/// compressor_rpm, cop, p_ac_w, conduction_w, radiation_w, occupants_w,
/// ventilation_w, energy_j` where `energy_j` is cumulative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub speed_kmh: f64,
    pub ambient_c: f64,
    pub solar_wm2: f64,
    pub cabin_c: f64,
    pub cabin_next_c: f64,
    pub requested_w: f64,
    pub q_cool_w: f64,
    pub compressor_rpm: f64,
    pub cop: f64,
    pub p_ac_w: f64,
    pub conduction_w: f64,
    pub radiation_w: f64,
    pub occupants_w: f64,
    pub ventilation_w: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub mission: String,
    pub controller: String,
    pub dt_s: f64,
    pub rows: Vec<TraceRow>,
    pub fallback_events: usize,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_energy_j(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.energy_j)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record([
                "time_s",
                "speed_kmh",
                "ambient_c",
                "solar_wm2",
                "cabin_c",
                "cabin_next_c",
                "requested_w",
                "q_cool_w",
                "compressor_rpm",
                "cop",
                "p_ac_w",
                "conduction_w",
                "radiation_w",
                "occupants_w",
                "ventilation_w",
                "energy_j",
            ])?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, mission: &str, controller: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        let dt_s = rows
            .windows(2)
            .next()
            .map_or(1.0, |w| w[1].time_s - w[0].time_s);
        Ok(SimulationTrace {
            mission: mission.to_string(),
            controller: controller.to_string(),
            dt_s,
            rows,
            fallback_events: 0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path, mission: &str, controller: &str) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(std::io::BufReader::new(f), mission, controller)
    }
}

/// Simulate `mission` in closed loop. Each step the controller's request is
/// clamped to the plant bounds and rate limit, the cabin ODE is integrated
/// with that capacity held, and `P * dt` is added to the energy.
pub fn run(
    mission: &Mission,
    controller: &mut dyn Controller,
    plant: &CabinPlant,
) -> Result<SimulationTrace> {
    let dt = mission.dt_s;
    let mut rows = Vec::with_capacity(mission.len());
    let mut t = mission.initial_cabin_c;
    let mut q_prev = mission.initial_q_cool_w;
    let mut energy = 0.0;
    for (k, env) in mission.environment.iter().enumerate() {
        let input = ControllerInput {
            step: k,
            time_s: mission.time_s[k],
            cabin_c: t,
            q_prev_w: q_prev,
            speed_kmh: mission.speed_kmh[k],
            env: *env,
            mission,
        };
        let requested = controller.command(&input)?;
        if !requested.is_finite() {
            return Err(Error::Diverged {
                step: k,
                reason: format!("controller requested {requested} W"),
            });
        }
        let q = clamp_command(q_prev, requested, dt, &plant.limits);
        let loads = plant.vehicle.loads(env, t)?;
        let draw = plant.power(t, env.ambient_c, q);
        let next = plant.step_model(env)?.advance(t, q, dt);
        if !next.is_finite() || !draw.power_w.is_finite() {
            return Err(Error::Diverged {
                step: k,
                reason: format!("cabin temperature {next}, power {}", draw.power_w),
            });
        }
        energy += draw.power_w * dt;
        rows.push(TraceRow {
            time_s: mission.time_s[k],
            speed_kmh: mission.speed_kmh[k],
            ambient_c: env.ambient_c,
            solar_wm2: env.solar_wm2,
            cabin_c: t,
            cabin_next_c: next,
            requested_w: requested,
            q_cool_w: q,
            compressor_rpm: compressor_speed(q, &plant.limits),
            cop: draw.cop,
            p_ac_w: draw.power_w,
            conduction_w: loads.conduction_w,
            radiation_w: loads.radiation_w,
            occupants_w: loads.occupants_w,
            ventilation_w: loads.ventilation_w,
            energy_j: energy,
        });
        t = next;
        q_prev = q;
    }
    Ok(SimulationTrace {
        mission: mission.name.clone(),
        controller: controller.name().to_string(),
        dt_s: dt,
        rows,
        fallback_events: controller.fallback_events(),
    })
}

/// Which samples the temperature statistics cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Skip the initial samples until the cabin first cools to
    /// `pulldown_threshold_c`.
    pub exclude_pulldown: bool,
    pub pulldown_threshold_c: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            exclude_pulldown: true,
            pulldown_threshold_c: 26.0,
        }
    }
}

impl MetricsOptions {
    pub fn full_trace() -> Self {
        MetricsOptions {
            exclude_pulldown: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub total_energy_j: f64,
    pub mean_temp_c: f64,
    /// Population standard deviation.
    pub temp_std_c: f64,
    pub saving: Option<f64>,
    /// Number of samples the temperature statistics cover.
    pub samples: usize,
}

/// Index of the first sample at or below the pull-down threshold.
pub fn pulldown_end(trace: &SimulationTrace, threshold_c: f64) -> Option<usize> {
    trace.rows.iter().position(|r| r.cabin_c <= threshold_c)
}

pub fn metrics(
    trace: &SimulationTrace,
    baseline: Option<&SimulationTrace>,
    opts: &MetricsOptions,
) -> Result<RunMetrics> {
    if trace.is_empty() {
        return Err(Error::Empty(format!(
            "trace {}/{} is empty",
            trace.mission, trace.controller
        )));
    }
    let start = if opts.exclude_pulldown {
        pulldown_end(trace, opts.pulldown_threshold_c).ok_or_else(|| {
            Error::Empty(format!(
                "trace {}/{} never cools to {} °C",
                trace.mission, trace.controller, opts.pulldown_threshold_c
            ))
        })?
    } else {
        0
    };
    let temps = &trace.rows[start..];
    let n = temps.len() as f64;
    let mean = temps.iter().map(|r| r.cabin_c).sum::<f64>() / n;
    let var = temps
        .iter()
        .map(|r| (r.cabin_c - mean).powi(2))
        .sum::<f64>()
        / n;
    let total = trace.total_energy_j();
    let saving = match baseline {
        Some(b) => {
            let e = b.total_energy_j();
            if !(e > 0.0) {
                return Err(Error::invalid(
                    "baseline",
                    "baseline energy must be positive",
                ));
            }
            Some(1.0 - total / e)
        }
        None => None,
    };
    Ok(RunMetrics {
        total_energy_j: total,
        mean_temp_c: mean,
        temp_std_c: var.sqrt(),
        saving,
        samples: temps.len(),
    })
}

/// Cost of a simulated run under the same stage cost the DP minimizes.
pub fn trajectory_cost(trace: &SimulationTrace, cost: &StageCost) -> f64 {
    trace
        .rows
        .iter()
        .map(|r| stage_cost(r.p_ac_w, r.cabin_next_c, cost, trace.dt_s))
        .sum()
}
