//! Energy sensitivity sweeps at a held cabin temperature.
//!
//! For every swept value and target the cabin is held exactly at the
//! target under constant conditions: each step the plant delivers the
//! instantaneous total load, clamped to its capacity bounds, and the
//! electric energy is integrated over a fixed-duration mission.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CabinPlant;
use crate::sim::KMH_PER_MS;
use crate::thermal::EnvironmentSample;

/// Length of every sweep mission.
pub const SWEEP_DURATION_S: usize = 1370;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    Speed,
    Solar,
    Ambient,
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(SweepVariable::Speed),
            "solar" => Ok(SweepVariable::Solar),
            "ambient" => Ok(SweepVariable::Ambient),
            other => Err(Error::invalid(
                "sweep variable",
                format!("unknown variable {other:?}"),
            )),
        }
    }
}

impl SweepVariable {
    pub fn column(&self) -> &'static str {
        match self {
            SweepVariable::Speed => "speed_kmh",
            SweepVariable::Solar => "solar_wm2",
            SweepVariable::Ambient => "ambient_c",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub targets_c: Vec<f64>,
    /// Conditions held while another variable is swept.
    pub speed_kmh: f64,
    pub ambient_c: f64,
    pub solar_wm2: f64,
    #[serde(default = "default_duration")]
    pub duration_s: usize,
}

fn default_duration() -> usize {
    SWEEP_DURATION_S
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<f64>, targets_c: Vec<f64>) -> Self {
        SweepSpec {
            variable,
            values,
            targets_c,
            speed_kmh: 40.0,
            ambient_c: 30.0,
            solar_wm2: 900.0,
            duration_s: SWEEP_DURATION_S,
        }
    }

    pub fn validate(&self) -> Result<()> {
        const WHAT: &str = "sweep spec";
        if self.values.is_empty() {
            return Err(Error::invalid(WHAT, "value list is empty"));
        }
        if self.targets_c.is_empty() {
            return Err(Error::invalid(WHAT, "target list is empty"));
        }
        for list in [&self.values, &self.targets_c] {
            if list.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(WHAT, "values must be finite"));
            }
            if list.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::invalid(WHAT, "value lists must be sorted"));
            }
        }
        if self.duration_s == 0 {
            return Err(Error::invalid(WHAT, "duration must be positive"));
        }
        Ok(())
    }

    fn environment(&self, value: f64) -> EnvironmentSample {
        let mut env = EnvironmentSample {
            time_s: 0.0,
            ambient_c: self.ambient_c,
            solar_wm2: self.solar_wm2,
            air_speed_m_s: self.speed_kmh / KMH_PER_MS,
        };
        match self.variable {
            SweepVariable::Speed => env.air_speed_m_s = value / KMH_PER_MS,
            SweepVariable::Solar => env.solar_wm2 = value,
            SweepVariable::Ambient => env.ambient_c = value,
        }
        env
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub target_c: f64,
    pub energy_j: f64,
    /// The load exceeds the plant capacity; the energy is that of running
    /// at full capacity.
    pub unreachable: bool,
}

fn hold_energy(
    spec: &SweepSpec,
    plant: &CabinPlant,
    value: f64,
    target_c: f64,
) -> Result<SweepRow> {
    let env = spec.environment(value);
    env.validate()?;
    let line = plant.vehicle.load_line(&env)?;
    let lim = &plant.limits;
    let mut energy = 0.0;
    let mut unreachable = false;
    for _ in 0..spec.duration_s {
        let load = line.total(target_c);
        unreachable |= load > lim.q_cool_max_w;
        let q = load.clamp(lim.q_cool_min_w, lim.q_cool_max_w);
        energy += plant.power(target_c, env.ambient_c, q).power_w;
    }
    Ok(SweepRow {
        value,
        target_c,
        energy_j: energy,
        unreachable,
    })
}

/// One row per (value, target), ordered by value and then target.
pub fn run_sweep(spec: &SweepSpec, plant: &CabinPlant) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let pairs: Vec<(f64, f64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.targets_c.iter().map(move |&t| (v, t)))
        .collect();
    pairs
        .par_iter()
        .map(|&(v, t)| hold_energy(spec, plant, v, t))
        .collect()
}

pub fn write_sweep_csv<W: Write>(variable: SweepVariable, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([variable.column(), "target_c", "energy_j", "unreachable"])?;
    for r in rows {
        w.write_record([
            r.value.to_string(),
            r.target_c.to_string(),
            format!("{:.3}", r.energy_j),
            r.unreachable.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn linear_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn energies(rows: &[SweepRow]) -> Vec<f64> {
        rows.iter().map(|r| r.energy_j).collect()
    }

    #[test]
    fn empty_values_rejected() {
        let spec = SweepSpec::new(SweepVariable::Speed, vec![], vec![23.0]);
        assert!(run_sweep(&spec, &SimConfig::default_sedan().cabin_plant()).is_err());
        let spec = SweepSpec::new(SweepVariable::Speed, vec![5.0, 0.0], vec![23.0]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rows_sorted_and_complete() {
        let spec = SweepSpec::new(
            SweepVariable::Ambient,
            vec![25.0, 30.0, 35.0],
            vec![20.0, 24.0],
        );
        let rows = run_sweep(&spec, &SimConfig::default_sedan().cabin_plant()).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[1].value, rows[1].target_c), (25.0, 24.0));
        assert!(rows
            .iter()
            .all(|r| r.energy_j.is_finite() && !r.unreachable));
    }

    #[test]
    fn standing_still_costs_more() {
        let spec = SweepSpec::new(SweepVariable::Speed, vec![0.0, 5.0], vec![23.0]);
        let e = energies(&run_sweep(&spec, &SimConfig::default_sedan().cabin_plant()).unwrap());
        assert!(e[0] > e[1]);
    }

    #[test]
    fn overload_is_flagged() {
        let spec = SweepSpec::new(SweepVariable::Ambient, vec![45.0], vec![15.0]);
        let mut plant = SimConfig::default_sedan().cabin_plant();
        plant.limits.q_cool_max_w = 1000.0;
        let rows = run_sweep(&spec, &plant).unwrap();
        assert!(rows[0].unreachable);
    }

    #[test]
    fn held_energy_matches_hand_computation() {
        let cfg = SimConfig::default_sedan();
        let plant = cfg.cabin_plant();
        let spec = SweepSpec::new(SweepVariable::Solar, vec![800.0], vec![24.0]);
        let row = run_sweep(&spec, &plant).unwrap()[0];
        let env = spec.environment(800.0);
        let load = plant.vehicle.loads(&env, 24.0).unwrap().total();
        let cop = plant
            .cop_map
            .cop(24.0, 30.0, load / plant.limits.nominal_capacity_w);
        assert!((row.energy_j - 1370.0 * load / cop).abs() < 1e-6 * row.energy_j);
    }

    #[test]
    fn r2_of_exact_line() {
        assert!((linear_r2(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!(linear_r2(&[1.0, 2.0, 3.0], &[1.0, 3.0, 1.0]) < 0.01);
    }
}
