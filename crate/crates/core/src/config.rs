//! Complete run configuration as one JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{BangBangConfig, SmpcConfig};
use crate::dp::{Grid, StageCost};
use crate::error::{Error, Result};
use crate::markov::VelocityQuantizer;
use crate::model::CabinPlant;
use crate::plant::{CopMap, PlantLimits};
use crate::sim::{MetricsOptions, MissionDefaults};
use crate::thermal::VehicleThermalConfig;

const DEFAULT_SEDAN: &str = include_str!("../assets/default_config.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub temp_min_c: f64,
    pub temp_max_c: f64,
    pub temp_step_c: f64,
    pub q_step_w: f64,
    pub dt_s: f64,
    /// Optional finer temperature spacing inside a band around the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_band: Option<FineBand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineBand {
    pub low_c: f64,
    pub high_c: f64,
    pub step_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovConfig {
    pub bin_width_kmh: f64,
    pub v_max_kmh: f64,
}

impl MarkovConfig {
    pub fn quantizer(&self) -> Result<VelocityQuantizer> {
        VelocityQuantizer::new(self.bin_width_kmh, self.v_max_kmh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub vehicle: VehicleThermalConfig,
    pub cop_map: CopMap,
    pub plant: PlantLimits,
    pub cost: StageCost,
    pub grid: GridSpec,
    pub bang_bang: BangBangConfig,
    pub smpc: SmpcConfig,
    pub markov: MarkovConfig,
    pub metrics: MetricsOptions,
    pub mission: MissionDefaults,
}

impl SimConfig {
    /// Compact electric sedan shipped with the crate.
    pub fn default_sedan() -> Self {
        Self::from_json(DEFAULT_SEDAN).expect("bundled config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: SimConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.cabin_plant().validate()?;
        self.cost.validate()?;
        self.bang_bang.validate()?;
        self.markov.quantizer()?;
        if self.smpc.horizon == 0 {
            return Err(Error::invalid("smpc", "horizon must be at least 1"));
        }
        let grid = self.grid()?;
        grid.check_limits(&self.plant)?;
        let t = self.mission.initial_cabin_c;
        if t < self.grid.temp_min_c || t > self.grid.temp_max_c {
            return Err(Error::invalid(
                "mission",
                format!("initial cabin temperature {t} °C outside the grid"),
            ));
        }
        Ok(())
    }

    pub fn cabin_plant(&self) -> CabinPlant {
        CabinPlant {
            vehicle: self.vehicle.clone(),
            cop_map: self.cop_map.clone(),
            limits: self.plant,
        }
    }

    /// Temperature axis from the grid spec and a capacity axis spanning
    /// the plant bounds.
    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let q = (self.plant.q_cool_min_w, self.plant.q_cool_max_w, g.q_step_w);
        let coarse = (g.temp_min_c, g.temp_max_c, g.temp_step_c);
        match g.fine_band {
            None => Grid::uniform(coarse, q, g.dt_s),
            Some(b) => Grid::banded(coarse, (b.low_c, b.high_c, b.step_c), q, g.dt_s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_round_trips() {
        let cfg = SimConfig::default_sedan();
        assert_eq!(SimConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let g = cfg.grid().unwrap();
        assert_eq!(g.temp_axis().len(), 16 + 181 + 68);
        assert_eq!(g.q_axis().len(), 69);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = SimConfig::default_sedan();
        cfg.bang_bang.t_low_c = 30.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::default_sedan();
        cfg.mission.initial_cabin_c = 50.0;
        assert!(cfg.validate().is_err());
        assert!(SimConfig::from_json("{}").is_err());
    }
}
