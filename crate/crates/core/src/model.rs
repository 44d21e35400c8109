//! The cabin + AC plant as one controlled system: cabin-air energy balance
//! driven by the thermal loads, integrated with RK4 while the cooling
//! capacity is held constant over a step.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ode::rk4_step;
use crate::plant::{CopMap, PlantLimits};
use crate::thermal::{EnvironmentSample, LoadLine, VehicleThermalConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CabinPlant {
    pub vehicle: VehicleThermalConfig,
    pub cop_map: CopMap,
    pub limits: PlantLimits,
}

/// Boundary conditions of one step reduced to what the integrator needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepModel {
    pub load: LoadLine,
    pub capacitance_j_per_k: f64,
    pub ambient_c: f64,
}

impl StepModel {
    #[inline]
    pub fn derivative(&self, cabin_c: f64, q_cool_w: f64) -> f64 {
        (self.load.total(cabin_c) - q_cool_w) / self.capacitance_j_per_k
    }

    /// Cabin temperature after `dt_s` with constant cooling capacity.
    #[inline]
    pub fn advance(&self, cabin_c: f64, q_cool_w: f64, dt_s: f64) -> f64 {
        rk4_step(|_, t| self.derivative(t, q_cool_w), 0.0, cabin_c, dt_s)
    }
}

/// Operating point of the plant for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDraw {
    pub cop: f64,
    pub power_w: f64,
}

impl CabinPlant {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.cop_map.validate()?;
        self.limits.validate()
    }

    pub fn step_model(&self, env: &EnvironmentSample) -> Result<StepModel> {
        Ok(StepModel {
            load: self.vehicle.load_line(env)?,
            capacitance_j_per_k: self.vehicle.heat_capacity(),
            ambient_c: env.ambient_c,
        })
    }

    /// COP and electric power at the start-of-step cabin temperature.
    #[inline]
    pub fn power(&self, cabin_c: f64, ambient_c: f64, q_cool_w: f64) -> PowerDraw {
        let plr = (q_cool_w / self.limits.nominal_capacity_w).clamp(0.0, 1.0);
        let cop = self.cop_map.cop(cabin_c, ambient_c, plr);
        PowerDraw {
            cop,
            power_w: q_cool_w / cop,
        }
    }
}
