//! Cabin thermal loads and the cabin-air energy balance.
//!
//! Four load terms drive the cabin air temperature: conduction through the
//! body shell and glazing (with the sol-air augmentation of the outside
//! temperature), solar radiation through the windows, sensible heat from the
//! occupants and the fresh-air share of the ventilation flow. The cooling
//! capacity of the AC plant is subtracted from their sum and the remainder
//! heats the lumped cabin air volume.
//!
//! Units: temperatures in °C, heat flows in W, solar flux density in W/m²,
//! speeds in m/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sensible heat of the driver, W.
pub const DRIVER_HEAT_W: f64 = 145.0;
/// Sensible heat per passenger, W.
pub const PASSENGER_HEAT_W: f64 = 116.0;

/// Valid range of the internal air speed for the interior convection
/// correlation, m/s.
pub const INTERNAL_AIR_SPEED_RANGE: (f64, f64) = (0.25, 3.0);

/// Surface-to-air temperature difference at which the interior correlation
/// switches from the linear branch to the quarter-power branch, K.
pub const INTERIOR_BRANCH_SWITCH_K: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub thickness_m: f64,
    pub conductivity_w_per_mk: f64,
}

/// An opaque (or glazed) envelope element that conducts heat into the cabin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyPanel {
    #[serde(default)]
    pub name: String,
    pub layers: Vec<Layer>,
    pub area_m2: f64,
    /// Mean absorptivity of the outer surface, in [0, 1].
    pub absorptivity: f64,
}

/// A window that admits solar radiation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPanel {
    #[serde(default)]
    pub name: String,
    pub area_m2: f64,
    /// Angle between the glass and the vertical, rad.
    pub tilt_rad: f64,
    /// Fraction of the incident flux transmitted into the cabin.
    pub transmittance: f64,
    /// Mean absorptivity of the glass.
    pub absorptivity: f64,
    /// Shading correction factor, in (0, 1].
    pub shading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CabinAirConfig {
    pub density_kg_m3: f64,
    pub volume_m3: f64,
    pub heat_capacity_j_per_kgk: f64,
    pub internal_air_speed_m_s: f64,
    /// Recirculated share of the evaporator air flow, in [0, 1].
    pub recirculation: f64,
    pub evaporator_mass_flow_kg_s: f64,
    pub passengers: u32,
    pub occupant_correction: f64,
}

/// Coefficients of the interior convection correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorConvection {
    pub a: f64,
    pub b: f64,
    /// Quarter-power coefficient, empirically between 2.67 and 3.26.
    pub c: f64,
    /// Temperature difference between interior surfaces and cabin air, K.
    pub surface_delta_k: f64,
}

impl Default for InteriorConvection {
    fn default() -> Self {
        Self {
            a: 3.49,
            b: 0.093,
            c: 3.0,
            surface_delta_k: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleThermalConfig {
    pub body: Vec<BodyPanel>,
    pub windows: Vec<WindowPanel>,
    pub cabin: CabinAirConfig,
    #[serde(default)]
    pub interior: InteriorConvection,
}

/// Boundary conditions for one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSample {
    pub time_s: f64,
    pub ambient_c: f64,
    pub solar_wm2: f64,
    /// Air speed relative to the body; equals vehicle speed in still air.
    pub air_speed_m_s: f64,
}

impl EnvironmentSample {
    pub fn validate(&self) -> Result<()> {
        if !(self.solar_wm2 >= 0.0) {
            return Err(Error::invalid(
                "environment sample",
                format!("solar flux {} < 0", self.solar_wm2),
            ));
        }
        if !(self.air_speed_m_s >= 0.0) {
            return Err(Error::invalid(
                "environment sample",
                format!("air speed {} < 0", self.air_speed_m_s),
            ));
        }
        if !(-50.0..=60.0).contains(&self.ambient_c) {
            return Err(Error::invalid(
                "environment sample",
                format!("ambient {} °C outside [-50, 60]", self.ambient_c),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThermalLoads {
    pub conduction_w: f64,
    pub radiation_w: f64,
    pub occupants_w: f64,
    pub ventilation_w: f64,
}

impl ThermalLoads {
    pub fn total(&self) -> f64 {
        self.conduction_w + self.radiation_w + self.occupants_w + self.ventilation_w
    }
}

/// Exterior convective coefficient, W/(m²·K), from the air speed relative to
/// the body in m/s.
pub fn external_convective_coeff(air_speed_m_s: f64) -> Result<f64> {
    if !(air_speed_m_s >= 0.0) {
        return Err(Error::domain(format!(
            "relative air speed {air_speed_m_s} m/s is negative"
        )));
    }
    Ok(1.163 * (4.0 + 12.0 * air_speed_m_s.sqrt()))
}

/// Interior convective coefficient, W/(m²·K).
///
/// The surface-to-air temperature difference selects the branch; at exactly
/// 5 K the quarter-power branch is used. The internal air speed is only
/// checked against the correlation's validity range.
pub fn internal_convective_coeff(
    surface_delta_k: f64,
    internal_air_speed_m_s: f64,
    c: f64,
) -> Result<f64> {
    internal_convective_coeff_with(
        &InteriorConvection {
            c,
            surface_delta_k,
            ..Default::default()
        },
        internal_air_speed_m_s,
    )
}

pub fn internal_convective_coeff_with(
    cfg: &InteriorConvection,
    internal_air_speed_m_s: f64,
) -> Result<f64> {
    let (lo, hi) = INTERNAL_AIR_SPEED_RANGE;
    if !(lo..=hi).contains(&internal_air_speed_m_s) {
        return Err(Error::domain(format!(
            "internal air speed {internal_air_speed_m_s} m/s outside [{lo}, {hi}]"
        )));
    }
    let dt = cfg.surface_delta_k.abs();
    if dt < INTERIOR_BRANCH_SWITCH_K {
        Ok(cfg.a + cfg.b * dt)
    } else {
        Ok(cfg.c * dt.powf(0.25))
    }
}

/// Overall heat transfer coefficient of a panel: series resistance of the
/// material layers and both convective films.
pub fn heat_transfer_coeff(panel: &BodyPanel, alpha_w: f64, alpha_n: f64) -> f64 {
    let layers: f64 = panel
        .layers
        .iter()
        .map(|l| l.thickness_m / l.conductivity_w_per_mk)
        .sum();
    1.0 / (layers + 1.0 / alpha_w + 1.0 / alpha_n)
}

pub fn conduction_load(
    panels: &[BodyPanel],
    ambient_c: f64,
    cabin_c: f64,
    solar_wm2: f64,
    alpha_w: f64,
    alpha_n: f64,
) -> f64 {
    panels
        .iter()
        .map(|p| {
            let k = heat_transfer_coeff(p, alpha_w, alpha_n);
            let sol_air = ambient_c + p.absorptivity * solar_wm2 / alpha_w;
            k * p.area_m2 * (sol_air - cabin_c)
        })
        .sum()
}

pub fn radiation_load(windows: &[WindowPanel], solar_wm2: f64, alpha_w: f64, alpha_n: f64) -> f64 {
    windows
        .iter()
        .map(|w| {
            let q = (w.transmittance * solar_wm2 + w.absorptivity * solar_wm2 * alpha_n / alpha_w)
                * w.shading;
            q * w.area_m2 * w.tilt_rad.sin()
        })
        .sum()
}

/// Sensible occupant heat. Only the passengers are scaled by the correction
/// factor; the driver contributes a fixed 145 W.
pub fn occupant_load(passengers: u32, correction: f64) -> f64 {
    PASSENGER_HEAT_W * passengers as f64 * correction + DRIVER_HEAT_W
}

pub fn ventilation_load(cfg: &CabinAirConfig, ambient_c: f64, cabin_c: f64) -> f64 {
    cfg.evaporator_mass_flow_kg_s
        * (1.0 - cfg.recirculation)
        * cfg.heat_capacity_j_per_kgk
        * (ambient_c - cabin_c)
}

/// dT_in/dt in K/s.
pub fn cabin_temp_derivative(loads: &ThermalLoads, q_cool_w: f64, cfg: &CabinAirConfig) -> f64 {
    (loads.total() - q_cool_w) / heat_capacity(cfg)
}

/// Heat capacity of the cabin air, J/K.
pub fn heat_capacity(cfg: &CabinAirConfig) -> f64 {
    cfg.density_kg_m3 * cfg.volume_m3 * cfg.heat_capacity_j_per_kgk
}

/// Total load as an affine function of cabin temperature for fixed
/// boundary conditions: `total(T) = at_zero_w - slope_w_per_k * T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadLine {
    pub at_zero_w: f64,
    pub slope_w_per_k: f64,
}

impl LoadLine {
    #[inline]
    pub fn total(&self, cabin_c: f64) -> f64 {
        self.at_zero_w - self.slope_w_per_k * cabin_c
    }
}

impl VehicleThermalConfig {
    pub fn validate(&self) -> Result<()> {
        const WHAT: &str = "vehicle thermal config";
        for (i, p) in self.body.iter().enumerate() {
            if !(p.area_m2 > 0.0) {
                return Err(Error::invalid(
                    WHAT,
                    format!("body panel {i} ({}) area must be > 0", p.name),
                ));
            }
            if !(0.0..=1.0).contains(&p.absorptivity) {
                return Err(Error::invalid(
                    WHAT,
                    format!("body panel {i} ({}) absorptivity outside [0, 1]", p.name),
                ));
            }
            for l in &p.layers {
                if !(l.thickness_m > 0.0 && l.conductivity_w_per_mk > 0.0) {
                    return Err(Error::invalid(
                        WHAT,
                        format!("body panel {i} ({}) has a layer with non-positive thickness or conductivity", p.name),
                    ));
                }
            }
        }
        for (i, w) in self.windows.iter().enumerate() {
            if !(w.area_m2 > 0.0) {
                return Err(Error::invalid(
                    WHAT,
                    format!("window {i} ({}) area must be > 0", w.name),
                ));
            }
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&w.tilt_rad) {
                return Err(Error::invalid(
                    WHAT,
                    format!("window {i} ({}) tilt outside [0, pi/2]", w.name),
                ));
            }
            let frac_ok =
                (0.0..=1.0).contains(&w.transmittance) && (0.0..=1.0).contains(&w.absorptivity);
            if !frac_ok || w.transmittance + w.absorptivity > 1.0 + 1e-12 {
                return Err(Error::invalid(
                    WHAT,
                    format!(
                        "window {i} ({}) needs transmittance + absorptivity <= 1",
                        w.name
                    ),
                ));
            }
            if !(w.shading > 0.0 && w.shading <= 1.0) {
                return Err(Error::invalid(
                    WHAT,
                    format!("window {i} ({}) shading outside (0, 1]", w.name),
                ));
            }
        }
        let c = &self.cabin;
        let positive = [
            ("density", c.density_kg_m3),
            ("volume", c.volume_m3),
            ("heat capacity", c.heat_capacity_j_per_kgk),
            ("internal air speed", c.internal_air_speed_m_s),
            ("evaporator mass flow", c.evaporator_mass_flow_kg_s),
            ("occupant correction", c.occupant_correction),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(WHAT, format!("cabin {name} must be > 0")));
            }
        }
        if !(0.0..=1.0).contains(&c.recirculation) {
            return Err(Error::invalid(
                WHAT,
                "recirculation coefficient outside [0, 1]",
            ));
        }
        let (lo, hi) = INTERNAL_AIR_SPEED_RANGE;
        if !(lo..=hi).contains(&c.internal_air_speed_m_s) {
            return Err(Error::invalid(
                WHAT,
                format!("internal air speed outside [{lo}, {hi}] m/s"),
            ));
        }
        if !(self.interior.surface_delta_k >= 0.0) || !(self.interior.c > 0.0) {
            return Err(Error::invalid(
                WHAT,
                "interior convection needs surface_delta_k >= 0 and c > 0",
            ));
        }
        Ok(())
    }

    pub fn heat_capacity(&self) -> f64 {
        heat_capacity(&self.cabin)
    }

    /// (exterior, interior) convective coefficients for a relative air speed.
    pub fn convection(&self, air_speed_m_s: f64) -> Result<(f64, f64)> {
        let alpha_w = external_convective_coeff(air_speed_m_s)?;
        let alpha_n =
            internal_convective_coeff_with(&self.interior, self.cabin.internal_air_speed_m_s)?;
        Ok((alpha_w, alpha_n))
    }

    pub fn loads(&self, env: &EnvironmentSample, cabin_c: f64) -> Result<ThermalLoads> {
        let (alpha_w, alpha_n) = self.convection(env.air_speed_m_s)?;
        Ok(ThermalLoads {
            conduction_w: conduction_load(
                &self.body,
                env.ambient_c,
                cabin_c,
                env.solar_wm2,
                alpha_w,
                alpha_n,
            ),
            radiation_w: radiation_load(&self.windows, env.solar_wm2, alpha_w, alpha_n),
            occupants_w: occupant_load(self.cabin.passengers, self.cabin.occupant_correction),
            ventilation_w: ventilation_load(&self.cabin, env.ambient_c, cabin_c),
        })
    }

    /// Affine form of the total load in the cabin temperature.
    pub fn load_line(&self, env: &EnvironmentSample) -> Result<LoadLine> {
        let (alpha_w, alpha_n) = self.convection(env.air_speed_m_s)?;
        let kf: f64 = self
            .body
            .iter()
            .map(|p| heat_transfer_coeff(p, alpha_w, alpha_n) * p.area_m2)
            .sum();
        let vent = self.cabin.evaporator_mass_flow_kg_s
            * (1.0 - self.cabin.recirculation)
            * self.cabin.heat_capacity_j_per_kgk;
        let at_zero = self.loads(env, 0.0)?.total();
        Ok(LoadLine {
            at_zero_w: at_zero,
            slope_w_per_k: kf + vent,
        })
    }
}
