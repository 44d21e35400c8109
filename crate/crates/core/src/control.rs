//! Controllers sharing one interface: the rule-based bang-bang baseline,
//! the full-information DP benchmark and the receding-horizon SMPC.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{solve_cabin, solve_cabin_reachable, Grid, Solution, StageCost};
use crate::error::{Error, Result};
use crate::markov::{Prediction, PredictionMode, TransitionMatrix};
use crate::model::CabinPlant;
use crate::plant::PlantLimits;
use crate::sim::Mission;
use crate::thermal::EnvironmentSample;

/// What a controller sees at one step. `mission` gives DP and SMPC access
/// to the future disturbances.
#[derive(Debug, Clone, Copy)]
pub struct ControllerInput<'a> {
    pub step: usize,
    pub time_s: f64,
    pub cabin_c: f64,
    pub q_prev_w: f64,
    pub speed_kmh: f64,
    pub env: EnvironmentSample,
    pub mission: &'a Mission,
}

pub trait Controller: Send {
    fn name(&self) -> &str;

    /// Requested cooling capacity; the simulator clamps it to the plant
    /// limits before applying it.
    fn command(&mut self, input: &ControllerInput) -> Result<f64>;

    /// Speed-prediction steps that fell back to holding the current state.
    fn fallback_events(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BangBangConfig {
    pub t_high_c: f64,
    pub t_low_c: f64,
    pub k_rule_w: f64,
    pub b_rule_w: f64,
    /// Hold maximum capacity after crossing `t_high_c` until the cabin is
    /// back down to `t_low_c`.
    #[serde(default)]
    pub hysteresis: bool,
}

impl Default for BangBangConfig {
    fn default() -> Self {
        BangBangConfig {
            t_high_c: 26.0,
            t_low_c: 20.0,
            k_rule_w: 1000.0,
            b_rule_w: 2000.0,
            hysteresis: false,
        }
    }
}

impl BangBangConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_low_c < self.t_high_c) {
            return Err(Error::invalid(
                "bang-bang",
                "low threshold must be below the high threshold",
            ));
        }
        if !(self.k_rule_w.is_finite() && self.b_rule_w.is_finite()) {
            return Err(Error::invalid(
                "bang-bang",
                "rule coefficients must be finite",
            ));
        }
        Ok(())
    }
}

/// Full capacity at or above the high threshold, minimum at or below the
/// low one, and a linear ramp in between.
pub fn bang_bang_step(cabin_c: f64, cfg: &BangBangConfig, limits: &PlantLimits) -> f64 {
    if cabin_c >= cfg.t_high_c {
        limits.q_cool_max_w
    } else if cabin_c <= cfg.t_low_c {
        limits.q_cool_min_w
    } else {
        cfg.k_rule_w * (cabin_c - cfg.t_low_c) / (cfg.t_high_c - cfg.t_low_c) + cfg.b_rule_w
    }
}

#[derive(Debug, Clone)]
pub struct BangBang {
    cfg: BangBangConfig,
    limits: PlantLimits,
    latched: bool,
}

impl BangBang {
    pub fn new(cfg: BangBangConfig, limits: PlantLimits) -> Result<Self> {
        cfg.validate()?;
        Ok(BangBang {
            cfg,
            limits,
            latched: false,
        })
    }
}

impl Controller for BangBang {
    fn name(&self) -> &str {
        "bangbang"
    }

    fn command(&mut self, input: &ControllerInput) -> Result<f64> {
        if self.cfg.hysteresis {
            if input.cabin_c >= self.cfg.t_high_c {
                self.latched = true;
            } else if input.cabin_c <= self.cfg.t_low_c {
                self.latched = false;
            }
            if self.latched {
                return Ok(self.limits.q_cool_max_w);
            }
        }
        Ok(bang_bang_step(input.cabin_c, &self.cfg, &self.limits))
    }
}

/// Always requests the same capacity.
#[derive(Debug, Clone, Copy)]
pub struct FixedCommand(pub f64);

impl Controller for FixedCommand {
    fn name(&self) -> &str {
        "fixed"
    }

    fn command(&mut self, _: &ControllerInput) -> Result<f64> {
        Ok(self.0)
    }
}

/// Open-loop optimal plan over the whole remaining mission.
pub fn dp_benchmark(
    mission: &Mission,
    plant: &CabinPlant,
    cost: &StageCost,
    grid: &Grid,
    x0: (f64, f64),
) -> Result<Solution> {
    solve_cabin(grid, plant, cost, &mission.environment, x0, None)
}

/// Plays back the DP plan computed at its first call.
pub struct DpBenchmark {
    plant: CabinPlant,
    cost: StageCost,
    grid: Grid,
    plan: Option<(usize, Vec<f64>)>,
}

impl DpBenchmark {
    pub fn new(plant: CabinPlant, cost: StageCost, grid: Grid) -> Self {
        DpBenchmark {
            plant,
            cost,
            grid,
            plan: None,
        }
    }
}

impl Controller for DpBenchmark {
    fn name(&self) -> &str {
        "dp"
    }

    fn command(&mut self, input: &ControllerInput) -> Result<f64> {
        if self.plan.is_none() {
            let rest = input.mission.slice_from(input.step);
            let sol = dp_benchmark(
                &rest,
                &self.plant,
                &self.cost,
                &self.grid,
                (input.cabin_c, input.q_prev_w),
            )?;
            self.plan = Some((input.step, sol.commands()));
        }
        let (start, plan) = self.plan.as_ref().expect("plan computed above");
        input
            .step
            .checked_sub(*start)
            .and_then(|i| plan.get(i))
            .copied()
            .ok_or_else(|| {
                Error::invalid(
                    "dp benchmark",
                    format!("step {} outside the planned mission", input.step),
                )
            })
    }
}

/// Source of future speeds for the SMPC horizon.
pub trait SpeedPredictor: Send {
    /// `horizon` speeds for steps `step + 1 ..= step + horizon`.
    fn predict(
        &mut self,
        step: usize,
        current_kmh: f64,
        horizon: usize,
        mission: &Mission,
    ) -> Result<Prediction>;
}

pub struct MarkovPredictor {
    matrix: Arc<TransitionMatrix>,
    mode: PredictionMode,
    rng: ChaCha8Rng,
}

impl MarkovPredictor {
    pub fn new(matrix: Arc<TransitionMatrix>, mode: PredictionMode, seed: u64) -> Self {
        MarkovPredictor {
            matrix,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SpeedPredictor for MarkovPredictor {
    fn predict(
        &mut self,
        _: usize,
        current_kmh: f64,
        horizon: usize,
        _: &Mission,
    ) -> Result<Prediction> {
        self.matrix
            .predict_with(current_kmh, horizon, self.mode, &mut self.rng)
    }
}

/// Reads the true future speeds from the mission, repeating the last one
/// past its end.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectPredictor;

impl SpeedPredictor for PerfectPredictor {
    fn predict(
        &mut self,
        step: usize,
        current_kmh: f64,
        horizon: usize,
        mission: &Mission,
    ) -> Result<Prediction> {
        let v = &mission.speed_kmh;
        let speeds_kmh = (1..=horizon)
            .map(|i| v.get(step + i).or(v.last()).copied().unwrap_or(current_kmh))
            .collect();
        Ok(Prediction {
            speeds_kmh,
            states: Vec::new(),
            fallback_steps: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmpcConfig {
    pub horizon: usize,
    #[serde(default)]
    pub mode: PredictionMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SmpcConfig {
    fn default() -> Self {
        SmpcConfig {
            horizon: 5,
            mode: PredictionMode::Argmax,
            seed: 0,
        }
    }
}

/// Receding-horizon controller: predict speeds, solve the horizon problem
/// by DP from the current state and apply the first command.
///
/// The first horizon stage uses the measured speed and stage `i` uses the
/// prediction for step `k + i`. Ambient temperature and solar load over the
/// horizon are read from the mission. The horizon shrinks near the end of
/// the mission.
pub struct Smpc {
    plant: CabinPlant,
    cost: StageCost,
    grid: Grid,
    horizon: usize,
    predictor: Box<dyn SpeedPredictor>,
    fallbacks: usize,
}

impl Smpc {
    pub fn new(
        plant: CabinPlant,
        cost: StageCost,
        grid: Grid,
        horizon: usize,
        predictor: Box<dyn SpeedPredictor>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("smpc", "horizon must be at least 1"));
        }
        grid.check_limits(&plant.limits)?;
        cost.validate()?;
        Ok(Smpc {
            plant,
            cost,
            grid,
            horizon,
            predictor,
            fallbacks: 0,
        })
    }

    /// Horizon disturbances for the step described by `input`.
    pub fn horizon_disturbances(
        &mut self,
        input: &ControllerInput,
    ) -> Result<Vec<EnvironmentSample>> {
        let mission = input.mission;
        let h = self
            .horizon
            .min(mission.len().saturating_sub(input.step))
            .max(1);
        let prediction = self
            .predictor
            .predict(input.step, input.speed_kmh, h, mission)?;
        self.fallbacks += prediction.fallback_steps;
        let mut out = Vec::with_capacity(h);
        for i in 0..h {
            let mut env = mission
                .environment
                .get(input.step + i)
                .copied()
                .unwrap_or(input.env);
            let v = if i == 0 {
                input.speed_kmh
            } else {
                prediction.speeds_kmh[i - 1]
            };
            env.air_speed_m_s = v / 3.6;
            out.push(env);
        }
        Ok(out)
    }
}

impl Controller for Smpc {
    fn name(&self) -> &str {
        "smpc"
    }

    fn command(&mut self, input: &ControllerInput) -> Result<f64> {
        let dist = self.horizon_disturbances(input)?;
        let sol = solve_cabin_reachable(
            &self.grid,
            &self.plant,
            &self.cost,
            &dist,
            (input.cabin_c, input.q_prev_w),
        )?;
        Ok(sol.trajectory[0].command_w)
    }

    fn fallback_events(&self) -> usize {
        self.fallbacks
    }
}
