//! AC plant: coefficient-of-performance map, electric power and the
//! physical limits on the cooling-capacity command.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{self, is_strictly_increasing, lerp};

static COP_CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Tolerance used when checking a command against the rate band, W.
pub const RATE_TOLERANCE_W: f64 = 1e-6;

/// COP tabulated over (cabin temperature, ambient temperature) and scaled by
/// a partial-load-ratio factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopMap {
    pub cabin_axis_c: Vec<f64>,
    pub ambient_axis_c: Vec<f64>,
    /// `values[i][j]` is the base COP at `cabin_axis_c[i]`, `ambient_axis_c[j]`.
    pub values: Vec<Vec<f64>>,
    pub plr_axis: Vec<f64>,
    pub plr_factor: Vec<f64>,
}

impl CopMap {
    pub fn validate(&self) -> Result<()> {
        const WHAT: &str = "COP map";
        if !is_strictly_increasing(&self.cabin_axis_c)
            || !is_strictly_increasing(&self.ambient_axis_c)
        {
            return Err(Error::invalid(
                WHAT,
                "temperature axes must be finite and strictly increasing",
            ));
        }
        if self.values.len() != self.cabin_axis_c.len()
            || self
                .values
                .iter()
                .any(|row| row.len() != self.ambient_axis_c.len())
        {
            return Err(Error::invalid(
                WHAT,
                "value matrix shape does not match the axes",
            ));
        }
        if self
            .values
            .iter()
            .flatten()
            .any(|&v| !(v > 0.0) || !v.is_finite())
        {
            return Err(Error::invalid(WHAT, "all COP values must be positive"));
        }
        for (i, row) in self.values.iter().enumerate() {
            if row.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::invalid(
                    WHAT,
                    format!("COP must not increase with ambient temperature (cabin row {i})"),
                ));
            }
        }
        for j in 0..self.ambient_axis_c.len() {
            if self.values.windows(2).any(|w| w[1][j] < w[0][j]) {
                return Err(Error::invalid(
                    WHAT,
                    format!("COP must not decrease with cabin temperature (ambient column {j})"),
                ));
            }
        }
        if !is_strictly_increasing(&self.plr_axis) || self.plr_axis.len() != self.plr_factor.len() {
            return Err(Error::invalid(
                WHAT,
                "PLR axis must be strictly increasing and match the factor table",
            ));
        }
        if self.plr_axis[0] > 0.0 || *self.plr_axis.last().unwrap() < 1.0 {
            return Err(Error::invalid(WHAT, "PLR axis must cover [0, 1]"));
        }
        if self.plr_factor.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::invalid(WHAT, "PLR factors must be positive"));
        }
        // the factor is nearly flat between 40% and 80% load
        let mid: Vec<f64> = (0..=40)
            .map(|k| 0.4 + 0.01 * k as f64)
            .map(|p| self.plr_multiplier(p))
            .collect();
        let hi = mid.iter().cloned().fold(f64::MIN, f64::max);
        let lo = mid.iter().cloned().fold(f64::MAX, f64::min);
        if (hi - lo) / hi > 0.05 + 1e-12 {
            return Err(Error::invalid(
                WHAT,
                "PLR factor varies by more than 5% over [0.4, 0.8]",
            ));
        }
        Ok(())
    }

    /// Bilinear interpolation of the base grid. Queries outside the grid are
    /// clamped to its edge.
    pub fn base(&self, cabin_c: f64, ambient_c: f64) -> f64 {
        let (i, wi, ci) = interp::locate(&self.cabin_axis_c, cabin_c);
        let (j, wj, cj) = interp::locate(&self.ambient_axis_c, ambient_c);
        if (ci || cj) && !COP_CLAMP_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!(
                "COP query ({cabin_c:.2} °C cabin, {ambient_c:.2} °C ambient) outside the map; clamping to the grid edge"
            );
        }
        let ni = self.cabin_axis_c.len();
        let nj = self.ambient_axis_c.len();
        let (i1, j1) = ((i + 1).min(ni - 1), (j + 1).min(nj - 1));
        let v = &self.values;
        let low = lerp(v[i][j], v[i][j1], wj);
        let high = lerp(v[i1][j], v[i1][j1], wj);
        lerp(low, high, wi)
    }

    pub fn plr_multiplier(&self, plr: f64) -> f64 {
        interp::linear(&self.plr_axis, &self.plr_factor, plr)
    }

    pub fn cop(&self, cabin_c: f64, ambient_c: f64, plr: f64) -> f64 {
        self.base(cabin_c, ambient_c) * self.plr_multiplier(plr)
    }
}

/// Free-function form of [`CopMap::cop`].
pub fn cop(map: &CopMap, cabin_c: f64, ambient_c: f64, plr: f64) -> f64 {
    map.cop(cabin_c, ambient_c, plr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantLimits {
    pub q_cool_min_w: f64,
    pub q_cool_max_w: f64,
    /// Maximum |dQ_cool/dt|, W/s.
    pub rate_limit_w_per_s: f64,
    pub compressor_speed_min_rpm: f64,
    pub compressor_speed_max_rpm: f64,
    pub nominal_capacity_w: f64,
}

impl Default for PlantLimits {
    fn default() -> Self {
        Self {
            q_cool_min_w: 0.0,
            q_cool_max_w: 6800.0,
            rate_limit_w_per_s: 500.0,
            compressor_speed_min_rpm: 1500.0,
            compressor_speed_max_rpm: 6500.0,
            nominal_capacity_w: 6800.0,
        }
    }
}

impl PlantLimits {
    pub fn validate(&self) -> Result<()> {
        const WHAT: &str = "plant limits";
        if !(0.0 <= self.q_cool_min_w
            && self.q_cool_min_w < self.q_cool_max_w
            && self.q_cool_max_w <= self.nominal_capacity_w)
        {
            return Err(Error::invalid(
                WHAT,
                "need 0 <= q_cool_min < q_cool_max <= nominal capacity",
            ));
        }
        if !(self.rate_limit_w_per_s > 0.0) {
            return Err(Error::invalid(WHAT, "rate limit must be > 0"));
        }
        if !(self.compressor_speed_min_rpm < self.compressor_speed_max_rpm) {
            return Err(Error::invalid(WHAT, "compressor speed range is empty"));
        }
        Ok(())
    }

    /// Largest change of the command allowed within one step, W.
    pub fn max_step_change(&self, dt_s: f64) -> f64 {
        self.rate_limit_w_per_s * dt_s
    }

    /// Whether `command_w` is reachable from `previous_w` within one step.
    pub fn is_feasible(&self, previous_w: f64, command_w: f64, dt_s: f64) -> bool {
        command_w >= self.q_cool_min_w - RATE_TOLERANCE_W
            && command_w <= self.q_cool_max_w + RATE_TOLERANCE_W
            && (command_w - previous_w).abs() <= self.max_step_change(dt_s) + RATE_TOLERANCE_W
    }

    pub fn check_feasible(&self, previous_w: f64, command_w: f64, dt_s: f64) -> Result<()> {
        if self.is_feasible(previous_w, command_w, dt_s) {
            return Ok(());
        }
        let reason = if command_w < self.q_cool_min_w || command_w > self.q_cool_max_w {
            format!("outside [{}, {}] W", self.q_cool_min_w, self.q_cool_max_w)
        } else {
            format!(
                "exceeds the rate limit of {} W/s over {dt_s} s",
                self.rate_limit_w_per_s
            )
        };
        Err(Error::Infeasible {
            previous_w,
            command_w,
            reason,
        })
    }
}

pub fn partial_load_ratio(q_cool_w: f64, limits: &PlantLimits) -> Result<f64> {
    if !(0.0..=limits.nominal_capacity_w).contains(&q_cool_w) {
        return Err(Error::domain(format!(
            "cooling capacity {q_cool_w} W outside [0, {}] W",
            limits.nominal_capacity_w
        )));
    }
    Ok(q_cool_w / limits.nominal_capacity_w)
}

/// Electric power drawn for a cooling capacity, W.
pub fn electric_power(q_cool_w: f64, cop: f64) -> Result<f64> {
    if !(cop > 0.0) {
        return Err(Error::domain(format!("COP must be positive, got {cop}")));
    }
    Ok(q_cool_w / cop)
}

/// Compressor speed from a linear map of the partial load ratio, r/min.
pub fn compressor_speed(q_cool_w: f64, limits: &PlantLimits) -> f64 {
    let plr = (q_cool_w / limits.nominal_capacity_w).clamp(0.0, 1.0);
    let span = limits.compressor_speed_max_rpm - limits.compressor_speed_min_rpm;
    (limits.compressor_speed_min_rpm + plr * span).clamp(
        limits.compressor_speed_min_rpm,
        limits.compressor_speed_max_rpm,
    )
}

/// Clip a requested capacity to the rate band around the previous command
/// and to the plant bounds.
pub fn clamp_command(previous_w: f64, requested_w: f64, dt_s: f64, limits: &PlantLimits) -> f64 {
    let step = limits.max_step_change(dt_s);
    let lo = (previous_w - step).max(limits.q_cool_min_w);
    let hi = (previous_w + step).min(limits.q_cool_max_w);
    if lo > hi {
        // previous command outside the bounds; move toward the nearest bound
        return if previous_w > limits.q_cool_max_w {
            lo.min(limits.q_cool_max_w).max(hi)
        } else {
            hi
        };
    }
    requested_w.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::config::SimConfig;

    fn limits() -> PlantLimits {
        PlantLimits::default()
    }

    fn small_map() -> CopMap {
        CopMap {
            cabin_axis_c: vec![20.0, 30.0],
            ambient_axis_c: vec![25.0, 35.0],
            values: vec![vec![3.0, 2.0], vec![3.4, 2.6]],
            plr_axis: vec![0.0, 1.0],
            plr_factor: vec![1.0, 1.0],
        }
    }

    #[test]
    fn plr_examples() {
        let l = limits();
        assert_eq!(partial_load_ratio(3400.0, &l).unwrap(), 0.5);
        assert_eq!(partial_load_ratio(0.0, &l).unwrap(), 0.0);
        assert_eq!(partial_load_ratio(6800.0, &l).unwrap(), 1.0);
        assert!(partial_load_ratio(-1.0, &l).is_err());
        assert!(partial_load_ratio(7000.0, &l).is_err());
    }

    #[test]
    fn power_examples() {
        assert_eq!(electric_power(3400.0, 2.0).unwrap(), 1700.0);
        assert_eq!(electric_power(0.0, 2.5).unwrap(), 0.0);
        assert_abs_diff_eq!(
            electric_power(6800.0, 2.72).unwrap(),
            2500.0,
            epsilon = 1e-9
        );
        assert!(electric_power(100.0, 0.0).is_err());
        assert!(electric_power(100.0, -1.0).is_err());
    }

    #[test]
    fn compressor_speed_examples() {
        let l = limits();
        assert_eq!(compressor_speed(0.0, &l), 1500.0);
        assert_eq!(compressor_speed(6800.0, &l), 6500.0);
        assert_eq!(compressor_speed(3400.0, &l), 4000.0);
    }

    #[test]
    fn clamp_examples() {
        let l = limits();
        assert_eq!(clamp_command(2000.0, 5000.0, 1.0, &l), 2500.0);
        assert_eq!(clamp_command(2000.0, 2100.0, 1.0, &l), 2100.0);
        assert_eq!(clamp_command(100.0, -1000.0, 1.0, &l), 0.0);
    }

    #[test]
    fn cop_interpolation_identity_and_midpoint() {
        let m = small_map();
        m.validate().unwrap();
        assert_eq!(m.cop(20.0, 25.0, 0.5), 3.0);
        assert_eq!(m.cop(30.0, 35.0, 0.5), 2.6);
        assert_abs_diff_eq!(m.cop(20.0, 30.0, 0.5), 2.5, epsilon = 1e-12);
        // clamped outside the grid
        assert_eq!(m.cop(10.0, 10.0, 0.5), 3.0);
    }

    #[test]
    fn shipped_map_monotone_on_every_node() {
        let map = SimConfig::default_sedan().cop_map;
        map.validate().unwrap();
        for &ta in &map.ambient_axis_c {
            for w in map.cabin_axis_c.windows(2) {
                assert!(map.base(w[1], ta) >= map.base(w[0], ta));
            }
        }
        for plr in [0.2, 0.5, 0.9] {
            assert!(map.cop(26.0, 30.0, plr) >= map.cop(22.0, 30.0, plr));
        }
        let all: Vec<f64> = map.values.iter().flatten().copied().collect();
        assert!(all.iter().all(|&v| (1.0..=4.0).contains(&v)));
    }

    #[test]
    fn validation_rejects_increasing_with_ambient() {
        let mut m = small_map();
        m.values[0][1] = 3.5;
        assert!(m.validate().is_err());
        let mut m = small_map();
        m.plr_axis = vec![0.0, 0.5, 1.0];
        m.plr_factor = vec![1.0, 0.8, 1.0];
        assert!(m.validate().is_err());
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent(prev in 0.0..6800.0f64, req in -2000.0..9000.0f64, dt in 0.1..5.0f64) {
            let l = limits();
            let once = clamp_command(prev, req, dt, &l);
            let twice = clamp_command(prev, once, dt, &l);
            prop_assert_eq!(once, twice);
            prop_assert!(l.is_feasible(prev, once, dt));
        }

        #[test]
        fn clamped_sequences_respect_rate(reqs in proptest::collection::vec(-1000.0..8000.0f64, 1..200)) {
            let l = limits();
            let mut prev = 0.0;
            for r in reqs {
                let q = clamp_command(prev, r, 1.0, &l);
                prop_assert!((q - prev).abs() <= 500.0 + 1e-9);
                prop_assert!((0.0..=6800.0).contains(&q));
                prev = q;
            }
        }

        #[test]
        fn power_linear_in_capacity(q in 0.0..6800.0f64, c in 0.5..5.0f64, s in 0.0..1.0f64) {
            let a = electric_power(q, c).unwrap();
            let b = electric_power(q * s, c).unwrap();
            prop_assert!((b - a * s).abs() <= 1e-9 * (1.0 + a));
        }

        #[test]
        fn cop_continuous_across_cells(tin in 15.0..45.0f64, tout in 20.0..45.0f64) {
            let map = SimConfig::default_sedan().cop_map;
            let h = 1e-7;
            let a = map.cop(tin, tout, 0.5);
            let b = map.cop(tin + h, tout + h, 0.5);
            prop_assert!((a - b).abs() < 1e-4);
            prop_assert!(a > 0.0);
        }
    }
}
