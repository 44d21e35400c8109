//! Finite-horizon dynamic programming on a (cabin temperature, previous
//! cooling capacity) grid.
//!
//! Backward induction stores a value table per stage; successor
//! temperatures that fall between grid nodes are priced by linear
//! interpolation of the next-stage values, and successors outside the
//! temperature axis are infeasible. The forward pass re-optimizes at the
//! actual (possibly off-grid) state so the returned trajectory is what the
//! model really produces.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{is_strictly_increasing, locate};
use crate::model::{CabinPlant, StepModel};
use crate::plant::{PlantLimits, RATE_TOLERANCE_W};
use crate::thermal::EnvironmentSample;

/// Slack allowed when deciding whether a successor lies on the axis.
const AXIS_TOLERANCE: f64 = 1e-9;
const NO_COMMAND: u16 = u16::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    temp_axis_c: Vec<f64>,
    q_axis_w: Vec<f64>,
    dt_s: f64,
}

impl Grid {
    pub fn new(temp_axis_c: Vec<f64>, q_axis_w: Vec<f64>, dt_s: f64) -> Result<Self> {
        if temp_axis_c.is_empty() || !is_strictly_increasing(&temp_axis_c) {
            return Err(Error::invalid(
                "grid",
                "temperature axis must be non-empty and strictly increasing",
            ));
        }
        if q_axis_w.is_empty() || !is_strictly_increasing(&q_axis_w) {
            return Err(Error::invalid(
                "grid",
                "capacity axis must be non-empty and strictly increasing",
            ));
        }
        if q_axis_w.len() >= NO_COMMAND as usize {
            return Err(Error::invalid("grid", "capacity axis too long"));
        }
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(Error::invalid(
                "grid",
                format!("time step {dt_s} must be positive"),
            ));
        }
        Ok(Grid {
            temp_axis_c,
            q_axis_w,
            dt_s,
        })
    }

    /// Evenly spaced axes including both end points.
    pub fn uniform(
        (t_min, t_max, t_step): (f64, f64, f64),
        (q_min, q_max, q_step): (f64, f64, f64),
        dt_s: f64,
    ) -> Result<Self> {
        Grid::new(
            spaced(t_min, t_max, t_step)?,
            spaced(q_min, q_max, q_step)?,
            dt_s,
        )
    }

    /// Coarse temperature spacing with a finer band spliced in.
    pub fn banded(
        coarse: (f64, f64, f64),
        fine: (f64, f64, f64),
        q: (f64, f64, f64),
        dt_s: f64,
    ) -> Result<Self> {
        let (lo, hi, _) = fine;
        if !(lo >= coarse.0 && hi <= coarse.1 && lo < hi) {
            return Err(Error::invalid(
                "grid",
                "fine band must lie inside the temperature range",
            ));
        }
        let mut axis: Vec<f64> = spaced(coarse.0, coarse.1, coarse.2)?
            .into_iter()
            .filter(|&t| t < lo || t > hi)
            .collect();
        axis.extend(spaced(fine.0, fine.1, fine.2)?);
        axis.sort_by(f64::total_cmp);
        Grid::new(axis, spaced(q.0, q.1, q.2)?, dt_s)
    }

    pub fn temp_axis(&self) -> &[f64] {
        &self.temp_axis_c
    }

    pub fn q_axis(&self) -> &[f64] {
        &self.q_axis_w
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn check_limits(&self, limits: &PlantLimits) -> Result<()> {
        let (lo, hi) = (self.q_axis_w[0], *self.q_axis_w.last().unwrap());
        if lo < limits.q_cool_min_w || hi > limits.q_cool_max_w {
            return Err(Error::invalid(
                "grid",
                format!(
                    "capacity axis [{lo}, {hi}] W exceeds plant bounds [{}, {}] W",
                    limits.q_cool_min_w, limits.q_cool_max_w
                ),
            ));
        }
        Ok(())
    }

    /// Nearest capacity node.
    pub fn nearest_q(&self, q_w: f64) -> usize {
        let (i, w, _) = locate(&self.q_axis_w, q_w);
        if self.q_axis_w.len() > 1 && w > 0.5 {
            i + 1
        } else {
            i
        }
    }
}

fn spaced(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(
            "grid",
            format!("bad axis [{lo}, {hi}] step {step}"),
        ));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    /// Weight per joule of electric energy.
    pub energy_weight: f64,
    /// Weight per squared kelvin second of deviation from the target.
    pub comfort_weight: f64,
    pub target_c: f64,
}

impl StageCost {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_weight >= 0.0 && self.comfort_weight >= 0.0) {
            return Err(Error::invalid("stage cost", "weights must be non-negative"));
        }
        if self.energy_weight == 0.0 && self.comfort_weight == 0.0 {
            return Err(Error::invalid(
                "stage cost",
                "weights must not both be zero",
            ));
        }
        if !self.target_c.is_finite() {
            return Err(Error::invalid("stage cost", "target must be finite"));
        }
        Ok(())
    }
}

#[inline]
pub fn stage_cost(p_ac_w: f64, t_in_c: f64, cost: &StageCost, dt_s: f64) -> f64 {
    let dev = t_in_c - cost.target_c;
    (cost.energy_weight * p_ac_w + cost.comfort_weight * dev * dev) * dt_s
}

/// A finite-horizon problem the solver can price on the grid.
pub trait DecisionModel: Sync {
    fn stages(&self) -> usize;

    /// Largest capacity change allowed between consecutive stages.
    fn max_step_change_w(&self) -> f64;

    /// Successor temperature and stage cost of holding `q_w` from `t_c`
    /// during stage `k`.
    fn step(&self, k: usize, t_c: f64, q_w: f64) -> (f64, f64);

    /// Temperature interval containing every state reachable at each stage
    /// `0..=stages` from `x0` with commands in `[q_min, q_max]`, or `None`
    /// when the model cannot bound it.
    fn reachable(&self, _x0: (f64, f64), _q_min: f64, _q_max: f64) -> Option<Vec<(f64, f64)>> {
        None
    }
}

/// Cabin thermal model with a known disturbance per stage.
///
/// Energy is priced at the start-of-step temperature; comfort is priced on
/// the temperature the step ends at.
pub struct CabinModel<'a> {
    plant: &'a CabinPlant,
    cost: StageCost,
    steps: Vec<StepModel>,
    dt_s: f64,
}

impl<'a> CabinModel<'a> {
    pub fn new(
        plant: &'a CabinPlant,
        cost: StageCost,
        disturbances: &[EnvironmentSample],
        dt_s: f64,
    ) -> Result<Self> {
        cost.validate()?;
        if disturbances.windows(2).any(|w| w[1].time_s < w[0].time_s) {
            return Err(Error::invalid(
                "disturbances",
                "time stamps must be monotone",
            ));
        }
        let steps = disturbances
            .iter()
            .map(|d| plant.step_model(d))
            .collect::<Result<Vec<_>>>()?;
        Ok(CabinModel {
            plant,
            cost,
            steps,
            dt_s,
        })
    }
}

impl DecisionModel for CabinModel<'_> {
    fn stages(&self) -> usize {
        self.steps.len()
    }

    fn max_step_change_w(&self) -> f64 {
        self.plant.limits.max_step_change(self.dt_s)
    }

    #[inline]
    fn step(&self, k: usize, t_c: f64, q_w: f64) -> (f64, f64) {
        let m = &self.steps[k];
        let next = m.advance(t_c, q_w, self.dt_s);
        let p = self.plant.power(t_c, m.ambient_c, q_w).power_w;
        (next, stage_cost(p, next, &self.cost, self.dt_s))
    }

    /// The successor is increasing in temperature and decreasing in
    /// capacity, so the extremes come from the extreme command sequences.
    fn reachable(&self, (t0, q0): (f64, f64), q_min: f64, q_max: f64) -> Option<Vec<(f64, f64)>> {
        let rate = self.max_step_change_w();
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let (mut lo, mut hi) = (t0, t0);
        out.push((lo, hi));
        for k in 0..self.steps.len() {
            let reach = rate * (k + 1) as f64;
            let q_hi = (q0 + reach).min(q_max);
            let q_lo = (q0 - reach).max(q_min);
            lo = self.steps[k].advance(lo, q_hi, self.dt_s);
            hi = self.steps[k].advance(hi, q_lo, self.dt_s);
            out.push((lo, hi));
        }
        Some(out)
    }
}

/// One plant step from `(t_in, q_prev)` under `q_cmd`; the command must
/// respect the bounds and rate limit.
pub fn transition(
    t_in_c: f64,
    q_prev_w: f64,
    q_cmd_w: f64,
    d: &EnvironmentSample,
    plant: &CabinPlant,
    dt_s: f64,
) -> Result<(f64, f64)> {
    plant.limits.check_feasible(q_prev_w, q_cmd_w, dt_s)?;
    let m = plant.step_model(d)?;
    Ok((m.advance(t_in_c, q_cmd_w, dt_s), q_cmd_w))
}

/// Inclusive temperature band the final state must land in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalBand {
    pub low_c: f64,
    pub high_c: f64,
}

/// Optimal command for every stage, temperature node and previous
/// capacity node.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    stages: usize,
    temp_axis_c: Vec<f64>,
    q_axis_w: Vec<f64>,
    commands: Vec<u16>,
}

impl Policy {
    pub fn stages(&self) -> usize {
        self.stages
    }

    /// `None` where no feasible command reaches a finite cost.
    pub fn command(&self, stage: usize, temp_idx: usize, prev_q_idx: usize) -> Option<f64> {
        let nt = self.temp_axis_c.len();
        let nq = self.q_axis_w.len();
        let c = self.commands[(stage * nt + temp_idx) * nq + prev_q_idx];
        (c != NO_COMMAND).then(|| self.q_axis_w[c as usize])
    }

    /// Tab-separated dump: `stage  temp_c  prev_q_w  command_w`, one line
    /// per state with a feasible command.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "stage\ttemp_c\tprev_q_w\tcommand_w")?;
        for k in 0..self.stages {
            for (i, t) in self.temp_axis_c.iter().enumerate() {
                for (m, q) in self.q_axis_w.iter().enumerate() {
                    if let Some(c) = self.command(k, i, m) {
                        writeln!(out, "{k}\t{t}\t{q}\t{c}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanStep {
    pub cabin_c: f64,
    pub command_w: f64,
    pub stage_cost: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub policy: Policy,
    pub trajectory: Vec<PlanStep>,
    pub final_cabin_c: f64,
    pub total_cost: f64,
    values: Vec<f64>,
    nt: usize,
    nq: usize,
}

impl Solution {
    pub fn commands(&self) -> Vec<f64> {
        self.trajectory.iter().map(|s| s.command_w).collect()
    }

    /// Cost-to-go from grid node `(temp_idx, prev_q_idx)` at `stage`.
    pub fn value(&self, stage: usize, temp_idx: usize, prev_q_idx: usize) -> f64 {
        self.values[(stage * self.nt + temp_idx) * self.nq + prev_q_idx]
    }
}

/// Value of `values` (one stage, layout `[temp][q]`) at temperature `t`
/// for capacity node `j`.
#[inline]
fn value_at(axis: &[f64], values: &[f64], nq: usize, j: usize, t: f64) -> f64 {
    let n = axis.len();
    if !(t >= axis[0] - AXIS_TOLERANCE && t <= axis[n - 1] + AXIS_TOLERANCE) {
        return f64::INFINITY;
    }
    let (i, w, _) = locate(axis, t);
    if n == 1 || w == 0.0 {
        return values[i * nq + j];
    }
    if w == 1.0 {
        return values[(i + 1) * nq + j];
    }
    let a = values[i * nq + j];
    let b = values[(i + 1) * nq + j];
    if a.is_infinite() || b.is_infinite() {
        return f64::INFINITY;
    }
    a + (b - a) * w
}

/// Contiguous range of capacity nodes reachable from `q_prev`.
fn band(q_axis: &[f64], q_prev: f64, max_step: f64) -> (usize, usize) {
    let lo = q_axis.partition_point(|&q| q < q_prev - max_step - RATE_TOLERANCE_W);
    let hi = q_axis.partition_point(|&q| q <= q_prev + max_step + RATE_TOLERANCE_W);
    (lo, hi)
}

/// Backward induction then a forward pass from `x0 = (cabin_c, q_prev_w)`.
pub fn solve<M: DecisionModel>(
    grid: &Grid,
    model: &M,
    x0: (f64, f64),
    terminal: Option<TerminalBand>,
) -> Result<Solution> {
    solve_inner(grid, model, x0, terminal, false)
}

/// Like [`solve`], but only temperature nodes that can matter from `x0`
/// are evaluated; the policy and values elsewhere are left undefined
/// (`None` / infinite). Much cheaper for short horizons.
pub fn solve_reachable<M: DecisionModel>(
    grid: &Grid,
    model: &M,
    x0: (f64, f64),
    terminal: Option<TerminalBand>,
) -> Result<Solution> {
    solve_inner(grid, model, x0, terminal, true)
}

/// Node index range `[lo, hi)` covering `[a, b]` plus one spare node on
/// each side.
fn node_window(axis: &[f64], (a, b): (f64, f64)) -> (usize, usize) {
    let lo = axis.partition_point(|&t| t <= a).saturating_sub(2);
    let hi = (axis.partition_point(|&t| t < b) + 2).min(axis.len());
    (lo, hi)
}

fn solve_inner<M: DecisionModel>(
    grid: &Grid,
    model: &M,
    x0: (f64, f64),
    terminal: Option<TerminalBand>,
    prune: bool,
) -> Result<Solution> {
    let axis = grid.temp_axis();
    let q_axis = grid.q_axis();
    let (nt, nq, n) = (axis.len(), q_axis.len(), model.stages());
    let (t0, q0) = x0;
    if !(t0 >= axis[0] && t0 <= axis[nt - 1]) {
        return Err(Error::invalid(
            "initial state",
            format!("{t0} °C outside the grid [{}, {}]", axis[0], axis[nt - 1]),
        ));
    }
    if !(q0 >= q_axis[0] - RATE_TOLERANCE_W && q0 <= q_axis[nq - 1] + RATE_TOLERANCE_W) {
        return Err(Error::invalid(
            "initial state",
            format!("{q0} W outside the capacity axis"),
        ));
    }
    let max_step = model.max_step_change_w();
    let bands: Vec<(usize, usize)> = q_axis.iter().map(|&q| band(q_axis, q, max_step)).collect();

    let layer = nt * nq;
    let mut values = vec![0.0; (n + 1) * layer];
    if let Some(b) = terminal {
        for (i, &t) in axis.iter().enumerate() {
            if t < b.low_c || t > b.high_c {
                values[n * layer + i * nq..n * layer + (i + 1) * nq].fill(f64::INFINITY);
            }
        }
    }
    let mut commands = vec![NO_COMMAND; n * layer];
    let windows: Vec<(usize, usize)> = match prune
        .then(|| model.reachable(x0, q_axis[0], q_axis[nq - 1]))
        .flatten()
    {
        Some(bounds) => bounds.iter().map(|&b| node_window(axis, b)).collect(),
        None => vec![(0, nt); n + 1],
    };

    for k in (0..n).rev() {
        let (w_lo, w_hi) = windows[k];
        let (head, tail) = values.split_at_mut((k + 1) * layer);
        let next = &tail[..layer];
        let current = &mut head[k * layer..];
        current
            .par_chunks_mut(nq)
            .zip(commands[k * layer..(k + 1) * layer].par_chunks_mut(nq))
            .enumerate()
            .for_each(|(i, (vrow, crow))| {
                if i < w_lo || i >= w_hi {
                    vrow.fill(f64::INFINITY);
                    return;
                }
                let t = axis[i];
                let w: Vec<f64> = q_axis
                    .iter()
                    .enumerate()
                    .map(|(j, &q)| {
                        let (t_next, c) = model.step(k, t, q);
                        c + value_at(axis, next, nq, j, t_next)
                    })
                    .collect();
                for m in 0..nq {
                    let (lo, hi) = bands[m];
                    let mut best = f64::INFINITY;
                    let mut arg = NO_COMMAND;
                    for (j, &v) in w.iter().enumerate().take(hi).skip(lo) {
                        if v < best {
                            best = v;
                            arg = j as u16;
                        }
                    }
                    vrow[m] = best;
                    crow[m] = arg;
                }
            });
    }

    let mut trajectory = Vec::with_capacity(n);
    let (mut t, mut q_prev) = (t0, q0);
    let mut total = 0.0;
    for k in 0..n {
        let next = &values[(k + 1) * layer..(k + 2) * layer];
        let (lo, hi) = band(q_axis, q_prev, max_step);
        let mut best = f64::INFINITY;
        let mut chosen = None;
        for (j, &q) in q_axis.iter().enumerate().take(hi).skip(lo) {
            let (t_next, c) = model.step(k, t, q);
            let v = c + value_at(axis, next, nq, j, t_next);
            if v < best {
                best = v;
                chosen = Some((q, t_next, c));
            }
        }
        let Some((q, t_next, c)) = chosen else {
            return Err(Error::Infeasible {
                previous_w: q_prev,
                command_w: f64::NAN,
                reason: format!("no command with finite cost from {t:.4} °C at stage {k}"),
            });
        };
        trajectory.push(PlanStep {
            cabin_c: t,
            command_w: q,
            stage_cost: c,
        });
        total += c;
        t = t_next;
        q_prev = q;
    }

    Ok(Solution {
        policy: Policy {
            stages: n,
            temp_axis_c: axis.to_vec(),
            q_axis_w: q_axis.to_vec(),
            commands,
        },
        trajectory,
        final_cabin_c: t,
        total_cost: total,
        values,
        nt,
        nq,
    })
}

/// [`solve`] for the cabin model over `disturbances`.
pub fn solve_cabin(
    grid: &Grid,
    plant: &CabinPlant,
    cost: &StageCost,
    disturbances: &[EnvironmentSample],
    x0: (f64, f64),
    terminal: Option<TerminalBand>,
) -> Result<Solution> {
    grid.check_limits(&plant.limits)?;
    let model = CabinModel::new(plant, *cost, disturbances, grid.dt_s())?;
    solve(grid, &model, x0, terminal)
}

/// [`solve_reachable`] for the cabin model over `disturbances`.
pub fn solve_cabin_reachable(
    grid: &Grid,
    plant: &CabinPlant,
    cost: &StageCost,
    disturbances: &[EnvironmentSample],
    x0: (f64, f64),
) -> Result<Solution> {
    grid.check_limits(&plant.limits)?;
    let model = CabinModel::new(plant, *cost, disturbances, grid.dt_s())?;
    solve_reachable(grid, &model, x0, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use proptest::prelude::*;

    /// Integer-lattice model: successors are exact grid nodes.
    #[derive(Debug, Clone)]
    struct Lattice {
        nt: usize,
        q_axis: Vec<f64>,
        max_step: f64,
        shift: Vec<i64>,
        cost: Vec<f64>,
        stages: usize,
    }

    impl Lattice {
        fn idx(&self, k: usize, i: usize, j: usize) -> usize {
            (k * self.nt + i) * self.q_axis.len() + j
        }
    }

    impl DecisionModel for Lattice {
        fn stages(&self) -> usize {
            self.stages
        }
        fn max_step_change_w(&self) -> f64 {
            self.max_step
        }
        fn step(&self, k: usize, t: f64, q: f64) -> (f64, f64) {
            let i = t.round() as usize;
            let j = self.q_axis.iter().position(|&x| x == q).unwrap();
            let x = self.idx(k, i, j);
            (t + self.shift[x] as f64, self.cost[x])
        }
    }

    fn lattice_strategy() -> impl Strategy<Value = (Lattice, usize, usize)> {
        (2usize..=5, 2usize..=4, 1usize..=5, 1usize..=3).prop_flat_map(|(nt, nq, stages, step)| {
            let len = nt * nq * stages;
            (
                proptest::collection::vec(-2i64..=2, len),
                proptest::collection::vec(0.0f64..100.0, len),
                0..nt,
                0..nq,
            )
                .prop_map(move |(shift, cost, i0, j0)| {
                    (
                        Lattice {
                            nt,
                            q_axis: (0..nq).map(|j| j as f64).collect(),
                            max_step: step as f64,
                            shift,
                            cost,
                            stages,
                        },
                        i0,
                        j0,
                    )
                })
        })
    }

    fn enumerate(m: &Lattice, t0: f64, q0: f64) -> f64 {
        fn rec(m: &Lattice, k: usize, t: f64, q: f64, acc: f64, best: &mut f64) {
            if k == m.stages {
                *best = best.min(acc);
                return;
            }
            for &c in &m.q_axis {
                if (c - q).abs() > m.max_step {
                    continue;
                }
                let (tn, cost) = m.step(k, t, c);
                if tn < 0.0 || tn > (m.nt - 1) as f64 {
                    continue;
                }
                rec(m, k + 1, tn, c, acc + cost, best);
            }
        }
        let mut best = f64::INFINITY;
        rec(m, 0, t0, q0, 0.0, &mut best);
        best
    }

    fn lattice_grid(m: &Lattice) -> Grid {
        Grid::new((0..m.nt).map(|i| i as f64).collect(), m.q_axis.clone(), 1.0).unwrap()
    }

    #[test]
    fn stage_cost_examples() {
        let c = |e, w| StageCost {
            energy_weight: e,
            comfort_weight: w,
            target_c: 23.0,
        };
        assert_eq!(stage_cost(1700.0, 23.0, &c(1.0, 0.0), 1.0), 1700.0);
        assert_eq!(stage_cost(0.0, 25.0, &c(0.0, 1.0), 1.0), 4.0);
        assert_eq!(stage_cost(1700.0, 25.0, &c(1.0, 100.0), 1.0), 2100.0);
        assert!(c(0.0, 0.0).validate().is_err());
        assert!(c(-1.0, 1.0).validate().is_err());
    }

    #[test]
    fn uniform_axes() {
        let g = Grid::uniform((15.0, 45.0, 0.25), (0.0, 6800.0, 100.0), 1.0).unwrap();
        assert_eq!(g.temp_axis().len(), 121);
        assert_eq!(g.q_axis().len(), 69);
        assert_eq!(*g.temp_axis().last().unwrap(), 45.0);
        assert!(Grid::new(vec![1.0, 1.0], vec![0.0], 1.0).is_err());
        assert!(Grid::new(vec![1.0], vec![0.0], 0.0).is_err());
        assert_eq!(g.nearest_q(149.0), 1);
        assert_eq!(g.nearest_q(151.0), 2);

        let b = Grid::banded(
            (15.0, 45.0, 0.25),
            (19.0, 28.0, 0.05),
            (0.0, 6800.0, 100.0),
            1.0,
        )
        .unwrap();
        assert_eq!(b.temp_axis().len(), 16 + 181 + 68);
        assert!(b.temp_axis().contains(&18.75) && b.temp_axis().contains(&28.25));
        assert!(Grid::banded(
            (15.0, 45.0, 0.25),
            (10.0, 28.0, 0.05),
            (0.0, 6800.0, 100.0),
            1.0
        )
        .is_err());
    }

    #[test]
    fn one_step_argmin() {
        let m = Lattice {
            nt: 3,
            q_axis: vec![0.0, 1.0],
            max_step: 1.0,
            shift: vec![0; 6],
            cost: vec![5.0, 3.0, 5.0, 3.0, 5.0, 3.0],
            stages: 1,
        };
        let s = solve(&lattice_grid(&m), &m, (1.0, 0.0), None).unwrap();
        assert_eq!(s.commands(), vec![1.0]);
        assert_eq!(s.total_cost, 3.0);
    }

    #[test]
    fn three_by_three_toy_matches_enumeration() {
        let m = Lattice {
            nt: 3,
            q_axis: vec![0.0, 1.0, 2.0],
            max_step: 1.0,
            shift: (0..36)
                .map(|x| [1, -1, 0, 0, 1][x % 5] as i64 - (x % 3 == 0) as i64)
                .collect(),
            cost: (0..36).map(|x| ((x * 37) % 11) as f64 + 0.5).collect(),
            stages: 4,
        };
        let s = solve(&lattice_grid(&m), &m, (1.0, 1.0), None).unwrap();
        assert_eq!(s.total_cost, enumerate(&m, 1.0, 1.0));
    }

    #[test]
    fn infeasible_start_is_an_error() {
        let m = Lattice {
            nt: 2,
            q_axis: vec![0.0],
            max_step: 1.0,
            shift: vec![5, 5],
            cost: vec![0.0, 0.0],
            stages: 1,
        };
        assert!(matches!(
            solve(&lattice_grid(&m), &m, (0.0, 0.0), None),
            Err(Error::Infeasible { .. })
        ));
        assert!(solve(&lattice_grid(&m), &m, (3.0, 0.0), None).is_err());
    }

    #[test]
    fn terminal_band_is_enforced() {
        let m = Lattice {
            nt: 3,
            q_axis: vec![0.0, 1.0],
            max_step: 1.0,
            // command 0 holds, command 1 moves up one node
            shift: vec![0, 1, 0, 1, 0, -2],
            cost: vec![0.0, 10.0, 0.0, 10.0, 0.0, 10.0],
            stages: 1,
        };
        let g = lattice_grid(&m);
        let free = solve(&g, &m, (0.0, 0.0), None).unwrap();
        assert_eq!(free.total_cost, 0.0);
        let band = TerminalBand {
            low_c: 1.0,
            high_c: 2.0,
        };
        let s = solve(&g, &m, (0.0, 0.0), Some(band)).unwrap();
        assert_eq!(s.final_cabin_c, 1.0);
        assert_eq!(s.total_cost, 10.0);
    }

    #[test]
    fn policy_dump() {
        let m = Lattice {
            nt: 2,
            q_axis: vec![0.0, 1.0],
            max_step: 1.0,
            shift: vec![0; 8],
            cost: vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            stages: 2,
        };
        let s = solve(&lattice_grid(&m), &m, (0.0, 0.0), None).unwrap();
        assert_eq!(s.policy.command(0, 1, 0), Some(1.0));
        let mut buf = Vec::new();
        s.policy.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
        assert!(text.starts_with("stage\ttemp_c\tprev_q_w\tcommand_w\n0\t0\t0\t1\n"));
    }

    fn cabin_setup() -> (SimConfig, Vec<EnvironmentSample>) {
        let cfg = SimConfig::default_sedan();
        let env = EnvironmentSample {
            time_s: 0.0,
            ambient_c: 30.0,
            solar_wm2: 800.0,
            air_speed_m_s: 40.0 / 3.6,
        };
        (cfg, vec![env; 4])
    }

    fn cabin_enumerate(cfg: &SimConfig, env: &[EnvironmentSample], q_axis: &[f64], t0: f64) -> f64 {
        let plant = cfg.cabin_plant();
        let model = CabinModel::new(&plant, cfg.cost, env, 1.0).unwrap();
        fn rec(m: &CabinModel, q_axis: &[f64], k: usize, t: f64, q: f64, acc: f64, best: &mut f64) {
            if k == m.stages() {
                *best = best.min(acc);
                return;
            }
            for &c in q_axis {
                if (c - q).abs() <= m.max_step_change_w() {
                    let (tn, cost) = m.step(k, t, c);
                    rec(m, q_axis, k + 1, tn, c, acc + cost, best);
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(&model, q_axis, 0, t0, 0.0, 0.0, &mut best);
        best
    }

    #[test]
    fn cabin_dp_close_to_enumeration() {
        let (cfg, env) = cabin_setup();
        let grid = Grid::uniform((15.0, 45.0, 0.05), (0.0, 6800.0, 250.0), 1.0).unwrap();
        let plant = cfg.cabin_plant();
        let s = solve_cabin(&grid, &plant, &cfg.cost, &env, (25.0, 0.0), None).unwrap();
        let best = cabin_enumerate(&cfg, &env, grid.q_axis(), 25.0);
        assert!(s.total_cost >= best - 1e-9 * best);
        assert!(
            s.total_cost <= best * (1.0 + 1e-3),
            "{} vs {}",
            s.total_cost,
            best
        );
    }

    #[test]
    fn pruned_solve_matches_full() {
        let (cfg, _) = cabin_setup();
        let plant = cfg.cabin_plant();
        let grid = cfg.grid().unwrap();
        let env: Vec<EnvironmentSample> = (0..8)
            .map(|k| EnvironmentSample {
                time_s: k as f64,
                ambient_c: 30.0,
                solar_wm2: if k < 4 { 900.0 } else { 400.0 },
                air_speed_m_s: (k % 3) as f64 * 5.0,
            })
            .collect();
        for x0 in [
            (23.0, 1900.0),
            (40.0, 0.0),
            (22.37, 3000.0),
            (26.01, 6800.0),
        ] {
            let full = solve_cabin(&grid, &plant, &cfg.cost, &env, x0, None).unwrap();
            let fast = solve_cabin_reachable(&grid, &plant, &cfg.cost, &env, x0).unwrap();
            assert_eq!(full.trajectory, fast.trajectory);
            assert_eq!(full.total_cost, fast.total_cost);
        }
    }

    #[test]
    fn pure_energy_objective_switches_off() {
        let (mut cfg, env) = cabin_setup();
        cfg.cost.comfort_weight = 0.0;
        let grid = Grid::uniform((15.0, 45.0, 0.25), (0.0, 6800.0, 100.0), 1.0).unwrap();
        let plant = cfg.cabin_plant();
        let s = solve_cabin(&grid, &plant, &cfg.cost, &env, (25.0, 1200.0), None).unwrap();
        assert_eq!(s.commands(), vec![700.0, 200.0, 0.0, 0.0]);
    }

    #[test]
    fn infeasible_transition_rejected() {
        let (cfg, env) = cabin_setup();
        let plant = cfg.cabin_plant();
        assert!(transition(25.0, 0.0, 600.0, &env[0], &plant, 1.0).is_err());
        let (t, q) = transition(25.0, 0.0, 0.0, &env[0], &plant, 1.0).unwrap();
        assert!(t > 25.0);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn grid_outside_plant_rejected() {
        let (cfg, env) = cabin_setup();
        let grid = Grid::uniform((15.0, 45.0, 0.25), (0.0, 7000.0, 100.0), 1.0).unwrap();
        assert!(solve_cabin(
            &grid,
            &cfg.cabin_plant(),
            &cfg.cost,
            &env,
            (25.0, 0.0),
            None
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn lattice_matches_enumeration((m, i0, j0) in lattice_strategy()) {
            let g = lattice_grid(&m);
            let best = enumerate(&m, i0 as f64, j0 as f64);
            match solve(&g, &m, (i0 as f64, j0 as f64), None) {
                Ok(s) => {
                    prop_assert!((s.total_cost - best).abs() <= 1e-9 * best.abs().max(1.0));
                    let mut q = j0 as f64;
                    for step in &s.trajectory {
                        prop_assert!((step.command_w - q).abs() <= m.max_step);
                        q = step.command_w;
                    }
                }
                Err(_) => prop_assert!(best.is_infinite()),
            }
        }

        #[test]
        fn value_grows_with_remaining_horizon(
            nt in 2usize..=5, nq in 2usize..=4,
            shift in proptest::collection::vec(-1i64..=1, 20),
            cost in proptest::collection::vec(0.0f64..10.0, 20),
        ) {
            // time-invariant: the same table at every stage
            let stages = 4;
            let per = nt * nq;
            let m = Lattice {
                nt,
                q_axis: (0..nq).map(|j| j as f64).collect(),
                max_step: 1.0,
                shift: (0..stages * per).map(|x| shift[x % per]).collect(),
                cost: (0..stages * per).map(|x| cost[x % per]).collect(),
                stages,
            };
            let g = lattice_grid(&m);
            if let Ok(s) = solve(&g, &m, (0.0, 0.0), None) {
                for k in 1..stages {
                    for i in 0..nt {
                        for j in 0..nq {
                            prop_assert!(s.value(k - 1, i, j) >= s.value(k, i, j));
                        }
                    }
                }
            }
        }
    }
}
