//! First-order Markov chain over quantized vehicle speed.
//!
//! A [`TransitionMatrix`] is fitted by counting consecutive-sample
//! transitions in a corpus of 1 Hz speed traces and is then chained to
//! produce multi-step speed predictions.

use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform speed bins `[i*w, (i+1)*w)`; the last bin also absorbs every
/// speed at or above `v_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityQuantizer {
    bin_width_kmh: f64,
    v_max_kmh: f64,
    num_states: usize,
}

impl VelocityQuantizer {
    pub fn new(bin_width_kmh: f64, v_max_kmh: f64) -> Result<Self> {
        if !(bin_width_kmh > 0.0 && bin_width_kmh.is_finite()) {
            return Err(Error::invalid(
                "quantizer",
                format!("bin width {bin_width_kmh} must be positive"),
            ));
        }
        if !(v_max_kmh >= bin_width_kmh && v_max_kmh.is_finite()) {
            return Err(Error::invalid(
                "quantizer",
                format!("v_max {v_max_kmh} must cover at least one bin"),
            ));
        }
        let num_states = (v_max_kmh / bin_width_kmh).ceil() as usize;
        Ok(VelocityQuantizer {
            bin_width_kmh,
            v_max_kmh,
            num_states,
        })
    }

    pub fn bin_width_kmh(&self) -> f64 {
        self.bin_width_kmh
    }

    pub fn v_max_kmh(&self) -> f64 {
        self.v_max_kmh
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn quantize(&self, v_kmh: f64) -> Result<usize> {
        if !(v_kmh >= 0.0) {
            return Err(Error::domain(format!(
                "speed {v_kmh} km/h is negative or NaN"
            )));
        }
        let i = (v_kmh / self.bin_width_kmh).floor();
        Ok((i as usize).min(self.num_states - 1))
    }

    /// Bin midpoint.
    pub fn dequantize(&self, state: usize) -> f64 {
        (state as f64 + 0.5) * self.bin_width_kmh
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.num_states).map(|i| self.dequantize(i)).collect()
    }
}

/// Random stream for sampled predictions.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn quantize(v_kmh: f64, q: &VelocityQuantizer) -> Result<usize> {
    q.quantize(v_kmh)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    quantizer: VelocityQuantizer,
    counts: Vec<u64>,
    totals: Vec<u64>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionMode {
    #[default]
    Argmax,
    Expectation,
    Sample,
}

impl std::str::FromStr for PredictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmax" => Ok(PredictionMode::Argmax),
            "expectation" => Ok(PredictionMode::Expectation),
            "sample" => Ok(PredictionMode::Sample),
            other => Err(Error::invalid(
                "prediction mode",
                format!("unknown mode {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub speeds_kmh: Vec<f64>,
    pub states: Vec<usize>,
    /// Number of chain steps that hit an unvisited row and held the state.
    pub fallback_steps: usize,
}

impl Prediction {
    pub fn used_fallback(&self) -> bool {
        self.fallback_steps > 0
    }
}

/// Count transitions over every trace and normalize each visited row.
pub fn fit<T: AsRef<[f64]>>(cycles: &[T], q: &VelocityQuantizer) -> Result<TransitionMatrix> {
    let p = q.num_states();
    let mut counts = vec![0u64; p * p];
    let mut usable = false;
    for trace in cycles {
        let trace = trace.as_ref();
        if trace.len() < 2 {
            continue;
        }
        usable = true;
        let mut prev = q.quantize(trace[0])?;
        for &v in &trace[1..] {
            let next = q.quantize(v)?;
            counts[prev * p + next] += 1;
            prev = next;
        }
    }
    if !usable {
        return Err(Error::Empty(
            "corpus has no trace with at least two samples".into(),
        ));
    }
    TransitionMatrix::from_counts(*q, counts)
}

impl TransitionMatrix {
    pub fn from_counts(quantizer: VelocityQuantizer, counts: Vec<u64>) -> Result<Self> {
        let p = quantizer.num_states();
        if counts.len() != p * p {
            return Err(Error::invalid(
                "transition matrix",
                format!("expected {} counts, got {}", p * p, counts.len()),
            ));
        }
        let totals: Vec<u64> = counts.chunks(p).map(|row| row.iter().sum()).collect();
        let mut probs = vec![0.0; p * p];
        for i in 0..p {
            if totals[i] == 0 {
                continue;
            }
            let n = totals[i] as f64;
            for j in 0..p {
                probs[i * p + j] = counts[i * p + j] as f64 / n;
            }
        }
        Ok(TransitionMatrix {
            quantizer,
            counts,
            totals,
            probs,
        })
    }

    pub fn quantizer(&self) -> &VelocityQuantizer {
        &self.quantizer
    }

    pub fn num_states(&self) -> usize {
        self.quantizer.num_states()
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.num_states() + j]
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.num_states() + j]
    }

    pub fn total(&self, i: usize) -> u64 {
        self.totals[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.num_states();
        &self.probs[i * p..(i + 1) * p]
    }

    pub fn is_visited(&self, i: usize) -> bool {
        self.totals[i] > 0
    }

    /// Most likely successor; the lowest index wins a tie.
    pub fn argmax_successor(&self, i: usize) -> Option<usize> {
        if !self.is_visited(i) {
            return None;
        }
        let row = self.row(i);
        let mut best = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = j;
            }
        }
        Some(best)
    }

    fn expected_successor(&self, i: usize) -> Option<usize> {
        if !self.is_visited(i) {
            return None;
        }
        let mean: f64 = self
            .row(i)
            .iter()
            .enumerate()
            .map(|(j, p)| p * self.quantizer.dequantize(j))
            .sum();
        Some(
            self.quantizer
                .quantize(mean.max(0.0))
                .expect("mean speed is non-negative"),
        )
    }

    fn sampled_successor(&self, i: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        if !self.is_visited(i) {
            return None;
        }
        let dist = WeightedIndex::new(self.row(i)).expect("visited rows have positive mass");
        Some(dist.sample(rng))
    }

    /// Predict `horizon` speeds after `v_kmh`, each step treating the
    /// previous predicted state as the new initial state.
    pub fn predict_with(
        &self,
        v_kmh: f64,
        horizon: usize,
        mode: PredictionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Prediction> {
        if horizon == 0 {
            return Err(Error::invalid("prediction", "horizon must be at least 1"));
        }
        let mut state = self.quantizer.quantize(v_kmh)?;
        let mut states = Vec::with_capacity(horizon);
        let mut fallback_steps = 0;
        for _ in 0..horizon {
            let next = match mode {
                PredictionMode::Argmax => self.argmax_successor(state),
                PredictionMode::Expectation => self.expected_successor(state),
                PredictionMode::Sample => self.sampled_successor(state, rng),
            };
            state = match next {
                Some(s) => s,
                None => {
                    fallback_steps += 1;
                    state
                }
            };
            states.push(state);
        }
        let speeds_kmh = states
            .iter()
            .map(|&s| self.quantizer.dequantize(s))
            .collect();
        Ok(Prediction {
            speeds_kmh,
            states,
            fallback_steps,
        })
    }

    pub fn predict(
        &self,
        v_kmh: f64,
        horizon: usize,
        mode: PredictionMode,
        seed: u64,
    ) -> Result<Prediction> {
        let mut rng = seeded_rng(seed);
        self.predict_with(v_kmh, horizon, mode, &mut rng)
    }

    pub fn to_file(&self) -> MatrixFile {
        MatrixFile {
            format: MATRIX_FORMAT.to_string(),
            bin_width_kmh: self.quantizer.bin_width_kmh,
            v_max_kmh: self.quantizer.v_max_kmh,
            num_states: self.num_states(),
            bin_midpoints_kmh: self.quantizer.midpoints(),
            counts: self.counts.clone(),
            probabilities: self.probs.clone(),
        }
    }

    pub fn from_file(file: MatrixFile) -> Result<Self> {
        if file.format != MATRIX_FORMAT {
            return Err(Error::invalid(
                "matrix file",
                format!("unsupported format {:?}", file.format),
            ));
        }
        let q = VelocityQuantizer::new(file.bin_width_kmh, file.v_max_kmh)?;
        if q.num_states() != file.num_states {
            return Err(Error::invalid(
                "matrix file",
                format!(
                    "num_states {} disagrees with the axis ({})",
                    file.num_states,
                    q.num_states()
                ),
            ));
        }
        let m = TransitionMatrix::from_counts(q, file.counts)?;
        if file.probabilities.len() != m.probs.len()
            || file
                .probabilities
                .iter()
                .zip(&m.probs)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::invalid(
                "matrix file",
                "probabilities disagree with counts",
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file()).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: MatrixFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_file(file)
    }
}

pub const MATRIX_FORMAT: &str = "velocity-markov-v1";

/// Portable matrix dump: axis metadata plus dense row-major counts and
/// probabilities (`probabilities[i * num_states + j]` is the chance of
/// moving from state `i` to state `j`; unvisited rows are all zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub format: String,
    pub bin_width_kmh: f64,
    pub v_max_kmh: f64,
    pub num_states: usize,
    pub bin_midpoints_kmh: Vec<f64>,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
}

/// Joint histogram of speed and one-second speed change.
#[derive(Debug, Clone, PartialEq)]
pub struct VelAccelDensity {
    pub speed: VelocityQuantizer,
    pub accel_bin_kmh_s: f64,
    pub accel_max_kmh_s: f64,
    /// Row-major, `[speed_state * accel_bins + accel_bin]`.
    pub mass: Vec<f64>,
}

impl VelAccelDensity {
    pub fn accel_bins(&self) -> usize {
        self.mass.len() / self.speed.num_states()
    }

    pub fn accel_center(&self, k: usize) -> f64 {
        let half = (self.accel_bins() / 2) as f64;
        (k as f64 - half) * self.accel_bin_kmh_s
    }

    pub fn get(&self, speed_state: usize, accel_bin: usize) -> f64 {
        self.mass[speed_state * self.accel_bins() + accel_bin]
    }
}

/// Normalized histogram of `(v[t], v[t+1] - v[t])` pairs. Acceleration bins
/// are centered on multiples of `accel_bin_kmh_s`; values beyond
/// `accel_max_kmh_s` land in the outermost bins.
pub fn vel_accel_density<T: AsRef<[f64]>>(
    cycles: &[T],
    speed: &VelocityQuantizer,
    accel_bin_kmh_s: f64,
    accel_max_kmh_s: f64,
) -> Result<VelAccelDensity> {
    if !(accel_bin_kmh_s > 0.0 && accel_max_kmh_s >= 0.0) {
        return Err(Error::invalid(
            "density axes",
            "acceleration bin must be positive",
        ));
    }
    let half = (accel_max_kmh_s / accel_bin_kmh_s).round() as i64;
    let n_a = (2 * half + 1) as usize;
    let mut mass = vec![0.0; speed.num_states() * n_a];
    let mut n = 0usize;
    for trace in cycles {
        let trace = trace.as_ref();
        for w in trace.windows(2) {
            let s = speed.quantize(w[0])?;
            let k = ((w[1] - w[0]) / accel_bin_kmh_s).round() as i64;
            let k = (k.clamp(-half, half) + half) as usize;
            mass[s * n_a + k] += 1.0;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Empty("no consecutive sample pairs in corpus".into()));
    }
    let inv = 1.0 / n as f64;
    mass.iter_mut().for_each(|m| *m *= inv);
    Ok(VelAccelDensity {
        speed: *speed,
        accel_bin_kmh_s,
        accel_max_kmh_s,
        mass,
    })
}
