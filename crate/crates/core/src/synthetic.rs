//! Synthetic drive cycles and weather traces.
//!
//! Standard certification cycles are not redistributed with this crate;
//! these generators produce stand-ins with similar statistics so the
//! examples and tests run out of the box.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sim::{DriveCycle, WeatherSample};

/// One stop-to-stop segment: ramp up to `peak_kmh`, cruise, brake to a
/// standstill and idle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Microtrip {
    pub peak_kmh: f64,
    pub cruise_s: usize,
    pub idle_s: usize,
    pub accel_kmh_s: f64,
    pub decel_kmh_s: f64,
}

impl Microtrip {
    const fn urban(peak_kmh: f64, cruise_s: usize, idle_s: usize) -> Self {
        Microtrip {
            peak_kmh,
            cruise_s,
            idle_s,
            accel_kmh_s: 3.0,
            decel_kmh_s: 4.0,
        }
    }

    fn append_to(&self, v: &mut Vec<f64>, jitter: &mut impl FnMut(usize) -> f64) {
        let mut s = 0.0;
        while s < self.peak_kmh {
            s = (s + self.accel_kmh_s).min(self.peak_kmh);
            v.push(s);
        }
        for k in 0..self.cruise_s {
            v.push((self.peak_kmh + jitter(k)).max(0.0));
        }
        while s > 0.0 {
            s = (s - self.decel_kmh_s).max(0.0);
            v.push(s);
        }
        v.extend(std::iter::repeat_n(0.0, self.idle_s));
    }
}

pub fn build_cycle(
    name: &str,
    lead_idle_s: usize,
    trips: &[Microtrip],
    jitter: &mut impl FnMut(usize) -> f64,
) -> DriveCycle {
    let mut v = vec![0.0; lead_idle_s];
    for t in trips {
        t.append_to(&mut v, jitter);
    }
    DriveCycle::from_speeds(name, v)
}

pub const URBAN_CYCLE_LEN: usize = 1370;

const URBAN_TRIPS: [Microtrip; 18] = [
    Microtrip::urban(48.0, 38, 12),
    Microtrip::urban(91.0, 124, 16),
    Microtrip::urban(45.0, 28, 15),
    Microtrip::urban(56.0, 44, 10),
    Microtrip::urban(40.0, 18, 14),
    Microtrip::urban(55.0, 48, 12),
    Microtrip::urban(35.0, 14, 16),
    Microtrip::urban(50.0, 33, 10),
    Microtrip::urban(45.0, 24, 18),
    Microtrip::urban(57.0, 44, 9),
    Microtrip::urban(30.0, 12, 12),
    Microtrip::urban(48.0, 31, 15),
    Microtrip::urban(40.0, 23, 12),
    Microtrip::urban(55.0, 33, 9),
    Microtrip::urban(35.0, 15, 13),
    Microtrip::urban(45.0, 38, 10),
    Microtrip::urban(40.0, 23, 10),
    Microtrip::urban(32.0, 14, 0),
];

/// 1370 s stop-and-go urban cycle: peak near 93 km/h, mean near
/// 34 km/h, about a fifth of the time at standstill.
pub fn urban_cycle() -> DriveCycle {
    let mut ripple = |k: usize| 2.0 * (k as f64 / 7.0).sin() * (k as f64 / 5.0).min(1.0);
    let mut c = build_cycle("urban", 18, &URBAN_TRIPS, &mut ripple);
    c.speed_kmh.resize(URBAN_CYCLE_LEN, 0.0);
    c.time_s = (0..URBAN_CYCLE_LEN).map(|i| i as f64).collect();
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedRegime {
    /// Congested city traffic.
    Low,
    /// Arterial and expressway driving.
    High,
}

fn random_trip(regime: SpeedRegime, rng: &mut ChaCha8Rng) -> Microtrip {
    let (peak, cruise, idle) = match regime {
        SpeedRegime::Low => (
            rng.gen_range(10.0..60.0),
            rng.gen_range(5..60),
            rng.gen_range(5..45),
        ),
        SpeedRegime::High => (
            rng.gen_range(50.0..120.0),
            rng.gen_range(30..240),
            rng.gen_range(0..20),
        ),
    };
    Microtrip {
        peak_kmh: f64::round(peak),
        cruise_s: cruise,
        idle_s: idle,
        accel_kmh_s: rng.gen_range(1.5..4.5),
        decel_kmh_s: rng.gen_range(2.5..5.5),
    }
}

/// Random stop-and-go cycle of at least `min_len_s` seconds.
pub fn random_cycle(
    name: &str,
    regime: SpeedRegime,
    min_len_s: usize,
    rng: &mut ChaCha8Rng,
) -> DriveCycle {
    let mut v = vec![0.0; rng.gen_range(5..20)];
    while v.len() < min_len_s {
        let trip = random_trip(regime, rng);
        // slow wander around the cruise speed
        let mut offset = 0.0f64;
        let mut jitter = |_k: usize| {
            offset = (offset + rng.gen_range(-0.8..0.8)).clamp(-4.0, 4.0);
            offset
        };
        trip.append_to(&mut v, &mut jitter);
    }
    DriveCycle::from_speeds(name, v)
}

/// `count` seeded cycles of one regime, each about 20 minutes long.
pub fn corpus(regime: SpeedRegime, count: usize, seed: u64) -> Vec<DriveCycle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag = match regime {
        SpeedRegime::Low => "low",
        SpeedRegime::High => "high",
    };
    (0..count)
        .map(|i| random_cycle(&format!("{tag}-{i:02}"), regime, 1200, &mut rng))
        .collect()
}

/// Summer afternoon at 1 Hz: ambient drifting from `ambient_c - 1` to
/// `ambient_c + 1`, clear-sky solar flux `solar_wm2` broken by passing
/// clouds that cut it to 35–60 %.
pub fn summer_weather(
    len_s: usize,
    ambient_c: f64,
    solar_wm2: f64,
    seed: u64,
) -> Vec<WeatherSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solar = vec![solar_wm2; len_s];
    let mut s = 60;
    while s < len_s {
        let d = rng.gen_range(40..90);
        let depth = rng.gen_range(0.35..0.6);
        let end = (s + d).min(len_s);
        solar[s..end].fill(solar_wm2 * depth);
        s += d + rng.gen_range(80..180);
    }
    solar
        .into_iter()
        .enumerate()
        .map(|(i, solar_wm2)| WeatherSample {
            time_s: i as f64,
            ambient_c: ambient_c - 1.0 + 2.0 * i as f64 / len_s as f64,
            solar_wm2,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urban_cycle_statistics() {
        let c = urban_cycle();
        assert_eq!(c.len(), URBAN_CYCLE_LEN);
        let n = c.len() as f64;
        let mean = c.speed_kmh.iter().sum::<f64>() / n;
        let max = c.speed_kmh.iter().cloned().fold(0.0, f64::max);
        let idle = c.speed_kmh.iter().filter(|&&v| v == 0.0).count() as f64 / n;
        assert!((30.0..38.0).contains(&mean), "{mean}");
        assert!((88.0..96.0).contains(&max), "{max}");
        assert!((0.15..0.25).contains(&idle), "{idle}");
        assert!(c.speed_kmh.iter().all(|&v| v >= 0.0));
        assert!(DriveCycle::new("u", c.time_s.clone(), c.speed_kmh.clone()).is_ok());
    }

    #[test]
    fn corpora_are_seeded_and_distinct() {
        let a = corpus(SpeedRegime::Low, 3, 1);
        assert_eq!(a, corpus(SpeedRegime::Low, 3, 1));
        assert_ne!(a, corpus(SpeedRegime::Low, 3, 2));
        let mean = |cs: &[DriveCycle]| {
            let all: Vec<f64> = cs.iter().flat_map(|c| c.speed_kmh.clone()).collect();
            all.iter().sum::<f64>() / all.len() as f64
        };
        assert!(mean(&a) + 20.0 < mean(&corpus(SpeedRegime::High, 3, 1)));
        assert!(a
            .iter()
            .all(|c| c.len() >= 1200 && c.speed_kmh.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn weather_shape() {
        let w = summer_weather(1370, 28.0, 900.0, 7);
        assert_eq!(w.len(), 1370);
        assert_eq!(w[0].ambient_c, 27.0);
        assert!(w
            .iter()
            .all(|s| s.solar_wm2 <= 900.0 && s.solar_wm2 >= 0.35 * 900.0));
        assert!(w.iter().any(|s| s.solar_wm2 < 900.0));
    }
}
