//! Closed-loop simulation properties across controllers.

use std::sync::Arc;

use cabin_ac::compare::{build_controller, ControllerKind, Forecast};
use cabin_ac::control::{BangBang, FixedCommand};
use cabin_ac::markov;
use cabin_ac::sim::{self, metrics, DriveCycle, MetricsOptions, Mission, WeatherSample};
use cabin_ac::synthetic;
use cabin_ac::SimConfig;
use proptest::prelude::*;

fn mission(speeds: Vec<f64>, ambient: f64, solar: f64, t0: f64, q0: f64) -> Mission {
    let cycle = DriveCycle::from_speeds("m", speeds);
    let w = [WeatherSample {
        time_s: 0.0,
        ambient_c: ambient,
        solar_wm2: solar,
    }];
    Mission::new(&cycle, &w, t0, q0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traces_are_consistent(
        speeds in proptest::collection::vec(0.0f64..120.0, 2..120),
        ambient in 20.0f64..42.0,
        solar in 0.0f64..1200.0,
        t0 in 20.0f64..45.0,
        q0 in 0.0f64..6800.0,
        command in -1000.0f64..9000.0,
    ) {
        let cfg = SimConfig::default_sedan();
        let plant = cfg.cabin_plant();
        let m = mission(speeds, ambient, solar, t0, q0);
        let mut fixed = FixedCommand(command);
        let mut bb = BangBang::new(cfg.bang_bang, cfg.plant).unwrap();
        for c in [&mut fixed as &mut dyn cabin_ac::control::Controller, &mut bb] {
            let tr = sim::run(&m, c, &plant).unwrap();
            prop_assert_eq!(tr.len(), m.len());
            let mut prev_q = q0;
            let mut prev_e = 0.0;
            let mut prev_t = t0;
            for r in &tr.rows {
                prop_assert!(r.q_cool_w >= 0.0 && r.q_cool_w <= 6800.0);
                prop_assert!((r.q_cool_w - prev_q).abs() <= 500.0 + 1e-6);
                prop_assert!(r.energy_j >= prev_e);
                prop_assert_eq!(r.cabin_c, prev_t);
                prop_assert!(r.p_ac_w >= 0.0);
                prev_q = r.q_cool_w;
                prev_e = r.energy_j;
                prev_t = r.cabin_next_c;
            }
            prop_assert!((tr.total_energy_j() - tr.rows.iter().map(|r| r.p_ac_w * tr.dt_s).sum::<f64>()).abs() < 1e-6 * tr.total_energy_j().max(1.0));
        }
    }
}

#[test]
fn dp_lower_bounds_other_controllers_on_a_short_mission() {
    let cfg = SimConfig::default_sedan();
    let plant = cfg.cabin_plant();
    let speeds = synthetic::urban_cycle().speed_kmh[..300].to_vec();
    let m = mission(speeds, 33.0, 950.0, 38.0, 0.0);
    let corpus = synthetic::corpus(synthetic::SpeedRegime::Low, 6, 1);
    let traces: Vec<&[f64]> = corpus.iter().map(|c| c.speed_kmh.as_slice()).collect();
    let matrix = Arc::new(markov::fit(&traces, &cfg.markov.quantizer().unwrap()).unwrap());

    let cost = |kind| {
        let mut c = build_controller(kind, &cfg, Some(&Forecast::Markov(matrix.clone()))).unwrap();
        let tr = sim::run(&m, c.as_mut(), &plant).unwrap();
        sim::trajectory_cost(&tr, &cfg.cost)
    };
    let dp = cost(ControllerKind::Dp);
    assert!(dp <= cost(ControllerKind::Smpc) * (1.0 + 1e-3));
    assert!(dp <= cost(ControllerKind::BangBang));
}

#[test]
fn perfect_forecast_smpc_tracks_the_target() {
    let cfg = SimConfig::default_sedan();
    let plant = cfg.cabin_plant();
    let m = mission(
        synthetic::urban_cycle().speed_kmh[..400].to_vec(),
        30.0,
        900.0,
        40.0,
        0.0,
    );
    let mut c = build_controller(ControllerKind::Smpc, &cfg, Some(&Forecast::Perfect)).unwrap();
    let tr = sim::run(&m, c.as_mut(), &plant).unwrap();
    let met = metrics(&tr, None, &MetricsOptions::default()).unwrap();
    assert!((met.mean_temp_c - cfg.cost.target_c).abs() < 0.5, "{met:?}");
    assert!(met.temp_std_c < 0.5, "{met:?}");
}

#[test]
fn smpc_needs_a_forecast() {
    let cfg = SimConfig::default_sedan();
    assert!(build_controller(ControllerKind::Smpc, &cfg, None).is_err());
}
