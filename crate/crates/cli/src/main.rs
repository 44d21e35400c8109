use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cabin_ac::compare::{self, build_controller, CompareCase, ControllerKind, Forecast, Report};
use cabin_ac::io;
use cabin_ac::markov::{self, PredictionMode, TransitionMatrix};
use cabin_ac::sim::{self, metrics, scale_cycle, DriveCycle, Mission};
use cabin_ac::sweep::{self, SweepSpec, SweepVariable};
use cabin_ac::synthetic::{self, SpeedRegime};
use cabin_ac::SimConfig;

/// Cabin air-conditioning energy management: fit speed predictors, simulate
/// controllers, run sensitivity sweeps and compare strategies.
#[derive(Parser)]
#[command(name = "cabin-ac", version)]
struct Cli {
    /// JSON configuration; the bundled sedan is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a speed transition matrix from a corpus of cycle files.
    FitMarkov {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Matrix file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Horizon speed predictions along a cycle.
    Predict {
        /// Matrix written by fit-markov.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        cycle: PathBuf,
        /// Steps ahead; defaults to the configured SMPC horizon.
        #[arg(long)]
        horizon: Option<usize>,
        /// argmax, expectation or sample.
        #[arg(long)]
        mode: Option<PredictionMode>,
        /// Seed for sample mode.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one mission with one controller and write its trace.
    Simulate {
        #[arg(long)]
        cycle: PathBuf,
        #[arg(long)]
        env: PathBuf,
        #[arg(long, default_value = "smpc")]
        controller: ControllerKind,
        #[command(flatten)]
        smpc: SmpcArgs,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy needed to hold target temperatures while one condition varies.
    Sweep {
        /// JSON sweep description; replaces the flags below.
        #[arg(long, conflicts_with_all = ["variable", "values", "targets"])]
        spec: Option<PathBuf>,
        #[arg(long, required_unless_present = "spec")]
        variable: Option<SweepVariable>,
        /// Comma-separated swept values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Comma-separated cabin targets, °C.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        targets: Vec<f64>,
        #[arg(long, default_value_t = 40.0)]
        speed: f64,
        #[arg(long, default_value_t = 30.0)]
        ambient: f64,
        #[arg(long, default_value_t = 900.0)]
        solar: f64,
        #[arg(long, default_value_t = sweep::SWEEP_DURATION_S)]
        duration: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several controllers on several missions and tabulate the results.
    Compare {
        /// Mission cycles; held-out corpus cycles are added with --test-count.
        #[arg(long = "cycle")]
        cycles: Vec<PathBuf>,
        #[arg(long, required_unless_present = "from_traces")]
        env: Option<PathBuf>,
        /// Speed scale factors; each cycle is run once per factor.
        #[arg(long = "scale", value_delimiter = ',')]
        scales: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "bangbang,smpc,dp")]
        controllers: Vec<ControllerKind>,
        #[command(flatten)]
        smpc: SmpcArgs,
        /// Directory to cache every trace in.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Rebuild the report from a trace cache without simulating.
        #[arg(long, conflicts_with_all = ["cycles", "env", "traces"])]
        from_traces: Option<PathBuf>,
        /// Report CSV; the text table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint speed/acceleration histogram of a corpus.
    Density {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 1.0)]
        accel_bin: f64,
        #[arg(long, default_value_t = 10.0)]
        accel_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the bundled synthetic cycles, corpora and weather traces.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Cycles per corpus.
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
    /// Print the effective configuration as JSON.
    ShowConfig,
}

#[derive(Args)]
struct CorpusArgs {
    /// Cycle files or directories of them.
    #[arg(long = "corpus", required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,
    /// Hold out the last N cycles from fitting.
    #[arg(long, default_value_t = 0)]
    test_count: usize,
}

#[derive(Args)]
struct SmpcArgs {
    /// Fitted matrix for SMPC speed prediction.
    #[arg(long, conflicts_with = "train")]
    matrix: Option<PathBuf>,
    /// Fit the SMPC matrix from these cycles instead of loading one.
    #[arg(long, num_args = 1..)]
    train: Vec<PathBuf>,
    /// Hold out the last N training cycles; with `compare` they become
    /// extra missions.
    #[arg(long, default_value_t = 0)]
    test_count: usize,
    /// Use the true future speeds instead of a fitted predictor.
    #[arg(long, conflicts_with_all = ["matrix", "train"])]
    perfect: bool,
    /// Prediction horizon in steps.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// argmax, expectation or sample.
    #[arg(long)]
    mode: Option<PredictionMode>,
}

impl SmpcArgs {
    fn apply(&self, cfg: &mut SimConfig) {
        if let Some(h) = self.horizon {
            cfg.smpc.horizon = h;
        }
        if let Some(s) = self.seed {
            cfg.smpc.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.smpc.mode = m;
        }
    }

    /// Forecast source plus any held-out cycles.
    fn forecast(&self, cfg: &SimConfig) -> Result<(Option<Forecast>, Vec<DriveCycle>)> {
        if self.perfect {
            return Ok((Some(Forecast::Perfect), Vec::new()));
        }
        if let Some(path) = &self.matrix {
            let m = TransitionMatrix::load(path)?;
            return Ok((Some(Forecast::Markov(Arc::new(m))), Vec::new()));
        }
        if !self.train.is_empty() {
            let (train, test) =
                compare::split_corpus(io::load_cycles(&self.train)?, self.test_count)?;
            let m = fit_cycles(&train, cfg)?;
            return Ok((Some(Forecast::Markov(Arc::new(m))), test));
        }
        Ok((None, Vec::new()))
    }
}

fn fit_cycles(cycles: &[DriveCycle], cfg: &SimConfig) -> Result<TransitionMatrix> {
    let traces: Vec<&[f64]> = cycles.iter().map(|c| c.speed_kmh.as_slice()).collect();
    Ok(markov::fit(&traces, &cfg.markov.quantizer()?)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    Ok(match path {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default_sedan(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::FitMarkov { corpus, out } => {
            let (train, test) =
                compare::split_corpus(io::load_cycles(&corpus.corpus)?, corpus.test_count)?;
            let m = fit_cycles(&train, &cfg)?;
            m.save(&out)?;
            let visited = (0..m.num_states()).filter(|&i| m.is_visited(i)).count();
            eprintln!(
                "fitted {} cycles ({} held out); {visited} of {} speed states visited",
                train.len(),
                test.len(),
                m.num_states()
            );
        }
        Command::Predict {
            matrix,
            cycle,
            horizon,
            mode,
            seed,
            out,
        } => {
            let m = TransitionMatrix::load(&matrix)?;
            let c = io::load_cycle(&cycle)?;
            let h = horizon.unwrap_or(cfg.smpc.horizon);
            let mode = mode.unwrap_or(cfg.smpc.mode);
            let seed = seed.unwrap_or(cfg.smpc.seed);
            let mut rng = markov::seeded_rng(seed);
            let mut w = output(out.as_deref())?;
            let preds: Vec<String> = (1..=h).map(|i| format!("pred_{i}_kmh")).collect();
            writeln!(w, "time_s,speed_kmh,{},fallback_steps", preds.join(","))?;
            for (t, v) in c.time_s.iter().zip(&c.speed_kmh) {
                let p = m.predict_with(*v, h, mode, &mut rng)?;
                let cols: Vec<String> = p.speeds_kmh.iter().map(|x| x.to_string()).collect();
                writeln!(w, "{t},{v},{},{}", cols.join(","), p.fallback_steps)?;
            }
        }
        Command::Simulate {
            cycle,
            env,
            controller,
            smpc,
            scale,
            out,
        } => {
            smpc.apply(&mut cfg);
            cfg.validate()?;
            let c = scale_cycle(&io::load_cycle(&cycle)?, scale)?;
            let mission = Mission::with_defaults(&c, &io::load_environment(&env)?, &cfg.mission)?;
            let (forecast, _) = smpc.forecast(&cfg)?;
            let mut ctl = build_controller(controller, &cfg, forecast.as_ref())?;
            let trace = sim::run(&mission, ctl.as_mut(), &cfg.cabin_plant())?;
            trace.write_csv(output(out.as_deref())?)?;
            let m = metrics(&trace, None, &cfg.metrics)?;
            eprintln!(
                "{} / {}: energy {:.4e} J, mean {:.2} °C, std {:.2} °C, {} prediction fallbacks",
                trace.mission,
                trace.controller,
                m.total_energy_j,
                m.mean_temp_c,
                m.temp_std_c,
                trace.fallback_events
            );
        }
        Command::Sweep {
            spec,
            variable,
            values,
            targets,
            speed,
            ambient,
            solar,
            duration,
            out,
        } => {
            let spec = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p)
                        .with_context(|| format!("cannot read {}", p.display()))?;
                    serde_json::from_str::<SweepSpec>(&text)
                        .with_context(|| format!("bad sweep spec {}", p.display()))?
                }
                None => SweepSpec {
                    speed_kmh: speed,
                    ambient_c: ambient,
                    solar_wm2: solar,
                    duration_s: duration,
                    ..SweepSpec::new(variable.expect("required by clap"), values, targets)
                },
            };
            spec.validate()?;
            let rows = sweep::run_sweep(&spec, &cfg.cabin_plant())?;
            for r in rows.iter().filter(|r| r.unreachable) {
                log::warn!(
                    "{} = {}: target {} °C unreachable",
                    spec.variable.column(),
                    r.value,
                    r.target_c
                );
            }
            sweep::write_sweep_csv(spec.variable, &rows, output(out.as_deref())?)?;
        }
        Command::Compare {
            cycles,
            env,
            scales,
            controllers,
            smpc,
            traces,
            from_traces,
            out,
        } => {
            let outcomes = match from_traces {
                Some(dir) => compare::load_outcomes(&dir)?,
                None => {
                    smpc.apply(&mut cfg);
                    cfg.validate()?;
                    let weather = io::load_environment(env.as_deref().expect("required by clap"))?;
                    let (forecast, held_out) = smpc.forecast(&cfg)?;
                    let mut base = cycles
                        .iter()
                        .map(|p| io::load_cycle(p))
                        .collect::<cabin_ac::Result<Vec<_>>>()?;
                    base.extend(held_out);
                    if base.is_empty() {
                        bail!("no missions: pass --cycle or hold out training cycles with --test-count");
                    }
                    let scales = if scales.is_empty() { vec![1.0] } else { scales };
                    let mut cases = Vec::new();
                    for c in &base {
                        for &s in &scales {
                            let c = if s == 1.0 {
                                c.clone()
                            } else {
                                scale_cycle(c, s)?
                            };
                            cases.push(CompareCase {
                                mission: Mission::with_defaults(&c, &weather, &cfg.mission)?,
                                forecast: forecast.clone(),
                            });
                        }
                    }
                    let outcomes = compare::run_comparison(&cases, &controllers, &cfg);
                    if let Some(dir) = &traces {
                        compare::save_outcomes(&outcomes, dir)?;
                    }
                    outcomes
                }
            };
            let report = Report::build(&outcomes, &cfg.metrics);
            for m in report.dp_bound_violations(1e-3) {
                log::warn!("{m}: DP benchmark used more energy than SMPC");
            }
            if let Some(p) = &out {
                fs::write(p, report.to_csv())
                    .with_context(|| format!("cannot write {}", p.display()))?;
            }
            print!("{}", report.to_table());
            let failed = report.rows.iter().filter(|r| r.metrics.is_err()).count();
            if failed > 0 {
                bail!("{failed} of {} runs failed", report.rows.len());
            }
        }
        Command::Density {
            corpus,
            accel_bin,
            accel_max,
            out,
        } => {
            let (train, _) =
                compare::split_corpus(io::load_cycles(&corpus.corpus)?, corpus.test_count)?;
            let traces: Vec<&[f64]> = train.iter().map(|c| c.speed_kmh.as_slice()).collect();
            let q = cfg.markov.quantizer()?;
            let d = markov::vel_accel_density(&traces, &q, accel_bin, accel_max)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "speed_kmh,accel_kmh_s,density")?;
            for s in 0..q.num_states() {
                for k in 0..d.accel_bins() {
                    writeln!(
                        w,
                        "{},{},{}",
                        q.dequantize(s),
                        d.accel_center(k),
                        d.get(s, k)
                    )?;
                }
            }
        }
        Command::Synth { out, count, seed } => write_synthetic(&out, count, seed)?,
        Command::ShowConfig => println!("{}", cfg.to_json()),
    }
    Ok(())
}

fn write_synthetic(root: &Path, count: usize, seed: u64) -> Result<()> {
    let mkdir =
        |p: &Path| fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()));
    let cycles = root.join("cycles");
    mkdir(&cycles)?;
    io::save_cycle(&synthetic::urban_cycle(), &cycles.join("urban.csv"))?;
    for (regime, tag, offset) in [(SpeedRegime::Low, "low", 0), (SpeedRegime::High, "high", 1)] {
        let dir = root.join("corpus").join(tag);
        mkdir(&dir)?;
        for c in synthetic::corpus(regime, count, seed + offset) {
            io::save_cycle(&c, &dir.join(format!("{}.csv", c.name)))?;
        }
    }
    let env = root.join("environment");
    mkdir(&env)?;
    let summer = synthetic::summer_weather(synthetic::URBAN_CYCLE_LEN, 28.0, 900.0, 7);
    io::save_environment(&summer, &env.join("summer.csv"))?;
    let constant = [sim::WeatherSample {
        time_s: 0.0,
        ambient_c: 30.0,
        solar_wm2: 900.0,
    }];
    io::save_environment(&constant, &env.join("constant.csv"))?;
    eprintln!("wrote synthetic data under {}", root.display());
    Ok(())
}
