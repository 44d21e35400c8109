//! CSV loaders and writers for drive cycles and weather traces.
//!
//! Cycle files have the header `time_s,speed_kmh` and one row per second.
//! Environment files have the header `time_s,ambient_c,solar_wm2`; a file
//! with a single row describes constant conditions.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::{DriveCycle, WeatherSample};

pub const CYCLE_HEADER: [&str; 2] = ["time_s", "speed_kmh"];
pub const ENVIRONMENT_HEADER: [&str; 3] = ["time_s", "ambient_c", "solar_wm2"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse every data row into `N` finite numbers, checking the header first.
fn read_table<R: Read, const N: usize>(
    input: R,
    path: &Path,
    header: [&str; N],
) -> Result<Vec<(usize, [f64; N])>> {
    let row_err = |line: usize, reason: String| Error::Row {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let got = rdr
        .headers()
        .map_err(|e| row_err(1, e.to_string()))?
        .clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(row_err(
            1,
            format!(
                "expected header {:?}, found {:?}",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            row_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != N {
            return Err(row_err(
                line,
                format!("expected {N} fields, found {}", rec.len()),
            ));
        }
        let mut vals = [0.0; N];
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                row_err(
                    line,
                    format!("{}: cannot parse {field:?} as a number", header[i]),
                )
            })?;
            if !v.is_finite() {
                return Err(row_err(
                    line,
                    format!("{}: value {field} is not finite", header[i]),
                ));
            }
            vals[i] = v;
        }
        rows.push((line, vals));
    }
    Ok(rows)
}

pub fn read_cycle<R: Read>(input: R, path: &Path, name: &str) -> Result<DriveCycle> {
    let rows = read_table(input, path, CYCLE_HEADER)?;
    let row_err = |line: usize, reason: String| Error::Row {
        path: path.to_path_buf(),
        line,
        reason,
    };
    if rows.is_empty() {
        return Err(Error::Empty(format!(
            "{}: cycle has no rows",
            path.display()
        )));
    }
    let mut prev: Option<f64> = None;
    for &(line, [t, v]) in &rows {
        if v < 0.0 {
            return Err(row_err(line, format!("negative speed {v} km/h")));
        }
        if let Some(p) = prev {
            if t == p {
                return Err(row_err(line, format!("duplicate time stamp {t} s")));
            }
            if t - p != 1.0 {
                return Err(row_err(
                    line,
                    format!("time {t} s does not follow {p} s by exactly 1 s"),
                ));
            }
        }
        prev = Some(t);
    }
    let (time_s, speed_kmh) = rows.iter().map(|(_, [t, v])| (*t, *v)).unzip();
    DriveCycle::new(name, time_s, speed_kmh)
}

/// Load and validate a cycle; the file stem becomes its name.
pub fn load_cycle(path: &Path) -> Result<DriveCycle> {
    let name = path
        .file_stem()
        .map_or_else(|| "cycle".into(), |s| s.to_string_lossy().into_owned());
    read_cycle(open(path)?, path, &name)
}

pub fn read_environment<R: Read>(input: R, path: &Path) -> Result<Vec<WeatherSample>> {
    let rows = read_table(input, path, ENVIRONMENT_HEADER)?;
    if rows.is_empty() {
        return Err(Error::Empty(format!(
            "{}: environment has no rows",
            path.display()
        )));
    }
    let mut prev = f64::NEG_INFINITY;
    let mut out = Vec::with_capacity(rows.len());
    for &(line, [t, ambient_c, solar_wm2]) in &rows {
        let err = |reason: String| Error::Row {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if t < prev {
            return Err(err(format!("time {t} s goes backwards from {prev} s")));
        }
        if solar_wm2 < 0.0 {
            return Err(err(format!("negative solar flux {solar_wm2} W/m2")));
        }
        if !(-50.0..=60.0).contains(&ambient_c) {
            return Err(err(format!("ambient {ambient_c} °C outside [-50, 60]")));
        }
        prev = t;
        out.push(WeatherSample {
            time_s: t,
            ambient_c,
            solar_wm2,
        });
    }
    Ok(out)
}

pub fn load_environment(path: &Path) -> Result<Vec<WeatherSample>> {
    read_environment(open(path)?, path)
}

pub fn write_cycle<W: Write>(cycle: &DriveCycle, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CYCLE_HEADER)?;
    for (t, v) in cycle.time_s.iter().zip(&cycle.speed_kmh) {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn save_cycle(cycle: &DriveCycle, path: &Path) -> Result<()> {
    write_cycle(cycle, create(path)?)
}

pub fn write_environment<W: Write>(weather: &[WeatherSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENVIRONMENT_HEADER)?;
    for s in weather {
        w.write_record([
            s.time_s.to_string(),
            s.ambient_c.to_string(),
            s.solar_wm2.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn save_environment(weather: &[WeatherSample], path: &Path) -> Result<()> {
    write_environment(weather, create(path)?)
}

/// Cycle files named on the command line, with directories expanded to
/// their `*.csv` entries in name order.
pub fn expand_cycle_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|source| Error::Io {
                    path: p.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.extension().is_some_and(|x| x == "csv"))
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("no cycle files given".into()));
    }
    Ok(out)
}

pub fn load_cycles(paths: &[PathBuf]) -> Result<Vec<DriveCycle>> {
    expand_cycle_paths(paths)?
        .iter()
        .map(|p| load_cycle(p))
        .collect()
}
