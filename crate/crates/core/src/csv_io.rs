//! CSV emission and parsing for trajectory logs and snapshots.
//!
//! Floats are written with Rust's shortest round-trip formatting, so an
//! emitted log parses back bit-identical.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::monitor::{LogRow, Snapshot, TrajectoryLog};
use crate::{Error, Result};

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "V1", "V2", "theta1_hat", "theta2_hat", "u1", "u2"];

pub fn write_trajectory<W: Write>(log: &TrajectoryLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in &log.rows {
        w.write_record(
            [r.t, r.v1, r.v2, r.theta1_hat, r.theta2_hat, r.u1, r.u2]
                .iter()
                .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    write_trajectory(log, std::io::BufWriter::new(file))
}

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: '{field}' is not a number")))
}

pub fn read_trajectory<R: Read>(input: R) -> Result<TrajectoryLog> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != TRAJECTORY_HEADER {
        return Err(Error::Parse(format!(
            "unexpected header {header:?}, want {TRAJECTORY_HEADER:?}"
        )));
    }
    let mut log = TrajectoryLog::default();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let v: Vec<f64> = rec
            .iter()
            .map(|f| parse_f64(f, line))
            .collect::<Result<_>>()?;
        if let Some(prev) = log.rows.last() {
            if !(v[0] > prev.t) {
                return Err(Error::Parse(format!("line {line}: time does not increase")));
            }
        }
        log.rows.push(LogRow {
            t: v[0],
            v1: v[1],
            v2: v[2],
            theta1_hat: v[3],
            theta2_hat: v[4],
            u1: v[5],
            u2: v[6],
        });
    }
    Ok(log)
}

pub fn parse_csv(path: &Path) -> Result<TrajectoryLog> {
    read_trajectory(fs::File::open(path)?)
}

pub fn write_snapshot<W: Write>(snap: &Snapshot, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "u"])?;
    for (x, u) in snap.x.iter().zip(&snap.u) {
        w.write_record([x.to_string(), u.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Write `snapshot_<index>.csv` for every snapshot plus `snapshot_times.csv`.
pub fn emit_snapshots(log: &TrajectoryLog, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(log.snapshots.len());
    let mut times = csv::Writer::from_path(dir.join("snapshot_times.csv"))?;
    times.write_record(["index", "t"])?;
    for (i, s) in log.snapshots.iter().enumerate() {
        let p = dir.join(format!("snapshot_{i}.csv"));
        write_snapshot(s, std::io::BufWriter::new(fs::File::create(&p)?))?;
        times.write_record([i.to_string(), s.t.to_string()])?;
        paths.push(p);
    }
    times.flush()?;
    Ok(paths)
}
