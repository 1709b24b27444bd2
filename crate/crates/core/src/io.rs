//! CSV and JSON file formats.
//!
//! * trajectories: header `t,x1,…,xp`, one sample per row;
//! * series: one value per row with an optional one-line header;
//! * Betti curves: header `epsilon,betti0`.
//!
//! Reals are written with 17 significant digits so files round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::embedding::Series;
use crate::{BettiCurve, Error, PointCloud, Result, TimeGrid, Trajectory};

/// Formats a real so that parsing it back yields the same bits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(BufWriter::new(f))
}

fn parse_real(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("'{field}' is not finite"),
        });
    }
    Ok(v)
}

/// Numeric rows of a CSV document with an optional header line.
struct Table {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn read_table(mut input: impl Read) -> Result<Table> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(k + 1),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(k + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if k == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row = record
            .iter()
            .map(|f| parse_real(f, line))
            .collect::<Result<Vec<f64>>>()?;
        let expected = *width.get_or_insert(row.len());
        if row.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} fields, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn series_from_reader(input: impl Read) -> Result<Series> {
    let table = read_table(input)?;
    if let Some(row) = table.rows.first() {
        if row.len() != 1 {
            return Err(Error::Parse {
                line: 1 + usize::from(table.header.is_some()),
                message: format!("expected one value per row, found {}", row.len()),
            });
        }
    }
    let label = table
        .header
        .and_then(|h| h.into_iter().next())
        .unwrap_or_else(|| "value".to_string());
    Series::with_label(table.rows.into_iter().map(|r| r[0]).collect(), label)
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Series> {
    series_from_reader(open(path.as_ref())?)
}

pub fn series_to_writer(s: &Series, mut out: impl Write) -> Result<()> {
    writeln!(out, "{}", s.label())?;
    for v in s.values() {
        writeln!(out, "{}", fmt_real(*v))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_series_csv(s: &Series, path: impl AsRef<Path>) -> Result<()> {
    series_to_writer(s, create(path.as_ref())?)
}

pub fn trajectory_to_writer(traj: &Trajectory, mut out: impl Write) -> Result<()> {
    let cols: Vec<String> = (1..=traj.dim()).map(|d| format!("x{d}")).collect();
    writeln!(out, "t,{}", cols.join(","))?;
    let grid = traj.grid();
    for (n, row) in traj.points().rows().enumerate() {
        let mut line = fmt_real(grid.time(n));
        for v in row {
            line.push(',');
            line.push_str(&fmt_real(*v));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    trajectory_to_writer(traj, create(path.as_ref())?)
}

/// Reads a trajectory file. The time step is taken from the first two rows
/// and every later time stamp must agree with it.
pub fn trajectory_from_reader(input: impl Read) -> Result<Trajectory> {
    let table = read_table(input)?;
    let width = table.rows.first().map(|r| r.len()).unwrap_or(0);
    if width < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "a trajectory needs a time column and at least one coordinate".into(),
        });
    }
    if table.rows.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "a trajectory needs at least 2 rows".into(),
        });
    }
    let t0 = table.rows[0][0];
    let dt = table.rows[1][0] - t0;
    let skip = usize::from(table.header.is_some());
    for (n, row) in table.rows.iter().enumerate() {
        let want = t0 + n as f64 * dt;
        if (row[0] - want).abs() > 1e-9 * (1.0 + want.abs()) {
            return Err(Error::Parse {
                line: n + 1 + skip,
                message: format!("time {} breaks the uniform step {dt}", row[0]),
            });
        }
    }
    let coords = table.rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
    let grid = TimeGrid::new(t0, dt, table.rows.len())?;
    Trajectory::new(PointCloud::new(width - 1, coords)?, grid)
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    trajectory_from_reader(open(path.as_ref())?)
}

/// Reads a point cloud: a trajectory file (its `t` column is dropped) or a
/// plain numeric CSV.
pub fn points_from_reader(input: impl Read) -> Result<PointCloud> {
    let table = read_table(input)?;
    let drop_time = table
        .header
        .as_ref()
        .and_then(|h| h.first())
        .is_some_and(|c| c == "t");
    let first = usize::from(drop_time);
    let width = table.rows.first().map(|r| r.len()).unwrap_or(0);
    if width <= first {
        return Err(Error::Parse {
            line: 1,
            message: "no coordinate columns".into(),
        });
    }
    let coords = table.rows.iter().flat_map(|r| r[first..].iter().copied()).collect();
    PointCloud::new(width - first, coords)
}

pub fn read_points_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    points_from_reader(open(path.as_ref())?)
}

pub fn betti_to_writer(curve: &BettiCurve, mut out: impl Write) -> Result<()> {
    writeln!(out, "epsilon,betti0")?;
    for (r, c) in curve.radii().iter().zip(curve.counts()) {
        writeln!(out, "{},{c}", fmt_real(*r))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_betti_csv(curve: &BettiCurve, path: impl AsRef<Path>) -> Result<()> {
    betti_to_writer(curve, create(path.as_ref())?)
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
