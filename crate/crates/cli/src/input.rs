//! Reading input files and turning series into state-space trajectories.

use std::path::{Path, PathBuf};

use pexp::embedding::{
    select_delay_ami, select_dim_fnn, sliding_window_embed, AmiParams, DelaySelection,
    DimensionSelection,
};
use pexp::io::{points_from_reader, series_from_reader, trajectory_from_reader};
use pexp::{EmbeddingParams, Series, TimeGrid, Trajectory};
use serde::Serialize;

use crate::args::{Input, Output};
use crate::merge::read_text;
use crate::{CliError, CliResult};

const DEFAULT_MAX_TAU: usize = 100;
const DEFAULT_MAX_DIM: usize = 10;
const DEFAULT_FNN_THRESHOLD: f64 = 0.1;

pub fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::usage(format!("{flag} is required (as a flag or in --config)")))
}

pub fn out_path(output: &Output) -> CliResult<&Path> {
    required(&output.out, "--out")
}

/// True when `path` should be written as JSON.
pub fn wants_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// The contents of an input file.
pub enum Loaded {
    Series(Series),
    /// Multi-column data; the grid is the file's time column, or unit steps
    /// when it has none.
    Trajectory(Trajectory),
}

pub fn load(path: &Path) -> CliResult<Loaded> {
    let text = read_text(path)?;
    let at = |e: pexp::Error| match e {
        pexp::Error::Parse { line, message } => pexp::Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    };
    let has_time = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| l.split(',').next())
        .is_some_and(|c| c.trim() == "t");
    if has_time {
        let traj = trajectory_from_reader(text.as_bytes()).map_err(at)?;
        if traj.dim() == 1 {
            return Ok(Loaded::Series(Series::from_component(&traj, 0)?));
        }
        return Ok(Loaded::Trajectory(traj));
    }
    let points = points_from_reader(text.as_bytes()).map_err(at)?;
    if points.dim() == 1 {
        return Ok(Loaded::Series(
            series_from_reader(text.as_bytes()).map_err(at)?,
        ));
    }
    let grid = TimeGrid::unit(points.len())?;
    Ok(Loaded::Trajectory(Trajectory::new(points, grid)?))
}

/// A univariate series: the file itself, or one column of it.
pub fn load_series(path: &Path, column: Option<usize>) -> CliResult<Series> {
    match (load(path)?, column) {
        (Loaded::Series(s), None | Some(1)) => Ok(s),
        (Loaded::Series(_), Some(k)) => Err(CliError::usage(format!(
            "--column {k} requested but {} has a single column",
            path.display()
        ))),
        (Loaded::Trajectory(t), None) => Err(CliError::usage(format!(
            "{} has {} columns; pick one with --column",
            path.display(),
            t.dim()
        ))),
        (Loaded::Trajectory(t), Some(k)) => {
            if k == 0 || k > t.dim() {
                return Err(CliError::usage(format!(
                    "--column must lie in 1..={}, got {k}",
                    t.dim()
                )));
            }
            Ok(Series::from_component(&t, k - 1)?)
        }
    }
}

/// How an embedding was obtained.
#[derive(Debug, Serialize)]
pub struct EmbeddingReport {
    pub tau: usize,
    pub dim: usize,
    pub delay_selection: Option<DelaySelection>,
    pub dimension_selection: Option<DimensionSelection>,
}

impl EmbeddingReport {
    pub fn describe(&self) -> String {
        let how = |auto: bool, method: &str| {
            if auto {
                format!(" ({method})")
            } else {
                String::new()
            }
        };
        let mut text = format!(
            "tau = {}{}, M = {}{}",
            self.tau,
            how(self.delay_selection.is_some(), "AMI"),
            self.dim,
            how(self.dimension_selection.is_some(), "FNN")
        );
        let notes = [
            self.delay_selection
                .as_ref()
                .and_then(|d| d.note.as_deref()),
            self.dimension_selection
                .as_ref()
                .and_then(|d| d.note.as_deref()),
        ];
        for note in notes.into_iter().flatten() {
            text.push_str(&format!(" [warning: {note}]"));
        }
        text
    }
}

/// Chooses missing embedding parameters and embeds `s`.
pub fn embed(s: &Series, input: &Input) -> CliResult<(Trajectory, EmbeddingReport)> {
    let delay_selection = match input.tau {
        Some(_) => None,
        None => {
            let max_tau = input
                .max_tau
                .unwrap_or_else(|| DEFAULT_MAX_TAU.min(s.len() / 4).max(2));
            Some(select_delay_ami(s, &AmiParams::new(max_tau))?)
        }
    };
    let tau = input
        .tau
        .or(delay_selection.as_ref().map(|d| d.tau))
        .expect("tau given or selected");
    let dimension_selection = match input.dim {
        Some(_) => None,
        None => Some(select_dim_fnn(
            s,
            tau,
            input.max_dim.unwrap_or(DEFAULT_MAX_DIM),
            input.fnn_threshold.unwrap_or(DEFAULT_FNN_THRESHOLD),
        )?),
    };
    let dim = input
        .dim
        .or(dimension_selection.as_ref().map(|d| d.dim))
        .expect("dim given or selected");
    let x = sliding_window_embed(s, &EmbeddingParams::new(tau, dim)?)?;
    Ok((
        x,
        EmbeddingReport {
            tau,
            dim,
            delay_selection,
            dimension_selection,
        },
    ))
}

/// The state-space trajectory an exponent is computed on.
///
/// Multi-column files are used as they are unless `--column` (or an
/// embedding flag) asks for one of their columns to be embedded. Series
/// are always embedded.
pub fn state_space(input: &Input) -> CliResult<(Trajectory, Option<EmbeddingReport>)> {
    let path = required(&input.input, "--in")?;
    let wants_embedding = input.column.is_some() || input.tau.is_some() || input.dim.is_some();
    match load(path)? {
        Loaded::Trajectory(t) if !wants_embedding => Ok((t, None)),
        Loaded::Trajectory(t) => {
            let k = input.column.ok_or_else(|| {
                CliError::usage(format!(
                    "{} has {} columns; pick the series to embed with --column",
                    path.display(),
                    t.dim()
                ))
            })?;
            if k == 0 || k > t.dim() {
                return Err(CliError::usage(format!(
                    "--column must lie in 1..={}, got {k}",
                    t.dim()
                )));
            }
            let s = Series::from_component(&t, k - 1)?;
            let (x, report) = embed(&s, input)?;
            // Keep the file's time step so rates can be given per time unit.
            let grid = TimeGrid::new(t.grid().t0, t.grid().dt, x.len())?;
            Ok((Trajectory::new(x.into_points(), grid)?, Some(report)))
        }
        Loaded::Series(s) => {
            let (x, report) = embed(&s, input)?;
            Ok((x, Some(report)))
        }
    }
}

/// Parses a two-element `lo,hi` list.
pub fn window(values: &[f64], flag: &str) -> CliResult<pexp::FitWindow> {
    match values {
        [lo, hi] => Ok(pexp::FitWindow::new(*lo, *hi)?),
        _ => Err(CliError::usage(format!(
            "{flag} takes exactly two values, lo,hi"
        ))),
    }
}

pub fn averaging(name: Option<&str>) -> CliResult<pexp::exponents::Averaging> {
    use pexp::exponents::Averaging;
    match name {
        None | Some("log_of_mean") => Ok(Averaging::LogOfMean),
        Some("mean_of_log") => Ok(Averaging::MeanOfLog),
        Some(other) => Err(CliError::usage(format!(
            "unknown averaging '{other}' (expected log_of_mean or mean_of_log)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn files_are_classified_by_shape() {
        let series = file("x\n1\n2\n3\n");
        assert!(matches!(load(series.path()).unwrap(), Loaded::Series(s) if s.label() == "x"));
        let traj = file("t,x1,x2\n0,1,2\n0.5,3,4\n1,5,6\n");
        match load(traj.path()).unwrap() {
            Loaded::Trajectory(t) => assert_eq!(t.grid().dt, 0.5),
            _ => panic!("expected a trajectory"),
        }
        let cloud = file("1,2\n3,4\n");
        assert!(matches!(load(cloud.path()).unwrap(), Loaded::Trajectory(t) if t.grid().dt == 1.0));
    }

    #[test]
    fn columns_are_one_based() {
        let traj = file("t,x1,x2\n0,1,2\n1,3,4\n2,5,6\n");
        let s = load_series(traj.path(), Some(2)).unwrap();
        assert_eq!(s.values(), &[2.0, 4.0, 6.0]);
        assert!(load_series(traj.path(), Some(3)).is_err());
        assert!(load_series(traj.path(), None).is_err());
    }

    #[test]
    fn explicit_embedding_skips_selection() {
        let values: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let s = Series::new(values).unwrap();
        let input = Input {
            tau: Some(2),
            dim: Some(3),
            ..Default::default()
        };
        let (x, report) = embed(&s, &input).unwrap();
        assert_eq!(x.len(), 46);
        assert!(report.delay_selection.is_none() && report.dimension_selection.is_none());
        assert_eq!(report.describe(), "tau = 2, M = 3");
    }
}
