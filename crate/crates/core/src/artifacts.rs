//! CSV export and import of fields, traces and reconstruction results.
//!
//! Floats are written in shortest round-trip form, so reading an artifact
//! back reproduces the stored values bit for bit.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Grids, ProductState, SpaceSource, SpatialGrid};
use crate::landweber::ReconstructionTrace;
use crate::objective::GradientField;

pub const SPACE_HEADER: [&str; 2] = ["x", "value"];
pub const SPACETIME_HEADER: [&str; 3] = ["t", "x", "value"];
pub const GRADIENT_HEADER: [&str; 2] = ["x", "grad"];
pub const TRACE_HEADER: [&str; 6] = ["k", "alpha", "J", "e", "E", "grad_norm"];
pub const RECOVERED_HEADER: [&str; 3] = ["x", "f_true", "f_rec"];
pub const TABLE_HEADER: [&str; 3] = ["k", "e", "E"];

pub fn format_f64(v: f64) -> String {
    ryu::Buffer::new().format(v).to_owned()
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// Writes `header` followed by `rows`.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_space_csv(path: &Path, grid: &SpatialGrid, values: &[f64]) -> Result<()> {
    crate::error::ensure_len("field", grid.n_nodes(), values.len())?;
    write_csv(
        path,
        &SPACE_HEADER,
        values
            .iter()
            .enumerate()
            .map(|(i, v)| [format_f64(grid.node(i)), format_f64(*v)]),
    )
}

pub fn write_trajectory_csv(path: &Path, grids: &Grids, states: &[ProductState]) -> Result<()> {
    crate::error::ensure_len("time levels", grids.time.n_times(), states.len())?;
    let rows = states.iter().enumerate().flat_map(|(k, s)| {
        let t = format_f64(grids.time.time(k));
        s.values()
            .iter()
            .enumerate()
            .map(move |(i, v)| [t.clone(), format_f64(grids.space.node(i)), format_f64(*v)])
    });
    write_csv(path, &SPACETIME_HEADER, rows)
}

pub fn write_gradient_csv(path: &Path, grid: &SpatialGrid, gradient: &GradientField) -> Result<()> {
    let values = gradient.values.values();
    crate::error::ensure_len("gradient", grid.n_nodes(), values.len())?;
    write_csv(
        path,
        &GRADIENT_HEADER,
        values
            .iter()
            .enumerate()
            .map(|(i, v)| [format_f64(grid.node(i)), format_f64(*v)]),
    )
}

pub fn write_trace_csv(path: &Path, trace: &ReconstructionTrace) -> Result<()> {
    write_csv(
        path,
        &TRACE_HEADER,
        trace.rows.iter().map(|r| {
            [
                r.k.to_string(),
                format_opt(r.alpha),
                format_f64(r.objective),
                format_f64(r.output_error),
                format_opt(r.source_error),
                format_opt(r.grad_norm),
            ]
        }),
    )
}

pub fn write_recovered_csv(
    path: &Path,
    grid: &SpatialGrid,
    truth: Option<&SpaceSource>,
    recovered: &SpaceSource,
) -> Result<()> {
    crate::error::ensure_len("recovered source", grid.n_nodes(), recovered.len())?;
    write_csv(
        path,
        &RECOVERED_HEADER,
        recovered.values().iter().enumerate().map(|(i, v)| {
            [
                format_f64(grid.node(i)),
                format_opt(truth.map(|t| t.values()[i])),
                format_f64(*v),
            ]
        }),
    )
}

/// `e(k)` and `E(k)` for `k = 1..=last_k` (rows beyond the trace are omitted).
pub fn write_table_csv(path: &Path, trace: &ReconstructionTrace, last_k: usize) -> Result<()> {
    write_csv(
        path,
        &TABLE_HEADER,
        trace
            .rows
            .iter()
            .filter(|r| r.k >= 1 && r.k <= last_k)
            .map(|r| [r.k.to_string(), format_f64(r.output_error), format_opt(r.source_error)]),
    )
}

/// A parsed CSV file with a checked header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("no column {name:?}")))
    }

    /// Numeric column with empty cells as `None`.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .map(|r| {
                let cell = r[i].trim();
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::Config(format!("column {name:?}: {cell:?}: {e}")))
                }
            })
            .collect()
    }

    /// Numeric column with every cell present.
    pub fn dense_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .map(|v| v.ok_or_else(|| Error::Config(format!("column {name:?} has empty cells"))))
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<String>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }
}

/// Reads a CSV file and checks that its header is exactly `expected`.
pub fn read_csv(path: &Path, expected: &[&str]) -> Result<CsvTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != expected {
        return Err(csv_error(path, format!("header {header:?}, expected {expected:?}")));
    }
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok(CsvTable { header, rows })
}

/// Reads an `x,value` table and interpolates it linearly onto `grid`.
/// Nodes outside the tabulated range take the nearest end value.
pub fn read_space_table(path: &Path, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let table = read_csv(path, &SPACE_HEADER)?;
    let xs = table.dense_column("x")?;
    let vs = table.dense_column("value")?;
    if xs.is_empty() {
        return Err(csv_error(path, "table has no rows"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(csv_error(path, "x column must be strictly increasing"));
    }
    Ok(grid.sample(|x| {
        let j = xs.partition_point(|xi| *xi <= x);
        if j == 0 {
            vs[0]
        } else if j == xs.len() {
            vs[xs.len() - 1]
        } else {
            let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
            (1.0 - w) * vs[j - 1] + w * vs[j]
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landweber::{StepMode, StopReason, TraceRow};

    #[test]
    fn space_field_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let grid = SpatialGrid::new(1.0, 10).unwrap();
        let values = grid.sample(|x| (3.0 * x).sin() / 7.0);
        write_space_csv(&path, &grid, &values).unwrap();
        let table = read_csv(&path, &SPACE_HEADER).unwrap();
        assert_eq!(table.rows.len(), 11);
        assert_eq!(table.dense_column("value").unwrap(), values);
        assert_eq!(table.dense_column("x").unwrap(), grid.nodes());
        assert!(read_csv(&path, &GRADIENT_HEADER).is_err());
    }

    #[test]
    fn table_interpolates_onto_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "x,value\n0,0\n0.5,1\n1,0\n").unwrap();
        let grid = SpatialGrid::new(1.0, 4).unwrap();
        assert_eq!(read_space_table(&path, &grid).unwrap(), vec![0.0, 0.5, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn trace_leaves_missing_values_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let grid = SpatialGrid::new(1.0, 4).unwrap();
        let trace = ReconstructionTrace {
            rows: vec![
                TraceRow {
                    k: 0,
                    alpha: Some(0.5),
                    objective: 1.0,
                    output_error: 2.0,
                    source_error: None,
                    grad_norm: Some(3.0),
                    step_norm: Some(1.5),
                    distance_to_final: 1.5,
                },
                TraceRow {
                    k: 1,
                    alpha: None,
                    objective: 0.25,
                    output_error: 0.5,
                    source_error: None,
                    grad_norm: None,
                    step_norm: None,
                    distance_to_final: 0.0,
                },
            ],
            final_iterate: SpaceSource::zeros(&grid),
            stop: StopReason::Cap,
            step: StepMode::Adaptive,
        };
        write_trace_csv(&path, &trace).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "k,alpha,J,e,E,grad_norm\n0,0.5,1.0,2.0,,3.0\n1,,0.25,0.5,,\n");
        let table = read_csv(&path, &TRACE_HEADER).unwrap();
        assert_eq!(table.column("alpha").unwrap(), vec![Some(0.5), None]);
    }
}
