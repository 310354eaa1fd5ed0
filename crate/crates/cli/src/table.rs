//! Plain-text node tables: one line per node, whitespace-separated, node
//! time first. Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;

use ctp_core::{MultiplierPath, TimeGrid, Trajectory};

/// Allowed mismatch between a file's time column and the grid node.
pub const TIME_TOL: f64 = 1e-12;

/// Parsed rows, each without its time column.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRows {
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse(text: &str, width: usize) -> Result<NodeRows, String> {
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = rows.len();
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != width + 1 {
            return Err(format!(
                "row {row}: expected {} columns (time + {width}), found {}",
                width + 1,
                fields.len()
            ));
        }
        let mut values = Vec::with_capacity(width + 1);
        for f in fields {
            let v: f64 = f.parse().map_err(|_| format!("row {row}: cannot parse {f:?} as a number"))?;
            if !v.is_finite() {
                return Err(format!("row {row}: non-finite value {f}"));
            }
            values.push(v);
        }
        times.push(values[0]);
        rows.push(values.split_off(1));
    }
    if rows.is_empty() {
        return Err("table has no rows".into());
    }
    Ok(NodeRows { times, rows })
}

/// Checks the time column against `grid`, naming the first offending row.
pub fn check_times(table: &NodeRows, grid: &TimeGrid) -> Result<(), String> {
    if table.times.len() != grid.n_nodes() {
        return Err(format!(
            "row {}: table has {} rows but the grid has {} nodes",
            table.times.len().min(grid.n_nodes()),
            table.times.len(),
            grid.n_nodes()
        ));
    }
    for (i, (t, node)) in table.times.iter().zip(grid.nodes()).enumerate() {
        if (t - node).abs() > TIME_TOL {
            return Err(format!("row {i}: time {t:?} does not match grid node {node:?}"));
        }
    }
    Ok(())
}

fn write_rows<'a>(grid: &TimeGrid, rows: impl Iterator<Item = Vec<&'a f64>>) -> String {
    let mut out = String::new();
    for (t, row) in grid.nodes().iter().zip(rows) {
        let _ = write!(out, "{t:?}");
        for v in row {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(x: &Trajectory) -> String {
    write_rows(x.grid(), (0..x.n_nodes()).map(|i| x.at(i).iter().collect()))
}

/// Multiplier table: `u` columns, then `v` columns.
pub fn write_multipliers(mult: &MultiplierPath) -> String {
    let n = mult.grid().n_nodes();
    write_rows(mult.grid(), (0..n).map(|i| mult.u_at(i).iter().chain(mult.v_at(i)).collect()))
}
