//! Uniform midpoint grids on `[0, T]` and node-valued containers.
//!
//! Every function of time is represented by its values at the midpoint
//! nodes of a uniform partition. Values are piecewise constant between
//! nodes; no interpolation is ever performed.

use serde::{Deserialize, Serialize};

use crate::error::{CtpError, Result};

/// Midpoint discretization of `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds the uniform midpoint grid with `n_nodes` cells on `[0, horizon]`.
pub fn make_uniform_grid(horizon: f64, n_nodes: usize) -> Result<TimeGrid> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(CtpError::InvalidArgument(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if n_nodes == 0 {
        return Err(CtpError::InvalidArgument("grid needs at least one node".into()));
    }
    let h = horizon / n_nodes as f64;
    let nodes = (0..n_nodes).map(|i| (i as f64 + 0.5) * h).collect();
    Ok(TimeGrid {
        horizon,
        nodes,
        weights: vec![h; n_nodes],
    })
}

impl TimeGrid {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cell width `T / n_nodes`.
    pub fn step(&self) -> f64 {
        self.horizon / self.n_nodes() as f64
    }

    /// Midpoint-rule quadrature `Σ w_i f_i`.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.n_nodes() {
            return Err(CtpError::DimensionMismatch {
                what: "quadrature samples".into(),
                expected: self.n_nodes(),
                found: samples.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(samples)
            .map(|(w, f)| w * f)
            .sum())
    }

    /// Index of the dyadic cell at `depth` containing node `i`.
    ///
    /// Exact integer arithmetic: node `i` sits at `(2i + 1) T / (2n)`, so the
    /// cell is `floor((2i + 1) 2^depth / (2n))`. Cells are half-open on the right.
    pub fn dyadic_cell(&self, i: usize, depth: u32) -> usize {
        let n = self.n_nodes() as u128;
        (((2 * i as u128 + 1) << depth) / (2 * n)) as usize
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_nodes() == other.n_nodes() && self.horizon == other.horizon
    }
}

/// Free function form of [`TimeGrid::integrate`].
pub fn integrate(grid: &TimeGrid, samples: &[f64]) -> Result<f64> {
    grid.integrate(samples)
}

/// Row-major `n_nodes × width` table of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTable {
    width: usize,
    data: Vec<f64>,
}

impl NodeTable {
    pub fn zeros(rows: usize, width: usize) -> Self {
        Self {
            width,
            data: vec![0.0; rows * width],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], width: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * width);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != width {
                return Err(CtpError::DimensionMismatch {
                    what: format!("row {i}"),
                    expected: width,
                    found: r.len(),
                });
            }
            if let Some(bad) = r.iter().find(|v| !v.is_finite()) {
                return Err(CtpError::InvalidArgument(format!(
                    "row {i} contains non-finite value {bad}"
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { width, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry, zero when empty.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Piecewise-constant trajectory `t ↦ x(t) ∈ ℝⁿ` stored at grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    grid: TimeGrid,
    values: NodeTable,
    // zero-width tables cannot recover their row count
    n_rows: usize,
}

impl Trajectory {
    pub fn zeros(grid: &TimeGrid, n: usize) -> Self {
        Self {
            grid: grid.clone(),
            values: NodeTable::zeros(grid.n_nodes(), n),
            n_rows: grid.n_nodes(),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(grid: &TimeGrid, n: usize, rows: &[R]) -> Result<Self> {
        if rows.len() != grid.n_nodes() {
            return Err(CtpError::DimensionMismatch {
                what: "trajectory rows".into(),
                expected: grid.n_nodes(),
                found: rows.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values: NodeTable::from_rows(rows, n)?,
            n_rows: grid.n_nodes(),
        })
    }

    /// Samples `f(t_i)` at every node.
    pub fn from_fn(grid: &TimeGrid, n: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::from_rows(grid, n, &rows)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.values.width()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_rows
    }

    pub fn at(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn values(&self) -> &NodeTable {
        &self.values
    }

    /// `max_i ‖x(t_i) − y(t_i)‖_∞`.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(CtpError::GridMismatch);
        }
        if self.dim() != other.dim() {
            return Err(CtpError::DimensionMismatch {
                what: "trajectory dimension".into(),
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .values
            .as_slice()
            .iter()
            .zip(other.values.as_slice())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Pointwise multipliers `u(t) ∈ ℝᵖ` (free) and `v(t) ∈ ℝᵐ`.
///
/// Nonnegativity of `v` is not enforced at construction: residual evaluation
/// must be able to report sign violations of user-supplied data. Use
/// [`MultiplierPath::sign_violation`] or [`MultiplierPath::is_admissible`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierPath {
    grid: TimeGrid,
    u: NodeTable,
    v: NodeTable,
}

impl MultiplierPath {
    pub fn zeros(grid: &TimeGrid, p: usize, m: usize) -> Self {
        Self {
            grid: grid.clone(),
            u: NodeTable::zeros(grid.n_nodes(), p),
            v: NodeTable::zeros(grid.n_nodes(), m),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>, S: AsRef<[f64]>>(
        grid: &TimeGrid,
        p: usize,
        m: usize,
        u_rows: &[R],
        v_rows: &[S],
    ) -> Result<Self> {
        for (what, len) in [("u rows", u_rows.len()), ("v rows", v_rows.len())] {
            if len != grid.n_nodes() {
                return Err(CtpError::DimensionMismatch {
                    what: what.into(),
                    expected: grid.n_nodes(),
                    found: len,
                });
            }
        }
        Ok(Self {
            grid: grid.clone(),
            u: NodeTable::from_rows(u_rows, p)?,
            v: NodeTable::from_rows(v_rows, m)?,
        })
    }

    pub fn from_fn(
        grid: &TimeGrid,
        p: usize,
        m: usize,
        f: impl Fn(f64) -> (Vec<f64>, Vec<f64>),
    ) -> Result<Self> {
        let (u, v): (Vec<_>, Vec<_>) = grid.nodes().iter().map(|&t| f(t)).unzip();
        Self::from_rows(grid, p, m, &u, &v)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.u.width()
    }

    pub fn m(&self) -> usize {
        self.v.width()
    }

    pub fn u_at(&self, i: usize) -> &[f64] {
        if self.u.width() == 0 {
            &[]
        } else {
            self.u.row(i)
        }
    }

    pub fn v_at(&self, i: usize) -> &[f64] {
        if self.v.width() == 0 {
            &[]
        } else {
            self.v.row(i)
        }
    }

    pub fn u(&self) -> &NodeTable {
        &self.u
    }

    pub fn v(&self) -> &NodeTable {
        &self.v
    }

    /// `max_i ‖(u(t_i), v(t_i))‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.u.sup_norm().max(self.v.sup_norm())
    }

    /// `max_{i,j} max(−v_j(t_i), 0)`.
    pub fn sign_violation(&self) -> f64 {
        self.v.as_slice().iter().fold(0.0, |m, &v| if -v > m { -v } else { m })
    }

    pub fn is_admissible(&self) -> bool {
        self.sign_violation() == 0.0
    }
}
