//! Built-in problems: two degenerate counterexamples with explicit AKKT
//! sequences, and a regular tracking problem with a closed-form KKT pair.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CtpError, Result};
use crate::grid::{MultiplierPath, TimeGrid, Trajectory};
use crate::problem::{CtpProblem, ReferenceSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinProblemId {
    /// `min ∫ x₂  s.t.  x₁x₂ = 0, −x₁ ≤ 0` on `[0, 1]`. The point `(0, 1)` is
    /// pw-AKKT but neither optimal nor KKT.
    Example1,
    /// `min ∫ (t − ½)x₁  s.t.  −(t − ½)x₁³ + x₂ ≤ 0, −x₂ ≤ 0` on `[0, 1]`. The
    /// optimum `(0, 0)` admits no KKT multipliers.
    Example2,
    /// `min ∫ ½(x − (t − ½))²  s.t.  x ≤ 0` on `[0, 1]`, regular with constant
    /// constraint gradient.
    Tracking,
}

impl BuiltinProblemId {
    pub const ALL: [BuiltinProblemId; 3] = [Self::Example1, Self::Example2, Self::Tracking];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Tracking => "tracking",
        }
    }

    /// Whether [`closed_form_sequence`] has a closed form for this problem.
    pub fn has_sequence(self) -> bool {
        !matches!(self, Self::Tracking)
    }
}

impl fmt::Display for BuiltinProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuiltinProblemId {
    type Err = CtpError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                CtpError::InvalidArgument(format!(
                    "unknown problem `{s}` (expected one of example1, example2, tracking)"
                ))
            })
    }
}

fn row(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v)
}

pub fn build(id: BuiltinProblemId) -> CtpProblem {
    let problem = match id {
        BuiltinProblemId::Example1 => CtpProblem::builder("example1", 2, 1.0)
            .objective(|x, _| x[1], |_, _| vec![0.0, 1.0])
            .equalities(1, |x, _| vec![x[0] * x[1]], |x, _| row(&[x[1], x[0]]))
            .inequalities(1, |x, _| vec![-x[0]], |_, _| row(&[-1.0, 0.0]))
            .reference(ReferenceSolution {
                x: Arc::new(|_| vec![0.0, 1.0]),
                multipliers: None,
            }),
        BuiltinProblemId::Example2 => CtpProblem::builder("example2", 2, 1.0)
            .objective(|x, t| (t - 0.5) * x[0], |_, t| vec![t - 0.5, 0.0])
            .inequalities(
                2,
                |x, t| vec![-(t - 0.5) * x[0].powi(3) + x[1], -x[1]],
                |x, t| {
                    DMatrix::from_row_slice(
                        2,
                        2,
                        &[-3.0 * (t - 0.5) * x[0] * x[0], 1.0, 0.0, -1.0],
                    )
                },
            )
            .reference(ReferenceSolution {
                x: Arc::new(|_| vec![0.0, 0.0]),
                multipliers: None,
            }),
        BuiltinProblemId::Tracking => CtpProblem::builder("tracking", 1, 1.0)
            .objective(
                |x, t| 0.5 * (x[0] - (t - 0.5)).powi(2),
                |x, t| vec![x[0] - (t - 0.5)],
            )
            .inequalities(1, |x, _| vec![x[0]], |_, _| row(&[1.0]))
            .reference(ReferenceSolution {
                x: Arc::new(|t| vec![(t - 0.5).min(0.0)]),
                multipliers: Some((Arc::new(|_| Vec::new()), Arc::new(|t| vec![(t - 0.5).max(0.0)]))),
            }),
    };
    problem.build().expect("built-in problems are well formed")
}

/// Notes attached to reports produced from [`closed_form_sequence`] iterates.
pub fn sequence_notes(id: BuiltinProblemId) -> Vec<String> {
    match id {
        BuiltinProblemId::Example2 => vec![
            "example2 multipliers k²/(3(t−1/2)²) are unbounded near t = 1/2 and not essentially \
             bounded on [0,1]; sampled on a midpoint grid that excludes t = 1/2"
                .into(),
        ],
        _ => Vec::new(),
    }
}

/// Samples the closed-form AKKT sequence of a counterexample at index `k`.
pub fn closed_form_sequence(
    id: BuiltinProblemId,
    k: u64,
    grid: &TimeGrid,
) -> Result<(Trajectory, MultiplierPath)> {
    if k == 0 {
        return Err(CtpError::InvalidArgument("sequence index k must be positive".into()));
    }
    let kf = k as f64;
    match id {
        BuiltinProblemId::Example1 => {
            let x = Trajectory::from_fn(grid, 2, |_| vec![-1.0 / kf, 1.0])?;
            let mult = MultiplierPath::from_fn(grid, 1, 1, |_| (vec![kf], vec![kf]))?;
            Ok((x, mult))
        }
        BuiltinProblemId::Example2 => {
            let mid = 0.5 * grid.horizon();
            if let Some(i) = grid.nodes().iter().position(|t| (t - mid).abs() <= 1e-12 * grid.horizon()) {
                return Err(CtpError::InvalidArgument(format!(
                    "example2 multipliers are singular at t = 1/2, which is grid node {i}; use an even node count"
                )));
            }
            let x = Trajectory::from_fn(grid, 2, |t| vec![(t - 0.5) / kf, 0.0])?;
            let mult = MultiplierPath::from_fn(grid, 0, 2, |t| {
                let v = kf * kf / (3.0 * (t - 0.5).powi(2));
                (Vec::new(), vec![v, v])
            })?;
            Ok((x, mult))
        }
        BuiltinProblemId::Tracking => Err(CtpError::Unsupported(
            "tracking has no closed-form AKKT sequence".into(),
        )),
    }
}
