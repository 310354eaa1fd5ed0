//! Fixtures shared by the benchmarks.

use ctp_core::{build, make_uniform_grid, closed_form_sequence, BuiltinProblemId, CtpProblem, MultiplierPath, Trajectory};

/// Example 2 iterate `k` on an `n`-node grid (`n` even).
pub fn example2_iterate(n: usize, k: u64) -> (CtpProblem, Trajectory, MultiplierPath) {
    let grid = make_uniform_grid(1.0, n).expect("positive node count");
    let (x, mult) = closed_form_sequence(BuiltinProblemId::Example2, k, &grid).expect("even node count");
    (build(BuiltinProblemId::Example2), x, mult)
}

/// Tracking problem with its analytic primal-dual pair.
pub fn tracking_reference(n: usize) -> (CtpProblem, Trajectory, MultiplierPath) {
    let p = build(BuiltinProblemId::Tracking);
    let grid = make_uniform_grid(1.0, n).expect("positive node count");
    let (x, mult) = p.reference_pair(&grid).expect("tracking has multipliers").expect("finite samples");
    (p, x, mult)
}

pub const NODE_COUNTS: [usize; 3] = [200, 1000, 5000];
