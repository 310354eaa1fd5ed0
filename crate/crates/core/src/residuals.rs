//! KKT and asymptotic-KKT residuals.
//!
//! Complementarity is always measured in the `v_j · g_j⁻` form, where
//! `g⁻ = max(−g, 0)` is the slack of a satisfied constraint. For feasible
//! points this equals `|v_j g_j|`; at infeasible points a violated
//! constraint contributes nothing.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CtpError, Result};
use crate::grid::{MultiplierPath, TimeGrid, Trajectory};
use crate::nnls::solve_nnls_with_free;
use crate::problem::CtpProblem;

/// Deepest level of dyadic subintervals in the weak-stationarity dictionary.
pub const WEAK_DICTIONARY_DEPTH: u32 = 4;
/// Default tolerance for declaring a KKT point.
pub const DEFAULT_KKT_TOL: f64 = 1e-6;
/// Default slack level above which a constraint counts as inactive.
pub const DEFAULT_COMP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `∫ ‖∇ₓL‖₁ dt`; also the value of the test function `γ = sign(∇ₓL)`.
    pub stationarity_l1: f64,
    /// `max |∫_S ∂ₓ꜀L dt|` over coordinates `c` and dyadic cells `S` of depth ≤ 4.
    pub stationarity_weak_max: f64,
    /// `max_{i,j} v_j(t_i) g_j⁻(x(t_i), t_i)`
    pub comp_sup: f64,
    /// `∫ max_j v_j g_j⁻ dt`
    pub comp_integral: f64,
    pub feas_eq_sup: f64,
    pub feas_ineq_sup: f64,
    /// `max_{i,j} max(−v_j(t_i), 0)`
    pub sign_violation: f64,
    /// `‖∇ₓL(t_i)‖₁` per node.
    pub per_node_stationarity: Vec<f64>,
}

impl ResidualReport {
    /// Largest of the fields that must vanish at a KKT point.
    pub fn kkt_measure(&self) -> f64 {
        self.stationarity_l1
            .max(self.comp_sup)
            .max(self.feas_eq_sup)
            .max(self.feas_ineq_sup)
            .max(self.sign_violation)
    }

    pub fn is_kkt(&self, tol: f64) -> bool {
        self.kkt_measure() <= tol
    }
}

/// `max(−g_j(x, t), 0)` componentwise.
pub fn g_minus(problem: &CtpProblem, x: &[f64], t: f64) -> Result<Vec<f64>> {
    Ok(problem.g_at(x, t)?.into_iter().map(|g| (-g).max(0.0)).collect())
}

/// `∇ₓφ + ∇ₓhᵀu + ∇ₓgᵀv`.
pub fn lagrangian_gradient(
    problem: &CtpProblem,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    check_len("u", problem.p(), u.len())?;
    check_len("v", problem.m(), v.len())?;
    let mut grad = DVector::from_vec(problem.grad_phi_at(x, t)?);
    if problem.p() > 0 {
        grad += problem.jac_h_at(x, t)?.tr_mul(&DVector::from_column_slice(u));
    }
    if problem.m() > 0 {
        grad += problem.jac_g_at(x, t)?.tr_mul(&DVector::from_column_slice(v));
    }
    Ok(grad.as_slice().to_vec())
}

/// Scalar Lagrangian `φ + uᵀh + vᵀg`.
pub fn lagrangian(problem: &CtpProblem, x: &[f64], u: &[f64], v: &[f64], t: f64) -> Result<f64> {
    check_len("u", problem.p(), u.len())?;
    check_len("v", problem.m(), v.len())?;
    let h = problem.h_at(x, t)?;
    let g = problem.g_at(x, t)?;
    Ok(problem.phi_at(x, t)?
        + h.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
        + g.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(CtpError::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        });
    }
    Ok(())
}

struct NodeResidual {
    grad: Vec<f64>,
    comp: f64,
    feas_eq: f64,
    feas_ineq: f64,
}

fn node_residual(
    problem: &CtpProblem,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    t: f64,
) -> Result<NodeResidual> {
    let grad = lagrangian_gradient(problem, x, u, v, t)?;
    let g = problem.g_at(x, t)?;
    let h = problem.h_at(x, t)?;
    let comp = g
        .iter()
        .zip(v)
        .map(|(g, v)| v * (-g).max(0.0))
        .fold(0.0, f64::max);
    Ok(NodeResidual {
        grad,
        comp,
        feas_eq: h.iter().fold(0.0, |m, h| m.max(h.abs())),
        feas_ineq: g.iter().fold(0.0, |m: f64, g| m.max(*g)),
    })
}

/// Largest `|∫_S ∂_c L dt|` over coordinates and dyadic cells of depth ≤ 4.
///
/// Each test function has sup-norm one, so the result never exceeds the L¹
/// norm of the gradient.
pub fn weak_stationarity(grid: &TimeGrid, grads: &[Vec<f64>]) -> f64 {
    let n = grads.first().map_or(0, Vec::len);
    let w = grid.weights();
    let mut best: f64 = 0.0;
    let mut sums = Vec::new();
    for depth in 0..=WEAK_DICTIONARY_DEPTH {
        let cells = 1usize << depth;
        sums.clear();
        sums.resize(cells * n, 0.0);
        for (i, gi) in grads.iter().enumerate() {
            let c = grid.dyadic_cell(i, depth);
            for (k, gk) in gi.iter().enumerate() {
                sums[c * n + k] += w[i] * gk;
            }
        }
        best = sums.iter().fold(best, |m, s| m.max(s.abs()));
    }
    best
}

fn check_pair(problem: &CtpProblem, x: &Trajectory, mult: &MultiplierPath) -> Result<()> {
    problem.check_trajectory(x)?;
    problem.check_multipliers(mult)?;
    if !x.grid().same_as(mult.grid()) {
        return Err(CtpError::GridMismatch);
    }
    Ok(())
}

/// Evaluates every KKT residual of `(x, u, v)` on the grid of `x`.
///
/// Negative inequality multipliers are reported through `sign_violation`
/// rather than rejected.
pub fn kkt_residual(problem: &CtpProblem, x: &Trajectory, mult: &MultiplierPath) -> Result<ResidualReport> {
    check_pair(problem, x, mult)?;
    let grid = x.grid();
    let nodes = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            node_residual(problem, x.at(i), mult.u_at(i), mult.v_at(i), t).map_err(|e| e.at_node(i))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_node_stationarity: Vec<f64> = nodes
        .iter()
        .map(|r| r.grad.iter().map(|g| g.abs()).sum())
        .collect();
    let comp: Vec<f64> = nodes.iter().map(|r| r.comp).collect();
    let grads: Vec<Vec<f64>> = nodes.iter().map(|r| r.grad.clone()).collect();
    Ok(ResidualReport {
        stationarity_l1: grid.integrate(&per_node_stationarity)?,
        stationarity_weak_max: weak_stationarity(grid, &grads),
        comp_sup: comp.iter().copied().fold(0.0, f64::max),
        comp_integral: grid.integrate(&comp)?,
        feas_eq_sup: nodes.iter().map(|r| r.feas_eq).fold(0.0, f64::max),
        feas_ineq_sup: nodes.iter().map(|r| r.feas_ineq).fold(0.0, f64::max),
        sign_violation: mult.sign_violation(),
        per_node_stationarity,
    })
}

/// Distance from `−∇ₓφ` to the multiplier cone at a point, node by node.
#[derive(Debug, Clone, PartialEq)]
pub struct MinStationarity {
    /// `∫ min ‖∇ₓφ + ∇ₓhᵀu + ∇ₓgᵀv‖₂ dt`
    pub value: f64,
    pub per_node: Vec<f64>,
    /// Minimizing multipliers; `v = 0` on constraints with slack above `comp_tol`.
    pub argmin: MultiplierPath,
    /// Set when `x` violates a constraint by more than `comp_tol`; the value is
    /// still computed but no longer certifies anything.
    pub infeasible: bool,
}

/// Per-node minimal stationarity over admissible multipliers.
///
/// Returns the residual norm and `(u, v)` at one node.
pub fn min_stationarity_at(
    problem: &CtpProblem,
    x: &[f64],
    t: f64,
    comp_tol: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (p, m, n) = (problem.p(), problem.m(), problem.n());
    let grad_phi = DVector::from_vec(problem.grad_phi_at(x, t)?);
    let g = problem.g_at(x, t)?;
    let active: Vec<usize> = (0..m).filter(|&j| (-g[j]).max(0.0) <= comp_tol).collect();
    let jac_h = problem.jac_h_at(x, t)?;
    let jac_g = problem.jac_g_at(x, t)?;

    let mut a = DMatrix::zeros(n, p + active.len());
    a.columns_mut(0, p).copy_from(&jac_h.transpose());
    for (k, &j) in active.iter().enumerate() {
        a.column_mut(p + k).copy_from(&jac_g.row(j).transpose());
    }
    let sol = solve_nnls_with_free(&a, &(-&grad_phi), p).map_err(|_| CtpError::NnlsNonConvergence {
        node: usize::MAX,
    })?;
    let u = sol.z.rows(0, p).iter().copied().collect();
    let mut v = vec![0.0; m];
    for (k, &j) in active.iter().enumerate() {
        v[j] = sol.z[p + k];
    }
    Ok((sol.residual_norm, u, v))
}

/// Integrated distance from `−∇ₓφ(x(·), ·)` to the set of admissible
/// multiplier combinations. Zero (to tolerance) exactly at KKT points.
pub fn min_kkt_stationarity(problem: &CtpProblem, x: &Trajectory, comp_tol: f64) -> Result<MinStationarity> {
    problem.check_trajectory(x)?;
    let grid = x.grid();
    let per_node = grid
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            min_stationarity_at(problem, x.at(i), t, comp_tol).map_err(|e| match e {
                CtpError::NnlsNonConvergence { .. } => CtpError::NnlsNonConvergence { node: i },
                other => other.at_node(i),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = per_node.iter().map(|r| r.0).collect();
    let (u, v): (Vec<_>, Vec<_>) = per_node.into_iter().map(|(_, u, v)| (u, v)).unzip();
    let argmin = MultiplierPath::from_rows(grid, problem.p(), problem.m(), &u, &v)?;
    let feas = crate::problem::feasibility(problem, x)?;
    Ok(MinStationarity {
        value: grid.integrate(&norms)?,
        per_node: norms,
        argmin,
        infeasible: feas.eq_sup.max(feas.ineq_sup) > comp_tol,
    })
}

/// One residual report per iterate, in order.
pub fn akkt_sequence_report(
    problem: &CtpProblem,
    iterates: &[(Trajectory, MultiplierPath)],
) -> Result<Vec<ResidualReport>> {
    let (first, _) = iterates.first().ok_or(CtpError::EmptySequence)?;
    iterates
        .iter()
        .map(|(x, mult)| {
            if !x.grid().same_as(first.grid()) {
                return Err(CtpError::GridMismatch);
            }
            kkt_residual(problem, x, mult)
        })
        .collect()
}

/// Whether an iterate sequence looks like a pointwise AKKT sequence for `limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AkktTrend {
    pub tol: f64,
    pub weak_stationarity_ok: bool,
    pub complementarity_ok: bool,
    pub sign_ok: bool,
    /// `max_i ‖x^k(t_i) − x̄(t_i)‖_∞` per iterate.
    pub distances: Vec<f64>,
    pub distances_nonincreasing: bool,
    /// Every iterate lies within the locality radius of `limit` at every node.
    pub inside_locality: bool,
    pub certified: bool,
}

/// Checks the final report against `tol` and the primal iterates against
/// `limit`: distances must be nonincreasing and end strictly below where
/// they started (or at zero), and every node must stay inside `B_r(t)`.
pub fn akkt_trend(
    problem: &CtpProblem,
    iterates: &[(Trajectory, MultiplierPath)],
    reports: &[ResidualReport],
    limit: &Trajectory,
    tol: f64,
) -> Result<AkktTrend> {
    let last = reports.last().ok_or(CtpError::EmptySequence)?;
    if reports.len() != iterates.len() {
        return Err(CtpError::DimensionMismatch {
            what: "reports vs iterates".into(),
            expected: iterates.len(),
            found: reports.len(),
        });
    }
    let r = problem.locality_radius();
    let mut distances = Vec::with_capacity(iterates.len());
    let mut inside_locality = true;
    for (x, _) in iterates {
        distances.push(x.sup_distance(limit)?);
        if r.is_finite() {
            for i in 0..x.n_nodes() {
                let d2: f64 = x.at(i).iter().zip(limit.at(i)).map(|(a, b)| (a - b).powi(2)).sum();
                inside_locality &= d2.sqrt() < r;
            }
        }
    }
    let distances_nonincreasing = distances.windows(2).all(|w| w[1] <= w[0]);
    let shrinking = match (distances.first(), distances.last()) {
        (Some(&a), Some(&b)) => b == 0.0 || b < a,
        _ => false,
    };
    let weak_stationarity_ok = last.stationarity_weak_max <= tol;
    let complementarity_ok = last.comp_sup <= tol;
    let sign_ok = last.sign_violation == 0.0;
    Ok(AkktTrend {
        tol,
        weak_stationarity_ok,
        complementarity_ok,
        sign_ok,
        certified: weak_stationarity_ok
            && complementarity_ok
            && sign_ok
            && distances_nonincreasing
            && shrinking
            && inside_locality,
        distances,
        distances_nonincreasing,
        inside_locality,
    })
}
