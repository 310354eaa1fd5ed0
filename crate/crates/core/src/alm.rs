//! Safeguarded augmented Lagrangian method for discretized problems.
//!
//! The discretized objective is a weighted sum of pointwise terms and every
//! constraint is pointwise, so each outer iteration splits into one small
//! unconstrained minimization per grid node. Node subproblems run in
//! parallel; results are collected in node order, so traces are bitwise
//! reproducible regardless of scheduling.
//!
//! Multiplier estimates use the first-order update `ū + ρh`,
//! `max(0, v̄ + ρg)`, projected onto the boxes `[−u_max, u_max]` and
//! `[0, v_max]` before being stored or reused.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CtpError, Result};
use crate::grid::{MultiplierPath, TimeGrid, Trajectory};
use crate::problem::CtpProblem;
use crate::residuals::{kkt_residual, ResidualReport};

/// Inner values below this are taken as evidence of an unbounded subproblem.
pub const UNBOUNDED_THRESHOLD: f64 = -1e12;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const NEWTON_MAX_DIM: usize = 8;

/// Inner tolerance `max(base^k, floor)` at outer iteration `k ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerTolSchedule {
    pub base: f64,
    pub floor: f64,
}

impl Default for InnerTolSchedule {
    fn default() -> Self {
        Self {
            base: 0.1,
            floor: 1e-8,
        }
    }
}

impl InnerTolSchedule {
    pub fn at(&self, k: usize) -> f64 {
        self.base.powi(k.min(i32::MAX as usize) as i32).max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmConfig {
    pub n_nodes: usize,
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    /// Required reduction factor of the infeasibility-complementarity measure.
    pub tau_progress: f64,
    pub u_safeguard: f64,
    pub v_safeguard: f64,
    pub outer_max: usize,
    pub inner_max: usize,
    pub inner_tol: InnerTolSchedule,
    pub stop_tol: f64,
    /// Starting trajectory; all zeros when `None`.
    pub x0: Option<Trajectory>,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            n_nodes: 200,
            rho0: 1.0,
            rho_growth: 10.0,
            rho_max: 1e12,
            tau_progress: 0.5,
            u_safeguard: 1e8,
            v_safeguard: 1e8,
            outer_max: 50,
            inner_max: 200,
            inner_tol: InnerTolSchedule::default(),
            stop_tol: 1e-6,
            x0: None,
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CtpError::InvalidArgument(msg));
        if self.n_nodes == 0 {
            return bad("n_nodes must be positive".into());
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad(format!("rho0 must be positive and finite, got {}", self.rho0));
        }
        if !(self.rho_growth > 1.0 && self.rho_growth.is_finite()) {
            return bad(format!("rho_growth must exceed 1, got {}", self.rho_growth));
        }
        if !(self.rho_max >= self.rho0) {
            return bad(format!("rho_max {} is below rho0 {}", self.rho_max, self.rho0));
        }
        if !(self.tau_progress > 0.0 && self.tau_progress < 1.0) {
            return bad(format!("tau_progress must lie in (0, 1), got {}", self.tau_progress));
        }
        if !(self.u_safeguard > 0.0 && self.v_safeguard > 0.0) {
            return bad("safeguard bounds must be positive".into());
        }
        if self.outer_max == 0 || self.inner_max == 0 {
            return bad("iteration limits must be positive".into());
        }
        let s = self.inner_tol;
        if !(s.base > 0.0 && s.base < 1.0 && s.floor > 0.0) {
            return bad(format!("inner tolerance schedule {s:?} is not decreasing and positive"));
        }
        if !(self.stop_tol > 0.0) {
            return bad(format!("stop_tol must be positive, got {}", self.stop_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    ConvergedKkt,
    AkktNoKktProgress,
    PenaltyCapReached,
    IterationCapReached,
    UnboundedBelowSuspected,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConvergedKkt => "converged_kkt",
            Self::AkktNoKktProgress => "akkt_no_kkt_progress",
            Self::PenaltyCapReached => "penalty_cap_reached",
            Self::IterationCapReached => "iteration_cap_reached",
            Self::UnboundedBelowSuspected => "unbounded_below_suspected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterIterate {
    pub x: Trajectory,
    /// Safeguarded (projected) multipliers.
    pub mult: MultiplierPath,
    /// Penalty used for this iteration's subproblems.
    pub rho: f64,
    pub report: ResidualReport,
    /// Largest inner iteration count over nodes.
    pub inner_iterations: usize,
    /// Largest final inner gradient norm over nodes.
    pub inner_grad_max: f64,
    /// Sup-norm of the multiplier estimates before projection.
    pub unprojected_sup: f64,
    /// Whether projection changed any multiplier estimate.
    pub projection_active: bool,
    /// Infeasibility-complementarity measure driving the penalty update.
    pub progress: f64,
    /// Nodes pulled back into the locality ball.
    pub clipped_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub grid: TimeGrid,
    pub iterates: Vec<OuterIterate>,
    pub status: SolverStatus,
}

impl SolverTrace {
    pub fn last(&self) -> Option<&OuterIterate> {
        self.iterates.last()
    }
}

fn check_penalty(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(CtpError::InvalidArgument(format!("penalty must be positive, got {rho}")))
    }
}

/// Powell–Hestenes–Rockafellar augmented Lagrangian at one node, with its
/// gradient in `x`.
pub fn augmented_lagrangian(
    problem: &CtpProblem,
    x: &[f64],
    u_bar: &[f64],
    v_bar: &[f64],
    rho: f64,
    t: f64,
) -> Result<(f64, Vec<f64>)> {
    check_penalty(rho)?;
    let mut value = problem.phi_at(x, t)?;
    let mut grad = DVector::from_vec(problem.grad_phi_at(x, t)?);
    if problem.p() > 0 {
        let h = problem.h_at(x, t)?;
        let shifted: Vec<f64> = h.iter().zip(u_bar).map(|(h, u)| u + rho * h).collect();
        value += h
            .iter()
            .zip(u_bar)
            .map(|(h, u)| u * h + 0.5 * rho * h * h)
            .sum::<f64>();
        grad += problem.jac_h_at(x, t)?.tr_mul(&DVector::from_vec(shifted));
    }
    if problem.m() > 0 {
        let g = problem.g_at(x, t)?;
        let shifted: Vec<f64> = g.iter().zip(v_bar).map(|(g, v)| (v + rho * g).max(0.0)).collect();
        value += shifted
            .iter()
            .zip(v_bar)
            .map(|(s, v)| s * s - v * v)
            .sum::<f64>()
            / (2.0 * rho);
        grad += problem.jac_g_at(x, t)?.tr_mul(&DVector::from_vec(shifted));
    }
    Ok((value, grad.as_slice().to_vec()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// `‖∇ₓ L_ρ‖_∞` at `x`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub unbounded: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn fd_hessian(eval: &impl Fn(&[f64]) -> Result<(f64, Vec<f64>)>, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let step = 1e-6 * x[j].abs().max(1.0);
        probe[j] = x[j] + step;
        let (_, gp) = eval(&probe)?;
        probe[j] = x[j] - step;
        let (_, gm) = eval(&probe)?;
        probe[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Accepted step: `(alpha, x, f(x), ∇f(x))`.
type Step = (f64, Vec<f64>, f64, Vec<f64>);

/// First step length satisfying the Armijo condition, halving from `alpha0`.
fn armijo(
    eval: &impl Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    x: &[f64],
    f0: f64,
    slope: f64,
    dir: &[f64],
    alpha0: f64,
) -> Result<Option<Step>> {
    let mut alpha = alpha0;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> = x.iter().zip(dir).map(|(x, d)| x + alpha * d).collect();
        // callbacks may blow up far from the current point; treat as a rejected step
        if let Ok((f, g)) = eval(&trial) {
            if f.is_finite() && f <= f0 + ARMIJO_C * alpha * slope {
                return Ok(Some((alpha, trial, f, g)));
            }
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// Minimizes the augmented Lagrangian at node time `t`.
///
/// Gradient descent with Armijo backtracking; when `n ≤ 8` and the
/// finite-difference Hessian is positive definite the damped Newton direction
/// is tried first. Gradient steps start from twice the last accepted
/// gradient step, so long descent rays are followed at a geometric rate and
/// unbounded subproblems are detected quickly.
#[allow(clippy::too_many_arguments)]
pub fn inner_solve(
    problem: &CtpProblem,
    t: f64,
    x0: &[f64],
    u_bar: &[f64],
    v_bar: &[f64],
    rho: f64,
    tol: f64,
    inner_max: usize,
) -> Result<InnerResult> {
    check_penalty(rho)?;
    if !(tol > 0.0) {
        return Err(CtpError::InvalidArgument(format!("inner tolerance must be positive, got {tol}")));
    }
    let eval = |x: &[f64]| augmented_lagrangian(problem, x, u_bar, v_bar, rho, t);
    let mut x = x0.to_vec();
    let (mut f, mut g) = eval(&x)?;
    let mut grad_step: f64 = 1.0;
    let mut iterations = 0;
    while iterations < inner_max {
        if f < UNBOUNDED_THRESHOLD {
            break;
        }
        if inf_norm(&g) <= tol {
            break;
        }
        iterations += 1;
        let slope_grad = -g.iter().map(|v| v * v).sum::<f64>();

        let mut accepted = None;
        if x.len() <= NEWTON_MAX_DIM {
            let hess = fd_hessian(&eval, &x)?;
            if let Some(chol) = hess.cholesky() {
                let d = chol.solve(&DVector::from_column_slice(&g));
                let dir: Vec<f64> = d.iter().map(|v| -v).collect();
                let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
                if slope < 0.0 && dir.iter().all(|v| v.is_finite()) {
                    accepted = armijo(&eval, &x, f, slope, &dir, 1.0)?;
                }
            }
        }
        if accepted.is_none() {
            let dir: Vec<f64> = g.iter().map(|v| -v).collect();
            let alpha0 = (2.0 * grad_step).min(1e15);
            accepted = armijo(&eval, &x, f, slope_grad, &dir, alpha0)?;
            if let Some((alpha, ..)) = accepted {
                grad_step = alpha;
            }
        }
        match accepted {
            Some((_, xn, fn_, gn)) => {
                x = xn;
                f = fn_;
                g = gn;
            }
            // no descent possible at working precision
            None => break,
        }
    }
    Ok(InnerResult {
        grad_norm: inf_norm(&g),
        unbounded: !(f >= UNBOUNDED_THRESHOLD),
        x,
        value: f,
        iterations,
    })
}

fn clip_to_ball(x: &mut [f64], center: &[f64], r: f64) -> bool {
    let d: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    // B_r is open; land strictly inside it
    let target = r * (1.0 - 1e-9);
    if d < r {
        return false;
    }
    for (xi, ci) in x.iter_mut().zip(center) {
        *xi = ci + (*xi - ci) * target / d;
    }
    true
}

struct NodeOutcome {
    inner: InnerResult,
    clipped: bool,
    u_hat: Vec<f64>,
    v_hat: Vec<f64>,
    comp_hat: f64,
}

/// Runs the safeguarded augmented Lagrangian method.
///
/// Iteration `k`: (1) every node minimizes `L_ρ` warm-started from `x^{k−1}`;
/// (2) multiplier estimates are formed and projected onto the safeguard boxes;
/// (3) if `μ_k = max(feas_eq, feas_ineq, comp of unprojected estimates)`
/// exceeds `tau_progress · μ_{k−1}` the penalty is multiplied by `rho_growth`;
/// (4) termination is checked. With a finite locality radius the iterate is
/// pulled back into `B_r(t)`, centered at the problem's reference trajectory
/// when it has one and at `x0` otherwise.
pub fn solve(problem: &CtpProblem, config: &AlmConfig) -> Result<SolverTrace> {
    config.validate()?;
    let grid = problem.grid(config.n_nodes)?;
    let (n, p, m) = (problem.n(), problem.p(), problem.m());

    let mut x = match &config.x0 {
        Some(x0) => {
            problem.check_trajectory(x0)?;
            if !x0.grid().same_as(&grid) {
                return Err(CtpError::GridMismatch);
            }
            x0.clone()
        }
        None => Trajectory::zeros(&grid, n),
    };
    let center = if problem.locality_radius().is_finite() {
        Some(match problem.reference_trajectory(&grid) {
            Some(r) => r?,
            None => x.clone(),
        })
    } else {
        None
    };

    let mut mult = MultiplierPath::zeros(&grid, p, m);
    let mut rho = config.rho0;
    let mut prev_progress: Option<f64> = None;
    let mut iterates: Vec<OuterIterate> = Vec::new();
    let mut status = SolverStatus::IterationCapReached;

    for k in 1..=config.outer_max {
        // without constraints there is a single subproblem; solve it to the floor
        let tol = if problem.is_unconstrained() {
            config.inner_tol.floor
        } else {
            config.inner_tol.at(k)
        };
        let outcomes = grid
            .nodes()
            .par_iter()
            .enumerate()
            .map(|(i, &t)| -> Result<NodeOutcome> {
                let (u_bar, v_bar) = (mult.u_at(i), mult.v_at(i));
                let mut inner = inner_solve(problem, t, x.at(i), u_bar, v_bar, rho, tol, config.inner_max)
                    .map_err(|e| e.at_node(i))?;
                let clipped = match &center {
                    Some(c) => clip_to_ball(&mut inner.x, c.at(i), problem.locality_radius()),
                    None => false,
                };
                let h = problem.h_at(&inner.x, t).map_err(|e| e.at_node(i))?;
                let g = problem.g_at(&inner.x, t).map_err(|e| e.at_node(i))?;
                let u_hat: Vec<f64> = h.iter().zip(u_bar).map(|(h, u)| u + rho * h).collect();
                let v_hat: Vec<f64> = g.iter().zip(v_bar).map(|(g, v)| (v + rho * g).max(0.0)).collect();
                let comp_hat = g
                    .iter()
                    .zip(&v_hat)
                    .map(|(g, v)| v * (-g).max(0.0))
                    .fold(0.0, f64::max);
                Ok(NodeOutcome {
                    inner,
                    clipped,
                    u_hat,
                    v_hat,
                    comp_hat,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let unbounded = outcomes.iter().any(|o| o.inner.unbounded);
        let xs: Vec<&[f64]> = outcomes.iter().map(|o| o.inner.x.as_slice()).collect();
        let next_x = match Trajectory::from_rows(&grid, n, &xs) {
            Ok(next) => next,
            // an unbounded ray may overflow to non-finite coordinates
            Err(_) if unbounded => {
                status = SolverStatus::UnboundedBelowSuspected;
                break;
            }
            Err(e) => return Err(e),
        };

        let (us, vs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = outcomes
            .iter()
            .map(|o| {
                let u = o.u_hat.iter().map(|u| u.clamp(-config.u_safeguard, config.u_safeguard));
                let v = o.v_hat.iter().map(|v| v.clamp(0.0, config.v_safeguard));
                (u.collect(), v.collect())
            })
            .unzip();
        let unprojected_sup = outcomes
            .iter()
            .flat_map(|o| o.u_hat.iter().chain(&o.v_hat))
            .fold(0.0, |m: f64, v| m.max(v.abs()));
        let projection_active = outcomes
            .iter()
            .zip(us.iter().zip(&vs))
            .any(|(o, (u, v))| o.u_hat != *u || o.v_hat != *v);
        let next_mult = match MultiplierPath::from_rows(&grid, p, m, &us, &vs) {
            Ok(next) => next,
            Err(_) if unbounded => {
                status = SolverStatus::UnboundedBelowSuspected;
                break;
            }
            Err(e) => return Err(e),
        };

        let report = match kkt_residual(problem, &next_x, &next_mult) {
            Ok(r) => r,
            Err(_) if unbounded => {
                status = SolverStatus::UnboundedBelowSuspected;
                break;
            }
            Err(e) => return Err(e),
        };
        let comp_hat = outcomes.iter().map(|o| o.comp_hat).fold(0.0, f64::max);
        let progress = report.feas_eq_sup.max(report.feas_ineq_sup).max(comp_hat);

        x = next_x;
        mult = next_mult;
        iterates.push(OuterIterate {
            x: x.clone(),
            mult: mult.clone(),
            rho,
            inner_iterations: outcomes.iter().map(|o| o.inner.iterations).max().unwrap_or(0),
            inner_grad_max: outcomes.iter().map(|o| o.inner.grad_norm).fold(0.0, f64::max),
            unprojected_sup,
            projection_active,
            progress,
            clipped_nodes: outcomes.iter().filter(|o| o.clipped).count(),
            report,
        });

        if unbounded {
            status = SolverStatus::UnboundedBelowSuspected;
            break;
        }
        let last = iterates.last().expect("just pushed");
        if last.report.kkt_measure() <= config.stop_tol {
            status = SolverStatus::ConvergedKkt;
            break;
        }
        if multipliers_diverging(&iterates, config) {
            status = SolverStatus::AkktNoKktProgress;
            break;
        }
        if let Some(prev) = prev_progress {
            if progress > config.tau_progress * prev {
                rho *= config.rho_growth;
            }
        }
        prev_progress = Some(progress);
        if rho > config.rho_max {
            status = SolverStatus::PenaltyCapReached;
            break;
        }
    }

    Ok(SolverTrace {
        grid,
        iterates,
        status,
    })
}

/// Stationarity and complementarity pass but the stored multipliers grew by
/// at least `rho_growth`, either across the last three outer iterations or
/// since the first iterate run with a penalty three increases smaller.
fn multipliers_diverging(iterates: &[OuterIterate], config: &AlmConfig) -> bool {
    let Some(last) = iterates.last() else {
        return false;
    };
    if !(last.report.stationarity_l1 <= config.stop_tol && last.report.comp_sup <= config.stop_tol) {
        return false;
    }
    let s_last = last.mult.sup_norm();
    let grew_from = |it: &OuterIterate| s_last > 0.0 && s_last >= config.rho_growth * it.mult.sup_norm();

    let k = iterates.len();
    if k >= 3 && grew_from(&iterates[k - 3]) {
        return true;
    }
    let rho_then = last.rho / config.rho_growth.powi(3);
    iterates
        .iter()
        .find(|it| it.rho <= rho_then * (1.0 + 1e-12))
        .filter(|it| it.rho >= rho_then * (1.0 - 1e-12))
        .is_some_and(grew_from)
}

/// The `(x^k, u^k, v^k)` sequence of a trace, in iteration order.
pub fn export_trace(trace: &SolverTrace) -> Vec<(Trajectory, MultiplierPath)> {
    trace.iterates.iter().map(|it| (it.x.clone(), it.mult.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::objective;
    use crate::problems::{build, BuiltinProblemId};
    use crate::residuals::akkt_sequence_report;

    fn scalar_problem(
        phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dphi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> CtpProblem {
        CtpProblem::builder("scalar", 1, 1.0)
            .objective(move |x, t| phi(x[0], t), move |x, t| vec![dphi(x[0], t)])
            .build()
            .unwrap()
    }

    #[test]
    fn augmented_lagrangian_examples() {
        let free = scalar_problem(|x, _| x.powi(4), |x, _| 4.0 * x.powi(3));
        assert_eq!(augmented_lagrangian(&free, &[2.0], &[], &[], 3.0, 0.1).unwrap(), (16.0, vec![32.0]));

        let eq = CtpProblem::builder("eq", 1, 1.0)
            .objective(|_, _| 0.0, |_, _| vec![0.0])
            .equalities(1, |x, _| vec![x[0]], |_, _| DMatrix::from_element(1, 1, 1.0))
            .build()
            .unwrap();
        assert_eq!(augmented_lagrangian(&eq, &[3.0], &[0.0], &[], 2.0, 0.5).unwrap(), (9.0, vec![6.0]));

        let ineq = CtpProblem::builder("ineq", 1, 1.0)
            .objective(|_, _| 0.0, |_, _| vec![0.0])
            .inequalities(1, |x, _| vec![x[0]], |_, _| DMatrix::from_element(1, 1, 1.0))
            .build()
            .unwrap();
        assert_eq!(augmented_lagrangian(&ineq, &[-1.0], &[], &[0.0], 1.0, 0.5).unwrap(), (0.0, vec![0.0]));

        for rho in [0.0, -1.0, f64::NAN] {
            assert!(augmented_lagrangian(&ineq, &[-1.0], &[], &[0.0], rho, 0.5).is_err());
        }
    }

    #[test]
    fn inner_solve_quadratic() {
        let c = 1.7;
        let p = scalar_problem(move |x, _| 0.5 * (x - c).powi(2), move |x, _| x - c);
        for start in [-50.0, 0.0, 3.0] {
            let r = inner_solve(&p, 0.3, &[start], &[], &[], 1.0, 1e-10, 200).unwrap();
            assert!((r.x[0] - c).abs() <= 1e-10);
            assert!(!r.unbounded);
        }
    }

    #[test]
    fn inner_solve_tracking_node() {
        // (x − 0.25) + max(0, x) = 0 on the x > 0 branch
        let tr = build(BuiltinProblemId::Tracking);
        let r = inner_solve(&tr, 0.75, &[0.0], &[], &[0.0], 1.0, 1e-10, 200).unwrap();
        assert!((r.x[0] - 0.125).abs() <= 1e-10, "{r:?}");
    }

    fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-12 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn inner_solve_matches_golden_section() {
        let p = scalar_problem(|x, t| (x - t).cosh() + 0.25 * x * x, |x, t| (x - t).sinh() + 0.5 * x);
        for t in [0.1, 0.5, 0.9] {
            let oracle = golden_section(|x| (x - t).cosh() + 0.25 * x * x, -5.0, 5.0);
            let r = inner_solve(&p, t, &[0.0], &[], &[], 1.0, 1e-10, 200).unwrap();
            // value comparisons limit golden section to ~sqrt(eps) ≈ 1.5e-8 in x
            assert!((r.x[0] - oracle).abs() < 5e-8, "t={t}: {} vs {oracle}", r.x[0]);
            assert!(r.grad_norm <= 1e-10);
        }
    }

    #[test]
    fn inner_solve_without_newton_for_large_states() {
        let n = 10;
        let p = CtpProblem::builder("big", n, 1.0)
            .objective(
                |x, _| x.iter().enumerate().map(|(i, v)| 0.5 * (v - i as f64).powi(2)).sum(),
                |x, _| x.iter().enumerate().map(|(i, v)| v - i as f64).collect(),
            )
            .build()
            .unwrap();
        let r = inner_solve(&p, 0.5, &vec![0.0; n], &[], &[], 1.0, 1e-9, 200).unwrap();
        for (i, v) in r.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn inner_solve_flags_unbounded_subproblem() {
        let p = scalar_problem(|x, _| x, |_, _| 1.0);
        let r = inner_solve(&p, 0.5, &[0.0], &[], &[], 1.0, 1e-8, 200).unwrap();
        assert!(r.unbounded);
        assert!(r.value < UNBOUNDED_THRESHOLD);
    }

    #[test]
    fn tracking_converges_to_analytic_pair() {
        let tr = build(BuiltinProblemId::Tracking);
        let trace = solve(&tr, &AlmConfig::default()).unwrap();
        assert_eq!(trace.status, SolverStatus::ConvergedKkt);
        let last = trace.last().unwrap();
        let (xbar, vbar) = tr.reference_pair(&trace.grid).unwrap().unwrap();
        assert!(last.x.sup_distance(&xbar).unwrap() <= 1e-4);
        for i in 0..trace.grid.n_nodes() {
            assert!((last.mult.v_at(i)[0] - vbar.v_at(i)[0]).abs() <= 1e-4);
        }
        assert!(last.report.kkt_measure() <= 1e-6);
    }

    #[test]
    fn example2_multipliers_diverge() {
        let p2 = build(BuiltinProblemId::Example2);
        let trace = solve(&p2, &AlmConfig::default()).unwrap();
        assert!(matches!(
            trace.status,
            SolverStatus::AkktNoKktProgress | SolverStatus::PenaltyCapReached
        ));
        let k = trace.iterates.len();
        assert!(k > 5);
        let s_final = trace.iterates[k - 1].mult.sup_norm();
        assert!(s_final >= 10.0 * trace.iterates[k - 6].mult.sup_norm());
    }

    #[test]
    fn example1_subproblem_is_unbounded() {
        let p1 = build(BuiltinProblemId::Example1);
        let trace = solve(&p1, &AlmConfig::default()).unwrap();
        assert_eq!(trace.status, SolverStatus::UnboundedBelowSuspected);
    }

    #[test]
    fn unconstrained_converges_in_one_outer_iteration() {
        let p = CtpProblem::builder("free", 2, 1.0)
            .objective(
                |x, t| 0.5 * ((x[0] - t).powi(2) + (x[1] + t * t).powi(2)),
                |x, t| vec![x[0] - t, x[1] + t * t],
            )
            .build()
            .unwrap();
        let trace = solve(&p, &AlmConfig::default()).unwrap();
        assert_eq!(trace.status, SolverStatus::ConvergedKkt);
        assert_eq!(trace.iterates.len(), 1);
    }

    #[test]
    fn multiplier_invariants_along_traces() {
        let config = AlmConfig::default();
        for id in [BuiltinProblemId::Example2, BuiltinProblemId::Tracking] {
            let trace = solve(&build(id), &config).unwrap();
            for it in &trace.iterates {
                assert!(it.mult.is_admissible());
                assert!(it.mult.v().sup_norm() <= config.v_safeguard);
                assert!(it.mult.u().sup_norm() <= config.u_safeguard);
            }
            for w in trace.iterates.windows(3) {
                let ratio = w[2].rho / w[1].rho;
                if w[1].progress > config.tau_progress * w[0].progress {
                    assert_eq!(ratio, config.rho_growth);
                } else {
                    assert_eq!(ratio, 1.0);
                }
            }
            assert!(trace.iterates.windows(2).all(|w| w[1].rho >= w[0].rho));
        }
    }

    #[test]
    fn safeguards_never_bind_on_tracking() {
        let config = AlmConfig {
            u_safeguard: f64::INFINITY,
            v_safeguard: f64::INFINITY,
            ..AlmConfig::default()
        };
        let trace = solve(&build(BuiltinProblemId::Tracking), &config).unwrap();
        assert!(trace.iterates.iter().all(|it| !it.projection_active));
        assert!(trace.iterates.iter().all(|it| it.unprojected_sup == it.mult.sup_norm()));
    }

    #[test]
    fn time_independent_problem_gives_identical_rows() {
        let p = CtpProblem::builder("flat", 2, 1.0)
            .objective(|x, _| (x[0] - 1.0).powi(2) + x[0] * x[1] + x[1] * x[1], |x, _| {
                vec![2.0 * (x[0] - 1.0) + x[1], x[0] + 2.0 * x[1]]
            })
            .inequalities(1, |x, _| vec![x[0] + x[1] - 0.5], |_, _| DMatrix::from_row_slice(1, 2, &[1.0, 1.0]))
            .build()
            .unwrap();
        let trace = solve(&p, &AlmConfig::default()).unwrap();
        for it in &trace.iterates {
            let first = it.x.at(0).to_vec();
            for i in 1..trace.grid.n_nodes() {
                assert_eq!(it.x.at(i), first.as_slice());
            }
        }
    }

    #[test]
    fn tracking_objective_rises_monotonically_to_optimum() {
        let tr = build(BuiltinProblemId::Tracking);
        let trace = solve(&tr, &AlmConfig::default()).unwrap();
        let values: Vec<f64> = trace.iterates.iter().map(|it| objective(&tr, &it.x).unwrap()).collect();
        let optimum = objective(&tr, &tr.reference_trajectory(&trace.grid).unwrap().unwrap()).unwrap();
        for w in values[1..].windows(2) {
            assert!(w[1] >= w[0] - 1e-10);
        }
        assert!(values.iter().all(|&v| v <= optimum + 1e-10));
    }

    #[test]
    fn export_preserves_order_and_reports() {
        let tr = build(BuiltinProblemId::Tracking);
        let trace = solve(&tr, &AlmConfig::default()).unwrap();
        let seq = export_trace(&trace);
        assert_eq!(seq.len(), trace.iterates.len());
        let reports = akkt_sequence_report(&tr, &seq).unwrap();
        for (r, it) in reports.iter().zip(&trace.iterates) {
            assert_eq!(r, &it.report);
            assert!(it.x.grid().same_as(&trace.grid));
        }

        let empty = SolverTrace {
            grid: trace.grid.clone(),
            iterates: Vec::new(),
            status: SolverStatus::IterationCapReached,
        };
        assert!(export_trace(&empty).is_empty());
    }

    #[test]
    fn locality_radius_clips_iterates() {
        let p = CtpProblem::builder("far", 1, 1.0)
            .objective(|x, _| 0.5 * (x[0] - 3.0).powi(2), |x, _| vec![x[0] - 3.0])
            .locality_radius(1.0)
            .build()
            .unwrap();
        let trace = solve(&p, &AlmConfig { outer_max: 3, ..AlmConfig::default() }).unwrap();
        let first = &trace.iterates[0];
        assert_eq!(first.clipped_nodes, trace.grid.n_nodes());
        assert!(first.x.at(0)[0] < 1.0 && first.x.at(0)[0] > 0.999);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let tr = build(BuiltinProblemId::Tracking);
        let cases = [
            AlmConfig { rho0: 0.0, ..AlmConfig::default() },
            AlmConfig { rho_growth: 1.0, ..AlmConfig::default() },
            AlmConfig { tau_progress: 1.0, ..AlmConfig::default() },
            AlmConfig { v_safeguard: 0.0, ..AlmConfig::default() },
            AlmConfig { outer_max: 0, ..AlmConfig::default() },
            AlmConfig { n_nodes: 0, ..AlmConfig::default() },
            AlmConfig {
                inner_tol: InnerTolSchedule { base: 1.5, floor: 1e-8 },
                ..AlmConfig::default()
            },
        ];
        for c in cases {
            assert!(matches!(solve(&tr, &c), Err(CtpError::InvalidArgument(_))), "{c:?}");
        }
        let wrong_grid = make_x0(7);
        assert!(solve(&tr, &AlmConfig { x0: Some(wrong_grid), ..AlmConfig::default() }).is_err());
    }

    fn make_x0(n: usize) -> Trajectory {
        Trajectory::zeros(&crate::grid::make_uniform_grid(1.0, n).unwrap(), 1)
    }

    #[test]
    fn tolerance_schedule() {
        let s = InnerTolSchedule::default();
        assert_eq!(s.at(1), 0.1);
        assert!((s.at(3) - 1e-3).abs() < 1e-18);
        assert_eq!(s.at(9), 1e-8);
        assert_eq!(s.at(40), 1e-8);
    }
}
