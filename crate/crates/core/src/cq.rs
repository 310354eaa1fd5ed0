//! Sufficient criteria under which pointwise AKKT points are KKT points.
//!
//! Three independent checks: uniform boundedness of the multiplier sequence,
//! a uniform lower bound on `det(ΥΥᵀ)` for the stacked constraint Jacobian
//! `Υ = [∇ₓh; ∇ₓg]` at the limit point, and a uniform lower bound on the
//! smallest singular value of `Υᵀ` over the iterates. The last one is a
//! finite-dimensional surrogate for metric regularity of the constraint map:
//! at a single node it is exactly the inequality `σ‖(u, v)‖ ≤ ‖Υᵀ(u, v)‖`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alm::SolverTrace;
use crate::error::{CtpError, Result};
use crate::grid::{MultiplierPath, Trajectory};
use crate::problem::CtpProblem;
use crate::residuals::{kkt_residual, min_kkt_stationarity, DEFAULT_COMP_TOL, DEFAULT_KKT_TOL};

/// Stacked constraint Jacobian `Υ(t)`, `(p + m) × n`, at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianStack {
    pub t: f64,
    pub matrix: DMatrix<f64>,
}

impl JacobianStack {
    pub fn at(problem: &CtpProblem, x: &[f64], t: f64) -> Result<Self> {
        Ok(Self {
            t,
            matrix: problem.constraint_jacobian_at(x, t)?,
        })
    }

    pub fn gram(&self) -> DMatrix<f64> {
        &self.matrix * self.matrix.transpose()
    }

    fn singular_values(&self) -> DVector<f64> {
        self.matrix.clone().svd(false, false).singular_values
    }

    /// `det(ΥΥᵀ)` as the product of squared singular values; zero when
    /// `p + m > n` and one for an empty stack.
    pub fn gram_determinant(&self) -> f64 {
        let (rows, cols) = self.matrix.shape();
        if rows == 0 {
            return 1.0;
        }
        if rows > cols {
            return 0.0;
        }
        self.singular_values().iter().map(|s| s * s).product()
    }

    /// Smallest singular value of `Υᵀ` acting on `ℝ^(p+m)`; `None` (read
    /// `+∞`) when there are no constraints.
    pub fn sigma_min(&self) -> Option<f64> {
        let (rows, cols) = self.matrix.shape();
        if rows == 0 {
            return None;
        }
        if rows > cols {
            return Some(0.0);
        }
        Some(self.singular_values().min())
    }

    /// `ψ = Υᵀ(u, v) = Σ uᵢ∇hᵢ + Σ vⱼ∇gⱼ`.
    pub fn psi(&self, u: &[f64], v: &[f64]) -> DVector<f64> {
        let w = DVector::from_iterator(u.len() + v.len(), u.iter().chain(v).copied());
        self.matrix.tr_mul(&w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVerdict {
    Bounded,
    Growing,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionVerdict {
    Holds,
    Fails,
}

impl CriterionVerdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Holds
        } else {
            Self::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Self::Holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierBoundCheck {
    pub verdict: BoundVerdict,
    /// `s_k = max_i ‖(u^k(t_i), v^k(t_i))‖_∞` per iterate.
    pub sup_norms: Vec<f64>,
    /// Largest `‖u^k‖_∞` seen, an estimate of `k_u`.
    pub k_u: f64,
    /// Largest `‖v^k‖_∞` seen, an estimate of `k_v`.
    pub k_v: f64,
    pub window: usize,
    pub growth_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRankCheck {
    pub verdict: CriterionVerdict,
    pub min_det: f64,
    pub threshold: f64,
    pub argmin_node: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaCheck {
    pub verdict: CriterionVerdict,
    /// Smallest `σ_min(Υᵀ)` over all iterates and nodes; `None` means `+∞`.
    pub sigma_min: Option<f64>,
    pub threshold: f64,
    /// `max ‖∇ₓφ‖₂` over iterates and nodes: the size of the `ψ` a stationary
    /// multiplier combination has to produce.
    pub psi_sup: f64,
    pub psi_bound: Option<f64>,
    /// `psi_bound / σ` when the check holds and `psi_sup ≤ psi_bound`.
    pub implied_multiplier_bound: Option<f64>,
}

/// Rel. spread below which the last `window` multiplier norms count as settled.
pub const STABLE_SPREAD: f64 = 0.1;

/// Classifies the multiplier sequence.
///
/// `Growing` when the last norm is at least `growth_factor` times the norm
/// `window − 1` iterates earlier, or times the first nonzero norm of the
/// whole sequence. Otherwise `Bounded` when the last `window` norms lie
/// within 10% of each other (`max ≤ 1.1·min`), else `Inconclusive`.
pub fn check_multiplier_bound(
    trace: &[MultiplierPath],
    window: usize,
    growth_factor: f64,
) -> Result<MultiplierBoundCheck> {
    if trace.is_empty() {
        return Err(CtpError::EmptySequence);
    }
    if window < 2 {
        return Err(CtpError::InvalidArgument(format!("window must be at least 2, got {window}")));
    }
    if !(growth_factor > 1.0) {
        return Err(CtpError::InvalidArgument(format!(
            "growth factor must exceed 1, got {growth_factor}"
        )));
    }
    let sup_norms: Vec<f64> = trace.iter().map(MultiplierPath::sup_norm).collect();
    let k_u = trace.iter().map(|m| m.u().sup_norm()).fold(0.0, f64::max);
    let k_v = trace.iter().map(|m| m.v().sup_norm()).fold(0.0, f64::max);

    let last = *sup_norms.last().expect("nonempty");
    let k = sup_norms.len();
    let grew_over = |base: f64| base > 0.0 && last >= growth_factor * base;
    let window_growth = k >= window && grew_over(sup_norms[k - window]);
    let run_growth = sup_norms.iter().find(|&&s| s > 0.0).is_some_and(|&s| grew_over(s));

    let verdict = if window_growth || run_growth {
        BoundVerdict::Growing
    } else if k >= window && {
        let tail = &sup_norms[k - window..];
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().copied().fold(0.0, f64::max);
        hi == 0.0 || hi <= (1.0 + STABLE_SPREAD) * lo
    } {
        BoundVerdict::Bounded
    } else {
        BoundVerdict::Inconclusive
    };
    Ok(MultiplierBoundCheck {
        verdict,
        sup_norms,
        k_u,
        k_v,
        window,
        growth_factor,
    })
}

fn stacks(problem: &CtpProblem, x: &Trajectory) -> Result<Vec<JacobianStack>> {
    problem.check_trajectory(x)?;
    x.grid()
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(i, &t)| JacobianStack::at(problem, x.at(i), t).map_err(|e| e.at_node(i)))
        .collect()
}

/// `min_t det(Υ(t)Υ(t)ᵀ) ≥ K` at the candidate point `x`.
pub fn check_full_rank(problem: &CtpProblem, x: &Trajectory, threshold: f64) -> Result<FullRankCheck> {
    if !(threshold > 0.0) {
        return Err(CtpError::InvalidArgument(format!("K must be positive, got {threshold}")));
    }
    let note = if problem.is_unconstrained() {
        Some("no constraints: criterion holds vacuously".to_string())
    } else if problem.p() + problem.m() > problem.n() {
        Some(format!(
            "p + m = {} exceeds n = {}; ΥΥᵀ is singular at every point",
            problem.p() + problem.m(),
            problem.n()
        ))
    } else {
        None
    };
    let dets: Vec<f64> = stacks(problem, x)?.iter().map(JacobianStack::gram_determinant).collect();
    let (argmin_node, min_det) = dets
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or((None, f64::INFINITY), |(i, d)| (Some(i), d));
    Ok(FullRankCheck {
        verdict: CriterionVerdict::from_bool(min_det >= threshold),
        min_det,
        threshold,
        argmin_node,
        note,
    })
}

/// Uniform lower bound `σ_min(Υᵀ) ≥ rho_threshold` over all iterates and nodes.
pub fn check_sigma_min(
    problem: &CtpProblem,
    iterates: &[Trajectory],
    rho_threshold: f64,
    psi_bound: Option<f64>,
) -> Result<SigmaCheck> {
    if !(rho_threshold > 0.0) {
        return Err(CtpError::InvalidArgument(format!(
            "rho threshold must be positive, got {rho_threshold}"
        )));
    }
    let mut sigma: Option<f64> = None;
    let mut psi_sup: f64 = 0.0;
    for x in iterates {
        for s in stacks(problem, x)? {
            if let Some(v) = s.sigma_min() {
                sigma = Some(sigma.map_or(v, |m| m.min(v)));
            }
        }
        for (i, &t) in x.grid().nodes().iter().enumerate() {
            let g = problem.grad_phi_at(x.at(i), t).map_err(|e| e.at_node(i))?;
            psi_sup = psi_sup.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    let holds = sigma.is_none_or(|s| s >= rho_threshold);
    let implied_multiplier_bound = match (holds, psi_bound, sigma) {
        (true, Some(b), Some(s)) if psi_sup <= b => Some(b / s),
        _ => None,
    };
    Ok(SigmaCheck {
        verdict: CriterionVerdict::from_bool(holds),
        sigma_min: sigma,
        threshold: rho_threshold,
        psi_sup,
        psi_bound,
        implied_multiplier_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqThresholds {
    /// `K` in `det(ΥΥᵀ) ≥ K`.
    pub det_min: f64,
    /// `ρ` in `σ_min(Υᵀ) ≥ ρ`.
    pub sigma_min: f64,
    /// `k_ψ` bounding the stationarity combination, if known.
    pub psi_bound: Option<f64>,
    pub growth_factor: f64,
    pub window: usize,
    /// Tolerance for the final AKKT residuals before limit multipliers are extracted.
    pub akkt_tol: f64,
    pub comp_tol: f64,
}

impl Default for CqThresholds {
    fn default() -> Self {
        Self {
            det_min: 1e-6,
            sigma_min: 1e-3,
            psi_bound: None,
            growth_factor: 10.0,
            window: 3,
            akkt_tol: DEFAULT_KKT_TOL,
            comp_tol: DEFAULT_COMP_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqReport {
    pub multiplier_bound: MultiplierBoundCheck,
    pub full_rank: FullRankCheck,
    /// Singular-value surrogate; not a verification of metric regularity.
    pub sigma_surrogate: SigmaCheck,
    pub promotion_certified: bool,
    /// Integrated distance to the multiplier cone at the limit point, computed
    /// when promotion is certified and the final AKKT residuals pass.
    pub limit_stationarity: Option<f64>,
    pub notes: Vec<String>,
}

impl CqReport {
    fn promotion(mult: &MultiplierBoundCheck, rank: &FullRankCheck, sigma: &SigmaCheck) -> bool {
        mult.verdict == BoundVerdict::Bounded || rank.verdict.holds() || sigma.verdict.holds()
    }
}

/// Runs all three criteria on an iterate sequence converging to `limit`.
///
/// The rank criterion is evaluated at `limit`; the singular-value surrogate
/// over every iterate plus `limit`.
pub fn diagnose(
    problem: &CtpProblem,
    iterates: &[(Trajectory, MultiplierPath)],
    limit: &Trajectory,
    thresholds: &CqThresholds,
) -> Result<CqReport> {
    let (last_x, last_mult) = iterates.last().ok_or(CtpError::EmptySequence)?;
    let mults: Vec<MultiplierPath> = iterates.iter().map(|(_, m)| m.clone()).collect();
    let multiplier_bound = check_multiplier_bound(&mults, thresholds.window, thresholds.growth_factor)?;
    let full_rank = check_full_rank(problem, limit, thresholds.det_min)?;
    let mut xs: Vec<Trajectory> = iterates.iter().map(|(x, _)| x.clone()).collect();
    xs.push(limit.clone());
    let sigma_surrogate = check_sigma_min(problem, &xs, thresholds.sigma_min, thresholds.psi_bound)?;

    let promotion_certified = CqReport::promotion(&multiplier_bound, &full_rank, &sigma_surrogate);
    let mut notes = vec![
        "sigma criterion is a pointwise singular-value surrogate, not a verification of metric regularity"
            .to_string(),
    ];
    if let Some(n) = &full_rank.note {
        notes.push(n.clone());
    }

    let final_report = kkt_residual(problem, last_x, last_mult)?;
    let akkt_passes = final_report.stationarity_weak_max <= thresholds.akkt_tol
        && final_report.comp_sup <= thresholds.akkt_tol
        && final_report.sign_violation == 0.0;
    let limit_stationarity = if promotion_certified && akkt_passes {
        let m = min_kkt_stationarity(problem, limit, thresholds.comp_tol)?;
        notes.push(format!(
            "promotion certified and final AKKT residuals pass: distance to the multiplier cone at the limit is {:e}",
            m.value
        ));
        Some(m.value)
    } else {
        if !promotion_certified {
            notes.push("no sufficient criterion holds; AKKT points may fail to be KKT points".into());
        }
        None
    };

    Ok(CqReport {
        multiplier_bound,
        full_rank,
        sigma_surrogate,
        promotion_certified,
        limit_stationarity,
        notes,
    })
}

/// [`diagnose`] on a solver trace. The limit point is the problem's
/// reference trajectory when it has one, otherwise the final iterate.
pub fn diagnose_trace(problem: &CtpProblem, trace: &SolverTrace, thresholds: &CqThresholds) -> Result<CqReport> {
    let seq = crate::alm::export_trace(trace);
    let (last, _) = seq.last().ok_or(CtpError::EmptySequence)?;
    let (limit, source) = match problem.reference_trajectory(&trace.grid) {
        Some(r) => (r?, "limit point: reference trajectory"),
        None => (last.clone(), "limit point: final iterate"),
    };
    let mut report = diagnose(problem, &seq, &limit, thresholds)?;
    report.notes.insert(0, source.to_string());
    Ok(report)
}
