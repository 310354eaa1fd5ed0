//! Problem definition, objective and feasibility evaluation.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{CtpError, Result};
use crate::grid::{MultiplierPath, TimeGrid, Trajectory};

pub type ScalarFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
/// Returns a `rows × n` Jacobian.
pub type MatrixFn = Arc<dyn Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Integrable bound functions from the standing smoothness hypotheses.
///
/// Carried as documentation only: they are never evaluated by the toolkit.
#[derive(Clone, Default)]
pub struct HypothesisBounds {
    pub c_phi: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub c_hat_phi: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub c_hg: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub c_hat_hg: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub k_phi: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub k_hg: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub note: Option<String>,
}

/// Closed-form primal-dual pair `(x̄(t), u(t), v(t))`, sampled on demand.
#[derive(Clone)]
pub struct ReferenceSolution {
    pub x: TimeFn,
    /// `None` when only the primal point is known (no KKT multipliers exist).
    pub multipliers: Option<(TimeFn, TimeFn)>,
}

/// A continuous-time program
/// `min ∫₀ᵀ φ(x(t), t) dt  s.t.  h(x(t), t) = 0, g(x(t), t) ≤ 0  a.e.`.
///
/// Callbacks must be pure and reentrant; they are evaluated at many nodes
/// concurrently.
#[derive(Clone)]
pub struct CtpProblem {
    name: String,
    n: usize,
    p: usize,
    m: usize,
    horizon: f64,
    phi: ScalarFn,
    grad_phi: VectorFn,
    h: VectorFn,
    jac_h: MatrixFn,
    g: VectorFn,
    jac_g: MatrixFn,
    locality_radius: f64,
    bounds: Option<HypothesisBounds>,
    reference: Option<ReferenceSolution>,
}

impl fmt::Debug for CtpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CtpProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("p", &self.p)
            .field("m", &self.m)
            .field("horizon", &self.horizon)
            .field("locality_radius", &self.locality_radius)
            .field("has_reference", &self.reference.is_some())
            .finish()
    }
}

pub struct CtpProblemBuilder {
    name: String,
    n: usize,
    horizon: f64,
    objective: Option<(ScalarFn, VectorFn)>,
    eq: Option<(usize, VectorFn, MatrixFn)>,
    ineq: Option<(usize, VectorFn, MatrixFn)>,
    locality_radius: f64,
    bounds: Option<HypothesisBounds>,
    reference: Option<ReferenceSolution>,
}

impl CtpProblemBuilder {
    pub fn objective(
        mut self,
        phi: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.objective = Some((Arc::new(phi), Arc::new(grad)));
        self
    }

    pub fn equalities(
        mut self,
        p: usize,
        h: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
        jac: impl Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.eq = Some((p, Arc::new(h), Arc::new(jac)));
        self
    }

    pub fn inequalities(
        mut self,
        m: usize,
        g: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
        jac: impl Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.ineq = Some((m, Arc::new(g), Arc::new(jac)));
        self
    }

    pub fn locality_radius(mut self, r: f64) -> Self {
        self.locality_radius = r;
        self
    }

    pub fn bounds(mut self, bounds: HypothesisBounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn reference(mut self, reference: ReferenceSolution) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn build(self) -> Result<CtpProblem> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CtpError::InvalidArgument(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.n == 0 {
            return Err(CtpError::InvalidArgument("state dimension must be positive".into()));
        }
        if !(self.locality_radius > 0.0) {
            return Err(CtpError::InvalidArgument(format!(
                "locality radius must be positive, got {}",
                self.locality_radius
            )));
        }
        let (phi, grad_phi) = self
            .objective
            .ok_or_else(|| CtpError::InvalidArgument("objective not set".into()))?;
        let n = self.n;
        let empty_vec: VectorFn = Arc::new(|_, _| Vec::new());
        let empty_jac: MatrixFn = Arc::new(move |_, _| DMatrix::zeros(0, n));
        let (p, h, jac_h) = self
            .eq
            .unwrap_or_else(|| (0, empty_vec.clone(), empty_jac.clone()));
        let (m, g, jac_g) = self.ineq.unwrap_or((0, empty_vec, empty_jac));
        Ok(CtpProblem {
            name: self.name,
            n,
            p,
            m,
            horizon: self.horizon,
            phi,
            grad_phi,
            h,
            jac_h,
            g,
            jac_g,
            locality_radius: self.locality_radius,
            bounds: self.bounds,
            reference: self.reference,
        })
    }
}

fn check_vec(callback: &'static str, v: Vec<f64>, len: usize) -> Result<Vec<f64>> {
    if v.len() != len {
        return Err(CtpError::Callback {
            callback,
            node: None,
            message: format!("returned {} components, expected {len}", v.len()),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CtpError::Callback {
            callback,
            node: None,
            message: format!("returned non-finite value {v:?}"),
        });
    }
    Ok(v)
}

fn check_mat(
    callback: &'static str,
    a: DMatrix<f64>,
    rows: usize,
    cols: usize,
) -> Result<DMatrix<f64>> {
    if a.shape() != (rows, cols) {
        return Err(CtpError::Callback {
            callback,
            node: None,
            message: format!("returned shape {:?}, expected ({rows}, {cols})", a.shape()),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(CtpError::Callback {
            callback,
            node: None,
            message: "returned non-finite Jacobian entry".into(),
        });
    }
    Ok(a)
}

impl CtpProblem {
    pub fn builder(name: impl Into<String>, n: usize, horizon: f64) -> CtpProblemBuilder {
        CtpProblemBuilder {
            name: name.into(),
            n,
            horizon,
            objective: None,
            eq: None,
            ineq: None,
            locality_radius: f64::INFINITY,
            bounds: None,
            reference: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn locality_radius(&self) -> f64 {
        self.locality_radius
    }
    pub fn bounds(&self) -> Option<&HypothesisBounds> {
        self.bounds.as_ref()
    }
    pub fn reference(&self) -> Option<&ReferenceSolution> {
        self.reference.as_ref()
    }

    /// True when the problem has no constraints at all.
    pub fn is_unconstrained(&self) -> bool {
        self.p + self.m == 0
    }

    pub fn grid(&self, n_nodes: usize) -> Result<TimeGrid> {
        crate::grid::make_uniform_grid(self.horizon, n_nodes)
    }

    // Checked pointwise callback evaluation; node-level callers attach the node index.

    pub fn phi_at(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check_x(x)?;
        let v = (self.phi)(x, t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CtpError::Callback {
                callback: "phi",
                node: None,
                message: format!("returned non-finite value {v}"),
            })
        }
    }

    pub fn grad_phi_at(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_x(x)?;
        check_vec("grad_phi", (self.grad_phi)(x, t), self.n)
    }

    pub fn h_at(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_x(x)?;
        check_vec("h", (self.h)(x, t), self.p)
    }

    pub fn jac_h_at(&self, x: &[f64], t: f64) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        check_mat("jac_h", (self.jac_h)(x, t), self.p, self.n)
    }

    pub fn g_at(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_x(x)?;
        check_vec("g", (self.g)(x, t), self.m)
    }

    pub fn jac_g_at(&self, x: &[f64], t: f64) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        check_mat("jac_g", (self.jac_g)(x, t), self.m, self.n)
    }

    /// Stacked constraint Jacobian `[∇h; ∇g]`, `(p + m) × n`.
    pub fn constraint_jacobian_at(&self, x: &[f64], t: f64) -> Result<DMatrix<f64>> {
        let jh = self.jac_h_at(x, t)?;
        let jg = self.jac_g_at(x, t)?;
        let mut out = DMatrix::zeros(self.p + self.m, self.n);
        out.rows_mut(0, self.p).copy_from(&jh);
        out.rows_mut(self.p, self.m).copy_from(&jg);
        Ok(out)
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(CtpError::Callback {
                callback: "input",
                node: None,
                message: format!("state has {} components, expected {}", x.len(), self.n),
            });
        }
        Ok(())
    }

    pub(crate) fn check_trajectory(&self, x: &Trajectory) -> Result<()> {
        if x.dim() != self.n {
            return Err(CtpError::DimensionMismatch {
                what: "trajectory dimension".into(),
                expected: self.n,
                found: x.dim(),
            });
        }
        if x.grid().horizon() != self.horizon {
            return Err(CtpError::InvalidArgument(format!(
                "trajectory horizon {} differs from problem horizon {}",
                x.grid().horizon(),
                self.horizon
            )));
        }
        Ok(())
    }

    pub(crate) fn check_multipliers(&self, mult: &MultiplierPath) -> Result<()> {
        for (what, expected, found) in [
            ("equality multipliers", self.p, mult.p()),
            ("inequality multipliers", self.m, mult.m()),
        ] {
            if expected != found {
                return Err(CtpError::DimensionMismatch {
                    what: what.into(),
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Samples the reference primal trajectory on `grid`, if one is known.
    pub fn reference_trajectory(&self, grid: &TimeGrid) -> Option<Result<Trajectory>> {
        let r = self.reference.as_ref()?;
        Some(Trajectory::from_fn(grid, self.n, |t| (r.x)(t)))
    }

    /// Samples the reference primal-dual pair on `grid`, if multipliers are known.
    pub fn reference_pair(&self, grid: &TimeGrid) -> Option<Result<(Trajectory, MultiplierPath)>> {
        let r = self.reference.as_ref()?;
        let (u, v) = r.multipliers.as_ref()?;
        Some((|| {
            let x = Trajectory::from_fn(grid, self.n, |t| (r.x)(t))?;
            let mult = MultiplierPath::from_fn(grid, self.p, self.m, |t| (u(t), v(t)))?;
            Ok((x, mult))
        })())
    }
}

/// `∫₀ᵀ φ(x(t), t) dt` by the midpoint rule.
pub fn objective(problem: &CtpProblem, x: &Trajectory) -> Result<f64> {
    problem.check_trajectory(x)?;
    let grid = x.grid();
    let samples = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &t)| problem.phi_at(x.at(i), t).map_err(|e| e.at_node(i)))
        .collect::<Result<Vec<_>>>()?;
    grid.integrate(&samples)
}

/// Sup-over-nodes constraint violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// `max_i ‖h(x_i, t_i)‖_∞`
    pub eq_sup: f64,
    /// `max_{i,j} max(g_j(x_i, t_i), 0)`
    pub ineq_sup: f64,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.eq_sup == 0.0 && self.ineq_sup == 0.0
    }
}

pub fn feasibility(problem: &CtpProblem, x: &Trajectory) -> Result<Feasibility> {
    problem.check_trajectory(x)?;
    let mut out = Feasibility {
        eq_sup: 0.0,
        ineq_sup: 0.0,
    };
    for (i, &t) in x.grid().nodes().iter().enumerate() {
        let xi = x.at(i);
        for h in problem.h_at(xi, t).map_err(|e| e.at_node(i))? {
            out.eq_sup = out.eq_sup.max(h.abs());
        }
        for g in problem.g_at(xi, t).map_err(|e| e.at_node(i))? {
            out.ineq_sup = out.ineq_sup.max(g);
        }
    }
    Ok(out)
}
