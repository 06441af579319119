//! Discrete p-Poisson Dirichlet problem: minimization of the regularized
//! energy `I_p(u) = (1/p) int (|Xu|^2 + eps^2)^{p/2} - int f u` over fields
//! matching the boundary data, plus the variational identity checks.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::sparse::{nested_dissection, Cholesky, SymCsr};
use crate::stencil::CornerStencil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Damped Newton, switching to nonlinear CG if the Hessian solve fails.
    Newton,
    /// Jacobi-preconditioned Polak-Ribiere nonlinear conjugate gradient.
    NonlinearCg,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub p: f64,
    /// Decreasing regularization levels; `None` means [`default_eps_schedule`].
    pub eps_schedule: Option<Vec<f64>>,
    pub max_iters: usize,
    /// Sup-norm tolerance on the energy gradient; `None` means
    /// `1e-8 (1 + E_p) h^n` evaluated at the current iterate.
    pub grad_tol: Option<f64>,
    pub backtrack: f64,
    pub armijo: f64,
    pub warm_start: Option<ScalarField>,
    pub optimizer: Optimizer,
}

impl SolveConfig {
    pub fn new(p: f64) -> SolveConfig {
        SolveConfig {
            p,
            eps_schedule: None,
            max_iters: 500,
            grad_tol: None,
            backtrack: 0.5,
            armijo: 1e-4,
            warm_start: None,
            optimizer: Optimizer::Newton,
        }
    }

    pub fn with_warm_start(mut self, u: ScalarField) -> Self {
        self.warm_start = Some(u);
        self
    }

    pub fn with_eps_schedule(mut self, eps: Vec<f64>) -> Self {
        self.eps_schedule = Some(eps);
        self
    }

    pub fn with_optimizer(mut self, optimizer: Optimizer) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = Some(tol);
        self
    }

    /// Checks the settings against `grid` and returns the resolved eps schedule.
    pub fn validate(&self, grid: &Grid) -> Result<Vec<f64>> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::param("p", format!("need 1 < p < inf, got {}", self.p)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::param("backtrack", "must lie in (0, 1)"));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::param("armijo", "must lie in (0, 1/2)"));
        }
        if let Some(t) = self.grad_tol {
            if !(t > 0.0) {
                return Err(Error::param("grad_tol", "must be positive"));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be positive"));
        }
        let eps = self.eps_schedule.clone().unwrap_or_else(|| default_eps_schedule(grid.h()));
        if eps.is_empty() || eps.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::param("eps_schedule", "needs finite non-negative entries"));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("eps_schedule", "must be strictly decreasing"));
        }
        if self.p < 2.0 && *eps.last().unwrap() == 0.0 {
            return Err(Error::param("eps_schedule", "p < 2 needs a positive final regularization"));
        }
        Ok(eps)
    }
}

/// `1e-1, 1e-2, ...` down to and ending at `min(h, 1e-4)`.
pub fn default_eps_schedule(h: f64) -> Vec<f64> {
    let last = h.min(1e-4);
    let mut out = Vec::new();
    let mut e = 0.1;
    while e > last * (1.0 + 1e-12) {
        out.push(e);
        e /= 10.0;
    }
    out.push(last);
    out
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub frame: String,
    pub resolution: Vec<usize>,
    pub p: f64,
    pub eps_final: f64,
    pub u: ScalarField,
    /// `int |Xu_p|^p` with the energy quadrature.
    pub e_p: f64,
    /// Weak-form residual tested with `u_p` on interior nodes; `|int |Xu_p|^p - int f u_p|`
    /// when the boundary data vanish.
    pub duality_gap: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub grad_tol: f64,
    pub energy_trace: Vec<f64>,
    pub optimizer_used: Optimizer,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub frame: String,
    pub p: f64,
    pub resolution: Vec<usize>,
    pub eps_final: f64,
    #[serde(rename = "E_p")]
    pub e_p: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            frame: self.frame.clone(),
            p: self.p,
            resolution: self.resolution.clone(),
            eps_final: self.eps_final,
            e_p: self.e_p,
            duality_gap: self.duality_gap,
            iterations: self.iterations,
            final_grad_norm: self.final_grad_norm,
        }
    }
}

/// Regularized discrete energy `I_p` of a field (boundary values taken as given).
pub fn energy(grid: &Grid, u: &ScalarField, p: f64, f: &ScalarField, eps: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::param("p", format!("need p > 1, got {p}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::param("eps", "must be non-negative"));
    }
    let st = CornerStencil::new(grid);
    Ok(st.power_sum(&st.gradients(u), p, eps) / p - integrate_product(grid, f, u))
}

/// `int |Xu|^p` with the energy quadrature.
pub fn p_energy(grid: &Grid, u: &ScalarField, p: f64) -> f64 {
    let st = CornerStencil::new(grid);
    st.power_sum(&st.gradients(u), p, 0.0)
}

fn integrate_product(grid: &Grid, f: &ScalarField, u: &ScalarField) -> f64 {
    grid.cell_volume() * grid.interior_nodes().iter().map(|&v| f[v] * u[v]).sum::<f64>()
}

struct Problem<'a> {
    grid: &'a Grid,
    st: CornerStencil,
    f: &'a ScalarField,
    p: f64,
    hn: f64,
}

impl Problem<'_> {
    fn energy(&self, u: &ScalarField, eps: f64) -> f64 {
        self.st.power_sum(&self.st.gradients(u), self.p, eps) / self.p - integrate_product(self.grid, self.f, u)
    }

    fn gradient(&self, u: &ScalarField, eps: f64) -> Vec<f64> {
        let mut g = self.st.flux_gradient(&self.st.gradients(u), self.p, eps);
        for (k, &v) in self.grid.interior_nodes().iter().enumerate() {
            g[k] -= self.hn * self.f[v];
        }
        g
    }

    fn tolerance(&self, cfg: &SolveConfig, u: &ScalarField) -> f64 {
        cfg.grad_tol.unwrap_or_else(|| {
            let ep = self.st.power_sum(&self.st.gradients(u), self.p, 0.0);
            1e-8 * (1.0 + ep.abs()) * self.hn
        })
    }

    fn step(&self, u: &ScalarField, d: &[f64], t: f64) -> ScalarField {
        let mut out = u.clone();
        let vals = out.values_mut();
        for (k, &v) in self.grid.interior_nodes().iter().enumerate() {
            vals[v] += t * d[k];
        }
        out
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

enum LineSearch {
    Accepted(ScalarField, f64),
    Stalled,
}

/// Backtracking with sufficient decrease; near convergence, where energy
/// differences sink below rounding, a step that does not increase the energy
/// and reduces the gradient is accepted instead.
fn line_search(
    prob: &Problem,
    cfg: &SolveConfig,
    u: &ScalarField,
    e0: f64,
    grad: &[f64],
    d: &[f64],
    eps: f64,
) -> LineSearch {
    let slope = dot(grad, d);
    if !(slope < 0.0) {
        return LineSearch::Stalled;
    }
    let g0 = sup(grad);
    let mut t = 1.0;
    for _ in 0..60 {
        let cand = prob.step(u, d, t);
        let e = prob.energy(&cand, eps);
        if e.is_finite() {
            if e <= e0 + cfg.armijo * t * slope {
                return LineSearch::Accepted(cand, e);
            }
            let floor = 64.0 * f64::EPSILON * (e0.abs() + prob.hn);
            if (t * slope).abs() < floor && e <= e0 + floor {
                let gn = sup(&prob.gradient(&cand, eps));
                if gn < g0 {
                    return LineSearch::Accepted(cand, e.min(e0));
                }
            }
        }
        t *= cfg.backtrack;
    }
    LineSearch::Stalled
}

struct State {
    u: ScalarField,
    energy: f64,
    iterations: usize,
    trace: Vec<f64>,
    used: Optimizer,
}

enum LevelOutcome {
    Converged(f64),
    Stalled(f64),
    OutOfIterations(f64),
}

struct Newton {
    hess: SymCsr,
    pos: Vec<usize>,
    chol: Cholesky,
}

impl Newton {
    fn new(prob: &Problem) -> Newton {
        let (hess, pos) = prob.st.hessian_pattern();
        let idx: Vec<Vec<usize>> = prob.grid.interior_nodes().iter().map(|&v| prob.grid.multi_index(v)).collect();
        let chol = Cholesky::analyze(&hess, nested_dissection(&idx));
        Newton { hess, pos, chol }
    }

    fn direction(&mut self, prob: &Problem, u: &ScalarField, grad: &[f64], eps: f64) -> Option<Vec<f64>> {
        prob.st.assemble_hessian(&prob.st.gradients(u), prob.p, eps, &mut self.hess, &self.pos);
        let dmax = sup(&self.hess.diagonal());
        if !(dmax > 0.0 && dmax.is_finite()) {
            return None;
        }
        let mut shift = 0.0;
        for _ in 0..6 {
            if self.chol.factor(&self.hess, shift).is_ok() {
                let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
                let d = self.chol.solve(&rhs);
                if d.iter().all(|x| x.is_finite()) {
                    return Some(d);
                }
            }
            shift = if shift == 0.0 { 1e-12 * dmax } else { shift * 100.0 };
        }
        None
    }
}

fn newton_level(prob: &Problem, cfg: &SolveConfig, newton: &mut Newton, st: &mut State, eps: f64, tol: &dyn Fn(&ScalarField) -> f64) -> LevelOutcome {
    loop {
        let grad = prob.gradient(&st.u, eps);
        let gn = sup(&grad);
        if gn <= tol(&st.u) {
            return LevelOutcome::Converged(gn);
        }
        if st.iterations >= cfg.max_iters {
            return LevelOutcome::OutOfIterations(gn);
        }
        let Some(d) = newton.direction(prob, &st.u, &grad, eps) else {
            return LevelOutcome::Stalled(gn);
        };
        match line_search(prob, cfg, &st.u, st.energy, &grad, &d, eps) {
            LineSearch::Accepted(u, e) => {
                st.u = u;
                st.energy = e;
                st.iterations += 1;
                st.trace.push(e);
            }
            LineSearch::Stalled => return LevelOutcome::Stalled(gn),
        }
    }
}

fn diag_preconditioner(prob: &Problem, u: &ScalarField, eps: f64, newton: &mut Option<Newton>) -> Vec<f64> {
    let nw = newton.get_or_insert_with(|| Newton::new(prob));
    prob.st.assemble_hessian(&prob.st.gradients(u), prob.p, eps, &mut nw.hess, &nw.pos);
    let d = nw.hess.diagonal();
    let floor = 1e-14 * sup(&d).max(f64::MIN_POSITIVE);
    d.into_iter().map(|x| x.max(floor)).collect()
}

fn cg_level(prob: &Problem, cfg: &SolveConfig, newton: &mut Option<Newton>, st: &mut State, eps: f64, tol: &dyn Fn(&ScalarField) -> f64) -> LevelOutcome {
    st.used = Optimizer::NonlinearCg;
    let mut grad = prob.gradient(&st.u, eps);
    let mut diag = diag_preconditioner(prob, &st.u, eps, newton);
    let mut z: Vec<f64> = grad.iter().zip(&diag).map(|(g, d)| g / d).collect();
    let mut dir: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut since_restart = 0usize;
    loop {
        let gn = sup(&grad);
        if gn <= tol(&st.u) {
            return LevelOutcome::Converged(gn);
        }
        if st.iterations >= cfg.max_iters {
            return LevelOutcome::OutOfIterations(gn);
        }
        if dot(&grad, &dir) >= 0.0 {
            dir = z.iter().map(|v| -v).collect();
        }
        match line_search(prob, cfg, &st.u, st.energy, &grad, &dir, eps) {
            LineSearch::Accepted(u, e) => {
                st.u = u;
                st.energy = e;
                st.iterations += 1;
                st.trace.push(e);
            }
            LineSearch::Stalled => {
                if since_restart == 0 {
                    return LevelOutcome::Stalled(gn);
                }
                since_restart = 0;
                dir = z.iter().map(|v| -v).collect();
                continue;
            }
        }
        since_restart += 1;
        let new_grad = prob.gradient(&st.u, eps);
        if since_restart % 50 == 0 {
            diag = diag_preconditioner(prob, &st.u, eps, newton);
        }
        let new_z: Vec<f64> = new_grad.iter().zip(&diag).map(|(g, d)| g / d).collect();
        let num: f64 = new_grad.iter().zip(new_z.iter().zip(&z)).map(|(g, (zn, zo))| g * (zn - zo)).sum();
        let den = dot(&grad, &z);
        let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
        dir = new_z.iter().zip(&dir).map(|(zn, d)| -zn + beta * d).collect();
        grad = new_grad;
        z = new_z;
    }
}

/// Minimizes the regularized discrete `I_p` with `u = g` on boundary nodes.
pub fn solve_p_poisson(grid: &Grid, f: &ScalarField, g: &ScalarField, cfg: &SolveConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let mut eps_list = cfg.validate(grid)?;
    for (name, fld) in [("f", f), ("g", g)] {
        if fld.len() != grid.len() {
            return Err(Error::param(name, "field does not match the grid"));
        }
        if fld.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::param(name, "field has non-finite values"));
        }
    }
    let mut u = match &cfg.warm_start {
        Some(w) => {
            if w.len() != grid.len() {
                return Err(Error::param("warm_start", "field does not match the grid"));
            }
            eps_list = vec![*eps_list.last().unwrap()];
            w.clone()
        }
        None => g.clone(),
    };
    for v in grid.boundary_nodes() {
        u.values_mut()[v] = g[v];
    }
    let eps_final = *eps_list.last().unwrap();
    let prob = Problem {
        grid,
        st: CornerStencil::new(grid),
        f,
        p: cfg.p,
        hn: grid.cell_volume(),
    };
    let e0 = prob.energy(&u, eps_list[0]);
    let mut st = State {
        u,
        energy: e0,
        iterations: 0,
        trace: vec![e0],
        used: cfg.optimizer,
    };
    let mut newton = match cfg.optimizer {
        Optimizer::Newton => Some(Newton::new(&prob)),
        Optimizer::NonlinearCg => None,
    };
    let mut final_gn = f64::NAN;
    let mut final_tol = f64::NAN;
    for (level, &eps) in eps_list.iter().enumerate() {
        let last = level + 1 == eps_list.len();
        st.energy = prob.energy(&st.u, eps);
        if level > 0 {
            st.trace.push(st.energy);
        }
        let tol = |u: &ScalarField| {
            let t = prob.tolerance(cfg, u);
            if last {
                t
            } else {
                t * 1e4
            }
        };
        let mut outcome = match (&mut newton, st.used) {
            (Some(nw), Optimizer::Newton) => newton_level(&prob, cfg, nw, &mut st, eps, &tol),
            _ => cg_level(&prob, cfg, &mut newton, &mut st, eps, &tol),
        };
        if matches!(outcome, LevelOutcome::Stalled(_)) && st.used == Optimizer::Newton {
            outcome = cg_level(&prob, cfg, &mut newton, &mut st, eps, &tol);
        }
        match outcome {
            LevelOutcome::Converged(gn) => {
                final_gn = gn;
                final_tol = tol(&st.u);
            }
            LevelOutcome::Stalled(gn) | LevelOutcome::OutOfIterations(gn) => {
                return Err(Error::NoConvergence {
                    iterations: st.iterations,
                    grad_norm: gn,
                    grad_tol: tol(&st.u),
                    energy_trace: st.trace,
                });
            }
        }
    }
    let grads = prob.st.gradients(&st.u);
    let e_p = prob.st.power_sum(&grads, cfg.p, 0.0);
    let fu = integrate_product(grid, f, &st.u);
    // weak form tested with the interior part of u; equals E_p when g = 0
    let flux = prob.st.flux_gradient(&grads, cfg.p, 0.0);
    let tested: f64 = grid.interior_nodes().iter().zip(&flux).map(|(&v, fl)| fl * st.u[v]).sum();
    Ok(SolveReport {
        frame: grid.frame().name().to_string(),
        resolution: grid.resolution().to_vec(),
        p: cfg.p,
        eps_final,
        duality_gap: (tested - fu).abs(),
        e_p,
        u: st.u,
        iterations: st.iterations,
        final_grad_norm: final_gn,
        grad_tol: final_tol,
        energy_trace: st.trace,
        optimizer_used: st.used,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpIdentities {
    /// `|int |Xu_p|^p - int f u_p| / (1 + E_p)`.
    pub gap_weak: f64,
    /// `E_p - (int f u_p / ||Xu_p||_p)^{p/(p-1)}`.
    pub gap_thompson: f64,
}

pub fn ep_identities(grid: &Grid, report: &SolveReport, f: &ScalarField) -> EpIdentities {
    field_identities(grid, &report.u, report.p, f)
}

/// [`ep_identities`] for a field computed elsewhere, e.g. one step of a sweep.
pub fn field_identities(grid: &Grid, u: &ScalarField, p: f64, f: &ScalarField) -> EpIdentities {
    let e_p = p_energy(grid, u, p);
    let fu = integrate_product(grid, f, u);
    let gap_weak = (e_p - fu).abs() / (1.0 + e_p);
    let gap_thompson = if e_p == 0.0 {
        0.0
    } else {
        let norm = e_p.powf(1.0 / p);
        e_p - (fu / norm).abs().powf(p / (p - 1.0))
    };
    EpIdentities { gap_weak, gap_thompson }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FluxCheck {
    /// Sup of `|-div V - f|` over interior nodes at least two cells inside.
    pub flux_residual: f64,
    /// `|int |V|^{p'} - E_p| / (1 + E_p)`.
    pub flux_energy_gap: f64,
}

/// Dirichlet-principle check with the flux `V = |Xu|^{p-2} Xu`.
pub fn dirichlet_flux_check(grid: &Grid, report: &SolveReport, f: &ScalarField) -> FluxCheck {
    let p = report.p;
    let st = CornerStencil::new(grid);
    let g = st.gradients(&report.u);
    let v = st.fluxes(&g, p, 0.0);
    let div = st.divergence(grid, &v);
    let flux_residual = grid
        .interior_nodes()
        .iter()
        .filter(|&&k| grid.depth(k) >= 2)
        .map(|&k| (-div[k] - f[k]).abs())
        .fold(0.0, f64::max);
    let q = p / (p - 1.0);
    let v_energy = st.power_sum(&v, q, 0.0);
    let e_p = st.power_sum(&g, p, 0.0);
    FluxCheck {
        flux_residual,
        flux_energy_gap: (v_energy - e_p).abs() / (1.0 + e_p),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonVerdict {
    pub passed: bool,
    pub max_diff: f64,
    pub max_boundary_diff: f64,
    /// `max(u - v) - max_boundary(u - v)`, positive values are violations.
    pub worst_violation: f64,
    pub worst_node: usize,
    pub tol: f64,
}

/// `1e-6 + 10 h`.
pub fn default_comparison_tol(grid: &Grid) -> f64 {
    1e-6 + 10.0 * grid.h()
}

/// Checks `max(u - v) <= max_boundary(u - v) + tol`.
pub fn comparison_check(grid: &Grid, u: &SolveReport, v: &SolveReport, tol: f64) -> Result<ComparisonVerdict> {
    if u.u.len() != grid.len() || v.u.len() != grid.len() || u.resolution != v.resolution || u.frame != v.frame {
        return Err(Error::param("grid", "reports come from different grids"));
    }
    if u.p != v.p {
        return Err(Error::param("p", "reports use different exponents"));
    }
    let diff: Vec<f64> = u.u.values().iter().zip(v.u.values()).map(|(a, b)| a - b).collect();
    let max_boundary_diff = grid.boundary_nodes().map(|k| diff[k]).fold(f64::NEG_INFINITY, f64::max);
    let (worst_node, max_diff) = diff
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, d)| if d > acc.1 { (k, d) } else { acc });
    let worst_violation = max_diff - max_boundary_diff;
    Ok(ComparisonVerdict {
        passed: worst_violation <= tol,
        max_diff,
        max_boundary_diff,
        worst_violation,
        worst_node,
        tol,
    })
}

/// Closed-form solution of `-(|u'|^{p-2} u')' = 1` on `(0, 1)` with zero ends.
pub fn exact_1d(p: f64, x: f64) -> f64 {
    let q = p / (p - 1.0);
    (p - 1.0) / p * (0.5f64.powf(q) - (x - 0.5).abs().powf(q))
}
