//! Grid versions of the horizontal Laplacian, the infinity-Laplacian, the
//! non-divergence p-operator and the eikonal residual, and a pointwise probe
//! of the viscosity sign conditions with quadratic test functions.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{x_gradient, x_hessian, Grid, ScalarField, HESSIAN_DEPTH};

/// Nodes where the second-order operators below are defined; all other
/// nodes hold 0 in the returned fields.
pub fn operator_nodes(grid: &Grid) -> impl Iterator<Item = usize> + '_ {
    (0..grid.len()).filter(|&v| grid.depth(v) >= HESSIAN_DEPTH)
}

fn div_corrections(grid: &Grid) -> Vec<f64> {
    let (n, m) = (grid.dim(), grid.m());
    let mut out = vec![0.0; grid.len() * m];
    let mut deriv = vec![0.0; m * n * n];
    let mut x = vec![0.0; n];
    for v in 0..grid.len() {
        grid.coords_into(v, &mut x);
        grid.frame().coeff_deriv_into(&x, &mut deriv);
        for j in 0..m {
            out[v * m + j] = (0..n).map(|i| deriv[(j * n + i) * n + i]).sum();
        }
    }
    out
}

/// `Xu X^2u Xu^T` at every node at least two cells inside.
pub fn infinity_laplacian(grid: &Grid, u: &ScalarField) -> ScalarField {
    let m = grid.m();
    let xu = x_gradient(grid, u);
    let hs = x_hessian(grid, u);
    let mut out = vec![0.0; grid.len()];
    for v in operator_nodes(grid) {
        let h = hs.at(v).expect("depth checked");
        let g = xu.at(v);
        out[v] = (0..m).map(|i| (0..m).map(|j| g[i] * h[i * m + j] * g[j]).sum::<f64>()).sum();
    }
    ScalarField::from_vec_unchecked(out)
}

/// `trace X^2u + sum_j X_j u sum_i d c_{j,i} / d x_i` at every node at least
/// two cells inside.
pub fn x_laplacian(grid: &Grid, u: &ScalarField) -> ScalarField {
    let m = grid.m();
    let xu = x_gradient(grid, u);
    let hs = x_hessian(grid, u);
    let corr = div_corrections(grid);
    let mut out = vec![0.0; grid.len()];
    for v in operator_nodes(grid) {
        let h = hs.at(v).expect("depth checked");
        let g = xu.at(v);
        out[v] = (0..m).map(|j| h[j * m + j] + g[j] * corr[v * m + j]).sum();
    }
    ScalarField::from_vec_unchecked(out)
}

fn require_p(p: f64) -> Result<()> {
    if !(p >= 4.0 && p.is_finite()) {
        return Err(Error::param(
            "p",
            format!("the non-divergence p-operator is continuous in the gradient only for p >= 4, got {p}"),
        ));
    }
    Ok(())
}

fn p_operator(p: f64, grad_norm: f64, lap: f64, inf_lap: f64) -> f64 {
    -grad_norm.powf(p - 2.0) * lap - (p - 2.0) * grad_norm.powf(p - 4.0) * inf_lap
}

/// `-|Xu|^{p-2} Delta_X u - (p-2) |Xu|^{p-4} Delta_{X,inf} u - f`.
pub fn p_operator_residual(grid: &Grid, u: &ScalarField, p: f64, f: &ScalarField) -> Result<ScalarField> {
    require_p(p)?;
    let norms = x_gradient(grid, u).norms();
    let lap = x_laplacian(grid, u);
    let inf = infinity_laplacian(grid, u);
    let mut out = vec![0.0; grid.len()];
    for v in operator_nodes(grid) {
        out[v] = p_operator(p, norms[v], lap[v], inf[v]) - f[v];
    }
    Ok(ScalarField::from_vec_unchecked(out))
}

/// `|Xu| - 1` at every node.
pub fn eikonal_residual(grid: &Grid, u: &ScalarField) -> ScalarField {
    let xu = x_gradient(grid, u);
    ScalarField::from_vec_unchecked((0..grid.len()).map(|v| xu.norm_at(v) - 1.0).collect())
}

#[derive(Debug, Clone)]
pub enum Equation {
    InfLaplace,
    Eikonal,
    PPoisson { p: f64, f: ScalarField },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Sub,
    Super,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Pass,
    Violation,
    /// No admissible test function was found; not a pass.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct ProbeOptions {
    pub budget: usize,
    /// Radius of the touching ball, in multiples of `h`.
    pub radius_cells: f64,
    /// Violation tolerance, in multiples of `h`.
    pub tol_cells: f64,
    pub kappa: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            budget: 512,
            radius_cells: 8.0,
            tol_cells: 10.0,
            kappa: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestFunction {
    pub q: Vec<f64>,
    /// Row-major `n x n`.
    pub hessian: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeVerdict {
    pub point: Vec<f64>,
    pub side: Side,
    pub status: ProbeStatus,
    pub sampled: usize,
    pub admissible: usize,
    /// Largest amount by which an admissible test function breaks the sign
    /// condition; 0 when none does.
    pub worst_violation: f64,
    /// Admissible test functions breaking the sign condition beyond the tolerance.
    pub violations: Vec<TestFunction>,
    pub tol: f64,
}

/// Halton point `k` (starting at 1) in `[0, 1)^dims`.
fn halton(k: usize, dims: usize) -> Vec<f64> {
    const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    PRIMES[..dims]
        .iter()
        .map(|&b| {
            let (mut f, mut r, mut i) = (1.0, 0.0, k);
            while i > 0 {
                f /= b as f64;
                r += f * (i % b) as f64;
                i /= b;
            }
            r
        })
        .collect()
}

/// Evaluates `F(x0, Xphi, X^2 phi)` for a quadratic with Euclidean gradient
/// `q` and Hessian `mm` at the node, composing exact derivatives with the
/// frame coefficients and their derivatives.
fn equation_value(grid: &Grid, eq: &Equation, node: usize, q: &[f64], mm: &[f64]) -> f64 {
    let (n, m) = (grid.dim(), grid.m());
    let x = grid.coords(node);
    let c = grid.coeff_at(node);
    let mut deriv = vec![0.0; m * n * n];
    grid.frame().coeff_deriv_into(&x, &mut deriv);
    let xphi: Vec<f64> = (0..m).map(|j| (0..n).map(|i| c[j * n + i] * q[i]).sum()).collect();
    let norm = xphi.iter().map(|v| v * v).sum::<f64>().sqrt();
    // raw[i][j] = X_i (X_j phi)
    let mut raw = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..n {
                for l in 0..n {
                    acc += c[i * n + k] * (deriv[(j * n + l) * n + k] * q[l] + c[j * n + l] * mm[k * n + l]);
                }
            }
            raw[i * m + j] = acc;
        }
    }
    let sym = |i: usize, j: usize| 0.5 * (raw[i * m + j] + raw[j * m + i]);
    let inf: f64 = (0..m).map(|i| (0..m).map(|j| xphi[i] * sym(i, j) * xphi[j]).sum::<f64>()).sum();
    match eq {
        Equation::InfLaplace => -inf,
        Equation::Eikonal => norm - 1.0,
        Equation::PPoisson { p, f } => {
            let corr: Vec<f64> = (0..m).map(|j| (0..n).map(|i| deriv[(j * n + i) * n + i]).sum()).collect();
            let lap: f64 = (0..m).map(|j| sym(j, j) + xphi[j] * corr[j]).sum();
            p_operator(*p, norm, lap, inf) - f[node]
        }
    }
}

fn centered_model(grid: &Grid, u: &ScalarField, node: usize) -> (Vec<f64>, Vec<f64>) {
    let n = grid.dim();
    let h = grid.spacing();
    let s = grid.strides();
    let mut q = vec![0.0; n];
    let mut mm = vec![0.0; n * n];
    for i in 0..n {
        q[i] = (u[node + s[i]] - u[node - s[i]]) / (2.0 * h[i]);
        mm[i * n + i] = (u[node + s[i]] - 2.0 * u[node] + u[node - s[i]]) / (h[i] * h[i]);
        for j in i + 1..n {
            let v = (u[node + s[i] + s[j]] - u[node + s[i] - s[j]] - u[node - s[i] + s[j]] + u[node - s[i] - s[j]])
                / (4.0 * h[i] * h[j]);
            mm[i * n + j] = v;
            mm[j * n + i] = v;
        }
    }
    (q, mm)
}

/// Probes the viscosity sign condition at `node`.
///
/// Test functions are `u(x0) + q z + z^T M z / 2 +- kappa |z|^4` with
/// `z = x - x0` (plus sign for `Sub`, touching from above). The first
/// candidates are the centered difference model of `u` and its shifts
/// `M +- t I`; the rest perturb `(q, M)` along a Halton sequence, so a
/// larger budget only adds candidates. A candidate is admissible when `u - phi`
/// has its maximum (`Sub`) or minimum (`Super`) over the nodes of the ball
/// `B(x0, radius)` at `x0`. Since the candidates are Euclidean quadratics, a
/// violation is evidence against the viscosity property while a pass is only
/// a necessary condition.
pub fn probe_viscosity(
    grid: &Grid,
    u: &ScalarField,
    node: usize,
    equation: &Equation,
    side: Side,
    opts: &ProbeOptions,
) -> Result<ProbeVerdict> {
    if let Equation::PPoisson { p, f } = equation {
        require_p(*p)?;
        if f.len() != grid.len() {
            return Err(Error::param("f", "field does not match the grid"));
        }
    }
    if opts.budget == 0 {
        return Err(Error::param("budget", "must be positive"));
    }
    let n = grid.dim();
    let h = grid.h();
    let r0 = opts.radius_cells * h;
    let x0 = grid.coords(node);
    if node >= grid.len() || !grid.is_interior(node) || grid.frame().bounds().inner_margin(&x0) < r0 {
        return Err(Error::param("x0", format!("probe point {x0:?} must be at least {r0} inside the box")));
    }
    let tol = opts.tol_cells * h;
    let reach: Vec<usize> = (0..n).map(|k| (r0 / grid.spacing()[k]).floor() as usize).collect();
    let idx0 = grid.multi_index(node);
    let mut ball = Vec::new();
    let mut off = vec![0i64; n];
    let total: usize = reach.iter().map(|r| 2 * r + 1).product();
    for mut c in 0..total {
        for k in 0..n {
            let w = 2 * reach[k] + 1;
            off[k] = (c % w) as i64 - reach[k] as i64;
            c /= w;
        }
        let z: Vec<f64> = (0..n).map(|k| off[k] as f64 * grid.spacing()[k]).collect();
        let r2: f64 = z.iter().map(|v| v * v).sum();
        if r2 == 0.0 || r2 > r0 * r0 {
            continue;
        }
        let idx: Vec<usize> = (0..n).map(|k| (idx0[k] as i64 + off[k]) as usize).collect();
        ball.push((grid.node_at(&idx), z));
    }
    let (q0, mut m0) = centered_model(grid, u, node);
    let u0 = u[node];
    // At grid scale a slope jump s looks like curvature s / h, so larger
    // Hessians would let test functions touch kinks from the wrong side.
    let m_cap = h.powf(-0.5);
    for v in &mut m0 {
        *v = v.clamp(-m_cap, m_cap);
    }
    let pin = match side {
        Side::Sub => opts.kappa,
        Side::Super => -opts.kappa,
    };
    let q_scale = 0.5 * (1.0 + q0.iter().map(|v| v * v).sum::<f64>().sqrt());
    let m_scale = 0.5 * (1.0 + m0.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let n_sym = n * (n + 1) / 2;
    let candidate = |k: usize| -> (Vec<f64>, Vec<f64>) {
        // k = 0: the model; k = 1..=8: model with M +- t I, t = 4^j h; then Halton
        let mut q = q0.clone();
        let mut mm = m0.clone();
        if k == 0 {
            return (q, mm);
        }
        if k <= 8 {
            let j = (k - 1) / 2;
            let t = 4f64.powi(j as i32) * h * m_scale;
            let s = if k % 2 == 1 { 1.0 } else { -1.0 };
            for i in 0..n {
                mm[i * n + i] += s * t;
            }
            return (q, mm);
        }
        let hs = halton(k - 8, n + n_sym);
        for i in 0..n {
            q[i] += q_scale * (2.0 * hs[i] - 1.0);
        }
        let mut t = n;
        for i in 0..n {
            for j in i..n {
                let d = m_scale * (2.0 * hs[t] - 1.0);
                t += 1;
                mm[i * n + j] += d;
                if i != j {
                    mm[j * n + i] += d;
                }
            }
        }
        (q, mm)
    };
    let mut admissible = 0;
    let mut worst = 0.0f64;
    let mut violations = Vec::new();
    for k in 0..opts.budget {
        let (q, mm) = candidate(k);
        if mm.iter().any(|v| v.abs() > m_cap) {
            continue;
        }
        let ok = ball.iter().all(|(v, z)| {
            let qz: f64 = q.iter().zip(z).map(|(a, b)| a * b).sum();
            let zmz: f64 = (0..n).map(|i| (0..n).map(|j| z[i] * mm[i * n + j] * z[j]).sum::<f64>()).sum();
            let r2: f64 = z.iter().map(|a| a * a).sum();
            let phi = u0 + qz + 0.5 * zmz + pin * r2 * r2;
            let slack = 1e-13 * (1.0 + u0.abs());
            match side {
                Side::Sub => u[*v] - phi <= slack,
                Side::Super => u[*v] - phi >= -slack,
            }
        });
        if !ok {
            continue;
        }
        admissible += 1;
        let value = equation_value(grid, equation, node, &q, &mm);
        let breach = match side {
            Side::Sub => value,
            Side::Super => -value,
        };
        worst = worst.max(breach);
        if breach > tol {
            violations.push(TestFunction { q, hessian: mm, value });
        }
    }
    let status = if admissible == 0 {
        ProbeStatus::Inconclusive
    } else if violations.is_empty() {
        ProbeStatus::Pass
    } else {
        ProbeStatus::Violation
    };
    Ok(ProbeVerdict {
        point: x0,
        side,
        status,
        sampled: opts.budget,
        admissible,
        worst_violation: worst,
        violations,
        tol,
    })
}

/// CSV `x1..xn,side,admissible_count,worst_violation`.
pub fn write_verdicts_csv(verdicts: &[ProbeVerdict], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = verdicts.first().map_or(0, |v| v.point.len());
    let mut header: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    header.extend(["side", "admissible_count", "worst_violation"].map(String::from));
    w.write_record(&header)?;
    for v in verdicts {
        let mut row: Vec<String> = v.point.iter().map(|c| format!("{c:.16e}")).collect();
        row.push(match v.side {
            Side::Sub => "sub".into(),
            Side::Super => "super".into(),
        });
        row.push(v.admissible.to_string());
        row.push(format!("{:.16e}", v.worst_violation));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
