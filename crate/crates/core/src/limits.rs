//! The p -> infinity harness: sweeps over p, energy monotonicity, comparison
//! with a limit candidate, the Lipschitz bound, AMLE spot checks and the
//! residuals of the limit system.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::eikonal::{solve_eikonal, Source};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, sup_horizontal_norm, sup_norm, x_gradient, Grid, ScalarField};
use crate::ppoisson::{p_energy, solve_p_poisson, SolveConfig};
use crate::stencil::CornerStencil;
use crate::viscosity::{eikonal_residual, infinity_laplacian, operator_nodes};

pub const DEFAULT_P_LIST: [f64; 5] = [4.0, 8.0, 16.0, 32.0, 64.0];
/// Exponents `q` of the recorded `||Xu_p||_{L^q}` samples.
pub const LQ_SAMPLES: [f64; 3] = [1.0, 2.0, 4.0];
pub const TOL_LIP: f64 = 0.05;
pub const TOL_AMLE: f64 = 0.05;

#[derive(Debug, Clone)]
pub enum SweepData {
    /// Source term `f >= 0` with zero boundary values.
    Source(ScalarField),
    /// `f = 0` with boundary values read off a field given on the whole grid.
    Boundary(ScalarField),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    NonHomogeneous,
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    /// Boundary distance field of the frame; used when `f > 0` at every interior node.
    Eikonal,
    LargestP,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Template for the per-p solves; its `p` and `warm_start` are overwritten.
    pub solve: SolveConfig,
    pub warm_start: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            solve: SolveConfig::new(2.0),
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub p: f64,
    #[serde(rename = "E_p")]
    pub e_p: f64,
    #[serde(rename = "N_p")]
    pub n_p: f64,
    pub sup_gap: f64,
    /// `(q, ||Xu_p||_{L^q})`.
    pub lq_norms: Vec<(f64, f64)>,
    pub iterations: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityViolation {
    pub p_from: f64,
    pub p_to: f64,
    pub increase: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    /// Relative: `N_{p_{k+1}} <= N_{p_k} + tol_mono (1 + N_{p_k})`.
    pub tol_mono: f64,
    /// At the largest p.
    pub tol_limit: f64,
    pub tol_lip: f64,
    pub tol_amle: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub mode: Mode,
    pub p_list: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub fields: Vec<ScalarField>,
    pub f: ScalarField,
    /// Boundary data, `None` in non-homogeneous mode.
    pub g: Option<ScalarField>,
    pub limit_kind: LimitKind,
    pub limit: ScalarField,
    /// Quadrature mass of the energy, used in `N_p`.
    pub measure: f64,
    /// `max |u_p - g|` over boundary nodes across the sweep.
    pub boundary_mismatch: f64,
    pub monotonicity_violations: Vec<MonotonicityViolation>,
    pub tolerances: Tolerances,
    pub h: f64,
}

#[derive(Serialize)]
struct SweepJson<'a> {
    mode: Mode,
    p: Vec<f64>,
    #[serde(rename = "E_p")]
    e_p: Vec<f64>,
    #[serde(rename = "N_p")]
    n_p: Vec<f64>,
    sup_gap: Vec<f64>,
    runtime_s: Vec<f64>,
    lq_norms: Vec<&'a [(f64, f64)]>,
    limit: LimitKind,
    measure: f64,
    boundary_mismatch: f64,
    monotonicity_violations: &'a [MonotonicityViolation],
    tolerances: &'a Tolerances,
}

impl SweepReport {
    pub fn to_json(&self) -> Result<String> {
        let col = |f: fn(&SweepEntry) -> f64| self.entries.iter().map(f).collect::<Vec<_>>();
        let j = SweepJson {
            mode: self.mode,
            p: self.p_list.clone(),
            e_p: col(|e| e.e_p),
            n_p: col(|e| e.n_p),
            sup_gap: col(|e| e.sup_gap),
            runtime_s: col(|e| e.runtime_s),
            lq_norms: self.entries.iter().map(|e| e.lq_norms.as_slice()).collect(),
            limit: self.limit_kind,
            measure: self.measure,
            boundary_mismatch: self.boundary_mismatch,
            monotonicity_violations: &self.monotonicity_violations,
            tolerances: &self.tolerances,
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn field_at(&self, p: f64) -> Option<&ScalarField> {
        self.p_list.iter().position(|q| *q == p).map(|k| &self.fields[k])
    }

    pub fn largest(&self) -> &ScalarField {
        self.fields.last().expect("non-empty sweep")
    }
}

/// `3h + sup|target| / (p - 1)`: grid error plus a tail that vanishes as p grows.
pub fn tol_limit(h: f64, p: f64, target: &ScalarField) -> f64 {
    3.0 * h + sup_norm(target) / (p - 1.0)
}

fn check_p_list(p_list: &[f64]) -> Result<()> {
    if p_list.is_empty() {
        return Err(Error::param("p_list", "empty"));
    }
    if p_list.windows(2).any(|w| w[1] <= w[0]) || p_list.iter().any(|p| !p.is_finite()) {
        return Err(Error::param("p_list", "must be finite and strictly increasing"));
    }
    if p_list[0] < 4.0 {
        return Err(Error::param("p_list", format!("smallest p must be at least 4, got {}", p_list[0])));
    }
    Ok(())
}

fn monotonicity_violations(entries: &[SweepEntry], tol: f64) -> Vec<MonotonicityViolation> {
    entries
        .windows(2)
        .filter(|w| w[1].n_p > w[0].n_p + tol * (1.0 + w[0].n_p))
        .map(|w| MonotonicityViolation {
            p_from: w[0].p,
            p_to: w[1].p,
            increase: w[1].n_p - w[0].n_p,
        })
        .collect()
}

pub fn p_sweep(grid: &Grid, data: &SweepData, p_list: &[f64], cfg: &SweepConfig) -> Result<SweepReport> {
    check_p_list(p_list)?;
    let (mode, f, g) = match data {
        SweepData::Source(f) => {
            if f.len() != grid.len() {
                return Err(Error::param("f", "field does not match the grid"));
            }
            if let Some(v) = f.values().iter().find(|v| **v < 0.0) {
                return Err(Error::param(
                    "f",
                    format!("the limit p -> infinity is characterized only for f >= 0; found f = {v}"),
                ));
            }
            (Mode::NonHomogeneous, f.clone(), ScalarField::zeros(grid))
        }
        SweepData::Boundary(g) => {
            if g.len() != grid.len() {
                return Err(Error::param("g", "boundary data must be given on the whole grid"));
            }
            (Mode::Homogeneous, ScalarField::zeros(grid), g.clone())
        }
    };
    let measure = CornerStencil::new(grid).measure();
    let mut fields: Vec<ScalarField> = Vec::with_capacity(p_list.len());
    let mut stats = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let mut sc = cfg.solve.clone();
        sc.p = p;
        sc.warm_start = match (cfg.warm_start, fields.last()) {
            (true, Some(prev)) => Some(prev.clone()),
            _ => None,
        };
        let t = Instant::now();
        let rep = solve_p_poisson(grid, &f, &g, &sc)?;
        let xu = x_gradient(grid, &rep.u);
        let lq = LQ_SAMPLES.iter().map(|&q| Ok((q, lp_norm(grid, &xu, q)?))).collect::<Result<Vec<_>>>()?;
        stats.push((p, rep.e_p, rep.iterations, lq, t.elapsed().as_secs_f64()));
        fields.push(rep.u);
    }
    let positive = grid.interior_nodes().iter().all(|&v| f[v] > 0.0);
    let (limit_kind, limit) = if mode == Mode::NonHomogeneous && positive {
        (LimitKind::Eikonal, solve_eikonal(grid, &Source::Boundary)?.d)
    } else {
        (LimitKind::LargestP, fields.last().unwrap().clone())
    };
    let entries: Vec<SweepEntry> = stats
        .into_iter()
        .zip(&fields)
        .map(|((p, e_p, iterations, lq_norms, runtime_s), u)| SweepEntry {
            p,
            e_p,
            n_p: (e_p / measure).powf((p - 1.0) / p),
            sup_gap: u.max_abs_diff(&limit),
            lq_norms,
            iterations,
            runtime_s,
        })
        .collect();
    let boundary_mismatch = fields
        .iter()
        .flat_map(|u| grid.boundary_nodes().map(|v| (u[v] - g[v]).abs()))
        .fold(0.0, f64::max);
    let tol_mono = 1e-6;
    let h = grid.h();
    Ok(SweepReport {
        mode,
        p_list: p_list.to_vec(),
        monotonicity_violations: match mode {
            Mode::NonHomogeneous => monotonicity_violations(&entries, tol_mono),
            Mode::Homogeneous => Vec::new(),
        },
        tolerances: Tolerances {
            tol_mono,
            tol_limit: tol_limit(h, *p_list.last().unwrap(), &limit),
            tol_lip: TOL_LIP,
            tol_amle: TOL_AMLE,
        },
        entries,
        fields,
        f,
        g: (mode == Mode::Homogeneous).then_some(g),
        limit_kind,
        limit,
        measure,
        boundary_mismatch,
        h,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityVerdict {
    pub passed: bool,
    pub n_p: Vec<f64>,
    pub violations: Vec<MonotonicityViolation>,
    pub tol_mono: f64,
}

pub fn monotonicity_check(report: &SweepReport) -> Result<MonotonicityVerdict> {
    if report.mode != Mode::NonHomogeneous {
        return Err(Error::param("report", "monotonicity of N_p is stated for the non-homogeneous problem"));
    }
    let violations = monotonicity_violations(&report.entries, report.tolerances.tol_mono);
    Ok(MonotonicityVerdict {
        passed: violations.is_empty(),
        n_p: report.entries.iter().map(|e| e.n_p).collect(),
        violations,
        tol_mono: report.tolerances.tol_mono,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitComparison {
    pub sup_gaps: Vec<f64>,
    /// `|E_{p_max} - int f target|`; no extrapolation in p is attempted.
    pub einf_gap: f64,
    /// `max(-u_p)` over the sweep; the lower bound holds when this is at most `tol_limit`.
    pub lower_violation: f64,
    /// `max(u_{p_max} - target)`.
    pub upper_violation: f64,
    pub tol_limit: f64,
    pub bounds_hold: bool,
}

pub fn limit_compare(grid: &Grid, report: &SweepReport, target: &ScalarField) -> Result<LimitComparison> {
    if target.len() != grid.len() || report.limit.len() != grid.len() {
        return Err(Error::param("target", "target and sweep must live on the same grid"));
    }
    let sup_gaps = report.fields.iter().map(|u| u.max_abs_diff(target)).collect();
    let ft = grid.cell_volume() * grid.interior_nodes().iter().map(|&v| report.f[v] * target[v]).sum::<f64>();
    let einf_gap = (report.entries.last().unwrap().e_p - ft).abs();
    let lower_violation = report
        .fields
        .iter()
        .flat_map(|u| u.values().iter().map(|v| -v))
        .fold(f64::NEG_INFINITY, f64::max);
    let top = report.largest();
    let upper_violation = top
        .values()
        .iter()
        .zip(target.values())
        .map(|(u, t)| u - t)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = tol_limit(grid.h(), *report.p_list.last().unwrap(), target);
    Ok(LimitComparison {
        sup_gaps,
        einf_gap,
        lower_violation,
        upper_violation,
        tol_limit: tol,
        bounds_hold: lower_violation <= tol && upper_violation <= tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyBound {
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzVerdict {
    /// Sup over interior nodes of `|Xu_{p_max}|`.
    pub sup_xu: f64,
    /// Sup over all nodes of `|Xg|`.
    pub sup_xg: f64,
    /// `sup_xg + tol_lip - sup_xu`.
    pub margin: f64,
    pub energy_bounds: Vec<EnergyBound>,
    pub passed: bool,
}

pub fn lipschitz_bound_check(grid: &Grid, report: &SweepReport) -> Result<LipschitzVerdict> {
    let g = report
        .g
        .as_ref()
        .ok_or_else(|| Error::param("g", "the Lipschitz bound needs boundary data given on the whole grid"))?;
    let sup_xu = sup_horizontal_norm(grid, &x_gradient(grid, report.largest()), 1);
    let sup_xg = sup_horizontal_norm(grid, &x_gradient(grid, g), 0);
    let energy_bounds: Vec<EnergyBound> = report
        .p_list
        .iter()
        .zip(&report.fields)
        .map(|(&p, u)| {
            let lhs = p_energy(grid, u, p);
            let rhs = p_energy(grid, g, p);
            EnergyBound {
                p,
                lhs,
                rhs,
                holds: lhs <= rhs * (1.0 + 1e-6) + 1e-12,
            }
        })
        .collect();
    let margin = sup_xg + report.tolerances.tol_lip - sup_xu;
    Ok(LipschitzVerdict {
        sup_xu,
        sup_xg,
        margin,
        passed: margin >= 0.0 && energy_bounds.iter().all(|b| b.holds),
        energy_bounds,
    })
}

/// Index box `lo..=hi` of grid nodes.
#[derive(Debug, Clone, Serialize)]
pub struct SubBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmleEntry {
    pub sub_box: SubBox,
    /// `||Xu||_{inf, V}`.
    pub lhs: f64,
    /// `||Xv||_{inf, V}` for the competitor `v`.
    pub rhs: f64,
    /// `rhs + tol - lhs`.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmleVerdict {
    pub entries: Vec<AmleEntry>,
    pub p_check: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compares `u` on each sub-box `V` with the homogeneous `p_check` solution
/// sharing its values on the boundary of `V`. Sup norms are taken over the
/// interior nodes of `V`.
pub fn amle_spot_check(grid: &Grid, u: &ScalarField, subdomains: &[SubBox], p_check: f64, tol: f64) -> Result<AmleVerdict> {
    if !(p_check >= 32.0) {
        return Err(Error::param("p_check", format!("need p_check >= 32, got {p_check}")));
    }
    if u.len() != grid.len() {
        return Err(Error::param("u", "field does not match the grid"));
    }
    let res = grid.resolution();
    for b in subdomains {
        let strict = b.lo.len() == res.len()
            && b.hi.len() == res.len()
            && (0..res.len()).all(|k| b.lo[k] >= 1 && b.hi[k] + 2 <= res[k] && b.hi[k] >= b.lo[k] + 2);
        if !strict {
            return Err(Error::param("subdomains", format!("sub-box {b:?} must lie strictly inside the grid")));
        }
    }
    let entries = subdomains
        .par_iter()
        .map(|b| {
            let (sub, map) = grid.sub_box(&b.lo, &b.hi)?;
            let data = ScalarField::new(&sub, map.iter().map(|&v| u[v]).collect())?;
            let zero = ScalarField::zeros(&sub);
            let v = solve_p_poisson(&sub, &zero, &data, &SolveConfig::new(p_check))?.u;
            let lhs = sup_horizontal_norm(&sub, &x_gradient(&sub, &data), 1);
            let rhs = sup_horizontal_norm(&sub, &x_gradient(&sub, &v), 1);
            let margin = rhs + tol - lhs;
            Ok(AmleEntry {
                sub_box: b.clone(),
                lhs,
                rhs,
                margin,
                passed: margin >= 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AmleVerdict {
        passed: entries.iter().all(|e| e.passed),
        entries,
        p_check,
        tol,
    })
}

#[derive(Debug, Clone)]
pub struct LimitResiduals {
    /// `Delta_{X,inf} u` on `inf_mask`, 0 elsewhere.
    pub inf_lap: ScalarField,
    /// `|Xu| - 1` on `eik_mask`, 0 elsewhere.
    pub eik: ScalarField,
    /// Nodes where `f = 0` more than two cells away from `{f > 0}`.
    pub inf_mask: Vec<bool>,
    /// Interior nodes where `f > 0`.
    pub eik_mask: Vec<bool>,
}

pub fn limit_system_residuals(grid: &Grid, u: &ScalarField, f: &ScalarField) -> Result<LimitResiduals> {
    if u.len() != grid.len() || f.len() != grid.len() {
        return Err(Error::param("u", "fields do not match the grid"));
    }
    let n = grid.dim();
    let mut near_positive = vec![false; grid.len()];
    let mut idx = vec![0usize; n];
    let reach = 2i64;
    let width = (2 * reach + 1) as usize;
    for v in (0..grid.len()).filter(|&v| f[v] > 0.0) {
        grid.multi_index_into(v, &mut idx);
        'offsets: for mut c in 0..width.pow(n as u32) {
            let mut j = vec![0usize; n];
            for k in 0..n {
                let t = idx[k] as i64 + (c % width) as i64 - reach;
                c /= width;
                if t < 0 || t >= grid.resolution()[k] as i64 {
                    continue 'offsets;
                }
                j[k] = t as usize;
            }
            near_positive[grid.node_at(&j)] = true;
        }
    }
    let mut inf_mask = vec![false; grid.len()];
    for v in operator_nodes(grid) {
        inf_mask[v] = !near_positive[v];
    }
    let eik_mask: Vec<bool> = (0..grid.len()).map(|v| grid.is_interior(v) && f[v] > 0.0).collect();
    let il = infinity_laplacian(grid, u);
    let er = eikonal_residual(grid, u);
    let pick = |src: &ScalarField, mask: &[bool]| {
        ScalarField::from_vec_unchecked((0..grid.len()).map(|v| if mask[v] { src[v] } else { 0.0 }).collect())
    };
    Ok(LimitResiduals {
        inf_lap: pick(&il, &inf_mask),
        eik: pick(&er, &eik_mask),
        inf_mask,
        eik_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Frame;
    use crate::ppoisson::exact_1d;

    fn line(nodes: usize) -> Grid {
        Grid::uniform(Frame::euclidean(1), nodes).unwrap()
    }

    #[test]
    fn one_dimensional_sweep_matches_closed_form() {
        let g = line(257);
        let f = ScalarField::constant(&g, 1.0);
        let rep = p_sweep(&g, &SweepData::Source(f), &[4.0, 8.0, 16.0], &SweepConfig::default()).unwrap();
        assert_eq!(rep.limit_kind, LimitKind::Eikonal);
        assert!((rep.entries[0].sup_gap - (0.5 - exact_1d(4.0, 0.5))).abs() < 1e-3);
        for e in &rep.entries {
            // E_p = int |x - 1/2|^{p/(p-1)} dx
            let a = e.p / (e.p - 1.0);
            let exact = 2.0 * 0.5f64.powf(a + 1.0) / (a + 1.0);
            let n_exact = exact.powf((e.p - 1.0) / e.p);
            assert!((e.n_p - n_exact).abs() < 1e-4, "{} {} {}", e.p, e.n_p, n_exact);
        }
        assert!(monotonicity_check(&rep).unwrap().passed);
        assert!(rep.entries.windows(2).all(|w| w[1].sup_gap < w[0].sup_gap));
        let json = rep.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["p"].as_array().unwrap().len(), 3);
        assert!(v["N_p"].is_array() && v["E_p"].is_array() && v["runtime_s"].is_array());
    }

    #[test]
    fn zero_source_is_trivial() {
        let g = Grid::uniform(Frame::euclidean(2), 9).unwrap();
        let rep = p_sweep(&g, &SweepData::Source(ScalarField::zeros(&g)), &[4.0, 8.0], &SweepConfig::default()).unwrap();
        assert_eq!(rep.limit_kind, LimitKind::LargestP);
        assert!(rep.entries.iter().all(|e| e.e_p == 0.0 && e.n_p == 0.0));
        assert!(monotonicity_check(&rep).unwrap().passed);
        let target = ScalarField::from_fn(&g, |x| x[0].min(1.0 - x[0]));
        let cmp = limit_compare(&g, &rep, &target).unwrap();
        assert!(cmp.sup_gaps.iter().all(|s| (s - sup_norm(&target)).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = line(9);
        let neg = ScalarField::from_fn(&g, |x| x[0] - 0.5);
        assert!(matches!(
            p_sweep(&g, &SweepData::Source(neg), &[4.0], &SweepConfig::default()),
            Err(Error::Parameter { .. })
        ));
        let one = ScalarField::constant(&g, 1.0);
        for bad in [vec![8.0, 4.0], vec![2.0, 4.0], vec![]] {
            assert!(p_sweep(&g, &SweepData::Source(one.clone()), &bad, &SweepConfig::default()).is_err());
        }
    }

    #[test]
    fn affine_boundary_data_is_reproduced() {
        let g = Grid::uniform(Frame::euclidean(2), 9).unwrap();
        let a = ScalarField::from_fn(&g, |x| 0.2 + x[0] - 0.5 * x[1]);
        let rep = p_sweep(&g, &SweepData::Boundary(a.clone()), &[4.0, 16.0], &SweepConfig::default()).unwrap();
        assert!(rep.fields.iter().all(|u| u.max_abs_diff(&a) < 1e-8));
        assert!(monotonicity_check(&rep).is_err());
        let lip = lipschitz_bound_check(&g, &rep).unwrap();
        assert!((lip.sup_xu - lip.sup_xg).abs() < 1e-8 && lip.passed);
        let amle = amle_spot_check(&g, &a, &[SubBox { lo: vec![1, 2], hi: vec![5, 6] }], 32.0, TOL_AMLE).unwrap();
        assert!(amle.entries[0].lhs - amle.entries[0].rhs < 1e-8 && amle.passed);
        assert!(amle_spot_check(&g, &a, &[SubBox { lo: vec![0, 2], hi: vec![5, 6] }], 32.0, TOL_AMLE).is_err());
        assert!(amle_spot_check(&g, &a, &[SubBox { lo: vec![1, 2], hi: vec![5, 6] }], 8.0, TOL_AMLE).is_err());
        let c = ScalarField::constant(&g, 2.0);
        let rep = p_sweep(&g, &SweepData::Boundary(c), &[4.0], &SweepConfig::default()).unwrap();
        let lip = lipschitz_bound_check(&g, &rep).unwrap();
        assert!(lip.sup_xu == 0.0 && lip.sup_xg == 0.0);
    }

    #[test]
    fn lipschitz_needs_boundary_field() {
        let g = line(9);
        let rep = p_sweep(&g, &SweepData::Source(ScalarField::constant(&g, 1.0)), &[4.0], &SweepConfig::default()).unwrap();
        assert!(matches!(lipschitz_bound_check(&g, &rep), Err(Error::Parameter { .. })));
    }

    #[test]
    fn residual_masks() {
        let g = Grid::uniform(Frame::euclidean(2), 33).unwrap();
        let f = ScalarField::from_fn(&g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
        let u = ScalarField::from_fn(&g, |x| x[0] + x[1]);
        let r = limit_system_residuals(&g, &u, &f).unwrap();
        assert!(r.inf_mask.iter().any(|b| *b) && r.eik_mask.iter().any(|b| *b));
        assert!(r.inf_mask.iter().zip(&r.eik_mask).all(|(a, b)| !(*a && *b)));
        assert!(r.inf_lap.values().iter().all(|v| v.abs() < 1e-10));
        let zero = ScalarField::zeros(&g);
        let r = limit_system_residuals(&g, &u, &zero).unwrap();
        assert!(r.eik_mask.iter().all(|b| !*b));
        let one = ScalarField::constant(&g, 1.0);
        let r = limit_system_residuals(&g, &u, &one).unwrap();
        assert!(r.inf_mask.iter().all(|b| !*b));
    }
}
