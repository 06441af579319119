//! Carnot-Caratheodory distance fields: Lax-Friedrichs fast sweeping for
//! `|C(x) grad u| = 1`, and a control-graph Dijkstra oracle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{x_gradient, Grid, ScalarField};

pub const SWEEP_TOL: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 10_000;

/// Where the distance is measured from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// All boundary nodes (box faces and masked-out nodes).
    Boundary,
    /// The node nearest to a point.
    Point(Vec<f64>),
    /// Explicit node list.
    Nodes(Vec<usize>),
}

impl Source {
    fn resolve(&self, grid: &Grid) -> Result<Vec<usize>> {
        let nodes: Vec<usize> = match self {
            Source::Boundary => grid.boundary_nodes().collect(),
            Source::Point(x) => vec![grid
                .nearest_node(x)
                .ok_or_else(|| Error::param("source", format!("point {x:?} lies outside the grid box")))?],
            Source::Nodes(v) => {
                if let Some(bad) = v.iter().find(|&&k| k >= grid.len()) {
                    return Err(Error::param("source", format!("node {bad} is not a grid node")));
                }
                v.clone()
            }
        };
        if nodes.is_empty() {
            return Err(Error::param("source", "source set is empty"));
        }
        Ok(nodes)
    }

    fn is_point(&self) -> bool {
        !matches!(self, Source::Boundary)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct ResidualStats {
    /// Nodes where `| |Xd| - 1 |` was evaluated.
    pub checked: usize,
    /// Nodes excluded as ridge points.
    pub ridge_flagged: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
}

#[derive(Debug, Clone)]
pub struct DistanceField {
    pub d: ScalarField,
    pub source: Source,
    pub source_nodes: Vec<usize>,
    pub sweeps: usize,
    pub last_update: f64,
    pub residual: ResidualStats,
}

/// Nodewise eikonal diagnostics of a distance field.
#[derive(Debug, Clone)]
pub struct ResidualMaps {
    /// `|Xd| - 1` at every node.
    pub residual: ScalarField,
    /// Nodes far enough from the source set and the boundary to be checked.
    pub eligible: Vec<bool>,
    /// Concave kinks of `d` along some axis.
    pub ridge: Vec<bool>,
}

/// Lax-Friedrichs viscosities `sigma_i = max_x sum_j |c_{j,i}(x)|` over the grid nodes.
pub fn viscosities(grid: &Grid) -> Vec<f64> {
    let (n, m) = (grid.dim(), grid.m());
    let mut s = vec![0.0f64; n];
    for v in 0..grid.len() {
        let c = grid.coeff_at(v);
        for (i, si) in s.iter_mut().enumerate() {
            *si = si.max((0..m).map(|j| c[j * n + i].abs()).sum());
        }
    }
    s.iter().map(|x| x.max(1e-12)).collect()
}

/// Nodewise viscosities `sigma_i(x) = sum_j |c_{j,i}(x)|`, floored so every
/// node keeps a positive total; `n` entries per node.
pub fn local_viscosities(grid: &Grid) -> Vec<f64> {
    let (n, m) = (grid.dim(), grid.m());
    let mut out = Vec::with_capacity(grid.len() * n);
    for v in 0..grid.len() {
        let c = grid.coeff_at(v);
        for i in 0..n {
            out.push((0..m).map(|j| c[j * n + i].abs()).sum::<f64>().max(1e-12));
        }
    }
    out
}

fn sweep_order(grid: &Grid, dirs: usize, counter: usize, idx: &mut [usize]) -> usize {
    grid.multi_index_into(counter, idx);
    let res = grid.resolution();
    for k in 0..idx.len() {
        if dirs >> k & 1 == 1 {
            idx[k] = res[k] - 1 - idx[k];
        }
    }
    grid.node_at(idx)
}

/// Local update used inside the Gauss-Seidel sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Centered Lax-Friedrichs update with nodewise viscosities.
    LaxFriedrichs,
    /// Control update `u(x) = min_a [tau + I u(flow_a(x, tau))]` with
    /// multilinear interpolation; paths must stay in the box.
    SemiLagrangian,
}

#[derive(Debug, Clone)]
pub struct EikonalOptions {
    pub scheme: Scheme,
    /// Unit controls for the semi-Lagrangian update; `None` means
    /// [`sweep_controls`].
    pub controls: Option<Vec<Vec<f64>>>,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for EikonalOptions {
    fn default() -> Self {
        EikonalOptions {
            scheme: Scheme::SemiLagrangian,
            controls: None,
            max_sweeps: MAX_SWEEPS,
            tol: SWEEP_TOL,
        }
    }
}

/// Controls for the semi-Lagrangian update: `+-1` for one field, 32 equally
/// spaced directions for two, [`default_controls`] beyond.
pub fn sweep_controls(m: usize) -> Vec<Vec<f64>> {
    match m {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..32)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 32.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => default_controls(m),
    }
}

/// Fast sweeping solution of `|C grad u| = 1` with `u = 0` on the source,
/// using the default options.
pub fn solve_eikonal(grid: &Grid, source: &Source) -> Result<DistanceField> {
    solve_eikonal_with(grid, source, &EikonalOptions::default())
}

struct Footprint {
    // per (node, control): base node of the interpolation cell, or usize::MAX
    base: Vec<usize>,
    frac: Vec<f64>,
    controls: usize,
}

fn footprints(grid: &Grid, controls: &[Vec<f64>], tau: f64, fixed: &[bool]) -> Footprint {
    use rayon::prelude::*;
    let n = grid.dim();
    let k = controls.len();
    let bounds = grid.frame().bounds();
    let res = grid.resolution();
    let lower = bounds.lower();
    let per_node: Vec<(Vec<usize>, Vec<f64>)> = (0..grid.len())
        .into_par_iter()
        .map(|v| {
            let mut base = vec![usize::MAX; k];
            let mut frac = vec![0.0; k * n];
            if fixed[v] {
                return (base, frac);
            }
            let x = grid.coords(v);
            let mut c = vec![0.0; grid.m() * n];
            for (ci, a) in controls.iter().enumerate() {
                let y = rk4_flow(grid, &x, a, tau, &mut c);
                if !bounds.contains(&y, 1e-12) {
                    continue;
                }
                let mut b = 0usize;
                for d in 0..n {
                    let t = ((y[d] - lower[d]) / grid.spacing()[d]).max(0.0);
                    let i = (t.floor() as usize).min(res[d] - 2);
                    frac[ci * n + d] = (t - i as f64).clamp(0.0, 1.0);
                    b += i * grid.strides()[d];
                }
                base[ci] = b;
            }
            (base, frac)
        })
        .collect();
    let mut base = Vec::with_capacity(grid.len() * k);
    let mut frac = Vec::with_capacity(grid.len() * k * n);
    for (b, f) in per_node {
        base.extend(b);
        frac.extend(f);
    }
    Footprint { base, frac, controls: k }
}

pub fn solve_eikonal_with(grid: &Grid, source: &Source, opts: &EikonalOptions) -> Result<DistanceField> {
    let src = source.resolve(grid)?;
    let (n, m) = (grid.dim(), grid.m());
    let h = grid.spacing().to_vec();
    let big = 1e6 * (1.0 + grid.frame().bounds().diameter());
    let mut u = vec![big; grid.len()];
    let mut fixed = vec![false; grid.len()];
    for &s in &src {
        u[s] = 0.0;
        fixed[s] = true;
    }
    if source.is_point() {
        // seed the 3^n neighborhood with control-graph distances, kept updatable
        let gd = graph_distance(grid, &Source::Nodes(src.clone()), &default_controls(m), grid.h())?;
        let offsets = grid.cube_offsets();
        for &s in &src {
            let idx = grid.multi_index(s);
            for off in &offsets {
                if let Some(w) = grid.offset_node(&idx, off) {
                    if !fixed[w] && gd.d[w].is_finite() {
                        u[w] = u[w].min(gd.d[w]);
                    }
                }
            }
        }
    }
    let tau = grid.h();
    let foot = match opts.scheme {
        Scheme::SemiLagrangian => {
            let controls = opts.controls.clone().unwrap_or_else(|| sweep_controls(m));
            for a in &controls {
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                if a.len() != m || (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::param("controls", format!("need unit vectors of length {m}")));
                }
            }
            Some(footprints(grid, &controls, tau, &fixed))
        }
        Scheme::LaxFriedrichs => None,
    };
    let sigma = local_viscosities(grid);
    let res = grid.resolution().to_vec();
    let strides = grid.strides().to_vec();
    let corners: Vec<usize> = (0..1usize << n)
        .map(|c| (0..n).filter(|&d| c >> d & 1 == 1).map(|d| strides[d]).sum())
        .collect();
    let mut idx = vec![0usize; n];
    let mut q = vec![0.0; n];
    let mut cq = vec![0.0; m];
    let mut sweeps = 0;
    let mut last = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        let dirs = sweeps % (1 << n);
        let mut change = 0.0f64;
        for counter in 0..grid.len() {
            let v = sweep_order(grid, dirs, counter, &mut idx);
            if fixed[v] {
                continue;
            }
            let new = if let Some(fp) = &foot {
                let mut best = f64::INFINITY;
                for ci in 0..fp.controls {
                    let b = fp.base[v * fp.controls + ci];
                    if b == usize::MAX {
                        continue;
                    }
                    let fr = &fp.frac[(v * fp.controls + ci) * n..(v * fp.controls + ci + 1) * n];
                    let mut val = 0.0;
                    for (c, off) in corners.iter().enumerate() {
                        let mut w = 1.0;
                        for d in 0..n {
                            w *= if c >> d & 1 == 1 { fr[d] } else { 1.0 - fr[d] };
                        }
                        if w != 0.0 {
                            val += w * u[b + off];
                        }
                    }
                    best = best.min(tau + val);
                }
                best
            } else if idx.iter().zip(&res).any(|(&i, &r)| i == 0 || i + 1 == r) {
                // linear extrapolation from inside, capped below by the next value
                let mut best = f64::INFINITY;
                for k in 0..n {
                    let (a, b) = if idx[k] == 0 {
                        (v + strides[k], v + 2 * strides[k])
                    } else if idx[k] + 1 == res[k] {
                        (v - strides[k], v - 2 * strides[k])
                    } else {
                        continue;
                    };
                    best = best.min((2.0 * u[a] - u[b]).max(u[b]));
                }
                best
            } else {
                let sg = &sigma[v * n..(v + 1) * n];
                let mut s = 0.0;
                let mut den = 0.0;
                for i in 0..n {
                    let up = u[v + strides[i]];
                    let um = u[v - strides[i]];
                    q[i] = (up - um) / (2.0 * h[i]);
                    s += sg[i] * (up + um) / (2.0 * h[i]);
                    den += sg[i] / h[i];
                }
                let c = grid.coeff_at(v);
                for (j, o) in cq.iter_mut().enumerate() {
                    *o = (0..n).map(|i| c[j * n + i] * q[i]).sum();
                }
                let norm = cq.iter().map(|x| x * x).sum::<f64>().sqrt();
                (1.0 - norm + s) / den
            };
            if new < u[v] {
                change = change.max(u[v] - new);
                u[v] = new.max(0.0);
            }
        }
        sweeps += 1;
        last = change;
        if change < opts.tol && sweeps >= 1 << n {
            break;
        }
    }
    let d = ScalarField::from_vec_unchecked(u);
    let maps = residual_maps(grid, &d, &src);
    if last >= opts.tol {
        return Err(Error::SweepNoConvergence {
            sweeps,
            last_update: last,
            residual: maps.residual.into_values(),
        });
    }
    let residual = summarize(&maps);
    Ok(DistanceField {
        d,
        source: source.clone(),
        source_nodes: src,
        sweeps,
        last_update: last,
        residual,
    })
}

fn summarize(maps: &ResidualMaps) -> ResidualStats {
    let mut stats = ResidualStats::default();
    let mut sum = 0.0;
    for k in 0..maps.eligible.len() {
        if !maps.eligible[k] {
            continue;
        }
        if maps.ridge[k] {
            stats.ridge_flagged += 1;
            continue;
        }
        let r = maps.residual[k].abs();
        stats.checked += 1;
        stats.max_abs = stats.max_abs.max(r);
        sum += r;
    }
    if stats.checked > 0 {
        stats.mean_abs = sum / stats.checked as f64;
    }
    stats
}

/// Concave-kink detector: a node is on the ridge when along some axis the
/// backward slope exceeds the forward slope by more than `sqrt(h)`.
pub fn ridge_mask(grid: &Grid, d: &ScalarField) -> Vec<bool> {
    let n = grid.dim();
    let thresh = grid.h().sqrt();
    (0..grid.len())
        .map(|v| {
            (0..n).any(|i| match (grid.neighbor(v, i, -1), grid.neighbor(v, i, 1)) {
                (Some(a), Some(b)) => {
                    let h = grid.spacing()[i];
                    let back = (d[v] - d[a]) / h;
                    let fwd = (d[b] - d[v]) / h;
                    back - fwd > thresh
                }
                _ => false,
            })
        })
        .collect()
}

/// Residual `|Xd| - 1`, eligibility (interior, at least two cells from the
/// boundary and from every source node) and ridge flags.
pub fn residual_maps(grid: &Grid, d: &ScalarField, source_nodes: &[usize]) -> ResidualMaps {
    let xd = x_gradient(grid, d);
    let residual = ScalarField::from_vec_unchecked((0..grid.len()).map(|v| xd.norm_at(v) - 1.0).collect());
    let src_idx: Vec<Vec<usize>> = source_nodes.iter().map(|&s| grid.multi_index(s)).collect();
    let boundary_src = source_nodes.len() > 1 && source_nodes.iter().all(|&s| !grid.is_interior(s));
    let mut idx = vec![0usize; grid.dim()];
    let eligible = (0..grid.len())
        .map(|v| {
            if !grid.is_interior(v) || grid.depth(v) < 2 {
                return false;
            }
            if boundary_src {
                return true;
            }
            grid.multi_index_into(v, &mut idx);
            src_idx.iter().all(|s| s.iter().zip(&idx).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0) >= 2)
        })
        .collect();
    ResidualMaps {
        residual,
        eligible,
        ridge: ridge_mask(grid, d),
    }
}

/// `2m` axis controls `+-e_j` and `2m(m-1)` diagonal controls `(+-e_j +-e_k)/sqrt 2`.
pub fn default_controls(m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for j in 0..m {
        for s in [1.0, -1.0] {
            let mut a = vec![0.0; m];
            a[j] = s;
            out.push(a);
        }
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..m {
        for k in j + 1..m {
            for (sj, sk) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut a = vec![0.0; m];
                a[j] = sj * r;
                a[k] = sk * r;
                out.push(a);
            }
        }
    }
    out
}

/// Only the `2m` axis controls.
pub fn axis_controls(m: usize) -> Vec<Vec<f64>> {
    default_controls(m).into_iter().take(2 * m).collect()
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn rk4_flow(grid: &Grid, x: &[f64], a: &[f64], tau: f64, c: &mut [f64]) -> Vec<f64> {
    let (n, m) = (grid.dim(), grid.m());
    let frame = grid.frame();
    let mut vel = |y: &[f64]| -> Vec<f64> {
        frame.coeff_into(y, c);
        (0..n).map(|i| (0..m).map(|j| a[j] * c[j * n + i]).sum()).collect()
    };
    let add = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(p, q)| p + s * q).collect() };
    let k1 = vel(x);
    let k2 = vel(&add(x, &k1, 0.5 * tau));
    let k3 = vel(&add(x, &k2, 0.5 * tau));
    let k4 = vel(&add(x, &k3, tau));
    (0..n)
        .map(|i| x[i] + tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Dijkstra on the graph whose edges follow each control for time `step`
/// (fourth-order Runge-Kutta), endpoints snapped to the nearest node; every
/// edge costs `step`. Nodes outside the domain are not entered, except
/// source nodes. Unreached nodes get `+inf`.
pub fn graph_distance(grid: &Grid, source: &Source, controls: &[Vec<f64>], step: f64) -> Result<DistanceField> {
    let src = source.resolve(grid)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", "must be positive"));
    }
    let m = grid.m();
    for a in controls {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if a.len() != m || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::param("controls", format!("need unit vectors of length {m}")));
        }
    }
    let bounds = grid.frame().bounds().clone();
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    for &s in &src {
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
    }
    let mut c = vec![0.0; grid.m() * grid.dim()];
    let mut x = vec![0.0; grid.dim()];
    let boundary_src = matches!(source, Source::Boundary);
    while let Some(Entry(dv, v)) = heap.pop() {
        if dv > dist[v] {
            continue;
        }
        if boundary_src && !grid.is_interior(v) && dv > 0.0 {
            continue;
        }
        grid.coords_into(v, &mut x);
        for a in controls {
            let y = rk4_flow(grid, &x, a, step, &mut c);
            if !bounds.contains(&y, 1e-12) {
                continue;
            }
            let Some(w) = grid.nearest_node(&y) else { continue };
            if w == v {
                continue;
            }
            let nd = dv + step;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    Ok(DistanceField {
        d: ScalarField::from_vec_unchecked(dist),
        source: source.clone(),
        source_nodes: src,
        sweeps: 0,
        last_update: 0.0,
        residual: ResidualStats::default(),
    })
}

/// A point pair with its computed distance.
#[derive(Debug, Clone, Serialize)]
pub struct DistancePair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricFit {
    /// Smallest `C` with `|x - y| / C <= d`.
    pub c_lower: f64,
    /// Smallest `C` with `d <= C |x - y|^{1 / r_fit}`.
    pub c_upper: f64,
    /// Inverse slope of the log-log regression of `d` against `|x - y|`.
    pub r_fit: f64,
    pub pairs: usize,
}

pub const MIN_PAIRS: usize = 50;

pub fn metric_equivalence_probe(pairs: &[DistancePair]) -> Result<MetricFit> {
    let usable: Vec<(f64, f64)> = pairs
        .iter()
        .map(|p| {
            let e = p.x.iter().zip(&p.y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (e, p.d)
        })
        .filter(|(e, d)| *e > 0.0 && *d > 0.0 && d.is_finite())
        .collect();
    if usable.len() < MIN_PAIRS {
        return Err(Error::param(
            "sample_pairs",
            format!("need at least {MIN_PAIRS} pairs with positive separation, got {}", usable.len()),
        ));
    }
    let k = usable.len() as f64;
    let (mx, my) = usable
        .iter()
        .fold((0.0, 0.0), |(a, b), (e, d)| (a + e.ln() / k, b + d.ln() / k));
    let (sxy, sxx) = usable.iter().fold((0.0, 0.0), |(a, b), (e, d)| {
        let dx = e.ln() - mx;
        (a + dx * (d.ln() - my), b + dx * dx)
    });
    if sxx == 0.0 {
        return Err(Error::param("sample_pairs", "all pairs have the same separation"));
    }
    let slope = sxy / sxx;
    let r_fit = 1.0 / slope;
    let c_lower = usable.iter().map(|(e, d)| e / d).fold(0.0, f64::max);
    let c_upper = usable.iter().map(|(e, d)| d / e.powf(slope)).fold(0.0, f64::max);
    Ok(MetricFit {
        c_lower,
        c_upper,
        r_fit,
        pairs: usable.len(),
    })
}

/// Pairs from one point-source solve: the source point against every given target node.
pub fn pairs_from_field(grid: &Grid, field: &DistanceField, targets: &[usize]) -> Vec<DistancePair> {
    let x = grid.coords(field.source_nodes[0]);
    targets
        .iter()
        .filter(|&&t| t != field.source_nodes[0])
        .map(|&t| DistancePair {
            x: x.clone(),
            y: grid.coords(t),
            d: field.d[t],
        })
        .collect()
}
