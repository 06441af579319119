//! The X-differential `L = Xu(x) C~(x)` and empirical first-order remainder profiles.

use std::io::Write;

use serde::Serialize;

use crate::eikonal::DistanceField;
use crate::error::{Error, Result};
use crate::grid::{x_gradient_at, Grid, ScalarField};

#[derive(Debug, Clone, Serialize)]
pub struct XDifferential {
    pub node: usize,
    pub point: Vec<f64>,
    /// Covector `L`, one entry per ambient coordinate.
    pub l: Vec<f64>,
    pub xu: Vec<f64>,
    /// Row-major `m x n` left inverse.
    pub c_tilde: Vec<f64>,
}

impl XDifferential {
    /// `L(z) = <L, z>`.
    pub fn apply(&self, z: &[f64]) -> f64 {
        self.l.iter().zip(z).map(|(a, b)| a * b).sum()
    }
}

pub fn x_differential(grid: &Grid, u: &ScalarField, node: usize) -> Result<XDifferential> {
    if node >= grid.len() || !grid.is_interior(node) {
        return Err(Error::param("node", format!("node {node} is not an interior node")));
    }
    let x = grid.coords(node);
    let ct = grid.frame().left_inverse(&x)?;
    let xu = x_gradient_at(grid, u, node);
    let (m, n) = (grid.m(), grid.dim());
    let l = (0..n).map(|i| (0..m).map(|j| xu[j] * ct[(j, i)]).sum()).collect();
    let mut c_tilde = Vec::with_capacity(m * n);
    for j in 0..m {
        for i in 0..n {
            c_tilde.push(ct[(j, i)]);
        }
    }
    Ok(XDifferential {
        node,
        point: x,
        l,
        xu,
        c_tilde,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainderStatus {
    Ok,
    /// Ratio below the discretization floor `3h / r`.
    FloorReached,
    /// No node in the annulus.
    Skipped,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RemainderSample {
    pub r: f64,
    /// `None` when the annulus was empty.
    pub worst_ratio: Option<f64>,
    pub nodes: usize,
    pub status: RemainderStatus,
}

/// For each radius `r`, the largest `|u(y) - u(x) - L(y - x)| / d(x, y)` over
/// nodes with `d(x, y)` in `[r, 2r]`, where `d` is the point-source distance
/// field from `x`.
pub fn remainder_profile(
    grid: &Grid,
    u: &ScalarField,
    node: usize,
    radii: &[f64],
    dist: &DistanceField,
) -> Result<Vec<RemainderSample>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::param("radii", "need positive radii"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("radii", "must be strictly decreasing"));
    }
    if dist.source_nodes != [node] {
        return Err(Error::param("dist", "distance field must come from a point source at the base node"));
    }
    let diff = x_differential(grid, u, node)?;
    let x = &diff.point;
    let u0 = u[node];
    let h = grid.h();
    let mut y = vec![0.0; grid.dim()];
    let mut z = vec![0.0; grid.dim()];
    Ok(radii
        .iter()
        .map(|&r| {
            let mut worst: Option<f64> = None;
            let mut count = 0;
            for v in 0..grid.len() {
                let d = dist.d[v];
                if v == node || !(d >= r && d <= 2.0 * r) {
                    continue;
                }
                grid.coords_into(v, &mut y);
                for k in 0..y.len() {
                    z[k] = y[k] - x[k];
                }
                let ratio = (u[v] - u0 - diff.apply(&z)).abs() / d;
                worst = Some(worst.map_or(ratio, |w: f64| w.max(ratio)));
                count += 1;
            }
            let status = match worst {
                None => RemainderStatus::Skipped,
                Some(w) if w < 3.0 * h / r => RemainderStatus::FloorReached,
                Some(_) => RemainderStatus::Ok,
            };
            RemainderSample {
                r,
                worst_ratio: worst,
                nodes: count,
                status,
            }
        })
        .collect())
}

/// Least-squares slope of `log worst_ratio` against `log r` over non-skipped
/// samples with a positive ratio.
pub fn profile_log_slope(profile: &[RemainderSample]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter_map(|s| s.worst_ratio.filter(|w| *w > 0.0).map(|w| (s.r.ln(), w.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// CSV `r,worst_ratio,status`; empty annuli leave `worst_ratio` blank.
pub fn write_profile_csv(profile: &[RemainderSample], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "worst_ratio", "status"])?;
    for s in profile {
        let status = match s.status {
            RemainderStatus::Ok => "ok",
            RemainderStatus::FloorReached => "floor_reached",
            RemainderStatus::Skipped => "skipped",
        };
        w.write_record([
            format!("{:.16e}", s.r),
            s.worst_ratio.map_or(String::new(), |v| format!("{v:.16e}")),
            status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
