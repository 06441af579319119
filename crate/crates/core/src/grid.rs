//! Uniform tensor grids on a frame's box, node-indexed fields, and the
//! pointwise horizontal operators built from centered differences.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frames::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
}

/// Uniform grid over the box of a [`Frame`].
///
/// Nodes are numbered lexicographically in their multi-index with the last
/// axis fastest. Interior nodes carry unknowns; boundary nodes carry Dirichlet
/// data. A mask may carve the domain out of the box: nodes where the mask is
/// false become boundary nodes.
#[derive(Debug, Clone)]
pub struct Grid {
    frame: Frame,
    res: Vec<usize>,
    spacing: Vec<f64>,
    lower: Vec<f64>,
    strides: Vec<usize>,
    kinds: Vec<NodeKind>,
    depth: Vec<usize>,
    interior: Vec<usize>,
    coeff: Vec<f64>,
}

impl Grid {
    /// Full-box grid with `res[k]` nodes along axis `k`.
    pub fn new(frame: Frame, res: &[usize]) -> Result<Grid> {
        Grid::build(frame, res, None::<fn(&[f64]) -> bool>)
    }

    /// Same number of nodes along every axis.
    pub fn uniform(frame: Frame, nodes: usize) -> Result<Grid> {
        let res = vec![nodes; frame.n()];
        Grid::new(frame, &res)
    }

    /// Grid whose domain is `{x in box : inside(x)}`.
    pub fn with_mask(frame: Frame, res: &[usize], inside: impl Fn(&[f64]) -> bool) -> Result<Grid> {
        Grid::build(frame, res, Some(inside))
    }

    fn build(frame: Frame, res: &[usize], inside: Option<impl Fn(&[f64]) -> bool>) -> Result<Grid> {
        let n = frame.n();
        if res.len() != n {
            return Err(Error::param("res", format!("need {n} axes, got {}", res.len())));
        }
        if let Some(r) = res.iter().find(|&&r| r < 3) {
            return Err(Error::param("res", format!("need at least 3 nodes per axis, got {r}")));
        }
        let b = frame.bounds();
        let lower = b.lower().to_vec();
        let spacing: Vec<f64> = (0..n)
            .map(|k| (b.upper()[k] - b.lower()[k]) / (res[k] - 1) as f64)
            .collect();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * res[k + 1];
        }
        let len: usize = res.iter().product();
        let mut grid = Grid {
            frame,
            res: res.to_vec(),
            spacing,
            lower,
            strides,
            kinds: vec![NodeKind::Boundary; len],
            depth: vec![0; len],
            interior: Vec::new(),
            coeff: Vec::new(),
        };
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        for node in 0..len {
            grid.multi_index_into(node, &mut idx);
            let on_face = idx.iter().zip(&grid.res).any(|(&i, &r)| i == 0 || i == r - 1);
            let masked_in = match &inside {
                Some(f) => {
                    grid.coords_into(node, &mut x);
                    f(&x)
                }
                None => true,
            };
            if !on_face && masked_in {
                grid.kinds[node] = NodeKind::Interior;
            }
        }
        grid.interior = (0..len).filter(|&v| grid.kinds[v] == NodeKind::Interior).collect();
        if grid.interior.is_empty() {
            return Err(Error::param("res", "grid has no interior nodes"));
        }
        grid.compute_depth();
        let (m, nn) = (grid.frame.m(), n);
        let mut coeff = vec![0.0; len * m * nn];
        for node in 0..len {
            grid.coords_into(node, &mut x);
            grid.frame.coeff_into(&x, &mut coeff[node * m * nn..(node + 1) * m * nn]);
        }
        grid.coeff = coeff;
        Ok(grid)
    }

    fn compute_depth(&mut self) {
        // multi-source BFS over the 3^n neighborhood from boundary nodes
        let len = self.len();
        let mut depth = vec![usize::MAX; len];
        let mut queue = std::collections::VecDeque::new();
        for v in 0..len {
            if self.kinds[v] == NodeKind::Boundary {
                depth[v] = 0;
                queue.push_back(v);
            }
        }
        let offsets = self.cube_offsets();
        let mut idx = vec![0usize; self.dim()];
        while let Some(v) = queue.pop_front() {
            self.multi_index_into(v, &mut idx);
            for off in &offsets {
                if let Some(w) = self.offset_node(&idx, off) {
                    if depth[w] == usize::MAX {
                        depth[w] = depth[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        self.depth = depth;
    }

    /// Sub-grid on the index box `lo ..= hi` (same spacing), with the map from
    /// sub-grid nodes to nodes of `self`.
    pub fn sub_box(&self, lo: &[usize], hi: &[usize]) -> Result<(Grid, Vec<usize>)> {
        let n = self.dim();
        if lo.len() != n || hi.len() != n {
            return Err(Error::param("sub_box", "index bounds have the wrong length"));
        }
        for k in 0..n {
            if hi[k] >= self.res[k] || hi[k] < lo[k] + 2 {
                return Err(Error::param("sub_box", format!("axis {} range {}..={} invalid", k + 1, lo[k], hi[k])));
            }
        }
        let lower: Vec<f64> = (0..n).map(|k| self.lower[k] + lo[k] as f64 * self.spacing[k]).collect();
        let upper: Vec<f64> = (0..n).map(|k| self.lower[k] + hi[k] as f64 * self.spacing[k]).collect();
        let frame = self.frame.clone().with_box(lower, upper)?;
        let res: Vec<usize> = (0..n).map(|k| hi[k] - lo[k] + 1).collect();
        let sub = Grid::new(frame, &res)?;
        let mut idx = vec![0usize; n];
        let map = (0..sub.len())
            .map(|v| {
                sub.multi_index_into(v, &mut idx);
                (0..n).map(|k| (idx[k] + lo[k]) * self.strides[k]).sum()
            })
            .collect();
        Ok((sub, map))
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    pub fn m(&self) -> usize {
        self.frame.m()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.res
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Largest spacing over the axes.
    pub fn h(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    /// Volume of one cell, `prod_k h_k`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Discrete measure of the domain: cell volume times interior count.
    pub fn measure(&self) -> f64 {
        self.cell_volume() * self.interior.len() as f64
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.kinds[node] == NodeKind::Interior
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&v| self.kinds[v] == NodeKind::Boundary)
    }

    /// Chebyshev index distance to the nearest boundary node.
    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    /// Coefficient matrix at a node, row-major `m x n`.
    pub fn coeff_at(&self, node: usize) -> &[f64] {
        let mn = self.m() * self.dim();
        &self.coeff[node * mn..(node + 1) * mn]
    }

    pub fn multi_index_into(&self, node: usize, out: &mut [usize]) {
        let mut rest = node;
        for (k, s) in self.strides.iter().enumerate() {
            out[k] = rest / s;
            rest %= s;
        }
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        self.multi_index_into(node, &mut idx);
        idx
    }

    pub fn node_at(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        let mut rest = node;
        for k in 0..self.dim() {
            let i = rest / self.strides[k];
            rest %= self.strides[k];
            out[k] = self.lower[k] + i as f64 * self.spacing[k];
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coords_into(node, &mut x);
        x
    }

    /// Node closest to `x`, if `x` lies in the box.
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() || !self.frame.bounds().contains(x, 0.5 * self.h()) {
            return None;
        }
        let idx: Vec<usize> = (0..self.dim())
            .map(|k| {
                let t = ((x[k] - self.lower[k]) / self.spacing[k]).round();
                (t.max(0.0) as usize).min(self.res[k] - 1)
            })
            .collect();
        Some(self.node_at(&idx))
    }

    /// Neighbor of a node along `axis` in direction `dir` (+1 / -1).
    pub fn neighbor(&self, node: usize, axis: usize, dir: i32) -> Option<usize> {
        let i = (node / self.strides[axis]) % self.res[axis];
        match dir {
            1 if i + 1 < self.res[axis] => Some(node + self.strides[axis]),
            -1 if i > 0 => Some(node - self.strides[axis]),
            _ => None,
        }
    }

    /// All offsets in `{-1, 0, 1}^n` except zero.
    pub fn cube_offsets(&self) -> Vec<Vec<i32>> {
        let n = self.dim();
        let total = 3usize.pow(n as u32);
        (0..total)
            .map(|mut c| {
                (0..n)
                    .map(|_| {
                        let d = (c % 3) as i32 - 1;
                        c /= 3;
                        d
                    })
                    .collect::<Vec<i32>>()
            })
            .filter(|o| o.iter().any(|&d| d != 0))
            .collect()
    }

    /// Node at `idx + off`, if inside the grid.
    pub fn offset_node(&self, idx: &[usize], off: &[i32]) -> Option<usize> {
        let mut node = 0usize;
        for k in 0..self.dim() {
            let j = idx[k] as i64 + off[k] as i64;
            if j < 0 || j >= self.res[k] as i64 {
                return None;
            }
            node += j as usize * self.strides[k];
        }
        Some(node)
    }

    fn same_grid(&self, other: &Grid) -> bool {
        self.res == other.res
            && self.frame.name() == other.frame.name()
            && self.lower == other.lower
            && self.spacing == other.spacing
            && self.kinds == other.kinds
    }

    /// Errors unless `other` has the same nodes, domain and frame.
    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::param("grid", "fields live on different grids"))
        }
    }
}

/// One real value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param("field", format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("field", format!("non-finite value at node {i}")));
        }
        Ok(ScalarField { values })
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        ScalarField {
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|v| {
                grid.coords_into(v, &mut x);
                f(&x)
            })
            .collect();
        ScalarField { values }
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// `m` real components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalField {
    m: usize,
    data: Vec<f64>,
}

impl HorizontalField {
    pub fn zeros(grid: &Grid) -> Self {
        HorizontalField {
            m: grid.m(),
            data: vec![0.0; grid.len() * grid.m()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let m = grid.m();
        let mut x = vec![0.0; grid.dim()];
        let mut data = Vec::with_capacity(grid.len() * m);
        for v in 0..grid.len() {
            grid.coords_into(v, &mut x);
            let val = f(&x);
            assert_eq!(val.len(), m, "horizontal field needs {m} components");
            data.extend(val);
        }
        HorizontalField { m, data }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.data[node * self.m..(node + 1) * self.m]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.data[node * self.m..(node + 1) * self.m]
    }

    pub fn norm_at(&self, node: usize) -> f64 {
        self.at(node).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Nodewise Euclidean norm as a scalar field.
    pub fn norms(&self) -> ScalarField {
        ScalarField::from_vec_unchecked((0..self.data.len() / self.m).map(|v| self.norm_at(v)).collect())
    }
}

/// Euclidean partial derivative along `axis` at `node`: centered where both
/// neighbors exist, first-order one-sided on box faces.
fn partial(grid: &Grid, u: &[f64], node: usize, axis: usize) -> f64 {
    let h = grid.spacing[axis];
    match (grid.neighbor(node, axis, -1), grid.neighbor(node, axis, 1)) {
        (Some(a), Some(b)) => (u[b] - u[a]) / (2.0 * h),
        (None, Some(b)) => (u[b] - u[node]) / h,
        (Some(a), None) => (u[node] - u[a]) / h,
        (None, None) => 0.0,
    }
}

/// Discrete Euclidean gradient at a node.
pub fn euclidean_gradient_at(grid: &Grid, u: &ScalarField, node: usize) -> Vec<f64> {
    (0..grid.dim()).map(|i| partial(grid, u.values(), node, i)).collect()
}

fn apply_coeff(grid: &Grid, node: usize, du: &[f64], out: &mut [f64]) {
    let n = grid.dim();
    let c = grid.coeff_at(node);
    for (j, o) in out.iter_mut().enumerate() {
        *o = (0..n).map(|i| c[j * n + i] * du[i]).sum();
    }
}

/// Horizontal gradient `(Xu)_j = sum_i c_{j,i} D_i u` at every node.
pub fn x_gradient(grid: &Grid, u: &ScalarField) -> HorizontalField {
    let n = grid.dim();
    let mut out = HorizontalField::zeros(grid);
    let mut du = vec![0.0; n];
    for v in 0..grid.len() {
        for (i, d) in du.iter_mut().enumerate() {
            *d = partial(grid, u.values(), v, i);
        }
        apply_coeff(grid, v, &du, out.at_mut(v));
    }
    out
}

/// Horizontal gradient at one node.
pub fn x_gradient_at(grid: &Grid, u: &ScalarField, node: usize) -> Vec<f64> {
    let du = euclidean_gradient_at(grid, u, node);
    let mut out = vec![0.0; grid.m()];
    apply_coeff(grid, node, &du, &mut out);
    out
}

/// Negative adjoint of [`x_gradient`] for the inner product
/// `<u, v> = h^n sum_interior u v`, with `F` zero-extended off the interior.
/// Boundary entries of the result are zero.
pub fn x_divergence(grid: &Grid, field: &HorizontalField) -> ScalarField {
    let (n, m) = (grid.dim(), grid.m());
    // Euclidean flux G_i = sum_j c_{j,i} F_j on interior nodes
    let mut flux = vec![0.0; grid.len() * n];
    for &v in grid.interior_nodes() {
        let c = grid.coeff_at(v);
        let f = field.at(v);
        for i in 0..n {
            flux[v * n + i] = (0..m).map(|j| c[j * n + i] * f[j]).sum();
        }
    }
    let mut out = vec![0.0; grid.len()];
    for &w in grid.interior_nodes() {
        let mut acc = 0.0;
        for i in 0..n {
            let plus = grid.neighbor(w, i, 1).map_or(0.0, |b| flux[b * n + i]);
            let minus = grid.neighbor(w, i, -1).map_or(0.0, |a| flux[a * n + i]);
            acc += (plus - minus) / (2.0 * grid.spacing[i]);
        }
        out[w] = acc;
    }
    ScalarField::from_vec_unchecked(out)
}

/// Symmetrized horizontal Hessian `(X_i X_j u + X_j X_i u) / 2`, available at
/// nodes at least two cells inside the domain.
#[derive(Debug, Clone)]
pub struct HessianField {
    m: usize,
    data: Vec<f64>,
    depth: Vec<usize>,
}

pub const HESSIAN_DEPTH: usize = 2;

impl HessianField {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Row-major `m x m` matrix at `node`.
    pub fn at(&self, node: usize) -> Result<&[f64]> {
        let d = self.depth[node];
        if d < HESSIAN_DEPTH {
            return Err(Error::Stencil {
                node,
                depth: d,
                needed: HESSIAN_DEPTH,
            });
        }
        Ok(&self.data[node * self.m * self.m..(node + 1) * self.m * self.m])
    }

    pub fn matrix_at(&self, node: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(self.m, self.m, self.at(node)?))
    }
}

pub fn x_hessian(grid: &Grid, u: &ScalarField) -> HessianField {
    let (n, m) = (grid.dim(), grid.m());
    let xu = x_gradient(grid, u);
    let mut data = vec![f64::NAN; grid.len() * m * m];
    // component j of Xu as its own scalar array
    let comps: Vec<Vec<f64>> = (0..m).map(|j| (0..grid.len()).map(|v| xu.at(v)[j]).collect()).collect();
    let mut dcomp = vec![0.0; m * n];
    for v in 0..grid.len() {
        if grid.depth(v) < HESSIAN_DEPTH {
            continue;
        }
        for j in 0..m {
            for k in 0..n {
                dcomp[j * n + k] = partial(grid, &comps[j], v, k);
            }
        }
        let c = grid.coeff_at(v);
        // raw[i][j] = X_i (X_j u)
        let raw = |i: usize, j: usize| -> f64 { (0..n).map(|k| c[i * n + k] * dcomp[j * n + k]).sum() };
        for i in 0..m {
            for j in 0..m {
                data[(v * m + i) * m + j] = 0.5 * (raw(i, j) + raw(j, i));
            }
        }
    }
    HessianField {
        m,
        data,
        depth: grid.depth.clone(),
    }
}

/// `h^n sum_interior u`.
pub fn integrate(grid: &Grid, u: &ScalarField) -> f64 {
    grid.cell_volume() * grid.interior_nodes().iter().map(|&v| u[v]).sum::<f64>()
}

/// `(h^n sum_interior |F|^p)^(1/p)`.
pub fn lp_norm(grid: &Grid, field: &HorizontalField, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("need 1 <= p < inf, got {p}")));
    }
    let norms: Vec<f64> = grid.interior_nodes().iter().map(|&v| field.norm_at(v)).collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0.0);
    }
    // scaled to keep large p finite
    let s: f64 = norms.iter().map(|r| (r / max).powf(p)).sum();
    Ok(max * (grid.cell_volume() * s).powf(1.0 / p))
}

/// Maximum of `|u|` over all nodes.
pub fn sup_norm(u: &ScalarField) -> f64 {
    u.values().iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Largest `|Xu|` over nodes with the given minimum depth.
pub fn sup_horizontal_norm(grid: &Grid, field: &HorizontalField, min_depth: usize) -> f64 {
    (0..grid.len())
        .filter(|&v| grid.depth(v) >= min_depth)
        .map(|v| field.norm_at(v))
        .fold(0.0, f64::max)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn coord_header(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("x{k}")).collect()
}

/// CSV with header `x1,...,xn,<columns>`, one row per node, 17 significant digits.
pub fn write_columns_csv(
    grid: &Grid,
    columns: &[(&str, &[f64])],
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = coord_header(grid.dim());
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header)?;
    let mut x = vec![0.0; grid.dim()];
    for v in 0..grid.len() {
        grid.coords_into(v, &mut x);
        let mut row: Vec<String> = x.iter().map(|c| fmt17(*c)).collect();
        row.extend(columns.iter().map(|(_, data)| fmt17(data[v])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scalar_csv(grid: &Grid, u: &ScalarField, out: impl Write) -> Result<()> {
    write_columns_csv(grid, &[("value", u.values())], out)
}

pub fn write_horizontal_csv(grid: &Grid, field: &HorizontalField, out: impl Write) -> Result<()> {
    let m = field.m();
    let comps: Vec<Vec<f64>> = (0..m).map(|j| (0..grid.len()).map(|v| field.at(v)[j]).collect()).collect();
    let names: Vec<String> = (1..=m).map(|j| format!("v{j}")).collect();
    let cols: Vec<(&str, &[f64])> = names.iter().map(|s| s.as_str()).zip(comps.iter().map(|c| c.as_slice())).collect();
    write_columns_csv(grid, &cols, out)
}

/// Reads a scalar CSV written by [`write_scalar_csv`] (rows may come in any
/// order; every node must appear).
pub fn read_scalar_csv(grid: &Grid, path: impl AsRef<Path>) -> Result<ScalarField> {
    let mut r = csv::Reader::from_path(path)?;
    let n = grid.dim();
    let headers = r.headers()?.clone();
    if headers.len() != n + 1 {
        return Err(Error::Format(format!("expected {} columns, found {}", n + 1, headers.len())));
    }
    let mut values = vec![f64::NAN; grid.len()];
    for rec in r.records() {
        let rec = rec?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad number `{s}`"))))
            .collect::<Result<_>>()?;
        let node = grid
            .nearest_node(&nums[..n])
            .ok_or_else(|| Error::Format(format!("point {:?} outside the grid box", &nums[..n])))?;
        values[node] = nums[n];
    }
    if let Some(v) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::Format(format!("no value for node {v} at {:?}", grid.coords(v))));
    }
    ScalarField::new(grid, values)
}
