//! Cell-corner discretization of the energy `(1/p) int |Xu|^p`.
//!
//! Every grid cell contributes one term per corner: the frame at that corner
//! applied to the one-sided differences along the cell edges leaving it. Each
//! term is a horizontal gradient sample carrying weight `h^n / 2^n`, so the
//! quadrature is the tensor trapezoid rule over the active cells. Unlike the
//! centered gradient, this has no grid-scale null modes, and its adjoint is an
//! exact discrete divergence.

use rayon::prelude::*;

use crate::grid::{Grid, ScalarField};
use crate::sparse::SymCsr;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct CornerStencil {
    n: usize,
    m: usize,
    weight: f64,
    // per term: corner node followed by its n edge neighbors
    nodes: Vec<usize>,
    // per term: m x n matrix c_{j,i}(corner) * s_i / h_i
    b: Vec<f64>,
    unknown: Vec<u32>,
    n_unknowns: usize,
}

impl CornerStencil {
    pub fn new(grid: &Grid) -> CornerStencil {
        let (n, m) = (grid.dim(), grid.m());
        let corners = 1usize << n;
        let res = grid.resolution();
        let h = grid.spacing();
        let mut unknown = vec![NONE; grid.len()];
        for (k, &v) in grid.interior_nodes().iter().enumerate() {
            unknown[v] = k as u32;
        }
        let mut nodes = Vec::new();
        let mut b = Vec::new();
        let mut idx = vec![0usize; n];
        let mut cell_nodes = vec![0usize; corners];
        for base in 0..grid.len() {
            grid.multi_index_into(base, &mut idx);
            if idx.iter().zip(res).any(|(&i, &r)| i + 1 >= r) {
                continue;
            }
            for (c, slot) in cell_nodes.iter_mut().enumerate() {
                *slot = base + (0..n).filter(|&k| c >> k & 1 == 1).map(|k| grid.strides()[k]).sum::<usize>();
            }
            if cell_nodes.iter().all(|&v| unknown[v] == NONE) {
                continue;
            }
            for c in 0..corners {
                let v = cell_nodes[c];
                nodes.push(v);
                let coeff = grid.coeff_at(v);
                let mut signs = vec![0.0; n];
                for k in 0..n {
                    // edge from corner c to the corner differing in bit k
                    nodes.push(cell_nodes[c ^ (1 << k)]);
                    signs[k] = if c >> k & 1 == 0 { 1.0 } else { -1.0 };
                }
                for j in 0..m {
                    for i in 0..n {
                        b.push(coeff[j * n + i] * signs[i] / h[i]);
                    }
                }
            }
        }
        CornerStencil {
            n,
            m,
            weight: grid.cell_volume() / corners as f64,
            nodes,
            b,
            unknown,
            n_unknowns: grid.interior_nodes().len(),
        }
    }

    pub fn terms(&self) -> usize {
        self.nodes.len() / (self.n + 1)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Quadrature weight of each term.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Total quadrature mass, the measure of the union of active cells.
    pub fn measure(&self) -> f64 {
        self.weight * self.terms() as f64
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    /// Unknown index of a node, if interior.
    pub fn unknown(&self, node: usize) -> Option<usize> {
        let u = self.unknown[node];
        (u != NONE).then_some(u as usize)
    }

    fn term_nodes(&self, t: usize) -> &[usize] {
        &self.nodes[t * (self.n + 1)..(t + 1) * (self.n + 1)]
    }

    fn term_b(&self, t: usize) -> &[f64] {
        let s = self.m * self.n;
        &self.b[t * s..(t + 1) * s]
    }

    fn term_gradient(&self, t: usize, u: &[f64], out: &mut [f64]) {
        let nodes = self.term_nodes(t);
        let b = self.term_b(t);
        let u0 = u[nodes[0]];
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..self.n {
                acc += b[j * self.n + i] * (u[nodes[1 + i]] - u0);
            }
            *o = acc;
        }
    }

    /// Horizontal gradient samples, `terms x m`, row-major.
    pub fn gradients(&self, u: &ScalarField) -> Vec<f64> {
        let m = self.m;
        let mut g = vec![0.0; self.terms() * m];
        g.par_chunks_mut(m)
            .enumerate()
            .for_each(|(t, out)| self.term_gradient(t, u.values(), out));
        g
    }

    /// `sum_t w |g_t|^p`, scaled through logarithms so large `p` does not overflow
    /// before the final exponentiation.
    pub fn power_sum(&self, g: &[f64], p: f64, eps: f64) -> f64 {
        let logs: Vec<f64> = g
            .par_chunks(self.m)
            .map(|gt| {
                let s = gt.iter().map(|v| v * v).sum::<f64>() + eps * eps;
                0.5 * p * s.ln()
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return 0.0;
        }
        let s: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        self.weight * s * top.exp()
    }

    /// Gradient of `sum_t w phi(g_t)` with respect to the unknowns, where
    /// `phi'(g) = rho(|g|) g` and `rho(s) = (s^2 + eps^2)^{(p-2)/2}`.
    pub fn flux_gradient(&self, g: &[f64], p: f64, eps: f64) -> Vec<f64> {
        let fluxes = self.fluxes(g, p, eps);
        self.apply_transpose(&fluxes)
    }

    /// Regularized flux `rho(|g|) g` per term.
    pub fn fluxes(&self, g: &[f64], p: f64, eps: f64) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(m).zip(g.par_chunks(m)).for_each(|(o, gt)| {
            let s = gt.iter().map(|v| v * v).sum::<f64>() + eps * eps;
            let rho = if s == 0.0 { 0.0 } else { s.powf(0.5 * (p - 2.0)) };
            for (a, b) in o.iter_mut().zip(gt) {
                *a = rho * b;
            }
        });
        out
    }

    /// `w * D^T V`: the unknown-space vector with entries
    /// `sum_t w <V_t, dg_t/du_k>`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut out = vec![0.0; self.n_unknowns];
        let mut e = vec![0.0; n];
        for t in 0..self.terms() {
            let vt = &v[t * m..(t + 1) * m];
            let b = self.term_b(t);
            let nodes = self.term_nodes(t);
            let mut sum = 0.0;
            for i in 0..n {
                e[i] = (0..m).map(|j| vt[j] * b[j * n + i]).sum::<f64>() * self.weight;
                sum += e[i];
                if let Some(k) = self.unknown(nodes[1 + i]) {
                    out[k] += e[i];
                }
            }
            if let Some(k) = self.unknown(nodes[0]) {
                out[k] -= sum;
            }
        }
        out
    }

    /// Exact discrete divergence: the scalar field `div V` with
    /// `h^n sum_interior phi div V = -sum_t w <V_t, D phi_t>` for every trace-zero `phi`.
    pub fn divergence(&self, grid: &Grid, v: &[f64]) -> ScalarField {
        let dt = self.apply_transpose(v);
        let mut out = vec![0.0; grid.len()];
        let hn = grid.cell_volume();
        for (k, &node) in grid.interior_nodes().iter().enumerate() {
            out[node] = -dt[k] / hn;
        }
        ScalarField::from_vec_unchecked(out)
    }

    /// Sparsity pattern of the energy Hessian over the unknowns and, per term,
    /// the value positions of its `(n+1)^2` local entries (`usize::MAX` where
    /// a node is not an unknown).
    pub fn hessian_pattern(&self) -> (SymCsr, Vec<usize>) {
        let k = self.n + 1;
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.n_unknowns];
        for t in 0..self.terms() {
            let nodes = self.term_nodes(t);
            for &a in nodes {
                if let Some(ia) = self.unknown(a) {
                    for &b in nodes {
                        if let Some(ib) = self.unknown(b) {
                            rows[ia].push(ib);
                        }
                    }
                }
            }
        }
        let csr = SymCsr::from_pattern(rows);
        let mut pos = vec![usize::MAX; self.terms() * k * k];
        for t in 0..self.terms() {
            let nodes = self.term_nodes(t);
            for (a, &na) in nodes.iter().enumerate() {
                for (b, &nb) in nodes.iter().enumerate() {
                    if let (Some(ia), Some(ib)) = (self.unknown(na), self.unknown(nb)) {
                        pos[(t * k + a) * k + b] = csr.position(ia, ib).expect("pattern covers stencil");
                    }
                }
            }
        }
        (csr, pos)
    }

    /// Assembles the Hessian of `sum_t w phi(g_t)` into `h` (pattern from
    /// [`Self::hessian_pattern`]).
    pub fn assemble_hessian(&self, g: &[f64], p: f64, eps: f64, h: &mut SymCsr, pos: &[usize]) {
        let (n, m) = (self.n, self.m);
        let k = n + 1;
        let locals: Vec<f64> = (0..self.terms())
            .into_par_iter()
            .flat_map_iter(|t| {
                let gt = &g[t * m..(t + 1) * m];
                let s = gt.iter().map(|v| v * v).sum::<f64>() + eps * eps;
                let (rho, sigma) = if s == 0.0 {
                    (0.0, 0.0)
                } else {
                    (s.powf(0.5 * (p - 2.0)), (p - 2.0) * s.powf(0.5 * (p - 4.0)))
                };
                // local map from [u_corner, u_nb...] to g: B~ = [-sum_i b_i, b_1..b_n]
                let b = self.term_b(t);
                let mut bt = vec![0.0; m * k];
                for j in 0..m {
                    let mut sum = 0.0;
                    for i in 0..n {
                        bt[j * k + 1 + i] = b[j * n + i];
                        sum += b[j * n + i];
                    }
                    bt[j * k] = -sum;
                }
                // H_g = rho I + sigma g g^T ; local = w B~^T H_g B~
                let mut gb = vec![0.0; k];
                for a in 0..k {
                    gb[a] = (0..m).map(|j| gt[j] * bt[j * k + a]).sum();
                }
                let mut local = vec![0.0; k * k];
                for a in 0..k {
                    for c in 0..k {
                        let bb: f64 = (0..m).map(|j| bt[j * k + a] * bt[j * k + c]).sum();
                        local[a * k + c] = self.weight * (rho * bb + sigma * gb[a] * gb[c]);
                    }
                }
                local.into_iter()
            })
            .collect();
        h.clear();
        let vals = h.values_mut();
        for (l, &p) in locals.iter().zip(pos) {
            if p != usize::MAX {
                vals[p] += l;
            }
        }
    }
}
