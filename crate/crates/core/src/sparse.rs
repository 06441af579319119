//! Symmetric sparse matrices and an up-looking sparse Cholesky factorization
//! with a geometric nested-dissection ordering for grid unknowns.

/// Symmetric matrix in compressed sparse row form; both triangles stored,
/// column indices sorted within each row.
#[derive(Debug, Clone)]
pub struct SymCsr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymCsr {
    /// Builds the pattern from per-row sorted column lists (which must be symmetric).
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> SymCsr {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(&r);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        SymCsr {
            n,
            row_ptr,
            cols,
            vals: vec![0.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.position(i, i).map_or(0.0, |k| self.vals[k]))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }
}

/// Error from the numeric factorization: the pivot of column `column` was
/// not positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub column: usize,
}

const NONE: usize = usize::MAX;

/// Symbolic analysis (ordering, elimination tree, column counts) reusable
/// across numeric factorizations of matrices with the same pattern.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    perm: Vec<usize>,
    // upper triangle of P A P^T in compressed column form
    cp: Vec<usize>,
    ci: Vec<usize>,
    // for each stored entry of the upper triangle, the source position in A
    src: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    factored: bool,
}

impl Cholesky {
    /// `perm[k]` is the original index placed at position `k`.
    pub fn analyze(a: &SymCsr, perm: Vec<usize>) -> Cholesky {
        let n = a.n;
        assert_eq!(perm.len(), n);
        let mut pinv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        // column j of C = upper part of PAP^T: entries (i, j) with i <= j
        let mut count = vec![0usize; n];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let (pi, pj) = (pinv[i], pinv[a.cols[k]]);
                if pi <= pj {
                    count[pj] += 1;
                }
            }
        }
        let mut cp = vec![0usize; n + 1];
        for j in 0..n {
            cp[j + 1] = cp[j] + count[j];
        }
        let mut next = cp.clone();
        let mut ci = vec![0usize; cp[n]];
        let mut src = vec![0usize; cp[n]];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let (pi, pj) = (pinv[i], pinv[a.cols[k]]);
                if pi <= pj {
                    ci[next[pj]] = pi;
                    src[next[pj]] = k;
                    next[pj] += 1;
                }
            }
        }
        let parent = etree(n, &cp, &ci);
        // column counts of L by walking each row subtree
        let mut colcount = vec![1usize; n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let top = ereach(&cp, &ci, &parent, k, &mut mark, &mut stack);
            for &i in &stack[top..n] {
                colcount[i] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + colcount[j];
        }
        let nnz = lp[n];
        Cholesky {
            n,
            perm,
            cp,
            ci,
            src,
            parent,
            lp,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            factored: false,
        }
    }

    /// Number of stored entries of the factor.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization of `a + shift * I` (pattern must match the one analyzed).
    pub fn factor(&mut self, a: &SymCsr, shift: f64) -> Result<(), NotPositiveDefinite> {
        let n = self.n;
        self.factored = false;
        let mut c = self.lp[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let top = ereach(&self.cp, &self.ci, &self.parent, k, &mut mark, &mut stack);
            x[k] = 0.0;
            for p in self.cp[k]..self.cp[k + 1] {
                let i = self.ci[p];
                x[i] += a.vals[self.src[p]];
            }
            let mut d = x[k] + shift;
            x[k] = 0.0;
            for &i in &stack[top..n] {
                let lki = x[i] / self.lx[self.lp[i]];
                x[i] = 0.0;
                for p in self.lp[i] + 1..c[i] {
                    x[self.li[p]] -= self.lx[p] * lki;
                }
                d -= lki * lki;
                let p = c[i];
                c[i] += 1;
                self.li[p] = k;
                self.lx[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(NotPositiveDefinite { column: k });
            }
            let p = c[k];
            c[k] += 1;
            self.li[p] = k;
            self.lx[p] = d.sqrt();
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `(A + shift I) x = b` with the last successful factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert!(self.factored, "solve called without a valid factorization");
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        // L y = b
        for j in 0..n {
            y[j] /= self.lx[self.lp[j]];
            let yj = y[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                y[self.li[p]] -= self.lx[p] * yj;
            }
        }
        // L^T x = y
        for j in (0..n).rev() {
            let mut acc = y[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                acc -= self.lx[p] * y[self.li[p]];
            }
            y[j] = acc / self.lx[self.lp[j]];
        }
        let mut out = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = y[k];
        }
        out
    }
}

fn etree(n: usize, cp: &[usize], ci: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for p in cp[k]..cp[k + 1] {
            let mut i = ci[p];
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of L, returned in `stack[top..n]` in
/// topological order. `mark` entries equal to `k` mean visited.
fn ereach(cp: &[usize], ci: &[usize], parent: &[usize], k: usize, mark: &mut [usize], stack: &mut [usize]) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    let mut path = Vec::new();
    for p in cp[k]..cp[k + 1] {
        let mut i = ci[p];
        if i > k {
            continue;
        }
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            i = parent[i];
        }
        while let Some(v) = path.pop() {
            top -= 1;
            stack[top] = v;
        }
    }
    top
}

/// Nested-dissection ordering of unknowns located at integer grid indices:
/// recursively split the index box at its mid-plane along the longest axis,
/// numbering both halves before the separator plane.
pub fn nested_dissection(indices: &[Vec<usize>]) -> Vec<usize> {
    let mut order = Vec::with_capacity(indices.len());
    let all: Vec<usize> = (0..indices.len()).collect();
    dissect(indices, all, &mut order);
    order
}

fn dissect(indices: &[Vec<usize>], set: Vec<usize>, order: &mut Vec<usize>) {
    const LEAF: usize = 32;
    if set.len() <= LEAF {
        order.extend(set);
        return;
    }
    let dim = indices[set[0]].len();
    let mut lo = vec![usize::MAX; dim];
    let mut hi = vec![0usize; dim];
    for &s in &set {
        for k in 0..dim {
            lo[k] = lo[k].min(indices[s][k]);
            hi[k] = hi[k].max(indices[s][k]);
        }
    }
    let axis = (0..dim).max_by_key(|&k| hi[k] - lo[k]).unwrap_or(0);
    if hi[axis] - lo[axis] < 2 {
        order.extend(set);
        return;
    }
    let mid = (lo[axis] + hi[axis]) / 2;
    let (mut left, mut right, mut sep) = (Vec::new(), Vec::new(), Vec::new());
    for s in set {
        match indices[s][axis].cmp(&mid) {
            std::cmp::Ordering::Less => left.push(s),
            std::cmp::Ordering::Greater => right.push(s),
            std::cmp::Ordering::Equal => sep.push(s),
        }
    }
    dissect(indices, left, order);
    dissect(indices, right, order);
    order.extend(sep);
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_2d(k: usize) -> (SymCsr, Vec<Vec<usize>>) {
        let id = |i: usize, j: usize| i * k + j;
        let mut rows = vec![Vec::new(); k * k];
        let mut idx = Vec::new();
        for i in 0..k {
            for j in 0..k {
                idx.push(vec![i, j]);
                for (di, dj) in [(0i64, 0i64), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)] {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a >= 0 && b >= 0 && a < k as i64 && b < k as i64 {
                        rows[id(i, j)].push(id(a as usize, b as usize));
                    }
                }
            }
        }
        let mut m = SymCsr::from_pattern(rows);
        for i in 0..k {
            for j in 0..k {
                let r = id(i, j);
                let pos = m.position(r, r).unwrap();
                m.vals[pos] = 6.5;
                for (a, b) in [(i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    if a < k && b < k {
                        let c = id(a, b);
                        let p1 = m.position(r, c).unwrap();
                        let p2 = m.position(c, r).unwrap();
                        m.vals[p1] = -1.0 - 0.1 * (a + b) as f64 / k as f64;
                        m.vals[p2] = m.vals[p1];
                    }
                }
            }
        }
        (m, idx)
    }

    fn dense(m: &SymCsr) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(m.n, m.n);
        for i in 0..m.n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                d[(i, m.cols[k])] = m.vals[k];
            }
        }
        d
    }

    #[test]
    fn solves_match_dense() {
        let (m, idx) = laplacian_2d(13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<f64> = (0..m.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let perm = nested_dissection(&idx);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..m.n()).collect::<Vec<_>>());
        let mut ch = Cholesky::analyze(&m, perm);
        ch.factor(&m, 0.0).unwrap();
        let x = ch.solve(&b);
        let d = dense(&m);
        let want = d.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
        let err = x.iter().zip(want.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "err {err}");
        let mut r = vec![0.0; m.n()];
        m.mul_vec(&x, &mut r);
        assert!(r.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-12));
        // identity ordering gives the same answer
        let mut ch2 = Cholesky::analyze(&m, (0..m.n()).collect());
        ch2.factor(&m, 0.0).unwrap();
        let x2 = ch2.solve(&b);
        assert!(x.iter().zip(&x2).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(ch.factor_nnz() <= ch2.factor_nnz());
    }

    #[test]
    fn detects_indefinite_and_shift_recovers() {
        let mut m = SymCsr::from_pattern(vec![vec![0, 1], vec![0, 1]]);
        m.values_mut().copy_from_slice(&[1.0, 2.0, 2.0, 1.0]);
        let mut ch = Cholesky::analyze(&m, vec![0, 1]);
        assert_eq!(ch.factor(&m, 0.0), Err(NotPositiveDefinite { column: 1 }));
        ch.factor(&m, 2.0).unwrap();
        let x = ch.solve(&[3.0, 5.0]);
        // (A + 2I) = [[3,2],[2,3]]
        assert!((3.0 * x[0] + 2.0 * x[1] - 3.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 5.0).abs() < 1e-14);
    }
}
