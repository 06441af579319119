//! Horizontal frames `X_1 .. X_m` on a box in `R^n`.
//!
//! A frame is stored through its `m x n` coefficient matrix `C(x)`, row `j`
//! holding the coefficients of `X_j = sum_i c_{j,i}(x) d/dx_i`. Built-in frames
//! carry analytic first derivatives; custom frames (parsed from a definition
//! file) fall back to central differences.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Relative singular-value cutoff used for every numerical rank decision.
pub const RANK_RTOL: f64 = 1e-8;

/// Largest bracket length accepted by [`Frame::hormander_probe`].
pub const MAX_BRACKET_DEPTH: usize = 6;

/// Axis-aligned box `[a_1, b_1] x .. x [a_n, b_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::param("box", "lower and upper bounds need equal, positive length"));
        }
        for (k, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::param("box", format!("axis {} has bounds [{a}, {b}]", k + 1)));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// The cube `[a, b]^n`.
    pub fn cube(n: usize, a: f64, b: f64) -> Self {
        BoxDomain {
            lower: vec![a; n],
            upper: vec![b; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Whether every coordinate of `x` lies in the box widened by `slack`.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *v >= a - slack && *v <= b + slack)
    }

    /// Smallest distance from `x` to a face of the box (negative outside).
    pub fn inner_margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Euclidean,
    Heisenberg,
    Grushin,
    FlatPhi,
    Custom(Arc<[Expr]>),
}

/// A smooth horizontal frame on a working box.
#[derive(Debug, Clone)]
pub struct Frame {
    name: String,
    n: usize,
    m: usize,
    bounds: BoxDomain,
    kind: Kind,
}

/// Outcome of a pointwise linear-independence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LicReport {
    pub rank: usize,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
}

fn psi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn dpsi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// The flat function `phi(x) = psi(x) + psi(-x)` with `psi(x) = exp(-1/x)` for
/// `x > 0`; every derivative vanishes at the origin.
pub fn flat_phi(x: f64) -> f64 {
    psi(x) + psi(-x)
}

fn flat_phi_deriv(x: f64) -> f64 {
    dpsi(x) - dpsi(-x)
}

impl Frame {
    /// `X_i = d/dx_i` on `[0, 1]^n`.
    pub fn euclidean(n: usize) -> Frame {
        assert!(n >= 1, "euclidean frame needs n >= 1");
        Frame {
            name: format!("euclidean{n}"),
            n,
            m: n,
            bounds: BoxDomain::cube(n, 0.0, 1.0),
            kind: Kind::Euclidean,
        }
    }

    /// First Heisenberg group in coordinates `(x, y, t)`:
    /// `X = d/dx - y d/dt`, `Y = d/dy + x d/dt`, on `[-1, 1]^3`.
    pub fn heisenberg1() -> Frame {
        Frame {
            name: "heisenberg1".into(),
            n: 3,
            m: 2,
            bounds: BoxDomain::cube(3, -1.0, 1.0),
            kind: Kind::Heisenberg,
        }
    }

    /// Grushin plane: `X = d/dx`, `Y = x d/dy`, on `[-1, 1]^2`.
    pub fn grushin() -> Frame {
        Frame {
            name: "grushin".into(),
            n: 2,
            m: 2,
            bounds: BoxDomain::cube(2, -1.0, 1.0),
            kind: Kind::Grushin,
        }
    }

    /// `X = d/dx`, `Y = d/dy + phi(x) d/dz` with the flat `phi`, on `[-1, 1]^3`.
    /// Linearly independent everywhere, not bracket generating on `{x = 0}`.
    pub fn flat_phi() -> Frame {
        Frame {
            name: "flat_phi".into(),
            n: 3,
            m: 2,
            bounds: BoxDomain::cube(3, -1.0, 1.0),
            kind: Kind::FlatPhi,
        }
    }

    /// A frame given by `m * n` coefficient expressions in row-major order.
    pub fn custom(
        name: impl Into<String>,
        n: usize,
        m: usize,
        coefficients: Vec<Expr>,
        bounds: BoxDomain,
    ) -> Result<Frame> {
        if n == 0 || m == 0 || m > n {
            return Err(Error::param("m", format!("need 1 <= m <= n, got m = {m}, n = {n}")));
        }
        if coefficients.len() != m * n {
            return Err(Error::param(
                "row",
                format!("expected {} coefficients, got {}", m * n, coefficients.len()),
            ));
        }
        if bounds.dim() != n {
            return Err(Error::param("box", format!("box has {} axes, frame has n = {n}", bounds.dim())));
        }
        if let Some(e) = coefficients.iter().find(|e| e.n_vars() != n) {
            return Err(Error::param("row", format!("`{e}` was parsed for a different n")));
        }
        Ok(Frame {
            name: name.into(),
            n,
            m,
            bounds,
            kind: Kind::Custom(coefficients.into()),
        })
    }

    /// Looks up a built-in frame: `euclidean<n>` (or `euclidean(<n>)`),
    /// `heisenberg1`, `grushin`, `flat_phi`.
    pub fn by_name(name: &str) -> Result<Frame> {
        let key = name.trim().to_ascii_lowercase();
        match key.as_str() {
            "heisenberg1" | "heisenberg" => return Ok(Frame::heisenberg1()),
            "grushin" => return Ok(Frame::grushin()),
            "flat_phi" | "flatphi" => return Ok(Frame::flat_phi()),
            _ => {}
        }
        if let Some(rest) = key.strip_prefix("euclidean") {
            let digits = rest.trim_start_matches('(').trim_end_matches(')');
            if let Ok(n) = digits.parse::<usize>() {
                if (1..=6).contains(&n) {
                    return Ok(Frame::euclidean(n));
                }
            }
        }
        Err(Error::param("frame", format!("unknown frame `{name}`")))
    }

    /// Parses a frame definition:
    ///
    /// ```text
    /// # comment
    /// name heis
    /// n 3
    /// m 2
    /// box -1 1 -1 1 -1 1
    /// row 1, 0, -x2
    /// row 0, 1, x1
    /// ```
    ///
    /// `box` is optional and defaults to `[-1, 1]^n`.
    pub fn from_definition(text: &str) -> Result<Frame> {
        let mut name = String::from("custom");
        let mut n = None;
        let mut m = None;
        let mut bounds = None;
        let mut rows: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .map(|(k, v)| (k, v.trim()))
                .unwrap_or((line, ""));
            let bad = |what: &str| Error::param(key, format!("line {}: {what}", lineno + 1));
            match key {
                "name" => name = value.to_string(),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad("expected an integer"))?),
                "m" => m = Some(value.parse::<usize>().map_err(|_| bad("expected an integer"))?),
                "box" => {
                    let v: Vec<f64> = value
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<f64>().map_err(|_| bad("expected numbers")))
                        .collect::<Result<_>>()?;
                    if v.len() % 2 != 0 {
                        return Err(bad("expected lower/upper pairs"));
                    }
                    let lower = v.iter().step_by(2).copied().collect();
                    let upper = v.iter().skip(1).step_by(2).copied().collect();
                    bounds = Some(BoxDomain::new(lower, upper)?);
                }
                "row" => rows.push(value.to_string()),
                _ => return Err(bad("unknown key")),
            }
        }
        let n = n.ok_or_else(|| Error::param("n", "missing"))?;
        let m = m.ok_or_else(|| Error::param("m", "missing"))?;
        if rows.len() != m {
            return Err(Error::param("row", format!("expected {m} rows, got {}", rows.len())));
        }
        let mut coefficients = Vec::with_capacity(m * n);
        for row in &rows {
            let entries: Vec<&str> = row.split(',').collect();
            if entries.len() != n {
                return Err(Error::param("row", format!("`{row}` has {} entries, need {n}", entries.len())));
            }
            for e in entries {
                coefficients.push(Expr::parse(e, n)?);
            }
        }
        let bounds = bounds.unwrap_or_else(|| BoxDomain::cube(n, -1.0, 1.0));
        Frame::custom(name, n, m, coefficients, bounds)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Frame> {
        Frame::from_definition(&std::fs::read_to_string(path)?)
    }

    /// Same fields on a different working box.
    pub fn with_box(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Frame> {
        let bounds = BoxDomain::new(lower, upper)?;
        if bounds.dim() != self.n {
            return Err(Error::param("box", format!("box has {} axes, frame has n = {}", bounds.dim(), self.n)));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bounds(&self) -> &BoxDomain {
        &self.bounds
    }

    /// Whether `coeff_deriv` is analytic rather than finite-difference.
    pub fn has_analytic_derivatives(&self) -> bool {
        !matches!(self.kind, Kind::Custom(_))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        let slack = 1e-12 * self.bounds.diameter();
        if x.len() != self.n || !self.bounds.contains(x, slack) {
            return Err(Error::Domain { point: x.to_vec() });
        }
        Ok(())
    }

    /// Writes `C(x)` row-major into `out[..m*n]`. No domain check.
    pub fn coeff_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let out = &mut out[..self.m * n];
        match &self.kind {
            Kind::Euclidean => {
                out.fill(0.0);
                for j in 0..n {
                    out[j * n + j] = 1.0;
                }
            }
            Kind::Heisenberg => {
                out.copy_from_slice(&[1.0, 0.0, -x[1], 0.0, 1.0, x[0]]);
            }
            Kind::Grushin => {
                out.copy_from_slice(&[1.0, 0.0, 0.0, x[0]]);
            }
            Kind::FlatPhi => {
                out.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, flat_phi(x[0])]);
            }
            Kind::Custom(exprs) => {
                for (o, e) in out.iter_mut().zip(exprs.iter()) {
                    *o = e.eval(x);
                }
            }
        }
    }

    /// Step used for finite-difference coefficient derivatives of custom frames.
    pub fn derivative_step(&self) -> f64 {
        1e-5 * self.bounds.diameter()
    }

    /// Writes `d c_{j,i} / d x_k` at flat index `(j*n + i)*n + k` into
    /// `out[..m*n*n]`. No domain check.
    pub fn coeff_deriv_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = self.m;
        let out = &mut out[..m * n * n];
        out.fill(0.0);
        let idx = |j: usize, i: usize, k: usize| (j * n + i) * n + k;
        match &self.kind {
            Kind::Euclidean => {}
            Kind::Heisenberg => {
                out[idx(0, 2, 1)] = -1.0;
                out[idx(1, 2, 0)] = 1.0;
            }
            Kind::Grushin => {
                out[idx(1, 1, 0)] = 1.0;
            }
            Kind::FlatPhi => {
                out[idx(1, 2, 0)] = flat_phi_deriv(x[0]);
            }
            Kind::Custom(_) => {
                let step = self.derivative_step();
                let mut xp = x.to_vec();
                let mut plus = vec![0.0; m * n];
                let mut minus = vec![0.0; m * n];
                for k in 0..n {
                    xp[k] = x[k] + step;
                    self.coeff_into(&xp, &mut plus);
                    xp[k] = x[k] - step;
                    self.coeff_into(&xp, &mut minus);
                    xp[k] = x[k];
                    for ji in 0..m * n {
                        out[ji * n + k] = (plus[ji] - minus[ji]) / (2.0 * step);
                    }
                }
            }
        }
    }

    /// The coefficient matrix `C(x)`.
    pub fn eval_coeff(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let mut buf = vec![0.0; self.m * self.n];
        self.coeff_into(x, &mut buf);
        Ok(DMatrix::from_row_slice(self.m, self.n, &buf))
    }

    /// Flat `m * n * n` array of first derivatives, see [`Frame::coeff_deriv_into`].
    pub fn coeff_deriv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut buf = vec![0.0; self.m * self.n * self.n];
        self.coeff_deriv_into(x, &mut buf);
        Ok(buf)
    }

    /// `(sum_i d c_{j,i} / d x_i)_j`, the zeroth-order term of `div_X`.
    pub fn div_correction(&self, x: &[f64]) -> Result<DVector<f64>> {
        let d = self.coeff_deriv(x)?;
        let n = self.n;
        Ok(DVector::from_iterator(
            self.m,
            (0..self.m).map(|j| (0..n).map(|i| d[(j * n + i) * n + i]).sum()),
        ))
    }

    /// Numerical rank of `C(x)` under the relative cutoff [`RANK_RTOL`].
    pub fn lic_check(&self, x: &[f64]) -> Result<LicReport> {
        let c = self.eval_coeff(x)?;
        Ok(rank_report(&c))
    }

    /// `C~(x) = (C C^T)^{-1} C`, the left inverse of `C(x)^T`.
    pub fn left_inverse(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let c = self.eval_coeff(x)?;
        let report = rank_report(&c);
        let ratio = if report.largest_singular_value > 0.0 {
            report.smallest_singular_value / report.largest_singular_value
        } else {
            0.0
        };
        if report.rank < self.m {
            return Err(Error::SingularFrame {
                point: x.to_vec(),
                ratio,
            });
        }
        let b = &c * c.transpose();
        let chol = b.clone().cholesky().ok_or_else(|| Error::SingularFrame {
            point: x.to_vec(),
            ratio,
        })?;
        Ok(chol.solve(&c))
    }

    /// Ranks of the span of the fields and their iterated brackets.
    ///
    /// Entry `k` holds the rank using all right-nested brackets
    /// `[X_{i1}, [X_{i2}, .. X_{ir}]]` of length `r <= k + 1`; brackets are
    /// evaluated with nested central differences.
    pub fn hormander_probe(&self, x: &[f64], max_depth: usize) -> Result<Vec<usize>> {
        if max_depth == 0 || max_depth > MAX_BRACKET_DEPTH {
            return Err(Error::param(
                "max_depth",
                format!("must lie in 1..={MAX_BRACKET_DEPTH}, got {max_depth}"),
            ));
        }
        self.check(x)?;
        let step = self.bracket_step();
        if self.bounds.inner_margin(x) < max_depth as f64 * step {
            return Err(Error::Domain { point: x.to_vec() });
        }
        let mut rows: Vec<f64> = Vec::new();
        let mut ranks = Vec::with_capacity(max_depth);
        let mut level: Vec<Field> = (0..self.m).map(Field::Base).collect();
        for depth in 1..=max_depth {
            for f in &level {
                rows.extend(self.eval_field(f, x, step));
            }
            let mat = DMatrix::from_row_slice(rows.len() / self.n, self.n, &rows);
            ranks.push(rank_report(&mat).rank);
            if depth < max_depth {
                level = (0..self.m)
                    .flat_map(|j| {
                        level
                            .iter()
                            .map(move |f| Field::Bracket(Box::new(Field::Base(j)), Box::new(f.clone())))
                    })
                    .collect();
            }
        }
        Ok(ranks)
    }

    fn bracket_step(&self) -> f64 {
        1e-3 * self.bounds.diameter()
    }

    fn eval_field(&self, f: &Field, x: &[f64], step: f64) -> Vec<f64> {
        let n = self.n;
        match f {
            Field::Base(j) => {
                let mut c = vec![0.0; self.m * n];
                self.coeff_into(x, &mut c);
                c[j * n..(j + 1) * n].to_vec()
            }
            Field::Bracket(a, b) => {
                // [A, B] = (DB) A - (DA) B
                let va = self.eval_field(a, x, step);
                let vb = self.eval_field(b, x, step);
                let ja = self.jacobian(a, x, step);
                let jb = self.jacobian(b, x, step);
                (0..n)
                    .map(|r| {
                        (0..n)
                            .map(|k| jb[r * n + k] * va[k] - ja[r * n + k] * vb[k])
                            .sum()
                    })
                    .collect()
            }
        }
    }

    fn jacobian(&self, f: &Field, x: &[f64], step: f64) -> Vec<f64> {
        let n = self.n;
        let mut jac = vec![0.0; n * n];
        let mut xp = x.to_vec();
        for k in 0..n {
            xp[k] = x[k] + step;
            let plus = self.eval_field(f, &xp, step);
            xp[k] = x[k] - step;
            let minus = self.eval_field(f, &xp, step);
            xp[k] = x[k];
            for r in 0..n {
                jac[r * n + k] = (plus[r] - minus[r]) / (2.0 * step);
            }
        }
        jac
    }
}

#[derive(Debug, Clone)]
enum Field {
    Base(usize),
    Bracket(Box<Field>, Box<Field>),
}

fn rank_report(mat: &DMatrix<f64>) -> LicReport {
    let sv = mat.clone().svd(false, false).singular_values;
    let largest = sv.iter().copied().fold(0.0, f64::max);
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let rank = if largest > 0.0 {
        sv.iter().filter(|&&s| s > RANK_RTOL * largest).count()
    } else {
        0
    };
    LicReport {
        rank,
        smallest_singular_value: if smallest.is_finite() { smallest } else { 0.0 },
        largest_singular_value: largest,
    }
}
