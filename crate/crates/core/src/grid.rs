//! Lattice representation of piecewise-continuous functions whose pieces are
//! the unit intervals `[n, n+1)`.
//!
//! A [`GridFunction`] stores `M` samples per piece at `t = n + j/M`
//! (`0 <= j < M`) together with one explicit left-limit slot `f(n^-)` per
//! integer `n` in `(lo, hi]`. The value at an integer and the left limit there
//! are independent data; continuity is measured, never assumed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer window `[lo, hi]`.
///
/// For a [`GridFunction`] the pieces are `[n, n+1)` for `lo <= n < hi`; for an
/// [`AaSequence`] the window is the inclusive index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub const fn new(lo: i64, hi: i64) -> Self {
        Window { lo, hi }
    }

    /// Number of unit pieces `[n, n+1)` inside the window.
    pub fn pieces(&self) -> usize {
        (self.hi - self.lo).max(0) as usize
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    /// Window grown by `k` on each side (shrunk when `k < 0`).
    pub fn widen(&self, k: i64) -> Window {
        Window::new(self.lo - k, self.hi + k)
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Euclidean norm on `R^p`.
pub fn vnorm(v: &[f64]) -> f64 {
    match v {
        [x] => x.abs(),
        _ => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

pub(crate) fn vdist(a: &[f64], b: &[f64]) -> f64 {
    match (a, b) {
        ([x], [y]) => (x - y).abs(),
        _ => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
    }
}

fn check_finite(what: &str, data: &[f64]) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::InvalidData(format!(
            "{what}: non-finite value at flat index {i}"
        ))),
        None => Ok(()),
    }
}

/// A lattice point of a [`GridFunction`]: either an ordinary sample or the
/// left-limit slot at an integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub t: f64,
    pub left_limit: bool,
}

/// Sup norm and jump statistics of a [`GridFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub sup_norm: f64,
    pub attained_at: SamplePoint,
    /// `max_n |f(n) - f(n^-)|` over the integers strictly inside the window.
    pub jump_bound: f64,
}

/// Sampled piecewise-continuous function on `[lo, hi]` with values in `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    window: Window,
    samples_per_unit: usize,
    dim: usize,
    /// Row-major by `(piece, j, component)`.
    interior: Vec<f64>,
    /// Row-major by `(piece, component)`; slot `i` holds `f((lo + i + 1)^-)`.
    left_limits: Vec<f64>,
}

impl GridFunction {
    pub fn new(
        window: Window,
        samples_per_unit: usize,
        dim: usize,
        interior: Vec<f64>,
        left_limits: Vec<f64>,
    ) -> Result<Self> {
        if window.hi <= window.lo {
            return Err(Error::Config(format!("empty window {window}")));
        }
        if samples_per_unit == 0 {
            return Err(Error::Config("samples_per_unit must be positive".into()));
        }
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let pieces = window.pieces();
        if interior.len() != pieces * samples_per_unit * dim {
            return Err(Error::InvalidData(format!(
                "expected {} interior values, got {}",
                pieces * samples_per_unit * dim,
                interior.len()
            )));
        }
        if left_limits.len() != pieces * dim {
            return Err(Error::InvalidData(format!(
                "expected {} left-limit values, got {}",
                pieces * dim,
                left_limits.len()
            )));
        }
        check_finite("interior values", &interior)?;
        check_finite("left limits", &left_limits)?;
        Ok(GridFunction {
            window,
            samples_per_unit,
            dim,
            interior,
            left_limits,
        })
    }

    /// Builds a function from a piece-local rule `rule(n, s)` with `s in [0, 1]`:
    /// `s < 1` gives `f(n + s)` and `s = 1` gives the left limit `f((n+1)^-)`.
    pub fn from_pieces<F>(window: Window, samples_per_unit: usize, dim: usize, rule: F) -> Result<Self>
    where
        F: Fn(i64, f64) -> Vec<f64>,
    {
        if samples_per_unit == 0 {
            return Err(Error::Config("samples_per_unit must be positive".into()));
        }
        let m = samples_per_unit;
        let mut interior = Vec::with_capacity(window.pieces() * m * dim);
        let mut left = Vec::with_capacity(window.pieces() * dim);
        for n in window.lo..window.hi {
            for j in 0..m {
                let v = rule(n, j as f64 / m as f64);
                if v.len() != dim {
                    return Err(Error::InvalidData(format!(
                        "rule returned {} components, expected {dim}",
                        v.len()
                    )));
                }
                interior.extend_from_slice(&v);
            }
            let v = rule(n, 1.0);
            if v.len() != dim {
                return Err(Error::InvalidData(format!(
                    "rule returned {} components, expected {dim}",
                    v.len()
                )));
            }
            left.extend_from_slice(&v);
        }
        GridFunction::new(window, m, dim, interior, left)
    }

    pub fn from_pieces_scalar<F>(window: Window, samples_per_unit: usize, rule: F) -> Result<Self>
    where
        F: Fn(i64, f64) -> f64,
    {
        GridFunction::from_pieces(window, samples_per_unit, 1, |n, s| vec![rule(n, s)])
    }

    /// Samples a rule that is continuous across integers: the left limit at
    /// `n` is the rule evaluated at `n`.
    pub fn from_continuous<F>(window: Window, samples_per_unit: usize, dim: usize, rule: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let m = samples_per_unit.max(1) as f64;
        GridFunction::from_pieces(window, samples_per_unit, dim, |n, s| {
            if s >= 1.0 {
                rule((n + 1) as f64)
            } else {
                rule(n as f64 + (s * m).round() / m)
            }
        })
    }

    pub fn from_continuous_scalar<F>(window: Window, samples_per_unit: usize, rule: F) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        GridFunction::from_continuous(window, samples_per_unit, 1, |t| vec![rule(t)])
    }

    pub fn constant(window: Window, samples_per_unit: usize, value: &[f64]) -> Result<Self> {
        let pieces = window.pieces();
        let interior = value
            .iter()
            .copied()
            .cycle()
            .take(pieces * samples_per_unit * value.len())
            .collect();
        let left = value.iter().copied().cycle().take(pieces * value.len()).collect();
        GridFunction::new(window, samples_per_unit, value.len(), interior, left)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn samples_per_unit(&self) -> usize {
        self.samples_per_unit
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interior_values(&self) -> &[f64] {
        &self.interior
    }

    pub fn left_limit_values(&self) -> &[f64] {
        &self.left_limits
    }

    /// Total number of interior lattice nodes.
    pub fn node_count(&self) -> usize {
        self.window.pieces() * self.samples_per_unit
    }

    /// Time of lattice node `(n, j)`.
    pub fn lattice_time(&self, n: i64, j: usize) -> f64 {
        n as f64 + j as f64 / self.samples_per_unit as f64
    }

    fn piece_index(&self, n: i64) -> Option<usize> {
        (n >= self.window.lo && n < self.window.hi).then(|| (n - self.window.lo) as usize)
    }

    /// Interior sample `f(n + j/M)`. Panics when `(n, j)` is off the grid.
    pub fn sample(&self, n: i64, j: usize) -> &[f64] {
        let i = self
            .piece_index(n)
            .unwrap_or_else(|| panic!("piece {n} outside window {}", self.window));
        assert!(j < self.samples_per_unit, "sample index {j} out of range");
        let start = (i * self.samples_per_unit + j) * self.dim;
        &self.interior[start..start + self.dim]
    }

    /// Interior sample by flat node index (`0..node_count()`).
    pub(crate) fn node(&self, gi: usize) -> &[f64] {
        &self.interior[gi * self.dim..(gi + 1) * self.dim]
    }

    /// Stored left limit `f(n^-)` for `lo < n <= hi`.
    pub fn left_limit(&self, n: i64) -> Result<&[f64]> {
        if n <= self.window.lo || n > self.window.hi {
            return Err(Error::Domain(format!(
                "left limit at {n} requested outside ({}, {}]",
                self.window.lo, self.window.hi
            )));
        }
        let i = (n - self.window.lo - 1) as usize;
        Ok(&self.left_limits[i * self.dim..(i + 1) * self.dim])
    }

    pub(crate) fn left_limit_slot(&self, piece: usize) -> &[f64] {
        &self.left_limits[piece * self.dim..(piece + 1) * self.dim]
    }

    fn locate(&self, t: f64) -> Result<(i64, f64)> {
        if !t.is_finite() || t < self.window.lo as f64 || t >= self.window.hi as f64 {
            return Err(Error::Domain(format!(
                "t = {t} outside [{}, {})",
                self.window.lo, self.window.hi
            )));
        }
        let n = t.floor() as i64;
        Ok((n, (t - n as f64) * self.samples_per_unit as f64))
    }

    /// Value at a lattice point `t = n + j/M`; off-lattice times are rejected.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (n, pos) = self.locate(t)?;
        let j = pos.round();
        if (pos - j).abs() > 1e-9 * self.samples_per_unit as f64 {
            return Err(Error::Domain(format!(
                "t = {t} is not on the 1/{} lattice; use eval_linear",
                self.samples_per_unit
            )));
        }
        let j = j as usize;
        if j == self.samples_per_unit {
            // rounding pushed t onto the next integer
            return self.eval((n + 1) as f64);
        }
        Ok(self.sample(n, j).to_vec())
    }

    /// Piecewise-linear interpolant inside the piece containing `t`; between
    /// the last sample of a piece and the next integer the left-limit slot is
    /// used, so interpolation never crosses a discontinuity.
    pub fn eval_linear(&self, t: f64) -> Result<Vec<f64>> {
        let (n, pos) = self.locate(t)?;
        let piece = (n - self.window.lo) as usize;
        Ok(self.interp_in_piece(piece, pos))
    }

    /// Interpolated value at fractional node position `pos in [0, M]` of a piece;
    /// `pos = M` is the left-limit slot.
    pub(crate) fn interp_in_piece(&self, piece: usize, pos: f64) -> Vec<f64> {
        let m = self.samples_per_unit;
        let j = (pos.floor() as usize).min(m);
        let frac = pos - j as f64;
        let lower = self.closed_node(piece, j);
        if frac == 0.0 || j == m {
            return lower.to_vec();
        }
        let upper = self.closed_node(piece, j + 1);
        lower
            .iter()
            .zip(upper)
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    }

    /// Node `j in 0..=M` of the closed piece `[n, n+1]` (node `M` is the left limit).
    pub(crate) fn closed_node(&self, piece: usize, j: usize) -> &[f64] {
        if j == self.samples_per_unit {
            self.left_limit_slot(piece)
        } else {
            self.node(piece * self.samples_per_unit + j)
        }
    }

    /// Per-piece closure: every piece `[n, n+1]` gains the endpoint value
    /// `f((n+1)^-)`.
    pub fn closure_completion(&self) -> ClosedPieces {
        let m = self.samples_per_unit;
        let mut nodes = Vec::with_capacity(self.window.pieces() * (m + 1) * self.dim);
        for piece in 0..self.window.pieces() {
            for j in 0..=m {
                nodes.extend_from_slice(self.closed_node(piece, j));
            }
        }
        ClosedPieces {
            window: self.window,
            samples_per_unit: m,
            dim: self.dim,
            nodes,
        }
    }

    fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.window != other.window
            || self.samples_per_unit != other.samples_per_unit
            || self.dim != other.dim
        {
            return Err(Error::Incompatible(format!(
                "window {} / M={} / p={} vs window {} / M={} / p={}",
                self.window,
                self.samples_per_unit,
                self.dim,
                other.window,
                other.samples_per_unit,
                other.dim
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.check_compatible(other)?;
        let interior = self
            .interior
            .iter()
            .zip(&other.interior)
            .map(|(a, b)| op(*a, *b))
            .collect();
        let left = self
            .left_limits
            .iter()
            .zip(&other.left_limits)
            .map(|(a, b)| op(*a, *b))
            .collect();
        GridFunction::new(self.window, self.samples_per_unit, self.dim, interior, left)
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Componentwise (Hadamard) product.
    pub fn multiply(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        GridFunction {
            interior: self.interior.iter().map(|x| a * x).collect(),
            left_limits: self.left_limits.iter().map(|x| a * x).collect(),
            ..self.clone()
        }
    }

    /// Applies `op(t, value)` at every interior sample and left-limit slot
    /// (left limits receive `t = n`). The output dimension is `out_dim`.
    pub fn map_points<F>(&self, out_dim: usize, op: F) -> Result<GridFunction>
    where
        F: Fn(f64, &[f64]) -> Vec<f64>,
    {
        let m = self.samples_per_unit;
        let mut interior = Vec::with_capacity(self.node_count() * out_dim);
        let mut left = Vec::with_capacity(self.window.pieces() * out_dim);
        for (piece, n) in (self.window.lo..self.window.hi).enumerate() {
            for j in 0..m {
                interior.extend(op(self.lattice_time(n, j), self.node(piece * m + j)));
            }
            left.extend(op((n + 1) as f64, self.left_limit_slot(piece)));
        }
        GridFunction::new(self.window, m, out_dim, interior, left)
    }

    /// Sup norm over samples and left limits, and the integer jump bound.
    pub fn norm_report(&self) -> NormReport {
        let m = self.samples_per_unit;
        let mut sup = 0.0;
        let mut at = SamplePoint {
            t: self.window.lo as f64,
            left_limit: false,
        };
        for (piece, n) in (self.window.lo..self.window.hi).enumerate() {
            for j in 0..m {
                let v = vnorm(self.node(piece * m + j));
                if v > sup {
                    sup = v;
                    at = SamplePoint {
                        t: self.lattice_time(n, j),
                        left_limit: false,
                    };
                }
            }
            let v = vnorm(self.left_limit_slot(piece));
            if v > sup {
                sup = v;
                at = SamplePoint {
                    t: (n + 1) as f64,
                    left_limit: true,
                };
            }
        }
        NormReport {
            sup_norm: sup,
            attained_at: at,
            jump_bound: self.jump_bound(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.norm_report().sup_norm
    }

    /// `|f(n) - f(n^-)|` for each integer `lo < n < hi`, in increasing `n`.
    pub fn continuity_defects(&self) -> Vec<(i64, f64)> {
        (self.window.lo + 1..self.window.hi)
            .map(|n| {
                let piece = (n - self.window.lo) as usize;
                let d = vdist(self.node(piece * self.samples_per_unit), self.left_limit_slot(piece - 1));
                (n, d)
            })
            .collect()
    }

    pub fn jump_bound(&self) -> f64 {
        self.continuity_defects()
            .into_iter()
            .map(|(_, d)| d)
            .fold(0.0, f64::max)
    }

    /// Restriction to a sub-window.
    pub fn restrict(&self, window: Window) -> Result<GridFunction> {
        if !self.window.contains_window(&window) || window.hi <= window.lo {
            return Err(Error::Domain(format!(
                "cannot restrict {} to {window}",
                self.window
            )));
        }
        let m = self.samples_per_unit;
        let p = self.dim;
        let first = (window.lo - self.window.lo) as usize;
        let count = window.pieces();
        let interior = self.interior[first * m * p..(first + count) * m * p].to_vec();
        let left = self.left_limits[first * p..(first + count) * p].to_vec();
        GridFunction::new(window, m, p, interior, left)
    }

    /// Values at the integers `lo..hi` (the restriction `f|_Z`).
    pub fn integer_values(&self) -> AaSequence {
        let m = self.samples_per_unit;
        let values = (0..self.window.pieces())
            .flat_map(|piece| self.node(piece * m).to_vec())
            .collect();
        AaSequence {
            window: Window::new(self.window.lo, self.window.hi - 1),
            dim: self.dim,
            values,
        }
    }
}

/// Closure `F_f` of a [`GridFunction`]: each piece `[n, n+1]` carries `M + 1`
/// nodes, the last one being `f((n+1)^-)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedPieces {
    window: Window,
    samples_per_unit: usize,
    dim: usize,
    nodes: Vec<f64>,
}

impl ClosedPieces {
    pub fn window(&self) -> Window {
        self.window
    }

    pub fn samples_per_unit(&self) -> usize {
        self.samples_per_unit
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All `M + 1` nodes of the closed piece `[n, n+1]`, row-major by node.
    pub fn piece(&self, n: i64) -> Result<&[f64]> {
        if n < self.window.lo || n >= self.window.hi {
            return Err(Error::Domain(format!("piece {n} outside {}", self.window)));
        }
        let stride = (self.samples_per_unit + 1) * self.dim;
        let i = (n - self.window.lo) as usize;
        Ok(&self.nodes[i * stride..(i + 1) * stride])
    }

    pub fn node(&self, n: i64, j: usize) -> Result<&[f64]> {
        let piece = self.piece(n)?;
        if j > self.samples_per_unit {
            return Err(Error::Domain(format!("node {j} beyond M = {}", self.samples_per_unit)));
        }
        Ok(&piece[j * self.dim..(j + 1) * self.dim])
    }

    /// Back to the half-open representation; lossless.
    pub fn into_grid(self) -> GridFunction {
        let m = self.samples_per_unit;
        let p = self.dim;
        let mut interior = Vec::with_capacity(self.window.pieces() * m * p);
        let mut left = Vec::with_capacity(self.window.pieces() * p);
        for chunk in self.nodes.chunks_exact((m + 1) * p) {
            interior.extend_from_slice(&chunk[..m * p]);
            left.extend_from_slice(&chunk[m * p..]);
        }
        GridFunction {
            window: self.window,
            samples_per_unit: m,
            dim: p,
            interior,
            left_limits: left,
        }
    }
}

/// Integer-indexed sequence on the inclusive window `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AaSequence {
    window: Window,
    dim: usize,
    values: Vec<f64>,
}

impl AaSequence {
    pub fn new(window: Window, dim: usize, values: Vec<f64>) -> Result<Self> {
        if window.hi < window.lo {
            return Err(Error::Config(format!("empty sequence window {window}")));
        }
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let len = (window.hi - window.lo + 1) as usize;
        if values.len() != len * dim {
            return Err(Error::InvalidData(format!(
                "expected {} values, got {}",
                len * dim,
                values.len()
            )));
        }
        check_finite("sequence", &values)?;
        Ok(AaSequence { window, dim, values })
    }

    pub fn from_fn<F>(window: Window, dim: usize, rule: F) -> Result<Self>
    where
        F: Fn(i64) -> Vec<f64>,
    {
        let values = (window.lo..=window.hi).flat_map(rule).collect();
        AaSequence::new(window, dim, values)
    }

    pub fn from_scalar_fn<F>(window: Window, rule: F) -> Result<Self>
    where
        F: Fn(i64) -> f64,
    {
        AaSequence::from_fn(window, 1, |k| vec![rule(k)])
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        (self.window.hi - self.window.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: i64) -> Result<&[f64]> {
        if k < self.window.lo || k > self.window.hi {
            return Err(Error::Domain(format!("index {k} outside {}", self.window)));
        }
        let i = (k - self.window.lo) as usize;
        Ok(&self.values[i * self.dim..(i + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &[f64])> {
        (self.window.lo..=self.window.hi).zip(self.values.chunks_exact(self.dim))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks_exact(self.dim)
            .map(vnorm)
            .fold(0.0, f64::max)
    }

    /// Restriction to `[lo, hi]`.
    pub fn restrict(&self, window: Window) -> Result<AaSequence> {
        if window.lo < self.window.lo || window.hi > self.window.hi || window.hi < window.lo {
            return Err(Error::Domain(format!(
                "cannot restrict sequence on {} to {window}",
                self.window
            )));
        }
        let a = (window.lo - self.window.lo) as usize * self.dim;
        let b = (window.hi - self.window.lo + 1) as usize * self.dim;
        AaSequence::new(window, self.dim, self.values[a..b].to_vec())
    }
}

/// One term `c * x_1^{e_1} ... x_k^{e_k}` of a polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

/// Real polynomial in `arity` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub arity: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(arity: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        let terms = terms
            .into_iter()
            .map(|(coefficient, exponents)| {
                if exponents.len() != arity {
                    Err(Error::Config(format!(
                        "monomial has {} exponents, polynomial arity is {arity}",
                        exponents.len()
                    )))
                } else {
                    Ok(Monomial {
                        coefficient,
                        exponents,
                    })
                }
            })
            .collect::<Result<_>>()?;
        Ok(Polynomial { arity, terms })
    }
}

/// Evaluates `P(f_1, ..., f_k)` with the algebra operations (sum, scaling,
/// componentwise product), starting each monomial from the unit function.
pub fn poly_apply(poly: &Polynomial, fs: &[&GridFunction]) -> Result<GridFunction> {
    if fs.len() != poly.arity {
        return Err(Error::Incompatible(format!(
            "polynomial takes {} arguments, got {}",
            poly.arity,
            fs.len()
        )));
    }
    let Some(first) = fs.first() else {
        return Err(Error::Config("nullary polynomials have no grid to live on".into()));
    };
    for f in &fs[1..] {
        first.check_compatible(f)?;
    }
    let unit = GridFunction::constant(first.window, first.samples_per_unit, &vec![1.0; first.dim])?;
    let mut acc = unit.scale(0.0);
    for term in &poly.terms {
        let mut monomial = unit.scale(term.coefficient);
        for (f, &e) in fs.iter().zip(&term.exponents) {
            for _ in 0..e {
                monomial = monomial.multiply(f)?;
            }
        }
        acc = acc.add(&monomial)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::psi;

    fn w() -> Window {
        Window::new(-2, 3)
    }

    #[test]
    fn constant_evaluates_everywhere() {
        let f = GridFunction::constant(w(), 4, &[2.5, -1.0]).unwrap();
        assert_eq!(f.eval(-2.0).unwrap(), vec![2.5, -1.0]);
        assert_eq!(f.eval(1.75).unwrap(), vec![2.5, -1.0]);
        assert_eq!(f.left_limit(3).unwrap(), &[2.5, -1.0]);
    }

    #[test]
    fn eval_rejects_off_lattice_and_out_of_window() {
        let f = GridFunction::constant(w(), 4, &[1.0]).unwrap();
        assert!(matches!(f.eval(0.1), Err(Error::Domain(_))));
        assert!(matches!(f.eval(3.0), Err(Error::Domain(_))));
        assert!(matches!(f.eval(-2.25), Err(Error::Domain(_))));
        assert!(matches!(f.left_limit(-2), Err(Error::Domain(_))));
        assert!(matches!(f.left_limit(4), Err(Error::Domain(_))));
    }

    #[test]
    fn eval_linear_stays_inside_piece() {
        // step: 1 on [0,1), 5 on [1,2)
        let f = GridFunction::from_pieces_scalar(Window::new(0, 2), 4, |n, _| if n == 0 { 1.0 } else { 5.0 })
            .unwrap();
        assert_eq!(f.eval_linear(0.9).unwrap(), vec![1.0]);
        assert_eq!(f.eval_linear(0.999).unwrap(), vec![1.0]);
        assert_eq!(f.eval_linear(1.0).unwrap(), vec![5.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let r = GridFunction::new(Window::new(0, 1), 1, 1, vec![f64::NAN], vec![0.0]);
        assert!(matches!(r, Err(Error::InvalidData(_))));
    }

    #[test]
    fn psi_step_left_limit() {
        let f = GridFunction::from_pieces_scalar(Window::new(-1, 2), 8, |n, _| psi(n as f64)).unwrap();
        let expected = (0.25f64).sin();
        assert_eq!(f.left_limit(1).unwrap(), &[expected]);
        assert!((expected - 0.247404).abs() < 1e-6);
    }

    #[test]
    fn closure_of_step_keeps_left_value() {
        let f = GridFunction::from_pieces_scalar(Window::new(0, 2), 4, |n, _| if n == 0 { 1.0 } else { 5.0 })
            .unwrap();
        let closed = f.closure_completion();
        assert_eq!(closed.node(0, 4).unwrap(), &[1.0]);
        assert_eq!(closed.node(1, 0).unwrap(), &[5.0]);
    }

    #[test]
    fn closure_of_continuous_matches_samples() {
        let f = GridFunction::from_continuous_scalar(w(), 8, |t| (0.7 * t).sin()).unwrap();
        let closed = f.closure_completion();
        for n in w().lo..w().hi - 1 {
            assert_eq!(closed.node(n, 8).unwrap(), f.sample(n + 1, 0));
        }
    }

    #[test]
    fn closure_is_idempotent() {
        let f = GridFunction::from_pieces_scalar(w(), 6, |n, s| psi(n as f64) + s * s).unwrap();
        let once = f.closure_completion();
        let twice = once.clone().into_grid().closure_completion();
        assert_eq!(once, twice);
    }

    #[test]
    fn algebra_identities() {
        let f = GridFunction::from_pieces_scalar(w(), 4, |n, s| psi(n as f64 + s)).unwrap();
        let zero = GridFunction::constant(w(), 4, &[0.0]).unwrap();
        let ones = GridFunction::constant(w(), 4, &[1.0]).unwrap();
        assert_eq!(f.add(&zero).unwrap(), f);
        assert_eq!(f.multiply(&ones).unwrap(), f);
        let other = GridFunction::constant(Window::new(-2, 4), 4, &[1.0]).unwrap();
        assert!(matches!(f.add(&other), Err(Error::Incompatible(_))));
    }

    #[test]
    fn poly_examples() {
        let f = GridFunction::from_pieces_scalar(w(), 4, |n, _| psi(n as f64)).unwrap();
        let g = GridFunction::from_continuous_scalar(w(), 4, |t| t.cos()).unwrap();
        let id = Polynomial::new(1, vec![(1.0, vec![1])]).unwrap();
        assert_eq!(poly_apply(&id, &[&f]).unwrap(), f);

        let commutator = Polynomial::new(2, vec![(1.0, vec![1, 1]), (-1.0, vec![1, 1])]).unwrap();
        let z = poly_apply(&commutator, &[&f, &g]).unwrap();
        assert_eq!(z.sup_norm(), 0.0);

        let square = Polynomial::new(1, vec![(1.0, vec![2])]).unwrap();
        let sq = poly_apply(&square, &[&f]).unwrap();
        for (a, b) in sq.interior_values().iter().zip(f.interior_values()) {
            assert_eq!(*a, b * b);
        }
        assert!(matches!(poly_apply(&square, &[&f, &g]), Err(Error::Incompatible(_))));
    }

    #[test]
    fn norm_report_of_psi_step() {
        let win = Window::new(-16, 16);
        let f = GridFunction::from_pieces_scalar(win, 4, |n, _| psi(n as f64)).unwrap();
        let report = f.norm_report();
        let brute = (win.lo + 1..win.hi)
            .map(|n| (psi(n as f64) - psi((n - 1) as f64)).abs())
            .fold(0.0, f64::max);
        assert_eq!(report.jump_bound, brute);
        assert!(report.jump_bound <= 2.0 * report.sup_norm);
    }

    #[test]
    fn integer_values_and_restrict() {
        let f = GridFunction::from_continuous_scalar(w(), 4, |t| t * t).unwrap();
        let s = f.integer_values();
        assert_eq!(s.window(), Window::new(-2, 2));
        assert_eq!(s.get(2).unwrap(), &[4.0]);
        let r = f.restrict(Window::new(0, 2)).unwrap();
        assert_eq!(r.sample(1, 2), f.sample(1, 2));
        assert_eq!(r.left_limit(2).unwrap(), f.left_limit(2).unwrap());
    }
}
