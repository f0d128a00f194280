//! Convolution operators, the 1D heat semigroup, and Lipschitz composition.
//!
//! Every convolution is a fixed lattice quadrature: the integration variable
//! runs over the closed pieces `[k, k+1]` of the input (node `M` of a piece is
//! the left-limit slot), so a jump of the input never sits inside a panel.
//! Because output times and input nodes share the `1/M` lattice, kernel values
//! are tabulated once per lattice offset.
//!
//! Output left-limit slots are the integral evaluated as `t -> (n+1)^-`, i.e.
//! over the region attached to piece `n`; continuity of the output across `n+1`
//! is therefore a measured quantity (it differs from the sample at `n+1` by
//! truncation and rounding only).

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Window};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    FullLine,
    HalfLine,
}

type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Integrable convolution kernel with a certified L1 tail bound.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    support: Support,
    rule: RealMap,
    tail: RealMap,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

/// Largest radius searched when inverting a tail bound.
const MAX_RADIUS: i64 = 100_000;

impl Kernel {
    /// `rule` is the kernel on its support; for half-line kernels it is also
    /// evaluated up to two lattice steps left of the origin by the partial-panel
    /// quadrature and must extend smoothly there.
    /// `tail(R)` must bound `\int_{|s| > R} |rule(s)| ds` (or `\int_R^\infty`
    /// for half-line kernels) and tend to zero.
    pub fn new<F, T>(name: impl Into<String>, support: Support, rule: F, tail: T) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        T: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Kernel {
            name: name.into(),
            support,
            rule: Arc::new(rule),
            tail: Arc::new(tail),
        }
    }

    /// Centred normal density with the given variance.
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Config(format!("gaussian variance must be positive, got {variance}")));
        }
        let sigma = variance.sqrt();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * variance).sqrt();
        Ok(Kernel::new(
            format!("gaussian:{variance}"),
            Support::FullLine,
            move |s| norm * (-0.5 * s * s / variance).exp(),
            move |r| gaussian_tail(r / sigma),
        ))
    }

    /// Heat kernel `(4 pi t)^{-1/2} exp(-x^2 / (4t))`.
    pub fn heat(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("diffusion time must be positive, got {t}")));
        }
        let mut k = Kernel::gaussian(2.0 * t)?;
        k.name = format!("gauss:{t}");
        Ok(k)
    }

    /// `e^{-rate s}` on `[0, inf)`.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Config(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Kernel::new(
            if rate == 1.0 { "exp".to_string() } else { format!("exp:{rate}") },
            Support::HalfLine,
            move |s| (-rate * s).exp(),
            move |r| (-rate * r.max(0.0)).exp() / rate,
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn eval(&self, s: f64) -> f64 {
        if self.support == Support::HalfLine && s < 0.0 {
            0.0
        } else {
            (self.rule)(s)
        }
    }

    pub fn l1_tail_bound(&self, r: f64) -> f64 {
        (self.tail)(r)
    }

    /// Smallest integer radius `R >= 1` with `l1_tail_bound(R) <= eps`.
    pub fn truncation_radius(&self, eps: f64) -> Result<i64> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("truncation eps must be positive, got {eps}")));
        }
        (1..=MAX_RADIUS)
            .find(|&r| self.l1_tail_bound(r as f64) <= eps)
            .ok_or_else(|| Error::Config(format!("kernel {} tail does not drop below {eps}", self.name)))
    }

    /// `\int |kernel|` by Simpson on a `1/samples_per_unit` lattice up to the
    /// radius where the tail is below `eps`, plus that tail bound.
    pub fn l1_norm(&self, samples_per_unit: usize, eps: f64) -> Result<f64> {
        let r = self.truncation_radius(eps)?;
        let h = 1.0 / samples_per_unit as f64;
        let n = r as usize * samples_per_unit;
        let lo = match self.support {
            Support::FullLine => -(n as i64),
            Support::HalfLine => 0,
        };
        let values: Vec<f64> = (lo..=n as i64).map(|i| self.eval(i as f64 * h).abs()).collect();
        Ok(quadrature::integrate(&values, h) + self.l1_tail_bound(r as f64))
    }
}

/// Upper bound for `P(|Z| > z)` of a standard normal (Mills ratio).
fn gaussian_tail(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (2.0 * density / z).min(1.0)
}

/// Fundamental solution of the 1D heat equation at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernel {
    pub t: f64,
}

/// Required accuracy of the runtime normalisation check.
pub const HEAT_MASS_TOLERANCE: f64 = 1e-10;

impl HeatKernel {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("diffusion time must be positive, got {t}")));
        }
        Ok(HeatKernel { t })
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::heat(self.t).expect("validated time")
    }

    /// Numerical mass of the kernel on the `1/samples_per_unit` lattice.
    pub fn mass(&self, samples_per_unit: usize) -> f64 {
        let k = self.kernel();
        let r = k.truncation_radius(1e-14).expect("gaussian tail vanishes");
        let h = 1.0 / samples_per_unit as f64;
        let n = r * samples_per_unit as i64;
        let values: Vec<f64> = (-n..=n).map(|i| k.eval(i as f64 * h)).collect();
        quadrature::integrate(&values, h)
    }
}

/// Tabulated kernel action indexed by lattice offset `m`, i.e. at `s = m / M`.
trait KernelTable {
    fn accumulate(&self, offset: i64, weight: f64, v: &[f64], acc: &mut [f64]);
}

struct ScalarTable {
    first: i64,
    values: Vec<f64>,
}

impl ScalarTable {
    fn new(kernel: &Kernel, samples_per_unit: usize, first: i64, last: i64) -> Self {
        let h = 1.0 / samples_per_unit as f64;
        ScalarTable {
            first,
            values: (first..=last).map(|m| (kernel.rule)(m as f64 * h)).collect(),
        }
    }
}

impl KernelTable for ScalarTable {
    fn accumulate(&self, offset: i64, weight: f64, v: &[f64], acc: &mut [f64]) {
        let c = weight * self.values[(offset - self.first) as usize];
        for (a, x) in acc.iter_mut().zip(v) {
            *a += c * x;
        }
    }
}

/// Nodes past the upper limit that the partial-panel rule may read.
const BORROW: i64 = 2;

/// `e^{A m h}` for `m = -BORROW, ..., 0, 1, ...`.
struct MatrixTable {
    mats: Vec<DMatrix<f64>>,
}

impl KernelTable for MatrixTable {
    fn accumulate(&self, offset: i64, weight: f64, v: &[f64], acc: &mut [f64]) {
        let m = &self.mats[(offset + BORROW) as usize];
        for (r, a) in acc.iter_mut().enumerate() {
            let row: f64 = (0..v.len()).map(|c| m[(r, c)] * v[c]).sum();
            *a += weight * row;
        }
    }
}

/// Integration region for the output slot `(n, j)`.
struct Region {
    /// Full closed pieces `first..last`.
    first: i64,
    last: i64,
    /// Nodes `0..=j` of piece `n` (the current piece) when present.
    partial: bool,
}

fn integrate_slot(
    f: &GridFunction,
    table: &dyn KernelTable,
    out_dim: usize,
    n: i64,
    j: usize,
    region: &Region,
    full_weights: &[f64],
) -> Vec<f64> {
    let m = f.samples_per_unit();
    let h = 1.0 / m as f64;
    let lo = f.window().lo;
    let mut acc = vec![0.0; out_dim];
    for k in region.first..region.last {
        let piece = (k - lo) as usize;
        let base = (n - k) * m as i64 + j as i64;
        for (i, w) in full_weights.iter().enumerate() {
            table.accumulate(base - i as i64, *w, f.closed_node(piece, i), &mut acc);
        }
    }
    if region.partial && j > 0 {
        let piece = (n - lo) as usize;
        let w = quadrature::weights(j, m);
        for (i, w) in w.iter().enumerate() {
            table.accumulate(j as i64 - i as i64, *w, f.closed_node(piece, i), &mut acc);
        }
    }
    for a in &mut acc {
        *a *= h;
    }
    acc
}

/// Evaluates all output slots of `out_window`; slot `j = M` of piece `n` is the
/// left limit at `n + 1`.
fn assemble<R>(
    f: &GridFunction,
    table: &dyn KernelTable,
    out_dim: usize,
    out_window: Window,
    region: R,
) -> Result<GridFunction>
where
    R: Fn(i64) -> Region,
{
    let m = f.samples_per_unit();
    let full = quadrature::weights(m, m);
    let mut interior = Vec::with_capacity(out_window.pieces() * m * out_dim);
    let mut left = Vec::with_capacity(out_window.pieces() * out_dim);
    for n in out_window.lo..out_window.hi {
        let reg = region(n);
        for j in 0..m {
            interior.extend(integrate_slot(f, table, out_dim, n, j, &reg, &full));
        }
        left.extend(integrate_slot(f, table, out_dim, n, m, &reg, &full));
    }
    GridFunction::new(out_window, m, out_dim, interior, left)
}

fn require_support(kernel: &Kernel, expected: Support) -> Result<()> {
    if kernel.support() != expected {
        return Err(Error::Config(format!(
            "kernel {} has support {:?}, operation needs {:?}",
            kernel.name(),
            kernel.support(),
            expected
        )));
    }
    Ok(())
}

/// `(Lf)(t) = \int_R kernel(t - s) f(s) ds` for a full-line kernel.
///
/// The integral is truncated at the radius `R` where the kernel's L1 tail is
/// below `trunc_eps`; the output window is `[lo + R, hi - R]`.
pub fn conv_full_line(kernel: &Kernel, f: &GridFunction, trunc_eps: f64) -> Result<GridFunction> {
    require_support(kernel, Support::FullLine)?;
    let r = kernel.truncation_radius(trunc_eps)?;
    let w = f.window();
    let out = Window::new(w.lo + r, w.hi - r);
    if out.hi <= out.lo {
        return Err(Error::Domain(format!(
            "window {w} too small: truncation radius {r} needs at least {} pieces",
            2 * r + 1
        )));
    }
    let m = f.samples_per_unit() as i64;
    let table = ScalarTable::new(kernel, f.samples_per_unit(), -(r + 2) * m, (r + 2) * m);
    assemble(f, &table, f.dim(), out, |n| Region {
        first: n - r,
        last: n + r + 1,
        partial: false,
    })
}

/// `(Lf)(t) = \int_{-inf}^t kernel(t - s) f(s) ds` for a half-line kernel,
/// truncated like [`conv_full_line`]; the output window is `[lo + R, hi]`.
pub fn conv_causal(kernel: &Kernel, f: &GridFunction, trunc_eps: f64) -> Result<GridFunction> {
    require_support(kernel, Support::HalfLine)?;
    let r = kernel.truncation_radius(trunc_eps)?;
    let w = f.window();
    let out = Window::new(w.lo + r, w.hi);
    if out.hi <= out.lo {
        return Err(Error::Domain(format!(
            "window {w} too small: truncation radius {r} needs at least {} pieces",
            r + 1
        )));
    }
    let m = f.samples_per_unit() as i64;
    let table = ScalarTable::new(kernel, f.samples_per_unit(), -BORROW, (r + 2) * m);
    assemble(f, &table, f.dim(), out, |n| Region {
        first: n - r,
        last: n,
        partial: true,
    })
}

fn half_line_input(f: &GridFunction) -> Result<GridFunction> {
    let w = f.window();
    if w.lo > 0 || w.hi <= 0 {
        return Err(Error::Domain(format!("input on {w} does not cover [0, hi]")));
    }
    f.restrict(Window::new(0, w.hi))
}

/// `(Lf)(t) = \int_0^t kernel(t - s) f(s) ds` on `[0, hi]`. No truncation is
/// involved; `trunc_eps` is accepted for interface symmetry and validated.
pub fn conv_halfline_asymptotic(kernel: &Kernel, f: &GridFunction, trunc_eps: f64) -> Result<GridFunction> {
    require_support(kernel, Support::HalfLine)?;
    if !(trunc_eps > 0.0) {
        return Err(Error::Config(format!("trunc_eps must be positive, got {trunc_eps}")));
    }
    let f = half_line_input(f)?;
    let m = f.samples_per_unit() as i64;
    let w = f.window();
    let table = ScalarTable::new(kernel, f.samples_per_unit(), -BORROW, (w.hi + 1) * m);
    assemble(&f, &table, f.dim(), w, |n| Region {
        first: 0,
        last: n,
        partial: true,
    })
}

/// `(Lf)(t) = \int_0^t e^{A (t - s)} f(s) ds` for a Hurwitz matrix `A`
/// (every eigenvalue with negative real part), on `[0, hi]`.
pub fn conv_halfline_matrix(a: &DMatrix<f64>, f: &GridFunction) -> Result<GridFunction> {
    let p = f.dim();
    if a.nrows() != p || a.ncols() != p {
        return Err(Error::Incompatible(format!(
            "matrix is {}x{}, function has dimension {p}",
            a.nrows(),
            a.ncols()
        )));
    }
    let spectral_abscissa = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if spectral_abscissa >= 0.0 {
        return Err(Error::Config(format!(
            "matrix is not Hurwitz (max real part of spectrum {spectral_abscissa})"
        )));
    }
    let f = half_line_input(&f.clone())?;
    let m = f.samples_per_unit();
    let w = f.window();
    let step = (a * (1.0 / m as f64)).exp();
    let count = (w.hi as usize + 1) * m + 1;
    let mut mats = Vec::with_capacity(count + BORROW as usize);
    for b in (1..=BORROW).rev() {
        mats.push((a * (-(b as f64) / m as f64)).exp());
    }
    let mut cur = DMatrix::<f64>::identity(p, p);
    for _ in 0..count {
        let next = &step * &cur;
        mats.push(std::mem::replace(&mut cur, next));
    }
    let table = MatrixTable { mats };
    assemble(&f, &table, p, w, |n| Region {
        first: 0,
        last: n,
        partial: true,
    })
}

/// Solution `u(t, .)` of the 1D heat equation with initial datum `u0`.
///
/// The kernel normalisation is checked on the input lattice before use.
pub fn heat_solve(u0: &GridFunction, t: f64, trunc_eps: f64) -> Result<GridFunction> {
    let heat = HeatKernel::new(t)?;
    let jump = u0.jump_bound();
    let scale = 1.0 + u0.sup_norm();
    if jump > 1e-8 * scale {
        return Err(Error::Domain(format!(
            "initial datum must be continuous; jump bound {jump:e}"
        )));
    }
    let mass = heat.mass(u0.samples_per_unit());
    if (mass - 1.0).abs() > HEAT_MASS_TOLERANCE {
        return Err(Error::Config(format!(
            "heat kernel at t = {t} integrates to {mass} on a 1/{} lattice",
            u0.samples_per_unit()
        )));
    }
    conv_full_line(&heat.kernel(), u0, trunc_eps)
}

/// Result of [`compose_lipschitz`]: the composed function and the declared
/// Lipschitz constant of the outer map in its state argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub function: GridFunction,
    pub lipschitz: f64,
}

/// Pointwise `t -> g(t, x(t))` on samples and left limits; left-limit slots
/// are evaluated at `t = n`.
pub fn compose_lipschitz<G>(g: G, lipschitz: f64, out_dim: usize, x: &GridFunction) -> Result<Composition>
where
    G: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(Error::Config(format!("Lipschitz constant must be >= 0, got {lipschitz}")));
    }
    Ok(Composition {
        function: x.map_points(out_dim, g)?,
        lipschitz,
    })
}
