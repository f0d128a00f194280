//! Linear differential equations with piecewise constant argument,
//!
//! ```text
//! y'(t) = A(t) y(t) + B(t) y([t]) + f(t),
//! ```
//!
//! solved interval by interval with the variation-of-constants formula
//!
//! ```text
//! y(t) = (Phi(t,n) + \int_n^t Phi(t,u) B(u) du) y(n) + \int_n^t Phi(t,u) f(u) du,   t in [n, n+1),
//! ```
//!
//! where `Phi` is the fundamental matrix of `y' = A(t) y`. Continuity at
//! `n + 1` turns this into the difference equation `y(n+1) = C(n) y(n) + h(n)`.
//!
//! `Phi` is integrated with fixed-step RK4 (`steps` per unit interval) and the
//! integrals use composite Simpson on the same nodes. Coefficients are
//! evaluated piece-locally as `(n, s)` with `s in [0, 1]`; `s = 1` is the left
//! limit at `n + 1`, so coefficients with jumps at the integers are handled
//! exactly.

use std::ops::{Add, Mul};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{default_deltas, modulus};
use crate::error::{Error, Result};
use crate::fixtures::psi;
use crate::grid::{AaSequence, GridFunction, Window};

/// Minimum invertibility certificate for a well-posed backward solve.
pub const CERTIFICATE_MIN: f64 = 1e-8;

/// Map evaluated piece-locally at `(n, s)`, `t = n + s`, `s in [0, 1]`.
pub struct PieceMap<T>(Arc<dyn Fn(i64, f64) -> T + Send + Sync>);

impl<T> Clone for PieceMap<T> {
    fn clone(&self) -> Self {
        PieceMap(Arc::clone(&self.0))
    }
}

impl<T: 'static> PieceMap<T> {
    pub fn piecewise<F>(f: F) -> Self
    where
        F: Fn(i64, f64) -> T + Send + Sync + 'static,
    {
        PieceMap(Arc::new(f))
    }

    /// A map continuous across the integers.
    pub fn continuous<F>(f: F) -> Self
    where
        F: Fn(f64) -> T + Send + Sync + 'static,
    {
        PieceMap(Arc::new(move |n, s| f(n as f64 + s)))
    }

    pub fn at(&self, n: i64, s: f64) -> T {
        (self.0)(n, s)
    }
}

impl<T: Clone + Send + Sync + 'static> PieceMap<T> {
    pub fn constant(value: T) -> Self {
        PieceMap(Arc::new(move |_, _| value.clone()))
    }
}

pub type ScalarMap = PieceMap<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    Continuous,
    PiecewiseContinuousAtIntegers,
}

/// Coefficient expression understood by the command line: a real constant,
/// `psi-step` (`psi([t])`), `psi` (`psi(t)`) or `sin:w` (`sin(w t)`).
pub fn builtin_coefficient(expr: &str) -> Result<(ScalarMap, Regularity)> {
    let expr = expr.trim();
    match expr {
        "psi-step" => Ok((
            PieceMap::piecewise(|n, _| psi(n as f64)),
            Regularity::PiecewiseContinuousAtIntegers,
        )),
        "psi" => Ok((PieceMap::continuous(psi), Regularity::Continuous)),
        _ => {
            if let Some(w) = expr.strip_prefix("sin:") {
                let w: f64 = w
                    .parse()
                    .map_err(|_| Error::Config(format!("bad frequency in {expr:?}")))?;
                return Ok((PieceMap::continuous(move |t| (w * t).sin()), Regularity::Continuous));
            }
            let c: f64 = expr
                .parse()
                .map_err(|_| Error::Config(format!("unknown coefficient expression {expr:?}")))?;
            if !c.is_finite() {
                return Err(Error::Config(format!("coefficient {expr:?} is not finite")));
            }
            Ok((PieceMap::constant(c), Regularity::Continuous))
        }
    }
}

/// Coefficients of `y' = A(t) y + B(t) y([t]) + f(t)` on `R^p`.
#[derive(Clone)]
pub struct DepcaSystem {
    dim: usize,
    a: PieceMap<DMatrix<f64>>,
    b: PieceMap<DMatrix<f64>>,
    forcing: PieceMap<DVector<f64>>,
    regularity: Regularity,
}

impl std::fmt::Debug for DepcaSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DepcaSystem")
            .field("dim", &self.dim)
            .field("regularity", &self.regularity)
            .finish_non_exhaustive()
    }
}

impl DepcaSystem {
    pub fn new(
        dim: usize,
        a: PieceMap<DMatrix<f64>>,
        b: PieceMap<DMatrix<f64>>,
        forcing: PieceMap<DVector<f64>>,
        regularity: Regularity,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let (a0, b0, f0) = (a.at(0, 0.0), b.at(0, 0.0), forcing.at(0, 0.0));
        if a0.shape() != (dim, dim) || b0.shape() != (dim, dim) || f0.len() != dim {
            return Err(Error::Incompatible(format!(
                "coefficient shapes A {:?}, B {:?}, f {} do not match dimension {dim}",
                a0.shape(),
                b0.shape(),
                f0.len()
            )));
        }
        Ok(DepcaSystem {
            dim,
            a,
            b,
            forcing,
            regularity,
        })
    }

    /// Scalar equation `y' = a(t) y + b(t) y([t]) + f(t)`.
    pub fn scalar(a: ScalarMap, b: ScalarMap, f: ScalarMap, regularity: Regularity) -> Self {
        DepcaSystem {
            dim: 1,
            a: PieceMap(Arc::new(move |n, s| DMatrix::from_element(1, 1, a.at(n, s)))),
            b: PieceMap(Arc::new(move |n, s| DMatrix::from_element(1, 1, b.at(n, s)))),
            forcing: PieceMap(Arc::new(move |n, s| DVector::from_element(1, f.at(n, s)))),
            regularity,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    /// Samples every coefficient on the `1/steps` lattice of `window` and
    /// rejects non-finite values.
    pub fn check_bounded(&self, window: Window, steps: usize) -> Result<()> {
        for n in window.lo..window.hi {
            for k in 0..=steps {
                let s = k as f64 / steps as f64;
                let ok = self.a.at(n, s).iter().all(|x| x.is_finite())
                    && self.b.at(n, s).iter().all(|x| x.is_finite())
                    && self.forcing.at(n, s).iter().all(|x| x.is_finite());
                if !ok {
                    return Err(Error::InvalidData(format!(
                        "coefficients not finite at t = {}",
                        n as f64 + s
                    )));
                }
            }
        }
        Ok(())
    }

    fn rhs(&self, n: i64, s: f64, y: &DVector<f64>, y_n: &DVector<f64>) -> DVector<f64> {
        self.a.at(n, s) * y + self.b.at(n, s) * y_n + self.forcing.at(n, s)
    }
}

/// `Phi(n + k/steps, n)` for `k = 0..=steps` on one unit interval.
#[derive(Clone)]
pub struct FundamentalMatrix {
    n: i64,
    steps: usize,
    a: PieceMap<DMatrix<f64>>,
    nodes: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
}

fn rk4_step(a: &PieceMap<DMatrix<f64>>, n: i64, s: f64, h: f64, phi: &DMatrix<f64>) -> DMatrix<f64> {
    let a0 = a.at(n, s);
    let am = a.at(n, s + 0.5 * h);
    let a1 = a.at(n, (s + h).min(1.0));
    let k1 = &a0 * phi;
    let k2 = &am * (phi + &k1 * (0.5 * h));
    let k3 = &am * (phi + &k2 * (0.5 * h));
    let k4 = &a1 * (phi + &k3 * h);
    phi + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

impl FundamentalMatrix {
    pub fn interval(&self) -> i64 {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `Phi(n + k/steps, n)`.
    pub fn node(&self, k: usize) -> &DMatrix<f64> {
        &self.nodes[k]
    }

    /// `Phi(n, n + k/steps)`.
    pub fn node_inverse(&self, k: usize) -> &DMatrix<f64> {
        &self.inverses[k]
    }

    /// `Phi(n + kt/steps, n + ks/steps)`.
    pub fn between_nodes(&self, kt: usize, ks: usize) -> DMatrix<f64> {
        if kt == ks {
            return DMatrix::identity(self.nodes[0].nrows(), self.nodes[0].nrows());
        }
        &self.nodes[kt] * &self.inverses[ks]
    }

    /// `Phi(t, n)` for any `t in [n, n+1]`: the nearest lower node advanced by a
    /// single partial RK4 step.
    fn from_start(&self, t: f64) -> DMatrix<f64> {
        let s = (t - self.n as f64).clamp(0.0, 1.0);
        let pos = s * self.steps as f64;
        let k = (pos.floor() as usize).min(self.steps);
        let rest = s - k as f64 / self.steps as f64;
        if rest <= 0.0 {
            return self.nodes[k].clone();
        }
        rk4_step(&self.a, self.n, k as f64 / self.steps as f64, rest, &self.nodes[k])
    }

    /// `Phi(t, s)` for `t, s in [n, n+1]`; exactly the identity when `t == s`.
    pub fn eval(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        let (lo, hi) = (self.n as f64, (self.n + 1) as f64);
        if !(lo..=hi).contains(&t) || !(lo..=hi).contains(&s) {
            return Err(Error::Domain(format!(
                "Phi({t}, {s}) requested outside [{lo}, {hi}]"
            )));
        }
        let p = self.nodes[0].nrows();
        if t == s {
            return Ok(DMatrix::identity(p, p));
        }
        let inv = self
            .from_start(s)
            .try_inverse()
            .ok_or_else(|| Error::InvalidData(format!("Phi({s}, {lo}) is singular")))?;
        Ok(self.from_start(t) * inv)
    }
}

/// Fundamental matrix of `y' = A(t) y` on `[n, n+1]` by fixed-step RK4.
pub fn fundamental_matrix(a: &PieceMap<DMatrix<f64>>, n: i64, steps: usize) -> Result<FundamentalMatrix> {
    if steps < 4 {
        return Err(Error::Config(format!("steps must be at least 4, got {steps}")));
    }
    let a0 = a.at(n, 0.0);
    if a0.nrows() != a0.ncols() {
        return Err(Error::Incompatible(format!("A is {:?}, not square", a0.shape())));
    }
    let h = 1.0 / steps as f64;
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(DMatrix::identity(a0.nrows(), a0.nrows()));
    for k in 0..steps {
        let next = rk4_step(a, n, k as f64 * h, h, &nodes[k]);
        nodes.push(next);
    }
    let inverses = nodes
        .iter()
        .map(|m| {
            m.clone()
                .try_inverse()
                .ok_or_else(|| Error::InvalidData(format!("fundamental matrix singular on [{n}, {}]", n + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FundamentalMatrix {
        n,
        steps,
        a: a.clone(),
        nodes,
        inverses,
    })
}

/// Running integrals `\int_0^{k h} g` for `k = 0..=g.len()-1`, using the same
/// rules as [`crate::quadrature::weights`].
fn cumulative<T>(g: &[T], h: f64) -> Vec<T>
where
    T: Clone + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = g.len() - 1;
    let zero = g[0].clone() * 0.0;
    let mut out = vec![zero; n + 1];
    if n >= 1 {
        out[1] = if n >= 3 {
            g[0].clone() * (9.0 * h / 24.0) + g[1].clone() * (19.0 * h / 24.0) + g[2].clone() * (-5.0 * h / 24.0)
                + g[3].clone() * (h / 24.0)
        } else if n == 2 {
            g[0].clone() * (5.0 * h / 12.0) + g[1].clone() * (8.0 * h / 12.0) + g[2].clone() * (-h / 12.0)
        } else {
            (g[0].clone() + g[1].clone()) * (0.5 * h)
        };
    }
    for k in 2..=n {
        out[k] = if k % 2 == 0 {
            out[k - 2].clone() + (g[k - 2].clone() + g[k - 1].clone() * 4.0 + g[k].clone()) * (h / 3.0)
        } else {
            out[k - 3].clone()
                + (g[k - 3].clone() + g[k - 2].clone() * 3.0 + g[k - 1].clone() * 3.0 + g[k].clone()) * (3.0 * h / 8.0)
        };
    }
    out
}

/// Everything the variation-of-constants formula needs on `[n, n+1]`.
struct IntervalData {
    phi: FundamentalMatrix,
    /// `\int_n^{n + k h} Phi(n, u) B(u) du`.
    kb: Vec<DMatrix<f64>>,
    /// `\int_n^{n + k h} Phi(n, u) f(u) du`.
    kf: Vec<DVector<f64>>,
}

impl IntervalData {
    fn build(sys: &DepcaSystem, n: i64, steps: usize) -> Result<Self> {
        let phi = fundamental_matrix(&sys.a, n, steps)?;
        let h = 1.0 / steps as f64;
        let gb: Vec<DMatrix<f64>> = (0..=steps)
            .map(|k| phi.node_inverse(k) * sys.b.at(n, k as f64 * h))
            .collect();
        let gf: Vec<DVector<f64>> = (0..=steps)
            .map(|k| phi.node_inverse(k) * sys.forcing.at(n, k as f64 * h))
            .collect();
        Ok(IntervalData {
            kb: cumulative(&gb, h),
            kf: cumulative(&gf, h),
            phi,
        })
    }

    /// `y(n + k h)` from `y(n)` by the variation-of-constants formula.
    fn state(&self, k: usize, y_n: &DVector<f64>) -> DVector<f64> {
        let p = y_n.len();
        let phi = self.phi.node(k);
        phi * ((DMatrix::identity(p, p) + &self.kb[k]) * y_n + &self.kf[k])
    }

    /// `C(n)` and `h(n)` with the integrand `Phi(n+1, u) B(u)` formed directly.
    fn coefficients(&self, sys: &DepcaSystem) -> (DMatrix<f64>, DVector<f64>) {
        let steps = self.phi.steps();
        let n = self.phi.interval();
        let h = 1.0 / steps as f64;
        let gb: Vec<DMatrix<f64>> = (0..=steps)
            .map(|k| self.phi.between_nodes(steps, k) * sys.b.at(n, k as f64 * h))
            .collect();
        let gf: Vec<DVector<f64>> = (0..=steps)
            .map(|k| self.phi.between_nodes(steps, k) * sys.forcing.at(n, k as f64 * h))
            .collect();
        let ib = cumulative(&gb, h).pop().expect("steps >= 4");
        let ih = cumulative(&gf, h).pop().expect("steps >= 4");
        (self.phi.node(steps) + ib, ih)
    }

    /// Smallest singular value of `I + \int_tau^t Phi(tau, u) B(u) du` over a
    /// sub-lattice of `(tau, t)` pairs.
    fn certificate(&self) -> f64 {
        let steps = self.phi.steps();
        let stride = (steps / 16).max(1);
        let mut ks: Vec<usize> = (0..=steps).step_by(stride).collect();
        if *ks.last().expect("nonempty") != steps {
            ks.push(steps);
        }
        let p = self.kb[0].nrows();
        let mut best = f64::INFINITY;
        for &tau in &ks {
            for &t in &ks {
                if t == tau {
                    continue;
                }
                let m = DMatrix::identity(p, p) + self.phi.node(tau) * (&self.kb[t] - &self.kb[tau]);
                let sv = m.singular_values().min();
                best = best.min(sv);
            }
        }
        if best.is_finite() {
            best
        } else {
            1.0
        }
    }
}

/// `y(n+1) = C(n) y(n) + h(n)` on a window of intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceSystem {
    pub window: Window,
    pub c: Vec<DMatrix<f64>>,
    pub h: Vec<DVector<f64>>,
    pub certificates: Vec<f64>,
}

impl DifferenceSystem {
    fn index(&self, n: i64) -> Result<usize> {
        if n < self.window.lo || n >= self.window.hi {
            return Err(Error::Domain(format!("interval {n} outside {}", self.window)));
        }
        Ok((n - self.window.lo) as usize)
    }

    pub fn c_at(&self, n: i64) -> Result<&DMatrix<f64>> {
        Ok(&self.c[self.index(n)?])
    }

    pub fn h_at(&self, n: i64) -> Result<&DVector<f64>> {
        Ok(&self.h[self.index(n)?])
    }

    pub fn min_certificate(&self) -> (i64, f64) {
        self.certificates
            .iter()
            .enumerate()
            .map(|(i, c)| (self.window.lo + i as i64, *c))
            .fold((self.window.lo, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }
}

struct Reduction {
    window: Window,
    steps: usize,
    intervals: Vec<IntervalData>,
    system: DifferenceSystem,
}

fn reduce(sys: &DepcaSystem, window: Window, steps: usize) -> Result<Reduction> {
    if window.hi <= window.lo {
        return Err(Error::Config(format!("empty window {window}")));
    }
    sys.check_bounded(window, steps)?;
    let intervals = (window.lo..window.hi)
        .map(|n| IntervalData::build(sys, n, steps))
        .collect::<Result<Vec<_>>>()?;
    let (c, h): (Vec<_>, Vec<_>) = intervals.iter().map(|d| d.coefficients(sys)).unzip();
    let certificates = intervals.iter().map(IntervalData::certificate).collect();
    Ok(Reduction {
        window,
        steps,
        intervals,
        system: DifferenceSystem {
            window,
            c,
            h,
            certificates,
        },
    })
}

fn check_certificates(system: &DifferenceSystem) -> Result<()> {
    let (n, cert) = system.min_certificate();
    if cert < CERTIFICATE_MIN {
        return Err(Error::IllPosed {
            interval: n,
            certificate: cert,
            threshold: CERTIFICATE_MIN,
        });
    }
    Ok(())
}

/// Difference equation for the intervals `[n, n+1]`, `lo <= n < hi`.
pub fn reduce_to_difference(sys: &DepcaSystem, window: Window, steps: usize) -> Result<DifferenceSystem> {
    let r = reduce(sys, window, steps)?;
    check_certificates(&r.system)?;
    Ok(r.system)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `(n, sup |y' - rhs|)` per interval, derivative by second-order differences.
    pub per_interval: Vec<(i64, f64)>,
    pub max_residual: f64,
    /// `max_n |y_formula((n+1)^-) - (C(n) y(n) + h(n))|`.
    pub difference_consistency: f64,
}

/// Uniform-continuity check for a bounded solution: `omega(delta) <= 2 M delta`
/// with `M` the sampled sup of the right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcCheck {
    pub rhs_sup: f64,
    pub table: Vec<(f64, f64)>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepcaSolution {
    pub trajectory: GridFunction,
    pub integer_values: AaSequence,
    pub residual_report: ResidualReport,
    pub continuity_defect: f64,
    pub uc_check: Option<UcCheck>,
}

/// JSON view of a solution without the trajectory samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub window: Window,
    pub samples_per_unit: usize,
    pub continuity_defect: f64,
    pub residual_report: ResidualReport,
    pub uc_check: Option<UcCheck>,
}

impl DepcaSolution {
    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            window: self.trajectory.window(),
            samples_per_unit: self.trajectory.samples_per_unit(),
            continuity_defect: self.continuity_defect,
            residual_report: self.residual_report.clone(),
            uc_check: self.uc_check.clone(),
        }
    }
}

/// Trajectory from given integer values `y(lo..=hi)`.
fn assemble(sys: &DepcaSystem, red: &Reduction, y_int: &[DVector<f64>]) -> Result<DepcaSolution> {
    let steps = red.steps;
    let p = sys.dim;
    let h = 1.0 / steps as f64;
    let mut interior = Vec::with_capacity(red.window.pieces() * steps * p);
    let mut left = Vec::with_capacity(red.window.pieces() * p);
    let mut per_interval = Vec::with_capacity(red.window.pieces());
    let mut consistency: f64 = 0.0;
    for (i, data) in red.intervals.iter().enumerate() {
        let n = red.window.lo + i as i64;
        let y_n = &y_int[i];
        let states: Vec<DVector<f64>> = (0..=steps).map(|k| data.state(k, y_n)).collect();
        for s in &states[..steps] {
            interior.extend(s.iter());
        }
        left.extend(states[steps].iter());
        let stepped = &red.system.c[i] * y_n + &red.system.h[i];
        consistency = consistency.max((&states[steps] - stepped).norm());

        let mut worst: f64 = 0.0;
        for k in 0..=steps {
            let deriv = if k == 0 {
                (&states[0] * -3.0 + &states[1] * 4.0 - &states[2]) / (2.0 * h)
            } else if k == steps {
                (&states[k] * 3.0 - &states[k - 1] * 4.0 + &states[k - 2]) / (2.0 * h)
            } else {
                (&states[k + 1] - &states[k - 1]) / (2.0 * h)
            };
            let r = deriv - sys.rhs(n, k as f64 * h, &states[k], y_n);
            worst = worst.max(r.norm());
        }
        per_interval.push((n, worst));
    }
    let trajectory = GridFunction::new(red.window, steps, p, interior, left)?;
    let integer_values = AaSequence::new(
        red.window,
        p,
        y_int.iter().flat_map(|v| v.iter().copied()).collect(),
    )?;
    let continuity_defect = (0..red.window.pieces())
        .map(|i| (&y_int[i + 1] - DVector::from_column_slice(trajectory.left_limit_slot(i))).norm())
        .fold(0.0, f64::max);
    let max_residual = per_interval.iter().map(|x| x.1).fold(0.0, f64::max);
    Ok(DepcaSolution {
        trajectory,
        integer_values,
        residual_report: ResidualReport {
            per_interval,
            max_residual,
            difference_consistency: consistency,
        },
        continuity_defect,
        uc_check: None,
    })
}

fn to_dvector(y0: &[f64], dim: usize) -> Result<DVector<f64>> {
    if y0.len() != dim || y0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!(
            "initial value {y0:?} must have {dim} finite components"
        )));
    }
    Ok(DVector::from_column_slice(y0))
}

/// Forward solution on `window` from `y(lo) = y0`.
pub fn solve_ivp(sys: &DepcaSystem, y0: &[f64], window: Window, steps: usize) -> Result<DepcaSolution> {
    solve_ivp_from(sys, y0, window.lo, window, steps)
}

/// Solution on `window` through `y(t0) = y0`, `t0` an integer in the window.
/// Intervals left of `t0` are solved backward, which requires every
/// invertibility certificate there to be at least [`CERTIFICATE_MIN`].
pub fn solve_ivp_from(sys: &DepcaSystem, y0: &[f64], t0: i64, window: Window, steps: usize) -> Result<DepcaSolution> {
    if t0 < window.lo || t0 > window.hi {
        return Err(Error::Domain(format!("initial time {t0} outside {window}")));
    }
    let y0 = to_dvector(y0, sys.dim)?;
    let red = reduce(sys, window, steps)?;
    let start = (t0 - window.lo) as usize;
    let mut y = vec![DVector::zeros(sys.dim); window.pieces() + 1];
    y[start] = y0;
    for i in start..window.pieces() {
        y[i + 1] = &red.system.c[i] * &y[i] + &red.system.h[i];
    }
    for i in (0..start).rev() {
        let cert = red.system.certificates[i];
        if cert < CERTIFICATE_MIN {
            return Err(Error::IllPosed {
                interval: window.lo + i as i64,
                certificate: cert,
                threshold: CERTIFICATE_MIN,
            });
        }
        let inv = red.system.c[i].clone().try_inverse().ok_or(Error::IllPosed {
            interval: window.lo + i as i64,
            certificate: 0.0,
            threshold: CERTIFICATE_MIN,
        })?;
        y[i] = inv * (&y[i + 1] - &red.system.h[i]);
    }
    assemble(sys, &red, &y)
}

/// Direction classification from the numerical dichotomy check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Stable,
    Unstable,
}

/// Per-direction dichotomy of a diagonal difference system: `(direction, rate)`
/// with `rate = sup |c|` (stable) or `sup 1/|c|` (unstable), both `< 1`.
pub fn dichotomy(system: &DifferenceSystem) -> Result<Vec<(Direction, f64)>> {
    let p = system.c[0].nrows();
    for (i, c) in system.c.iter().enumerate() {
        let scale = c.amax().max(1.0);
        for r in 0..p {
            for col in 0..p {
                if r != col && c[(r, col)].abs() > 1e-12 * scale {
                    return Err(Error::Unsupported(format!(
                        "C({}) is not diagonal; only diagonal dichotomies are supported",
                        system.window.lo + i as i64
                    )));
                }
            }
        }
    }
    (0..p)
        .map(|d| {
            let mags: Vec<f64> = system.c.iter().map(|c| c[(d, d)].abs()).collect();
            let hi = mags.iter().copied().fold(0.0, f64::max);
            let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
            if hi < 1.0 - 1e-9 {
                Ok((Direction::Stable, hi))
            } else if lo > 1.0 + 1e-9 {
                Ok((Direction::Unstable, 1.0 / lo))
            } else {
                Err(Error::Unsupported(format!(
                    "direction {d}: |C(n)| ranges over [{lo}, {hi}], no uniform contraction or expansion"
                )))
            }
        })
        .collect()
}

const MAX_EXTENSION: i64 = 20_000;

fn extension_length(rates: &[(Direction, f64)], trunc_eps: f64) -> Result<i64> {
    let worst = rates.iter().map(|r| r.1).fold(0.0, f64::max);
    if worst == 0.0 {
        return Ok(1);
    }
    let k = (trunc_eps.ln() / worst.ln()).ceil() as i64 + 1;
    if k > MAX_EXTENSION {
        return Err(Error::Unsupported(format!(
            "dichotomy rate {worst} too close to 1 for truncation {trunc_eps:e}"
        )));
    }
    Ok(k.max(1))
}

/// Integer values of the bounded solution on `[lo, hi]` from the dichotomy
/// series, given `C`, `h` on `[ext_lo, ext_hi)`.
fn dichotomy_series(
    system: &DifferenceSystem,
    rates: &[(Direction, f64)],
    window: Window,
    trunc_eps: f64,
) -> Vec<DVector<f64>> {
    let p = rates.len();
    let base = system.window.lo;
    let c = |j: i64, d: usize| system.c[(j - base) as usize][(d, d)];
    let h = |j: i64, d: usize| system.h[(j - base) as usize][d];
    (window.lo..=window.hi)
        .map(|n| {
            DVector::from_iterator(
                p,
                (0..p).map(|d| match rates[d].0 {
                    // y(n) = sum_{k<n} (prod_{j=k+1}^{n-1} c(j)) h(k)
                    Direction::Stable => {
                        let mut sum = 0.0;
                        let mut factor = 1.0;
                        let mut k = n - 1;
                        while k >= system.window.lo {
                            sum += factor * h(k, d);
                            factor *= c(k, d);
                            if factor.abs() < trunc_eps {
                                break;
                            }
                            k -= 1;
                        }
                        sum
                    }
                    // y(n) = -sum_{k>=n} h(k) / prod_{j=n}^{k} c(j)
                    Direction::Unstable => {
                        let mut sum = 0.0;
                        let mut factor = 1.0;
                        let mut k = n;
                        while k < system.window.hi {
                            factor /= c(k, d);
                            sum -= factor * h(k, d);
                            if factor.abs() < trunc_eps {
                                break;
                            }
                            k += 1;
                        }
                        sum
                    }
                }),
            )
        })
        .collect()
}

fn uc_check(sys: &DepcaSystem, sol: &DepcaSolution) -> UcCheck {
    let traj = &sol.trajectory;
    let m = traj.samples_per_unit();
    let w = traj.window();
    let mut rhs_sup: f64 = 0.0;
    for (piece, n) in (w.lo..w.hi).enumerate() {
        let y_n = DVector::from_column_slice(traj.sample(n, 0));
        for k in 0..=m {
            let y = DVector::from_column_slice(traj.closed_node(piece, k));
            rhs_sup = rhs_sup.max(sys.rhs(n, k as f64 / m as f64, &y, &y_n).norm());
        }
    }
    let table: Vec<(f64, f64)> = default_deltas().into_iter().map(|d| (d, modulus(traj, d))).collect();
    let holds = table.iter().all(|&(d, w)| w <= 2.0 * rhs_sup * d);
    UcCheck { rhs_sup, table, holds }
}

/// The unique bounded solution on `window`, for systems whose difference
/// propagators are diagonal with each direction uniformly contracting or
/// expanding. The series are truncated once the propagator factor drops
/// below `trunc_eps`.
pub fn bounded_solution(sys: &DepcaSystem, window: Window, steps: usize, trunc_eps: f64) -> Result<DepcaSolution> {
    if !(trunc_eps > 0.0 && trunc_eps < 1.0) {
        return Err(Error::Config(format!("trunc_eps must lie in (0, 1), got {trunc_eps}")));
    }
    let probe = reduce(sys, window, steps)?;
    let mut rates = dichotomy(&probe.system)?;
    let mut ext = extension_length(&rates, trunc_eps)?;
    // the extension may reveal slower rates; re-check until stable
    let (system, rates) = loop {
        let any_stable = rates.iter().any(|r| r.0 == Direction::Stable);
        let any_unstable = rates.iter().any(|r| r.0 == Direction::Unstable);
        let ext_window = Window::new(
            window.lo - if any_stable { ext } else { 0 },
            window.hi + if any_unstable { ext } else { 0 },
        );
        let full = reduce(sys, ext_window, steps)?.system;
        let new_rates = dichotomy(&full)?;
        let new_ext = extension_length(&new_rates, trunc_eps)?;
        let same_kind = new_rates.iter().zip(&rates).all(|(a, b)| a.0 == b.0);
        if !same_kind {
            return Err(Error::Unsupported("dichotomy splitting changes across the window".into()));
        }
        if new_ext <= ext {
            break (full, new_rates);
        }
        ext = new_ext;
        rates = new_rates;
    };
    let y = dichotomy_series(&system, &rates, window, trunc_eps);
    let mut sol = assemble(sys, &probe, &y)?;
    sol.uc_check = Some(uc_check(sys, &sol));
    Ok(sol)
}

/// Outcome of the Lasota–Wazewska fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LwSolution {
    pub solution: DepcaSolution,
    /// `sup |y_{k+1} - y_k|` on the integers, per iteration.
    pub trace: Vec<f64>,
    /// Largest observed ratio of successive entries of `trace`.
    pub contraction_estimate: f64,
    /// `gamma * sup p / inf delta`.
    pub a_priori_factor: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwSummary {
    pub solution: SolutionSummary,
    pub trace: Vec<f64>,
    pub contraction_estimate: f64,
    pub a_priori_factor: f64,
    pub iterations: usize,
}

impl LwSolution {
    pub fn summary(&self) -> LwSummary {
        LwSummary {
            solution: self.solution.summary(),
            trace: self.trace.clone(),
            contraction_estimate: self.contraction_estimate,
            a_priori_factor: self.a_priori_factor,
            iterations: self.iterations,
        }
    }
}

/// Parameters of [`lasota_wazewska`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LwConfig {
    pub window: Window,
    pub steps: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub trunc_eps: f64,
}

/// Bounded solution of `y' = -delta(t) y + p(t) exp(-gamma y([t]))` by Picard
/// iteration: each iterate is the bounded solution of the linear equation
/// with the previous iterate frozen inside the exponential.
pub fn lasota_wazewska(delta: &ScalarMap, p: &ScalarMap, gamma: f64, cfg: &LwConfig) -> Result<LwSolution> {
    if !(cfg.tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {}", cfg.tol)));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Config(format!("gamma must be a finite non-negative number, got {gamma}")));
    }
    let window = cfg.window;
    let steps = cfg.steps;
    let sample_window = window.widen(1);
    let mut delta_inf = f64::INFINITY;
    let mut p_sup: f64 = 0.0;
    for n in sample_window.lo..sample_window.hi {
        for k in 0..=steps {
            let s = k as f64 / steps as f64;
            delta_inf = delta_inf.min(delta.at(n, s));
            let pv = p.at(n, s);
            if pv < 0.0 {
                return Err(Error::Config(format!("p must be non-negative, p({}) = {pv}", n as f64 + s)));
            }
            p_sup = p_sup.max(pv);
        }
    }
    if !(delta_inf > 0.0) {
        return Err(Error::Config(format!("delta must be bounded below by a positive constant, inf = {delta_inf}")));
    }
    // y_{k+1}(n) depends on y_k only through the per-interval factor, so work
    // with the forcing p alone and rescale h(n) by exp(-gamma y_k(n)).
    let neg_delta = delta.clone();
    let linear = DepcaSystem::scalar(
        PieceMap::piecewise(move |n, s| -neg_delta.at(n, s)),
        PieceMap::constant(0.0),
        p.clone(),
        Regularity::PiecewiseContinuousAtIntegers,
    );
    let rho = (-delta_inf).exp();
    let ext = ((cfg.trunc_eps.ln() / rho.ln()).ceil() as i64 + 1).clamp(1, MAX_EXTENSION);
    let ext_window = Window::new(window.lo - ext, window.hi);
    let base = reduce(&linear, ext_window, steps)?.system;
    let rates = dichotomy(&base)?;
    if rates[0].0 != Direction::Stable {
        return Err(Error::Unsupported("linear part is not contracting".into()));
    }
    let len = ext_window.pieces() + 1;
    let mut y = vec![0.0; len];
    let mut trace = Vec::new();
    let mut contraction: f64 = 0.0;
    for iter in 1..=cfg.max_iter {
        let scaled = DifferenceSystem {
            window: base.window,
            c: base.c.clone(),
            h: base
                .h
                .iter()
                .zip(&y)
                .map(|(h, yk)| h * (-gamma * yk).exp())
                .collect(),
            certificates: base.certificates.clone(),
        };
        let next: Vec<f64> = dichotomy_series(&scaled, &rates, ext_window, cfg.trunc_eps)
            .into_iter()
            .map(|v| v[0])
            .collect();
        let diff = next.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if let Some(&prev) = trace.last() {
            if prev > 0.0 {
                contraction = contraction.max(diff / prev);
            }
        }
        trace.push(diff);
        y = next;
        if diff <= cfg.tol {
            let offset = ext as usize;
            let y_win: Vec<f64> = y[offset..].to_vec();
            let frozen = y_win.clone();
            let lo = window.lo;
            let p_frozen = p.clone();
            let delta_frozen = delta.clone();
            let final_sys = DepcaSystem::scalar(
                PieceMap::piecewise(move |n, s| -delta_frozen.at(n, s)),
                PieceMap::constant(0.0),
                PieceMap::piecewise(move |n, s| {
                    let idx = ((n - lo).max(0) as usize).min(frozen.len() - 1);
                    p_frozen.at(n, s) * (-gamma * frozen[idx]).exp()
                }),
                Regularity::PiecewiseContinuousAtIntegers,
            );
            let red = reduce(&final_sys, window, steps)?;
            let y_int: Vec<DVector<f64>> = y_win.iter().map(|v| DVector::from_element(1, *v)).collect();
            let mut solution = assemble(&final_sys, &red, &y_int)?;
            solution.uc_check = Some(uc_check(&final_sys, &solution));
            return Ok(LwSolution {
                solution,
                trace,
                contraction_estimate: contraction,
                a_priori_factor: gamma * p_sup / delta_inf,
                iterations: iter,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iter,
        last_difference: trace.last().copied().unwrap_or(f64::NAN),
        contraction,
    })
}
