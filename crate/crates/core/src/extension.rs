//! Extensions of integer-indexed sequences to piecewise-continuous functions.
//!
//! * [`step_extension`]: `f(t) = S([t])`, discontinuous at every integer where
//!   `S` changes.
//! * [`linear_extension`]: `f(t) = S(k) + (t - k)(S(k+1) - S(k))` on `[k, k+1)`,
//!   continuous and Lipschitz on each piece with constant `|S(k+1) - S(k)|`.
//! * [`two_segment_extension`]: a continuous broken line through `S(n)`,
//!   a caller-chosen midpoint value `m(n)` at `n + 1/2`, and `S(n+1)`.

use crate::error::{Error, Result};
use crate::grid::{AaSequence, GridFunction, Window};

/// Which extension to build.
pub enum ExtensionKind<'a> {
    Step,
    Linear,
    /// Midpoint rule `n -> f(n + 1/2)`.
    TwoSegment(&'a dyn Fn(i64) -> Vec<f64>),
}

pub fn extend(kind: &ExtensionKind<'_>, seq: &AaSequence, samples_per_unit: usize, window: Window) -> Result<GridFunction> {
    match kind {
        ExtensionKind::Step => step_extension(seq, samples_per_unit, window),
        ExtensionKind::Linear => linear_extension(seq, samples_per_unit, window),
        ExtensionKind::TwoSegment(mid) => two_segment_extension(seq, mid, samples_per_unit, window),
    }
}

/// Largest grid window a sequence supports for the given extension.
pub fn natural_window(kind: &ExtensionKind<'_>, seq: &AaSequence) -> Window {
    let w = seq.window();
    match kind {
        ExtensionKind::Step => Window::new(w.lo, w.hi + 1),
        _ => w,
    }
}

fn require(seq: &AaSequence, lo: i64, hi: i64, window: Window) -> Result<()> {
    let sw = seq.window();
    if window.hi <= window.lo {
        return Err(Error::Config(format!("empty window {window}")));
    }
    if lo < sw.lo || hi > sw.hi {
        return Err(Error::Domain(format!(
            "window {window} needs the sequence on [{lo}, {hi}], available {sw}"
        )));
    }
    Ok(())
}

/// `f(t) = S([t])`; the left limit at `n + 1` equals `S(n)`.
pub fn step_extension(seq: &AaSequence, samples_per_unit: usize, window: Window) -> Result<GridFunction> {
    require(seq, window.lo, window.hi - 1, window)?;
    GridFunction::from_pieces(window, samples_per_unit, seq.dim(), |n, _| {
        seq.get(n).expect("checked window").to_vec()
    })
}

/// Piecewise-linear interpolation of `S`; `f(k) = S(k)` exactly and the left
/// limit at `k + 1` is `S(k + 1)`, so the lattice jump bound is exactly zero.
pub fn linear_extension(seq: &AaSequence, samples_per_unit: usize, window: Window) -> Result<GridFunction> {
    require(seq, window.lo, window.hi, window)?;
    GridFunction::from_pieces(window, samples_per_unit, seq.dim(), |n, s| {
        let a = seq.get(n).expect("checked window");
        let b = seq.get(n + 1).expect("checked window");
        if s >= 1.0 {
            return b.to_vec();
        }
        a.iter().zip(b).map(|(a, b)| a + s * (b - a)).collect()
    })
}

/// Broken line through `S(n)`, `m(n)` at `n + 1/2`, and `S(n+1)`.
///
/// `M` must be even so that `n + 1/2` is a lattice point. When a midpoint
/// agrees with the chord midpoint up to rounding, the piece is emitted with
/// the chord formula, so collinear midpoints reproduce [`linear_extension`]
/// sample for sample.
pub fn two_segment_extension(
    seq: &AaSequence,
    midpoint: &dyn Fn(i64) -> Vec<f64>,
    samples_per_unit: usize,
    window: Window,
) -> Result<GridFunction> {
    if samples_per_unit % 2 != 0 {
        return Err(Error::Config(format!(
            "two-segment extension needs an even number of samples per unit, got {samples_per_unit}"
        )));
    }
    require(seq, window.lo, window.hi, window)?;
    let p = seq.dim();
    let mut mids = Vec::with_capacity(window.pieces());
    for n in window.lo..window.hi {
        let m = midpoint(n);
        if m.len() != p || m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData(format!(
                "midpoint rule at {n} returned {m:?}, expected {p} finite values"
            )));
        }
        let a = seq.get(n)?;
        let b = seq.get(n + 1)?;
        let collinear = m.iter().zip(a.iter().zip(b)).all(|(m, (a, b))| {
            let chord = a + 0.5 * (b - a);
            (m - chord).abs() <= 4.0 * f64::EPSILON * (a.abs() + b.abs())
        });
        mids.push((m, collinear));
    }
    GridFunction::from_pieces(window, samples_per_unit, p, |n, s| {
        let a = seq.get(n).expect("checked window");
        let b = seq.get(n + 1).expect("checked window");
        if s >= 1.0 {
            return b.to_vec();
        }
        let (m, collinear) = &mids[(n - window.lo) as usize];
        if *collinear {
            return a.iter().zip(b).map(|(a, b)| a + s * (b - a)).collect();
        }
        if s < 0.5 {
            a.iter().zip(m).map(|(a, m)| a + 2.0 * s * (m - a)).collect()
        } else if s == 0.5 {
            m.clone()
        } else {
            m.iter()
                .zip(b)
                .map(|(m, b)| m + 2.0 * (s - 0.5) * (b - m))
                .collect()
        }
    })
}
