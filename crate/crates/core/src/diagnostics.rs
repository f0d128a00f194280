//! Finite-data diagnostics for the recurrence and regularity properties of
//! piecewise-continuous functions.
//!
//! All tests here are one-sided. A large recurrence defect or modulus of
//! continuity is conclusive evidence against the property on the sampled
//! window; a small one only says the data are consistent with it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{vdist, GridFunction, Window};

/// Defects of a single integer translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftDefect {
    pub shift: i64,
    /// `sup |f(t + s) - f(t)|` over the test lattice.
    pub forward: f64,
    /// `sup |f(t - s) - f(t)|` over the test lattice.
    pub backward: f64,
}

impl ShiftDefect {
    pub fn worst(&self) -> f64 {
        self.forward.max(self.backward)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub shifts_tested: Vec<i64>,
    pub best_shift: i64,
    pub forward_defect: f64,
    pub backward_defect: f64,
    pub test_window: Window,
    pub profile: Vec<ShiftDefect>,
}

impl RecurrenceReport {
    pub fn min_defect(&self) -> f64 {
        self.forward_defect.max(self.backward_defect)
    }
}

/// Table of the modulus of continuity `omega(delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcReport {
    pub modulus_table: Vec<(f64, f64)>,
}

impl UcReport {
    /// True iff some tabulated `delta` has `omega(delta) <= eps`.
    pub fn is_uc_at(&self, eps: f64) -> bool {
        self.modulus_table.iter().any(|&(_, w)| w <= eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KaaVerdict {
    #[serde(rename = "consistent-with-KAA")]
    ConsistentWithKaa,
    #[serde(rename = "fails-UC")]
    FailsUc,
    #[serde(rename = "fails-recurrence")]
    FailsRecurrence,
}

impl std::fmt::Display for KaaVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KaaVerdict::ConsistentWithKaa => "consistent-with-KAA",
            KaaVerdict::FailsUc => "fails-UC",
            KaaVerdict::FailsRecurrence => "fails-recurrence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaaClassification {
    pub verdict: KaaVerdict,
    pub eps: f64,
    pub uc: UcReport,
    pub recurrence: RecurrenceReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub g_norm: f64,
    pub h_norm: f64,
    pub f_norm: f64,
    pub bound_satisfied: bool,
    pub overlap: Window,
}

/// Translation defects of `f` by the integer `s` on `test_window`.
///
/// The test lattice is every interior sample of the pieces in `test_window`
/// plus the left limits at `lo < n <= hi`; both translates `t +- s` must stay
/// inside the window of `f`.
pub fn recurrence_defect(f: &GridFunction, s: i64, test_window: Window) -> Result<ShiftDefect> {
    let fw = f.window();
    let reach = s.abs();
    if test_window.hi <= test_window.lo {
        return Err(Error::Domain(format!("empty test window {test_window}")));
    }
    if test_window.lo - reach < fw.lo || test_window.hi + reach > fw.hi {
        return Err(Error::Domain(format!(
            "test window {test_window} shifted by +-{reach} leaves {fw}"
        )));
    }
    let m = f.samples_per_unit();
    let first = (test_window.lo - fw.lo) as usize;
    let pieces = test_window.pieces();
    let node_shift = s * m as i64;
    let mut forward: f64 = 0.0;
    let mut backward: f64 = 0.0;
    for gi in first * m..(first + pieces) * m {
        let here = f.node(gi);
        let ahead = f.node((gi as i64 + node_shift) as usize);
        let behind = f.node((gi as i64 - node_shift) as usize);
        forward = forward.max(vdist(ahead, here));
        backward = backward.max(vdist(behind, here));
    }
    for piece in first..first + pieces {
        let here = f.left_limit_slot(piece);
        let ahead = f.left_limit_slot((piece as i64 + s) as usize);
        let behind = f.left_limit_slot((piece as i64 - s) as usize);
        forward = forward.max(vdist(ahead, here));
        backward = backward.max(vdist(behind, here));
    }
    Ok(ShiftDefect {
        shift: s,
        forward,
        backward,
    })
}

/// Largest centred test window compatible with shifts up to `max_shift`.
pub fn central_test_window(f: &GridFunction, max_shift: i64) -> Result<Window> {
    let fw = f.window();
    let tw = Window::new(fw.lo + max_shift, fw.hi - max_shift);
    if max_shift < 1 {
        return Err(Error::Config(format!("max_shift must be >= 1, got {max_shift}")));
    }
    if tw.hi <= tw.lo {
        return Err(Error::Domain(format!(
            "window {fw} too small for shifts up to {max_shift}"
        )));
    }
    Ok(tw)
}

/// Exhaustive scan of shifts `1..=max_shift` on the centred test window.
pub fn zaa_scan(f: &GridFunction, max_shift: i64) -> Result<RecurrenceReport> {
    let tw = central_test_window(f, max_shift)?;
    zaa_scan_in(f, max_shift, tw)
}

/// Exhaustive scan of shifts `1..=max_shift` on an explicit test window.
/// The reported shift minimises `max(forward, backward)`; ties go to the
/// smaller shift.
pub fn zaa_scan_in(f: &GridFunction, max_shift: i64, test_window: Window) -> Result<RecurrenceReport> {
    if max_shift < 1 {
        return Err(Error::Config(format!("max_shift must be >= 1, got {max_shift}")));
    }
    let profile = (1..=max_shift)
        .map(|s| recurrence_defect(f, s, test_window))
        .collect::<Result<Vec<_>>>()?;
    let best = profile
        .iter()
        .copied()
        .reduce(|best, d| if d.worst() < best.worst() { d } else { best })
        .expect("max_shift >= 1");
    Ok(RecurrenceReport {
        shifts_tested: (1..=max_shift).collect(),
        best_shift: best.shift,
        forward_defect: best.forward,
        backward_defect: best.backward,
        test_window,
        profile,
    })
}

/// `delta = 2^-k` for `k = 0..=14`, ascending.
pub fn default_deltas() -> Vec<f64> {
    (0..=14).rev().map(|k| 0.5f64.powi(k)).collect()
}

struct ExtendedPoint<'a> {
    /// Position in lattice units from the window start.
    pos: i64,
    value: &'a [f64],
}

/// Lattice nodes in time order, with each piece's left-limit slot placed
/// just before the first node of the following piece.
fn extended_points(f: &GridFunction) -> Vec<ExtendedPoint<'_>> {
    let m = f.samples_per_unit();
    let mut out = Vec::with_capacity(f.window().pieces() * (m + 1));
    for piece in 0..f.window().pieces() {
        for j in 0..m {
            out.push(ExtendedPoint {
                pos: (piece * m + j) as i64,
                value: f.node(piece * m + j),
            });
        }
        out.push(ExtendedPoint {
            pos: ((piece + 1) * m) as i64,
            value: f.left_limit_slot(piece),
        });
    }
    out
}

/// Value of the in-piece linear interpolant at a position (lattice units)
/// strictly inside `[0, pieces * M)`.
fn value_at(f: &GridFunction, pos: f64) -> Option<Vec<f64>> {
    let m = f.samples_per_unit() as f64;
    let total = f.window().pieces() as f64 * m;
    if !(0.0..total).contains(&pos) {
        return None;
    }
    let piece = (pos / m).floor();
    Some(f.interp_in_piece(piece as usize, pos - piece * m))
}

/// Modulus of continuity of the piecewise-linear interpolant of `f`:
/// `omega(delta) = sup |f(t1) - f(t2)|` over `|t1 - t2| <= delta`.
///
/// Pairs straddling an integer use the left-limit slot as the limit from the
/// left, so a jump at `n` contributes `|f(n) - f(n^-)|` for every
/// `delta > 0`. Because the interpolant is affine between lattice nodes the
/// supremum is attained at pairs where each point is a lattice node or
/// exactly `delta` away from one, and those are all enumerated. `omega(0) = 0`.
pub fn modulus(f: &GridFunction, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let d = delta * f.samples_per_unit() as f64;
    let points = extended_points(f);
    let mut omega: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            if (q.pos - p.pos) as f64 > d + 1e-9 {
                break;
            }
            omega = omega.max(vdist(p.value, q.value));
        }
        let here = p.pos as f64;
        for partner in [here + d, here - d] {
            if let Some(v) = value_at(f, partner) {
                omega = omega.max(vdist(p.value, &v));
            }
        }
    }
    omega
}

/// Modulus-of-continuity table for the given `deltas` (each in `(0, 1]`).
pub fn uc_modulus(f: &GridFunction, deltas: &[f64]) -> Result<UcReport> {
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Error::Config(format!("delta {d} outside (0, 1]")));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let table = sorted.into_iter().map(|d| (d, modulus(f, d))).collect();
    Ok(UcReport {
        modulus_table: table,
    })
}

/// Compact-almost-automorphy screen: uniform continuity at `eps` on the
/// default delta ladder, then a recurrence scan up to `max_shift`.
pub fn classify_kaa(f: &GridFunction, eps: f64, max_shift: i64) -> Result<KaaClassification> {
    let uc = uc_modulus(f, &default_deltas())?;
    let recurrence = zaa_scan(f, max_shift)?;
    let verdict = if !uc.is_uc_at(eps) {
        KaaVerdict::FailsUc
    } else if recurrence.min_defect() > eps {
        KaaVerdict::FailsRecurrence
    } else {
        KaaVerdict::ConsistentWithKaa
    };
    Ok(KaaClassification {
        verdict,
        eps,
        uc,
        recurrence,
    })
}

/// Norms of a decomposition `f = g + h` on the overlap of the two windows,
/// with `h` living on the non-negative half line.
pub fn decomposition_check(g: &GridFunction, h: &GridFunction) -> Result<DecompositionReport> {
    if h.window().lo < 0 {
        return Err(Error::Domain(format!(
            "h must live on the non-negative half line, got {}",
            h.window()
        )));
    }
    let overlap = Window::new(g.window().lo.max(h.window().lo), g.window().hi.min(h.window().hi));
    if overlap.hi <= overlap.lo {
        return Err(Error::Domain(format!(
            "windows {} and {} do not overlap",
            g.window(),
            h.window()
        )));
    }
    let g = g.restrict(overlap)?;
    let h = h.restrict(overlap)?;
    let f = g.add(&h)?;
    let (g_norm, h_norm, f_norm) = (g.sup_norm(), h.sup_norm(), f.sup_norm());
    Ok(DecompositionReport {
        g_norm,
        h_norm,
        f_norm,
        bound_satisfied: g_norm + h_norm <= 3.0 * f_norm,
        overlap,
    })
}

/// Flat report combining a classification with an optional decomposition
/// check, as written by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub shifts_tested: Vec<i64>,
    pub best_shift: i64,
    pub forward_defect: f64,
    pub backward_defect: f64,
    pub test_window: Window,
    pub modulus_table: Vec<(f64, f64)>,
    pub eps: f64,
    pub verdict: KaaVerdict,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionReport>,
}

/// [`classify_kaa`] on `f`, plus [`decomposition_check`] of `(f, h)` when `h`
/// is given.
pub fn diagnose(f: &GridFunction, eps: f64, max_shift: i64, h: Option<&GridFunction>) -> Result<DiagnosticReport> {
    let c = classify_kaa(f, eps, max_shift)?;
    let decomposition = h.map(|h| decomposition_check(f, h)).transpose()?;
    Ok(DiagnosticReport {
        shifts_tested: c.recurrence.shifts_tested,
        best_shift: c.recurrence.best_shift,
        forward_defect: c.recurrence.forward_defect,
        backward_defect: c.recurrence.backward_defect,
        test_window: c.recurrence.test_window,
        modulus_table: c.uc.modulus_table,
        eps,
        verdict: c.verdict,
        decomposition,
    })
}
