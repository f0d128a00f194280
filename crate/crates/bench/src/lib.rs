//! Inputs shared by the benchmarks.

use pcz_core::depca::{DepcaSystem, PieceMap, Regularity};
use pcz_core::extension::linear_extension;
use pcz_core::fixtures::psi_sequence;
use pcz_core::{GridFunction, Window};

/// Linear extension of `psi` restricted to the integers of `window`.
pub fn psi_linear(window: Window, samples_per_unit: usize) -> GridFunction {
    let seq = psi_sequence(window).expect("finite window");
    linear_extension(&seq, samples_per_unit, window).expect("sequence covers window")
}

/// `y' = -y + 0.5 y([t]) + psi([t])`.
pub fn contractive_system() -> DepcaSystem {
    DepcaSystem::scalar(
        PieceMap::constant(-1.0),
        PieceMap::constant(0.5),
        PieceMap::piecewise(|n, _| pcz_core::fixtures::psi(n as f64)),
        Regularity::PiecewiseContinuousAtIntegers,
    )
}
