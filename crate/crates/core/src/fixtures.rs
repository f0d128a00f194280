//! Standard test functions and sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{AaSequence, GridFunction, Window};

/// Default seed for stochastic fixtures.
pub const DEFAULT_SEED: u64 = 0x5EED;

pub const DEFAULT_SAMPLES_PER_UNIT: usize = 64;
pub const DEFAULT_WINDOW: Window = Window::new(-32, 32);

/// `sin(1 / (2 + cos t + cos(sqrt(2) t)))`: almost automorphic, not almost periodic.
pub fn psi(t: f64) -> f64 {
    (1.0 / (2.0 + t.cos() + (std::f64::consts::SQRT_2 * t).cos())).sin()
}

/// `psi` restricted to the integers on `[lo, hi]`.
pub fn psi_sequence(window: Window) -> Result<AaSequence> {
    AaSequence::from_scalar_fn(window, |k| psi(k as f64))
}

/// `t -> psi([t])`.
pub fn psi_step(window: Window, samples_per_unit: usize) -> Result<GridFunction> {
    GridFunction::from_pieces_scalar(window, samples_per_unit, |n, _| psi(n as f64))
}

/// `sin(2 pi t) + sin(2 pi sqrt(2) t)`.
pub fn two_tone(window: Window, samples_per_unit: usize) -> Result<GridFunction> {
    use std::f64::consts::{PI, SQRT_2};
    GridFunction::from_continuous_scalar(window, samples_per_unit, |t| {
        (2.0 * PI * t).sin() + (2.0 * PI * SQRT_2 * t).sin()
    })
}

/// Uniform white noise on `[-1, 1]` at the integers, reproducible from `seed`.
pub fn white_noise_sequence(window: Window, seed: u64) -> Result<AaSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (window.lo..=window.hi)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    AaSequence::new(window, 1, values)
}

/// Random piecewise-continuous function: each piece is an affine function
/// with random coefficients in `[-amp, amp]`, independently drawn per piece,
/// so integers carry genuine jumps.
pub fn random_piecewise(window: Window, samples_per_unit: usize, dim: usize, amp: f64, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let coeffs: Vec<(Vec<f64>, Vec<f64>)> = (window.lo..window.hi)
        .map(|_| {
            let a = (0..dim).map(|_| rng.random_range(-amp..=amp)).collect();
            let b = (0..dim).map(|_| rng.random_range(-amp..=amp)).collect();
            (a, b)
        })
        .collect();
    GridFunction::from_pieces(window, samples_per_unit, dim, |n, s| {
        let (a, b) = &coeffs[(n - window.lo) as usize];
        a.iter().zip(b).map(|(a, b)| a + b * s).collect()
    })
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
