//! Fixed-node quadrature on equally spaced samples.

/// Weights (in units of the step `h`) for `\int_0^{k h}` from the nodes
/// `0..=k`, possibly borrowing node `k + 1` when `available > k`.
///
/// * even `k`: composite Simpson;
/// * odd `k >= 3`: composite Simpson on `0..=k-3` and Simpson's 3/8 rule on
///   the last three steps;
/// * `k = 1`: the cubic rule `(9, 19, -5, 1)/24` through nodes `0..=3` when
///   they exist, the quadratic rule `(5, 8, -1)/12` when only node 2 does,
///   the trapezoid otherwise.
///
/// The returned vector may therefore be longer than `k + 1`.
pub fn weights(k: usize, available: usize) -> Vec<f64> {
    match k {
        0 => vec![0.0],
        1 if available >= 3 => vec![9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0],
        1 if available >= 2 => vec![5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0],
        1 => vec![0.5, 0.5],
        _ if k % 2 == 0 => simpson(k),
        _ => {
            let mut w = simpson(k - 3);
            w.resize(k + 1, 0.0);
            for (i, c) in [3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0].into_iter().enumerate() {
                w[k - 3 + i] += c;
            }
            w
        }
    }
}

fn simpson(k: usize) -> Vec<f64> {
    debug_assert!(k % 2 == 0);
    let mut w = vec![0.0; k + 1];
    if k == 0 {
        return w;
    }
    for i in 0..=k {
        w[i] = if i == 0 || i == k {
            1.0 / 3.0
        } else if i % 2 == 1 {
            4.0 / 3.0
        } else {
            2.0 / 3.0
        };
    }
    w
}

/// `\int` over `values.len() - 1` steps of width `h`.
pub fn integrate(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let k = values.len() - 1;
    let w = weights(k, k);
    h * w.iter().zip(values).map(|(w, v)| w * v).sum::<f64>()
}
