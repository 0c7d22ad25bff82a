//! Centred finite-difference stencils on x-fastest arrays.

/// Fourth-order second derivative, radius 2, times `12 h^2`.
pub const D2_4: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
/// Fourth-order first derivative, radius 2, times `12 h`.
pub const D1_4: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
/// Sixth undivided difference, radius 3; Kreiss-Oliger dissipation of
/// order five is `eps / (64 h)` times this.
pub const KO6: [f64; 7] = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];

/// Apply a symmetric stencil of radius `R` along stride `s` at `idx`.
#[inline(always)]
pub fn apply<const N: usize>(f: &[f64], idx: usize, s: usize, w: &[f64; N]) -> f64 {
    let r = N / 2;
    let base = idx - r * s;
    let mut acc = 0.0;
    for (m, wm) in w.iter().enumerate() {
        if *wm != 0.0 {
            acc += wm * f[base + m * s];
        }
    }
    acc
}
