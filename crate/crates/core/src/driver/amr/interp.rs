//! Inter-level interpolation weights.

use crate::driver::common::lagrange_weights;
use crate::driver::DriverError;

/// Two clock readings closer than this are the same time.
pub const TIME_TOLERANCE: f64 = 1e-12;

/// Weights over stored time levels (newest first) that interpolate to `t`.
///
/// A stored level at `t` (within [`TIME_TOLERANCE`]) is used directly;
/// otherwise the Lagrange polynomial through the `order + 1` most recent
/// levels is evaluated.
pub fn time_weights(times: &[f64], t: f64, order: usize) -> Result<Vec<f64>, DriverError> {
    let mut w = vec![0.0; times.len()];
    if let Some(k) = times.iter().position(|tk| (tk - t).abs() <= TIME_TOLERANCE) {
        w[k] = 1.0;
        return Ok(w);
    }
    let need = order + 1;
    if times.len() < need {
        return Err(DriverError::InsufficientTimeLevels {
            order,
            need,
            have: times.len(),
        });
    }
    for j in 0..need {
        w[j] = (0..need)
            .filter(|m| *m != j)
            .map(|m| (t - times[m]) / (times[j] - times[m]))
            .product();
    }
    Ok(w)
}

/// Interpolate stored time levels `levels[k][i]` (newest first) to time `t`.
pub fn time_interpolate(levels: &[&[f64]], times: &[f64], t: f64, order: usize) -> Result<Vec<f64>, DriverError> {
    if levels.len() != times.len() {
        return Err(DriverError::Config(format!(
            "{} time levels but {} times",
            levels.len(),
            times.len()
        )));
    }
    let w = time_weights(times, t, order)?;
    let n = levels.first().map_or(0, |l| l.len());
    let mut out = vec![0.0; n];
    for (wk, lk) in w.iter().zip(levels) {
        if *wk != 0.0 {
            for (o, v) in out.iter_mut().zip(lk.iter()) {
                *o += wk * v;
            }
        }
    }
    Ok(out)
}

/// One-dimensional prolongation stencil for fine index `f`: the first
/// coarse index and the weights. Even fine points coincide with a coarse
/// point and copy it.
#[derive(Clone, Debug)]
pub struct Stencil1d {
    odd: Vec<f64>,
    order: usize,
}

impl Stencil1d {
    pub fn new(order: usize) -> Self {
        // nodes 0..=order, fine point halfway between nodes (order-1)/2 and (order+1)/2
        Self {
            odd: lagrange_weights(0, order, order as f64 / 2.0),
            order,
        }
    }

    pub fn at(&self, f: i64) -> (i64, &[f64]) {
        const ONE: &[f64] = &[1.0];
        if f.rem_euclid(2) == 0 {
            (f.div_euclid(2), ONE)
        } else {
            (f.div_euclid(2) - (self.order as i64 - 1) / 2, &self.odd)
        }
    }

    /// Coarse index range `[lo, hi)` read by fine index `f`.
    pub fn span(&self, f: i64) -> (i64, i64) {
        let (s, w) = self.at(f);
        (s, s + w.len() as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_midpoint_in_time() {
        let v = time_interpolate(&[&[2.0], &[0.0]], &[1.0, 0.0], 0.5, 1).unwrap();
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn exact_time_level_is_copied() {
        let w = time_weights(&[3.0, 2.0, 1.0], 2.0 + 1e-13, 2).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn too_few_levels_is_an_error() {
        assert!(matches!(
            time_weights(&[1.0, 0.0], 0.5, 2),
            Err(DriverError::InsufficientTimeLevels { need: 3, have: 2, .. })
        ));
    }

    #[test]
    fn odd_points_use_centred_stencils() {
        let s = Stencil1d::new(5);
        assert_eq!(s.span(7), (1, 7));
        assert_eq!(s.span(-1), (-3, 3));
        assert_eq!(s.at(6).0, 3);
        let s1 = Stencil1d::new(1);
        assert_eq!(s1.at(3), (1, &[0.5, 0.5][..]));
    }
}
