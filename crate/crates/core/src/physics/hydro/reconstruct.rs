//! Cell-interface reconstruction along one line of cells.

use crate::registry::Registry;

pub trait Reconstruction: Send + Sync {
    fn name(&self) -> &'static str;

    /// Cells on each side needed to reconstruct one cell's faces.
    fn radius(&self) -> usize;

    /// For each cell `i` in `radius..q.len() - radius`, write the value at
    /// its lower face (`i - 1/2`) into `lower[i]` and at its upper face
    /// (`i + 1/2`) into `upper[i]`.
    fn reconstruct(&self, q: &[f64], lower: &mut [f64], upper: &mut [f64]);
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Piecewise-linear with minmod-limited slopes.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlmMinmod;

impl Reconstruction for PlmMinmod {
    fn name(&self) -> &'static str {
        "plm-minmod"
    }

    fn radius(&self) -> usize {
        1
    }

    fn reconstruct(&self, q: &[f64], lower: &mut [f64], upper: &mut [f64]) {
        for i in 1..q.len().saturating_sub(1) {
            let slope = minmod(q[i] - q[i - 1], q[i + 1] - q[i]);
            lower[i] = q[i] - 0.5 * slope;
            upper[i] = q[i] + 0.5 * slope;
        }
    }
}

/// Piecewise-parabolic reconstruction (fourth-order face interpolation with
/// monotonized central slopes, then the parabola monotonization).
#[derive(Clone, Copy, Debug, Default)]
pub struct Ppm;

impl Ppm {
    fn limited_slope(qm: f64, q: f64, qp: f64) -> f64 {
        let dl = q - qm;
        let dr = qp - q;
        if dl * dr <= 0.0 {
            return 0.0;
        }
        let dc = 0.5 * (qp - qm);
        dc.signum() * dc.abs().min(2.0 * dl.abs()).min(2.0 * dr.abs())
    }
}

impl Reconstruction for Ppm {
    fn name(&self) -> &'static str {
        "ppm"
    }

    fn radius(&self) -> usize {
        2
    }

    fn reconstruct(&self, q: &[f64], lower: &mut [f64], upper: &mut [f64]) {
        let n = q.len();
        if n < 5 {
            return;
        }
        let mut slope = vec![0.0; n];
        for i in 1..n - 1 {
            slope[i] = Self::limited_slope(q[i - 1], q[i], q[i + 1]);
        }
        // face[i] is the value at i + 1/2, valid for 1 <= i <= n - 3
        let mut face = vec![0.0; n];
        for i in 1..n - 2 {
            face[i] = q[i] + 0.5 * (q[i + 1] - q[i]) - (slope[i + 1] - slope[i]) / 6.0;
        }
        for i in 2..n - 2 {
            let a = q[i];
            let mut al = face[i - 1];
            let mut ar = face[i];
            if (ar - a) * (a - al) <= 0.0 {
                al = a;
                ar = a;
            } else {
                let da = ar - al;
                let a6 = 6.0 * (a - 0.5 * (al + ar));
                if da * a6 > da * da {
                    al = 3.0 * a - 2.0 * ar;
                } else if -da * da > da * a6 {
                    ar = 3.0 * a - 2.0 * al;
                }
            }
            lower[i] = al;
            upper[i] = ar;
        }
    }
}

pub fn reconstructions() -> Registry<dyn Reconstruction> {
    let mut r: Registry<dyn Reconstruction> = Registry::new("reconstruction");
    r.register_simple("plm-minmod", || Box::new(PlmMinmod));
    r.register_simple("ppm", || Box::new(Ppm));
    r
}
