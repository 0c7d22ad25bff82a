//! Scalar wave equation in first-order-in-time form.
//!
//! `d(phi)/dt = pi`, `d(pi)/dt = c^2 Laplacian(phi)`, discretised with
//! fourth-order centred differences plus fifth-order Kreiss-Oliger
//! dissipation on both fields. The combined stencil radius is 3.

use super::stencil::{apply, D1_4, D2_4, KO6};
use super::{check_ghosts, Physics, PhysicsError};
use crate::grid::PatchGeom;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const PHI: usize = 0;
pub const PI_VAR: usize = 1;
pub const GHOST_WIDTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveEquation {
    pub c: f64,
    /// Kreiss-Oliger coefficient.
    pub epsilon: f64,
}

impl Default for WaveEquation {
    fn default() -> Self {
        Self { c: 1.0, epsilon: 0.1 }
    }
}

impl WaveEquation {
    pub fn new(c: f64, epsilon: f64) -> Result<Self, PhysicsError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(PhysicsError::BadParams(format!("wave speed must be positive, got {c}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(PhysicsError::BadParams(format!("dissipation must be non-negative, got {epsilon}")));
        }
        Ok(Self { c, epsilon })
    }
}

impl Physics for WaveEquation {
    fn name(&self) -> &'static str {
        "wave"
    }

    fn var_names(&self) -> &'static [&'static str] {
        &["phi", "pi"]
    }

    fn stencil_radius(&self) -> usize {
        3
    }

    fn max_speed(&self, _geom: &PatchGeom, _state: &[Vec<f64>]) -> f64 {
        self.c
    }

    fn rhs(&self, geom: &PatchGeom, state: &[Vec<f64>], out: &mut [Vec<f64>]) -> Result<(), PhysicsError> {
        check_ghosts(geom, self.stencil_radius())?;
        let phi = &state[PHI];
        let pi = &state[PI_VAR];
        let [s0, s1, s2] = geom.ext.strides();
        let strides = [s0, s1, s2];
        let h = geom.spacing;
        let lap_w = [
            self.c * self.c / (12.0 * h[0] * h[0]),
            self.c * self.c / (12.0 * h[1] * h[1]),
            self.c * self.c / (12.0 * h[2] * h[2]),
        ];
        let ko_w = [
            self.epsilon / (64.0 * h[0]),
            self.epsilon / (64.0 * h[1]),
            self.epsilon / (64.0 * h[2]),
        ];
        let dissipate = self.epsilon != 0.0;
        let owned = geom.owned;
        let (dphi_out, rest) = out.split_at_mut(1);
        let dphi_out = &mut dphi_out[0];
        let dpi_out = &mut rest[0];
        for k in owned.lo[2]..owned.hi[2] {
            for j in owned.lo[1]..owned.hi[1] {
                let row = geom.ext.offset([owned.lo[0], j, k]);
                for n in 0..owned.shape()[0] {
                    let idx = row + n;
                    let mut lap = 0.0;
                    for d in 0..3 {
                        lap += lap_w[d] * apply(phi, idx, strides[d], &D2_4);
                    }
                    let mut dphi = pi[idx];
                    let mut dpi = lap;
                    if dissipate {
                        for d in 0..3 {
                            dphi += ko_w[d] * apply(phi, idx, strides[d], &KO6);
                            dpi += ko_w[d] * apply(pi, idx, strides[d], &KO6);
                        }
                    }
                    dphi_out[idx] = dphi;
                    dpi_out[idx] = dpi;
                }
            }
        }
        Ok(())
    }
}

/// `sum h^3 (pi^2 / 2 + c^2 |grad phi|^2 / 2)` over the owned points of one
/// block, with a fourth-order gradient. Ghosts must be valid.
pub fn block_energy(geom: &PatchGeom, state: &[Vec<f64>], c: f64) -> f64 {
    let phi = &state[PHI];
    let pi = &state[PI_VAR];
    let strides = geom.ext.strides();
    let h = geom.spacing;
    let cell = h[0] * h[1] * h[2];
    let mut e = 0.0;
    for p in geom.owned.points() {
        let idx = geom.ext.offset(p);
        let mut grad2 = 0.0;
        for d in 0..3 {
            let g = apply(phi, idx, strides[d], &D1_4) / (12.0 * h[d]);
            grad2 += g * g;
        }
        e += cell * (0.5 * pi[idx] * pi[idx] + 0.5 * c * c * grad2);
    }
    e
}

/// Initial data, optionally an exact solution at any time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WaveInit {
    MinkowskiConstant,
    /// `A exp(-r^2 / (2 sigma^2))` at rest; evolved with the free-space
    /// spherical solution so past time levels can be filled exactly.
    Gaussian {
        amplitude: f64,
        sigma: f64,
        centre: [f64; 3],
    },
    /// `A sin(2 pi k.(x - origin)/L - omega t)` on a periodic box of
    /// extents `periods`; an exact solution of the continuum problem.
    Plane {
        amplitude: f64,
        wavenumber: [i64; 3],
        origin: [f64; 3],
        periods: [f64; 3],
    },
}

impl WaveInit {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        match self {
            WaveInit::MinkowskiConstant => Ok(()),
            WaveInit::Gaussian { sigma, amplitude, .. } => {
                if !(*sigma > 0.0) || !amplitude.is_finite() {
                    return Err(PhysicsError::BadParams(format!(
                        "gaussian needs positive width, got sigma={sigma}"
                    )));
                }
                Ok(())
            }
            WaveInit::Plane { periods, wavenumber, .. } => {
                if periods.iter().any(|p| !(*p > 0.0)) {
                    return Err(PhysicsError::BadParams("plane wave needs positive periods".into()));
                }
                if wavenumber.iter().all(|k| *k == 0) {
                    return Err(PhysicsError::BadParams("plane wave needs a nonzero wavenumber".into()));
                }
                Ok(())
            }
        }
    }

    /// `(phi, pi)` at position `x` and time `t` for wave speed `c`.
    pub fn eval(&self, x: [f64; 3], t: f64, c: f64) -> (f64, f64) {
        match self {
            WaveInit::MinkowskiConstant => (0.0, 0.0),
            WaveInit::Gaussian { amplitude, sigma, centre } => {
                let r = ((x[0] - centre[0]).powi(2) + (x[1] - centre[1]).powi(2) + (x[2] - centre[2]).powi(2)).sqrt();
                gaussian_pulse(*amplitude, *sigma, r, t, c)
            }
            WaveInit::Plane { amplitude, wavenumber, origin, periods } => {
                let mut phase = 0.0;
                let mut kk = 0.0;
                for d in 0..3 {
                    let kd = wavenumber[d] as f64 / periods[d];
                    phase += 2.0 * PI * kd * (x[d] - origin[d]);
                    kk += kd * kd;
                }
                let omega = 2.0 * PI * c * kk.sqrt();
                let arg = phase - omega * t;
                (amplitude * arg.sin(), -amplitude * omega * arg.cos())
            }
        }
    }
}

/// Spherically symmetric solution with `phi(r, 0) = A exp(-r^2/(2 s^2))`,
/// `pi(r, 0) = 0`: `r phi = (F(r - ct) + F(r + ct)) / 2` with `F(s) = s f(s)`.
fn gaussian_pulse(amp: f64, sigma: f64, r: f64, t: f64, c: f64) -> (f64, f64) {
    let a = 1.0 / (2.0 * sigma * sigma);
    let f = |s: f64| amp * (-a * s * s).exp();
    // F'(s) and F''(s)
    let dfs = |s: f64| amp * (-a * s * s).exp() * (1.0 - 2.0 * a * s * s);
    let ddfs = |s: f64| amp * (-a * s * s).exp() * (-2.0 * a * s) * (3.0 - 2.0 * a * s * s);
    let ct = c * t;
    if r < 1e-6 * sigma {
        return (dfs(ct), c * ddfs(ct));
    }
    let phi = ((r - ct) * f(r - ct) + (r + ct) * f(r + ct)) / (2.0 * r);
    let pi = c * (dfs(r + ct) - dfs(r - ct)) / (2.0 * r);
    (phi, pi)
}
