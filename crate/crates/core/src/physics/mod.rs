//! Semi-discrete right-hand sides evolved by the method-of-lines integrator.

pub mod hydro;
pub mod stencil;
pub mod wave;

use crate::grid::PatchGeom;
use crate::registry::Registry;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("invalid physics parameters: {0}")]
    BadParams(String),
    #[error("non-finite state at {0:?}")]
    NonFinite([i64; 3]),
    #[error("ghost width {have} too small for stencil radius {need}")]
    GhostTooNarrow { have: usize, need: usize },
}

/// A system of evolution equations discretised in space.
///
/// `rhs` writes time derivatives at owned points only; ghost entries of
/// `out` are left untouched (they start zeroed).
pub trait Physics: Send + Sync {
    fn name(&self) -> &'static str;

    /// Evolved variables, in storage order.
    fn var_names(&self) -> &'static [&'static str];

    /// Points on each side a single right-hand-side evaluation reads.
    fn stencil_radius(&self) -> usize;

    /// Largest characteristic speed on this block.
    fn max_speed(&self, geom: &PatchGeom, state: &[Vec<f64>]) -> f64;

    fn rhs(&self, geom: &PatchGeom, state: &[Vec<f64>], out: &mut [Vec<f64>]) -> Result<(), PhysicsError>;
}

pub fn check_ghosts(geom: &PatchGeom, radius: usize) -> Result<(), PhysicsError> {
    let have = (geom.owned.lo[0] - geom.ext.lo[0]) as usize;
    if have < radius {
        return Err(PhysicsError::GhostTooNarrow { have, need: radius });
    }
    Ok(())
}

/// Default-configured physics systems, by name.
pub fn systems() -> Registry<dyn Physics> {
    let mut r: Registry<dyn Physics> = Registry::new("physics");
    r.register_simple("wave", || Box::new(wave::WaveEquation::default()));
    r.register_simple("hydro", || Box::new(hydro::Euler::default()));
    r
}
