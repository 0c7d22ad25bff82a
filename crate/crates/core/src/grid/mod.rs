//! Index-space geometry shared by drivers, physics and I/O.

mod ibox;
mod patch;
mod region;

pub use ibox::{copy_region, pack_region, unpack_region, BoxPoints, IBox, Index3};
pub use patch::{GroupStorage, Patch, PatchGeom};
pub use region::Region;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
}

/// Treatment of the outer faces of the global domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Ghosts beyond the outer face copy the nearest interior point.
    OuterCopy,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::OuterCopy => "outer-copy",
        })
    }
}

impl FromStr for Boundary {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "outer-copy" => Ok(Boundary::OuterCopy),
            other => Err(GridError::InvalidDomain(format!("unknown boundary {other:?}"))),
        }
    }
}

/// Global vertex-centred domain: point `i` sits at `origin + i * spacing`.
///
/// For periodic domains point `points[d]` is identified with point 0, so the
/// period is `points[d] * spacing[d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub points: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub boundary: Boundary,
    pub ghost: usize,
}

impl DomainSpec {
    /// Cube of `n` points per side with spacing `h`.
    pub fn cube(n: usize, origin: f64, h: f64, boundary: Boundary, ghost: usize) -> Self {
        Self {
            points: [n; 3],
            origin: [origin; 3],
            spacing: [h; 3],
            boundary,
            ghost,
        }
    }

    /// Periodic unit cube with `n` points per side.
    pub fn periodic_unit_cube(n: usize, ghost: usize) -> Self {
        Self::cube(n, 0.0, 1.0 / n as f64, Boundary::Periodic, ghost)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        const AXES: [char; 3] = ['x', 'y', 'z'];
        for d in 0..3 {
            if self.points[d] < 2 * self.ghost + 1 {
                return Err(GridError::InvalidDomain(format!(
                    "{}-extent {} cannot host {}-wide ghosts (need at least {} points)",
                    AXES[d],
                    self.points[d],
                    self.ghost,
                    2 * self.ghost + 1
                )));
            }
            if !(self.spacing[d] > 0.0 && self.spacing[d].is_finite()) {
                return Err(GridError::InvalidDomain(format!(
                    "{}-spacing must be positive, got {}",
                    AXES[d], self.spacing[d]
                )));
            }
        }
        Ok(())
    }

    pub fn index_box(&self) -> IBox {
        IBox::from_shape(self.points)
    }

    pub fn total_points(&self) -> usize {
        self.points.iter().product()
    }

    /// Spacing on refinement level `level`.
    pub fn level_spacing(&self, level: usize) -> [f64; 3] {
        let f = (1u64 << level) as f64;
        [self.spacing[0] / f, self.spacing[1] / f, self.spacing[2] / f]
    }

    /// Index box of the whole domain expressed on refinement level `level`.
    pub fn level_box(&self, level: usize) -> IBox {
        let mut b = self.index_box();
        for _ in 0..level {
            b = b.refine();
        }
        b
    }

    /// Map a (possibly ghost) level-0 index onto the interior point whose
    /// value it images: wrap for periodic domains, clamp for outer-copy.
    pub fn image(&self, p: Index3) -> Index3 {
        let mut q = p;
        for d in 0..3 {
            let n = self.points[d] as i64;
            q[d] = match self.boundary {
                Boundary::Periodic => p[d].rem_euclid(n),
                Boundary::OuterCopy => p[d].clamp(0, n - 1),
            };
        }
        q
    }

    pub fn coord(&self, level: usize, p: Index3) -> [f64; 3] {
        let h = self.level_spacing(level);
        [
            self.origin[0] + p[0] as f64 * h[0],
            self.origin[1] + p[1] as f64 * h[1],
            self.origin[2] + p[2] as f64 * h[2],
        ]
    }
}
