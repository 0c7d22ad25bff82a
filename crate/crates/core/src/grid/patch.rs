//! Rectangular blocks of grid-function storage.

use super::ibox::{IBox, Index3};

/// Storage for one variable group: `levels[time_level][variable][point]`,
/// each array spanning the ghost-extended box.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupStorage {
    pub levels: Vec<Vec<Vec<f64>>>,
}

impl GroupStorage {
    pub fn zeroed(time_levels: usize, nvars: usize, npoints: usize) -> Self {
        Self {
            levels: vec![vec![vec![0.0; npoints]; nvars]; time_levels],
        }
    }

    pub fn current(&self) -> &[Vec<f64>] {
        &self.levels[0]
    }

    pub fn current_mut(&mut self) -> &mut Vec<Vec<f64>> {
        &mut self.levels[0]
    }

    /// Push `state` as the new current level, discarding the oldest one.
    pub fn rotate_in(&mut self, state: Vec<Vec<f64>>) {
        self.levels.pop();
        self.levels.insert(0, state);
    }
}

/// A block owned by one rank on one refinement level.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub rank: usize,
    pub level: usize,
    pub owned: IBox,
    pub ext: IBox,
    pub storage: Vec<GroupStorage>,
}

impl Patch {
    pub fn new(id: usize, rank: usize, level: usize, owned: IBox, ghost: usize) -> Self {
        Self {
            id,
            rank,
            level,
            owned,
            ext: owned.grow(ghost as i64),
            storage: Vec::new(),
        }
    }

    pub fn ghost(&self) -> usize {
        (self.owned.lo[0] - self.ext.lo[0]) as usize
    }
}

/// Geometry handed to block-level kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchGeom {
    pub level: usize,
    pub owned: IBox,
    pub ext: IBox,
    /// Physical coordinate of level index 0.
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
}

impl PatchGeom {
    pub fn coord(&self, p: Index3) -> [f64; 3] {
        [
            self.origin[0] + p[0] as f64 * self.spacing[0],
            self.origin[1] + p[1] as f64 * self.spacing[1],
            self.origin[2] + p[2] as f64 * self.spacing[2],
        ]
    }

    pub fn npoints(&self) -> usize {
        self.ext.volume()
    }
}
