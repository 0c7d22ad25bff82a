//! Integer index boxes over vertex-centred grids.
//!
//! A box is half-open: it contains the points `lo[d] <= i[d] < hi[d]`.
//! Point iteration and linear indexing are x-fastest throughout the crate.

use serde::{Deserialize, Serialize};
use std::fmt;

pub type Index3 = [i64; 3];

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IBox {
    pub lo: Index3,
    pub hi: Index3,
}

impl fmt::Debug for IBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}..{}, {}..{}, {}..{})",
            self.lo[0], self.hi[0], self.lo[1], self.hi[1], self.lo[2], self.hi[2]
        )
    }
}

impl fmt::Display for IBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl IBox {
    pub const fn new(lo: Index3, hi: Index3) -> Self {
        Self { lo, hi }
    }

    /// Box with the given number of points per dimension starting at the origin.
    pub fn from_shape(shape: [usize; 3]) -> Self {
        Self::new([0; 3], [shape[0] as i64, shape[1] as i64, shape[2] as i64])
    }

    /// Box containing the closed vertex range `lo..=hi_inclusive`.
    pub fn inclusive(lo: Index3, hi_inclusive: Index3) -> Self {
        Self::new(lo, [hi_inclusive[0] + 1, hi_inclusive[1] + 1, hi_inclusive[2] + 1])
    }

    pub fn empty() -> Self {
        Self::new([0; 3], [0; 3])
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|d| self.hi[d] <= self.lo[d])
    }

    pub fn shape(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        for d in 0..3 {
            s[d] = (self.hi[d] - self.lo[d]).max(0) as usize;
        }
        s
    }

    pub fn volume(&self) -> usize {
        let s = self.shape();
        s[0] * s[1] * s[2]
    }

    pub fn contains(&self, p: Index3) -> bool {
        (0..3).all(|d| p[d] >= self.lo[d] && p[d] < self.hi[d])
    }

    pub fn contains_box(&self, other: &IBox) -> bool {
        other.is_empty() || (0..3).all(|d| other.lo[d] >= self.lo[d] && other.hi[d] <= self.hi[d])
    }

    pub fn intersect(&self, other: &IBox) -> IBox {
        let mut r = IBox::empty();
        for d in 0..3 {
            r.lo[d] = self.lo[d].max(other.lo[d]);
            r.hi[d] = self.hi[d].min(other.hi[d]);
        }
        if r.is_empty() {
            IBox::empty()
        } else {
            r
        }
    }

    pub fn intersects(&self, other: &IBox) -> bool {
        !self.intersect(other).is_empty()
    }

    pub fn grow(&self, n: i64) -> IBox {
        self.grow_by([n; 3])
    }

    pub fn grow_by(&self, n: [i64; 3]) -> IBox {
        let mut r = *self;
        for d in 0..3 {
            r.lo[d] -= n[d];
            r.hi[d] += n[d];
        }
        r
    }

    pub fn shift(&self, by: Index3) -> IBox {
        let mut r = *self;
        for d in 0..3 {
            r.lo[d] += by[d];
            r.hi[d] += by[d];
        }
        r
    }

    /// Smallest coarse box whose points cover every fine point of `self`
    /// under factor-2 vertex refinement (fine `2i` coincides with coarse `i`).
    pub fn coarsen(&self) -> IBox {
        let mut r = *self;
        for d in 0..3 {
            r.lo[d] = self.lo[d].div_euclid(2);
            // last fine point hi-1 lies at or below coarse ceil((hi-1)/2)
            r.hi[d] = (self.hi[d] - 1 + 1).div_euclid(2) + 1;
        }
        r
    }

    /// Fine box spanning the coarse points of `self` (including the odd
    /// fine points between them).
    pub fn refine(&self) -> IBox {
        let mut r = *self;
        for d in 0..3 {
            r.lo[d] = 2 * self.lo[d];
            r.hi[d] = 2 * (self.hi[d] - 1) + 1;
        }
        r
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &IBox) -> IBox {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        let mut r = *self;
        for d in 0..3 {
            r.lo[d] = self.lo[d].min(other.lo[d]);
            r.hi[d] = self.hi[d].max(other.hi[d]);
        }
        r
    }

    /// Linear x-fastest offset of `p` inside this box.
    #[inline]
    pub fn offset(&self, p: Index3) -> usize {
        debug_assert!(self.contains(p), "{p:?} outside {self:?}");
        let s = self.shape();
        let i = (p[0] - self.lo[0]) as usize;
        let j = (p[1] - self.lo[1]) as usize;
        let k = (p[2] - self.lo[2]) as usize;
        i + s[0] * (j + s[1] * k)
    }

    /// Strides `(1, nx, nx*ny)` for x-fastest storage.
    pub fn strides(&self) -> [usize; 3] {
        let s = self.shape();
        [1, s[0], s[0] * s[1]]
    }

    pub fn points(&self) -> BoxPoints {
        BoxPoints {
            b: *self,
            cur: self.lo,
            done: self.is_empty(),
        }
    }

    /// `self \ other` as at most six disjoint boxes.
    pub fn subtract(&self, other: &IBox) -> Vec<IBox> {
        let cut = self.intersect(other);
        if cut.is_empty() {
            return if self.is_empty() { vec![] } else { vec![*self] };
        }
        let mut out = Vec::new();
        let mut rest = *self;
        for d in 0..3 {
            if rest.lo[d] < cut.lo[d] {
                let mut slab = rest;
                slab.hi[d] = cut.lo[d];
                out.push(slab);
                rest.lo[d] = cut.lo[d];
            }
            if rest.hi[d] > cut.hi[d] {
                let mut slab = rest;
                slab.lo[d] = cut.hi[d];
                out.push(slab);
                rest.hi[d] = cut.hi[d];
            }
        }
        out
    }
}

/// x-fastest iterator over the points of a box.
pub struct BoxPoints {
    b: IBox,
    cur: Index3,
    done: bool,
}

impl Iterator for BoxPoints {
    type Item = Index3;

    fn next(&mut self) -> Option<Index3> {
        if self.done {
            return None;
        }
        let out = self.cur;
        self.cur[0] += 1;
        if self.cur[0] >= self.b.hi[0] {
            self.cur[0] = self.b.lo[0];
            self.cur[1] += 1;
            if self.cur[1] >= self.b.hi[1] {
                self.cur[1] = self.b.lo[1];
                self.cur[2] += 1;
                if self.cur[2] >= self.b.hi[2] {
                    self.done = true;
                }
            }
        }
        Some(out)
    }
}

/// Copy `region` (which must lie in both boxes) from `src` to `dst`.
pub fn copy_region(src: &[f64], src_box: &IBox, dst: &mut [f64], dst_box: &IBox, region: &IBox) {
    if region.is_empty() {
        return;
    }
    let nx = region.shape()[0];
    for k in region.lo[2]..region.hi[2] {
        for j in region.lo[1]..region.hi[1] {
            let s = src_box.offset([region.lo[0], j, k]);
            let d = dst_box.offset([region.lo[0], j, k]);
            dst[d..d + nx].copy_from_slice(&src[s..s + nx]);
        }
    }
}

/// Pack `region` of `src` into a flat x-fastest buffer.
pub fn pack_region(src: &[f64], src_box: &IBox, region: &IBox, out: &mut Vec<f64>) {
    let nx = region.shape()[0];
    for k in region.lo[2]..region.hi[2] {
        for j in region.lo[1]..region.hi[1] {
            let s = src_box.offset([region.lo[0], j, k]);
            out.extend_from_slice(&src[s..s + nx]);
        }
    }
}

/// Inverse of [`pack_region`]; returns the number of values consumed.
pub fn unpack_region(buf: &[f64], dst: &mut [f64], dst_box: &IBox, region: &IBox) -> usize {
    let nx = region.shape()[0];
    let mut pos = 0;
    for k in region.lo[2]..region.hi[2] {
        for j in region.lo[1]..region.hi[1] {
            let d = dst_box.offset([region.lo[0], j, k]);
            dst[d..d + nx].copy_from_slice(&buf[pos..pos + nx]);
            pos += nx;
        }
    }
    pos
}
