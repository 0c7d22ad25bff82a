//! Refinement hierarchies: factor-2 nested levels of boxes around centres
//! of interest.

use crate::driver::unigrid::decompose::{cut_surface, factorizations, split_extent};
use crate::driver::DriverError;
use crate::grid::{DomainSpec, IBox, Region};
use serde::{Deserialize, Serialize};

/// A tracked location with the half-width of the refined box on each level.
///
/// Half-widths are in units of the coarsest grid spacing. Entry `l` belongs
/// to level `l`; level 0 always covers the whole domain, so if the list has
/// one entry fewer than there are levels it starts at level 1 instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentreOfInterest {
    pub position: [f64; 3],
    pub half_widths: Vec<f64>,
}

impl CentreOfInterest {
    pub fn new(position: [f64; 3], half_widths: &[f64]) -> Self {
        Self {
            position,
            half_widths: half_widths.to_vec(),
        }
    }

    fn half_width(&self, level: usize, nlevels: usize) -> Option<f64> {
        if self.half_widths.len() >= nlevels {
            self.half_widths.get(level).copied()
        } else if self.half_widths.len() + 1 == nlevels {
            self.half_widths.get(level.checked_sub(1)?).copied()
        } else {
            None
        }
    }

    pub fn validate(&self, nlevels: usize) -> Result<(), String> {
        if self.half_widths.len() + 1 < nlevels {
            return Err(format!(
                "centre at {:?} gives {} half-widths for {} levels",
                self.position,
                self.half_widths.len(),
                nlevels
            ));
        }
        if self.half_widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(format!("centre at {:?}: half-widths must be positive", self.position));
        }
        if self.half_widths.windows(2).any(|w| w[1] >= w[0]) {
            return Err(format!(
                "centre at {:?}: half-widths must decrease strictly with level, got {:?}",
                self.position, self.half_widths
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpSpec {
    /// Odd, 1..=7.
    pub spatial_order: usize,
    /// 0..=4.
    pub time_order: usize,
}

impl Default for InterpSpec {
    fn default() -> Self {
        Self {
            spatial_order: 5,
            time_order: 2,
        }
    }
}

impl InterpSpec {
    pub fn new(spatial_order: usize, time_order: usize) -> Result<Self, DriverError> {
        let s = Self { spatial_order, time_order };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        if !matches!(self.spatial_order, 1 | 3 | 5 | 7) {
            return Err(DriverError::Config(format!(
                "spatial interpolation order must be 1, 3, 5 or 7, got {}",
                self.spatial_order
            )));
        }
        if self.time_order > 4 {
            return Err(DriverError::Config(format!(
                "time interpolation order must be at most 4, got {}",
                self.time_order
            )));
        }
        Ok(())
    }

    /// Coarse points needed on each side of a fine point.
    pub fn stencil_radius(&self) -> usize {
        self.spatial_order.div_ceil(2)
    }
}

/// Width of the band of evolved fine points around each refined box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferSpec {
    pub width: usize,
}

impl BufferSpec {
    /// Each integrator substep erodes one stencil radius of valid data.
    pub fn for_integrator(substeps: usize, stencil_radius: usize) -> Self {
        Self {
            width: substeps * stencil_radius,
        }
    }

    pub fn none() -> Self {
        Self { width: 0 }
    }
}

impl Default for BufferSpec {
    /// Four RK substeps of a radius-3 stencil.
    fn default() -> Self {
        Self::for_integrator(4, 3)
    }
}

/// Construction parameters of the AMR driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmrSettings {
    pub nlevels: usize,
    pub centres: Vec<CentreOfInterest>,
    pub interp: InterpSpec,
    pub buffer: BufferSpec,
}

impl Default for AmrSettings {
    fn default() -> Self {
        Self {
            nlevels: 1,
            centres: Vec::new(),
            interp: InterpSpec::default(),
            buffer: BufferSpec::default(),
        }
    }
}

/// The refined region of every level, in that level's indices.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementHierarchy {
    pub domain: DomainSpec,
    pub levels: Vec<Region>,
    pub interp: InterpSpec,
    pub buffer: BufferSpec,
}

impl RefinementHierarchy {
    pub fn build(
        domain: &DomainSpec,
        centres: &[CentreOfInterest],
        nlevels: usize,
        interp: InterpSpec,
        buffer: BufferSpec,
    ) -> Result<Self, DriverError> {
        domain.validate()?;
        interp.validate()?;
        if nlevels == 0 {
            return Err(DriverError::Config("need at least one level".into()));
        }
        if nlevels > 1 && centres.is_empty() {
            return Err(DriverError::Config("refined levels need at least one centre of interest".into()));
        }
        for c in centres {
            c.validate(nlevels).map_err(DriverError::Config)?;
        }
        let mut levels = vec![Region::from_box(domain.index_box())];
        for l in 1..nlevels {
            let mut region = Region::new();
            for c in centres {
                let w = c.half_width(l, nlevels).expect("validated");
                region.add(centre_box(domain, c.position, w, l));
            }
            levels.push(region);
        }
        let h = Self {
            domain: domain.clone(),
            levels,
            interp,
            buffer,
        };
        h.check_nesting()?;
        Ok(h)
    }

    pub fn from_boxes(domain: &DomainSpec, boxes: &[Vec<IBox>], interp: InterpSpec, buffer: BufferSpec) -> Result<Self, DriverError> {
        let levels = boxes
            .iter()
            .map(|bs| {
                let mut r = Region::new();
                for b in bs {
                    r.add(*b);
                }
                r
            })
            .collect();
        let h = Self {
            domain: domain.clone(),
            levels,
            interp,
            buffer,
        };
        if h.levels.first() != Some(&Region::from_box(domain.index_box())) {
            return Err(DriverError::Nesting {
                level: 0,
                detail: "level 0 must cover the whole domain".into(),
            });
        }
        h.check_nesting()?;
        Ok(h)
    }

    pub fn nlevels(&self) -> usize {
        self.levels.len()
    }

    /// Each fine box, widened by buffer and ghost width and then by the
    /// prolongation stencil, must lie inside the next coarser refined region.
    pub fn check_nesting(&self) -> Result<(), DriverError> {
        let margin = (self.buffer.width + self.domain.ghost) as i64;
        let r = self.interp.stencil_radius() as i64;
        for l in 1..self.levels.len() {
            let coarse = &self.levels[l - 1];
            for b in self.levels[l].boxes() {
                let need = b.grow(margin).coarsen().grow(r);
                if !coarse.contains_box(&need) {
                    return Err(DriverError::Nesting {
                        level: l,
                        detail: format!(
                            "box {b} widened by {margin} points plus a {r}-point stencil needs coarse cover {need}, \
                             which leaves the level-{} region",
                            l - 1
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Points evolved on level `l`: the refined region plus its buffer band.
    pub fn evolved_region(&self, l: usize) -> Region {
        if l == 0 {
            return self.levels[0].clone();
        }
        let w = self.buffer.width as i64;
        let mut r = Region::new();
        for b in self.levels[l].boxes() {
            r.add(b.grow(w));
        }
        r
    }

    pub fn boxes(&self) -> Vec<Vec<IBox>> {
        self.levels.iter().map(|r| r.boxes().to_vec()).collect()
    }
}

fn centre_box(domain: &DomainSpec, c: [f64; 3], w: f64, level: usize) -> IBox {
    const EPS: f64 = 1e-9;
    let h = domain.level_spacing(level);
    let lim = domain.level_box(level);
    let mut b = IBox::empty();
    for d in 0..3 {
        let lo = ((c[d] - w * domain.spacing[d] - domain.origin[d]) / h[d] + EPS).floor() as i64;
        let hi = ((c[d] + w * domain.spacing[d] - domain.origin[d]) / h[d] - EPS).ceil() as i64;
        // snap outwards to even indices so both ends coincide with coarse points
        let lo = lo - lo.rem_euclid(2);
        let hi = hi + hi.rem_euclid(2);
        b.lo[d] = lo.max(lim.lo[d]);
        b.hi[d] = (hi + 1).min(lim.hi[d]);
    }
    b
}

/// Split each box of `region` into pieces and deal them out to ranks
/// round-robin. A box is cut into at most `nranks` pieces using the
/// factorization with the smallest cut surface.
pub fn distribute(region: &Region, nranks: usize, min_extent: usize) -> Vec<(usize, IBox)> {
    let mut boxes = region.boxes().to_vec();
    boxes.sort();
    let mut out = Vec::new();
    let mut next = 0usize;
    for b in boxes {
        let shape = b.shape();
        let pieces = (1..=nranks)
            .rev()
            .find_map(|k| {
                factorizations(k)
                    .into_iter()
                    .filter(|f| (0..3).all(|d| shape[d] / f[d] >= min_extent.max(1)))
                    .min_by_key(|f| (cut_surface(shape, *f), *f))
            })
            .unwrap_or([1, 1, 1]);
        let cuts: Vec<Vec<(i64, i64)>> = (0..3).map(|d| split_extent(shape[d], pieces[d])).collect();
        for k in 0..pieces[2] {
            for j in 0..pieces[1] {
                for i in 0..pieces[0] {
                    let piece = IBox::new(
                        [b.lo[0] + cuts[0][i].0, b.lo[1] + cuts[1][j].0, b.lo[2] + cuts[2][k].0],
                        [b.lo[0] + cuts[0][i].1, b.lo[1] + cuts[1][j].1, b.lo[2] + cuts[2][k].1],
                    );
                    out.push((next % nranks, piece));
                    next += 1;
                }
            }
        }
    }
    out
}
