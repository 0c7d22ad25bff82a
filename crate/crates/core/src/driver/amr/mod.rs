//! Berger–Oliger AMR driver.
//!
//! Level 0 is decomposed exactly like the unigrid driver and exchanges its
//! ghosts with the same single-phase neighbour plan, so a one-level
//! hierarchy evolves bit-for-bit like the unigrid driver. Finer levels are
//! factor-2 refinements in space and time. Before each fine step the fine
//! level's refinement-boundary ghosts and buffer band are prolonged from
//! the coarser level (interpolated in time from its stored levels); after
//! two fine steps the fine solution is injected back onto the coincident
//! coarse points. All data movement between patches — same-level ghost
//! fills, prolongation and restriction — travels as [`HaloMessage`]s.

pub mod hierarchy;
pub mod interp;

pub use hierarchy::{distribute, AmrSettings, BufferSpec, CentreOfInterest, InterpSpec, RefinementHierarchy};
pub use interp::{time_interpolate, time_weights, Stencil1d, TIME_TOLERANCE};

use super::common::{current_state, geom_of, interpolate_points, level_rhs, put_current, reduce_patches, run_blocks, take_current};
use super::transport::{HaloMessage, Mailbox};
use super::unigrid::{decompose, execute, DimMap, ExchangePlan, ExchangeStrategy, Neighbors, Placement, Transfer};
use super::{BlockFn, Driver, DriverDesc, DriverError, EvolvedSystem, Execution, InterpError, Layout, LevelDesc, ReduceOp};
use crate::flesh::VariableGroup;
use crate::grid::{copy_region, DomainSpec, IBox, Index3, Patch, PatchGeom, Region};
use crate::mol::Integrator;
use std::any::Any;

/// Message phase tags, so prolongation and restriction traffic can be told
/// apart from ghost exchange in a mailbox.
const PHASE_PROLONG: u32 = 100;
const PHASE_RESTRICT: u32 = 101;

/// Counters of the inter-level traffic, for inspection in tests and benches.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransferCounts {
    pub sync_messages: usize,
    pub prolong_messages: usize,
    pub restrict_messages: usize,
}

struct AmrLevel {
    patches: Vec<Patch>,
    plan: ExchangePlan,
    place: Placement,
    /// Per patch: points filled by prolongation before every step —
    /// ghosts not covered by a sibling, then owned points in the buffer band.
    targets: Vec<Vec<Index3>>,
    times: Vec<f64>,
    steps: u64,
}

impl AmrLevel {
    fn geoms(&self, domain: &DomainSpec) -> Vec<PatchGeom> {
        self.patches.iter().map(|p| geom_of(domain, p)).collect()
    }
}

pub struct Amr {
    domain: DomainSpec,
    nranks: usize,
    execution: Execution,
    settings: AmrSettings,
    hierarchy: RefinementHierarchy,
    levels: Vec<AmrLevel>,
    layout: Layout,
    next_id: usize,
    counts: TransferCounts,
}

impl Amr {
    pub fn new(domain: DomainSpec, nranks: usize, execution: Execution, settings: AmrSettings) -> Result<Self, DriverError> {
        let hierarchy = RefinementHierarchy::build(&domain, &settings.centres, settings.nlevels, settings.interp, settings.buffer)?;
        Self::with_hierarchy(domain, nranks, execution, settings, hierarchy)
    }

    /// Rebuild a driver (unallocated) from a saved description.
    pub fn from_desc(desc: &DriverDesc, nranks: usize, execution: Execution) -> Result<Self, DriverError> {
        let mut settings = desc.amr.clone().unwrap_or_default();
        let boxes: Vec<Vec<IBox>> = desc.levels.iter().map(|l| l.boxes.clone()).collect();
        settings.nlevels = boxes.len();
        let hierarchy = RefinementHierarchy::from_boxes(&desc.domain, &boxes, settings.interp, settings.buffer)?;
        let mut amr = Self::with_hierarchy(desc.domain.clone(), nranks, execution, settings, hierarchy)?;
        for (lev, d) in amr.levels.iter_mut().zip(&desc.levels) {
            lev.times = d.times.clone();
            lev.steps = d.steps;
        }
        Ok(amr)
    }

    fn with_hierarchy(
        domain: DomainSpec,
        nranks: usize,
        execution: Execution,
        settings: AmrSettings,
        hierarchy: RefinementHierarchy,
    ) -> Result<Self, DriverError> {
        if nranks == 0 {
            return Err(DriverError::Sizing("need at least one rank".into()));
        }
        let mut amr = Self {
            domain,
            nranks,
            execution,
            settings,
            hierarchy,
            levels: Vec::new(),
            layout: Layout::default(),
            next_id: 0,
            counts: TransferCounts::default(),
        };
        for l in 0..amr.hierarchy.nlevels() {
            let lev = amr.build_level(l, &amr.hierarchy.clone(), vec![0.0])?;
            amr.levels.push(lev);
        }
        Ok(amr)
    }

    pub fn hierarchy(&self) -> &RefinementHierarchy {
        &self.hierarchy
    }

    pub fn settings(&self) -> &AmrSettings {
        &self.settings
    }

    pub fn level_patches(&self, level: usize) -> &[Patch] {
        &self.levels[level].patches
    }

    /// Prolongation targets of each patch of `level`.
    pub fn prolong_targets(&self, level: usize) -> &[Vec<Index3>] {
        &self.levels[level].targets
    }

    pub fn transfer_counts(&self) -> &TransferCounts {
        &self.counts
    }

    fn build_level(&mut self, l: usize, h: &RefinementHierarchy, times: Vec<f64>) -> Result<AmrLevel, DriverError> {
        let ghost = self.domain.ghost;
        let mut patches = Vec::new();
        let plan;
        if l == 0 {
            let (topo, blocks) = decompose(&self.domain, self.nranks)?;
            plan = Neighbors.plan(&self.domain, &topo, &blocks);
            for b in &blocks {
                patches.push(Patch::new(self.next_id, b.rank, 0, b.owned, ghost));
                self.next_id += 1;
            }
        } else {
            let mut parts = distribute(&h.evolved_region(l), self.nranks, ghost);
            // rank-major, stable within a rank
            parts.sort_by_key(|(rank, _)| *rank);
            for (rank, owned) in parts {
                patches.push(Patch::new(self.next_id, rank, l, owned, ghost));
                self.next_id += 1;
            }
            plan = sibling_plan(&patches);
        }
        let place = Placement {
            exts: patches.iter().map(|p| p.ext).collect(),
            ranks: patches.iter().map(|p| p.rank).collect(),
            nranks: self.nranks,
        };
        let targets = if l == 0 {
            vec![Vec::new(); patches.len()]
        } else {
            prolong_targets(&patches, &h.levels[l])
        };
        if self.layout.groups().is_empty() {
            // storage is created by allocate()
        } else {
            for p in &mut patches {
                p.storage = self.layout.new_storage(p.ext.volume());
            }
        }
        Ok(AmrLevel {
            patches,
            plan,
            place,
            targets,
            times,
            steps: 0,
        })
    }

    fn sync_level(&mut self, l: usize, gi: usize) {
        let lev = &mut self.levels[l];
        let mut data = take_current(&mut lev.patches, gi);
        let stats = execute(&lev.plan, &lev.place, &mut data, self.execution);
        put_current(&mut lev.patches, gi, data);
        self.counts.sync_messages += stats.messages;
    }

    /// Values of every variable of group `gi` at the level-`l` points
    /// `targets`, interpolated from level `l - 1` at time `t`.
    /// Returned as `[var][target]`.
    pub fn prolong_values(&mut self, l: usize, gi: usize, t: f64, targets: &[Index3], dest_rank: usize) -> Result<Vec<Vec<f64>>, DriverError> {
        let (v, n) = prolong_from(&self.levels[l - 1], l, gi, &self.layout, self.settings.interp, t, targets, dest_rank)?;
        self.counts.prolong_messages += n;
        Ok(v)
    }

    /// Fill the prolongation targets of every patch of level `l` (group
    /// `gi`, current time level) from level `l - 1` at time `t`.
    pub fn prolong_level(&mut self, l: usize, gi: usize, t: f64) -> Result<(), DriverError> {
        self.prolong_targets_where(l, gi, t, false)
    }

    fn prolong_targets_where(&mut self, l: usize, gi: usize, t: f64, ghosts_only: bool) -> Result<(), DriverError> {
        let mut filled = Vec::with_capacity(self.levels[l].patches.len());
        for (pi, p) in self.levels[l].patches.iter().enumerate() {
            let all = &self.levels[l].targets[pi];
            let kept: Vec<Index3>;
            let targets = if ghosts_only {
                kept = all.iter().copied().filter(|q| !p.owned.contains(*q)).collect();
                &kept
            } else {
                all
            };
            if targets.is_empty() {
                filled.push(Vec::new());
                continue;
            }
            let (v, n) = prolong_from(&self.levels[l - 1], l, gi, &self.layout, self.settings.interp, t, targets, p.rank)?;
            self.counts.prolong_messages += n;
            filled.push(v);
        }
        let lev = &mut self.levels[l];
        for ((p, targets), vals) in lev.patches.iter_mut().zip(&lev.targets).zip(filled) {
            let cur = &mut p.storage[gi].levels[0];
            let owned = p.owned;
            let targets = targets.iter().filter(|q| !(ghosts_only && owned.contains(**q)));
            for (var, vs) in cur.iter_mut().zip(vals) {
                for (q, v) in targets.clone().zip(vs) {
                    var[p.ext.offset(*q)] = v;
                }
            }
        }
        Ok(())
    }

    /// Inject level `l` onto the coincident points of level `l - 1` that lie
    /// inside level `l`'s refined region, then refresh level `l - 1`'s ghosts.
    pub fn restrict_level(&mut self, l: usize, gi: usize) -> Result<(), DriverError> {
        let (coarse, fine) = self.levels.split_at_mut(l);
        let coarse = &mut coarse[l - 1];
        let fine = &fine[0];
        let (tf, tc) = (fine.times[0], coarse.times[0]);
        if (tf - tc).abs() > TIME_TOLERANCE {
            return Err(DriverError::TimeMismatch { fine: tf, coarse: tc });
        }
        let real = &self.hierarchy.levels[l];
        let mut mailbox = Mailbox::new();
        let mut dst_of = Vec::new();
        for p in &fine.patches {
            for b in real.boxes() {
                let r = p.owned.intersect(b);
                if r.is_empty() {
                    continue;
                }
                let mut cr = IBox::empty();
                for d in 0..3 {
                    cr.lo[d] = (r.lo[d] + 1).div_euclid(2);
                    cr.hi[d] = (r.hi[d] - 1).div_euclid(2) + 1;
                }
                if cr.is_empty() {
                    continue;
                }
                for (ci, c) in coarse.patches.iter().enumerate() {
                    let x = cr.intersect(&c.owned);
                    if x.is_empty() {
                        continue;
                    }
                    let mut payload = Vec::with_capacity(x.volume() * p.storage[gi].levels[0].len());
                    for var in &p.storage[gi].levels[0] {
                        payload.extend(x.points().map(|q| var[p.ext.offset([2 * q[0], 2 * q[1], 2 * q[2]])]));
                    }
                    let id = dst_of.len();
                    dst_of.push(ci);
                    mailbox.send(HaloMessage {
                        source: p.rank,
                        dest: c.rank,
                        phase: PHASE_RESTRICT,
                        region_id: id,
                        region: x,
                        payload,
                    });
                }
            }
        }
        self.counts.restrict_messages += mailbox.totals().0;
        for msg in mailbox.drain_ordered() {
            let c = &mut coarse.patches[dst_of[msg.region_id]];
            let mut pos = 0;
            for var in c.storage[gi].levels[0].iter_mut() {
                pos += crate::grid::unpack_region(&msg.payload[pos..], var, &c.ext, &msg.region);
            }
        }
        self.sync_level(l - 1, gi);
        Ok(())
    }

    fn step_level(&mut self, l: usize, systems: &[EvolvedSystem<'_>], gis: &[usize], integrator: &dyn Integrator, dt: f64) -> Result<(), DriverError> {
        let geoms = self.levels[l].geoms(&self.domain);
        let exec = self.execution;
        let mut results = Vec::with_capacity(systems.len());
        for (sys, &gi) in systems.iter().zip(gis) {
            let lev = &self.levels[l];
            let mut state = current_state(&lev.patches, gi);
            let (plan, place) = (&lev.plan, &lev.place);
            let mut messages = 0;
            integrator.step(
                &mut state,
                dt,
                &mut |s, k| level_rhs(sys.physics, &geoms, s, k, exec),
                &mut |s| messages += execute(plan, place, s, exec).messages,
            )?;
            self.counts.sync_messages += messages;
            results.push((gi, state));
        }
        let lev = &mut self.levels[l];
        for (gi, state) in results {
            for (p, s) in lev.patches.iter_mut().zip(state) {
                p.storage[gi].rotate_in(s);
            }
        }
        let t = lev.times[0] + dt;
        lev.times.pop();
        lev.times.insert(0, t);
        lev.steps += 1;
        Ok(())
    }

    fn advance_level(&mut self, l: usize, systems: &[EvolvedSystem<'_>], gis: &[usize], integrator: &dyn Integrator, dt: f64) -> Result<(), DriverError> {
        if l > 0 {
            let t = self.levels[l].times[0];
            for &gi in gis {
                self.prolong_level(l, gi, t)?;
            }
        }
        self.step_level(l, systems, gis, integrator, dt)?;
        if l + 1 < self.levels.len() {
            for _ in 0..2 {
                self.advance_level(l + 1, systems, gis, integrator, dt / 2.0)?;
            }
            for &gi in gis {
                self.restrict_level(l + 1, gi)?;
            }
        }
        Ok(())
    }

    /// Move the refined regions to follow `centres`. Level 0 is untouched.
    /// On every finer level and time level, new points are prolonged from
    /// the (already regridded) coarser level, then points owned both before
    /// and after are copied bit-for-bit from the old data.
    pub fn regrid(&mut self, centres: &[CentreOfInterest]) -> Result<(), DriverError> {
        let h = RefinementHierarchy::build(
            &self.domain,
            centres,
            self.settings.nlevels,
            self.settings.interp,
            self.settings.buffer,
        )?;
        let old = std::mem::take(&mut self.levels);
        let mut old = old.into_iter();
        self.levels.push(old.next().expect("level 0 always exists"));
        for (l, old_lev) in (1..h.nlevels()).zip(old) {
            let mut lev = self.build_level(l, &h, old_lev.times.clone())?;
            lev.steps = old_lev.steps;
            for gi in 0..self.layout.groups().len() {
                for k in 0..lev.times.len() {
                    let t = lev.times[k];
                    let mut filled = Vec::with_capacity(lev.patches.len());
                    for p in &lev.patches {
                        let pts: Vec<Index3> = p.ext.points().collect();
                        let (v, n) = prolong_from(&self.levels[l - 1], l, gi, &self.layout, self.settings.interp, t, &pts, p.rank)?;
                        self.counts.prolong_messages += n;
                        filled.push(v);
                    }
                    for (p, vals) in lev.patches.iter_mut().zip(filled) {
                        p.storage[gi].levels[k] = vals;
                        for o in &old_lev.patches {
                            let x = o.owned.intersect(&p.owned);
                            if x.is_empty() {
                                continue;
                            }
                            for (dst, src) in p.storage[gi].levels[k].iter_mut().zip(&o.storage[gi].levels[k]) {
                                copy_region(src, &o.ext, dst, &p.ext, &x);
                            }
                        }
                    }
                }
            }
            self.levels.push(lev);
            for gi in 0..self.layout.groups().len() {
                self.sync_level(l, gi);
            }
        }
        self.hierarchy = h;
        self.settings.centres = centres.to_vec();
        Ok(())
    }
}

/// Same-level ghost fills on a refined level: every ghost box is filled
/// from each sibling's owned box it overlaps. Refined levels never touch
/// the outer boundary, so no wrapping or clamping is needed.
fn sibling_plan(patches: &[Patch]) -> ExchangePlan {
    let mut phase = Vec::new();
    for (di, p) in patches.iter().enumerate() {
        for gb in p.ext.subtract(&p.owned) {
            for (si, s) in patches.iter().enumerate() {
                if si == di {
                    continue;
                }
                let region = gb.intersect(&s.owned);
                if !region.is_empty() {
                    phase.push(Transfer {
                        src: si,
                        dst: di,
                        region,
                        map: [DimMap::Shift(0); 3],
                        local: false,
                    });
                }
            }
        }
    }
    ExchangePlan { phases: vec![phase] }
}

fn prolong_targets(patches: &[Patch], real: &Region) -> Vec<Vec<Index3>> {
    let mut siblings = Region::new();
    for p in patches {
        siblings.add(p.owned);
    }
    patches
        .iter()
        .map(|p| {
            let mut ghosts = Region::new();
            for b in p.ext.subtract(&p.owned) {
                ghosts.add(b);
            }
            let uncovered = ghosts.subtract(&siblings);
            let buffer = Region::from_box(p.owned).subtract(real);
            let mut out: Vec<Index3> = Vec::new();
            for r in [uncovered, buffer] {
                let mut pts: Vec<Index3> = r.boxes().iter().flat_map(|b| b.points()).collect();
                pts.sort_by_key(|q| [q[2], q[1], q[0]]);
                out.extend(pts);
            }
            out
        })
        .collect()
}

/// Interpolate group `gi` from `coarse` at time `t` onto the level-`l`
/// points `targets`. Coarse data are shipped as one message per coarse
/// patch overlapping the stencil window, already combined in time.
/// Returns the values `[var][target]` and the number of messages.
#[allow(clippy::too_many_arguments)]
fn prolong_from(
    coarse: &AmrLevel,
    l: usize,
    gi: usize,
    layout: &Layout,
    interp: InterpSpec,
    t: f64,
    targets: &[Index3],
    dest_rank: usize,
) -> Result<(Vec<Vec<f64>>, usize), DriverError> {
    let nvars = layout.groups()[gi].variables.len();
    if targets.is_empty() {
        return Ok((vec![Vec::new(); nvars], 0));
    }
    let st = Stencil1d::new(interp.spatial_order);
    let mut window = IBox::empty();
    for q in targets {
        let mut b = IBox::empty();
        for d in 0..3 {
            let (lo, hi) = st.span(q[d]);
            b.lo[d] = lo;
            b.hi[d] = hi;
        }
        window = window.hull(&b);
    }
    let ntl = coarse.times.len();
    let tw = time_weights(&coarse.times, t, interp.time_order.min(ntl.saturating_sub(1)))?;
    let single = tw.iter().position(|w| *w == 1.0).filter(|_| tw.iter().filter(|w| **w != 0.0).count() == 1);

    let mut mailbox = Mailbox::new();
    for (ci, c) in coarse.patches.iter().enumerate() {
        let x = window.intersect(&c.owned);
        if x.is_empty() {
            continue;
        }
        let st = &c.storage[gi].levels;
        let mut payload = Vec::with_capacity(x.volume() * nvars);
        for v in 0..nvars {
            for q in x.points() {
                let o = c.ext.offset(q);
                let val = match single {
                    Some(k) => st[k][v][o],
                    None => tw
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w != 0.0)
                        .map(|(k, w)| w * st[k][v][o])
                        .sum(),
                };
                payload.push(val);
            }
        }
        mailbox.send(HaloMessage {
            source: c.rank,
            dest: dest_rank,
            phase: PHASE_PROLONG,
            region_id: ci,
            region: x,
            payload,
        });
    }
    let nmsg = mailbox.totals().0;
    let wv = window.volume();
    let mut win = vec![vec![0.0; wv]; nvars];
    let mut covered = vec![false; wv];
    for msg in mailbox.drain_ordered() {
        let mut pos = 0;
        for var in win.iter_mut() {
            pos += crate::grid::unpack_region(&msg.payload[pos..], var, &window, &msg.region);
        }
        for q in msg.region.points() {
            covered[window.offset(q)] = true;
        }
    }

    let mut out = vec![Vec::with_capacity(targets.len()); nvars];
    for q in targets {
        let (sx, wx) = st.at(q[0]);
        let (sy, wy) = st.at(q[1]);
        let (sz, wz) = st.at(q[2]);
        for c in 0..wz.len() as i64 {
            for b in 0..wy.len() as i64 {
                for a in 0..wx.len() as i64 {
                    let p = [sx + a, sy + b, sz + c];
                    if !covered[window.offset(p)] {
                        return Err(DriverError::InsufficientCover { level: l, point: *q });
                    }
                }
            }
        }
        for (v, var) in win.iter().enumerate() {
            // start from the first term (not 0.0) so coincident points copy bitwise
            let mut acc: Option<f64> = None;
            for (c, wzc) in wz.iter().enumerate() {
                for (b, wyb) in wy.iter().enumerate() {
                    for (a, wxa) in wx.iter().enumerate() {
                        let p = [sx + a as i64, sy + b as i64, sz + c as i64];
                        let term = wxa * wyb * wzc * var[window.offset(p)];
                        acc = Some(acc.map_or(term, |s| s + term));
                    }
                }
            }
            out[v].push(acc.unwrap_or(0.0));
        }
    }
    Ok((out, nmsg))
}

impl Driver for Amr {
    fn name(&self) -> &'static str {
        "amr"
    }

    fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn nranks(&self) -> usize {
        self.nranks
    }

    fn nlevels(&self) -> usize {
        self.levels.len()
    }

    fn allocate(&mut self, groups: &[VariableGroup]) -> Result<(), DriverError> {
        let min_tl = self.settings.interp.time_order + 1;
        self.layout = Layout::new(groups, self.domain.ghost, min_tl)?;
        let depth = (0..groups.len()).map(|g| self.layout.stored_time_levels(g)).max().unwrap_or(min_tl);
        for (l, lev) in self.levels.iter_mut().enumerate() {
            for p in &mut lev.patches {
                p.storage = self.layout.new_storage(p.ext.volume());
            }
            let t0 = lev.times[0];
            let dt = if lev.times.len() > 1 { lev.times[0] - lev.times[1] } else { 0.0 };
            lev.times = (0..depth).map(|k| t0 - k as f64 * dt).collect();
            let _ = l;
        }
        Ok(())
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn patches(&self) -> Vec<&Patch> {
        self.levels.iter().flat_map(|l| l.patches.iter()).collect()
    }

    fn patches_mut(&mut self) -> Vec<&mut Patch> {
        self.levels.iter_mut().flat_map(|l| l.patches.iter_mut()).collect()
    }

    fn level_times(&self, level: usize) -> &[f64] {
        &self.levels[level].times
    }

    fn level_steps(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.steps).collect()
    }

    fn set_time(&mut self, t0: f64, dt0: f64) {
        for (l, lev) in self.levels.iter_mut().enumerate() {
            let dt = dt0 / (1u64 << l) as f64;
            let n = lev.times.len().max(1);
            lev.times = (0..n).map(|k| t0 - k as f64 * dt).collect();
        }
    }

    /// Refresh ghosts of `group` on every level, coarse to fine: same-level
    /// copies first, then refinement ghosts and buffer from the coarser level.
    fn sync(&mut self, group: &str) -> Result<(), DriverError> {
        let gi = self.layout.group_index(group)?;
        for l in 0..self.levels.len() {
            if l > 0 {
                let t = self.levels[l].times[0];
                self.prolong_level(l, gi, t)?;
            }
            self.sync_level(l, gi);
        }
        Ok(())
    }

    /// Like [`Driver::sync`], but buffer points (owned, normally prolonged
    /// before each step) keep their values.
    fn refresh_ghosts(&mut self, group: &str) -> Result<(), DriverError> {
        let gi = self.layout.group_index(group)?;
        for l in 0..self.levels.len() {
            if l > 0 {
                let t = self.levels[l].times[0];
                self.prolong_targets_where(l, gi, t, true)?;
            }
            self.sync_level(l, gi);
        }
        Ok(())
    }

    fn for_each_block(&mut self, f: &BlockFn<'_>) -> Result<(), DriverError> {
        let mut items = Vec::new();
        for lev in &mut self.levels {
            let AmrLevel { patches, times, .. } = lev;
            let times = times.as_slice();
            items.extend(patches.iter_mut().map(|p| (p, times)));
        }
        run_blocks(&self.domain, &self.layout, items, f, self.execution)
    }

    fn evolve(&mut self, systems: &[EvolvedSystem<'_>], integrator: &dyn Integrator, dt0: f64) -> Result<(), DriverError> {
        let gis = systems
            .iter()
            .map(|s| self.layout.group_index(s.group))
            .collect::<Result<Vec<_>, _>>()?;
        self.advance_level(0, systems, &gis, integrator, dt0)
    }

    /// Reductions run over level 0, which covers the whole domain once.
    fn reduce(&self, var: &str, op: ReduceOp) -> Result<f64, DriverError> {
        let r = self.layout.var(var)?;
        let ps: Vec<&Patch> = self.levels[0].patches.iter().collect();
        Ok(reduce_patches(&ps, r, op))
    }

    fn interpolate(&self, var: &str, points: &[[f64; 3]], order: usize) -> Result<Vec<Result<f64, InterpError>>, DriverError> {
        let r = self.layout.var(var)?;
        let ps: Vec<&Patch> = self.levels[0].patches.iter().collect();
        interpolate_points(&self.domain, &ps, r, points, order)
    }

    fn describe(&self) -> DriverDesc {
        DriverDesc {
            driver: "amr".into(),
            domain: self.domain.clone(),
            strategy: Neighbors.name().into(),
            levels: self
                .levels
                .iter()
                .zip(self.hierarchy.boxes())
                .map(|(lev, boxes)| LevelDesc {
                    boxes,
                    times: lev.times.clone(),
                    steps: lev.steps,
                })
                .collect(),
            amr: Some(self.settings.clone()),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
