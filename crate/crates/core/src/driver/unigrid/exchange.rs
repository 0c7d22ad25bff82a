//! Ghost-zone exchange strategies.
//!
//! A strategy only *plans*: it lists, phase by phase, which region of which
//! block's ghost zone is filled from where. [`execute`] then packs every
//! transfer of a phase into an immutable [`HaloMessage`], delivers the
//! messages in (phase, source, region) order and unpacks them. Filling a
//! ghost point across a non-periodic outer face is a local copy, not a
//! message.

use super::decompose::{directions, Block, ProcessTopology};
use crate::driver::transport::{HaloMessage, Mailbox};
use crate::driver::Execution;
use crate::grid::{unpack_region, Boundary, DomainSpec, IBox};
use crate::mol::FieldSet;
use crate::registry::Registry;
use rayon::prelude::*;

/// How a destination index maps onto the source block along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimMap {
    /// Source index = destination index + shift (periodic wrap uses ±N).
    Shift(i64),
    /// Every destination index reads this source index (outer-copy).
    Clamp(i64),
}

impl DimMap {
    fn apply(self, i: i64) -> i64 {
        match self {
            DimMap::Shift(s) => i + s,
            DimMap::Clamp(c) => c,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub src: usize,
    pub dst: usize,
    /// Ghost region in the destination's index space.
    pub region: IBox,
    pub map: [DimMap; 3],
    /// Outer-boundary fill from the block's own data.
    pub local: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExchangePlan {
    pub phases: Vec<Vec<Transfer>>,
}

impl ExchangePlan {
    pub fn messages(&self) -> impl Iterator<Item = (usize, &Transfer)> {
        self.phases
            .iter()
            .enumerate()
            .flat_map(|(p, ts)| ts.iter().filter(|t| !t.local).map(move |t| (p, t)))
    }
}

/// One delivered message, as recorded in [`ExchangeStats::log`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageRecord {
    pub source: usize,
    pub dest: usize,
    pub phase: u32,
    pub region: IBox,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExchangeStats {
    pub messages: usize,
    pub local_fills: usize,
    /// Values carried by messages (points × variables).
    pub payload_values: usize,
    pub sent_per_rank: Vec<usize>,
    pub log: Vec<MessageRecord>,
}

pub trait ExchangeStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn plan(&self, domain: &DomainSpec, topo: &ProcessTopology, blocks: &[Block]) -> ExchangePlan;
}

/// Three phases (x, then y, then z). Phase `d` fills the two ghost slabs
/// normal to `d`; slabs span the ghost-extended range of the axes already
/// exchanged, so edges and corners arrive transitively.
#[derive(Clone, Copy, Debug, Default)]
pub struct Directional;

/// A single phase with up to 26 messages per block, one per face, edge
/// and corner neighbour.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neighbors;

impl ExchangeStrategy for Directional {
    fn name(&self) -> &'static str {
        "directional"
    }

    fn plan(&self, domain: &DomainSpec, topo: &ProcessTopology, blocks: &[Block]) -> ExchangePlan {
        let g = domain.ghost as i64;
        let mut phases = Vec::with_capacity(3);
        for d in 0..3 {
            let mut phase = Vec::new();
            for b in blocks {
                for side in [-1i64, 1] {
                    let mut region = b.owned;
                    for e in 0..d {
                        region.lo[e] = b.ext.lo[e];
                        region.hi[e] = b.ext.hi[e];
                    }
                    if side < 0 {
                        region.lo[d] = b.owned.lo[d] - g;
                        region.hi[d] = b.owned.lo[d];
                    } else {
                        region.lo[d] = b.owned.hi[d];
                        region.hi[d] = b.owned.hi[d] + g;
                    }
                    let mut map = [DimMap::Shift(0); 3];
                    let p = topo.dims[d] as i64;
                    let n = domain.points[d] as i64;
                    let x = b.coords[d] as i64 + side;
                    let mut c = b.coords;
                    let local = if (0..p).contains(&x) {
                        c[d] = x as usize;
                        false
                    } else if domain.boundary == Boundary::Periodic {
                        c[d] = x.rem_euclid(p) as usize;
                        map[d] = DimMap::Shift(-side * n);
                        false
                    } else {
                        map[d] = DimMap::Clamp(if side < 0 { b.owned.lo[d] } else { b.owned.hi[d] - 1 });
                        true
                    };
                    phase.push(Transfer { src: topo.rank_of(c), dst: b.rank, region, map, local });
                }
            }
            phases.push(phase);
        }
        ExchangePlan { phases }
    }
}

impl ExchangeStrategy for Neighbors {
    fn name(&self) -> &'static str {
        "neighbors"
    }

    fn plan(&self, domain: &DomainSpec, topo: &ProcessTopology, blocks: &[Block]) -> ExchangePlan {
        let g = domain.ghost as i64;
        let mut phase = Vec::new();
        for b in blocks {
            for dir in directions() {
                let mut region = b.owned;
                let mut map = [DimMap::Shift(0); 3];
                let mut c = b.coords;
                let mut crosses_neighbor = false;
                for d in 0..3 {
                    if dir[d] == 0 {
                        continue;
                    }
                    if dir[d] < 0 {
                        region.lo[d] = b.owned.lo[d] - g;
                        region.hi[d] = b.owned.lo[d];
                    } else {
                        region.lo[d] = b.owned.hi[d];
                        region.hi[d] = b.owned.hi[d] + g;
                    }
                    let p = topo.dims[d] as i64;
                    let n = domain.points[d] as i64;
                    let x = b.coords[d] as i64 + dir[d];
                    if (0..p).contains(&x) {
                        c[d] = x as usize;
                        crosses_neighbor = true;
                    } else if domain.boundary == Boundary::Periodic {
                        c[d] = x.rem_euclid(p) as usize;
                        map[d] = DimMap::Shift(-dir[d] * n);
                        crosses_neighbor = true;
                    } else {
                        map[d] = DimMap::Clamp(if dir[d] < 0 { b.owned.lo[d] } else { b.owned.hi[d] - 1 });
                    }
                }
                phase.push(Transfer {
                    src: topo.rank_of(c),
                    dst: b.rank,
                    region,
                    map,
                    local: !crosses_neighbor,
                });
            }
        }
        ExchangePlan { phases: vec![phase] }
    }
}

pub fn strategies() -> Registry<dyn ExchangeStrategy> {
    let mut r: Registry<dyn ExchangeStrategy> = Registry::new("exchange strategy");
    r.register_simple("directional", || Box::new(Directional));
    r.register_simple("neighbors", || Box::new(Neighbors));
    r
}

/// Pack the source values of `t` for every variable, x-fastest per variable.
fn pack(t: &Transfer, src_ext: &IBox, src: &[Vec<f64>]) -> Vec<f64> {
    let r = t.region;
    let nx = r.shape()[0];
    let mut out = Vec::with_capacity(r.volume() * src.len());
    for var in src {
        for k in r.lo[2]..r.hi[2] {
            let kk = t.map[2].apply(k);
            for j in r.lo[1]..r.hi[1] {
                let jj = t.map[1].apply(j);
                match t.map[0] {
                    DimMap::Shift(s) => {
                        let o = src_ext.offset([r.lo[0] + s, jj, kk]);
                        out.extend_from_slice(&var[o..o + nx]);
                    }
                    DimMap::Clamp(c) => {
                        let v = var[src_ext.offset([c, jj, kk])];
                        out.extend(std::iter::repeat_n(v, nx));
                    }
                }
            }
        }
    }
    out
}

/// Where the blocks a plan refers to live: their ghost-extended boxes and
/// owning ranks, indexed like the plan's `src`/`dst`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Placement {
    pub exts: Vec<IBox>,
    pub ranks: Vec<usize>,
    pub nranks: usize,
}

impl Placement {
    pub fn of_blocks(blocks: &[Block]) -> Self {
        Self {
            exts: blocks.iter().map(|b| b.ext).collect(),
            ranks: blocks.iter().map(|b| b.rank).collect(),
            nranks: blocks.len(),
        }
    }
}

/// Fill the ghost zones of `data` (`[block][var][point]`) according to `plan`.
pub fn execute(plan: &ExchangePlan, place: &Placement, data: &mut FieldSet, execution: Execution) -> ExchangeStats {
    let mut stats = ExchangeStats {
        sent_per_rank: vec![0; place.nranks],
        ..Default::default()
    };
    for (phase, transfers) in plan.phases.iter().enumerate() {
        let packed: Vec<(usize, bool, HaloMessage)> = {
            let view: &FieldSet = data;
            let make = |(id, t): (usize, &Transfer)| {
                let msg = HaloMessage {
                    source: place.ranks[t.src],
                    dest: place.ranks[t.dst],
                    phase: phase as u32,
                    region_id: id,
                    region: t.region,
                    payload: pack(t, &place.exts[t.src], &view[t.src]),
                };
                (t.dst, t.local, msg)
            };
            match execution {
                Execution::Sequential => transfers.iter().enumerate().map(make).collect(),
                Execution::Parallel => transfers.par_iter().enumerate().map(make).collect(),
            }
        };
        let mut mailbox = Mailbox::new();
        let mut locals = Vec::new();
        // delivery needs the destination block, which ranks alone do not name
        let mut dst_of = std::collections::HashMap::new();
        for (dst, local, msg) in packed {
            dst_of.insert((msg.phase, msg.region_id), dst);
            if local {
                locals.push(msg);
            } else {
                stats.sent_per_rank[msg.source] += 1;
                stats.log.push(MessageRecord {
                    source: msg.source,
                    dest: msg.dest,
                    phase: msg.phase,
                    region: msg.region,
                });
                mailbox.send(msg);
            }
        }
        let (n, values) = mailbox.totals();
        stats.messages += n;
        stats.payload_values += values;
        stats.local_fills += locals.len();
        for msg in mailbox.drain_ordered().into_iter().chain(locals) {
            let dst = dst_of[&(msg.phase, msg.region_id)];
            let ext = place.exts[dst];
            let mut pos = 0;
            for var in data[dst].iter_mut() {
                pos += unpack_region(&msg.payload[pos..], var, &ext, &msg.region);
            }
        }
    }
    stats
}
