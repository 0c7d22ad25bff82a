//! One block per rank: choosing the process grid and cutting the domain.

use crate::driver::DriverError;
use crate::grid::{Boundary, DomainSpec, IBox};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessTopology {
    pub nranks: usize,
    pub dims: [usize; 3],
}

impl ProcessTopology {
    /// Ranks are numbered x-fastest over the process grid.
    pub fn rank_of(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn coords_of(&self, rank: usize) -> [usize; 3] {
        let [px, py, _] = self.dims;
        [rank % px, (rank / px) % py, rank / (px * py)]
    }
}

/// Neighbour in one of the 26 directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighbor {
    Rank(usize),
    /// The direction crosses a non-periodic outer face.
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub rank: usize,
    pub coords: [usize; 3],
    pub owned: IBox,
    pub ext: IBox,
    /// Indexed by `(dx+1) + 3*(dy+1) + 9*(dz+1)`; the centre entry is the block itself.
    pub neighbors: [Neighbor; 27],
}

impl Block {
    pub fn neighbor(&self, dir: [i64; 3]) -> Neighbor {
        self.neighbors[direction_index(dir)]
    }
}

pub fn direction_index(dir: [i64; 3]) -> usize {
    ((dir[0] + 1) + 3 * (dir[1] + 1) + 9 * (dir[2] + 1)) as usize
}

/// The 26 non-zero directions, x-fastest.
pub fn directions() -> impl Iterator<Item = [i64; 3]> {
    (0..27)
        .map(|n| [n % 3 - 1, (n / 3) % 3 - 1, n / 9 - 1])
        .filter(|d| *d != [0, 0, 0])
}

/// Cut `n` points into `p` contiguous pieces, the first `n % p` one larger.
pub fn split_extent(n: usize, p: usize) -> Vec<(i64, i64)> {
    let base = n / p;
    let extra = n % p;
    let mut lo = 0i64;
    (0..p)
        .map(|i| {
            let len = (base + usize::from(i < extra)) as i64;
            let r = (lo, lo + len);
            lo += len;
            r
        })
        .collect()
}

/// Inter-block cut area of a process grid: each of the `p_d - 1` internal
/// cuts normal to `d` has the area of a full cross-section.
pub fn cut_surface(points: [usize; 3], dims: [usize; 3]) -> u128 {
    (0..3)
        .map(|d| {
            let area: u128 = (0..3).filter(|e| *e != d).map(|e| points[e] as u128).product();
            (dims[d] as u128 - 1) * area
        })
        .sum()
}

pub fn factorizations(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for px in 1..=n {
        if !n.is_multiple_of(px) {
            continue;
        }
        for py in 1..=n / px {
            if (n / px).is_multiple_of(py) {
                out.push([px, py, n / px / py]);
            }
        }
    }
    out
}

pub fn decompose(domain: &DomainSpec, nranks: usize) -> Result<(ProcessTopology, Vec<Block>), DriverError> {
    domain.validate().map_err(|e| DriverError::Sizing(e.to_string()))?;
    if nranks == 0 {
        return Err(DriverError::Sizing("need at least one rank".into()));
    }
    let min_extent = domain.ghost.max(1);
    let feasible = |f: &[usize; 3]| (0..3).all(|d| domain.points[d] / f[d] >= min_extent);
    let best = factorizations(nranks)
        .into_iter()
        .filter(feasible)
        .min_by_key(|f| (cut_surface(domain.points, *f), *f));
    let Some(dims) = best else {
        const AXES: [char; 3] = ['x', 'y', 'z'];
        let limits: Vec<String> = (0..3)
            .map(|d| format!("{}-extent {} splits at most {}-fold", AXES[d], domain.points[d], domain.points[d] / min_extent))
            .collect();
        return Err(DriverError::Sizing(format!(
            "no factorization of {nranks} ranks leaves every block {min_extent} points per axis ({})",
            limits.join(", ")
        )));
    };
    let topo = ProcessTopology { nranks, dims };
    let cuts: Vec<Vec<(i64, i64)>> = (0..3).map(|d| split_extent(domain.points[d], dims[d])).collect();
    let g = domain.ghost as i64;
    let blocks = (0..nranks)
        .map(|rank| {
            let c = topo.coords_of(rank);
            let owned = IBox::new(
                [cuts[0][c[0]].0, cuts[1][c[1]].0, cuts[2][c[2]].0],
                [cuts[0][c[0]].1, cuts[1][c[1]].1, cuts[2][c[2]].1],
            );
            let mut neighbors = [Neighbor::Boundary; 27];
            for (n, slot) in neighbors.iter_mut().enumerate() {
                let dir = [n as i64 % 3 - 1, (n as i64 / 3) % 3 - 1, n as i64 / 9 - 1];
                *slot = neighbor_rank(&topo, domain.boundary, c, dir).map_or(Neighbor::Boundary, Neighbor::Rank);
            }
            Block { rank, coords: c, owned, ext: owned.grow(g), neighbors }
        })
        .collect();
    Ok((topo, blocks))
}

fn neighbor_rank(topo: &ProcessTopology, boundary: Boundary, c: [usize; 3], dir: [i64; 3]) -> Option<usize> {
    let mut n = [0usize; 3];
    for d in 0..3 {
        let p = topo.dims[d] as i64;
        let x = c[d] as i64 + dir[d];
        n[d] = if (0..p).contains(&x) {
            x as usize
        } else if boundary == Boundary::Periodic {
            x.rem_euclid(p) as usize
        } else {
            return None;
        };
    }
    Some(topo.rank_of(n))
}
