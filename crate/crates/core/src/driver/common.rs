//! Pieces shared by both drivers: reductions, point interpolation, block
//! iteration and right-hand-side evaluation over a level.

use super::{BlockFn, BlockView, DriverError, Execution, Layout, ReduceOp, VarRef};
use crate::grid::{Boundary, DomainSpec, Patch, PatchGeom};
use crate::mol::{FieldSet, MolError};
use crate::physics::Physics;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain([f64; 3]),
    #[error("interpolation stencil for {0:?} leaves the owning block")]
    Stencil([f64; 3]),
}

/// Reduce the current time level of `var` over the owned points of
/// `patches`, visiting them in the given (rank-major) order.
pub fn reduce_patches(patches: &[&Patch], var: VarRef, op: ReduceOp) -> f64 {
    let mut n = 0usize;
    let mut acc = match op {
        ReduceOp::Min => f64::INFINITY,
        ReduceOp::Max => f64::NEG_INFINITY,
        _ => 0.0,
    };
    for p in patches {
        let data = &p.storage[var.group].levels[0][var.var];
        for q in p.owned.points() {
            let x = data[p.ext.offset(q)];
            n += 1;
            acc = match op {
                ReduceOp::Sum => acc + x,
                ReduceOp::Min => acc.min(x),
                ReduceOp::Max => acc.max(x),
                ReduceOp::L1 => acc + x.abs(),
                ReduceOp::L2 => acc + x * x,
                ReduceOp::Linf => acc.max(x.abs()),
                ReduceOp::Count => acc,
            };
        }
    }
    match op {
        ReduceOp::Count => n as f64,
        ReduceOp::L1 if n > 0 => acc / n as f64,
        ReduceOp::L2 if n > 0 => (acc / n as f64).sqrt(),
        _ => acc,
    }
}

/// Lagrange weights of the nodes `s, s+1, ..., s+order` at `xi`.
pub(crate) fn lagrange_weights(s: i64, order: usize, xi: f64) -> Vec<f64> {
    (0..=order)
        .map(|j| {
            let xj = (s + j as i64) as f64;
            (0..=order)
                .filter(|m| *m != j)
                .map(|m| {
                    let xm = (s + m as i64) as f64;
                    (xi - xm) / (xj - xm)
                })
                .product()
        })
        .collect()
}

/// Interpolate `var` at physical `points` on the coarsest-level blocks
/// `patches` (rank order, ghosts valid). Each point is evaluated by the
/// lowest-ranked block whose closed owned box contains it.
pub fn interpolate_points(
    domain: &DomainSpec,
    patches: &[&Patch],
    var: VarRef,
    points: &[[f64; 3]],
    order: usize,
) -> Result<Vec<Result<f64, InterpError>>, DriverError> {
    if ![1, 3, 5].contains(&order) {
        return Err(DriverError::Config(format!("interpolation order must be 1, 3 or 5, got {order}")));
    }
    Ok(points.iter().map(|x| interpolate_one(domain, patches, var, *x, order)).collect())
}

fn interpolate_one(domain: &DomainSpec, patches: &[&Patch], var: VarRef, x: [f64; 3], order: usize) -> Result<f64, InterpError> {
    const SNAP: f64 = 1e-9;
    let periodic = domain.boundary == Boundary::Periodic;
    let mut xi = [0.0; 3];
    for d in 0..3 {
        let n = domain.points[d] as f64;
        let mut t = (x[d] - domain.origin[d]) / domain.spacing[d];
        if (t - t.round()).abs() < SNAP {
            t = t.round();
        }
        let upper = if periodic { n } else { n - 1.0 };
        if !(t >= 0.0 && (t < upper || (!periodic && t == upper))) {
            return Err(InterpError::OutsideDomain(x));
        }
        xi[d] = t;
    }
    let owner = patches
        .iter()
        .find(|p| (0..3).all(|d| xi[d] >= p.owned.lo[d] as f64 && xi[d] <= p.owned.hi[d] as f64))
        .ok_or(InterpError::OutsideDomain(x))?;
    let mut start = [0i64; 3];
    let mut weights: [Vec<f64>; 3] = Default::default();
    for d in 0..3 {
        let i0 = (xi[d].floor() as i64).clamp(owner.owned.lo[d], owner.owned.hi[d] - 1);
        let mut s = i0 - (order as i64 - 1) / 2;
        if !periodic {
            s = s.clamp(0, domain.points[d] as i64 - 1 - order as i64);
        }
        if s < owner.ext.lo[d] || s + order as i64 >= owner.ext.hi[d] {
            return Err(InterpError::Stencil(x));
        }
        start[d] = s;
        weights[d] = lagrange_weights(s, order, xi[d]);
    }
    let data = &owner.storage[var.group].levels[0][var.var];
    let mut sum = 0.0;
    for (c, wz) in weights[2].iter().enumerate() {
        for (b, wy) in weights[1].iter().enumerate() {
            for (a, wx) in weights[0].iter().enumerate() {
                let p = [start[0] + a as i64, start[1] + b as i64, start[2] + c as i64];
                sum += wx * wy * wz * data[owner.ext.offset(p)];
            }
        }
    }
    Ok(sum)
}

pub(crate) fn geom_of(domain: &DomainSpec, p: &Patch) -> PatchGeom {
    PatchGeom {
        level: p.level,
        owned: p.owned,
        ext: p.ext,
        origin: domain.origin,
        spacing: domain.level_spacing(p.level),
    }
}

/// Copy of the current time level of group `gi` on each patch.
pub(crate) fn current_state(patches: &[Patch], gi: usize) -> FieldSet {
    patches.iter().map(|p| p.storage[gi].levels[0].clone()).collect()
}

/// Move the current time level of group `gi` out of each patch (no copy).
pub(crate) fn take_current(patches: &mut [Patch], gi: usize) -> FieldSet {
    patches.iter_mut().map(|p| std::mem::take(&mut p.storage[gi].levels[0])).collect()
}

/// Inverse of [`take_current`].
pub(crate) fn put_current(patches: &mut [Patch], gi: usize, data: FieldSet) {
    for (p, d) in patches.iter_mut().zip(data) {
        p.storage[gi].levels[0] = d;
    }
}

/// Evaluate `physics` on every block of a level, in parallel if requested.
pub(crate) fn level_rhs(
    physics: &dyn Physics,
    geoms: &[PatchGeom],
    state: &FieldSet,
    out: &mut FieldSet,
    execution: Execution,
) -> Result<(), MolError> {
    let one = |(i, k): (usize, &mut Vec<Vec<f64>>)| {
        physics
            .rhs(&geoms[i], &state[i], k)
            .map_err(|e| MolError::Rhs(format!("block on level {} at {}: {e}", geoms[i].level, geoms[i].owned)))
    };
    match execution {
        Execution::Sequential => out.iter_mut().enumerate().try_for_each(one),
        Execution::Parallel => out.par_iter_mut().enumerate().try_for_each(one),
    }
}

/// Run a block callable over `patches`, each with the clock of its level.
pub(crate) fn run_blocks(
    domain: &DomainSpec,
    layout: &Layout,
    patches: Vec<(&mut Patch, &[f64])>,
    f: &BlockFn<'_>,
    execution: Execution,
) -> Result<(), DriverError> {
    let one = |(patch, times): (&mut Patch, &[f64])| {
        let geom = geom_of(domain, patch);
        let id = patch.id;
        let mut view = BlockView::new(patch, geom, layout, times);
        f(&mut view).map_err(|message| DriverError::Block { id, message })
    };
    match execution {
        Execution::Sequential => patches.into_iter().try_for_each(one),
        // collect so that the reported failure is the lowest block id
        Execution::Parallel => {
            let results: Vec<_> = patches.into_par_iter().map(one).collect();
            results.into_iter().collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_weights_reproduce_cubics() {
        let w = lagrange_weights(-1, 3, 0.37);
        let f = |x: f64| 2.0 - x + 0.5 * x * x * x;
        let v: f64 = (0..4).map(|j| w[j] * f((j as i64 - 1) as f64)).sum();
        assert!((v - f(0.37)).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_at_a_node_are_exact() {
        let w = lagrange_weights(3, 5, 5.0);
        assert_eq!(w, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }
}
