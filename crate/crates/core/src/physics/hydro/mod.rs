//! Newtonian compressible Euler equations in flux-conservative form.
//!
//! Grid points are treated as cell centres. Each direction is reconstructed
//! independently and the flux differences of the three directions are
//! summed into one right-hand side per method-of-lines substep.

mod reconstruct;
mod riemann;
mod state;

pub use reconstruct::{reconstructions, PlmMinmod, Ppm, Reconstruction};
pub use riemann::{riemann_solvers, Hlle, RiemannSolver};
pub use state::{
    con2prim, physical_flux, prim2con, ConservedState, EquationOfState, FloorLog, Floors, NonFiniteState,
    PrimitiveState,
};

use super::{check_ghosts, Physics, PhysicsError};
use crate::grid::{DomainSpec, PatchGeom};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub const VARS: [&str; 5] = ["dens", "momx", "momy", "momz", "tau"];
pub const GHOST_WIDTH: usize = 3;

pub struct Euler {
    pub eos: EquationOfState,
    pub floors: Floors,
    pub recon: Arc<dyn Reconstruction>,
    pub solver: Arc<dyn RiemannSolver>,
    pub floor_log: Arc<FloorLog>,
}

impl fmt::Debug for Euler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Euler")
            .field("eos", &self.eos)
            .field("floors", &self.floors)
            .field("recon", &self.recon.name())
            .field("solver", &self.solver.name())
            .finish()
    }
}

impl Default for Euler {
    fn default() -> Self {
        Self {
            eos: EquationOfState::default(),
            floors: Floors::default(),
            recon: Arc::new(Ppm),
            solver: Arc::new(Hlle),
            floor_log: Arc::new(FloorLog::default()),
        }
    }
}

impl Euler {
    pub fn new(gamma: f64, recon: &str, rho_floor: f64) -> Result<Self, PhysicsError> {
        if !(gamma > 1.0) {
            return Err(PhysicsError::BadParams(format!("adiabatic index must exceed 1, got {gamma}")));
        }
        if !(rho_floor > 0.0) {
            return Err(PhysicsError::BadParams(format!("density floor must be positive, got {rho_floor}")));
        }
        let recon = reconstructions()
            .create(recon)
            .map_err(|e| PhysicsError::BadParams(e.to_string()))?;
        Ok(Self {
            eos: EquationOfState { gamma },
            floors: Floors { rho: rho_floor, ..Floors::default() },
            recon: Arc::from(recon),
            ..Self::default()
        })
    }

    fn prim_at(&self, state: &[Vec<f64>], idx: usize) -> Result<PrimitiveState, PhysicsError> {
        let u = ConservedState {
            d: state[0][idx],
            s: [state[1][idx], state[2][idx], state[3][idx]],
            e: state[4][idx],
        };
        con2prim(&u, &self.eos, &self.floors, Some(&self.floor_log)).map_err(|_| PhysicsError::NonFinite([idx as i64, 0, 0]))
    }

    fn floored(&self, mut p: PrimitiveState) -> PrimitiveState {
        if p.rho < self.floors.rho {
            p.rho = self.floors.rho;
            self.floor_log.record();
        }
        if p.p < self.floors.p {
            p.p = self.floors.p;
            self.floor_log.record();
        }
        p
    }
}

impl Physics for Euler {
    fn name(&self) -> &'static str {
        "hydro"
    }

    fn var_names(&self) -> &'static [&'static str] {
        &VARS
    }

    fn stencil_radius(&self) -> usize {
        self.recon.radius() + 1
    }

    fn max_speed(&self, geom: &PatchGeom, state: &[Vec<f64>]) -> f64 {
        let mut s: f64 = 0.0;
        for p in geom.owned.points() {
            if let Ok(prim) = self.prim_at(state, geom.ext.offset(p)) {
                let cs = self.eos.sound_speed(&prim);
                for v in prim.v {
                    s = s.max(v.abs() + cs);
                }
            }
        }
        s
    }

    fn rhs(&self, geom: &PatchGeom, state: &[Vec<f64>], out: &mut [Vec<f64>]) -> Result<(), PhysicsError> {
        check_ghosts(geom, self.stencil_radius())?;
        let ext = geom.ext;
        let owned = geom.owned;
        let mut prims = Vec::with_capacity(ext.volume());
        for p in ext.points() {
            let idx = ext.offset(p);
            let prim = self.prim_at(state, idx).map_err(|_| PhysicsError::NonFinite(p))?;
            prims.push([prim.rho, prim.v[0], prim.v[1], prim.v[2], prim.p]);
        }
        let strides = ext.strides();
        let eshape = ext.shape();
        for d in 0..3 {
            let (e1, e2) = match d {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let n = eshape[d];
            let first = (owned.lo[d] - ext.lo[d]) as usize;
            let last = first + owned.shape()[d];
            let inv_h = 1.0 / geom.spacing[d];
            let mut q = vec![vec![0.0; n]; 5];
            let mut lower = vec![vec![0.0; n]; 5];
            let mut upper = vec![vec![0.0; n]; 5];
            let mut flux = vec![[0.0; 5]; n];
            for b in owned.lo[e2]..owned.hi[e2] {
                for a in owned.lo[e1]..owned.hi[e1] {
                    let mut start = [0i64; 3];
                    start[d] = ext.lo[d];
                    start[e1] = a;
                    start[e2] = b;
                    let base = ext.offset(start);
                    for m in 0..n {
                        let pr = &prims[base + m * strides[d]];
                        for c in 0..5 {
                            q[c][m] = pr[c];
                        }
                    }
                    for c in 0..5 {
                        self.recon.reconstruct(&q[c], &mut lower[c], &mut upper[c]);
                    }
                    // flux[m] sits on the face between cells m and m + 1
                    for m in (first - 1)..last {
                        let left = self.floored(PrimitiveState {
                            rho: upper[0][m],
                            v: [upper[1][m], upper[2][m], upper[3][m]],
                            p: upper[4][m],
                        });
                        let right = self.floored(PrimitiveState {
                            rho: lower[0][m + 1],
                            v: [lower[1][m + 1], lower[2][m + 1], lower[3][m + 1]],
                            p: lower[4][m + 1],
                        });
                        flux[m] = self.solver.flux(&left, &right, d, &self.eos);
                    }
                    for m in first..last {
                        let idx = base + m * strides[d];
                        for c in 0..5 {
                            out[c][idx] -= (flux[m][c] - flux[m - 1][c]) * inv_h;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Hydro initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HydroInit {
    Uniform {
        state: PrimitiveState,
    },
    /// Two constant states separated by the plane `x[axis] = interface`.
    Shocktube {
        axis: usize,
        interface: f64,
        left: PrimitiveState,
        right: PrimitiveState,
    },
    /// Advected sinusoidal density perturbation in pressure equilibrium.
    DensityWave {
        amplitude: f64,
        velocity: [f64; 3],
        origin: [f64; 3],
        periods: [f64; 3],
    },
}

pub const SOD_LEFT: PrimitiveState = PrimitiveState { rho: 1.0, v: [0.0; 3], p: 1.0 };
pub const SOD_RIGHT: PrimitiveState = PrimitiveState { rho: 0.125, v: [0.0; 3], p: 0.1 };

/// Sod states with the discontinuity at the domain midpoint along `axis`.
///
/// Points are cell centres, so the domain spans half a cell beyond the
/// first and last point.
pub fn shocktube_init(axis: usize, domain: &DomainSpec) -> HydroInit {
    let mid = domain.origin[axis] + 0.5 * (domain.points[axis] as f64 - 1.0) * domain.spacing[axis];
    HydroInit::Shocktube {
        axis,
        interface: mid,
        left: SOD_LEFT,
        right: SOD_RIGHT,
    }
}

impl HydroInit {
    pub fn eval(&self, x: [f64; 3]) -> PrimitiveState {
        match self {
            HydroInit::Uniform { state } => *state,
            HydroInit::Shocktube { axis, interface, left, right } => {
                if x[*axis] < *interface {
                    *left
                } else {
                    *right
                }
            }
            HydroInit::DensityWave { amplitude, velocity, origin, periods } => {
                let mut phase = 0.0;
                for d in 0..3 {
                    phase += 2.0 * PI * (x[d] - origin[d]) / periods[d];
                }
                PrimitiveState {
                    rho: 1.0 + amplitude * phase.sin(),
                    v: *velocity,
                    p: 1.0,
                }
            }
        }
    }

    pub fn conserved(&self, x: [f64; 3], eos: &EquationOfState) -> [f64; 5] {
        prim2con(&self.eval(x), eos).to_array()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, IBox};

    fn geom(shape: [i64; 3], h: f64) -> PatchGeom {
        let owned = IBox::new([0; 3], shape);
        PatchGeom {
            level: 0,
            owned,
            ext: owned.grow(3),
            origin: [0.5 * h; 3],
            spacing: [h; 3],
        }
    }

    fn fill(g: &PatchGeom, init: &HydroInit, eos: &EquationOfState) -> Vec<Vec<f64>> {
        let mut s = vec![vec![0.0; g.npoints()]; 5];
        for p in g.ext.points() {
            let u = init.conserved(g.coord(p), eos);
            for c in 0..5 {
                s[c][g.ext.offset(p)] = u[c];
            }
        }
        s
    }

    #[test]
    fn uniform_state_has_zero_rhs() {
        let e = Euler::default();
        let g = geom([4, 5, 6], 0.1);
        let init = HydroInit::Uniform {
            state: PrimitiveState { rho: 1.3, v: [0.2, -0.1, 0.4], p: 0.7 },
        };
        let s = fill(&g, &init, &e.eos);
        let mut out = vec![vec![0.0; g.npoints()]; 5];
        e.rhs(&g, &s, &mut out).unwrap();
        assert!(out.iter().flatten().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn planar_problem_has_no_transverse_flux_differences() {
        let e = Euler::default();
        let g = geom([12, 4, 4], 0.1);
        let init = HydroInit::Shocktube { axis: 0, interface: 0.6, left: SOD_LEFT, right: SOD_RIGHT };
        let s = fill(&g, &init, &e.eos);
        let mut out = vec![vec![0.0; g.npoints()]; 5];
        e.rhs(&g, &s, &mut out).unwrap();
        for p in g.owned.points() {
            let i = g.ext.offset(p);
            assert_eq!(out[2][i], 0.0);
            assert_eq!(out[3][i], 0.0);
            let row = g.ext.offset([p[0], 0, 0]);
            for c in 0..5 {
                assert_eq!(out[c][i], out[c][row]);
            }
        }
    }

    #[test]
    fn shocktube_orientation() {
        let d = DomainSpec::cube(8, 0.0625, 0.125, Boundary::OuterCopy, 3);
        let HydroInit::Shocktube { interface, .. } = shocktube_init(0, &d) else { panic!() };
        assert_eq!(interface, 0.5);
        let x = shocktube_init(0, &d);
        assert_eq!(x.eval([0.1, 0.9, 0.9]), SOD_LEFT);
        assert_eq!(x.eval([0.9, 0.1, 0.1]), SOD_RIGHT);
        let u = prim2con(&x.eval([0.0; 3]), &EquationOfState::default()).to_array();
        for (a, b) in u.iter().zip([1.0, 0.0, 0.0, 0.0, 2.5]) {
            assert!((a - b).abs() < 1e-14);
        }
        for axis in 0..3 {
            let t = shocktube_init(axis, &d);
            for i in 0..8 {
                let mut x = [0.3; 3];
                x[axis] = 0.0625 + 0.125 * i as f64;
                assert_eq!(t.eval(x), shocktube_init(0, &d).eval([x[axis], 0.3, 0.3]));
            }
        }
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(Euler::new(1.0, "ppm", 1e-10).is_err());
        assert!(Euler::new(1.4, "weno", 1e-10).is_err());
        assert!(Euler::new(1.4, "plm-minmod", 0.0).is_err());
        assert_eq!(Euler::new(1.4, "plm-minmod", 1e-10).unwrap().stencil_radius(), 2);
    }
}
