//! Approximate Riemann solvers.

use super::state::{prim2con, physical_flux, EquationOfState, PrimitiveState};
use crate::registry::Registry;

pub trait RiemannSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn flux(&self, left: &PrimitiveState, right: &PrimitiveState, dir: usize, eos: &EquationOfState) -> [f64; 5];
}

/// Harten-Lax-van Leer-Einfeldt two-wave solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct Hlle;

impl RiemannSolver for Hlle {
    fn name(&self) -> &'static str {
        "hlle"
    }

    fn flux(&self, left: &PrimitiveState, right: &PrimitiveState, dir: usize, eos: &EquationOfState) -> [f64; 5] {
        let cl = eos.sound_speed(left);
        let cr = eos.sound_speed(right);
        let vl = left.v[dir];
        let vr = right.v[dir];
        let s_minus = (vl - cl).min(vr - cr).min(0.0);
        let s_plus = (vl + cl).max(vr + cr).max(0.0);
        let fl = physical_flux(left, dir, eos);
        let fr = physical_flux(right, dir, eos);
        if s_plus == s_minus {
            return fl;
        }
        let ul = prim2con(left, eos).to_array();
        let ur = prim2con(right, eos).to_array();
        let inv = 1.0 / (s_plus - s_minus);
        let mut f = [0.0; 5];
        for m in 0..5 {
            f[m] = (s_plus * fl[m] - s_minus * fr[m] + s_plus * s_minus * (ur[m] - ul[m])) * inv;
        }
        f
    }
}

pub fn riemann_solvers() -> Registry<dyn RiemannSolver> {
    let mut r: Registry<dyn RiemannSolver> = Registry::new("riemann solver");
    r.register_simple("hlle", || Box::new(Hlle));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_rest_states_give_pressure_flux() {
        let s = PrimitiveState { rho: 1.0, v: [0.0; 3], p: 1.0 };
        let f = Hlle.flux(&s, &s, 0, &EquationOfState::default());
        assert_eq!(f, [0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn supersonic_left_moving_flow_upwinds_to_right_state() {
        let eos = EquationOfState::default();
        let l = PrimitiveState { rho: 1.0, v: [-5.0, 0.3, 0.0], p: 1.0 };
        let r = PrimitiveState { rho: 0.5, v: [-4.0, 0.0, 0.1], p: 0.4 };
        assert!(l.v[0] + eos.sound_speed(&l) < 0.0 && r.v[0] + eos.sound_speed(&r) < 0.0);
        let f = Hlle.flux(&l, &r, 0, &eos);
        let exact = physical_flux(&r, 0, &eos);
        for m in 0..5 {
            assert!((f[m] - exact[m]).abs() < 1e-13 * (1.0 + exact[m].abs()));
        }
    }

    proptest! {
        #[test]
        fn consistency_with_physical_flux(
            rho in 1e-2f64..10.0, p in 1e-2f64..10.0,
            v in prop::array::uniform3(-3.0f64..3.0), dir in 0usize..3,
        ) {
            let eos = EquationOfState::default();
            let s = PrimitiveState { rho, v, p };
            let f = Hlle.flux(&s, &s, dir, &eos);
            let exact = physical_flux(&s, dir, &eos);
            for m in 0..5 {
                prop_assert!((f[m] - exact[m]).abs() <= 1e-12 * (1.0 + exact[m].abs()));
            }
        }
    }
}
