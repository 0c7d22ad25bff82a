//! Primitive and conserved variables of the ideal-gas Euler equations.

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveState {
    pub rho: f64,
    pub v: [f64; 3],
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservedState {
    pub d: f64,
    pub s: [f64; 3],
    pub e: f64,
}

impl ConservedState {
    pub fn to_array(self) -> [f64; 5] {
        [self.d, self.s[0], self.s[1], self.s[2], self.e]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            d: a[0],
            s: [a[1], a[2], a[3]],
            e: a[4],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationOfState {
    pub gamma: f64,
}

impl Default for EquationOfState {
    fn default() -> Self {
        Self { gamma: 1.4 }
    }
}

impl EquationOfState {
    pub fn sound_speed(&self, prim: &PrimitiveState) -> f64 {
        (self.gamma * prim.p / prim.rho).sqrt()
    }
}

/// Atmosphere treatment: density and pressure never drop below these.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Floors {
    pub rho: f64,
    pub p: f64,
}

impl Default for Floors {
    fn default() -> Self {
        Self { rho: 1e-10, p: 1e-12 }
    }
}

/// Counts floor applications; cheap enough to share across workers.
#[derive(Debug, Default)]
pub struct FloorLog {
    events: AtomicU64,
}

impl FloorLog {
    pub fn record(&self) {
        self.events.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.events.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("non-finite conserved state {0:?}")]
pub struct NonFiniteState(pub [f64; 5]);

pub fn prim2con(prim: &PrimitiveState, eos: &EquationOfState) -> ConservedState {
    let v2 = prim.v.iter().map(|v| v * v).sum::<f64>();
    ConservedState {
        d: prim.rho,
        s: [prim.rho * prim.v[0], prim.rho * prim.v[1], prim.rho * prim.v[2]],
        e: prim.p / (eos.gamma - 1.0) + 0.5 * prim.rho * v2,
    }
}

/// Closed-form inversion with floors; each floor application is recorded.
pub fn con2prim(
    cons: &ConservedState,
    eos: &EquationOfState,
    floors: &Floors,
    log: Option<&FloorLog>,
) -> Result<PrimitiveState, NonFiniteState> {
    let arr = cons.to_array();
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(NonFiniteState(arr));
    }
    let mut rho = cons.d;
    if rho < floors.rho {
        rho = floors.rho;
        if let Some(l) = log {
            l.record();
        }
        log::trace!("density floored: D = {}", cons.d);
    }
    let v = [cons.s[0] / rho, cons.s[1] / rho, cons.s[2] / rho];
    let s2 = cons.s.iter().map(|s| s * s).sum::<f64>();
    let mut p = (eos.gamma - 1.0) * (cons.e - 0.5 * s2 / rho);
    if p < floors.p {
        p = floors.p;
        if let Some(l) = log {
            l.record();
        }
        log::trace!("pressure floored at E = {}", cons.e);
    }
    Ok(PrimitiveState { rho, v, p })
}

/// Flux of the conserved variables through a face normal to `dir`.
pub fn physical_flux(prim: &PrimitiveState, dir: usize, eos: &EquationOfState) -> [f64; 5] {
    let u = prim2con(prim, eos);
    let vn = prim.v[dir];
    let mut f = [
        u.d * vn,
        u.s[0] * vn,
        u.s[1] * vn,
        u.s[2] * vn,
        (u.e + prim.p) * vn,
    ];
    f[1 + dir] += prim.p;
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_conversions() {
        let eos = EquationOfState::default();
        let prim = PrimitiveState { rho: 1.0, v: [0.0; 3], p: 1.0 };
        let u = prim2con(&prim, &eos);
        for (a, b) in u.to_array().iter().zip([1.0, 0.0, 0.0, 0.0, 2.5]) {
            assert!((a - b).abs() < 1e-14);
        }
        let back = con2prim(&u, &eos, &Floors::default(), None).unwrap();
        assert_eq!((back.rho, back.v), (prim.rho, prim.v));
        assert!((back.p - prim.p).abs() < 1e-14);
    }

    #[test]
    fn floors_apply_and_are_logged() {
        let eos = EquationOfState::default();
        let floors = Floors::default();
        let log = FloorLog::default();
        // kinetic energy exceeds total energy
        let u = ConservedState { d: 1.0, s: [2.0, 0.0, 0.0], e: 1.0 };
        let p = con2prim(&u, &eos, &floors, Some(&log)).unwrap();
        assert_eq!(p.p, floors.p);
        assert_eq!(log.count(), 1);
        let vac = prim2con(&PrimitiveState { rho: floors.rho, v: [0.0; 3], p: floors.p }, &eos);
        let back = con2prim(&vac, &eos, &floors, Some(&log)).unwrap();
        assert_eq!(back.rho, floors.rho);
        assert!((back.p - floors.p).abs() <= 1e-12 * floors.p);
        let bad = ConservedState { d: f64::NAN, s: [0.0; 3], e: 1.0 };
        assert!(con2prim(&bad, &eos, &floors, None).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_away_from_floors(
            rho in 1e-3f64..1e3, p in 1e-3f64..1e3,
            v in prop::array::uniform3(-10.0f64..10.0), gamma in 1.1f64..2.0,
        ) {
            let eos = EquationOfState { gamma };
            let prim = PrimitiveState { rho, v, p };
            let back = con2prim(&prim2con(&prim, &eos), &eos, &Floors::default(), None).unwrap();
            prop_assert!(((back.rho - rho) / rho).abs() < 1e-12);
            // pressure is recovered from a difference E - |S|^2/2D, so
            // the error is relative to the total energy scale
            let scale = p + rho * v.iter().map(|x| x * x).sum::<f64>();
            prop_assert!(((back.p - p) / scale).abs() < 1e-12);
            for d in 0..3 {
                prop_assert!((back.v[d] - v[d]).abs() <= 1e-12 * (1.0 + v[d].abs()));
            }
        }
    }
}
