//! Method-of-lines time integration with explicit Runge-Kutta tableaus.
//!
//! The integrator only sees flat arrays: one `Vec<f64>` per variable per
//! block. Right-hand sides are supplied by the driver (which knows about
//! blocks and ghost zones) and so is the `sync` callback, invoked after
//! every intermediate stage and after the final update. Right-hand sides are
//! zero at ghost points, so ghost values that `sync` does not refresh stay
//! frozen at their start-of-step values for the whole step.

use crate::registry::Registry;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// `state[block][variable][point]`
pub type FieldSet = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MolError {
    #[error("right-hand side failed: {0}")]
    Rhs(String),
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("invalid integrator spec: {0}")]
    BadSpec(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    Rk2,
    Rk3,
    Rk4,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Euler, Scheme::Rk2, Scheme::Rk3, Scheme::Rk4];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Rk2 => "rk2",
            Scheme::Rk3 => "rk3",
            Scheme::Rk4 => "rk4",
        }
    }

    pub fn order(self) -> usize {
        match self {
            Scheme::Euler => 1,
            Scheme::Rk2 => 2,
            Scheme::Rk3 => 3,
            Scheme::Rk4 => 4,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = MolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| MolError::BadSpec(format!("unknown scheme {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub cfl: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            cfl: 0.25,
        }
    }
}

impl IntegratorSpec {
    pub fn new(scheme: Scheme, cfl: f64) -> Result<Self, MolError> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(MolError::BadSpec(format!("CFL factor {cfl} outside (0, 1]")));
        }
        Ok(Self { scheme, cfl })
    }

    /// `cfl * spacing / speed`
    pub fn time_step(&self, spacing: f64, speed: f64) -> f64 {
        self.cfl * spacing / speed
    }
}

/// Number of right-hand-side evaluations per step.
pub fn substeps_of(spec: &IntegratorSpec) -> usize {
    integrator(spec.scheme).substeps()
}

/// Explicit Butcher tableau.
#[derive(Clone, Debug, PartialEq)]
pub struct Tableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Tableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Row sums of `a` equal `c` and the weights sum to one.
    pub fn is_consistent(&self) -> bool {
        let rows_ok = self
            .a
            .iter()
            .zip(&self.c)
            .all(|(row, c)| (row.iter().sum::<f64>() - c).abs() < 1e-14);
        rows_ok && (self.b.iter().sum::<f64>() - 1.0).abs() < 1e-14
    }
}

pub trait Integrator: Send + Sync {
    fn scheme(&self) -> Scheme;
    fn tableau(&self) -> &Tableau;

    fn name(&self) -> &'static str {
        self.scheme().name()
    }

    fn substeps(&self) -> usize {
        self.tableau().stages()
    }

    /// Advance `state` by `dt`.
    fn step(
        &self,
        state: &mut FieldSet,
        dt: f64,
        rhs: &mut dyn FnMut(&FieldSet, &mut FieldSet) -> Result<(), MolError>,
        sync: &mut dyn FnMut(&mut FieldSet),
    ) -> Result<(), MolError> {
        explicit_rk_step(self.tableau(), state, dt, rhs, sync)
    }
}

pub fn explicit_rk_step(
    tab: &Tableau,
    state: &mut FieldSet,
    dt: f64,
    rhs: &mut dyn FnMut(&FieldSet, &mut FieldSet) -> Result<(), MolError>,
    sync: &mut dyn FnMut(&mut FieldSet),
) -> Result<(), MolError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MolError::BadTimeStep(dt));
    }
    let stages = tab.stages();
    let mut ks: Vec<FieldSet> = Vec::with_capacity(stages);
    for i in 0..stages {
        let mut k = zeros_like(state);
        if i == 0 {
            rhs(state, &mut k)?;
        } else {
            let mut y = state.clone();
            for (j, kj) in ks.iter().enumerate() {
                let aij = tab.a[i][j];
                if aij != 0.0 {
                    axpy(&mut y, dt * aij, kj);
                }
            }
            sync(&mut y);
            rhs(&y, &mut k)?;
        }
        ks.push(k);
    }
    for (bi, ki) in tab.b.iter().zip(&ks) {
        if *bi != 0.0 {
            axpy(state, dt * bi, ki);
        }
    }
    sync(state);
    Ok(())
}

pub fn zeros_like(x: &FieldSet) -> FieldSet {
    x.iter()
        .map(|vars| vars.iter().map(|v| vec![0.0; v.len()]).collect())
        .collect()
}

/// `y += alpha * x`
pub fn axpy(y: &mut FieldSet, alpha: f64, x: &FieldSet) {
    for (yb, xb) in y.iter_mut().zip(x) {
        for (yv, xv) in yb.iter_mut().zip(xb) {
            for (a, b) in yv.iter_mut().zip(xv) {
                *a += alpha * b;
            }
        }
    }
}

pub struct Euler(Tableau);
pub struct Rk2(Tableau);
pub struct Rk3(Tableau);
pub struct Rk4(Tableau);

impl Euler {
    pub fn new() -> Self {
        Self(Tableau {
            a: vec![vec![]],
            b: vec![1.0],
            c: vec![0.0],
        })
    }
}

impl Rk2 {
    /// Explicit midpoint.
    pub fn new() -> Self {
        Self(Tableau {
            a: vec![vec![], vec![0.5]],
            b: vec![0.0, 1.0],
            c: vec![0.0, 0.5],
        })
    }
}

impl Rk3 {
    /// Strong-stability-preserving third order (Shu-Osher).
    pub fn new() -> Self {
        Self(Tableau {
            a: vec![vec![], vec![1.0], vec![0.25, 0.25]],
            b: vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            c: vec![0.0, 1.0, 0.5],
        })
    }
}

impl Rk4 {
    pub fn new() -> Self {
        Self(Tableau {
            a: vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            c: vec![0.0, 0.5, 0.5, 1.0],
        })
    }
}

macro_rules! impl_integrator {
    ($t:ident, $scheme:expr) => {
        impl Default for $t {
            fn default() -> Self {
                Self::new()
            }
        }
        impl Integrator for $t {
            fn scheme(&self) -> Scheme {
                $scheme
            }
            fn tableau(&self) -> &Tableau {
                &self.0
            }
        }
    };
}

impl_integrator!(Euler, Scheme::Euler);
impl_integrator!(Rk2, Scheme::Rk2);
impl_integrator!(Rk3, Scheme::Rk3);
impl_integrator!(Rk4, Scheme::Rk4);

pub fn integrator(scheme: Scheme) -> Box<dyn Integrator> {
    match scheme {
        Scheme::Euler => Box::new(Euler::new()),
        Scheme::Rk2 => Box::new(Rk2::new()),
        Scheme::Rk3 => Box::new(Rk3::new()),
        Scheme::Rk4 => Box::new(Rk4::new()),
    }
}

/// All integrators, by name.
pub fn integrators() -> Registry<dyn Integrator> {
    let mut r = Registry::new("integrator");
    for s in Scheme::ALL {
        r.register_simple(s.name(), move || integrator(s));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(y: f64) -> FieldSet {
        vec![vec![vec![y]]]
    }

    fn solve_growth(scheme: Scheme, dt: f64, t_end: f64) -> f64 {
        let integ = integrator(scheme);
        let mut y = scalar(1.0);
        let n = (t_end / dt).round() as usize;
        for _ in 0..n {
            integ
                .step(
                    &mut y,
                    dt,
                    &mut |s, k| {
                        k[0][0][0] = s[0][0][0];
                        Ok(())
                    },
                    &mut |_| {},
                )
                .unwrap();
        }
        y[0][0][0]
    }

    #[test]
    fn tableaus_are_consistent() {
        for s in Scheme::ALL {
            assert!(integrator(s).tableau().is_consistent(), "{s}");
        }
    }

    #[test]
    fn zero_rhs_leaves_state_unchanged() {
        let mut y = vec![vec![vec![1.5, -2.0, 3.25]]];
        let before = y.clone();
        Rk4::new()
            .step(&mut y, 0.1, &mut |_, _| Ok(()), &mut |_| {})
            .unwrap();
        assert_eq!(y, before);
    }

    #[test]
    fn rk4_single_step_of_exponential_growth() {
        // 1 + h + h^2/2 + h^3/6 + h^4/24 at h = 0.1
        let y = solve_growth(Scheme::Rk4, 0.1, 0.1);
        assert!((y - 1.105_170_833_333_333_3).abs() < 1e-15, "{y}");
        assert!((y - 0.1f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn global_error_ratio_matches_order() {
        for s in Scheme::ALL {
            let e1 = (solve_growth(s, 0.05, 1.0) - 1f64.exp()).abs();
            let e2 = (solve_growth(s, 0.025, 1.0) - 1f64.exp()).abs();
            let order = (e1 / e2).log2();
            assert!((order - s.order() as f64).abs() < 0.2, "{s}: measured {order}");
        }
        let e1 = (solve_growth(Scheme::Rk4, 0.05, 1.0) - 1f64.exp()).abs();
        let e2 = (solve_growth(Scheme::Rk4, 0.025, 1.0) - 1f64.exp()).abs();
        assert!((e1 / e2 - 16.0).abs() < 1.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn substeps_equal_rhs_evaluations() {
        for s in Scheme::ALL {
            let mut calls = 0;
            let mut y = scalar(1.0);
            integrator(s)
                .step(
                    &mut y,
                    0.1,
                    &mut |_, _| {
                        calls += 1;
                        Ok(())
                    },
                    &mut |_| {},
                )
                .unwrap();
            let spec = IntegratorSpec::new(s, 0.25).unwrap();
            assert_eq!(substeps_of(&spec), calls);
        }
        assert_eq!(substeps_of(&IntegratorSpec::new(Scheme::Euler, 0.5).unwrap()), 1);
        assert_eq!(substeps_of(&IntegratorSpec::new(Scheme::Rk4, 0.5).unwrap()), 4);
    }

    #[test]
    fn sync_runs_after_every_stage_and_final_update() {
        let mut syncs = 0;
        let mut y = scalar(1.0);
        Rk3::new()
            .step(&mut y, 0.1, &mut |_, _| Ok(()), &mut |_| syncs += 1)
            .unwrap();
        assert_eq!(syncs, 3);
    }

    #[test]
    fn registry_and_spec_validation() {
        let r = integrators();
        assert_eq!(r.names(), vec!["euler", "rk2", "rk3", "rk4"]);
        assert_eq!(r.create("rk3").unwrap().substeps(), 3);
        assert!(IntegratorSpec::new(Scheme::Rk4, 0.0).is_err());
        assert!(IntegratorSpec::new(Scheme::Rk4, 1.5).is_err());
        assert!("rk5".parse::<Scheme>().is_err());
    }
}
