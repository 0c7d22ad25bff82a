//! Drivers own grid storage, decompose it over simulated ranks, exchange
//! ghost zones and advance evolved groups in time.
//!
//! Two drivers are provided behind the [`Driver`] trait: [`unigrid`] (one
//! block per rank, two selectable exchange strategies) and [`amr`] (nested
//! factor-2 refinement levels with Berger–Oliger subcycling). Both run all
//! ranks inside one process; ranks communicate only through immutable
//! [`transport::HaloMessage`]s, delivered in a fixed order so that results
//! do not depend on whether ranks run sequentially or on parallel workers.

pub mod amr;
mod common;
pub mod transport;
pub mod unigrid;

pub use common::{interpolate_points, reduce_patches, InterpError};

use crate::flesh::VariableGroup;
use crate::grid::{DomainSpec, GridError, GroupStorage, IBox, Patch, PatchGeom};
use crate::mol::{Integrator, MolError};
use crate::physics::{Physics, PhysicsError};
use crate::registry::{Registry, RegistryError};
use serde::{Deserialize, Serialize};
use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("cannot decompose domain: {0}")]
    Sizing(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("storage has not been allocated")]
    NotAllocated,
    #[error("invalid driver configuration: {0}")]
    Config(String),
    #[error("block {id}: {message}")]
    Block { id: usize, message: String },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Mol(#[from] MolError),
    #[error("proper nesting violated on level {level}: {detail}")]
    Nesting { level: usize, detail: String },
    #[error("level {level}: coarse data do not cover the prolongation stencil of point {point:?}")]
    InsufficientCover { level: usize, point: [i64; 3] },
    #[error("time interpolation of order {order} needs {need} stored time levels, have {have}")]
    InsufficientTimeLevels { order: usize, need: usize, have: usize },
    #[error("restriction needs fine and coarse at the same time (fine {fine}, coarse {coarse})")]
    TimeMismatch { fine: f64, coarse: f64 },
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// How simulated ranks are executed. Both modes give bit-identical data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

impl FromStr for Execution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Execution::Sequential),
            "parallel" => Ok(Execution::Parallel),
            other => Err(format!("unknown execution mode {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReduceOp {
    Sum,
    Min,
    Max,
    /// Mean absolute value.
    L1,
    /// Root mean square.
    L2,
    /// Maximum absolute value.
    Linf,
    /// Number of (owned) points.
    Count,
}

impl ReduceOp {
    pub const ALL: [ReduceOp; 7] = [
        ReduceOp::Sum,
        ReduceOp::Min,
        ReduceOp::Max,
        ReduceOp::L1,
        ReduceOp::L2,
        ReduceOp::Linf,
        ReduceOp::Count,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReduceOp::Sum => "sum",
            ReduceOp::Min => "min",
            ReduceOp::Max => "max",
            ReduceOp::L1 => "l1",
            ReduceOp::L2 => "l2",
            ReduceOp::Linf => "linf",
            ReduceOp::Count => "count",
        }
    }
}

impl fmt::Display for ReduceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReduceOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        ReduceOp::ALL
            .into_iter()
            .find(|op| op.name() == lower)
            .ok_or_else(|| format!("unknown reduction {s:?}"))
    }
}

/// Position of a variable inside the allocated storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarRef {
    pub group: usize,
    pub var: usize,
}

/// Allocated groups and the lookup from variable names to storage slots.
#[derive(Clone, Debug, Default)]
pub struct Layout {
    groups: Vec<VariableGroup>,
    time_levels: Vec<usize>,
    vars: BTreeMap<String, VarRef>,
}

impl Layout {
    /// `min_time_levels` raises every group's stored level count (AMR time
    /// interpolation needs more history than a group may ask for).
    pub fn new(groups: &[VariableGroup], ghost: usize, min_time_levels: usize) -> Result<Self, DriverError> {
        let mut layout = Layout::default();
        for (gi, g) in groups.iter().enumerate() {
            g.validate().map_err(DriverError::Config)?;
            if g.ghost_width > ghost {
                return Err(DriverError::Config(format!(
                    "group {} wants {} ghost points but the grid has {}",
                    g.name, g.ghost_width, ghost
                )));
            }
            if layout.groups.iter().any(|o| o.name == g.name) {
                return Err(DriverError::Config(format!("group {} allocated twice", g.name)));
            }
            for (vi, q) in g.qualified_variables().into_iter().enumerate() {
                if layout.vars.insert(q.clone(), VarRef { group: gi, var: vi }).is_some() {
                    return Err(DriverError::Config(format!("variable {q} declared twice")));
                }
            }
            layout.groups.push(g.clone());
            layout.time_levels.push(g.time_levels.max(min_time_levels));
        }
        Ok(layout)
    }

    pub fn groups(&self) -> &[VariableGroup] {
        &self.groups
    }

    pub fn stored_time_levels(&self, group: usize) -> usize {
        self.time_levels[group]
    }

    pub fn group_index(&self, name: &str) -> Result<usize, DriverError> {
        self.groups
            .iter()
            .position(|g| g.name == name)
            .ok_or_else(|| DriverError::UnknownGroup(name.to_string()))
    }

    /// Resolve `thorn::var`, or a bare variable name if it is unambiguous.
    pub fn var(&self, name: &str) -> Result<VarRef, DriverError> {
        if let Some(r) = self.vars.get(name) {
            return Ok(*r);
        }
        if !name.contains("::") {
            let suffix = format!("::{name}");
            let mut hits = self.vars.iter().filter(|(k, _)| k.ends_with(&suffix));
            if let (Some((_, r)), None) = (hits.next(), hits.next()) {
                return Ok(*r);
            }
        }
        Err(DriverError::UnknownVariable(name.to_string()))
    }

    /// Qualified variable names in storage order.
    pub fn variable_names(&self) -> Vec<String> {
        self.groups.iter().flat_map(|g| g.qualified_variables()).collect()
    }

    pub fn qualified_name(&self, r: VarRef) -> String {
        self.groups[r.group].qualified_variables()[r.var].clone()
    }

    pub(crate) fn new_storage(&self, npoints: usize) -> Vec<GroupStorage> {
        self.groups
            .iter()
            .zip(&self.time_levels)
            .map(|(g, tl)| GroupStorage::zeroed(*tl, g.variables.len(), npoints))
            .collect()
    }
}

/// Mutable access to one block's storage, handed to block-level callables.
pub struct BlockView<'a> {
    pub id: usize,
    pub rank: usize,
    pub geom: PatchGeom,
    /// Simulation time of each stored time level, newest first.
    pub level_times: &'a [f64],
    layout: &'a Layout,
    storage: &'a mut [GroupStorage],
}

impl<'a> BlockView<'a> {
    pub(crate) fn new(patch: &'a mut Patch, geom: PatchGeom, layout: &'a Layout, level_times: &'a [f64]) -> Self {
        Self {
            id: patch.id,
            rank: patch.rank,
            geom,
            level_times,
            layout,
            storage: &mut patch.storage,
        }
    }

    pub fn layout(&self) -> &Layout {
        self.layout
    }

    pub fn group(&self, name: &str) -> Result<&GroupStorage, String> {
        let gi = self.layout.group_index(name).map_err(|e| e.to_string())?;
        Ok(&self.storage[gi])
    }

    pub fn group_mut(&mut self, name: &str) -> Result<&mut GroupStorage, String> {
        let gi = self.layout.group_index(name).map_err(|e| e.to_string())?;
        Ok(&mut self.storage[gi])
    }

    pub fn var(&self, name: &str) -> Result<&[f64], String> {
        self.var_tl(name, 0)
    }

    pub fn var_tl(&self, name: &str, tl: usize) -> Result<&[f64], String> {
        let r = self.layout.var(name).map_err(|e| e.to_string())?;
        self.storage[r.group]
            .levels
            .get(tl)
            .map(|l| l[r.var].as_slice())
            .ok_or_else(|| format!("{name} has no time level {tl}"))
    }

    pub fn var_mut(&mut self, name: &str) -> Result<&mut [f64], String> {
        self.var_tl_mut(name, 0)
    }

    pub fn var_tl_mut(&mut self, name: &str, tl: usize) -> Result<&mut [f64], String> {
        let r = self.layout.var(name).map_err(|e| e.to_string())?;
        self.storage[r.group]
            .levels
            .get_mut(tl)
            .map(|l| l[r.var].as_mut_slice())
            .ok_or_else(|| format!("{name} has no time level {tl}"))
    }
}

/// A group together with the equations that evolve it.
#[derive(Clone, Copy)]
pub struct EvolvedSystem<'a> {
    pub group: &'a str,
    pub physics: &'a dyn Physics,
}

/// Block-level callable as seen by a driver.
pub type BlockFn<'f> = dyn Fn(&mut BlockView<'_>) -> Result<(), String> + Send + Sync + 'f;

/// Serializable description of a driver's hierarchy and clocks, enough to
/// rebuild an identically shaped driver on restart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverDesc {
    pub driver: String,
    pub domain: DomainSpec,
    pub strategy: String,
    pub levels: Vec<LevelDesc>,
    #[serde(default)]
    pub amr: Option<amr::AmrSettings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDesc {
    /// Refined region of the level, in level indices.
    pub boxes: Vec<IBox>,
    /// Time of each stored time level, newest first.
    pub times: Vec<f64>,
    pub steps: u64,
}

/// Everything a driver needs at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverConfig {
    pub domain: DomainSpec,
    pub nranks: usize,
    pub strategy: String,
    pub execution: Execution,
    pub amr: amr::AmrSettings,
}

impl DriverConfig {
    pub fn unigrid(domain: DomainSpec, nranks: usize, strategy: &str) -> Self {
        Self {
            domain,
            nranks,
            strategy: strategy.to_string(),
            execution: Execution::Sequential,
            amr: amr::AmrSettings::default(),
        }
    }
}

pub trait Driver: Send {
    fn name(&self) -> &'static str;
    fn domain(&self) -> &DomainSpec;
    fn nranks(&self) -> usize;
    fn nlevels(&self) -> usize;

    /// Allocate zeroed storage for `groups` on every block.
    fn allocate(&mut self, groups: &[VariableGroup]) -> Result<(), DriverError>;
    fn layout(&self) -> &Layout;

    /// All blocks, ordered by level, then rank, then id.
    fn patches(&self) -> Vec<&Patch>;
    fn patches_mut(&mut self) -> Vec<&mut Patch>;
    fn geom(&self, patch: &Patch) -> PatchGeom {
        PatchGeom {
            level: patch.level,
            owned: patch.owned,
            ext: patch.ext,
            origin: self.domain().origin,
            spacing: self.domain().level_spacing(patch.level),
        }
    }

    /// Times of the stored time levels of `level`, newest first.
    fn level_times(&self, level: usize) -> &[f64];
    /// Integrator steps taken on each level so far.
    fn level_steps(&self) -> Vec<u64>;
    fn time(&self) -> f64 {
        self.level_times(0)[0]
    }
    /// Set the clocks: time level `k` of level `l` sits at `t0 - k * dt0 / 2^l`.
    fn set_time(&mut self, t0: f64, dt0: f64);

    /// Refresh the ghost zones of the current time level of `group` on every level.
    fn sync(&mut self, group: &str) -> Result<(), DriverError>;

    /// Refresh ghost zones from owned data without modifying any owned
    /// point (used after a restore, where owned data are authoritative).
    fn refresh_ghosts(&mut self, group: &str) -> Result<(), DriverError> {
        self.sync(group)
    }

    /// Run `f` once on every block; the first failure is returned with its block id.
    fn for_each_block(&mut self, f: &BlockFn<'_>) -> Result<(), DriverError>;

    /// Advance every system by one coarse step `dt0`; the clocks advance once.
    fn evolve(&mut self, systems: &[EvolvedSystem<'_>], integrator: &dyn Integrator, dt0: f64) -> Result<(), DriverError>;

    /// Reduction over the owned points of the coarsest level, rank-major
    /// then x-fastest index order.
    fn reduce(&self, var: &str, op: ReduceOp) -> Result<f64, DriverError>;

    /// Lagrange interpolation of `var` (current time level) at physical points.
    fn interpolate(
        &self,
        var: &str,
        points: &[[f64; 3]],
        order: usize,
    ) -> Result<Vec<Result<f64, InterpError>>, DriverError>;

    fn describe(&self) -> DriverDesc;

    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// Constructs drivers by name, fresh or from a saved description.
pub trait DriverFactory: Send + Sync {
    fn build(&self, config: &DriverConfig) -> Result<Box<dyn Driver>, DriverError>;
    fn restore(&self, desc: &DriverDesc, nranks: usize, execution: Execution) -> Result<Box<dyn Driver>, DriverError>;
}

struct UnigridFactory;
struct AmrFactory;

impl DriverFactory for UnigridFactory {
    fn build(&self, config: &DriverConfig) -> Result<Box<dyn Driver>, DriverError> {
        Ok(Box::new(unigrid::Unigrid::new(
            config.domain.clone(),
            config.nranks,
            &config.strategy,
            config.execution,
        )?))
    }

    fn restore(&self, desc: &DriverDesc, nranks: usize, execution: Execution) -> Result<Box<dyn Driver>, DriverError> {
        let mut d = unigrid::Unigrid::new(desc.domain.clone(), nranks, &desc.strategy, execution)?;
        d.restore_clock(desc)?;
        Ok(Box::new(d))
    }
}

impl DriverFactory for AmrFactory {
    fn build(&self, config: &DriverConfig) -> Result<Box<dyn Driver>, DriverError> {
        Ok(Box::new(amr::Amr::new(
            config.domain.clone(),
            config.nranks,
            config.execution,
            config.amr.clone(),
        )?))
    }

    fn restore(&self, desc: &DriverDesc, nranks: usize, execution: Execution) -> Result<Box<dyn Driver>, DriverError> {
        Ok(Box::new(amr::Amr::from_desc(desc, nranks, execution)?))
    }
}

pub fn drivers() -> Registry<dyn DriverFactory> {
    let mut r: Registry<dyn DriverFactory> = Registry::new("driver");
    r.register_simple("unigrid", || Box::new(UnigridFactory));
    r.register_simple("amr", || Box::new(AmrFactory));
    r
}

pub fn build_driver(name: &str, config: &DriverConfig) -> Result<Box<dyn Driver>, DriverError> {
    drivers().create(name)?.build(config)
}

pub fn restore_driver(desc: &DriverDesc, nranks: usize, execution: Execution) -> Result<Box<dyn Driver>, DriverError> {
    drivers().create(&desc.driver)?.restore(desc, nranks, execution)
}
