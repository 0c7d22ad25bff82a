//! The flesh: registers thorns, owns parameters and variable groups, orders
//! schedule items and runs them bin by bin against the active driver.
//!
//! A run is a sequence of iterations. Parameter changes requested while it
//! runs (steering) are queued and applied only at iteration boundaries, so
//! every iteration sees one consistent parameter table and a run can be
//! replayed from its steering log.

mod group;
mod params;
mod schedule;

pub use group::{Centering, VariableGroup};
pub use params::{parse_assignments, parse_parameter_file, ParamKind, ParamTable, ParamValue, ParameterSpec};
pub use schedule::{resolve_schedule, Bin, BlockCallable, Callable, ItemContext, LevelCallable, ScheduleItem};

use crate::driver::{Driver, DriverError};
use crate::physics::Physics;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FleshError {
    #[error("duplicate {kind} {name:?}: declared by thorn {first} and again by thorn {second}")]
    Duplicate {
        kind: &'static str,
        name: String,
        first: String,
        second: String,
    },
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("parameter {name}: {reason}")]
    BadValue { name: String, reason: String },
    #[error("parameter file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("parameter {0} is not steerable while the simulation runs")]
    NotSteerable(String),
    #[error("schedule cycle in {bin}: {}", members.join(" -> "))]
    Cycle { bin: Bin, members: Vec<String> },
    #[error("schedule item {item} failed{}: {message}", block.map(|b| format!(" on block {b}")).unwrap_or_default())]
    Item {
        item: String,
        block: Option<usize>,
        message: String,
    },
    #[error("invalid group declaration: {0}")]
    Group(String),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("{0}")]
    Config(String),
}

/// Builds the active driver from the parameter table.
pub type DriverProvider = Arc<dyn Fn(&ParamTable) -> Result<Box<dyn Driver>, String> + Send + Sync>;
/// Builds a physics system from the parameter table.
pub type PhysicsProvider = Arc<dyn Fn(&ParamTable) -> Result<Box<dyn Physics>, String> + Send + Sync>;
/// Chooses the coarse time step from the current data.
pub type TimeStepProvider = Arc<dyn Fn(&dyn Driver, &ParamTable, &[EvolvedSpec]) -> Result<f64, String> + Send + Sync>;

/// A variable group evolved by the time integrator and the physics that
/// supplies its right-hand side.
#[derive(Clone)]
pub struct EvolvedSpec {
    pub group: String,
    pub physics: PhysicsProvider,
}

impl fmt::Debug for EvolvedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvolvedSpec").field("group", &self.group).finish()
    }
}

/// Everything a thorn contributes.
#[derive(Clone, Default)]
pub struct Manifest {
    pub thorn: String,
    pub groups: Vec<VariableGroup>,
    pub parameters: Vec<ParameterSpec>,
    pub items: Vec<ScheduleItem>,
    pub evolved: Vec<EvolvedSpec>,
    pub driver: Option<DriverProvider>,
    pub time_step: Option<TimeStepProvider>,
}

impl Manifest {
    pub fn new(thorn: &str) -> Self {
        Self {
            thorn: thorn.to_string(),
            ..Default::default()
        }
    }

    pub fn group(mut self, g: VariableGroup) -> Self {
        self.groups.push(g);
        self
    }

    pub fn param(mut self, p: ParameterSpec) -> Self {
        self.parameters.push(p);
        self
    }

    pub fn item(mut self, i: ScheduleItem) -> Self {
        self.items.push(i);
        self
    }

    pub fn evolve(mut self, group: &str, physics: PhysicsProvider) -> Self {
        self.evolved.push(EvolvedSpec {
            group: group.to_string(),
            physics,
        });
        self
    }

    pub fn driver(mut self, p: DriverProvider) -> Self {
        self.driver = Some(p);
        self
    }

    pub fn time_step(mut self, p: TimeStepProvider) -> Self {
        self.time_step = Some(p);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
            && self.parameters.is_empty()
            && self.items.is_empty()
            && self.evolved.is_empty()
            && self.driver.is_none()
            && self.time_step.is_none()
    }
}

/// Index of a registered thorn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThornHandle(pub usize);

/// The registry of thorns. Immutable once a [`Simulation`] is built from it.
#[derive(Clone)]
pub struct Flesh {
    thorns: Vec<String>,
    groups: Vec<VariableGroup>,
    params: BTreeMap<String, ParameterSpec>,
    items: Vec<ScheduleItem>,
    evolved: Vec<EvolvedSpec>,
    driver: Option<DriverProvider>,
    time_step: Option<TimeStepProvider>,
    owner: BTreeMap<(&'static str, String), String>,
}

impl Default for Flesh {
    fn default() -> Self {
        Self::new()
    }
}

impl Flesh {
    /// A registry holding only the flesh's own parameters.
    pub fn new() -> Self {
        let mut f = Self {
            thorns: Vec::new(),
            groups: Vec::new(),
            params: BTreeMap::new(),
            items: Vec::new(),
            evolved: Vec::new(),
            driver: None,
            time_step: None,
            owner: BTreeMap::new(),
        };
        let own = Manifest::new("flesh")
            .param(
                ParameterSpec::int("flesh::max_iterations", 10)
                    .at_least(0.0)
                    .steerable()
                    .describe("iterations run by `run`"),
            )
            .param(ParameterSpec::real("flesh::t0", 0.0).describe("initial time"))
            .param(
                ParameterSpec::real("flesh::dt", 0.0)
                    .at_least(0.0)
                    .describe("coarse time step when no thorn chooses one"),
            );
        f.register_thorn(own).expect("flesh parameters are unique");
        f
    }

    pub fn register_thorn(&mut self, m: Manifest) -> Result<ThornHandle, FleshError> {
        if m.is_empty() {
            return Ok(ThornHandle(self.thorns.len()));
        }
        let thorn = m.thorn.clone();
        let mut claims: Vec<(&'static str, String)> = vec![("thorn", thorn.clone())];
        for g in &m.groups {
            g.validate().map_err(FleshError::Group)?;
            claims.push(("group", g.name.clone()));
        }
        for p in &m.parameters {
            p.check(&p.default)?;
            claims.push(("parameter", p.name.clone()));
        }
        claims.extend(m.items.iter().map(|i| ("schedule item", i.name.clone())));
        if m.driver.is_some() {
            claims.push(("driver provider", "driver".into()));
        }
        if m.time_step.is_some() {
            claims.push(("time-step provider", "time_step".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &claims {
            let first = self.owner.get(c).cloned().or_else(|| (!seen.insert(c.clone())).then(|| thorn.clone()));
            if let Some(first) = first {
                return Err(FleshError::Duplicate {
                    kind: c.0,
                    name: c.1.clone(),
                    first,
                    second: thorn,
                });
            }
        }
        for c in claims {
            self.owner.insert(c, thorn.clone());
        }
        self.thorns.push(thorn);
        self.groups.extend(m.groups);
        self.params.extend(m.parameters.into_iter().map(|p| (p.name.clone(), p)));
        self.items.extend(m.items);
        self.evolved.extend(m.evolved);
        if m.driver.is_some() {
            self.driver = m.driver;
        }
        if m.time_step.is_some() {
            self.time_step = m.time_step;
        }
        Ok(ThornHandle(self.thorns.len() - 1))
    }

    pub fn thorns(&self) -> &[String] {
        &self.thorns
    }

    pub fn groups(&self) -> &[VariableGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&VariableGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn parameter_specs(&self) -> &BTreeMap<String, ParameterSpec> {
        &self.params
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterSpec> {
        self.params.get(name)
    }

    pub fn items(&self) -> &[ScheduleItem] {
        &self.items
    }

    pub fn item(&self, name: &str) -> Option<&ScheduleItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn evolved(&self) -> &[EvolvedSpec] {
        &self.evolved
    }

    pub fn parse_parameters(&self, text: &str) -> Result<BTreeMap<String, ParamValue>, FleshError> {
        parse_parameter_file(text, &self.params)
    }

    pub fn make_driver(&self, params: &ParamTable) -> Result<Box<dyn Driver>, FleshError> {
        let p = self
            .driver
            .as_ref()
            .ok_or_else(|| FleshError::Config("no registered thorn provides a driver".into()))?;
        p(params).map_err(FleshError::Config)
    }
}

/// Cumulative wall time of one schedule item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimerReport {
    pub name: String,
    pub seconds: f64,
    pub calls: u64,
}

#[derive(Clone, Debug, Default)]
struct Timers {
    entries: BTreeMap<String, (Duration, u64)>,
}

impl Timers {
    fn add(&mut self, name: &str, d: Duration) {
        let e = self.entries.entry(name.to_string()).or_default();
        e.0 += d;
        e.1 += 1;
    }

    fn report(&self) -> Vec<TimerReport> {
        self.entries
            .iter()
            .map(|(name, (d, n))| TimerReport {
                name: name.clone(),
                seconds: d.as_secs_f64(),
                calls: *n,
            })
            .collect()
    }
}

/// One applied parameter change: `iteration name old new`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringChange {
    pub iteration: u64,
    pub name: String,
    pub old: String,
    pub new: String,
}

impl fmt::Display for SteeringChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.iteration, self.name, self.old, self.new)
    }
}

/// Confirmation that a change was queued.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringAck {
    pub name: String,
    pub value: ParamValue,
    pub at_iteration: u64,
}

#[derive(Clone, Debug)]
struct PendingChange {
    at: u64,
    name: String,
    value: ParamValue,
}

/// Something a thorn wants recorded, such as an output file written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub iteration: u64,
    pub kind: String,
    pub detail: String,
}

/// What a level callable sees: the whole driver plus run state.
pub struct LevelContext<'a> {
    pub item: &'a str,
    pub bin: Bin,
    pub iteration: u64,
    pub params: &'a ParamTable,
    pub driver: &'a mut dyn Driver,
    pub evolved: &'a [EvolvedSpec],
    pub time_step: Option<&'a TimeStepProvider>,
    pub events: &'a mut Vec<Event>,
}

impl LevelContext<'_> {
    pub fn record(&mut self, kind: &str, detail: impl Into<String>) {
        self.events.push(Event {
            iteration: self.iteration,
            kind: kind.to_string(),
            detail: detail.into(),
        });
    }
}

/// A configured run: parameters, driver with allocated storage, resolved
/// schedule and run-time bookkeeping.
pub struct Simulation {
    flesh: Flesh,
    params: ParamTable,
    driver: Box<dyn Driver>,
    schedule: BTreeMap<Bin, Vec<usize>>,
    iteration: u64,
    active_bin: Option<Bin>,
    timers: Timers,
    steering_log: Vec<SteeringChange>,
    pending: Vec<PendingChange>,
    events: Vec<Event>,
}

impl Simulation {
    /// Build from parameter-file text, then run STARTUP and INITIAL and the
    /// iteration-0 ANALYSIS and OUTPUT bins.
    pub fn from_text(flesh: Flesh, text: &str) -> Result<Self, FleshError> {
        let assignments = flesh.parse_parameters(text)?;
        Self::new(flesh, &assignments)
    }

    pub fn new(flesh: Flesh, assignments: &BTreeMap<String, ParamValue>) -> Result<Self, FleshError> {
        let mut params = ParamTable::new(flesh.parameter_specs().clone());
        for (k, v) in assignments {
            params.set(k, v.clone())?;
        }
        let driver = flesh.make_driver(&params)?;
        let mut sim = Self::assemble(flesh, params, driver, 0)?;
        sim.initialize()?;
        Ok(sim)
    }

    /// Allocate storage and resolve the schedule without running any bin;
    /// used when restoring a checkpoint, where the caller fills the data.
    pub fn assemble(flesh: Flesh, params: ParamTable, mut driver: Box<dyn Driver>, iteration: u64) -> Result<Self, FleshError> {
        driver.allocate(flesh.groups())?;
        let mut schedule = BTreeMap::new();
        for bin in Bin::ALL {
            let order = resolve_schedule(flesh.items(), bin)?;
            let idx = order
                .into_iter()
                .map(|it| flesh.items().iter().position(|x| std::ptr::eq(x, it)).expect("item from this flesh"))
                .collect();
            schedule.insert(bin, idx);
        }
        Ok(Self {
            flesh,
            params,
            driver,
            schedule,
            iteration,
            active_bin: None,
            timers: Timers::default(),
            steering_log: Vec::new(),
            pending: Vec::new(),
            events: Vec::new(),
        })
    }

    fn initialize(&mut self) -> Result<(), FleshError> {
        self.run_bin(Bin::Startup)?;
        let t0 = self.params.real("flesh::t0")?;
        // Initial data are evaluated twice: once to measure the state the
        // time step depends on, then again with the past time levels placed
        // at their proper times.
        self.driver.set_time(t0, 0.0);
        self.run_bin(Bin::Initial)?;
        let dt = self.time_step()?;
        self.driver.set_time(t0, dt);
        self.run_bin(Bin::Initial)?;
        self.run_bin(Bin::Analysis)?;
        self.run_bin(Bin::Output)?;
        Ok(())
    }

    /// Continue after [`Simulation::assemble`] once data have been loaded:
    /// run STARTUP and refresh every group's ghosts.
    pub fn resume(&mut self) -> Result<(), FleshError> {
        self.run_bin(Bin::Startup)?;
        let names: Vec<String> = self.flesh.groups().iter().map(|g| g.name.clone()).collect();
        for g in names {
            self.driver.refresh_ghosts(&g)?;
        }
        Ok(())
    }

    /// The coarse time step the registered provider chooses for the current
    /// data, or `flesh::dt`.
    pub fn time_step(&self) -> Result<f64, FleshError> {
        match &self.flesh.time_step {
            Some(p) => p(self.driver.as_ref(), &self.params, self.flesh.evolved()).map_err(FleshError::Config),
            None => Ok(self.params.real("flesh::dt")?),
        }
    }

    /// Run every item of `bin` in resolved order, syncing each item's
    /// declared groups after it.
    pub fn run_bin(&mut self, bin: Bin) -> Result<(), FleshError> {
        self.active_bin = Some(bin);
        let order = self.schedule[&bin].clone();
        for idx in order {
            let item = &self.flesh.items[idx];
            let start = Instant::now();
            match &item.callable {
                Callable::Block(f) => {
                    let ctx = ItemContext {
                        item: &item.name,
                        bin,
                        iteration: self.iteration,
                        params: &self.params,
                    };
                    let f = f.as_ref();
                    self.driver
                        .for_each_block(&|view| f(view, &ctx))
                        .map_err(|e| match e {
                            DriverError::Block { id, message } => FleshError::Item {
                                item: item.name.clone(),
                                block: Some(id),
                                message,
                            },
                            other => FleshError::Driver(other),
                        })?;
                }
                Callable::Level(f) => {
                    let mut ctx = LevelContext {
                        item: &item.name,
                        bin,
                        iteration: self.iteration,
                        params: &self.params,
                        driver: self.driver.as_mut(),
                        evolved: &self.flesh.evolved,
                        time_step: self.flesh.time_step.as_ref(),
                        events: &mut self.events,
                    };
                    f(&mut ctx).map_err(|message| FleshError::Item {
                        item: item.name.clone(),
                        block: None,
                        message,
                    })?;
                }
            }
            for g in &item.sync_groups {
                self.driver.sync(g)?;
            }
            self.timers.add(&item.name, start.elapsed());
        }
        self.active_bin = None;
        Ok(())
    }

    /// One iteration: apply due steering, then PRESTEP, EVOL, advance the
    /// iteration counter, POSTSTEP, ANALYSIS and OUTPUT.
    pub fn step(&mut self) -> Result<(), FleshError> {
        self.apply_steering();
        self.run_bin(Bin::Prestep)?;
        self.run_bin(Bin::Evol)?;
        self.iteration += 1;
        self.run_bin(Bin::Poststep)?;
        self.run_bin(Bin::Analysis)?;
        self.run_bin(Bin::Output)?;
        Ok(())
    }

    /// Step until `flesh::max_iterations` (re-read every iteration).
    pub fn run(&mut self) -> Result<(), FleshError> {
        while self.iteration < self.params.int("flesh::max_iterations")? as u64 {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(&mut self) -> Result<(), FleshError> {
        self.run_bin(Bin::Shutdown)
    }

    /// Queue a change to take effect at the start of iteration
    /// `at_iteration` (or at the next boundary if that has passed).
    pub fn set_parameter(&mut self, name: &str, value: ParamValue, at_iteration: u64) -> Result<SteeringAck, FleshError> {
        let spec = self.params.spec(name)?;
        if !spec.steerable {
            return Err(FleshError::NotSteerable(name.to_string()));
        }
        let value = spec.coerce(value)?;
        self.pending.push(PendingChange {
            at: at_iteration,
            name: name.to_string(),
            value: value.clone(),
        });
        Ok(SteeringAck {
            name: name.to_string(),
            value,
            at_iteration,
        })
    }

    /// Like [`Simulation::set_parameter`] with the value given as text.
    pub fn set_parameter_text(&mut self, name: &str, text: &str, at_iteration: u64) -> Result<SteeringAck, FleshError> {
        let v = self.params.spec(name)?.parse(text)?;
        self.set_parameter(name, v, at_iteration)
    }

    fn apply_steering(&mut self) {
        let next = self.iteration + 1;
        let (due, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending).into_iter().partition(|c| c.at <= next);
        self.pending = later;
        for c in due {
            let old = self.params.set(&c.name, c.value.clone()).expect("validated when queued");
            self.steering_log.push(SteeringChange {
                iteration: next,
                name: c.name,
                old: old.to_string(),
                new: c.value.to_string(),
            });
        }
    }

    pub fn pending_changes(&self) -> usize {
        self.pending.len()
    }

    pub fn steering_log(&self) -> &[SteeringChange] {
        &self.steering_log
    }

    pub fn steering_log_text(&self) -> String {
        self.steering_log.iter().map(|c| format!("{c}\n")).collect()
    }

    pub fn timer_report(&self) -> Vec<TimerReport> {
        self.timers.report()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn flesh(&self) -> &Flesh {
        &self.flesh
    }

    pub fn params(&self) -> &ParamTable {
        &self.params
    }

    pub fn driver(&self) -> &dyn Driver {
        self.driver.as_ref()
    }

    pub fn driver_mut(&mut self) -> &mut dyn Driver {
        self.driver.as_mut()
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn time(&self) -> f64 {
        self.driver.time()
    }

    pub fn active_bin(&self) -> Option<Bin> {
        self.active_bin
    }

    /// Item names of `bin` in execution order.
    pub fn schedule_order(&self, bin: Bin) -> Vec<&str> {
        self.schedule[&bin].iter().map(|i| self.flesh.items[*i].name.as_str()).collect()
    }
}
