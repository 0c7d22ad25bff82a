//! Unigrid driver: one block per rank, ghost zones exchanged by a
//! strategy chosen by name at construction.

pub mod decompose;
pub mod exchange;

pub use decompose::{decompose, Block, Neighbor, ProcessTopology};
pub use exchange::{execute, strategies, DimMap, Directional, Neighbors, ExchangePlan, ExchangeStats, ExchangeStrategy, Placement, Transfer};

use super::common::{current_state, geom_of, put_current, take_current, interpolate_points, level_rhs, reduce_patches, run_blocks};
use super::{BlockFn, Driver, EvolvedSystem, DriverDesc, DriverError, Execution, InterpError, Layout, LevelDesc, ReduceOp};
use crate::flesh::VariableGroup;
use crate::grid::{DomainSpec, Patch, PatchGeom};
use crate::mol::{FieldSet, Integrator};
use std::any::Any;

pub struct Unigrid {
    domain: DomainSpec,
    topo: ProcessTopology,
    blocks: Vec<Block>,
    patches: Vec<Patch>,
    layout: Layout,
    strategy: Box<dyn ExchangeStrategy>,
    plan: ExchangePlan,
    place: Placement,
    execution: Execution,
    times: Vec<f64>,
    steps: u64,
    last_exchange: ExchangeStats,
    exchanges: u64,
}

impl Unigrid {
    pub fn new(domain: DomainSpec, nranks: usize, strategy: &str, execution: Execution) -> Result<Self, DriverError> {
        let strategy = strategies().create(strategy)?;
        let (topo, blocks) = decompose(&domain, nranks)?;
        let plan = strategy.plan(&domain, &topo, &blocks);
        let place = Placement::of_blocks(&blocks);
        let patches = blocks
            .iter()
            .map(|b| Patch::new(b.rank, b.rank, 0, b.owned, domain.ghost))
            .collect();
        Ok(Self {
            domain,
            topo,
            blocks,
            patches,
            layout: Layout::default(),
            strategy,
            plan,
            place,
            execution,
            times: vec![0.0],
            steps: 0,
            last_exchange: ExchangeStats::default(),
            exchanges: 0,
        })
    }

    pub fn topology(&self) -> &ProcessTopology {
        &self.topo
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn strategy_name(&self) -> &'static str {
        self.strategy.name()
    }

    pub fn plan(&self) -> &ExchangePlan {
        &self.plan
    }

    /// Statistics of the most recent exchange, and the number of exchanges so far.
    pub fn exchange_stats(&self) -> (&ExchangeStats, u64) {
        (&self.last_exchange, self.exchanges)
    }

    /// Exchange ghosts of an arbitrary field set laid out on this driver's blocks.
    pub fn exchange(&self, data: &mut FieldSet) -> ExchangeStats {
        execute(&self.plan, &self.place, data, self.execution)
    }

    pub(crate) fn restore_clock(&mut self, desc: &DriverDesc) -> Result<(), DriverError> {
        let level = desc
            .levels
            .first()
            .ok_or_else(|| DriverError::Config("description has no levels".into()))?;
        self.times = level.times.clone();
        self.steps = level.steps;
        Ok(())
    }

    fn geoms(&self) -> Vec<PatchGeom> {
        self.patches.iter().map(|p| geom_of(&self.domain, p)).collect()
    }
}

impl Driver for Unigrid {
    fn name(&self) -> &'static str {
        "unigrid"
    }

    fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn nranks(&self) -> usize {
        self.topo.nranks
    }

    fn nlevels(&self) -> usize {
        1
    }

    fn allocate(&mut self, groups: &[VariableGroup]) -> Result<(), DriverError> {
        self.layout = Layout::new(groups, self.domain.ghost, 1)?;
        for p in &mut self.patches {
            p.storage = self.layout.new_storage(p.ext.volume());
        }
        let depth = (0..groups.len()).map(|g| self.layout.stored_time_levels(g)).max().unwrap_or(1);
        let (t0, dt) = (self.times[0], if self.times.len() > 1 { self.times[0] - self.times[1] } else { 0.0 });
        self.times = (0..depth).map(|k| t0 - k as f64 * dt).collect();
        Ok(())
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn patches(&self) -> Vec<&Patch> {
        self.patches.iter().collect()
    }

    fn patches_mut(&mut self) -> Vec<&mut Patch> {
        self.patches.iter_mut().collect()
    }

    fn level_times(&self, _level: usize) -> &[f64] {
        &self.times
    }

    fn level_steps(&self) -> Vec<u64> {
        vec![self.steps]
    }

    fn set_time(&mut self, t0: f64, dt0: f64) {
        let n = self.times.len().max(1);
        self.times = (0..n).map(|k| t0 - k as f64 * dt0).collect();
    }

    fn sync(&mut self, group: &str) -> Result<(), DriverError> {
        let gi = self.layout.group_index(group)?;
        let mut data = take_current(&mut self.patches, gi);
        self.last_exchange = execute(&self.plan, &self.place, &mut data, self.execution);
        self.exchanges += 1;
        put_current(&mut self.patches, gi, data);
        Ok(())
    }

    fn for_each_block(&mut self, f: &BlockFn<'_>) -> Result<(), DriverError> {
        let times = self.times.as_slice();
        let items = self.patches.iter_mut().map(|p| (p, times)).collect();
        run_blocks(&self.domain, &self.layout, items, f, self.execution)
    }

    fn evolve(&mut self, systems: &[EvolvedSystem<'_>], integrator: &dyn Integrator, dt0: f64) -> Result<(), DriverError> {
        let geoms = self.geoms();
        let mut results = Vec::with_capacity(systems.len());
        for sys in systems {
            let gi = self.layout.group_index(sys.group)?;
            let mut state = current_state(&self.patches, gi);
            let (plan, place, exec) = (&self.plan, &self.place, self.execution);
            let mut last = ExchangeStats::default();
            let mut count = 0u64;
            integrator.step(
                &mut state,
                dt0,
                &mut |s, k| level_rhs(sys.physics, &geoms, s, k, exec),
                &mut |s| {
                    last = execute(plan, place, s, exec);
                    count += 1;
                },
            )?;
            self.last_exchange = last;
            self.exchanges += count;
            results.push((gi, state));
        }
        for (gi, state) in results {
            for (p, s) in self.patches.iter_mut().zip(state) {
                p.storage[gi].rotate_in(s);
            }
        }
        let t = self.times[0] + dt0;
        self.times.pop();
        self.times.insert(0, t);
        self.steps += 1;
        Ok(())
    }

    fn reduce(&self, var: &str, op: ReduceOp) -> Result<f64, DriverError> {
        let r = self.layout.var(var)?;
        Ok(reduce_patches(&self.patches(), r, op))
    }

    fn interpolate(&self, var: &str, points: &[[f64; 3]], order: usize) -> Result<Vec<Result<f64, InterpError>>, DriverError> {
        let r = self.layout.var(var)?;
        interpolate_points(&self.domain, &self.patches(), r, points, order)
    }

    fn describe(&self) -> DriverDesc {
        DriverDesc {
            driver: "unigrid".into(),
            domain: self.domain.clone(),
            strategy: self.strategy.name().into(),
            levels: vec![LevelDesc {
                boxes: vec![self.domain.index_box()],
                times: self.times.clone(),
                steps: self.steps,
            }],
            amr: None,
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
