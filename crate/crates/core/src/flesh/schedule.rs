use super::{FleshError, LevelContext};
use crate::driver::BlockView;
use crate::flesh::ParamTable;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// The fixed schedule bins, in the order a run visits them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Bin {
    Startup,
    Initial,
    Prestep,
    Evol,
    Poststep,
    Analysis,
    Output,
    Shutdown,
}

impl Bin {
    pub const ALL: [Bin; 8] = [
        Bin::Startup,
        Bin::Initial,
        Bin::Prestep,
        Bin::Evol,
        Bin::Poststep,
        Bin::Analysis,
        Bin::Output,
        Bin::Shutdown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Bin::Startup => "STARTUP",
            Bin::Initial => "INITIAL",
            Bin::Prestep => "PRESTEP",
            Bin::Evol => "EVOL",
            Bin::Poststep => "POSTSTEP",
            Bin::Analysis => "ANALYSIS",
            Bin::Output => "OUTPUT",
            Bin::Shutdown => "SHUTDOWN",
        }
    }
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Bin {
    type Err = FleshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Bin::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| FleshError::Config(format!("unknown schedule bin {s:?}")))
    }
}

/// What a block callable sees besides its block.
pub struct ItemContext<'a> {
    pub item: &'a str,
    pub bin: Bin,
    pub iteration: u64,
    pub params: &'a ParamTable,
}

pub type BlockCallable = Arc<dyn Fn(&mut BlockView<'_>, &ItemContext<'_>) -> Result<(), String> + Send + Sync>;
pub type LevelCallable = Arc<dyn Fn(&mut LevelContext<'_>) -> Result<(), String> + Send + Sync>;

/// The work of a schedule item: either a function of one block, invoked
/// for every block, or a function given the driver as a whole (for
/// operations such as time integration and output that span blocks).
#[derive(Clone)]
pub enum Callable {
    Block(BlockCallable),
    Level(LevelCallable),
}

impl fmt::Debug for Callable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Callable::Block(_) => "Callable::Block",
            Callable::Level(_) => "Callable::Level",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ScheduleItem {
    pub name: String,
    pub bin: Bin,
    pub after: BTreeSet<String>,
    pub before: BTreeSet<String>,
    /// Groups whose ghosts the driver refreshes once the item has run.
    pub sync_groups: Vec<String>,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    pub callable: Callable,
}

impl ScheduleItem {
    pub fn block<F>(name: &str, bin: Bin, f: F) -> Self
    where
        F: Fn(&mut BlockView<'_>, &ItemContext<'_>) -> Result<(), String> + Send + Sync + 'static,
    {
        Self::with(name, bin, Callable::Block(Arc::new(f)))
    }

    pub fn level<F>(name: &str, bin: Bin, f: F) -> Self
    where
        F: Fn(&mut LevelContext<'_>) -> Result<(), String> + Send + Sync + 'static,
    {
        Self::with(name, bin, Callable::Level(Arc::new(f)))
    }

    fn with(name: &str, bin: Bin, callable: Callable) -> Self {
        Self {
            name: name.to_string(),
            bin,
            after: BTreeSet::new(),
            before: BTreeSet::new(),
            sync_groups: Vec::new(),
            reads: BTreeSet::new(),
            writes: BTreeSet::new(),
            callable,
        }
    }

    pub fn after(mut self, name: &str) -> Self {
        self.after.insert(name.to_string());
        self
    }

    pub fn before(mut self, name: &str) -> Self {
        self.before.insert(name.to_string());
        self
    }

    pub fn sync(mut self, group: &str) -> Self {
        self.sync_groups.push(group.to_string());
        self
    }

    pub fn reads(mut self, group: &str) -> Self {
        self.reads.insert(group.to_string());
        self
    }

    pub fn writes(mut self, group: &str) -> Self {
        self.writes.insert(group.to_string());
        self
    }
}

/// Order the items of `bin` so that every before/after constraint holds.
///
/// Kahn's algorithm with a name-ordered ready set: whenever several items
/// are free to run, the lexicographically smallest goes first, so the
/// order is a pure function of the item set. Constraints naming items
/// outside the bin are ignored with a warning.
pub fn resolve_schedule(items: &[ScheduleItem], bin: Bin) -> Result<Vec<&ScheduleItem>, FleshError> {
    let in_bin: BTreeMap<&str, &ScheduleItem> = items.iter().filter(|i| i.bin == bin).map(|i| (i.name.as_str(), i)).collect();
    let mut succ: BTreeMap<&str, BTreeSet<&str>> = in_bin.keys().map(|k| (*k, BTreeSet::new())).collect();
    let mut pred: BTreeMap<&str, BTreeSet<&str>> = succ.clone();
    for item in in_bin.values() {
        let me = item.name.as_str();
        let edges = item
            .after
            .iter()
            .map(|a| (a.as_str(), me))
            .chain(item.before.iter().map(|b| (me, b.as_str())));
        for (first, then) in edges {
            let other = if first == me { then } else { first };
            if !in_bin.contains_key(other) {
                log::warn!("schedule item {me} in {bin} refers to {other}, which is not in that bin; ignored");
                continue;
            }
            succ.get_mut(first).expect("in bin").insert(then);
            pred.get_mut(then).expect("in bin").insert(first);
        }
    }
    let mut indegree: BTreeMap<&str, usize> = pred.iter().map(|(k, v)| (*k, v.len())).collect();
    let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
    let mut order = Vec::with_capacity(in_bin.len());
    while let Some(next) = ready.pop_first() {
        order.push(in_bin[next]);
        for s in &succ[next] {
            let d = indegree.get_mut(s).expect("in bin");
            *d -= 1;
            if *d == 0 {
                ready.insert(s);
            }
        }
    }
    if order.len() < in_bin.len() {
        let left: BTreeSet<&str> = indegree.iter().filter(|(_, d)| **d > 0).map(|(k, _)| *k).collect();
        return Err(FleshError::Cycle {
            bin,
            members: find_cycle(&left, &pred),
        });
    }
    Ok(order)
}

/// Every unscheduled item has an unscheduled predecessor, so walking
/// predecessors from any of them must revisit a node; the loop found is a
/// genuine cycle. It is reported starting from its smallest name.
fn find_cycle(left: &BTreeSet<&str>, pred: &BTreeMap<&str, BTreeSet<&str>>) -> Vec<String> {
    let mut path: Vec<&str> = Vec::new();
    let mut at = *left.first().expect("nonempty");
    loop {
        if let Some(pos) = path.iter().position(|p| *p == at) {
            let mut cycle: Vec<&str> = path[pos..].to_vec();
            // walked against the edges; flip to execution order
            cycle.reverse();
            let start = cycle.iter().enumerate().min_by_key(|(_, n)| **n).map(|(i, _)| i).unwrap_or(0);
            cycle.rotate_left(start);
            return cycle.into_iter().map(String::from).collect();
        }
        path.push(at);
        at = *pred[at].iter().find(|p| left.contains(*p)).expect("unscheduled items keep an unscheduled predecessor");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(name: &str) -> ScheduleItem {
        ScheduleItem::level(name, Bin::Evol, |_| Ok(()))
    }

    fn names(v: Vec<&ScheduleItem>) -> Vec<&str> {
        v.into_iter().map(|i| i.name.as_str()).collect()
    }

    #[test]
    fn chain_and_ties() {
        let items = vec![item("c").after("b"), item("b").after("a"), item("a")];
        assert_eq!(names(resolve_schedule(&items, Bin::Evol).unwrap()), ["a", "b", "c"]);
        let items = vec![item("z"), item("m"), item("a").after("z")];
        assert_eq!(names(resolve_schedule(&items, Bin::Evol).unwrap()), ["m", "z", "a"]);
        assert!(resolve_schedule(&items, Bin::Output).unwrap().is_empty());
    }

    #[test]
    fn cycles_are_named() {
        let items = vec![item("a").after("c"), item("b").after("a"), item("c").after("b"), item("d").after("c"), item("e")];
        match resolve_schedule(&items, Bin::Evol) {
            Err(FleshError::Cycle { members, .. }) => assert_eq!(members, ["a", "b", "c"]),
            other => panic!("expected a cycle, got {:?}", other.map(names)),
        }
    }

    #[test]
    fn references_outside_the_bin_are_ignored() {
        let items = vec![item("a").after("ghost"), item("b").before("a")];
        assert_eq!(names(resolve_schedule(&items, Bin::Evol).unwrap()), ["b", "a"]);
    }
}
