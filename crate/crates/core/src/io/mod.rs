//! Annotated dataset output and checkpoint/restart.
//!
//! Output ranks collect datasets from the ranks assigned to them through
//! the same [`Mailbox`] used for ghost exchange and each writes one
//! container file. Checkpoints store the owned points of every stored time
//! level, one chunk file per rank, plus a JSON manifest that indexes them.

pub mod container;

pub use container::{read_dataset, read_datasets, Dataset, DatasetHeader, MAGIC, VERSION};

use crate::driver::transport::{HaloMessage, Mailbox};
use crate::driver::{restore_driver, Driver, DriverDesc, DriverError, Execution};
use crate::flesh::{Flesh, FleshError, ParamTable, ParamValue, Simulation};
use crate::grid::{copy_region, IBox, Patch};
use crate::registry::{Registry, RegistryError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {reason}")]
    Format { path: String, reason: String },
    #[error("{path}: format version {found}, this build reads version {expected}")]
    Version { path: String, found: u32, expected: u32 },
    #[error("corrupt chunk {chunk}: {reason}")]
    Corrupt { chunk: String, reason: String },
    #[error("{path}: no {what}")]
    NotFound { path: String, what: String },
    #[error(transparent)]
    Strategy(#[from] RegistryError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Flesh(#[from] FleshError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.display().to_string(),
        source,
    }
}

/// Which rank writes the data of each rank.
pub trait OutputStrategy: Send + Sync {
    fn name(&self) -> String;
    fn writer_of(&self, rank: usize, nranks: usize) -> usize;

    fn writers(&self, nranks: usize) -> Vec<usize> {
        (0..nranks).map(|r| self.writer_of(r, nranks)).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// Rank 0 collects everything.
pub struct SingleCollector;
/// Every rank writes its own file.
pub struct PerRank;
/// Ranks `0, n, 2n, ...` each collect from the `n - 1` ranks after them.
pub struct EveryNth(pub usize);

impl OutputStrategy for SingleCollector {
    fn name(&self) -> String {
        "single-collector".into()
    }
    fn writer_of(&self, _rank: usize, _nranks: usize) -> usize {
        0
    }
}

impl OutputStrategy for PerRank {
    fn name(&self) -> String {
        "per-rank".into()
    }
    fn writer_of(&self, rank: usize, _nranks: usize) -> usize {
        rank
    }
}

impl OutputStrategy for EveryNth {
    fn name(&self) -> String {
        format!("every-nth({})", self.0)
    }
    fn writer_of(&self, rank: usize, _nranks: usize) -> usize {
        rank - rank % self.0
    }
}

pub fn output_strategies() -> Registry<dyn OutputStrategy> {
    let mut r: Registry<dyn OutputStrategy> = Registry::new("output strategy");
    r.register_simple("single-collector", || Box::new(SingleCollector));
    r.register_simple("per-rank", || Box::new(PerRank));
    r.register("every-nth", |arg| {
        let n: usize = arg
            .ok_or("every-nth needs a stride, e.g. every-nth(4)")?
            .trim()
            .parse()
            .map_err(|e| format!("bad stride: {e}"))?;
        if n == 0 {
            return Err("stride must be at least 1".into());
        }
        Ok(Box::new(EveryNth(n)))
    });
    r
}

const PHASE_OUTPUT: u32 = 200;

fn attributes(driver: &dyn Driver, p: &Patch, group: &str, extra: &[(&str, String)]) -> BTreeMap<String, String> {
    let d = driver.domain();
    let h = d.level_spacing(p.level);
    let mut a = BTreeMap::from([
        ("coordinates".to_string(), "cartesian".to_string()),
        ("tensor_type".to_string(), "scalar".to_string()),
        ("refinement_level".to_string(), p.level.to_string()),
        ("group".to_string(), group.to_string()),
        ("origin".to_string(), format!("{:?}", d.origin)),
        ("spacing".to_string(), format!("{h:?}")),
        ("boundary".to_string(), format!("{:?}", d.boundary).to_lowercase()),
    ]);
    for (k, v) in extra {
        a.insert(k.to_string(), v.clone());
    }
    a
}

fn owned_values(p: &Patch, level: &[Vec<f64>], var: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.owned.volume());
    crate::grid::pack_region(&level[var], &p.ext, &p.owned, &mut out);
    out
}

/// Datasets of the current time level of `groups` (all groups if empty),
/// ordered by level, rank, block, variable.
fn current_datasets(driver: &dyn Driver, groups: &[&str], iteration: u64) -> Result<Vec<Dataset>, IoError> {
    let layout = driver.layout();
    let gis: Vec<usize> = if groups.is_empty() {
        (0..layout.groups().len()).collect()
    } else {
        groups.iter().map(|g| layout.group_index(g)).collect::<Result<_, _>>()?
    };
    let mut out = Vec::new();
    for p in driver.patches() {
        let time = driver.level_times(p.level)[0];
        for &gi in &gis {
            let g = &layout.groups()[gi];
            for (vi, name) in g.qualified_variables().into_iter().enumerate() {
                out.push(Dataset {
                    header: DatasetHeader {
                        name,
                        iteration,
                        time,
                        level: p.level,
                        rank: p.rank,
                        owned: p.owned,
                        ghost_width: p.ghost(),
                        attributes: attributes(driver, p, &g.name, &[]),
                        offset: 0,
                        length: 0,
                    },
                    values: owned_values(p, &p.storage[gi].levels[0], vi),
                });
            }
        }
    }
    Ok(out)
}

/// Ship each dataset from its rank to its writer; returns the datasets
/// each writer holds, in delivery order.
fn collect(datasets: Vec<Dataset>, strategy: &dyn OutputStrategy, nranks: usize) -> BTreeMap<usize, Vec<Dataset>> {
    let mut mailbox = Mailbox::new();
    let mut headers = Vec::with_capacity(datasets.len());
    for (id, d) in datasets.into_iter().enumerate() {
        mailbox.send(HaloMessage {
            source: d.header.rank,
            dest: strategy.writer_of(d.header.rank, nranks),
            phase: PHASE_OUTPUT,
            region_id: id,
            region: d.header.owned,
            payload: d.values,
        });
        headers.push(Some(d.header));
    }
    let mut by_writer: BTreeMap<usize, Vec<Dataset>> = strategy.writers(nranks).into_iter().map(|w| (w, Vec::new())).collect();
    for msg in mailbox.drain_ordered() {
        let header = headers[msg.region_id].take().expect("each dataset is delivered once");
        by_writer.entry(msg.dest).or_default().push(Dataset {
            header,
            values: msg.payload,
        });
    }
    by_writer
}

/// Write `files` (path, bytes) and return the paths; on failure every file
/// this call created is removed.
fn write_all(files: Vec<(PathBuf, Vec<u8>)>) -> Result<Vec<PathBuf>, IoError> {
    let mut done: Vec<PathBuf> = Vec::new();
    for (path, bytes) in files {
        if let Err(e) = std::fs::write(&path, bytes) {
            for p in &done {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(&path);
            return Err(fs_err(&path)(e));
        }
        done.push(path);
    }
    Ok(done)
}

fn create_dir(dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(fs_err(dir))
}

pub fn output_file_name(iteration: u64, writer: usize) -> String {
    format!("vars_it{iteration:08}_rank{writer:05}.tpst")
}

/// Write the current time level of `groups` (every group if empty) to
/// `dir`, one container per output rank of `strategy`.
pub fn write_vars(driver: &dyn Driver, groups: &[&str], strategy: &str, dir: &Path, iteration: u64) -> Result<Vec<PathBuf>, IoError> {
    let strategy = output_strategies().create(strategy)?;
    let datasets = current_datasets(driver, groups, iteration)?;
    create_dir(dir)?;
    let files = collect(datasets, strategy.as_ref(), driver.nranks())
        .into_iter()
        .map(|(w, mut ds)| Ok((dir.join(output_file_name(iteration, w)), container::encode(&mut ds)?)))
        .collect::<Result<Vec<_>, IoError>>()?;
    write_all(files)
}

pub const CHECKPOINT_FORMAT: u32 = 1;
pub const MANIFEST_FILE: &str = "checkpoint.json";

/// One stored array in a chunk file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkEntry {
    pub variable: String,
    pub group: String,
    pub time_level: usize,
    pub level: usize,
    #[serde(rename = "box")]
    pub owned: IBox,
    pub offset: u64,
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkIndex {
    pub rank: usize,
    pub file: String,
    pub entries: Vec<ChunkEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    /// Seconds since the Unix epoch; kept out of the chunks so that
    /// checkpoints of equal states have equal chunk bytes.
    pub written_at: u64,
    pub parameters: BTreeMap<String, ParamValue>,
    pub iteration: u64,
    pub time: f64,
    pub nranks: usize,
    pub driver: DriverDesc,
    pub chunks: Vec<ChunkIndex>,
}

pub fn chunk_file_name(rank: usize) -> String {
    format!("chunk_{rank}.tpst")
}

/// Write every stored time level of every group: `checkpoint.json` plus one
/// `chunk_<rank>.tpst` per rank.
pub fn checkpoint_write(driver: &dyn Driver, params: &ParamTable, iteration: u64, dir: &Path) -> Result<CheckpointManifest, IoError> {
    let layout = driver.layout();
    let mut per_rank: BTreeMap<usize, Vec<Dataset>> = (0..driver.nranks()).map(|r| (r, Vec::new())).collect();
    for p in driver.patches() {
        let times = driver.level_times(p.level);
        for (gi, g) in layout.groups().iter().enumerate() {
            for (tl, level) in p.storage[gi].levels.iter().enumerate() {
                for (vi, name) in g.qualified_variables().into_iter().enumerate() {
                    per_rank.entry(p.rank).or_default().push(Dataset {
                        header: DatasetHeader {
                            name,
                            iteration,
                            time: times.get(tl).copied().unwrap_or(f64::NAN),
                            level: p.level,
                            rank: p.rank,
                            owned: p.owned,
                            ghost_width: p.ghost(),
                            attributes: attributes(driver, p, &g.name, &[("time_level", tl.to_string())]),
                            offset: 0,
                            length: 0,
                        },
                        values: owned_values(p, level, vi),
                    });
                }
            }
        }
    }
    create_dir(dir)?;
    let mut files = Vec::new();
    let mut chunks = Vec::new();
    for (rank, mut ds) in per_rank {
        let bytes = container::encode(&mut ds)?;
        let file = chunk_file_name(rank);
        chunks.push(ChunkIndex {
            rank,
            file: file.clone(),
            entries: ds
                .iter()
                .map(|d| ChunkEntry {
                    variable: d.header.name.clone(),
                    group: d.header.attributes["group"].clone(),
                    time_level: d.header.attributes["time_level"].parse().expect("written above"),
                    level: d.header.level,
                    owned: d.header.owned,
                    offset: d.header.offset,
                    length: d.header.length,
                })
                .collect(),
        });
        files.push((dir.join(file), bytes));
    }
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_FORMAT,
        written_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        parameters: params.values().clone(),
        iteration,
        time: driver.time(),
        nranks: driver.nranks(),
        driver: driver.describe(),
        chunks,
    };
    files.push((dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?));
    write_all(files)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest, IoError> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = container::read_file(&path)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != CHECKPOINT_FORMAT {
        return Err(IoError::Version {
            path: path.display().to_string(),
            found,
            expected: CHECKPOINT_FORMAT,
        });
    }
    serde_json::from_value(value).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// What a restore read: for each new rank, the chunk files it opened.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RestoreReport {
    pub files_opened: BTreeMap<usize, Vec<String>>,
}

/// Rebuild a simulation from a checkpoint on `nranks` ranks. Each rank
/// opens only the chunks whose index intersects its owned boxes; ghost
/// zones are refreshed afterwards.
pub fn checkpoint_restore(
    dir: &Path,
    flesh: Flesh,
    nranks: usize,
    execution: Execution,
) -> Result<(Simulation, RestoreReport), IoError> {
    let manifest = read_manifest(dir)?;
    let mut params = ParamTable::new(flesh.parameter_specs().clone());
    for (k, v) in &manifest.parameters {
        params.set(k, v.clone())?;
    }
    if params.spec("driver::nranks").is_ok() {
        params.set("driver::nranks", ParamValue::Int(nranks as i64))?;
    }
    let driver = restore_driver(&manifest.driver, nranks, execution)?;
    let mut sim = Simulation::assemble(flesh, params, driver, manifest.iteration)?;

    // which chunk files each new rank needs
    let mut needs: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for p in sim.driver().patches() {
        let set = needs.entry(p.rank).or_default();
        for (ci, c) in manifest.chunks.iter().enumerate() {
            if c.entries.iter().any(|e| e.level == p.level && e.owned.intersects(&p.owned)) {
                set.insert(ci);
            }
        }
    }
    let mut report = RestoreReport::default();
    let layout = sim.driver().layout().clone();
    let mut filled: Vec<BTreeMap<(usize, usize, usize), usize>> = Vec::new();
    let mut patches = sim.driver_mut().patches_mut();
    filled.resize_with(patches.len(), BTreeMap::new);
    for (rank, chunk_ids) in needs {
        let mine: Vec<usize> = (0..patches.len()).filter(|&i| patches[i].rank == rank).collect();
        for ci in chunk_ids {
            let chunk = &manifest.chunks[ci];
            let path = dir.join(&chunk.file);
            report.files_opened.entry(rank).or_default().push(chunk.file.clone());
            let bytes = container::read_file(&path)?;
            let (headers, section) = container::decode_header(&bytes, &path)?;
            if headers.len() != chunk.entries.len() {
                return Err(IoError::Corrupt {
                    chunk: path.display().to_string(),
                    reason: format!("{} datasets in file, {} in the index", headers.len(), chunk.entries.len()),
                });
            }
            for (h, e) in headers.iter().zip(&chunk.entries) {
                if h.offset != e.offset || h.length != e.length || h.owned != e.owned || h.name != e.variable {
                    return Err(IoError::Corrupt {
                        chunk: path.display().to_string(),
                        reason: format!("dataset {} does not match its index entry", h.name),
                    });
                }
                let targets: Vec<usize> = mine
                    .iter()
                    .copied()
                    .filter(|&i| patches[i].level == e.level && patches[i].owned.intersects(&e.owned))
                    .collect();
                if targets.is_empty() {
                    continue;
                }
                let values = container::payload(h, section, &path)?;
                let r = layout.var(&e.variable)?;
                for i in targets {
                    let p = &mut *patches[i];
                    let region = p.owned.intersect(&e.owned);
                    let Some(tl) = p.storage[r.group].levels.get_mut(e.time_level) else {
                        continue;
                    };
                    copy_region(&values, &e.owned, &mut tl[r.var], &p.ext, &region);
                    *filled[i].entry((r.group, r.var, e.time_level)).or_default() += region.volume();
                }
            }
        }
    }
    for (i, p) in patches.iter().enumerate() {
        for (gi, g) in p.storage.iter().enumerate() {
            for tl in 0..g.levels.len() {
                for v in 0..g.levels[tl].len() {
                    let got = filled[i].get(&(gi, v, tl)).copied().unwrap_or(0);
                    if got != p.owned.volume() {
                        return Err(IoError::Corrupt {
                            chunk: dir.display().to_string(),
                            reason: format!(
                                "chunks cover {got} of the {} owned points of {} time level {tl} on block {}",
                                p.owned.volume(),
                                layout.qualified_name(crate::driver::VarRef { group: gi, var: v }),
                                p.id
                            ),
                        });
                    }
                }
            }
        }
    }
    drop(patches);
    sim.resume()?;
    Ok((sim, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writer_assignment() {
        let r = output_strategies();
        let e = r.create("every-nth(4)").unwrap();
        assert_eq!(e.writers(8), vec![0, 4]);
        assert_eq!(e.writers(9), vec![0, 4, 8]);
        assert_eq!(r.create("single-collector").unwrap().writers(8), vec![0]);
        assert_eq!(r.create("per-rank").unwrap().writers(3), vec![0, 1, 2]);
        assert!(r.create("every-nth(0)").is_err());
        assert!(r.create("every-nth").is_err());
    }
}
