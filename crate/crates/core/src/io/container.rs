//! The dataset container: `TPST`, a version byte, a little-endian `u64`
//! header length, a UTF-8 JSON header, then the raw little-endian `f64`
//! payloads. Payload offsets count bytes from the start of the payload
//! section.

use super::IoError;
use crate::grid::IBox;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"TPST";
pub const VERSION: u8 = 0x01;
const PREAMBLE: usize = 4 + 1 + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    /// Qualified variable name, `thorn::var`.
    pub name: String,
    pub iteration: u64,
    pub time: f64,
    pub level: usize,
    pub rank: usize,
    /// Owned box of the block; the payload covers exactly this box.
    #[serde(rename = "box")]
    pub owned: IBox,
    pub ghost_width: usize,
    pub attributes: BTreeMap<String, String>,
    pub offset: u64,
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    datasets: Vec<DatasetHeader>,
}

/// Serialise datasets, assigning offsets and lengths in order.
pub fn encode(datasets: &mut [Dataset]) -> Result<Vec<u8>, IoError> {
    let mut offset = 0u64;
    for d in datasets.iter_mut() {
        let n = d.header.owned.volume();
        if n != d.values.len() {
            return Err(IoError::Format {
                path: d.header.name.clone(),
                reason: format!("box {} holds {n} points but {} values were given", d.header.owned, d.values.len()),
            });
        }
        d.header.offset = offset;
        d.header.length = 8 * n as u64;
        offset += d.header.length;
    }
    let header = serde_json::to_vec(&FileHeader {
        datasets: datasets.iter().map(|d| d.header.clone()).collect(),
    })?;
    let mut out = Vec::with_capacity(PREAMBLE + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for d in datasets.iter() {
        for v in &d.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parse the preamble and header; returns the headers and the payload section.
pub fn decode_header<'a>(bytes: &'a [u8], path: &Path) -> Result<(Vec<DatasetHeader>, &'a [u8]), IoError> {
    let bad = |reason: String| IoError::Format {
        path: path.display().to_string(),
        reason,
    };
    if bytes.len() < PREAMBLE || &bytes[..4] != MAGIC {
        return Err(bad("not a TPST container".into()));
    }
    if bytes[4] != VERSION {
        return Err(IoError::Version {
            path: path.display().to_string(),
            found: bytes[4] as u32,
            expected: VERSION as u32,
        });
    }
    let hlen = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(PREAMBLE..).unwrap_or_default();
    if hlen > body.len() {
        return Err(bad(format!("header length {hlen} exceeds file size")));
    }
    let header: FileHeader = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(format!("header: {e}")))?;
    Ok((header.datasets, &body[hlen..]))
}

/// The values of one dataset, after checking its extent against the file.
pub fn payload(h: &DatasetHeader, section: &[u8], path: &Path) -> Result<Vec<f64>, IoError> {
    let corrupt = |reason: String| IoError::Corrupt {
        chunk: path.display().to_string(),
        reason,
    };
    if h.length != 8 * h.owned.volume() as u64 {
        return Err(corrupt(format!(
            "dataset {} on box {} declares {} bytes, expected {}",
            h.name,
            h.owned,
            h.length,
            8 * h.owned.volume()
        )));
    }
    let end = h.offset.checked_add(h.length).filter(|e| *e <= section.len() as u64).ok_or_else(|| {
        corrupt(format!(
            "dataset {} spans bytes {}..{} of a {}-byte payload section",
            h.name,
            h.offset,
            h.offset.saturating_add(h.length),
            section.len()
        ))
    })?;
    Ok(section[h.offset as usize..end as usize]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Fs {
        path: path.display().to_string(),
        source,
    })
}

/// Every dataset in a container file, in stored order.
pub fn read_datasets(path: &Path) -> Result<Vec<Dataset>, IoError> {
    let bytes = read_file(path)?;
    let (headers, section) = decode_header(&bytes, path)?;
    headers
        .into_iter()
        .map(|h| {
            let values = payload(&h, section, path)?;
            Ok(Dataset { header: h, values })
        })
        .collect()
}

/// The datasets of `variable` at `iteration` in one file (one per block).
pub fn read_dataset(path: &Path, variable: &str, iteration: u64) -> Result<Vec<Dataset>, IoError> {
    let bytes = read_file(path)?;
    let (headers, section) = decode_header(&bytes, path)?;
    let found: Vec<Dataset> = headers
        .into_iter()
        .filter(|h| h.name == variable && h.iteration == iteration)
        .map(|h| {
            let values = payload(&h, section, path)?;
            Ok(Dataset { header: h, values })
        })
        .collect::<Result<_, IoError>>()?;
    if found.is_empty() {
        return Err(IoError::NotFound {
            path: path.display().to_string(),
            what: format!("variable {variable} at iteration {iteration}"),
        });
    }
    Ok(found)
}
