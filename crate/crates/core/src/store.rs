//! Memo cache for computed degrees, keyed by normalized pair systems, with a
//! line-delimited JSON file format:
//!
//! ```text
//! {"v":1,"key":"<base64>","deg":"<decimal>"}
//! ```
//!
//! A key is `[m, k]` followed by `k` records of an 8-byte little-endian set
//! bitset and the psi label, in normalized pair order.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use dashmap::mapref::entry::Entry;
use dashmap::DashMap;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::{normalize_system, validate, Label, MarkSet, Pair, PairSystem};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default cache file.
pub const CACHE_ENV: &str = "KAPDEG_CACHE";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("integrity violation: key {key} already maps to {stored}, refusing {offered}")]
    Integrity {
        key: String,
        stored: BigUint,
        offered: BigUint,
    },
    #[error("malformed degree key")]
    MalformedKey,
    #[error("{path}:{line}: unsupported cache schema version {found} (expected {SCHEMA_VERSION})")]
    Version {
        path: PathBuf,
        line: usize,
        found: u32,
    },
    #[error("{path}:{line}: corrupt cache entry: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("cache I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DegreeKey(Box<[u8]>);

impl DegreeKey {
    /// Key of an already normalized system.
    pub(crate) fn from_normalized(system: &PairSystem) -> DegreeKey {
        let mut bytes = Vec::with_capacity(2 + 9 * system.pairs.len());
        bytes.push(system.ambient.len() as u8);
        bytes.push(system.pairs.len() as u8);
        for p in &system.pairs {
            bytes.extend_from_slice(&p.set.bits().to_le_bytes());
            bytes.push(p.psi);
        }
        DegreeKey(bytes.into_boxed_slice())
    }

    /// Normalizes `system` and returns its key.
    pub fn of(system: &PairSystem) -> DegreeKey {
        DegreeKey::from_normalized(&normalize_system(system))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<DegreeKey, StoreError> {
        let key = DegreeKey(bytes.into());
        let system = key.to_system()?;
        if DegreeKey::of(&system) != key {
            return Err(StoreError::MalformedKey);
        }
        Ok(key)
    }

    pub fn to_base64(&self) -> String {
        BASE64.encode(&self.0)
    }

    pub fn from_base64(text: &str) -> Result<DegreeKey, StoreError> {
        let bytes = BASE64.decode(text).map_err(|_| StoreError::MalformedKey)?;
        DegreeKey::from_bytes(&bytes)
    }

    /// Decodes the normalized system the key stands for.
    pub fn to_system(&self) -> Result<PairSystem, StoreError> {
        let bytes = &self.0;
        let (&m, rest) = bytes.split_first().ok_or(StoreError::MalformedKey)?;
        let (&k, rest) = rest.split_first().ok_or(StoreError::MalformedKey)?;
        if rest.len() != 9 * k as usize || m as usize > 63 {
            return Err(StoreError::MalformedKey);
        }
        let pairs = rest
            .chunks_exact(9)
            .map(|chunk| {
                let bits = u64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
                Pair::new(MarkSet::from_bits(bits), chunk[8] as Label)
            })
            .collect();
        let system = PairSystem::on_range(m as usize, pairs);
        validate(&system).map_err(|_| StoreError::MalformedKey)?;
        Ok(system)
    }
}

impl std::fmt::Debug for DegreeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DegreeKey({})", self.to_base64())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeEntry {
    pub key: DegreeKey,
    pub degree: BigUint,
    pub version: u32,
}

#[derive(Serialize, Deserialize)]
struct EntryLine {
    v: u32,
    key: String,
    deg: String,
}

/// Concurrent in-memory degree cache. Reads never wait on more than one
/// shard lock.
#[derive(Debug, Default)]
pub struct DegreeStore {
    map: DashMap<DegreeKey, BigUint>,
}

impl DegreeStore {
    pub fn new() -> Self {
        DegreeStore::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, key: &DegreeKey) -> Option<DegreeEntry> {
        self.map.get(key).map(|v| DegreeEntry {
            key: key.clone(),
            degree: v.clone(),
            version: SCHEMA_VERSION,
        })
    }

    pub(crate) fn get_degree(&self, key: &DegreeKey) -> Option<BigUint> {
        self.map.get(key).map(|v| v.clone())
    }

    /// First writer wins. A second, different value for the same key is an
    /// integrity error.
    pub fn insert_or_get(&self, key: DegreeKey, degree: BigUint) -> Result<BigUint, StoreError> {
        match self.map.entry(key) {
            Entry::Occupied(slot) => {
                if *slot.get() != degree {
                    return Err(StoreError::Integrity {
                        key: slot.key().to_base64(),
                        stored: slot.get().clone(),
                        offered: degree,
                    });
                }
                Ok(degree)
            }
            Entry::Vacant(slot) => {
                slot.insert(degree.clone());
                Ok(degree)
            }
        }
    }

    /// All entries, sorted by key.
    pub fn entries(&self) -> Vec<DegreeEntry> {
        let mut out: Vec<DegreeEntry> = self
            .map
            .iter()
            .map(|e| DegreeEntry {
                key: e.key().clone(),
                degree: e.value().clone(),
                version: SCHEMA_VERSION,
            })
            .collect();
        out.sort_by(|a, b| a.key.cmp(&b.key));
        out
    }

    /// Writes every entry to `path` atomically (temp file + rename).
    pub fn flush(&self, path: &Path) -> Result<(), StoreError> {
        let io_err = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("jsonl.tmp");
        {
            let file = fs::File::create(&tmp).map_err(io_err)?;
            let mut out = BufWriter::new(file);
            for entry in self.entries() {
                let line = EntryLine {
                    v: SCHEMA_VERSION,
                    key: entry.key.to_base64(),
                    deg: entry.degree.to_str_radix(10),
                };
                serde_json::to_writer(&mut out, &line).map_err(|e| io_err(e.into()))?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            out.flush().map_err(io_err)?;
        }
        fs::rename(&tmp, path).map_err(io_err)
    }

    /// Loads a cache file. A missing file is an empty cache. An unparsable
    /// final line without a terminating newline is treated as an interrupted
    /// write: it is dropped with a warning.
    pub fn load(path: &Path) -> Result<DegreeStore, StoreError> {
        let text = match fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(DegreeStore::new()),
            Err(source) => {
                return Err(StoreError::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        let store = DegreeStore::new();
        let terminated = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let last = lines.len().saturating_sub(1);
        for (idx, raw) in lines.iter().enumerate() {
            let line_no = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let partial = idx == last && !terminated;
            let parsed = match parse_line(path, line_no, raw) {
                Ok(parsed) => parsed,
                Err(StoreError::Corrupt { reason, .. }) if partial => {
                    log::warn!(
                        "{}:{line_no}: dropping truncated trailing cache line ({reason})",
                        path.display()
                    );
                    break;
                }
                Err(e) => return Err(e),
            };
            let (key, degree) = parsed;
            store
                .insert_or_get(key, degree)
                .map_err(|e| StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: e.to_string(),
                })?;
        }
        Ok(store)
    }

    /// Cache path from [`CACHE_ENV`], if set and non-empty.
    pub fn path_from_env() -> Option<PathBuf> {
        std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    }
}

fn parse_line(path: &Path, line: usize, raw: &str) -> Result<(DegreeKey, BigUint), StoreError> {
    let corrupt = |reason: String| StoreError::Corrupt {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let entry: EntryLine = serde_json::from_str(raw).map_err(|e| corrupt(e.to_string()))?;
    if entry.v != SCHEMA_VERSION {
        return Err(StoreError::Version {
            path: path.to_path_buf(),
            line,
            found: entry.v,
        });
    }
    let key = DegreeKey::from_base64(&entry.key).map_err(|e| corrupt(e.to_string()))?;
    if entry.deg.is_empty() || !entry.deg.bytes().all(|b| b.is_ascii_digit()) {
        return Err(corrupt(format!(
            "degree {:?} is not a decimal integer",
            entry.deg
        )));
    }
    let degree = BigUint::parse_bytes(entry.deg.as_bytes(), 10)
        .ok_or_else(|| corrupt(format!("degree {:?} is not a decimal integer", entry.deg)))?;
    Ok((key, degree))
}
