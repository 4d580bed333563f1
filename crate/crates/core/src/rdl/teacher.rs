//! Source of teacher RDMs for a mini-batch.
//!
//! A live provider runs the frozen teacher in eval mode. An [`RdmCache`]
//! stores the upper triangles of previously computed teacher RDMs keyed by
//! a hash of the batch contents, and persists them as one binary file plus
//! one JSON manifest per tap:
//!
//! ```text
//! <tap>.rdm.bin        concatenated little-endian f64 upper triangles
//! <tap>.manifest.json  { "<batch hash>": { "offset": <byte offset>, "n": <n>, "metric": "<metric>" }, ... }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Mode, Network};
use crate::rdm::{compute_rdm, PairwiseMetric, Rdm};
use crate::tensor::Tensor;

/// Hex SHA-256 of the batch shape and values.
pub fn batch_hash(batch: &Tensor) -> String {
    let mut h = Sha256::new();
    for &d in batch.shape() {
        h.update((d as u64).to_le_bytes());
    }
    for v in batch.data() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{:02x}", b)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub offset: u64,
    pub n: usize,
    pub metric: PairwiseMetric,
}

/// Teacher RDMs keyed by tap, then by batch hash.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RdmCache {
    taps: BTreeMap<String, BTreeMap<String, Rdm>>,
}

impl RdmCache {
    pub fn new() -> Self {
        RdmCache::default()
    }

    pub fn get(&self, tap: &str, hash: &str) -> Option<&Rdm> {
        self.taps.get(tap).and_then(|m| m.get(hash))
    }

    pub fn insert(&mut self, tap: &str, hash: String, rdm: Rdm) {
        self.taps.entry(tap.to_string()).or_default().insert(hash, rdm);
    }

    pub fn len(&self) -> usize {
        self.taps.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (tap, entries) in &self.taps {
            let mut bin = Vec::new();
            let mut manifest = BTreeMap::new();
            for (hash, rdm) in entries {
                manifest.insert(
                    hash.clone(),
                    CacheEntry {
                        offset: bin.len() as u64,
                        n: rdm.n(),
                        metric: rdm.metric(),
                    },
                );
                for v in rdm.upper() {
                    bin.extend_from_slice(&v.to_le_bytes());
                }
            }
            fs::write(dir.join(format!("{}.rdm.bin", tap)), bin)?;
            fs::write(
                dir.join(format!("{}.manifest.json", tap)),
                serde_json::to_string_pretty(&manifest)?,
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut cache = RdmCache::new();
        let mut names: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|s| s.strip_suffix(".manifest.json"))
                    .map(str::to_string)
            })
            .collect();
        names.sort();
        for tap in names {
            let manifest: BTreeMap<String, CacheEntry> =
                serde_json::from_str(&fs::read_to_string(dir.join(format!("{}.manifest.json", tap)))?)?;
            let bin = fs::read(dir.join(format!("{}.rdm.bin", tap)))?;
            for (hash, entry) in manifest {
                let count = entry.n * entry.n.saturating_sub(1) / 2;
                let start = entry.offset as usize;
                let end = start + 8 * count;
                if end > bin.len() {
                    return Err(Error::Truncated {
                        what: format!("{}.rdm.bin", tap),
                        expected: end,
                        found: bin.len(),
                    });
                }
                let upper: Vec<f64> = bin[start..end]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                cache.insert(&tap, hash, Rdm::from_upper(entry.n, &upper, entry.metric)?);
            }
        }
        Ok(cache)
    }
}

/// Supplies the teacher RDM for each student tap of a mini-batch.
#[derive(Debug, Clone)]
pub struct TeacherRdmProvider {
    teacher: Option<Network>,
    /// student tap -> teacher tap
    tap_map: BTreeMap<String, String>,
    metric: PairwiseMetric,
    cache: Option<RdmCache>,
}

impl TeacherRdmProvider {
    /// Runs `teacher` on every request.
    pub fn live(teacher: Network, tap_map: BTreeMap<String, String>, metric: PairwiseMetric) -> Result<Self> {
        for t in tap_map.values() {
            teacher.tap_layer(t)?;
        }
        Ok(TeacherRdmProvider {
            teacher: Some(teacher),
            tap_map,
            metric,
            cache: None,
        })
    }

    /// Serves only from `cache`; a miss is an error. Cache entries are
    /// keyed by student tap name.
    pub fn cached(cache: RdmCache, metric: PairwiseMetric) -> Self {
        let tap_map = cache.taps.keys().map(|k| (k.clone(), k.clone())).collect();
        TeacherRdmProvider {
            teacher: None,
            tap_map,
            metric,
            cache: Some(cache),
        }
    }

    /// Memoizes live results in an in-memory cache (see [`Self::cache`]).
    pub fn with_memo(mut self) -> Self {
        self.cache.get_or_insert_with(RdmCache::new);
        self
    }

    pub fn metric(&self) -> PairwiseMetric {
        self.metric
    }

    pub fn tap_map(&self) -> &BTreeMap<String, String> {
        &self.tap_map
    }

    pub fn cache(&self) -> Option<&RdmCache> {
        self.cache.as_ref()
    }

    pub fn teacher(&self) -> Option<&Network> {
        self.teacher.as_ref()
    }

    /// Teacher RDMs for `batch` at the requested student taps.
    pub fn rdms(&mut self, batch: &Tensor, student_taps: &[String]) -> Result<BTreeMap<String, Rdm>> {
        let hash = if self.cache.is_some() { Some(batch_hash(batch)) } else { None };
        let mut out = BTreeMap::new();
        let mut missing = Vec::new();
        for tap in student_taps {
            if !self.tap_map.contains_key(tap) {
                return Err(Error::UnknownTap(format!("{} (no teacher mapping)", tap)));
            }
            match (&self.cache, &hash) {
                (Some(c), Some(h)) => match c.get(tap, h) {
                    Some(r) => {
                        out.insert(tap.clone(), r.clone());
                    }
                    None => missing.push(tap.clone()),
                },
                _ => missing.push(tap.clone()),
            }
        }
        if missing.is_empty() {
            return Ok(out);
        }
        let teacher = self
            .teacher
            .as_ref()
            .ok_or_else(|| Error::invalid("teacher RDM not in cache and no live teacher"))?;
        let deepest = missing
            .iter()
            .map(|t| teacher.tap_layer(&self.tap_map[t]))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap();
        let pass = teacher.forward_to(batch, Mode::Eval, 0, deepest + 1)?;
        for tap in missing {
            let layer = teacher.tap_layer(&self.tap_map[&tap])?;
            let rdm = compute_rdm(pass.layer_output(layer), self.metric)?;
            if let (Some(c), Some(h)) = (self.cache.as_mut(), &hash) {
                c.insert(&tap, h.clone(), rdm.clone());
            }
            out.insert(tap, rdm);
        }
        Ok(out)
    }
}
