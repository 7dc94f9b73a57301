//! JSON record written next to generated task directories so evaluation can
//! recover the ground-truth pairing.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use lintra_core::tasks::{DomainPair, PairingRecord, TaskParams};
use lintra_core::{Correspondence, ImageSet, Protocol, TaskName, TaskSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source-row split under the nonmatching protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub a_source: Vec<usize>,
    pub b_source: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub name: TaskName,
    pub params: TaskParams,
    pub protocol: Protocol,
    pub seed: u64,
    /// Paired-shuffled only: A row `i` came from source row `permutation[i]`.
    pub permutation: Option<Vec<usize>>,
    /// Nonmatching only.
    pub split: Option<SplitRecord>,
    pub a_ids: Vec<String>,
    pub b_ids: Vec<String>,
    /// Ground-truth `(A id, B id)` pairs; empty when nonmatching.
    pub pairs: Vec<(String, String)>,
}

impl Sidecar {
    pub fn new(spec: &TaskSpec, pair: &DomainPair) -> Self {
        let (permutation, split) = match &pair.record {
            PairingRecord::Permutation(p) => (Some(p.clone()), None),
            PairingRecord::Split { a_source, b_source } => (
                None,
                Some(SplitRecord {
                    a_source: a_source.clone(),
                    b_source: b_source.clone(),
                }),
            ),
        };
        let pairs = pair
            .correspondence()
            .map(|c| {
                c.pairs()
                    .iter()
                    .map(|&(i, j)| (pair.a.ids()[i].clone(), pair.b.ids()[j].clone()))
                    .collect()
            })
            .unwrap_or_default();
        Self {
            name: spec.name,
            params: spec.params,
            protocol: spec.protocol,
            seed: spec.seed,
            permutation,
            split,
            a_ids: pair.a.ids().to_vec(),
            b_ids: pair.b.ids().to_vec(),
            pairs,
        }
    }

    pub fn spec(&self) -> TaskSpec {
        TaskSpec {
            name: self.name,
            params: self.params,
            protocol: self.protocol,
            seed: self.seed,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        text.push('\n');
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Recorded pairs as row indices of the loaded sets, matched by id.
    pub fn correspondence(&self, a: &ImageSet, b: &ImageSet) -> Result<Correspondence> {
        if self.pairs.is_empty() {
            return Err(Error::DataMismatch(
                "sidecar records no pairs (nonmatching protocol)".into(),
            ));
        }
        let lookup = |set: &ImageSet| -> HashMap<String, usize> {
            set.ids()
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i))
                .collect()
        };
        let (in_a, in_b) = (lookup(a), lookup(b));
        let find = |map: &HashMap<String, usize>, id: &str| {
            map.get(id).copied().ok_or_else(|| {
                Error::DataMismatch(format!("id `{id}` from the sidecar is not in the set"))
            })
        };
        let pairs = self
            .pairs
            .iter()
            .map(|(ia, ib)| Ok((find(&in_a, ia)?, find(&in_b, ib)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Correspondence::new(pairs, a.len(), b.len())?)
    }
}
