//! Dataset manifest.
//!
//! ```toml
//! version = 1
//! dev = "dev.tsv"          # optional, parallel
//! test = "test.tsv"        # optional, parallel
//!
//! [[dataset]]
//! name = "bitext"
//! path = "parallel.tsv"    # relative to the manifest
//! side = "parallel"        # parallel | mono-source | mono-target
//! tag = "<d:in>"
//! upsample = 3             # optional, default 1
//! iteration = 2            # optional: only used by that pipeline iteration
//! ```
//!
//! Parallel datasets tagged `<st>` or `<bt>` are treated as existing
//! self-training or back-translation data.

use std::path::{Path, PathBuf};

use lomt_core::corpus::tags;
use lomt_core::{Pair, Side, Tag, TaggedDataset};
use serde::{Deserialize, Serialize};

use super::corpus::{read_corpus, read_pairs};
use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: String,
    pub side: String,
    pub tag: String,
    #[serde(default = "one")]
    pub upsample: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetEntry>,
}

/// A loaded manifest with datasets grouped by role.
#[derive(Clone, Debug, Default)]
pub struct Datasets {
    pub bitext: Option<TaggedDataset>,
    pub st: Option<TaggedDataset>,
    pub bt: Option<TaggedDataset>,
    pub mono_source: Option<TaggedDataset>,
    pub mono_target: Option<TaggedDataset>,
    /// Per-iteration replacements, as `(iteration, dataset)`.
    pub overrides: Vec<(usize, TaggedDataset)>,
    pub dev: Option<Vec<Pair>>,
    pub test: Option<Vec<Pair>>,
}

impl Datasets {
    pub fn bitext(&self) -> Result<&TaggedDataset> {
        self.bitext.as_ref().ok_or_else(|| Error::Usage("the dataset manifest lists no parallel bitext".into()))
    }

    pub fn dev(&self) -> Result<&[Pair]> {
        self.dev.as_deref().ok_or_else(|| Error::Usage("no dev set given".into()))
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load(path: &Path) -> Result<Datasets> {
    let manifest: DatasetManifest = super::read_toml(path)?;
    if manifest.version != VERSION {
        return Err(Error::invalid(path, format!("unsupported manifest version {}", manifest.version)));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Datasets::default();
    for e in &manifest.datasets {
        let side: Side = e.side.parse()?;
        let tag = Tag::new(&e.tag)?;
        let (data, _) = read_corpus(&resolve(base, &e.path), side)?;
        let ds = TaggedDataset::new(&e.name, tag, e.upsample, data)?;
        if let Some(t) = e.iteration {
            out.overrides.push((t, ds));
            continue;
        }
        let slot = match (side, e.tag.as_str()) {
            (Side::Parallel, tags::SELF_TRAINED) => &mut out.st,
            (Side::Parallel, tags::BACK_TRANSLATED) => &mut out.bt,
            (Side::Parallel, _) => &mut out.bitext,
            (Side::MonoSource, _) => &mut out.mono_source,
            (Side::MonoTarget, _) => &mut out.mono_target,
        };
        if slot.is_some() {
            return Err(Error::invalid(path, format!("more than one dataset fills the role of {:?}", e.name)));
        }
        *slot = Some(ds);
    }
    out.dev = manifest.dev.as_deref().map(|d| read_pairs(&resolve(base, d))).transpose()?;
    out.test = manifest.test.as_deref().map(|d| read_pairs(&resolve(base, d))).transpose()?;
    Ok(out)
}

pub fn save(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    super::write_toml(path, manifest)
}
