//! Writing a generated synthetic language pair to disk.

use std::path::Path;

use lomt_core::synth::{SynthBundle, SynthSpec};

use crate::error::Result;
use crate::io::config::save_synth;
use crate::io::corpus::{write_pairs, write_sentences};
use crate::io::datasets::{self, DatasetEntry, DatasetManifest, VERSION};

pub const PARALLEL: &str = "parallel.tsv";
pub const MONO_SOURCE: &str = "mono.src";
pub const MONO_TARGET: &str = "mono.tgt";
pub const DEV: &str = "dev.tsv";
pub const TEST: &str = "test.tsv";
pub const SPEC: &str = "spec.toml";
pub const DATASETS: &str = "datasets.toml";

/// Writes the corpora, the spec that produced them and a dataset manifest
/// listing them.
pub fn write_bundle(dir: &Path, spec: &SynthSpec, b: &SynthBundle) -> Result<()> {
    write_pairs(&dir.join(PARALLEL), b.parallel.pairs())?;
    write_sentences(&dir.join(MONO_SOURCE), b.mono_src.sentences())?;
    write_sentences(&dir.join(MONO_TARGET), b.mono_tgt.sentences())?;
    write_pairs(&dir.join(DEV), &b.dev)?;
    write_pairs(&dir.join(TEST), &b.test)?;
    save_synth(&dir.join(SPEC), spec)?;
    let entry = |d: &lomt_core::TaggedDataset, path: &str| DatasetEntry {
        name: d.name.clone(),
        path: path.into(),
        side: d.side().as_str().into(),
        tag: d.tag.to_string(),
        upsample: d.upsample(),
        iteration: None,
    };
    let manifest = DatasetManifest {
        version: VERSION,
        dev: Some(DEV.into()),
        test: Some(TEST.into()),
        datasets: vec![
            entry(&b.parallel, PARALLEL),
            entry(&b.mono_src, MONO_SOURCE),
            entry(&b.mono_tgt, MONO_TARGET),
        ],
    };
    datasets::save(&dir.join(DATASETS), &manifest)
}
