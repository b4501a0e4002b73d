//! TOML forms of the search space, trial configurations and synthetic
//! language specs.

use std::path::Path;

use lomt_core::augment::Upsamples;
use lomt_core::search::{SearchSpace, TrialConfig};
use lomt_core::synth::{SynthSizes, SynthSpec};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Search space file. Every key is a list of candidate values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub em_iterations: Vec<usize>,
    pub lm_order: Vec<usize>,
    pub lm_k: Vec<f64>,
    pub lm_adapt: Vec<f64>,
    pub lm_weight: Vec<f64>,
    pub window: Vec<usize>,
    pub beam: Vec<usize>,
    pub bitext_upsample: Vec<u32>,
    pub st_upsample: Vec<u32>,
    pub bt_upsample: Vec<u32>,
    pub seed: Vec<u64>,
}

impl From<&SearchSpace> for SpaceFile {
    fn from(s: &SearchSpace) -> Self {
        SpaceFile {
            em_iterations: s.em_iterations.clone(),
            lm_order: s.lm_order.clone(),
            lm_k: s.lm_k.clone(),
            lm_adapt: s.lm_adapt.clone(),
            lm_weight: s.lm_weight.clone(),
            window: s.window.clone(),
            beam: s.beam.clone(),
            bitext_upsample: s.bitext_upsample.clone(),
            st_upsample: s.st_upsample.clone(),
            bt_upsample: s.bt_upsample.clone(),
            seed: s.seed.clone(),
        }
    }
}

impl From<SpaceFile> for SearchSpace {
    fn from(s: SpaceFile) -> Self {
        SearchSpace {
            em_iterations: s.em_iterations,
            lm_order: s.lm_order,
            lm_k: s.lm_k,
            lm_adapt: s.lm_adapt,
            lm_weight: s.lm_weight,
            window: s.window,
            beam: s.beam,
            bitext_upsample: s.bitext_upsample,
            st_upsample: s.st_upsample,
            bt_upsample: s.bt_upsample,
            seed: s.seed,
        }
    }
}

pub fn load_space(path: &Path) -> Result<SearchSpace> {
    let space: SearchSpace = super::read_toml::<SpaceFile>(path)?.into();
    space.validate()?;
    Ok(space)
}

pub fn save_space(path: &Path, space: &SearchSpace) -> Result<()> {
    super::write_toml(path, &SpaceFile::from(space))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    pub em_iterations: usize,
    pub lm_order: usize,
    pub lm_k: f64,
    pub lm_adapt: f64,
    pub lm_weight: f64,
    pub window: usize,
    pub beam: usize,
    pub bitext_upsample: u32,
    pub st_upsample: u32,
    pub bt_upsample: u32,
    pub seed: u64,
}

impl From<&TrialConfig> for ConfigRecord {
    fn from(c: &TrialConfig) -> Self {
        ConfigRecord {
            em_iterations: c.em_iterations,
            lm_order: c.lm_order,
            lm_k: c.lm_k,
            lm_adapt: c.lm_adapt,
            lm_weight: c.lm_weight,
            window: c.window,
            beam: c.beam,
            bitext_upsample: c.upsamples.bitext,
            st_upsample: c.upsamples.st,
            bt_upsample: c.upsamples.bt,
            seed: c.seed,
        }
    }
}

impl From<&ConfigRecord> for TrialConfig {
    fn from(c: &ConfigRecord) -> Self {
        TrialConfig {
            em_iterations: c.em_iterations,
            lm_order: c.lm_order,
            lm_k: c.lm_k,
            lm_adapt: c.lm_adapt,
            lm_weight: c.lm_weight,
            window: c.window,
            beam: c.beam,
            upsamples: Upsamples { bitext: c.bitext_upsample, st: c.st_upsample, bt: c.bt_upsample },
            seed: c.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizesFile {
    pub parallel: usize,
    pub mono_src: usize,
    pub mono_tgt: usize,
    pub dev: usize,
    pub test: usize,
}

/// Synthetic language spec file; missing keys take the shipped defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthFile {
    pub vocab_size: usize,
    pub swap_fraction: f64,
    pub zipf_exponent: f64,
    pub domain_shift: f64,
    pub chain_prob: f64,
    pub noise_rate: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
    pub sizes: SizesFile,
}

impl Default for SizesFile {
    fn default() -> Self {
        SynthFile::default().sizes
    }
}

impl Default for SynthFile {
    fn default() -> Self {
        SynthFile::from(&SynthSpec::default())
    }
}

impl From<&SynthSpec> for SynthFile {
    fn from(s: &SynthSpec) -> Self {
        let z = &s.sizes;
        SynthFile {
            vocab_size: s.vocab_size,
            swap_fraction: s.swap_fraction,
            zipf_exponent: s.zipf_exponent,
            domain_shift: s.domain_shift,
            chain_prob: s.chain_prob,
            noise_rate: s.noise_rate,
            min_len: s.min_len,
            max_len: s.max_len,
            seed: s.seed,
            sizes: SizesFile { parallel: z.parallel, mono_src: z.mono_src, mono_tgt: z.mono_tgt, dev: z.dev, test: z.test },
        }
    }
}

impl From<SynthFile> for SynthSpec {
    fn from(s: SynthFile) -> Self {
        let z = s.sizes;
        SynthSpec {
            vocab_size: s.vocab_size,
            swap_fraction: s.swap_fraction,
            zipf_exponent: s.zipf_exponent,
            domain_shift: s.domain_shift,
            chain_prob: s.chain_prob,
            noise_rate: s.noise_rate,
            min_len: s.min_len,
            max_len: s.max_len,
            seed: s.seed,
            sizes: SynthSizes { parallel: z.parallel, mono_src: z.mono_src, mono_tgt: z.mono_tgt, dev: z.dev, test: z.test },
        }
    }
}

pub fn load_synth(path: &Path) -> Result<SynthSpec> {
    let spec: SynthSpec = super::read_toml::<SynthFile>(path)?.into();
    spec.validate()?;
    Ok(spec)
}

pub fn save_synth(path: &Path, spec: &SynthSpec) -> Result<()> {
    super::write_toml(path, &SynthFile::from(spec))
}
