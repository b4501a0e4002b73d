//! Back-translation, self-training and training-mix assembly.

use alloc::vec::Vec;

use crate::corpus::{tags, DataMix, Direction, Pair, Sentence, Side, Tag, TaggedDataset};
use crate::error::{Error, Result};
use crate::par;
use crate::rerank::{translate_one, DecodeMode};
use crate::tm::Translator;

/// A generated dataset and the number of inputs whose output was unusable.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub dataset: TaggedDataset,
    pub dropped: usize,
}

fn check_direction(model: &dyn Translator, expected: Direction) -> Result<()> {
    if model.direction() != expected {
        return Err(Error::DirectionMismatch { expected: expected.as_str(), found: model.direction().as_str() });
    }
    Ok(())
}

fn generate(
    model: &dyn Translator,
    inputs: &[Sentence],
    mode: &DecodeMode<'_>,
) -> Result<Vec<Option<Sentence>>> {
    par::map(inputs, |s| {
        let s = s.untagged();
        if s.is_empty() {
            return Ok(None);
        }
        let out = translate_one(model, &s, mode)?;
        Ok(if out.is_empty() { None } else { Some(out) })
    })
    .into_iter()
    .collect()
}

/// Pairs `(g(y), y)` for every `y` in a mono-target dataset, tagged as
/// back-translated.
pub fn back_translate(
    g: &dyn Translator,
    mono_target: &TaggedDataset,
    mode: &DecodeMode<'_>,
) -> Result<Generated> {
    check_direction(g, Direction::Backward)?;
    let inputs = side_of(mono_target, Side::MonoTarget)?;
    let outputs = generate(g, inputs, mode)?;
    let mut pairs = Vec::with_capacity(inputs.len());
    for (y, x) in inputs.iter().zip(outputs) {
        if let Some(x) = x {
            pairs.push(Pair::new(x, y.untagged()));
        }
    }
    finish(&mono_target.name, tags::BACK_TRANSLATED, inputs.len(), pairs)
}

/// Pairs `(x, f(x))` for every `x` in a mono-source dataset, tagged as
/// self-trained.
pub fn self_train(
    f: &dyn Translator,
    mono_source: &TaggedDataset,
    mode: &DecodeMode<'_>,
) -> Result<Generated> {
    check_direction(f, Direction::Forward)?;
    let inputs = side_of(mono_source, Side::MonoSource)?;
    let outputs = generate(f, inputs, mode)?;
    let mut pairs = Vec::with_capacity(inputs.len());
    for (x, y) in inputs.iter().zip(outputs) {
        if let Some(y) = y {
            pairs.push(Pair::new(x.untagged(), y));
        }
    }
    finish(&mono_source.name, tags::SELF_TRAINED, inputs.len(), pairs)
}

fn side_of(ds: &TaggedDataset, side: Side) -> Result<&[Sentence]> {
    if ds.side() != side {
        return Err(Error::InvalidParameter(alloc::format!(
            "dataset {:?} is {}, expected {}",
            ds.name,
            ds.side().as_str(),
            side.as_str()
        )));
    }
    Ok(ds.sentences())
}

fn finish(name: &str, tag: &str, inputs: usize, pairs: Vec<Pair>) -> Result<Generated> {
    let dropped = inputs - pairs.len();
    let tag = Tag::new(tag)?;
    let dataset = TaggedDataset::parallel(name, tag, pairs)?.apply_tag();
    Ok(Generated { dataset, dropped })
}

/// Per-dataset replication weights of a training mix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Upsamples {
    pub bitext: u32,
    pub st: u32,
    pub bt: u32,
}

impl Default for Upsamples {
    fn default() -> Self {
        Upsamples { bitext: 1, st: 1, bt: 1 }
    }
}

/// `bitext ∪ st ∪ bt` for the forward direction.
pub fn assemble_training_mix(
    bitext: &TaggedDataset,
    st: Option<&TaggedDataset>,
    bt: Option<&TaggedDataset>,
    up: Upsamples,
) -> Result<DataMix> {
    let mut datasets = Vec::with_capacity(3);
    datasets.push(bitext.clone().with_upsample(up.bitext)?);
    if let Some(st) = st.filter(|d| !d.is_empty()) {
        datasets.push(st.clone().with_upsample(up.st)?);
    }
    if let Some(bt) = bt.filter(|d| !d.is_empty()) {
        datasets.push(bt.clone().with_upsample(up.bt)?);
    }
    DataMix::build(datasets)
}

/// The backward-direction counterpart: every dataset is swapped. Swapped
/// back-translations have a real source and a synthetic target, so they act
/// as self-training data for the reverse model and take the self-training tag
/// and weight; swapped self-training data likewise becomes back-translation.
pub fn assemble_backward_mix(
    bitext: &TaggedDataset,
    st: Option<&TaggedDataset>,
    bt: Option<&TaggedDataset>,
    up: Upsamples,
) -> Result<DataMix> {
    let st_tag = Tag::new(tags::SELF_TRAINED)?;
    let bt_tag = Tag::new(tags::BACK_TRANSLATED)?;
    let mut datasets = Vec::with_capacity(3);
    datasets.push(bitext.swapped()?.with_upsample(up.bitext)?);
    if let Some(bt) = bt.filter(|d| !d.is_empty()) {
        datasets.push(bt.swapped()?.retagged(st_tag).with_upsample(up.st)?);
    }
    if let Some(st) = st.filter(|d| !d.is_empty()) {
        datasets.push(st.swapped()?.retagged(bt_tag).with_upsample(up.bt)?);
    }
    DataMix::build_directed(datasets, Direction::Backward)
}
