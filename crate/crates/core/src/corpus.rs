//! Sentences, tagged datasets and training mixes.
//!
//! A [`TaggedDataset`] is one corpus with a domain tag and an integer
//! upsampling weight. A [`DataMix`] is an ordered list of parallel datasets;
//! its flattened view repeats every pair `upsample` times and every source
//! starts with its dataset's tag.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// True for reserved tag tokens such as `<d:in>` or `<bt>`.
pub fn is_tag(token: &str) -> bool {
    token.len() >= 3 && token.starts_with('<') && token.ends_with('>')
}

/// An ordered list of tokens (words or subword units).
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sentence(Vec<String>);

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Self {
        Sentence(tokens)
    }

    /// Whitespace tokenization.
    pub fn parse(line: &str) -> Self {
        Sentence(line.split_whitespace().map(str::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Splits off leading tag tokens. Returns the first tag (the conditioning
    /// domain) and the remaining content tokens.
    pub fn split_tags(&self) -> (Option<&str>, &[String]) {
        let n = self.0.iter().take_while(|t| is_tag(t)).count();
        (self.0.first().filter(|_| n > 0).map(String::as_str), &self.0[n..])
    }

    /// The sentence without its leading tags.
    pub fn untagged(&self) -> Sentence {
        Sentence(self.split_tags().1.to_vec())
    }

    /// Prepends `tag` unless the sentence already starts with it.
    pub fn with_tag(&self, tag: &Tag) -> Sentence {
        if self.0.first().map(String::as_str) == Some(tag.as_str()) {
            return self.clone();
        }
        let mut tokens = Vec::with_capacity(self.0.len() + 1);
        tokens.push(tag.0.clone());
        tokens.extend(self.0.iter().cloned());
        Sentence(tokens)
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t)?;
        }
        Ok(())
    }
}

impl From<&str> for Sentence {
    fn from(line: &str) -> Self {
        Sentence::parse(line)
    }
}

impl core::ops::Deref for Sentence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

/// A validated domain tag token.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(String);

impl Tag {
    pub fn new(tag: &str) -> Result<Self> {
        if is_tag(tag) && !tag.chars().any(char::is_whitespace) {
            Ok(Tag(tag.to_owned()))
        } else {
            Err(Error::InvalidTag(tag.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The four tags used by the shipped configurations.
pub mod tags {
    pub const IN_DOMAIN: &str = "<d:in>";
    pub const OUT_DOMAIN: &str = "<d:out>";
    pub const SELF_TRAINED: &str = "<st>";
    pub const BACK_TRANSLATED: &str = "<bt>";
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pair {
    pub source: Sentence,
    pub target: Sentence,
}

impl Pair {
    pub fn new(source: Sentence, target: Sentence) -> Self {
        Pair { source, target }
    }
}

/// Translation direction of a model or mix, relative to the configured
/// source and target languages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            _ => Err(Error::InvalidParameter(alloc::format!("unknown direction {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Parallel,
    MonoSource,
    MonoTarget,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Parallel => "parallel",
            Side::MonoSource => "mono-source",
            Side::MonoTarget => "mono-target",
        }
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Side::Parallel),
            "mono-source" => Ok(Side::MonoSource),
            "mono-target" => Ok(Side::MonoTarget),
            _ => Err(Error::InvalidParameter(alloc::format!("unknown side {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetData {
    Parallel(Vec<Pair>),
    MonoSource(Vec<Sentence>),
    MonoTarget(Vec<Sentence>),
}

impl DatasetData {
    pub fn side(&self) -> Side {
        match self {
            DatasetData::Parallel(_) => Side::Parallel,
            DatasetData::MonoSource(_) => Side::MonoSource,
            DatasetData::MonoTarget(_) => Side::MonoTarget,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DatasetData::Parallel(p) => p.len(),
            DatasetData::MonoSource(s) | DatasetData::MonoTarget(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of parsing a corpus file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub kept: usize,
    pub dropped: usize,
}

/// Parses corpus text. Parallel lines are `source<TAB>target`; blank lines
/// and pairs with an empty side are dropped and counted, lines with a wrong
/// number of tabs are an error.
pub fn parse_corpus(text: &str, side: Side) -> Result<(DatasetData, LoadReport)> {
    let mut report = LoadReport::default();
    let data = match side {
        Side::Parallel => {
            let mut pairs = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    report.dropped += 1;
                    continue;
                }
                let tabs = line.matches('\t').count();
                if tabs != 1 {
                    return Err(Error::MalformedParallelLine { line: i + 1, found: tabs });
                }
                let (src, tgt) = line.split_once('\t').expect("one tab");
                let pair = Pair::new(Sentence::parse(src), Sentence::parse(tgt));
                if pair.source.is_empty() || pair.target.is_empty() {
                    report.dropped += 1;
                    continue;
                }
                pairs.push(pair);
            }
            report.kept = pairs.len();
            DatasetData::Parallel(pairs)
        }
        Side::MonoSource | Side::MonoTarget => {
            let mut sentences = Vec::new();
            for line in text.lines() {
                let s = Sentence::parse(line);
                if s.is_empty() {
                    report.dropped += 1;
                } else {
                    sentences.push(s);
                }
            }
            report.kept = sentences.len();
            if side == Side::MonoSource {
                DatasetData::MonoSource(sentences)
            } else {
                DatasetData::MonoTarget(sentences)
            }
        }
    };
    Ok((data, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggedDataset {
    pub name: String,
    pub tag: Tag,
    upsample: u32,
    data: DatasetData,
}

impl TaggedDataset {
    pub fn new(name: &str, tag: Tag, upsample: u32, data: DatasetData) -> Result<Self> {
        if upsample == 0 {
            return Err(Error::InvalidUpsample);
        }
        if let DatasetData::Parallel(pairs) = &data {
            check_pairs(pairs)?;
        }
        Ok(TaggedDataset { name: name.to_owned(), tag, upsample, data })
    }

    pub fn parallel(name: &str, tag: Tag, pairs: Vec<Pair>) -> Result<Self> {
        Self::new(name, tag, 1, DatasetData::Parallel(pairs))
    }

    pub fn mono(name: &str, side: Side, tag: Tag, sentences: Vec<Sentence>) -> Result<Self> {
        let data = match side {
            Side::MonoSource => DatasetData::MonoSource(sentences),
            Side::MonoTarget => DatasetData::MonoTarget(sentences),
            Side::Parallel => {
                return Err(Error::InvalidParameter("mono dataset needs a mono side".to_string()))
            }
        };
        Self::new(name, tag, 1, data)
    }

    pub fn side(&self) -> Side {
        self.data.side()
    }

    pub fn upsample(&self) -> u32 {
        self.upsample
    }

    pub fn with_upsample(mut self, upsample: u32) -> Result<Self> {
        if upsample == 0 {
            return Err(Error::InvalidUpsample);
        }
        self.upsample = upsample;
        Ok(self)
    }

    pub fn data(&self) -> &DatasetData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Parallel pairs; empty for monolingual datasets.
    pub fn pairs(&self) -> &[Pair] {
        match &self.data {
            DatasetData::Parallel(p) => p,
            _ => &[],
        }
    }

    /// Monolingual sentences; empty for parallel datasets.
    pub fn sentences(&self) -> &[Sentence] {
        match &self.data {
            DatasetData::MonoSource(s) | DatasetData::MonoTarget(s) => s,
            DatasetData::Parallel(_) => &[],
        }
    }

    /// Source-side sentences (parallel sources or mono-source sentences).
    pub fn source_side(&self) -> Vec<Sentence> {
        match &self.data {
            DatasetData::Parallel(p) => p.iter().map(|p| p.source.clone()).collect(),
            DatasetData::MonoSource(s) => s.clone(),
            DatasetData::MonoTarget(_) => Vec::new(),
        }
    }

    /// Target-side sentences (parallel targets or mono-target sentences).
    pub fn target_side(&self) -> Vec<Sentence> {
        match &self.data {
            DatasetData::Parallel(p) => p.iter().map(|p| p.target.clone()).collect(),
            DatasetData::MonoTarget(s) => s.clone(),
            DatasetData::MonoSource(_) => Vec::new(),
        }
    }

    /// Prepends the dataset tag to every source sentence. Idempotent; targets
    /// and mono-target data are untouched.
    pub fn apply_tag(&self) -> TaggedDataset {
        let data = match &self.data {
            DatasetData::Parallel(pairs) => DatasetData::Parallel(
                pairs
                    .iter()
                    .map(|p| Pair::new(p.source.with_tag(&self.tag), p.target.clone()))
                    .collect(),
            ),
            DatasetData::MonoSource(s) => {
                DatasetData::MonoSource(s.iter().map(|s| s.with_tag(&self.tag)).collect())
            }
            DatasetData::MonoTarget(s) => DatasetData::MonoTarget(s.clone()),
        };
        TaggedDataset { data, ..self.clone() }
    }

    /// Replaces the tag: leading tags are stripped and `tag` is applied.
    pub fn retagged(&self, tag: Tag) -> TaggedDataset {
        let data = match &self.data {
            DatasetData::Parallel(pairs) => DatasetData::Parallel(
                pairs
                    .iter()
                    .map(|p| Pair::new(p.source.untagged().with_tag(&tag), p.target.clone()))
                    .collect(),
            ),
            DatasetData::MonoSource(s) => {
                DatasetData::MonoSource(s.iter().map(|s| s.untagged().with_tag(&tag)).collect())
            }
            DatasetData::MonoTarget(s) => DatasetData::MonoTarget(s.clone()),
        };
        TaggedDataset { data, tag, name: self.name.clone(), upsample: self.upsample }
    }

    /// Swaps the translation direction: parallel pairs are swapped and the tag
    /// is re-applied to the new source side; mono sides are exchanged.
    pub fn swapped(&self) -> Result<TaggedDataset> {
        let data = match &self.data {
            DatasetData::Parallel(pairs) => {
                let swapped: Vec<Pair> = pairs
                    .iter()
                    .map(|p| Pair::new(p.target.untagged().with_tag(&self.tag), p.source.untagged()))
                    .collect();
                check_pairs(&swapped)?;
                DatasetData::Parallel(swapped)
            }
            DatasetData::MonoSource(s) => {
                DatasetData::MonoTarget(s.iter().map(Sentence::untagged).collect())
            }
            DatasetData::MonoTarget(s) => {
                DatasetData::MonoSource(s.iter().map(|s| s.with_tag(&self.tag)).collect())
            }
        };
        Ok(TaggedDataset { data, ..self.clone() })
    }

    /// Removes repeated entries, keeping first occurrences.
    pub fn dedup(&self) -> TaggedDataset {
        fn keep_first<T: Clone + Eq + core::hash::Hash>(items: &[T]) -> Vec<T> {
            let mut seen = hashbrown::HashSet::with_hasher(rustc_hash::FxBuildHasher);
            items.iter().filter(|x| seen.insert(*x)).cloned().collect()
        }
        let data = match &self.data {
            DatasetData::Parallel(p) => DatasetData::Parallel(keep_first(p)),
            DatasetData::MonoSource(s) => DatasetData::MonoSource(keep_first(s)),
            DatasetData::MonoTarget(s) => DatasetData::MonoTarget(keep_first(s)),
        };
        TaggedDataset { data, ..self.clone() }
    }
}

fn check_pairs(pairs: &[Pair]) -> Result<()> {
    for (i, p) in pairs.iter().enumerate() {
        if p.source.split_tags().1.is_empty() || p.target.is_empty() {
            return Err(Error::EmptySide(i));
        }
    }
    Ok(())
}

/// A weighted, tagged union of parallel datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMix {
    direction: Direction,
    datasets: Vec<TaggedDataset>,
}

impl DataMix {
    /// Builds a forward mix. Every dataset is tagged on the way in.
    pub fn build(datasets: Vec<TaggedDataset>) -> Result<Self> {
        Self::build_directed(datasets, Direction::Forward)
    }

    pub fn build_directed(datasets: Vec<TaggedDataset>, direction: Direction) -> Result<Self> {
        if let Some(mono) = datasets.iter().find(|d| d.side() != Side::Parallel) {
            return Err(Error::MonolingualInMix(mono.name.clone()));
        }
        if datasets.iter().all(|d| d.is_empty()) {
            return Err(Error::NoParallelData);
        }
        let datasets = datasets.iter().map(TaggedDataset::apply_tag).collect();
        Ok(DataMix { direction, datasets })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn datasets(&self) -> &[TaggedDataset] {
        &self.datasets
    }

    /// Size of the flattened view: sum of dataset size times upsample.
    pub fn len(&self) -> usize {
        self.datasets.iter().map(|d| d.len() * d.upsample as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distinct pairs with their replication weight, in dataset then line order.
    pub fn weighted_pairs(&self) -> impl Iterator<Item = (&Pair, u32)> + '_ {
        self.datasets.iter().flat_map(|d| d.pairs().iter().map(move |p| (p, d.upsample)))
    }

    /// The flattened training multiset: dataset order, then line order, then
    /// replica index.
    pub fn examples(&self) -> impl Iterator<Item = &Pair> + '_ {
        self.weighted_pairs().flat_map(|(p, w)| core::iter::repeat_n(p, w as usize))
    }

    /// Swaps source and target in every dataset and flips the direction.
    pub fn swap_direction(&self) -> Result<DataMix> {
        let datasets =
            self.datasets.iter().map(TaggedDataset::swapped).collect::<Result<Vec<_>>>()?;
        Ok(DataMix { direction: self.direction.flip(), datasets })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn tag(s: &str) -> Tag {
        Tag::new(s).unwrap()
    }

    fn pair(s: &str, t: &str) -> Pair {
        Pair::new(Sentence::parse(s), Sentence::parse(t))
    }

    fn toks(s: &Sentence) -> Vec<&str> {
        s.iter().map(String::as_str).collect()
    }

    #[test]
    fn parses_one_pair() {
        let (data, report) = parse_corpus("a b\tc d\n", Side::Parallel).unwrap();
        assert_eq!(report, LoadReport { kept: 1, dropped: 0 });
        assert_eq!(data, DatasetData::Parallel(vec![pair("a b", "c d")]));
    }

    #[test]
    fn blank_lines_are_dropped_and_counted() {
        let (data, report) = parse_corpus("a\n\nb\n", Side::MonoSource).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(report.dropped, 1);
        let (data, report) = parse_corpus("a\tb\n  \nc\td\n", Side::Parallel).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(report.dropped, 1);
    }

    #[test]
    fn duplicates_survive_loading() {
        let (data, _) = parse_corpus("x\ty\nx\ty\n", Side::Parallel).unwrap();
        assert_eq!(data, DatasetData::Parallel(vec![pair("x", "y"), pair("x", "y")]));
    }

    #[test]
    fn wrong_separator_count_is_an_error() {
        assert_eq!(
            parse_corpus("a\tb\na b c\n", Side::Parallel).unwrap_err(),
            Error::MalformedParallelLine { line: 2, found: 0 }
        );
        assert!(parse_corpus("a\tb\tc\n", Side::Parallel).is_err());
    }

    #[test]
    fn tag_validation() {
        assert!(Tag::new("<d:alt>").is_ok());
        assert!(Tag::new("d:alt").is_err());
        assert!(Tag::new("<a b>").is_err());
        assert!(Tag::new("<>").is_err());
    }

    #[test]
    fn apply_tag_prepends_once() {
        let ds = TaggedDataset::parallel("p", tag("<d:alt>"), vec![pair("a", "b")]).unwrap();
        let tagged = ds.apply_tag();
        assert_eq!(toks(&tagged.pairs()[0].source), ["<d:alt>", "a"]);
        assert_eq!(toks(&tagged.pairs()[0].target), ["b"]);
        assert_eq!(tagged.apply_tag(), tagged);
    }

    #[test]
    fn mono_target_is_never_tagged() {
        let ds = TaggedDataset::mono("m", Side::MonoTarget, tag("<bt>"), vec![Sentence::parse("y z")])
            .unwrap();
        assert_eq!(ds.apply_tag(), ds);
    }

    #[test]
    fn mix_sizes_follow_upsampling() {
        let three = TaggedDataset::parallel(
            "a",
            tag("<a>"),
            vec![pair("a", "x"), pair("b", "y"), pair("c", "z")],
        )
        .unwrap()
        .with_upsample(3)
        .unwrap();
        let mix = DataMix::build(vec![three]).unwrap();
        assert_eq!(mix.len(), 9);
        let ex: Vec<_> = mix.examples().collect();
        assert_eq!(ex.len(), 9);
        // replicas are adjacent
        assert_eq!(ex[0], ex[1]);
        assert_eq!(ex[1], ex[2]);
        assert_ne!(ex[2], ex[3]);

        let a = TaggedDataset::parallel("a", tag("<a>"), vec![pair("a", "x"), pair("b", "y")])
            .unwrap();
        let b = TaggedDataset::parallel("b", tag("<b>"), vec![pair("c", "z")])
            .unwrap()
            .with_upsample(4)
            .unwrap();
        assert_eq!(DataMix::build(vec![a, b]).unwrap().len(), 6);
    }

    #[test]
    fn mix_needs_parallel_data() {
        assert_eq!(DataMix::build(vec![]).unwrap_err(), Error::NoParallelData);
        let empty = TaggedDataset::parallel("e", tag("<a>"), vec![]).unwrap();
        assert_eq!(DataMix::build(vec![empty]).unwrap_err(), Error::NoParallelData);
        let mono =
            TaggedDataset::mono("m", Side::MonoSource, tag("<a>"), vec![Sentence::parse("a")])
                .unwrap();
        assert!(matches!(DataMix::build(vec![mono]), Err(Error::MonolingualInMix(_))));
    }

    #[test]
    fn swap_retags_new_source() {
        let ds = TaggedDataset::parallel("t", tag("<t>"), vec![pair("a", "b")]).unwrap();
        let mix = DataMix::build(vec![ds]).unwrap();
        let swapped = mix.swap_direction().unwrap();
        let p = swapped.examples().next().unwrap();
        assert_eq!(toks(&p.source), ["<t>", "b"]);
        assert_eq!(toks(&p.target), ["a"]);
        assert_eq!(swapped.direction(), Direction::Backward);
        assert_eq!(swapped.swap_direction().unwrap(), mix);
    }

    #[test]
    fn empty_target_is_rejected() {
        let bad = vec![Pair::new(Sentence::parse("a"), Sentence::default())];
        assert_eq!(TaggedDataset::parallel("x", tag("<t>"), bad).unwrap_err(), Error::EmptySide(0));
        // a source that is only a tag becomes an empty target after swapping
        let ds = TaggedDataset {
            name: "x".into(),
            tag: tag("<t>"),
            upsample: 1,
            data: DatasetData::Parallel(vec![Pair::new(Sentence::parse("<t>"), Sentence::parse("b"))]),
        };
        assert_eq!(ds.swapped().unwrap_err(), Error::EmptySide(0));
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let ds = TaggedDataset::mono(
            "m",
            Side::MonoSource,
            tag("<a>"),
            vec![Sentence::parse("a"), Sentence::parse("b"), Sentence::parse("a")],
        )
        .unwrap();
        assert_eq!(ds.dedup().sentences(), &[Sentence::parse("a"), Sentence::parse("b")]);
    }

    fn arb_dataset() -> impl Strategy<Value = TaggedDataset> {
        (
            proptest::collection::vec(("[a-c]{1,3}( [a-c]{1,3}){0,3}", "[x-z]{1,3}( [x-z]{1,3}){0,3}"), 0..6),
            1u32..5,
            0usize..3,
        )
            .prop_map(|(pairs, up, t)| {
                let pairs = pairs.iter().map(|(s, t)| pair(s, t)).collect();
                let tag = ["<a>", "<b>", "<c>"][t];
                TaggedDataset::parallel("d", Tag::new(tag).unwrap(), pairs)
                    .unwrap()
                    .with_upsample(up)
                    .unwrap()
            })
    }

    proptest! {
        #[test]
        fn mix_size_law(datasets in proptest::collection::vec(arb_dataset(), 1..5)) {
            let expected: usize = datasets.iter().map(|d| d.len() * d.upsample() as usize).sum();
            match DataMix::build(datasets) {
                Ok(mix) => {
                    prop_assert_eq!(mix.len(), expected);
                    prop_assert_eq!(mix.examples().count(), expected);
                    for d in mix.datasets() {
                        for p in d.pairs() {
                            prop_assert_eq!(p.source.tokens()[0].as_str(), d.tag.as_str());
                        }
                    }
                }
                Err(e) => {
                    prop_assert_eq!(e, Error::NoParallelData);
                    prop_assert_eq!(expected, 0);
                }
            }
        }

        #[test]
        fn swap_is_an_involution(datasets in proptest::collection::vec(arb_dataset(), 1..4)) {
            if let Ok(mix) = DataMix::build(datasets) {
                let back = mix.swap_direction().unwrap().swap_direction().unwrap();
                prop_assert_eq!(back, mix);
            }
        }

        #[test]
        fn tagging_is_idempotent(ds in arb_dataset()) {
            let once = ds.apply_tag();
            prop_assert_eq!(once.apply_tag(), once.clone());
            let targets: Vec<_> = once.pairs().iter().map(|p| &p.target).collect();
            let original: Vec<_> = ds.pairs().iter().map(|p| &p.target).collect();
            prop_assert_eq!(targets, original);
        }

        #[test]
        fn parsing_is_deterministic(text in "([a-c ]{0,6}\t[x-z ]{0,6}\n){0,6}") {
            prop_assert_eq!(parse_corpus(&text, Side::Parallel), parse_corpus(&text, Side::Parallel));
        }
    }
}
