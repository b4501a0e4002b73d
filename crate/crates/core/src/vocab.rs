use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use rustc_hash::FxBuildHasher;

pub(crate) type FxMap<K, V> = hashbrown::HashMap<K, V, FxBuildHasher>;
pub(crate) type FxSet<K> = hashbrown::HashSet<K, FxBuildHasher>;

/// String interner with dense ids in insertion order.
#[derive(Clone, Debug, Default)]
pub(crate) struct Vocab {
    ids: FxMap<String, u32>,
    words: Vec<String>,
}

impl Vocab {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut v = Vocab::new();
        for w in words {
            v.intern(&w);
        }
        v
    }

    pub(crate) fn get(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub(crate) fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.ids.insert(word.to_owned(), id);
        self.words.push(word.to_owned());
        id
    }

    pub(crate) fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub(crate) fn words(&self) -> &[String] {
        &self.words
    }

    pub(crate) fn len(&self) -> usize {
        self.words.len()
    }
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words
    }
}
