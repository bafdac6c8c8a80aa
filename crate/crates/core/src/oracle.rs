//! Naive exact counting with a dictionary keyed by gram bytes.
//!
//! Slow and memory hungry on purpose: this is the reference every other
//! algorithm is tested against.

use std::collections::{HashMap, HashSet};

use crate::corpus::Corpus;
use crate::counting::CountMode;
use crate::error::{Error, Result};
use crate::topk::{GramCount, TopKList};

/// Default ceiling on corpus size accepted by [`naive_count`].
pub const DEFAULT_SIZE_GUARD: u64 = 256 << 20;

/// Exact gram counts; only grams with count >= 1 are present.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GramCountMap {
    n: usize,
    counts: HashMap<Vec<u8>, u64>,
}

impl GramCountMap {
    pub fn gram_len(&self) -> usize {
        self.n
    }

    pub fn get(&self, gram: &[u8]) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u64)> + '_ {
        self.counts.iter().map(|(g, &c)| (g.as_slice(), c))
    }

    pub fn topk(&self, k: usize) -> TopKList {
        naive_topk(self, k)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Refuse corpora larger than this many bytes.
    pub size_guard: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            size_guard: DEFAULT_SIZE_GUARD,
        }
    }
}

pub fn naive_count(corpus: &Corpus, n: usize, mode: CountMode) -> Result<GramCountMap> {
    naive_count_with(corpus, n, mode, &OracleOptions::default())
}

pub fn naive_count_with(
    corpus: &Corpus,
    n: usize,
    mode: CountMode,
    opts: &OracleOptions,
) -> Result<GramCountMap> {
    if n == 0 {
        return Err(Error::config("gram length must be at least 1"));
    }
    let size = corpus.size_bytes()?;
    if size > opts.size_guard {
        return Err(Error::config(format!(
            "corpus is {size} bytes, above the naive counter's guard of {} bytes",
            opts.size_guard
        )));
    }
    let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
    let mut bump = |gram: &[u8]| match counts.get_mut(gram) {
        Some(c) => *c += 1,
        None => {
            counts.insert(gram.to_vec(), 1);
        }
    };
    for seq in corpus.iter() {
        let seq = seq?;
        if seq.bytes.len() < n {
            continue;
        }
        match mode {
            CountMode::All => seq.bytes.windows(n).for_each(&mut bump),
            CountMode::Once => {
                let seen: HashSet<&[u8]> = seq.bytes.windows(n).collect();
                seen.into_iter().for_each(&mut bump);
            }
        }
    }
    Ok(GramCountMap { n, counts })
}

/// Sorts the whole dictionary canonically and keeps `k`.
pub fn naive_topk(map: &GramCountMap, k: usize) -> TopKList {
    assert!(k >= 1, "k must be at least 1");
    let entries = map
        .counts
        .iter()
        .map(|(g, &c)| GramCount {
            gram: g.clone(),
            count: c,
        })
        .collect();
    TopKList::from_unsorted(entries, k)
}

/// Builds a map directly from pairs; for tests and adapters.
impl FromIterator<(Vec<u8>, u64)> for GramCountMap {
    fn from_iter<T: IntoIterator<Item = (Vec<u8>, u64)>>(iter: T) -> Self {
        let counts: HashMap<Vec<u8>, u64> = iter.into_iter().filter(|(_, c)| *c > 0).collect();
        let n = counts.keys().next().map_or(0, |g| g.len());
        GramCountMap { n, counts }
    }
}
