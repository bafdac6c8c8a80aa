//! Exact dense counting of every possible short gram.
//!
//! For `n <= 3` the whole id space (`256^n`, at most 16,777,216 ids) fits a
//! dense table, so the pass needs no filtering and no hashing. Ids are the
//! big-endian integer value of the gram, which makes id order equal to gram
//! byte order.

use crate::corpus::Corpus;
use crate::counting::{run_dense_pass, top_k, CandidateSource, CountMode, CountTable, PassOptions, PassStats};
use crate::error::{Error, Result};
use crate::topk::TopKList;

/// Largest gram length counted densely.
pub const MAX_DENSE_N: usize = 3;

/// Number of possible trigrams.
pub const TRIGRAM_SPACE: usize = 1 << 24;

/// Id of a short gram: its bytes read as a big-endian integer.
#[inline]
pub fn dense_id(gram: &[u8]) -> usize {
    gram.iter().fold(0usize, |acc, &b| (acc << 8) | b as usize)
}

/// Inverse of [`dense_id`] for grams of length `n`.
pub fn dense_gram(id: usize, n: usize) -> Vec<u8> {
    (0..n).rev().map(|i| (id >> (8 * i)) as u8).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrigramId(u32);

impl TrigramId {
    pub fn new(b0: u8, b1: u8, b2: u8) -> Self {
        TrigramId((b0 as u32) << 16 | (b1 as u32) << 8 | b2 as u32)
    }

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn bytes(self) -> [u8; 3] {
        [(self.0 >> 16) as u8, (self.0 >> 8) as u8, self.0 as u8]
    }
}

impl From<TrigramId> for usize {
    fn from(t: TrigramId) -> usize {
        t.0 as usize
    }
}

struct DenseSource {
    n: usize,
}

impl CandidateSource for DenseSource {
    fn window(&self) -> usize {
        self.n
    }

    fn capacity(&self) -> usize {
        1 << (8 * self.n)
    }

    #[inline]
    fn for_each_candidate<F: FnMut(usize)>(&self, seq: &[u8], mut emit: F) {
        let n = self.n;
        if seq.len() < n {
            return;
        }
        let mask = self.capacity() - 1;
        let mut id = dense_id(&seq[..n - 1]);
        for &b in &seq[n - 1..] {
            id = ((id << 8) | b as usize) & mask;
            emit(id);
        }
    }
}

/// Dense counts of all `n`-grams, `1 <= n <= 3`.
pub fn count_dense(
    corpus: &Corpus,
    n: usize,
    mode: CountMode,
    opts: &PassOptions,
) -> Result<(CountTable, PassStats)> {
    if !(1..=MAX_DENSE_N).contains(&n) {
        return Err(Error::config(format!(
            "dense counting supports gram lengths 1..={MAX_DENSE_N}, got {n}"
        )));
    }
    run_dense_pass(corpus, &DenseSource { n }, mode, opts)
}

/// Dense counts of all trigrams; table capacity is [`TRIGRAM_SPACE`].
pub fn count_trigrams(
    corpus: &Corpus,
    mode: CountMode,
    opts: &PassOptions,
) -> Result<(CountTable, PassStats)> {
    count_dense(corpus, 3, mode, opts)
}

/// Canonical top `k` of a dense table of `n`-grams.
pub fn topk_dense(table: &CountTable, n: usize, k: usize) -> TopKList {
    top_k(table, k, |id| dense_gram(id, n))
}

pub fn topk_trigrams(table: &CountTable, k_prime: usize) -> TopKList {
    topk_dense(table, 3, k_prime)
}
