//! Dense counting substrate shared by every pass.
//!
//! Each worker marks the candidates it sees in a per-sequence [`SeenBitset`]
//! (count-once dedup), and filled bitsets are folded into a global
//! [`CountTable`] by a sequential sweep over candidate ids. A second-level
//! summary word per 64 bitset words lets the sweep and the reset skip
//! untouched regions without changing the traversal order.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::corpus::{gram_windows, Corpus};
use crate::error::{Error, Result};
use crate::topk::{GramCount, TopKList};

/// Counting semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// A gram counts at most once per sequence containing it.
    #[default]
    Once,
    /// Every occurrence counts.
    All,
}

impl fmt::Display for CountMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountMode::Once => "once",
            CountMode::All => "all",
        })
    }
}

impl FromStr for CountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "once" => Ok(CountMode::Once),
            "all" => Ok(CountMode::All),
            other => Err(Error::config(format!(
                "unknown count mode {other:?} (expected \"once\" or \"all\")"
            ))),
        }
    }
}

/// Per-sequence set of candidate ids.
#[derive(Clone)]
pub struct SeenBitset {
    capacity: usize,
    words: Vec<u64>,
    summary: Vec<u64>,
}

impl fmt::Debug for SeenBitset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeenBitset")
            .field("capacity", &self.capacity)
            .field("ones", &self.count_ones())
            .finish()
    }
}

impl SeenBitset {
    pub fn new(capacity: usize) -> Self {
        let nwords = capacity.div_ceil(64);
        SeenBitset {
            capacity,
            words: vec![0; nwords],
            summary: vec![0; nwords.div_ceil(64)],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    #[inline]
    pub fn mark(&mut self, id: usize) {
        assert!(id < self.capacity, "id {id} out of range {}", self.capacity);
        let w = id >> 6;
        self.words[w] |= 1 << (id & 63);
        self.summary[w >> 6] |= 1 << (w & 63);
    }

    #[inline]
    pub fn contains(&self, id: usize) -> bool {
        id < self.capacity && self.words[id >> 6] & (1 << (id & 63)) != 0
    }

    pub fn count_ones(&self) -> u64 {
        self.dirty_words()
            .map(|w| self.words[w].count_ones() as u64)
            .sum()
    }

    pub fn is_clear(&self) -> bool {
        self.summary.iter().all(|&s| s == 0)
    }

    /// Resets only the words that were touched.
    pub fn clear(&mut self) {
        for s in 0..self.summary.len() {
            let mut bits = std::mem::take(&mut self.summary[s]);
            while bits != 0 {
                let w = (s << 6) | bits.trailing_zeros() as usize;
                self.words[w] = 0;
                bits &= bits - 1;
            }
        }
    }

    fn dirty_words(&self) -> impl Iterator<Item = usize> + '_ {
        self.summary.iter().enumerate().flat_map(|(s, &bits)| {
            BitIter(bits).map(move |b| (s << 6) | b)
        })
    }

    /// Set ids in ascending order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.dirty_words()
            .flat_map(move |w| BitIter(self.words[w]).map(move |b| (w << 6) | b))
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(b)
    }
}

/// Dense global counters indexed by candidate id.
#[derive(Clone, PartialEq, Eq)]
pub struct CountTable {
    counts: Vec<u64>,
}

impl fmt::Debug for CountTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CountTable")
            .field("capacity", &self.counts.len())
            .field("total", &self.total())
            .finish()
    }
}

impl CountTable {
    pub fn new(capacity: usize) -> Self {
        CountTable {
            counts: vec![0; capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn get(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn nonzero(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    #[inline]
    pub fn increment_all(&mut self, id: usize, times: u64) {
        self.counts[id] += times;
    }

    /// Adds every bitset in `batch` into the table and clears the bitsets.
    ///
    /// The table is swept in ascending id order once for the whole batch;
    /// each touched word is expanded branch-free into its 64 counters.
    pub fn flush_batch(&mut self, batch: &mut [SeenBitset]) {
        let cap = self.counts.len();
        for b in batch.iter() {
            assert_eq!(b.capacity, cap, "bitset capacity does not match table");
        }
        let Some(first) = batch.first() else { return };
        let nsummary = first.summary.len();
        for s in 0..nsummary {
            let mut union = 0u64;
            for b in batch.iter_mut() {
                union |= std::mem::take(&mut b.summary[s]);
            }
            for wbit in BitIter(union) {
                let w = (s << 6) | wbit;
                let base = w << 6;
                let lane = &mut self.counts[base..(base + 64).min(cap)];
                for b in batch.iter_mut() {
                    let word = std::mem::take(&mut b.words[w]);
                    if word != 0 {
                        for (i, c) in lane.iter_mut().enumerate() {
                            *c += (word >> i) & 1;
                        }
                    }
                }
            }
        }
    }

    /// Adds the set bits of `bits` one counter at a time, then clears it.
    ///
    /// Unlike [`flush_batch`](Self::flush_batch) this touches only the
    /// counters of set bits, which is what the hash-bucket baseline does.
    pub fn add_ones(&mut self, bits: &mut SeenBitset) {
        assert_eq!(bits.capacity, self.counts.len(), "bitset capacity does not match table");
        for id in bits.iter_ones() {
            self.counts[id] += 1;
        }
        bits.clear();
    }
}

/// Counters updated with atomic additions; the alternative merge strategy.
pub struct AtomicCountTable {
    counts: Vec<AtomicU64>,
}

impl AtomicCountTable {
    pub fn new(capacity: usize) -> Self {
        AtomicCountTable {
            counts: (0..capacity).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    #[inline]
    pub fn increment(&self, id: usize, times: u64) {
        self.counts[id].fetch_add(times, Ordering::Relaxed);
    }

    pub fn add_ones(&self, bits: &mut SeenBitset) {
        assert_eq!(bits.capacity, self.counts.len(), "bitset capacity does not match table");
        for id in bits.iter_ones() {
            self.counts[id].fetch_add(1, Ordering::Relaxed);
        }
        bits.clear();
    }

    pub fn into_table(self) -> CountTable {
        CountTable {
            counts: self.counts.into_iter().map(AtomicU64::into_inner).collect(),
        }
    }
}

/// Top `k` nonzero entries of `table` in canonical order.
///
/// Only entries at or above the k-th largest count are materialised as
/// grams, so `id_to_gram` is called O(k + ties) times.
pub fn top_k<F>(table: &CountTable, k: usize, id_to_gram: F) -> TopKList
where
    F: Fn(usize) -> Vec<u8>,
{
    assert!(k >= 1, "k must be at least 1");
    let mut nonzero: Vec<(u64, usize)> = table
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (c, i))
        .collect();
    if nonzero.len() > k {
        let (_, &mut (threshold, _), _) =
            nonzero.select_nth_unstable_by(k - 1, |a, b| b.0.cmp(&a.0));
        nonzero.retain(|&(c, _)| c >= threshold);
    }
    let entries = nonzero
        .into_iter()
        .map(|(count, id)| GramCount {
            gram: id_to_gram(id),
            count,
        })
        .collect();
    TopKList::from_unsorted(entries, k)
}

/// How worker-local results reach the global table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeStrategy {
    /// Workers fill batches of bitsets and sweep them into the table under
    /// exclusive access.
    #[default]
    BatchedFlush,
    /// Workers add into atomic counters as soon as a sequence completes.
    Atomic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassOptions {
    pub workers: usize,
    pub flush_batch: usize,
    pub merge: MergeStrategy,
}

impl Default for PassOptions {
    fn default() -> Self {
        PassOptions {
            workers: default_workers(),
            flush_batch: 8,
            merge: MergeStrategy::BatchedFlush,
        }
    }
}

impl PassOptions {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// What one pass over the corpus saw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassStats {
    pub sequences: u64,
    pub bytes: u64,
    /// Gram windows visited, filtered or not.
    pub windows: u64,
    pub elapsed: Duration,
}

impl PassStats {
    fn absorb(&mut self, other: &PassStats) {
        self.sequences += other.sequences;
        self.bytes += other.bytes;
        self.windows += other.windows;
    }

    pub(crate) fn record(&mut self, len: usize, window: usize) {
        self.sequences += 1;
        self.bytes += len as u64;
        self.windows += gram_windows(len, window) as u64;
    }

    /// Bytes per second over the pass wall time.
    pub fn throughput(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs > 0.0 {
            self.bytes as f64 / secs
        } else {
            0.0
        }
    }
}

/// Maps each gram window of a sequence to a candidate id, or skips it.
pub(crate) trait CandidateSource: Sync {
    /// Gram length.
    fn window(&self) -> usize;
    /// Size of the candidate id space.
    fn capacity(&self) -> usize;
    fn for_each_candidate<F: FnMut(usize)>(&self, seq: &[u8], emit: F);
}

const ALL_MODE_BUFFER: usize = 1 << 16;

struct Worker {
    stats: PassStats,
    batch: Vec<SeenBitset>,
    filled: usize,
    ids: Vec<u32>,
}

/// How a finished count-once bitset reaches the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FlushKind {
    /// Batched sequential sweep over the whole id range.
    Sweep,
    /// One random-access increment per set bit, after every sequence.
    Sparse,
}

/// One parallel pass of `source` over `corpus` into a dense table.
pub(crate) fn run_dense_pass<S: CandidateSource>(
    corpus: &Corpus,
    source: &S,
    mode: CountMode,
    opts: &PassOptions,
) -> Result<(CountTable, PassStats)> {
    run_pass(corpus, source, mode, opts, FlushKind::Sweep)
}

pub(crate) fn run_pass<S: CandidateSource>(
    corpus: &Corpus,
    source: &S,
    mode: CountMode,
    opts: &PassOptions,
    flush: FlushKind,
) -> Result<(CountTable, PassStats)> {
    let cap = source.capacity();
    assert!(cap <= u32::MAX as usize + 1, "candidate space exceeds 32-bit ids");
    let start = Instant::now();
    let window = source.window();
    let batch_len = match flush {
        FlushKind::Sweep => opts.flush_batch.max(1),
        FlushKind::Sparse => 1,
    };
    let new_worker = || Worker {
        stats: PassStats::default(),
        batch: Vec::new(),
        filled: 0,
        ids: Vec::new(),
    };

    let (table, workers) = match opts.merge {
        MergeStrategy::BatchedFlush => {
            let table = Mutex::new(CountTable::new(cap));
            let workers = corpus.par_for_each(opts.workers, new_worker, |w, seq| {
                w.stats.record(seq.bytes.len(), window);
                match mode {
                    CountMode::Once => {
                        if w.batch.len() <= w.filled {
                            w.batch.push(SeenBitset::new(cap));
                        }
                        let bits = &mut w.batch[w.filled];
                        source.for_each_candidate(&seq.bytes, |id| bits.mark(id));
                        w.filled += 1;
                        if w.filled == batch_len {
                            let mut table = table.lock();
                            match flush {
                                FlushKind::Sweep => table.flush_batch(&mut w.batch[..w.filled]),
                                FlushKind::Sparse => table.add_ones(&mut w.batch[0]),
                            }
                            w.filled = 0;
                        }
                    }
                    CountMode::All => {
                        source.for_each_candidate(&seq.bytes, |id| w.ids.push(id as u32));
                        if w.ids.len() >= ALL_MODE_BUFFER {
                            drain_ids(&mut w.ids, &mut table.lock());
                        }
                    }
                }
            })?;
            let mut table = table.into_inner();
            let mut workers = workers;
            for w in workers.iter_mut() {
                table.flush_batch(&mut w.batch[..w.filled]);
                w.filled = 0;
                drain_ids(&mut w.ids, &mut table);
            }
            (table, workers)
        }
        MergeStrategy::Atomic => {
            let table = AtomicCountTable::new(cap);
            let workers = corpus.par_for_each(opts.workers, new_worker, |w, seq| {
                w.stats.record(seq.bytes.len(), window);
                match mode {
                    CountMode::Once => {
                        if w.batch.is_empty() {
                            w.batch.push(SeenBitset::new(cap));
                        }
                        let bits = &mut w.batch[0];
                        source.for_each_candidate(&seq.bytes, |id| bits.mark(id));
                        table.add_ones(bits);
                    }
                    CountMode::All => {
                        source.for_each_candidate(&seq.bytes, |id| table.increment(id, 1));
                    }
                }
            })?;
            (table.into_table(), workers)
        }
    };

    let mut stats = PassStats::default();
    for w in &workers {
        stats.absorb(&w.stats);
    }
    stats.elapsed = start.elapsed();
    Ok((table, stats))
}

fn drain_ids(ids: &mut Vec<u32>, table: &mut CountTable) {
    ids.sort_unstable();
    for &id in ids.iter() {
        table.counts[id as usize] += 1;
    }
    ids.clear();
}
