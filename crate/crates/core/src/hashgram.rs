//! Two-pass hash-gramming baseline.
//!
//! Pass one hashes every gram into one of `B` buckets and counts bucket hits
//! (once per sequence in count-once mode), flushing each sequence's bucket
//! bitset into the global bucket table one random increment at a time. The
//! top `k` buckets, plus any tied with the `k`-th, form the filter `H`. Pass two counts exactly the grams
//! that hash into `H`, either with a plain dictionary or with a trie-backed
//! dense counter, and returns the canonical top `k` of those exact counts.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::counting::{run_pass, top_k, CandidateSource, CountMode, FlushKind, PassOptions, PassStats, SeenBitset};
use crate::error::{Error, Result};
use crate::topk::{GramCount, TopKList};
use crate::trie::{PrefixTrie, TrieLayout};

/// Exact-count structure used by the second pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecondPass {
    /// General-purpose hash map keyed by gram bytes.
    #[default]
    Map,
    /// Known grams resolved through a [`PrefixTrie`] into dense counters;
    /// only unseen grams go through a map.
    Trie,
}

impl fmt::Display for SecondPass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SecondPass::Map => "map",
            SecondPass::Trie => "trie",
        })
    }
}

impl FromStr for SecondPass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "map" => Ok(SecondPass::Map),
            "trie" => Ok(SecondPass::Trie),
            other => Err(Error::config(format!(
                "unknown second pass {other:?} (expected \"map\" or \"trie\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashgramConfig {
    /// Bucket count `B`.
    pub buckets: u64,
    pub n: usize,
    pub k: usize,
    pub mode: CountMode,
    pub seed: u64,
    pub second_pass: SecondPass,
}

/// Largest bucket count whose ids fit the 32-bit candidate space.
pub const MAX_BUCKETS: u64 = 1 << 32;

impl Default for HashgramConfig {
    fn default() -> Self {
        HashgramConfig {
            buckets: 1 << 31,
            n: 6,
            k: 10_000,
            mode: CountMode::Once,
            seed: 0,
            second_pass: SecondPass::Map,
        }
    }
}

impl HashgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.buckets == 0 || self.buckets > MAX_BUCKETS {
            return Err(Error::config(format!(
                "bucket count must be in 1..={MAX_BUCKETS}, got {}",
                self.buckets
            )));
        }
        if self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        Ok(())
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    // SplitMix64 finalizer.
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit hash of `gram` under `seed`.
///
/// The gram is consumed in little-endian 8-byte words (the last one
/// zero-padded); each word is folded in with the SplitMix64 finalizer.
#[inline]
pub fn hash64(gram: &[u8], seed: u64) -> u64 {
    let mut h = mix64(seed ^ (gram.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    for chunk in gram.chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = mix64(h ^ u64::from_le_bytes(buf));
    }
    h
}

/// Bucket of `gram`: [`hash64`] reduced mod `cfg.buckets`.
#[inline]
pub fn hash_ngram(gram: &[u8], cfg: &HashgramConfig) -> u64 {
    debug_assert_eq!(gram.len(), cfg.n);
    hash64(gram, cfg.seed) % cfg.buckets
}

struct BucketSource<'a> {
    cfg: &'a HashgramConfig,
}

impl CandidateSource for BucketSource<'_> {
    fn window(&self) -> usize {
        self.cfg.n
    }

    fn capacity(&self) -> usize {
        self.cfg.buckets as usize
    }

    #[inline]
    fn for_each_candidate<F: FnMut(usize)>(&self, seq: &[u8], mut emit: F) {
        if seq.len() < self.cfg.n {
            return;
        }
        for w in seq.windows(self.cfg.n) {
            emit(hash_ngram(w, self.cfg) as usize);
        }
    }
}

/// Filter of retained buckets: one bit per bucket.
struct BucketFilter {
    bits: SeenBitset,
}

impl BucketFilter {
    fn new(buckets: u64, keep: impl Iterator<Item = u64>) -> Self {
        let mut bits = SeenBitset::new(buckets as usize);
        for b in keep {
            bits.mark(b as usize);
        }
        BucketFilter { bits }
    }

    #[inline]
    fn contains(&self, bucket: u64) -> bool {
        self.bits.contains(bucket as usize)
    }
}

fn bucket_key(bucket: usize) -> Vec<u8> {
    (bucket as u64).to_be_bytes().to_vec()
}

fn bucket_of_key(key: &[u8]) -> u64 {
    u64::from_be_bytes(key.try_into().expect("bucket keys are 8 bytes"))
}

#[derive(Debug, Clone)]
pub struct HashgramOutput {
    pub top: TopKList,
    /// Retained buckets with their pass-one counts, canonical order. Holds
    /// the top `k` plus any bucket tied with the `k`-th.
    pub buckets: Vec<(u64, u64)>,
    pub first_pass: PassStats,
    pub select_time: Duration,
    pub second_pass: PassStats,
    /// Distinct grams counted in the second pass.
    pub candidates: usize,
}

pub fn run_hashgram(corpus: &Corpus, cfg: &HashgramConfig, opts: &PassOptions) -> Result<HashgramOutput> {
    cfg.validate()?;
    let (table, first_pass) = run_pass(corpus, &BucketSource { cfg }, cfg.mode, opts, FlushKind::Sparse)?;

    let select_start = Instant::now();
    let top_buckets = top_k(&table, cfg.k, bucket_key);
    let mut buckets: Vec<(u64, u64)> = top_buckets
        .entries()
        .iter()
        .map(|e| (bucket_of_key(&e.gram), e.count))
        .collect();
    // Buckets tied with the k-th one stay in: without collisions this keeps
    // every gram the canonical top k could pick.
    if buckets.len() == cfg.k {
        let (last, kth) = buckets[cfg.k - 1];
        let counts = table.counts();
        for b in last as usize + 1..counts.len() {
            if counts[b] == kth {
                buckets.push((b as u64, kth));
            }
        }
    }
    drop(table);
    let filter = BucketFilter::new(cfg.buckets, buckets.iter().map(|&(b, _)| b));
    let select_time = select_start.elapsed();

    let start = Instant::now();
    let (counts, mut second_pass) = match cfg.second_pass {
        SecondPass::Map => count_with_map(corpus, cfg, &filter, opts)?,
        SecondPass::Trie => count_with_trie(corpus, cfg, &filter, opts)?,
    };
    let candidates = counts.len();
    let top = TopKList::from_unsorted(counts, cfg.k);
    second_pass.elapsed = start.elapsed();
    Ok(HashgramOutput {
        top,
        buckets,
        first_pass,
        select_time,
        second_pass,
        candidates,
    })
}

fn merge_into(dst: &mut HashMap<Vec<u8>, u64>, src: HashMap<Vec<u8>, u64>) {
    if dst.is_empty() {
        *dst = src;
        return;
    }
    for (g, c) in src {
        *dst.entry(g).or_insert(0) += c;
    }
}

#[derive(Default)]
struct MapWorker {
    stats: PassStats,
    counts: HashMap<Vec<u8>, u64>,
}

fn bump(map: &mut HashMap<Vec<u8>, u64>, gram: &[u8]) {
    match map.get_mut(gram) {
        Some(c) => *c += 1,
        None => {
            map.insert(gram.to_vec(), 1);
        }
    }
}

fn count_with_map(
    corpus: &Corpus,
    cfg: &HashgramConfig,
    filter: &BucketFilter,
    opts: &PassOptions,
) -> Result<(Vec<GramCount>, PassStats)> {
    let n = cfg.n;
    let workers = corpus.par_for_each(opts.workers, MapWorker::default, |w, seq| {
        w.stats.record(seq.bytes.len(), n);
        if seq.bytes.len() < n {
            return;
        }
        let hits = seq.bytes.windows(n).filter(|g| filter.contains(hash_ngram(g, cfg)));
        match cfg.mode {
            CountMode::All => hits.for_each(|g| bump(&mut w.counts, g)),
            CountMode::Once => {
                let seen: HashSet<&[u8]> = hits.collect();
                seen.into_iter().for_each(|g| bump(&mut w.counts, g));
            }
        }
    })?;
    let mut stats = PassStats::default();
    let mut total = HashMap::new();
    for w in workers {
        stats.sequences += w.stats.sequences;
        stats.bytes += w.stats.bytes;
        stats.windows += w.stats.windows;
        merge_into(&mut total, w.counts);
    }
    let counts = total
        .into_iter()
        .map(|(gram, count)| GramCount { gram, count })
        .collect();
    Ok((counts, stats))
}

/// Shared state of the trie-backed second pass.
///
/// Grams get stable ordinals in discovery order. Grams already in the trie
/// are counted in a dense array; new grams collect in `pending` until there
/// are enough of them to rebuild the trie with the new grams appended.
struct TrieStore {
    n: usize,
    grams: Vec<Vec<u8>>,
    counts: Vec<u64>,
    trie: Arc<PrefixTrie>,
    pending: HashMap<Vec<u8>, u64>,
}

impl TrieStore {
    fn absorb(&mut self, w: &mut TrieWorker) {
        for (o, c) in w.counts.iter_mut().enumerate() {
            self.counts[o] += std::mem::take(c);
        }
        for (g, c) in std::mem::take(&mut w.pending) {
            // The worker's trie may predate a rebuild that already holds `g`.
            match self.trie.lookup(&g) {
                Some(o) => self.counts[o as usize] += c,
                None => *self.pending.entry(g).or_insert(0) += c,
            }
        }
        if self.pending.len() >= REBUILD_MIN.max(self.grams.len() / 2) {
            self.rebuild();
        }
        w.reset(Arc::clone(&self.trie));
    }

    fn rebuild(&mut self) {
        let mut fresh: Vec<(Vec<u8>, u64)> = self.pending.drain().collect();
        fresh.sort_unstable();
        for (g, c) in fresh {
            self.grams.push(g);
            self.counts.push(c);
        }
        debug_assert!(self.grams.iter().all(|g| g.len() == self.n));
        self.trie = Arc::new(PrefixTrie::build(
            self.grams.iter().map(|g| g.as_slice()),
            TrieLayout::FrequencyOrdered,
        ));
    }
}

const REBUILD_MIN: usize = 1024;
const SYNC_EVERY: usize = 64;

struct TrieWorker {
    stats: PassStats,
    trie: Arc<PrefixTrie>,
    counts: Vec<u64>,
    seen: SeenBitset,
    pending: HashMap<Vec<u8>, u64>,
    since_sync: usize,
}

impl TrieWorker {
    fn reset(&mut self, trie: Arc<PrefixTrie>) {
        if trie.len() != self.counts.len() {
            self.counts = vec![0; trie.len()];
            self.seen = SeenBitset::new(trie.len());
        }
        self.trie = trie;
        self.since_sync = 0;
    }
}

fn count_with_trie(
    corpus: &Corpus,
    cfg: &HashgramConfig,
    filter: &BucketFilter,
    opts: &PassOptions,
) -> Result<(Vec<GramCount>, PassStats)> {
    let n = cfg.n;
    let store = Mutex::new(TrieStore {
        n,
        grams: Vec::new(),
        counts: Vec::new(),
        trie: Arc::new(PrefixTrie::default()),
        pending: HashMap::new(),
    });
    let init = || TrieWorker {
        stats: PassStats::default(),
        trie: Arc::clone(&store.lock().trie),
        counts: Vec::new(),
        seen: SeenBitset::new(0),
        pending: HashMap::new(),
        since_sync: 0,
    };
    let workers = corpus.par_for_each(opts.workers, init, |w, seq| {
        w.stats.record(seq.bytes.len(), n);
        if seq.bytes.len() >= n {
            let mut fresh: HashSet<&[u8]> = HashSet::new();
            for g in seq.bytes.windows(n) {
                if !filter.contains(hash_ngram(g, cfg)) {
                    continue;
                }
                match (w.trie.lookup(g), cfg.mode) {
                    (Some(o), CountMode::Once) => w.seen.mark(o as usize),
                    (Some(o), CountMode::All) => w.counts[o as usize] += 1,
                    (None, CountMode::Once) => {
                        fresh.insert(g);
                    }
                    (None, CountMode::All) => bump(&mut w.pending, g),
                }
            }
            if cfg.mode == CountMode::Once {
                for o in w.seen.iter_ones() {
                    w.counts[o] += 1;
                }
                w.seen.clear();
                fresh.into_iter().for_each(|g| bump(&mut w.pending, g));
            }
        }
        w.since_sync += 1;
        if w.since_sync >= SYNC_EVERY {
            store.lock().absorb(w);
        }
    })?;

    let mut store = store.into_inner();
    let mut stats = PassStats::default();
    for mut w in workers {
        stats.sequences += w.stats.sequences;
        stats.bytes += w.stats.bytes;
        stats.windows += w.stats.windows;
        store.absorb(&mut w);
    }
    let TrieStore {
        grams,
        counts,
        pending,
        ..
    } = store;
    let mut out: Vec<GramCount> = grams
        .into_iter()
        .zip(counts)
        .map(|(gram, count)| GramCount { gram, count })
        .collect();
    out.extend(pending.into_iter().map(|(gram, count)| GramCount { gram, count }));
    Ok((out, stats))
}
