//! Multi-pass top-k n-gram counting.
//!
//! Pass 3 counts every trigram densely. Each later pass `j` counts only the
//! `j`-grams whose `(j-1)`-byte prefix is among the `k' = ceil(z * k)` most
//! frequent grams of the previous pass. The surviving prefixes are held in a
//! [`PrefixTrie`], and a candidate `j`-gram is addressed as
//! `prefix_ordinal * 256 + last_byte`, so every extension pass counts into a
//! dense table of `256 * k'` entries.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::counting::{run_dense_pass, top_k, CandidateSource, CountMode, CountTable, PassOptions, PassStats};
use crate::error::{Error, Result};
use crate::topk::TopKList;
use crate::trie::PrefixTrie;
use crate::trigram::{count_dense, topk_dense, MAX_DENSE_N};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntergramConfig {
    pub n: usize,
    pub k: usize,
    /// Oversampling factor; intermediate passes keep `ceil(z * k)` grams.
    pub z: f64,
    pub mode: CountMode,
    pub flush_batch: usize,
}

impl Default for IntergramConfig {
    fn default() -> Self {
        IntergramConfig {
            n: 6,
            k: 10_000,
            z: 1.5,
            mode: CountMode::Once,
            flush_batch: 8,
        }
    }
}

impl IntergramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(self.z.is_finite() && self.z >= 1.0) {
            return Err(Error::config(format!("z must be a finite number >= 1, got {}", self.z)));
        }
        if self.flush_batch == 0 {
            return Err(Error::config("flush batch size must be at least 1"));
        }
        let kp = self.k_prime();
        if kp > (u32::MAX as usize + 1) / 256 {
            return Err(Error::config(format!(
                "k' = {kp} is too large: 256 * k' must fit 32-bit candidate ids"
            )));
        }
        Ok(())
    }

    /// Number of grams retained between passes.
    pub fn k_prime(&self) -> usize {
        let kp = (self.z * self.k as f64).ceil();
        (kp as usize).max(self.k)
    }
}

/// Timing and size record of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassResult {
    /// Gram length counted by this pass.
    pub j: usize,
    /// Size of the candidate id space.
    pub capacity: usize,
    pub sequences: u64,
    pub bytes: u64,
    /// Gram windows visited.
    pub windows: u64,
    /// Candidates with a nonzero count.
    pub nonzero: usize,
    /// Grams retained for the next pass (or returned, on the last pass).
    pub retained: usize,
    #[serde(with = "secs")]
    pub pass_time: Duration,
    /// Top-k selection plus trie construction after the pass.
    #[serde(with = "secs")]
    pub select_time: Duration,
    /// Set when fewer than `k'` candidates were nonzero.
    pub short: bool,
}

impl PassResult {
    pub fn throughput(&self) -> f64 {
        let s = self.pass_time.as_secs_f64();
        if s > 0.0 {
            self.bytes as f64 / s
        } else {
            0.0
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

#[derive(Debug, Clone)]
pub struct IntergramOutput {
    pub top: TopKList,
    pub passes: Vec<PassResult>,
    /// Prefix set used by the last extension pass.
    pub final_prefixes: Option<TopKList>,
}

/// Candidate id of `prefix_ordinal` extended by `last_byte`.
#[inline]
pub fn candidate_id(prefix_ordinal: usize, last_byte: u8) -> usize {
    prefix_ordinal * 256 + last_byte as usize
}

struct ExtendSource<'a> {
    trie: &'a PrefixTrie,
}

impl CandidateSource for ExtendSource<'_> {
    fn window(&self) -> usize {
        self.trie.depth() + 1
    }

    fn capacity(&self) -> usize {
        self.trie.len() * 256
    }

    #[inline]
    fn for_each_candidate<F: FnMut(usize)>(&self, seq: &[u8], mut emit: F) {
        let d = self.trie.depth();
        if self.trie.is_empty() || seq.len() <= d {
            return;
        }
        for w in seq.windows(d + 1) {
            if let Some(ord) = self.trie.lookup(&w[..d]) {
                emit(candidate_id(ord as usize, w[d]));
            }
        }
    }
}

/// Counts `j`-grams whose `(j-1)`-prefix is in `trie`, into `256 * |trie|`
/// slots indexed by [`candidate_id`].
pub fn extend_pass(
    corpus: &Corpus,
    trie: &PrefixTrie,
    j: usize,
    mode: CountMode,
    opts: &PassOptions,
) -> Result<(CountTable, PassStats)> {
    assert!(
        trie.is_empty() || trie.depth() + 1 == j,
        "trie depth {} does not match pass length {j}",
        trie.depth()
    );
    let (table, mut stats) = run_dense_pass(corpus, &ExtendSource { trie }, mode, opts)?;
    // Windows of the requested length, even if the trie is empty.
    if trie.is_empty() {
        stats.windows = 0;
        for seq in corpus.iter() {
            stats.windows += crate::corpus::gram_windows(seq?.bytes.len(), j) as u64;
        }
    }
    Ok((table, stats))
}

/// Runs the full pass sequence and returns the canonical top `k` grams of
/// length `cfg.n`.
pub fn run_intergrams(corpus: &Corpus, cfg: &IntergramConfig, opts: &PassOptions) -> Result<IntergramOutput> {
    cfg.validate()?;
    let opts = PassOptions {
        flush_batch: cfg.flush_batch,
        ..*opts
    };
    let k_prime = cfg.k_prime();
    let mut passes = Vec::new();

    let first_n = cfg.n.min(MAX_DENSE_N);
    let (table, stats) = count_dense(corpus, first_n, cfg.mode, &opts)?;
    let select_start = Instant::now();
    let keep = if cfg.n == first_n { cfg.k } else { k_prime };
    let mut prefixes = topk_dense(&table, first_n, keep);
    let nonzero = table.nonzero();
    drop(table);
    if cfg.n == first_n {
        passes.push(pass_result(first_n, 1 << (8 * first_n), &stats, nonzero, &prefixes, keep, select_start.elapsed()));
        return Ok(IntergramOutput {
            top: prefixes,
            passes,
            final_prefixes: None,
        });
    }
    let mut trie = PrefixTrie::from_topk(&prefixes);
    passes.push(pass_result(first_n, 1 << (8 * first_n), &stats, nonzero, &prefixes, keep, select_start.elapsed()));

    for j in first_n + 1..=cfg.n {
        let (table, stats) = extend_pass(corpus, &trie, j, cfg.mode, &opts)?;
        let select_start = Instant::now();
        let last = j == cfg.n;
        let keep = if last { cfg.k } else { k_prime };
        let parents = &prefixes;
        let top = top_k(&table, keep, |id| {
            let mut g = parents.entries()[id / 256].gram.clone();
            g.push((id % 256) as u8);
            g
        });
        let nonzero = table.nonzero();
        let capacity = table.capacity();
        drop(table);
        if last {
            passes.push(pass_result(j, capacity, &stats, nonzero, &top, keep, select_start.elapsed()));
            return Ok(IntergramOutput {
                top,
                passes,
                final_prefixes: Some(prefixes),
            });
        }
        trie = PrefixTrie::from_topk(&top);
        passes.push(pass_result(j, capacity, &stats, nonzero, &top, keep, select_start.elapsed()));
        prefixes = top;
    }
    unreachable!("loop returns on the last pass")
}

fn pass_result(
    j: usize,
    capacity: usize,
    stats: &PassStats,
    nonzero: usize,
    kept: &TopKList,
    wanted: usize,
    select_time: Duration,
) -> PassResult {
    PassResult {
        j,
        capacity,
        sequences: stats.sequences,
        bytes: stats.bytes,
        windows: stats.windows,
        nonzero,
        retained: kept.len(),
        pass_time: stats.elapsed,
        select_time,
        short: kept.len() < wanted,
    }
}
