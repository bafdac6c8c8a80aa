//! Result comparison, prefix-recall measurement, feature matrices and run
//! reports.

use std::collections::HashSet;
use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::counting::{CountMode, PassOptions, PassStats};
use crate::error::{Error, Result};
use crate::hashgram::HashgramOutput;
use crate::intergrams::PassResult;
use crate::oracle::{naive_count, GramCountMap};
use crate::topk::TopKList;
use crate::trie::{PrefixTrie, TrieLayout};

/// Jaccard similarity of the gram sets; counts are ignored.
pub fn jaccard(a: &TopKList, b: &TopKList) -> f64 {
    let sa: HashSet<&[u8]> = a.grams().collect();
    let sb: HashSet<&[u8]> = b.grams().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Fraction of the true top `k` `(n_small + 1)`-grams whose `n_small`-byte
/// prefix is among the true top `ceil(z * k)` `n_small`-grams.
///
/// Both gram lengths are counted with the naive oracle. Returns 1.0 when
/// the corpus has no `(n_small + 1)`-grams.
pub fn prefix_recall(corpus: &Corpus, k: usize, z: f64, n_small: usize, mode: CountMode) -> Result<f64> {
    let small = naive_count(corpus, n_small, mode)?;
    let big = naive_count(corpus, n_small + 1, mode)?;
    Ok(prefix_recall_from(&small, &big, k, z))
}

/// [`prefix_recall`] over counts already in hand.
pub fn prefix_recall_from(small: &GramCountMap, big: &GramCountMap, k: usize, z: f64) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    assert!(z.is_finite() && z >= 1.0, "z must be at least 1");
    let kp = ((z * k as f64).ceil() as usize).max(k);
    let top_big = big.topk(k);
    if top_big.is_empty() {
        return 1.0;
    }
    let top_small = small.topk(kp);
    let prefixes: HashSet<&[u8]> = top_small.grams().collect();
    let hit = top_big
        .grams()
        .filter(|g| prefixes.contains(&g[..g.len() - 1]))
        .count();
    hit as f64 / top_big.len() as f64
}

/// Measured prefix-transfer quantities for one corpus and `k'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrefixTransfer {
    /// Share of all `n`-gram occurrences taken by the top `k'` `n`-grams.
    pub beta: f64,
    /// Share of all `(n+1)`-gram occurrences whose prefix is a top `k'` `n`-gram.
    pub prefixed: f64,
    /// Sequences holding at least one `n`-gram.
    pub m: u64,
    /// Total `n`-gram occurrences.
    pub n_total: u64,
}

impl PrefixTransfer {
    /// `beta - m / (N - m)`, or `None` when `N <= m`.
    pub fn beta_prime(&self) -> Option<f64> {
        crate::theory::beta_prime(self.beta, self.m, self.n_total).ok()
    }
}

/// Counts every occurrence (count-all) at lengths `n` and `n + 1` and
/// measures how much of the top-`k'` mass carries over.
pub fn prefix_transfer(corpus: &Corpus, n: usize, k_prime: usize) -> Result<PrefixTransfer> {
    let small = naive_count(corpus, n, CountMode::All)?;
    let big = naive_count(corpus, n + 1, CountMode::All)?;
    let m = corpus.stats(n)?.sequences;
    let n_total = small.total();
    let top = small.topk(k_prime);
    let top_mass: u64 = top.entries().iter().map(|e| e.count).sum();
    let prefixes: HashSet<&[u8]> = top.grams().collect();
    let big_total = big.total();
    let prefixed: u64 = big
        .iter()
        .filter(|(g, _)| prefixes.contains(&g[..n]))
        .map(|(_, c)| c)
        .sum();
    let ratio = |a: u64, b: u64| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(PrefixTransfer {
        beta: ratio(top_mass, n_total),
        prefixed: ratio(prefixed, big_total),
        m,
        n_total,
    })
}

/// Sparse Boolean matrix in coordinate form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col)` pairs of set entries, sorted.
    pub entries: Vec<(usize, usize)>,
}

impl FeatureMatrix {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.entries.binary_search(&(row, col)).is_ok()
    }

    pub fn row(&self, row: usize) -> Vec<bool> {
        let mut out = vec![false; self.cols];
        let start = self.entries.partition_point(|&(r, _)| r < row);
        for &(r, c) in &self.entries[start..] {
            if r != row {
                break;
            }
            out[c] = true;
        }
        out
    }

    /// Set entries per column.
    pub fn column_counts(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.cols];
        for &(_, c) in &self.entries {
            out[c] += 1;
        }
        out
    }

    /// Header line `rows\tcols`, then one `row\tcol` line per set entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}\t{}", self.rows, self.cols)?;
        for &(r, c) in &self.entries {
            writeln!(w, "{r}\t{c}")?;
        }
        w.flush()
    }
}

/// Marks which vocabulary grams occur in each sequence; one pass.
///
/// Column `j` is the `j`-th entry of `vocab`; row `i` is the `i`-th sequence.
/// Panics when the vocabulary mixes gram lengths.
pub fn featurize(corpus: &Corpus, vocab: &TopKList, opts: &PassOptions) -> Result<FeatureMatrix> {
    let n = vocab.gram_len().unwrap_or(0);
    let trie = PrefixTrie::build(vocab.grams(), TrieLayout::FrequencyOrdered);
    let mut col_of = vec![0usize; trie.len()];
    for (j, g) in vocab.grams().enumerate() {
        let o = trie.lookup(g).expect("vocab gram is in its own trie");
        col_of[o as usize] = j;
    }
    struct Worker {
        rows: u64,
        entries: Vec<(usize, usize)>,
    }
    let init = || Worker {
        rows: 0,
        entries: Vec::new(),
    };
    let states = corpus.par_for_each(opts.workers, init, |w, seq| {
        w.rows += 1;
        if n == 0 || seq.bytes.len() < n {
            return;
        }
        let row = seq.id as usize;
        let start = w.entries.len();
        for g in seq.bytes.windows(n) {
            if let Some(o) = trie.lookup(g) {
                w.entries.push((row, col_of[o as usize]));
            }
        }
        let tail = &mut w.entries[start..];
        tail.sort_unstable();
        let mut keep = start;
        for i in start..w.entries.len() {
            if i == start || w.entries[i] != w.entries[keep - 1] {
                w.entries[keep] = w.entries[i];
                keep += 1;
            }
        }
        w.entries.truncate(keep);
    })?;
    let rows = states.iter().map(|s| s.rows).sum::<u64>() as usize;
    let mut entries: Vec<(usize, usize)> = states.into_iter().flat_map(|s| s.entries).collect();
    entries.sort_unstable();
    Ok(FeatureMatrix {
        rows,
        cols: vocab.len(),
        entries,
    })
}

/// Version of the JSON layout written by [`RunReport::to_json`].
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One step of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRow {
    pub label: String,
    pub runtime_secs: f64,
    /// Bytes read by the step; zero for in-memory steps.
    pub bytes: u64,
    /// Bytes per second, for steps that scan the corpus.
    pub throughput: Option<f64>,
}

impl PassRow {
    fn scan(label: String, bytes: u64, elapsed: Duration) -> Self {
        let secs = elapsed.as_secs_f64();
        PassRow {
            label,
            runtime_secs: secs,
            bytes,
            throughput: Some(if secs > 0.0 { bytes as f64 / secs } else { 0.0 }),
        }
    }

    fn local(label: String, elapsed: Duration) -> Self {
        PassRow {
            label,
            runtime_secs: elapsed.as_secs_f64(),
            bytes: 0,
            throughput: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub algorithm: String,
    /// Echo of the run configuration.
    pub config: serde_json::Value,
    pub passes: Vec<PassRow>,
    pub total_secs: f64,
    pub jaccard: Option<f64>,
}

impl RunReport {
    pub fn new(algorithm: &str, config: serde_json::Value) -> Self {
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            algorithm: algorithm.to_string(),
            config,
            passes: Vec::new(),
            total_secs: 0.0,
            jaccard: None,
        }
    }

    pub fn push_intergrams(&mut self, passes: &[PassResult]) {
        for p in passes {
            let kind = if p.j <= 3 { "count" } else { "extend" };
            self.passes
                .push(PassRow::scan(format!("{kind} {}-grams", p.j), p.bytes, p.pass_time));
            self.passes
                .push(PassRow::local(format!("select top {}-grams", p.j), p.select_time));
        }
    }

    pub fn push_hashgram(&mut self, out: &HashgramOutput) {
        let row = |label: &str, s: &PassStats| PassRow::scan(label.to_string(), s.bytes, s.elapsed);
        self.passes.push(row("hash pass", &out.first_pass));
        self.passes.push(PassRow::local("select top buckets".into(), out.select_time));
        self.passes.push(row("exact pass", &out.second_pass));
    }

    pub fn push_row(&mut self, label: &str, bytes: u64, elapsed: Duration) {
        self.passes.push(PassRow::scan(label.to_string(), bytes, elapsed));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Header plus one line per step, then a total line.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("pass\truntime_s\tbytes\tthroughput_bytes_per_s\n");
        for p in &self.passes {
            let tp = p.throughput.map_or("-".to_string(), |t| format!("{t:.0}"));
            s.push_str(&format!("{}\t{:.6}\t{}\t{tp}\n", p.label, p.runtime_secs, p.bytes));
        }
        s.push_str(&format!("total\t{:.6}\t-\t-\n", self.total_secs));
        if let Some(j) = self.jaccard {
            s.push_str(&format!("jaccard\t{j:.6}\t-\t-\n"));
        }
        s
    }
}

/// Errors with a message when two lists hold different gram lengths.
pub fn check_same_length(a: &TopKList, b: &TopKList) -> Result<()> {
    match (a.gram_len(), b.gram_len()) {
        (Some(x), Some(y)) if x != y => Err(Error::config(format!(
            "cannot compare {x}-grams with {y}-grams"
        ))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topk::GramCount;
    use proptest::prelude::*;

    fn list(grams: &[&str]) -> TopKList {
        let e = grams
            .iter()
            .map(|g| GramCount {
                gram: g.as_bytes().to_vec(),
                count: 1,
            })
            .collect();
        TopKList::from_unsorted(e, 1000)
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&list(&["ab", "cd"]), &list(&["cd", "ab"])), 1.0);
        assert_eq!(jaccard(&list(&["ab"]), &list(&["cd"])), 0.0);
        let j = jaccard(&list(&["ab", "cd"]), &list(&["cd", "ef"]));
        assert!((j - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard(&list(&[]), &list(&[])), 1.0);
    }

    #[test]
    fn prefix_recall_examples() {
        let c = Corpus::from_records(["aaab", "aaac", "aaad", "zzz"]);
        assert_eq!(prefix_recall(&c, 3, 1.0, 3, CountMode::Once).unwrap(), 1.0);
        let c = Corpus::from_records(["abcd", "bcde", "cdef", "xabc"]);
        assert_eq!(prefix_recall(&c, 3, 100.0, 3, CountMode::All).unwrap(), 1.0);
        assert_eq!(prefix_recall(&Corpus::from_records(["ab"]), 3, 1.0, 3, CountMode::All).unwrap(), 1.0);
    }

    #[test]
    fn transfer_bound_on_small_corpus() {
        let c = Corpus::from_records(["abcabcabd", "abcab", "xyz"]);
        let t = prefix_transfer(&c, 3, 1).unwrap();
        assert_eq!(t.m, 3);
        assert_eq!(t.n_total, 7 + 3 + 1);
        assert!(t.prefixed >= t.beta_prime().unwrap());
    }

    #[test]
    fn featurize_examples() {
        let c = Corpus::from_records(["abc", "bbc"]);
        let m = featurize(&c, &list(&["ab", "bc"]), &PassOptions::default()).unwrap();
        let ab = list(&["ab", "bc"]).grams().position(|g| g == b"ab").unwrap();
        let bc = 1 - ab;
        assert_eq!((m.rows, m.cols), (2, 2));
        assert!(m.get(0, ab) && m.get(0, bc));
        assert!(!m.get(1, ab) && m.get(1, bc));
        let empty = featurize(&c, &list(&[]), &PassOptions::default()).unwrap();
        assert_eq!((empty.rows, empty.cols, empty.entries.len()), (2, 0, 0));
        let mut out = Vec::new();
        m.write_coo(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("2\t2\n0\t"));
    }

    #[test]
    #[should_panic]
    fn featurize_rejects_mixed_lengths() {
        let c = Corpus::from_records(["abc"]);
        let _ = featurize(&c, &list(&["ab", "abc"]), &PassOptions::default());
    }

    #[test]
    fn report_formats() {
        let mut r = RunReport::new("intergrams", serde_json::json!({"n": 6}));
        r.push_row("count 3-grams", 1000, Duration::from_millis(500));
        r.total_secs = 0.5;
        let tsv = r.to_tsv();
        assert!(tsv.contains("count 3-grams\t0.500000\t1000\t2000\n"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["schema_version"], 1);
    }

    proptest! {
        #[test]
        fn featurize_matches_once_counts(
            records in prop::collection::vec(prop::collection::vec(0u8..4, 0..40), 1..12),
            k in 1usize..20,
        ) {
            let c = Corpus::from_records(&records);
            let counts = naive_count(&c, 3, CountMode::Once).unwrap();
            let vocab = counts.topk(k);
            let m = featurize(&c, &vocab, &PassOptions::default().with_workers(3)).unwrap();
            prop_assert_eq!(m.rows, records.len());
            let cols = m.column_counts();
            for (j, e) in vocab.entries().iter().enumerate() {
                prop_assert_eq!(cols[j], e.count);
            }
            for (i, r) in records.iter().enumerate() {
                let row = m.row(i);
                for (j, g) in vocab.grams().enumerate() {
                    prop_assert_eq!(row[j], r.windows(3).any(|w| w == g));
                }
            }
        }

        #[test]
        fn jaccard_symmetric(a in prop::collection::hash_set("[a-c]{2}", 0..9), b in prop::collection::hash_set("[a-c]{2}", 0..9)) {
            let la = list(&a.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let lb = list(&b.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let j = jaccard(&la, &lb);
            prop_assert_eq!(j, jaccard(&lb, &la));
            prop_assert_eq!(j == 1.0, a == b);
        }
    }
}
