//! Ranked `(gram, count)` lists and their TSV form.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GramCount {
    pub gram: Vec<u8>,
    pub count: u64,
}

/// Count descending, then gram bytes ascending.
#[inline]
pub fn canonical_cmp(a_gram: &[u8], a_count: u64, b_gram: &[u8], b_count: u64) -> Ordering {
    b_count.cmp(&a_count).then_with(|| a_gram.cmp(b_gram))
}

/// A ranked list in canonical order. Rank 0 is the most frequent entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopKList {
    entries: Vec<GramCount>,
}

impl TopKList {
    /// Sorts `entries` canonically, drops zero counts and keeps the first `k`.
    pub fn from_unsorted(mut entries: Vec<GramCount>, k: usize) -> Self {
        entries.retain(|e| e.count > 0);
        entries.sort_unstable_by(|a, b| canonical_cmp(&a.gram, a.count, &b.gram, b.count));
        entries.truncate(k);
        TopKList { entries }
    }

    pub fn entries(&self) -> &[GramCount] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<GramCount> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn grams(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.entries.iter().map(|e| e.gram.as_slice())
    }

    /// Common gram length, or `None` when empty.
    ///
    /// Panics if lengths are mixed.
    pub fn gram_len(&self) -> Option<usize> {
        let first = self.entries.first()?.gram.len();
        assert!(
            self.entries.iter().all(|e| e.gram.len() == first),
            "top-k list mixes gram lengths"
        );
        Some(first)
    }

    /// One line per gram: lowercase hex bytes, a tab, the decimal count.
    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 24);
        for e in &self.entries {
            for b in &e.gram {
                let _ = write!(out, "{b:02x}");
            }
            let _ = writeln!(out, "\t{}", e.count);
        }
        out
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_tsv().as_bytes())
    }

    /// Parses the TSV form. Line order is preserved as rank order.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<tsv>", e))?;
            if line.is_empty() {
                continue;
            }
            let bad = || Error::config(format!("malformed TSV at line {}: {line:?}", lineno + 1));
            let (hex, count) = line.split_once('\t').ok_or_else(bad)?;
            if hex.len() % 2 != 0 {
                return Err(bad());
            }
            let gram = (0..hex.len())
                .step_by(2)
                .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
                .collect::<Result<Vec<u8>, _>>()
                .map_err(|_| bad())?;
            let count = count.trim_end().parse::<u64>().map_err(|_| bad())?;
            entries.push(GramCount { gram, count });
        }
        Ok(TopKList { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gc(g: &str, c: u64) -> GramCount {
        GramCount {
            gram: g.as_bytes().to_vec(),
            count: c,
        }
    }

    #[test]
    fn canonical_order_and_truncation() {
        let l = TopKList::from_unsorted(vec![gc("c", 1), gc("b", 3), gc("a", 3), gc("z", 0)], 2);
        assert_eq!(l.entries(), &[gc("a", 3), gc("b", 3)]);
        let l = TopKList::from_unsorted(vec![gc("z", 0)], 5);
        assert!(l.is_empty());
    }

    #[test]
    fn tsv_format_is_exact() {
        let l = TopKList::from_unsorted(vec![gc("aaa", 2), gc("aab", 1)], 10);
        assert_eq!(l.to_tsv(), "616161\t2\n616162\t1\n");
        let back = TopKList::read_tsv(l.to_tsv().as_bytes()).unwrap();
        assert_eq!(back, l);
        let bin = TopKList::from_unsorted(
            vec![GramCount {
                gram: vec![0, 0xff, 0x0a],
                count: 7,
            }],
            1,
        );
        assert_eq!(bin.to_tsv(), "00ff0a\t7\n");
    }

    #[test]
    fn malformed_tsv_rejected() {
        assert!(TopKList::read_tsv("6161\n".as_bytes()).is_err());
        assert!(TopKList::read_tsv("616\t1\n".as_bytes()).is_err());
        assert!(TopKList::read_tsv("zz\t1\n".as_bytes()).is_err());
        assert!(TopKList::read_tsv("61\tx\n".as_bytes()).is_err());
    }
}
