//! Sequence sources.
//!
//! A [`Corpus`] is a resolved, re-iterable description of the input: a sorted
//! list of files (or an in-memory list of records) plus the rule that splits
//! each file into sequences. Every enumeration yields the same `(id, bytes)`
//! pairs in the same order, which the multi-pass algorithms rely on.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crossbeam_channel::bounded;
use walkdir::WalkDir;

use crate::error::{Error, Result};

/// One input record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub id: u64,
    pub bytes: Vec<u8>,
}

/// How a file is split into sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordMode {
    /// The whole file is one sequence.
    #[default]
    WholeFile,
    /// Each `\n`-terminated line is one sequence (the terminator is dropped).
    Lines,
    /// Fixed-size records; the final record of a file may be shorter.
    /// Grams spanning a record boundary are not counted.
    Chunks(usize),
}

#[derive(Debug, Clone, Default)]
pub struct CorpusSpec {
    pub roots: Vec<PathBuf>,
    pub recurse: bool,
    pub in_memory: Option<Vec<Vec<u8>>>,
    pub record_mode: RecordMode,
}

impl CorpusSpec {
    pub fn from_paths<P: AsRef<Path>>(paths: impl IntoIterator<Item = P>) -> Self {
        CorpusSpec {
            roots: paths.into_iter().map(|p| p.as_ref().to_path_buf()).collect(),
            recurse: true,
            ..Default::default()
        }
    }

    pub fn in_memory<B: AsRef<[u8]>>(records: impl IntoIterator<Item = B>) -> Self {
        CorpusSpec {
            in_memory: Some(records.into_iter().map(|r| r.as_ref().to_vec()).collect()),
            ..Default::default()
        }
    }

    pub fn with_record_mode(mut self, mode: RecordMode) -> Self {
        self.record_mode = mode;
        self
    }
}

#[derive(Debug, Clone)]
enum Source {
    Memory(Arc<Vec<Vec<u8>>>),
    Files(Arc<Vec<PathBuf>>),
}

/// A resolved corpus. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Corpus {
    source: Source,
    mode: RecordMode,
}

/// Sequence counts over a corpus for a given gram length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusStats {
    /// Number of sequences, including ones too short to hold a gram.
    pub sequences: u64,
    /// Total gram occurrences: sum over sequences of `max(0, len - n + 1)`.
    pub grams: u64,
    pub bytes: u64,
}

/// Number of `n`-gram windows in a sequence of `len` bytes.
#[inline]
pub fn gram_windows(len: usize, n: usize) -> usize {
    (len + 1).saturating_sub(n)
}

impl Corpus {
    /// Resolves the spec into a fixed, sorted file list (or in-memory records).
    pub fn open(spec: &CorpusSpec) -> Result<Self> {
        if let RecordMode::Chunks(0) = spec.record_mode {
            return Err(Error::config("chunk size must be at least 1 byte"));
        }
        let source = match &spec.in_memory {
            Some(records) => Source::Memory(Arc::new(records.clone())),
            None => {
                if spec.roots.is_empty() {
                    return Err(Error::config("no input paths given"));
                }
                let mut files = Vec::new();
                for root in &spec.roots {
                    collect_files(root, spec.recurse, &mut files)?;
                }
                files.sort();
                files.dedup();
                Source::Files(Arc::new(files))
            }
        };
        Ok(Corpus {
            source,
            mode: spec.record_mode,
        })
    }

    pub fn from_records<B: AsRef<[u8]>>(records: impl IntoIterator<Item = B>) -> Self {
        Corpus {
            source: Source::Memory(Arc::new(
                records.into_iter().map(|r| r.as_ref().to_vec()).collect(),
            )),
            mode: RecordMode::WholeFile,
        }
    }

    /// The resolved file list, empty for in-memory corpora.
    pub fn files(&self) -> &[PathBuf] {
        match &self.source {
            Source::Files(f) => f,
            Source::Memory(_) => &[],
        }
    }

    /// Total input size in bytes, from file metadata (or record lengths).
    pub fn size_bytes(&self) -> Result<u64> {
        match &self.source {
            Source::Memory(r) => Ok(r.iter().map(|s| s.len() as u64).sum()),
            Source::Files(files) => files.iter().try_fold(0u64, |acc, p| {
                let md = std::fs::metadata(p).map_err(|e| Error::io(p, e))?;
                Ok(acc + md.len())
            }),
        }
    }

    /// Sequential enumeration.
    pub fn iter(&self) -> SequenceIter<'_> {
        SequenceIter {
            corpus: self,
            next_id: 0,
            file_idx: 0,
            mem_idx: 0,
            reader: None,
        }
    }

    /// Visits every sequence exactly once across `workers` threads.
    ///
    /// A single reader thread enumerates the corpus into a bounded queue;
    /// each worker owns a state built by `init` and receives sequences by
    /// value. The reader blocks while the queue is full. Returns the worker
    /// states in worker order, or the first I/O error encountered.
    pub fn par_for_each<S, I, F>(&self, workers: usize, init: I, work: F) -> Result<Vec<S>>
    where
        S: Send,
        I: Fn() -> S + Sync,
        F: Fn(&mut S, Sequence) + Sync,
    {
        let workers = workers.max(1);
        let (tx, rx) = bounded::<Sequence>(2 * workers);
        std::thread::scope(|scope| {
            let reader = scope.spawn(move || -> Result<()> {
                for seq in self.iter() {
                    if tx.send(seq?).is_err() {
                        break;
                    }
                }
                Ok(())
            });
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    let rx = rx.clone();
                    let init = &init;
                    let work = &work;
                    scope.spawn(move || {
                        let mut state = init();
                        for seq in rx.iter() {
                            work(&mut state, seq);
                        }
                        state
                    })
                })
                .collect();
            drop(rx);
            let states: Vec<S> = handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                .collect();
            reader
                .join()
                .unwrap_or_else(|p| std::panic::resume_unwind(p))?;
            Ok(states)
        })
    }

    /// Exact `(m, N, bytes)` for gram length `n`.
    pub fn stats(&self, n: usize) -> Result<CorpusStats> {
        assert!(n >= 1, "gram length must be at least 1");
        let mut stats = CorpusStats {
            sequences: 0,
            grams: 0,
            bytes: 0,
        };
        for seq in self.iter() {
            let seq = seq?;
            stats.sequences += 1;
            stats.grams += gram_windows(seq.bytes.len(), n) as u64;
            stats.bytes += seq.bytes.len() as u64;
        }
        Ok(stats)
    }
}

fn collect_files(root: &Path, recurse: bool, out: &mut Vec<PathBuf>) -> Result<()> {
    let md = std::fs::metadata(root)
        .map_err(|e| Error::config(format!("cannot open input {}: {e}", root.display())))?;
    if md.is_file() {
        out.push(root.to_path_buf());
        return Ok(());
    }
    let walker = WalkDir::new(root)
        .min_depth(1)
        .max_depth(if recurse { usize::MAX } else { 1 })
        .follow_links(true);
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() {
            out.push(entry.into_path());
        }
    }
    Ok(())
}

enum RecordReader {
    Lines(BufReader<File>),
    Chunks(BufReader<File>, usize),
}

pub struct SequenceIter<'a> {
    corpus: &'a Corpus,
    next_id: u64,
    file_idx: usize,
    mem_idx: usize,
    reader: Option<(PathBuf, RecordReader)>,
}

impl SequenceIter<'_> {
    fn emit(&mut self, bytes: Vec<u8>) -> Option<Result<Sequence>> {
        let id = self.next_id;
        self.next_id += 1;
        Some(Ok(Sequence { id, bytes }))
    }

    fn next_from_files(&mut self, files: &[PathBuf]) -> Option<Result<Sequence>> {
        loop {
            if let Some((path, reader)) = &mut self.reader {
                let mut buf = Vec::new();
                let got = match reader {
                    RecordReader::Lines(r) => r.read_until(b'\n', &mut buf).map(|n| {
                        if buf.last() == Some(&b'\n') {
                            buf.pop();
                        }
                        n > 0
                    }),
                    RecordReader::Chunks(r, size) => {
                        r.take(*size as u64).read_to_end(&mut buf).map(|n| n > 0)
                    }
                };
                match got {
                    Ok(true) => return self.emit(buf),
                    Ok(false) => self.reader = None,
                    Err(e) => {
                        let path = path.clone();
                        self.reader = None;
                        self.file_idx = files.len();
                        return Some(Err(Error::io(path, e)));
                    }
                }
                continue;
            }
            let path = files.get(self.file_idx)?.clone();
            self.file_idx += 1;
            match self.corpus.mode {
                RecordMode::WholeFile => {
                    return match std::fs::read(&path) {
                        Ok(bytes) => self.emit(bytes),
                        Err(e) => {
                            self.file_idx = files.len();
                            Some(Err(Error::io(path, e)))
                        }
                    };
                }
                mode => match File::open(&path) {
                    Ok(f) => {
                        let r = BufReader::with_capacity(1 << 20, f);
                        let rr = match mode {
                            RecordMode::Lines => RecordReader::Lines(r),
                            RecordMode::Chunks(size) => RecordReader::Chunks(r, size),
                            RecordMode::WholeFile => unreachable!(),
                        };
                        self.reader = Some((path, rr));
                    }
                    Err(e) => {
                        self.file_idx = files.len();
                        return Some(Err(Error::io(path, e)));
                    }
                },
            }
        }
    }

    // In-memory records are already split; record modes only apply to files.
    fn next_from_memory(&mut self, records: &[Vec<u8>]) -> Option<Result<Sequence>> {
        let rec = records.get(self.mem_idx)?.clone();
        self.mem_idx += 1;
        self.emit(rec)
    }
}

impl Iterator for SequenceIter<'_> {
    type Item = Result<Sequence>;

    fn next(&mut self) -> Option<Self::Item> {
        match &self.corpus.source {
            Source::Memory(records) => {
                let records = Arc::clone(records);
                self.next_from_memory(&records)
            }
            Source::Files(files) => {
                let files = Arc::clone(files);
                self.next_from_files(&files)
            }
        }
    }
}
