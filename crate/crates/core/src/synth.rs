//! Deterministic synthetic corpora with Zipf gram statistics.
//!
//! A corpus is built in two steps from one generator:
//!
//! 1. `distinct` grams of length `n` over the byte alphabet `0..alphabet`
//!    are drawn without replacement and assigned ranks `1..=distinct` in
//!    draw order.
//! 2. Each sequence concatenates `grams_per_seq` grams whose ranks are
//!    sampled i.i.d. from Zipf(`a`).
//!
//! The generator is xoshiro256++ seeded by expanding `seed` with
//! SplitMix64. A uniform draw in `[0, 1)` is `(next_u64 >> 11) * 2^-53`;
//! a rank is the first index whose cumulative probability exceeds it.
//! Gram selection draws each byte as `next_u64 % alphabet`, or shuffles
//! the full gram space with Fisher-Yates (`next_u64 % (i + 1)`) when more
//! than half of it is requested.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusSpec};
use crate::error::{Error, Result};
use crate::theory::ZipfModel;

/// Refuse in-memory corpora above this size.
pub const MEMORY_LIMIT: u64 = 1 << 30;

/// Name of the manifest written next to on-disk corpora.
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Zipf exponent over gram ranks.
    pub a: f64,
    /// Number of distinct grams with nonzero probability.
    pub distinct: u64,
    /// Gram length.
    pub n: usize,
    /// Sequence count.
    pub sequences: u64,
    /// Grams per sequence; sequences are `grams_per_seq * n` bytes.
    pub grams_per_seq: u64,
    pub seed: u64,
    /// Bytes are drawn from `0..alphabet`.
    pub alphabet: u16,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            a: 1.2,
            distinct: 10_000,
            n: 6,
            sequences: 100,
            grams_per_seq: 1000,
            seed: 0,
            alphabet: 256,
        }
    }
}

impl SynthSpec {
    pub fn model(&self) -> Result<ZipfModel> {
        ZipfModel::new(self.a, self.distinct)
    }

    pub fn seq_bytes(&self) -> u64 {
        self.grams_per_seq * self.n as u64
    }

    pub fn total_bytes(&self) -> u64 {
        self.seq_bytes() * self.sequences
    }

    /// Total sampled grams.
    pub fn draws(&self) -> u64 {
        self.grams_per_seq * self.sequences
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        if self.n == 0 {
            return Err(Error::config("gram length must be at least 1"));
        }
        if !(1..=256).contains(&self.alphabet) {
            return Err(Error::config(format!(
                "alphabet size must be in 1..=256, got {}",
                self.alphabet
            )));
        }
        if let Some(space) = self.gram_space() {
            if space < self.distinct as u128 {
                return Err(Error::config(format!(
                    "alphabet of {} symbols has only {space} grams of length {}, fewer than the {} requested",
                    self.alphabet, self.n, self.distinct
                )));
            }
        }
        Ok(())
    }

    /// `alphabet^n`, or `None` when it overflows `u128`.
    fn gram_space(&self) -> Option<u128> {
        (self.alphabet as u128).checked_pow(self.n.try_into().ok()?)
    }
}

/// A generated corpus plus the gram assigned to each rank.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    /// `ranked[i]` is the gram of rank `i + 1`.
    pub ranked: Vec<Vec<u8>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SynthSpec,
    pub prng: String,
    pub files: Vec<String>,
    pub bytes: u64,
}

/// Sequence generator; yields sequences in corpus order.
pub struct Generator {
    spec: SynthSpec,
    rng: Xoshiro256PlusPlus,
    ranked: Vec<Vec<u8>>,
    cdf: Vec<f64>,
    emitted: u64,
}

impl Generator {
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
        let ranked = pick_grams(spec, &mut rng);
        let mut cdf = spec.model()?.probabilities();
        let mut acc = 0.0;
        for p in cdf.iter_mut() {
            acc += *p;
            *p = acc;
        }
        Ok(Generator {
            spec: *spec,
            rng,
            ranked,
            cdf,
            emitted: 0,
        })
    }

    pub fn ranked(&self) -> &[Vec<u8>] {
        &self.ranked
    }

    /// Next 0-based rank.
    pub fn sample_rank(&mut self) -> usize {
        let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }

    pub fn next_sequence(&mut self) -> Option<Vec<u8>> {
        if self.emitted == self.spec.sequences {
            return None;
        }
        self.emitted += 1;
        let mut seq = Vec::with_capacity(self.spec.seq_bytes() as usize);
        for _ in 0..self.spec.grams_per_seq {
            let r = self.sample_rank();
            seq.extend_from_slice(&self.ranked[r]);
        }
        Some(seq)
    }
}

impl Iterator for Generator {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        self.next_sequence()
    }
}

fn pick_grams(spec: &SynthSpec, rng: &mut Xoshiro256PlusPlus) -> Vec<Vec<u8>> {
    let alpha = spec.alphabet as u64;
    let d = spec.distinct as usize;
    let space = spec.gram_space();
    if space.is_some_and(|s| s < 2 * spec.distinct as u128) {
        let space = space.unwrap() as u64;
        let mut all: Vec<u64> = (0..space).collect();
        for i in (1..all.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            all.swap(i, j);
        }
        return all[..d]
            .iter()
            .map(|&x| {
                let mut g = vec![0u8; spec.n];
                let mut v = x;
                for b in g.iter_mut().rev() {
                    *b = (v % alpha) as u8;
                    v /= alpha;
                }
                g
            })
            .collect();
    }
    let mut seen = HashSet::with_capacity(d);
    let mut out = Vec::with_capacity(d);
    while out.len() < d {
        let g: Vec<u8> = (0..spec.n).map(|_| (rng.next_u64() % alpha) as u8).collect();
        if seen.insert(g.clone()) {
            out.push(g);
        }
    }
    out
}

/// Builds the corpus in memory.
pub fn generate_in_memory(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    if spec.total_bytes() > MEMORY_LIMIT {
        return Err(Error::config(format!(
            "synthetic corpus of {} bytes exceeds the in-memory limit; write it to a directory",
            spec.total_bytes()
        )));
    }
    let mut gen = Generator::new(spec)?;
    let records: Vec<Vec<u8>> = gen.by_ref().collect();
    Ok(SynthCorpus {
        corpus: Corpus::from_records(records),
        ranked: gen.ranked,
    })
}

/// Writes `<dir>/data/seq-XXXXXXXX.bin` plus `<dir>/manifest.json` and
/// opens the result.
pub fn generate_to_dir(spec: &SynthSpec, dir: &Path) -> Result<SynthCorpus> {
    let mut gen = Generator::new(spec)?;
    let data = dir.join("data");
    fs::create_dir_all(&data).map_err(|e| Error::io(&data, e))?;
    let mut files = Vec::with_capacity(spec.sequences as usize);
    let mut i = 0u64;
    while let Some(seq) = gen.next_sequence() {
        let name = format!("seq-{i:08}.bin");
        let path = data.join(&name);
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        w.write_all(&seq)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        files.push(format!("data/{name}"));
        i += 1;
    }
    let manifest = Manifest {
        spec: *spec,
        prng: "xoshiro256++ seeded by SplitMix64".into(),
        files,
        bytes: spec.total_bytes(),
    };
    let mpath = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
    let corpus = Corpus::open(&CorpusSpec::from_paths([data]))?;
    Ok(SynthCorpus {
        corpus,
        ranked: gen.ranked,
    })
}

/// Either destination, picked by `out`.
pub fn generate_corpus(spec: &SynthSpec, out: Option<&Path>) -> Result<SynthCorpus> {
    match out {
        Some(dir) => generate_to_dir(spec, dir),
        None => generate_in_memory(spec),
    }
}

/// Reads the manifest of an on-disk corpus.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path: PathBuf = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("bad manifest {}: {e}", path.display())))
}
