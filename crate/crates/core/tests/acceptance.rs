//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p intergrams --test acceptance`. Pass criterion
//! numbers as arguments (`-- 3 4`) to run a subset. The process exits
//! nonzero on a failing criterion only when `ACCEPTANCE_STRICT=1` is set.
//! `INTERGRAMS_SCRATCH` selects where the on-disk corpora are written.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use intergrams::hashgram::hash_ngram;
use intergrams::metrics::{jaccard, prefix_recall_from, prefix_transfer};
use intergrams::oracle::naive_count;
use intergrams::synth::{generate_in_memory, generate_to_dir, SynthSpec};
use intergrams::theory::{self, harmonic_partial, mk_bounds, ZipfModel};
use intergrams::{
    run_hashgram, run_intergrams, Corpus, CountMode, HashgramConfig, IntergramConfig, PassOptions, SecondPass,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

const MODES: [CountMode; 2] = [CountMode::Once, CountMode::All];

/// One member of the randomized corpus family.
struct Family {
    records: Vec<Vec<u8>>,
    n: usize,
    k: usize,
}

fn family_member(rng: &mut StdRng) -> Family {
    let m = rng.gen_range(1..=50);
    let alpha: u16 = rng.gen_range(4..=256);
    let records = (0..m)
        .map(|_| {
            let len = rng.gen_range(0..=2000);
            (0..len).map(|_| rng.gen_range(0..alpha) as u8).collect()
        })
        .collect();
    Family {
        records,
        n: [3, 4, 5, 6][rng.gen_range(0..4)],
        k: rng.gen_range(1..=64),
    }
}

fn oracle_exactness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let (mut runs, mut bad) = (0, Vec::new());
    for i in 0..200 {
        let f = family_member(&mut rng);
        let c = Corpus::from_records(&f.records);
        let workers = rng.gen_range(1..=4);
        for mode in MODES {
            // Keep every distinct gram at every intermediate length.
            let widest = (3..f.n)
                .map(|j| naive_count(&c, j, mode).unwrap().len())
                .max()
                .unwrap_or(0);
            let z = (widest as f64 / f.k as f64).max(1.0);
            let cfg = IntergramConfig {
                n: f.n,
                k: f.k,
                z,
                mode,
                flush_batch: 8,
            };
            assert!(cfg.k_prime() >= widest);
            let got = run_intergrams(&c, &cfg, &PassOptions::default().with_workers(workers)).unwrap();
            let want = naive_count(&c, f.n, mode).unwrap().topk(f.k);
            runs += 1;
            if got.top.to_tsv() != want.to_tsv() {
                bad.push(format!("corpus {i} {mode}"));
            }
        }
    }
    Outcome::new(bad.is_empty(), format!("{runs} runs, {} mismatches {:?}", bad.len(), bad))
}

fn hashgram_correctness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let buckets = 1u64 << 24;
    let (mut exact_runs, mut skipped, mut collide_runs, mut bad) = (0, 0, 0, Vec::new());
    for i in 0..200 {
        let f = family_member(&mut rng);
        let c = Corpus::from_records(&f.records);
        for mode in MODES {
            let oracle = naive_count(&c, f.n, mode).unwrap();
            // Search for a seed whose hash is injective on the observed grams,
            // unless the expected number of colliding pairs makes that hopeless.
            let d = oracle.len() as f64;
            let hopeless = d * d / (2.0 * buckets as f64) > 8.0;
            let seed = (0..64u64).filter(|_| !hopeless).find(|&seed| {
                let cfg = HashgramConfig {
                    buckets,
                    seed,
                    n: f.n,
                    ..HashgramConfig::default()
                };
                let set: HashSet<u64> = oracle.iter().map(|(g, _)| hash_ngram(g, &cfg)).collect();
                set.len() == oracle.len()
            });
            for second_pass in [SecondPass::Map, SecondPass::Trie] {
                if let Some(seed) = seed {
                    let cfg = HashgramConfig {
                        buckets,
                        n: f.n,
                        k: f.k,
                        mode,
                        seed,
                        second_pass,
                    };
                    let got = run_hashgram(&c, &cfg, &PassOptions::default().with_workers(2)).unwrap();
                    exact_runs += 1;
                    if got.top.to_tsv() != oracle.topk(f.k).to_tsv() {
                        bad.push(format!("corpus {i} {mode} {second_pass} exact"));
                    }
                } else {
                    skipped += 1;
                }
                let cfg = HashgramConfig {
                    buckets: rng.gen_range(1..=64),
                    n: f.n,
                    k: f.k,
                    mode,
                    seed: rng.gen(),
                    second_pass,
                };
                let got = run_hashgram(&c, &cfg, &PassOptions::default().with_workers(2)).unwrap();
                collide_runs += 1;
                if got.top.entries().iter().any(|e| e.count != oracle.get(&e.gram)) {
                    bad.push(format!("corpus {i} {mode} {second_pass} B={}", cfg.buckets));
                }
            }
        }
    }
    Outcome::new(
        bad.is_empty() && exact_runs > 0,
        format!(
            "{exact_runs} collision-free runs ({skipped} configs with no injective seed skipped), \
             {collide_runs} runs with B <= 64, {} failures {:?}",
            bad.len(),
            bad
        ),
    )
}

fn fig3_shape() -> Outcome {
    let spec = SynthSpec {
        a: 1.2,
        distinct: 100_000,
        n: 3,
        sequences: 1000,
        grams_per_seq: 10_000,
        seed: 3,
        alphabet: 256,
    };
    let s = generate_in_memory(&spec).unwrap();
    let mode = CountMode::Once;
    let small = naive_count(&s.corpus, 3, mode).unwrap();
    let big = naive_count(&s.corpus, 4, mode).unwrap();
    let zs = [1.0, 1.5, 2.0, 3.0];
    let curve = |k: usize| -> Vec<f64> { zs.iter().map(|&z| prefix_recall_from(&small, &big, k, z)).collect() };
    let main = curve(1000);
    let monotone = main.windows(2).all(|w| w[1] >= w[0]);
    let pass = monotone && main[3] >= 0.99;
    let mut detail = format!("{} draws; k=1000 recall at z=1,1.5,2,3: {main:.4?}", spec.draws());
    for k in [100, 10_000] {
        let _ = write!(detail, "; info k={k}: {:.4?}", curve(k));
    }
    Outcome::new(pass, detail)
}

fn theorem1_bounds() -> Outcome {
    let mut violations = Vec::new();
    let mut info = Vec::new();
    let mut cells = 0;
    for a in [0.3, 0.5, 0.8] {
        for d in [10_000u64, 1_000_000] {
            for k in [10u64, 100] {
                for beta in [0.9, 0.99, 0.999] {
                    cells += 1;
                    let w = theory::worst_case(k, d, a, beta).unwrap();
                    let u = theory::u_bound(d, a, beta).unwrap();
                    let r = theory::recall_bound(k, d, a, beta).unwrap();
                    if w.best_rank as f64 > u.ceil() + 1.0 {
                        violations.push(format!("u a={a} D={d} k={k} b={beta}: rank {} > {u:.3}", w.best_rank));
                    }
                    if w.recall_mass + 1e-12 < r.value {
                        violations.push(format!(
                            "recall a={a} D={d} k={k} b={beta}: worst {:.4} (by count {:.4}) < bound {:.4}",
                            w.recall_mass, w.recall_count, r.value
                        ));
                    }
                    // Same bound keeping the +1 that the final substitution drops.
                    let x = ((d as f64).powf(1.0 - a) - a) * (1.0 - beta);
                    let kept = (1.0 - (x + 1.0 - a) / ((k as f64 + 1.0).powf(1.0 - a) - 1.0)).clamp(0.0, 1.0);
                    if w.recall_mass + 1e-12 < kept {
                        info.push(format!("a={a} D={d} k={k} b={beta}"));
                    }
                }
            }
        }
    }
    Outcome::new(
        violations.is_empty(),
        format!(
            "{cells} cells, {} violations {violations:?}; info: variant with (X + 1 - a) numerator violated in {} cells",
            violations.len(),
            info.len()
        ),
    )
}

fn sandwich() -> Outcome {
    let mut bad = Vec::new();
    let mut checked = 0;
    for a in [0.3, 0.5, 1.0, 1.5, 2.0, 2.5] {
        for k in 1..=10_000u64 {
            let m = harmonic_partial(k, a);
            let (lo, hi) = mk_bounds(k, a);
            checked += 1;
            if !(lo <= m + 1e-9 && m <= hi + 1e-9) {
                bad.push(format!("k={k} a={a}: {lo} <= {m} <= {hi}"));
            }
        }
    }
    Outcome::new(bad.is_empty(), format!("{checked} (k, a) pairs, {} violations {:?}", bad.len(), bad))
}

fn lemma2_coverage() -> Outcome {
    use rand_distr::{Binomial, Distribution};
    let (d, n, k, delta) = (200usize, 100_000u64, 10usize, 0.05);
    let p = ZipfModel::new(1.2, d as u64).unwrap().probabilities();
    let top: f64 = p[..k].iter().sum();
    let width = theory::concentration_delta(delta, k as u64, d as u64, n);
    let mut rng = StdRng::seed_from_u64(6);
    let trials = 10_000;
    let (mut covered, mut worst) = (0, 0.0f64);
    let mut counts = vec![0u64; d];
    for _ in 0..trials {
        // Multinomial draw as a chain of conditional binomials.
        let (mut left, mut mass) = (n, 1.0f64);
        for (c, &pi) in counts.iter_mut().zip(&p) {
            let q = (pi / mass).clamp(0.0, 1.0);
            *c = if left == 0 { 0 } else { Binomial::new(left, q).unwrap().sample(&mut rng) };
            left -= *c;
            mass -= pi;
        }
        counts[d - 1] += left;
        let mut sorted = counts.clone();
        sorted.sort_unstable_by(|x, y| y.cmp(x));
        let emp = sorted[..k].iter().sum::<u64>() as f64 / n as f64;
        let dev = (emp - top).abs();
        worst = worst.max(dev);
        covered += (dev <= width) as usize;
    }
    let frac = covered as f64 / trials as f64;
    Outcome::new(
        frac >= 1.0 - delta - 0.01,
        format!("coverage {frac:.4} over {trials} draws, width {width:.4}, largest deviation {worst:.4}"),
    )
}

fn lemma1() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let (mut checks, mut bad) = (0, Vec::new());
    for i in 0..120 {
        let m = rng.gen_range(1..=30);
        let alpha: u16 = rng.gen_range(2..=32);
        let records: Vec<Vec<u8>> = (0..m)
            .map(|_| {
                let len = rng.gen_range(0..=300);
                (0..len).map(|_| rng.gen_range(0..alpha) as u8).collect()
            })
            .collect();
        let c = Corpus::from_records(&records);
        let n = rng.gen_range(2..=4);
        for kp in [1, 5, 20] {
            let t = prefix_transfer(&c, n, kp).unwrap();
            let Some(bp) = t.beta_prime() else { continue };
            checks += 1;
            if t.prefixed + 1e-12 < bp {
                bad.push(format!("corpus {i} n={n} k'={kp}: {} < {bp}", t.prefixed));
            }
        }
    }
    Outcome::new(
        bad.is_empty() && checks >= 300,
        format!("{checks} (corpus, k') checks, {} violations {:?}", bad.len(), bad),
    )
}

fn jaccard_trend() -> Outcome {
    let (mut j1, mut j2) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let spec = SynthSpec {
            a: 1.2,
            distinct: 10_000,
            n: 5,
            sequences: 50,
            grams_per_seq: 400,
            seed: 100 + seed,
            alphabet: 256,
        };
        let s = generate_in_memory(&spec).unwrap();
        let truth = naive_count(&s.corpus, 5, CountMode::Once).unwrap().topk(100);
        for (z, out) in [(1.0, &mut j1), (2.0, &mut j2)] {
            let cfg = IntergramConfig {
                n: 5,
                k: 100,
                z,
                mode: CountMode::Once,
                flush_batch: 8,
            };
            let got = run_intergrams(&s.corpus, &cfg, &PassOptions::default().with_workers(2)).unwrap();
            out.push(jaccard(&got.top, &truth));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m2) = (mean(&j1), mean(&j2));
    Outcome::new(
        m2 >= m1 && m1 >= 0.7 && m2 >= 0.7,
        format!("mean Jaccard over 20 corpora: z=1 {m1:.4}, z=2 {m2:.4}"),
    )
}

fn scratch() -> tempfile::TempDir {
    match std::env::var_os("INTERGRAMS_SCRATCH") {
        Some(dir) => {
            std::fs::create_dir_all(&dir).unwrap();
            tempfile::tempdir_in(PathBuf::from(dir)).unwrap()
        }
        None => tempfile::tempdir().unwrap(),
    }
}

/// Bucket count for the throughput run; the default needs 16 GiB of counters.
const BENCH_BUCKETS: u64 = 1 << 28;

fn relative_throughput() -> Outcome {
    let dir = scratch();
    let spec = SynthSpec {
        a: 1.2,
        distinct: 100_000,
        n: 6,
        sequences: 1024,
        grams_per_seq: (1 << 20) / 6 + 1,
        seed: 9,
        alphabet: 256,
    };
    let gen_start = Instant::now();
    let s = generate_to_dir(&spec, dir.path()).unwrap();
    let gen_time = gen_start.elapsed();
    let bytes = s.corpus.size_bytes().unwrap();
    let opts = PassOptions::default().with_workers(8);

    let start = Instant::now();
    let cfg = IntergramConfig::default();
    let ig = run_intergrams(&s.corpus, &cfg, &opts).unwrap();
    let ig_time = start.elapsed();

    let start = Instant::now();
    let hcfg = HashgramConfig {
        buckets: BENCH_BUCKETS,
        ..HashgramConfig::default()
    };
    let hg = run_hashgram(&s.corpus, &hcfg, &opts).unwrap();
    let hg_time = start.elapsed();

    let ratio = hg_time.as_secs_f64() / ig_time.as_secs_f64();
    let sim = jaccard(&ig.top, &hg.top);
    Outcome::new(
        bytes >= 1 << 30 && ratio >= 3.0,
        format!(
            "{:.2} GiB on disk (generated in {:.1}s), 8 workers, B=2^28: intergrams {:.1}s, hashgram {:.1}s, \
             speedup {ratio:.2}x, Jaccard between them {sim:.4}",
            bytes as f64 / (1u64 << 30) as f64,
            gen_time.as_secs_f64(),
            ig_time.as_secs_f64(),
            hg_time.as_secs_f64()
        ),
    )
}

fn determinism() -> Outcome {
    let dir = scratch();
    let spec = SynthSpec {
        a: 1.1,
        distinct: 50_000,
        n: 6,
        sequences: 256,
        grams_per_seq: 40_000,
        seed: 10,
        alphabet: 256,
    };
    let s = generate_to_dir(&spec, dir.path()).unwrap();
    let mut bad = Vec::new();
    let mut runs = 0;
    let cfg = IntergramConfig {
        k: 2000,
        ..IntergramConfig::default()
    };
    let hcfg = HashgramConfig {
        buckets: 1 << 24,
        k: 2000,
        second_pass: SecondPass::Trie,
        ..HashgramConfig::default()
    };
    let mut reference: Option<(String, String)> = None;
    for workers in [1, 3, 8] {
        let opts = PassOptions::default().with_workers(workers);
        let ig = run_intergrams(&s.corpus, &cfg, &opts).unwrap().top.to_tsv();
        let hg = run_hashgram(&s.corpus, &hcfg, &opts).unwrap().top.to_tsv();
        runs += 2;
        match &reference {
            None => reference = Some((ig, hg)),
            Some((rig, rhg)) => {
                if &ig != rig {
                    bad.push(format!("intergrams workers={workers}"));
                }
                if &hg != rhg {
                    bad.push(format!("hashgram workers={workers}"));
                }
            }
        }
    }
    let lines = reference.map_or(0, |r| r.0.lines().count());
    Outcome::new(
        bad.is_empty() && lines == 2000,
        format!("{runs} runs over workers 1, 3, 8; {lines} result lines; differences {bad:?}"),
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "oracle exactness", oracle_exactness),
    (2, "hashgram correctness", hashgram_correctness),
    (3, "prefix recall shape", fig3_shape),
    (4, "recall bound validity", theorem1_bounds),
    (5, "partial-sum sandwich", sandwich),
    (6, "concentration coverage", lemma2_coverage),
    (7, "prefix mass transfer", lemma1),
    (8, "Jaccard vs z", jaccard_trend),
    (9, "relative throughput", relative_throughput),
    (10, "determinism", determinism),
];

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    let total = Instant::now();
    for (id, name, f) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        ran += 1;
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {name:<24} {verdict} [{secs:.1}s] {}", out.detail);
        if !out.pass {
            failed.push(id);
        }
    }
    println!(
        "acceptance: {}/{ran} passed{} in {:.1}s",
        ran - failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failing {failed:?}")
        },
        total.elapsed().as_secs_f64()
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
