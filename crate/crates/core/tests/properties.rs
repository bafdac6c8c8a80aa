use std::collections::HashSet;

use intergrams::hashgram::hash_ngram;
use intergrams::oracle::naive_count;
use intergrams::{
    run_hashgram, run_intergrams, Corpus, CountMode, HashgramConfig, IntergramConfig, PassOptions, SecondPass,
};
use proptest::prelude::*;

fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (1u16..=256).prop_flat_map(|alpha| {
        prop::collection::vec(
            prop::collection::vec(any::<u8>().prop_map(move |b| (b as u16 % alpha) as u8), 0..400),
            1..20,
        )
    })
}

fn mode_strategy() -> impl Strategy<Value = CountMode> {
    prop_oneof![Just(CountMode::Once), Just(CountMode::All)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_under_full_retention(
        records in corpus_strategy(),
        n in 1usize..=7,
        k in 1usize..40,
        mode in mode_strategy(),
        workers in 1usize..4,
    ) {
        let c = Corpus::from_records(&records);
        let cfg = IntergramConfig { n, k, z: 10_000.0, mode, flush_batch: 3 };
        let out = run_intergrams(&c, &cfg, &PassOptions::default().with_workers(workers)).unwrap();
        let oracle = naive_count(&c, n, mode).unwrap().topk(k);
        prop_assert_eq!(out.top.to_tsv(), oracle.to_tsv());
    }

    #[test]
    fn counts_are_exact_and_prefixes_consistent(
        records in corpus_strategy(),
        n in 4usize..=6,
        k in 1usize..20,
        z in 1.0f64..3.0,
        mode in mode_strategy(),
    ) {
        let c = Corpus::from_records(&records);
        let cfg = IntergramConfig { n, k, z, mode, flush_batch: 8 };
        let out = run_intergrams(&c, &cfg, &PassOptions::default().with_workers(2)).unwrap();
        let oracle = naive_count(&c, n, mode).unwrap();
        let m = records.iter().filter(|r| r.len() >= n).count() as u64;
        let true_top = oracle.topk(k);
        let prefixes: HashSet<Vec<u8>> = out
            .final_prefixes
            .as_ref()
            .map(|p| p.grams().map(|g| g.to_vec()).collect())
            .unwrap_or_default();
        for e in out.top.entries() {
            // Every reported count is the true count of that gram.
            prop_assert_eq!(e.count, oracle.get(&e.gram));
            prop_assert!(prefixes.contains(&e.gram[..n - 1]));
            if mode == CountMode::Once {
                prop_assert!(e.count <= m);
            }
        }
        prop_assert!(out.top.len() <= true_top.len());
        // The i-th reported count never beats the i-th true count.
        for (a, b) in out.top.entries().iter().zip(true_top.entries()) {
            prop_assert!(a.count <= b.count);
        }
        for p in &out.passes {
            prop_assert!(p.retained <= cfg.k_prime());
        }
    }

    #[test]
    fn hashgram_exact_without_collisions(
        records in corpus_strategy(),
        n in 3usize..=6,
        k in 1usize..40,
        mode in mode_strategy(),
        trie in any::<bool>(),
    ) {
        let c = Corpus::from_records(&records);
        let cfg = HashgramConfig {
            buckets: 1 << 24,
            n,
            k,
            mode,
            seed: 5,
            second_pass: if trie { SecondPass::Trie } else { SecondPass::Map },
        };
        let oracle = naive_count(&c, n, mode).unwrap();
        let buckets: HashSet<u64> = oracle.iter().map(|(g, _)| hash_ngram(g, &cfg)).collect();
        prop_assume!(buckets.len() == oracle.len());
        let out = run_hashgram(&c, &cfg, &PassOptions::default().with_workers(2)).unwrap();
        prop_assert_eq!(out.top.to_tsv(), oracle.topk(k).to_tsv());
    }

    #[test]
    fn hashgram_counts_exact_under_collisions(
        records in corpus_strategy(),
        n in 3usize..=5,
        k in 1usize..20,
        buckets in 1u64..=64,
        mode in mode_strategy(),
    ) {
        let c = Corpus::from_records(&records);
        let cfg = HashgramConfig { buckets, n, k, mode, seed: 1, second_pass: SecondPass::Map };
        let oracle = naive_count(&c, n, mode).unwrap();
        let out = run_hashgram(&c, &cfg, &PassOptions::default().with_workers(2)).unwrap();
        for e in out.top.entries() {
            prop_assert_eq!(e.count, oracle.get(&e.gram));
        }
    }

    #[test]
    fn workers_do_not_change_output(records in corpus_strategy(), n in 3usize..=6, z in 1.0f64..2.0) {
        let c = Corpus::from_records(&records);
        let cfg = IntergramConfig { n, k: 10, z, mode: CountMode::Once, flush_batch: 2 };
        let a = run_intergrams(&c, &cfg, &PassOptions::default().with_workers(1)).unwrap();
        let b = run_intergrams(&c, &cfg, &PassOptions::default().with_workers(3)).unwrap();
        prop_assert_eq!(a.top, b.top);
    }
}

#[test]
fn on_disk_matches_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<Vec<u8>> = (0..25u32).map(|i| (0..500).map(|j| ((i ^ j) % 13) as u8).collect()).collect();
    for (i, r) in records.iter().enumerate() {
        std::fs::write(dir.path().join(format!("{i:04}.bin")), r).unwrap();
    }
    let disk = Corpus::open(&intergrams::CorpusSpec::from_paths([dir.path()])).unwrap();
    let mem = Corpus::from_records(&records);
    let cfg = IntergramConfig { n: 5, k: 30, ..IntergramConfig::default() };
    let opts = PassOptions::default().with_workers(2);
    assert_eq!(
        run_intergrams(&disk, &cfg, &opts).unwrap().top,
        run_intergrams(&mem, &cfg, &opts).unwrap().top
    );
}
