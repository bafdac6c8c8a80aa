//! `intergrams` command-line front end.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use intergrams::counting::default_workers;
use intergrams::metrics::{check_same_length, RunReport};
use intergrams::synth::{generate_to_dir, SynthSpec};
use intergrams::theory::{self, BoundInputs};
use intergrams::{
    featurize, jaccard, naive_count, run_hashgram, run_intergrams, Corpus, CorpusSpec, CountMode, Error,
    HashgramConfig, IntergramConfig, PassOptions, RecordMode, SecondPass, TopKList,
};
use serde_json::json;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "intergrams", version, about = "Top-k n-gram counting over byte sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count the top-k n-grams and write them as TSV.
    Count(CountArgs),
    /// Count like `count` and print a per-pass timing report.
    Bench(BenchArgs),
    /// Evaluate the Zipf recall bounds.
    Theory(TheoryArgs),
    /// Generate a synthetic Zipf corpus on disk.
    Synth(SynthArgs),
    /// Jaccard similarity of two result TSV files.
    Compare(CompareArgs),
    /// Boolean feature matrix of a vocabulary over a corpus.
    Featurize(FeaturizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Intergrams,
    Hashgram,
    Naive,
}

impl Algorithm {
    fn name(self) -> &'static str {
        match self {
            Algorithm::Intergrams => "intergrams",
            Algorithm::Hashgram => "hashgram",
            Algorithm::Naive => "naive",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Once,
    All,
}

impl From<Mode> for CountMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Once => CountMode::Once,
            Mode::All => CountMode::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Records {
    File,
    Lines,
    Chunks,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pass2 {
    Map,
    Trie,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Args)]
struct InputArgs {
    /// Input files or directories (directories are walked recursively).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// How files are split into sequences.
    #[arg(long, value_enum, default_value = "file")]
    record_mode: Records,
    /// Record size for `--record-mode chunks`.
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Worker threads.
    #[arg(long, env = "INTERGRAMS_WORKERS")]
    workers: Option<usize>,
}

impl InputArgs {
    fn record_mode(&self) -> anyhow::Result<RecordMode> {
        Ok(match (self.record_mode, self.chunk_size) {
            (Records::File, None) => RecordMode::WholeFile,
            (Records::Lines, None) => RecordMode::Lines,
            (Records::Chunks, Some(c)) if c > 0 => RecordMode::Chunks(c),
            (Records::Chunks, _) => return Err(Error::config("--record-mode chunks needs --chunk-size >= 1").into()),
            (_, Some(_)) => return Err(Error::config("--chunk-size only applies to --record-mode chunks").into()),
        })
    }

    fn workers(&self) -> anyhow::Result<usize> {
        match self.workers {
            Some(0) => Err(Error::config("--workers must be at least 1").into()),
            Some(w) => Ok(w),
            None => Ok(default_workers()),
        }
    }

    fn open(&self) -> anyhow::Result<Corpus> {
        let spec = CorpusSpec::from_paths(&self.inputs).with_record_mode(self.record_mode()?);
        Ok(Corpus::open(&spec)?)
    }
}

#[derive(Args)]
struct CountArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "intergrams")]
    algorithm: Algorithm,
    /// Gram length.
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Number of grams to report.
    #[arg(long, default_value_t = 10_000)]
    k: usize,
    /// Oversampling factor for intermediate passes.
    #[arg(long, default_value_t = 1.5)]
    z: f64,
    #[arg(long, value_enum, default_value = "once")]
    mode: Mode,
    /// Hash bucket count for `--algorithm hashgram`.
    #[arg(long, default_value_t = HashgramConfig::default().buckets)]
    buckets: u64,
    /// Hash seed for `--algorithm hashgram`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "map")]
    second_pass: Pass2,
    /// Sequences per bitset batch before a flush.
    #[arg(long, default_value_t = 8)]
    flush_batch: usize,
    /// Result TSV path; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    count: CountArgs,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    /// Result TSV to compare against; adds a Jaccard line to the report.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Zipf exponent.
    #[arg(long)]
    a: f64,
    /// Number of distinct (n+1)-grams.
    #[arg(long)]
    dnext: u64,
    /// Retained mass used directly in the bounds.
    #[arg(long, conflicts_with_all = ["beta", "m", "ntotal"])]
    beta_eff: Option<f64>,
    /// Measured mass of the retained n-grams; needs --m and --ntotal.
    #[arg(long, requires_all = ["m", "ntotal"])]
    beta: Option<f64>,
    /// Sequence count.
    #[arg(long)]
    m: Option<u64>,
    /// Total n-grams observed.
    #[arg(long)]
    ntotal: Option<u64>,
    /// Failure probability for the sampling-noise correction.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of distinct n-grams, for the sampling-noise correction.
    #[arg(long)]
    d: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    k: u64,
    /// Retained prefixes, echoed in the table.
    #[arg(long)]
    k_prime: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1.2)]
    a: f64,
    /// Distinct grams with nonzero probability.
    #[arg(long, default_value_t = 10_000)]
    distinct: u64,
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    sequences: u64,
    #[arg(long, default_value_t = 1000)]
    grams_per_seq: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    alphabet: u16,
    /// Output directory; defaults to `synth-<seed>` under the scratch directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "INTERGRAMS_SCRATCH")]
    scratch: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Vocabulary as a result TSV; column order follows its lines.
    #[arg(long)]
    vocab: PathBuf,
    /// Coordinate-list output; the vocabulary is copied to `<output>.vocab.tsv`.
    #[arg(long, short)]
    output: PathBuf,
}

fn count(args: &CountArgs) -> anyhow::Result<(TopKList, RunReport)> {
    let mode: CountMode = args.mode.into();
    let workers = args.input.workers()?;
    if args.flush_batch == 0 {
        return Err(Error::config("--flush-batch must be at least 1").into());
    }
    let opts = PassOptions {
        workers,
        flush_batch: args.flush_batch,
        ..PassOptions::default()
    };
    let icfg = IntergramConfig {
        n: args.n,
        k: args.k,
        z: args.z,
        mode,
        flush_batch: args.flush_batch,
    };
    let hcfg = HashgramConfig {
        buckets: args.buckets,
        n: args.n,
        k: args.k,
        mode,
        seed: args.seed,
        second_pass: match args.second_pass {
            Pass2::Map => SecondPass::Map,
            Pass2::Trie => SecondPass::Trie,
        },
    };
    let echo = match args.algorithm {
        Algorithm::Intergrams => {
            icfg.validate()?;
            serde_json::to_value(icfg)?
        }
        Algorithm::Hashgram => {
            hcfg.validate()?;
            serde_json::to_value(hcfg)?
        }
        Algorithm::Naive => {
            if args.n == 0 || args.k == 0 {
                return Err(Error::config("n and k must be at least 1").into());
            }
            json!({"n": args.n, "k": args.k, "mode": mode})
        }
    };
    args.input.record_mode()?;
    let corpus = args.input.open()?;
    let mut report = RunReport::new(args.algorithm.name(), echo);
    report.config["workers"] = json!(workers);
    let start = Instant::now();
    let top = match args.algorithm {
        Algorithm::Intergrams => {
            let out = run_intergrams(&corpus, &icfg, &opts)?;
            report.push_intergrams(&out.passes);
            out.top
        }
        Algorithm::Hashgram => {
            let out = run_hashgram(&corpus, &hcfg, &opts)?;
            report.push_hashgram(&out);
            out.top
        }
        Algorithm::Naive => {
            let counts = naive_count(&corpus, args.n, mode)?;
            let elapsed = start.elapsed();
            report.push_row("naive count", corpus.size_bytes()?, elapsed);
            counts.topk(args.k)
        }
    };
    report.total_secs = start.elapsed().as_secs_f64();
    Ok((top, report))
}

fn write_tsv(top: &TopKList, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(p) => {
            let f = File::create(p).map_err(|e| Error::io(p, e))?;
            top.write_tsv(BufWriter::new(f)).map_err(|e| Error::io(p, e))?;
        }
        None => {
            let stdout = io::stdout();
            top.write_tsv(stdout.lock()).context("writing results to stdout")?;
        }
    }
    Ok(())
}

fn read_tsv(path: &Path) -> anyhow::Result<TopKList> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(TopKList::read_tsv(BufReader::new(f))?)
}

fn run_count(args: &CountArgs) -> anyhow::Result<()> {
    let (top, _) = count(args)?;
    write_tsv(&top, args.output.as_deref())
}

fn run_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let reference = args.reference.as_deref().map(read_tsv).transpose()?;
    let (top, mut report) = count(&args.count)?;
    if let Some(r) = &reference {
        check_same_length(&top, r)?;
        report.jaccard = Some(jaccard(&top, r));
    }
    if args.count.output.is_some() {
        write_tsv(&top, args.count.output.as_deref())?;
    }
    let text = match args.format {
        Format::Tsv => report.to_tsv(),
        Format::Json => report.to_json() + "\n",
    };
    match &args.report {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_theory(args: &TheoryArgs) -> anyhow::Result<()> {
    let mut rows: Vec<(String, String)> = vec![
        ("a".into(), args.a.to_string()),
        ("d_next".into(), args.dnext.to_string()),
        ("k".into(), args.k.to_string()),
    ];
    if let Some(kp) = args.k_prime {
        rows.push(("k_prime".into(), kp.to_string()));
    }
    let beta_eff = match (args.beta_eff, args.beta) {
        (Some(b), None) => b,
        (None, Some(beta)) => {
            let (m, ntotal) = (args.m.unwrap(), args.ntotal.unwrap());
            match (args.delta, args.d) {
                (Some(delta), Some(d)) => {
                    let inputs = BoundInputs {
                        k: args.k,
                        k_prime: args.k_prime.unwrap_or(args.k),
                        beta,
                        m,
                        n_total: ntotal,
                        delta,
                        d,
                    };
                    let nb = theory::noisy_bounds(&inputs, args.a, args.dnext)?;
                    rows.push(("beta_prime".into(), format!("{:.6}", nb.beta_prime)));
                    rows.push(("delta_width".into(), format!("{:.6}", nb.delta_width)));
                    rows.push(("beta_double_prime".into(), format!("{:.6}", nb.beta_double_prime)));
                    nb.beta_eff
                }
                (None, None) => theory::beta_prime(beta, m, ntotal)?.clamp(0.0, 1.0),
                _ => return Err(Error::config("--delta and --d must be given together").into()),
            }
        }
        _ => return Err(Error::config("give either --beta-eff or --beta with --m and --ntotal").into()),
    };
    rows.push(("beta_eff".into(), format!("{beta_eff:.6}")));
    let u = theory::u_bound(args.dnext, args.a, beta_eff)?;
    let r = theory::recall_bound(args.k, args.dnext, args.a, beta_eff)?;
    rows.push(("u_bound".into(), format!("{u:.6}")));
    rows.push(("recall_bound_raw".into(), format!("{:.6}", r.raw)));
    rows.push(("recall_bound".into(), format!("{:.6}", r.value)));
    rows.push(("vacuous".into(), r.vacuous.to_string()));
    let mut out = io::stdout().lock();
    for (k, v) in rows {
        writeln!(out, "{k}\t{v}")?;
    }
    Ok(())
}

fn run_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        a: args.a,
        distinct: args.distinct,
        n: args.n,
        sequences: args.sequences,
        grams_per_seq: args.grams_per_seq,
        seed: args.seed,
        alphabet: args.alphabet,
    };
    spec.validate()?;
    let dir = match (&args.out, &args.scratch) {
        (Some(o), _) => o.clone(),
        (None, Some(s)) => s.join(format!("synth-{}", args.seed)),
        (None, None) => return Err(Error::config("give --out or set INTERGRAMS_SCRATCH").into()),
    };
    let s = generate_to_dir(&spec, &dir)?;
    println!("{}\t{} sequences\t{} bytes", dir.display(), spec.sequences, s.corpus.size_bytes()?);
    Ok(())
}

fn run_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let a = read_tsv(&args.a)?;
    let b = read_tsv(&args.b)?;
    check_same_length(&a, &b)?;
    println!("{:.6}", jaccard(&a, &b));
    Ok(())
}

fn run_featurize(args: &FeaturizeArgs) -> anyhow::Result<()> {
    let workers = args.input.workers()?;
    args.input.record_mode()?;
    let vocab = read_tsv(&args.vocab)?;
    let corpus = args.input.open()?;
    let m = featurize(&corpus, &vocab, &PassOptions::default().with_workers(workers))?;
    let out = &args.output;
    let f = File::create(out).map_err(|e| Error::io(out, e))?;
    m.write_coo(BufWriter::new(f)).map_err(|e| Error::io(out, e))?;
    let mut side = out.clone().into_os_string();
    side.push(".vocab.tsv");
    let side = PathBuf::from(side);
    let f = File::create(&side).map_err(|e| Error::io(&side, e))?;
    vocab.write_tsv(BufWriter::new(f)).map_err(|e| Error::io(&side, e))?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io { .. } => EXIT_IO,
                Error::Config(_) | Error::Domain(_) | Error::Unsupported(_) => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return EXIT_IO;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_INTERNAL;
        }
    }
    EXIT_INTERNAL
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = std::panic::catch_unwind(|| match &cli.command {
        Command::Count(a) => run_count(a),
        Command::Bench(a) => run_bench(a),
        Command::Theory(a) => run_theory(a),
        Command::Synth(a) => run_synth(a),
        Command::Compare(a) => run_compare(a),
        Command::Featurize(a) => run_featurize(a),
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
