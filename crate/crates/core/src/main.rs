//! `kav`: check bounded staleness of register traces, compute minimal k,
//! generate test traces, build reduction instances, and benchmark.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use kav::fzf::{candidate_orders, check_2atomic_fzf, chunk_set, is_viable, projection};
use kav::generators::{gen_witnessed, simulate_quorum, GenConfig, QuorumConfig};
use kav::history::{
    drop_anomalous_reads, normalize, parse_trace, partition_by_key, perturb_duplicate_timestamps,
    validate, write_trace, Anomaly, History, Trace, TraceRecord,
};
use kav::lbt::check_2atomic_lbt;
use kav::oracle::{brute_force_k_atomic_with, min_k, MinK, OracleOptions, DEFAULT_ORACLE_CAP};
use kav::report::{exit_code, Report, ReportEntry};
use kav::verdict::{Answer, Verdict, WitnessOrder};
use kav::weighted::{binpacking_to_kwav, BinPackingInstance};
use kav::zones::{check_1atomic, zone};

#[derive(Parser)]
#[command(name = "kav", version, about = "Bounded-staleness checker for register traces")]
struct Cli {
    /// Emit machine-readable JSON instead of human-readable lines.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for generator-backed commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Operation cap for the exhaustive oracle.
    #[arg(long, global = true, default_value_t = DEFAULT_ORACLE_CAP)]
    brute_cap: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide k-atomicity of every register in a trace.
    Check(CheckArgs),
    /// Compute the smallest k for which each register's history is k-atomic.
    #[command(name = "min-k")]
    MinK(MinKArgs),
    /// Generate test traces.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Build reduction instances.
    #[command(subcommand)]
    Reduce(ReduceCommand),
    /// Benchmark verifier scaling on generated traces; CSV on stdout.
    Bench(BenchArgs),
}

#[derive(Args)]
struct CheckArgs {
    trace: PathBuf,

    /// Staleness bound to verify.
    #[arg(long, default_value_t = 1)]
    k: u32,

    /// gk (k=1), lbt / fzf (k=2), or brute (any k, capped size).
    #[arg(long, value_enum)]
    algo: Option<Algo>,

    /// Write the YES witness here as a JSON array of slots and containers.
    /// With several keys in the trace, a key-to-witness object is written.
    #[arg(long)]
    emit_witness: Option<PathBuf>,

    /// Print the chunk decomposition and candidate orders tried (to stderr).
    #[arg(long)]
    explain: bool,

    /// Drop reads implicated in anomalies instead of refusing to verify.
    #[arg(long)]
    lenient: bool,

    /// Deterministically separate colliding timestamps before validation.
    #[arg(long)]
    perturb_timestamps: bool,
}

#[derive(Args)]
struct MinKArgs {
    trace: PathBuf,

    #[arg(long)]
    lenient: bool,

    #[arg(long)]
    perturb_timestamps: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Gk,
    Lbt,
    Fzf,
    Brute,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Gk => "gk",
            Algo::Lbt => "lbt",
            Algo::Fzf => "fzf",
            Algo::Brute => "brute",
        }
    }
}

#[derive(Subcommand)]
enum GenCommand {
    /// Construction-guaranteed k-atomic history.
    Witnessed(GenWitnessedArgs),
    /// Sloppy-quorum replicated-register simulation (no guarantee).
    Quorum(GenQuorumArgs),
}

#[derive(Args)]
struct GenWitnessedArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long)]
    ops: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    writes_fraction: f64,
    #[arg(long, default_value_t = 1500)]
    max_back: u64,
    #[arg(long, default_value_t = 1500)]
    max_forward: u64,
    #[arg(long, default_value = "r0")]
    key: String,
}

#[derive(Args)]
struct GenQuorumArgs {
    #[arg(long)]
    replicas: usize,
    #[arg(long)]
    write_quorum: usize,
    #[arg(long)]
    read_quorum: usize,
    #[arg(long)]
    ops: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    clients: usize,
    #[arg(long, default_value_t = 1)]
    latency_min: u64,
    #[arg(long, default_value_t = 20)]
    latency_max: u64,
    #[arg(long, default_value = "r0")]
    key: String,
}

#[derive(Subcommand)]
enum ReduceCommand {
    /// Encode a bin-packing instance as a weighted trace; prints the k to
    /// check it at.
    Binpack(ReduceBinpackArgs),
}

#[derive(Args)]
struct ReduceBinpackArgs {
    /// Comma-separated item sizes, e.g. 2,3.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<u64>,
    #[arg(long)]
    bins: u64,
    #[arg(long)]
    capacity: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Verifier(s) to time.
    #[arg(long, value_enum, default_value_t = BenchAlgo::Fzf)]
    algo: BenchAlgo,
    /// Smallest size as a power of two.
    #[arg(long, default_value_t = 10)]
    start_exp: u32,
    /// Largest size as a power of two (inclusive).
    #[arg(long, default_value_t = 17)]
    end_exp: u32,
    /// Staleness bound used by the witnessed generator.
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 0.5)]
    writes_fraction: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchAlgo {
    Fzf,
    Lbt,
    Both,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("kav: {err:#}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Check(ref args) => cmd_check(&cli, args),
        Command::MinK(ref args) => cmd_min_k(&cli, args),
        Command::Gen(ref gen) => cmd_gen(&cli, gen),
        Command::Reduce(ref red) => cmd_reduce(&cli, red),
        Command::Bench(ref args) => cmd_bench(&cli, args),
    }
}

/// Validation & normalization shared by `check` and `min-k`. On success the
/// normalized history is returned; on failure only the anomalies.
fn prepare(
    h: &History,
    lenient: bool,
    perturb: bool,
) -> (Option<History>, Vec<Anomaly>, Vec<String>) {
    let owned;
    let h = if perturb {
        owned = perturb_duplicate_timestamps(h);
        &owned
    } else {
        h
    };
    let anomalies = validate(h);
    if anomalies.is_empty() {
        return (Some(normalize(h)), anomalies, Vec::new());
    }
    if !lenient {
        return (None, anomalies, Vec::new());
    }
    let (rest, dropped) = drop_anomalous_reads(h, &anomalies);
    let dropped: Vec<String> = dropped.into_iter().map(|id| id.0).collect();
    let remaining = validate(&rest);
    if remaining.is_empty() {
        (Some(normalize(&rest)), anomalies, dropped)
    } else {
        (None, anomalies, dropped)
    }
}

fn dispatch(algo: Algo, h: &History, k: u32, cap: usize) -> Result<Verdict> {
    match algo {
        Algo::Gk => Ok(check_1atomic(h)),
        Algo::Lbt => Ok(check_2atomic_lbt(h)),
        Algo::Fzf => Ok(check_2atomic_fzf(h)),
        Algo::Brute => {
            let opts = OracleOptions { cap, tie_seed: None };
            brute_force_k_atomic_with(h, k, &opts)
                .with_context(|| format!("key {:?}", h.key()))
                .map_err(Into::into)
        }
    }
}

fn load_trace(path: &PathBuf) -> Result<Trace> {
    let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
    parse_trace(file).with_context(|| format!("parse {}", path.display()))
}

fn cmd_check(cli: &Cli, args: &CheckArgs) -> Result<i32> {
    if args.k == 0 {
        bail!("--k must be at least 1");
    }
    let algo = match args.algo {
        Some(a) => a,
        None => match args.k {
            1 => Algo::Gk,
            2 => Algo::Fzf,
            _ => Algo::Brute,
        },
    };
    match (algo, args.k) {
        (Algo::Gk, 1) | (Algo::Lbt, 2) | (Algo::Fzf, 2) | (Algo::Brute, _) => {}
        (a, k) => bail!("--algo {} cannot decide k = {k}", a.name()),
    }

    let trace = load_trace(&args.trace)?;
    let histories = partition_by_key(&trace);

    let mut results: Vec<(ReportEntry, Option<WitnessOrder>)> = histories
        .par_iter()
        .map(|(key, h)| {
            let mut entry = ReportEntry::new(key.clone());
            entry.k_checked = Some(args.k);
            entry.algorithm = Some(algo.name().to_string());
            let begin = Instant::now();
            let (prepared, anomalies, dropped) =
                prepare(h, args.lenient, args.perturb_timestamps);
            entry.anomalies = anomalies;
            entry.dropped_reads = dropped;
            let mut witness = None;
            if let Some(normalized) = prepared {
                match dispatch(algo, &normalized, args.k, cli.brute_cap) {
                    Ok(v) => {
                        entry.verdict = Some(v.answer);
                        entry.certificate = v.certificate.clone();
                        entry.stats = Some(v.stats);
                        witness = v.witness;
                    }
                    Err(err) => {
                        entry.algorithm = Some(format!("{} (failed: {err:#})", algo.name()));
                    }
                }
            }
            entry.elapsed_ms = begin.elapsed().as_secs_f64() * 1e3;
            (entry, witness)
        })
        .collect();
    results.sort_by(|a, b| a.0.key.cmp(&b.0.key));

    if args.explain {
        for (key, h) in &histories {
            if let (Some(normalized), _, _) = prepare(h, args.lenient, args.perturb_timestamps) {
                explain_chunks(key, &normalized);
            }
        }
    }

    if let Some(path) = &args.emit_witness {
        let payload = if results.len() == 1 {
            match &results[0].1 {
                Some(w) => serde_json::to_string_pretty(w)?,
                None => serde_json::to_string_pretty(&WitnessOrder::default())?,
            }
        } else {
            let map: BTreeMap<&str, &WitnessOrder> = results
                .iter()
                .filter_map(|(e, w)| w.as_ref().map(|w| (e.key.as_str(), w)))
                .collect();
            serde_json::to_string_pretty(&map)?
        };
        std::fs::write(path, payload).with_context(|| format!("write {}", path.display()))?;
        for (entry, w) in results.iter_mut() {
            if w.is_some() {
                entry.witness_path = Some(path.display().to_string());
            }
        }
    }

    let report = Report {
        command: "check".to_string(),
        strict: !args.lenient,
        entries: results.into_iter().map(|(e, _)| e).collect(),
    };
    emit_report(cli, &report)?;
    Ok(exit_code(&report))
}

fn cmd_min_k(cli: &Cli, args: &MinKArgs) -> Result<i32> {
    let trace = load_trace(&args.trace)?;
    let histories = partition_by_key(&trace);
    let mut entries: Vec<ReportEntry> = histories
        .par_iter()
        .map(|(key, h)| {
            let mut entry = ReportEntry::new(key.clone());
            let begin = Instant::now();
            let (prepared, anomalies, dropped) =
                prepare(h, args.lenient, args.perturb_timestamps);
            entry.anomalies = anomalies;
            entry.dropped_reads = dropped;
            if let Some(normalized) = prepared {
                match min_k(&normalized, cli.brute_cap) {
                    MinK::Exact(k) => entry.min_k = Some(k),
                    MinK::Unknown { lower_bound } => entry.min_k_lower_bound = Some(lower_bound),
                }
            }
            entry.elapsed_ms = begin.elapsed().as_secs_f64() * 1e3;
            entry
        })
        .collect();
    entries.sort_by(|a, b| a.key.cmp(&b.key));

    let report = Report { command: "min-k".to_string(), strict: !args.lenient, entries };
    emit_report(cli, &report)?;
    // min-k is informational: only anomalies affect the exit status.
    let code = if report.strict && report.entries.iter().any(|e| !e.anomalies.is_empty()) {
        3
    } else {
        0
    };
    Ok(code)
}

fn explain_chunks(key: &str, h: &History) {
    let cs = chunk_set(h);
    eprintln!(
        "key {key}: {} chunk(s), {} dangling cluster(s)",
        cs.chunks.len(),
        cs.dangling.len()
    );
    for (i, chunk) in cs.chunks.iter().enumerate() {
        eprintln!(
            "  chunk {i}: interval [{}, {}], forward {:?}, backward {:?}",
            chunk.interval.0,
            chunk.interval.1,
            chunk.forward_writes.iter().map(|w| w.as_str()).collect::<Vec<_>>(),
            chunk.backward_writes.iter().map(|w| w.as_str()).collect::<Vec<_>>(),
        );
        let sub = projection(h, chunk);
        for t in candidate_orders(chunk) {
            let viable = is_viable(&t, &sub);
            eprintln!(
                "    order {:?}: {}",
                t.writes.iter().map(|w| w.as_str()).collect::<Vec<_>>(),
                if viable { "viable" } else { "not viable" }
            );
        }
    }
    for d in &cs.dangling {
        let z = zone(d);
        eprintln!("  dangling {} zone [{}, {}]", d.write.value, z.low, z.high);
    }
}

fn cmd_gen(cli: &Cli, gen: &GenCommand) -> Result<i32> {
    match gen {
        GenCommand::Witnessed(args) => {
            if !(0.0..=1.0).contains(&args.writes_fraction) {
                bail!("--writes-fraction must be within [0, 1]");
            }
            if args.k < 1 {
                bail!("--k must be at least 1");
            }
            let cfg = GenConfig {
                seed: cli.seed,
                ops: args.ops,
                writes_fraction: args.writes_fraction,
                staleness_k: args.k,
                max_back: args.max_back,
                max_forward: args.max_forward,
                key: args.key.clone(),
            };
            let h = gen_witnessed(&cfg);
            let trace = Trace {
                records: h
                    .ops()
                    .iter()
                    .map(|op| TraceRecord { key: args.key.clone(), op: op.clone(), weight: None })
                    .collect(),
            };
            write_trace_file(&trace, &args.out)?;
            eprintln!("wrote {} records to {}", trace.records.len(), args.out.display());
        }
        GenCommand::Quorum(args) => {
            if args.latency_min < 1 || args.latency_min > args.latency_max {
                bail!("bad latency range");
            }
            if args.replicas == 0
                || !(1..=args.replicas).contains(&args.write_quorum)
                || !(1..=args.replicas).contains(&args.read_quorum)
            {
                bail!("quorums must be between 1 and the replica count");
            }
            let cfg = QuorumConfig {
                seed: cli.seed,
                replicas: args.replicas,
                write_quorum: args.write_quorum,
                read_quorum: args.read_quorum,
                clients: args.clients,
                ops: args.ops,
                latency: (args.latency_min, args.latency_max),
                key: args.key.clone(),
            };
            let trace = simulate_quorum(&cfg);
            write_trace_file(&trace, &args.out)?;
            eprintln!("wrote {} records to {}", trace.records.len(), args.out.display());
        }
    }
    Ok(0)
}

fn cmd_reduce(cli: &Cli, red: &ReduceCommand) -> Result<i32> {
    match red {
        ReduceCommand::Binpack(args) => {
            if args.sizes.iter().any(|&s| s == 0) || args.bins == 0 || args.capacity == 0 {
                bail!("sizes, bins and capacity must be positive");
            }
            let inst = BinPackingInstance::new(args.sizes.clone(), args.bins, args.capacity);
            let (wh, k) = binpacking_to_kwav(&inst);
            let trace = wh.to_trace();
            write_trace_file(&trace, &args.out)?;
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "k": k,
                        "ops": wh.base.len(),
                        "out": args.out.display().to_string(),
                    })
                );
            } else {
                println!("k = {k}");
            }
        }
    }
    Ok(0)
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<i32> {
    if args.start_exp > args.end_exp || args.end_exp > 24 {
        bail!("bad exponent range");
    }
    let algos: &[Algo] = match args.algo {
        BenchAlgo::Fzf => &[Algo::Fzf],
        BenchAlgo::Lbt => &[Algo::Lbt],
        BenchAlgo::Both => &[Algo::Fzf, Algo::Lbt],
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for exp in args.start_exp..=args.end_exp {
        let n = 1usize << exp;
        let cfg = GenConfig {
            seed: cli.seed,
            ops: n,
            writes_fraction: args.writes_fraction,
            staleness_k: args.k,
            ..GenConfig::default()
        };
        let h = normalize(&gen_witnessed(&cfg));
        for &algo in algos {
            let begin = Instant::now();
            let v = dispatch(algo, &h, 2, cli.brute_cap)?;
            let elapsed = begin.elapsed().as_secs_f64() * 1e3;
            writeln!(out, "{n},{},{elapsed:.3},{}", algo.name(), v.stats.steps)?;
        }
    }
    Ok(0)
}

fn write_trace_file(trace: &Trace, path: &PathBuf) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    write_trace(trace, &mut file)?;
    Ok(())
}

fn emit_report(cli: &Cli, report: &Report) -> Result<()> {
    if cli.json {
        println!("{}", serde_json::to_string_pretty(report)?);
        return Ok(());
    }
    for e in &report.entries {
        let verdict = match (e.verdict, e.min_k, e.min_k_lower_bound) {
            (Some(Answer::Yes), _, _) => "YES".to_string(),
            (Some(Answer::No), _, _) => "NO".to_string(),
            (None, Some(k), _) => format!("min-k={k}"),
            (None, None, Some(lb)) => format!("min-k unknown (>= {lb})"),
            (None, None, None) => "blocked by anomalies".to_string(),
        };
        let mut line = format!("key={} {verdict}", e.key);
        if let Some(k) = e.k_checked {
            line.push_str(&format!(" k={k}"));
        }
        if let Some(algo) = &e.algorithm {
            line.push_str(&format!(" algo={algo}"));
        }
        if let Some(stats) = &e.stats {
            line.push_str(&format!(" steps={}", stats.steps));
        }
        line.push_str(&format!(" elapsed={:.3}ms", e.elapsed_ms));
        if !e.anomalies.is_empty() {
            line.push_str(&format!(" anomalies={}", e.anomalies.len()));
        }
        if !e.dropped_reads.is_empty() {
            line.push_str(&format!(" dropped_reads={}", e.dropped_reads.len()));
        }
        println!("{line}");
        for a in &e.anomalies {
            println!(
                "  anomaly {:?}: {}",
                a.kind,
                a.op_ids.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(", ")
            );
        }
    }
    Ok(())
}
