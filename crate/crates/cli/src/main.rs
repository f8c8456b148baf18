//! Build, verify, and query sparse suffix structures from the shell.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsa_core::audit;
use sparsa_core::builder::{build_sst, BuildConfig, CoarseRoundSource, LceMode, SparseSuffixTree};
use sparsa_core::fingerprint::new_context;
use sparsa_core::lce::{baseline_query, build_baseline, build_dc_lce, dc_query};
use sparsa_core::text::{brute_sparse_sort, PositionSet, Text};
use sparsa_core::verifier::{
    build_las_vegas, naive_check_all, verify_array, verify_system, Equation, LvConfig, LvOutcome,
    Verdict, VerifyMode, Witness,
};
use sparsa_core::Pos;

#[global_allocator]
static ALLOC: audit::CountingAlloc = audit::CountingAlloc;

/// What went wrong, mapped onto the process exit code: 1 I/O, 2 bad
/// configuration or malformed input, 3 rejection / Las Vegas bottom.
enum Failure {
    Io(String),
    Config(String),
    Reject(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Reject(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Reject(m) => m,
        }
    }
}

impl From<sparsa_core::Error> for Failure {
    fn from(e: sparsa_core::Error) -> Failure {
        Failure::Config(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "sparsa", version, about = "Sparse suffix arrays with certified verification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the sparse suffix array of the chosen suffixes.
    Build(BuildArgs),
    /// Check a claimed array (or equation system) against the text.
    Verify(VerifyArgs),
    /// Answer `i j` longest-common-extension queries from standard input.
    Lce(LceArgs),
    /// Emit brute-force ground truth in the build output formats.
    Oracle(OracleArgs),
    /// Time construction and verification over a grid of text sizes.
    Bench(BenchArgs),
}

/// Exactly one way of choosing which suffixes take part.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// File of 1-based suffix positions, whitespace separated.
    #[arg(long)]
    positions: Option<PathBuf>,
    /// Arithmetic positions 1, k+1, 2k+1, … for stride k.
    #[arg(long, value_name = "K")]
    stride: Option<u32>,
    /// B positions sampled without replacement, driven by --seed.
    #[arg(long, value_name = "B")]
    random_b: Option<u32>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BuildModeFlag {
    /// Monte Carlo: fast, correct up to fingerprint collisions.
    Mc,
    /// Las Vegas: rebuild until deterministic verification accepts.
    Lv,
}

#[derive(Clone, Copy, ValueEnum)]
enum LceFlag {
    /// Difference-cover index.
    Dc,
    /// Anchored fingerprint search only.
    Baseline,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatFlag {
    Tsv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyFlag {
    /// Shortage-doubling reduction.
    Fast,
    /// Plain three-way splitting reduction.
    Slow,
}

#[derive(Args)]
struct BuildArgs {
    /// Text file, mapped whole as raw bytes.
    #[arg(long)]
    text: PathBuf,
    #[command(flatten)]
    source: SourceArgs,
    /// Fingerprint seed; all randomness derives from it.
    #[arg(long, default_value_t = sparsa_core::fingerprint::DEFAULT_SEED)]
    seed: u64,
    /// Collision-probability exponent c (failure odds n^-c), c ≥ 1.
    #[arg(long, default_value_t = 1)]
    security: u32,
    #[arg(long, value_enum, default_value_t = BuildModeFlag::Mc)]
    mode: BuildModeFlag,
    #[arg(long, value_enum, default_value_t = LceFlag::Dc)]
    lce: LceFlag,
    #[arg(long, value_enum, default_value_t = FormatFlag::Tsv)]
    format: FormatFlag,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra Las Vegas attempts after the first.
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Measure stage timings and peak auxiliary words.
    #[arg(long)]
    instrument: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    text: PathBuf,
    /// Array file in the build TSV format.
    array: Option<PathBuf>,
    /// Equation system file instead: lines `p q p' q'`.
    #[arg(long, conflicts_with = "array")]
    equations: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VerifyFlag::Fast)]
    mode: VerifyFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LceArgs {
    #[arg(long)]
    text: PathBuf,
    #[arg(long, value_enum, default_value_t = LceFlag::Dc)]
    lce: LceFlag,
    #[arg(long, default_value_t = sparsa_core::fingerprint::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    security: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    text: PathBuf,
    #[command(flatten)]
    source: SourceArgs,
    /// Seed for the --random-b position sample.
    #[arg(long, default_value_t = sparsa_core::fingerprint::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatFlag::Tsv)]
    format: FormatFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Optional real text; each grid size takes a prefix. Synthetic random
    /// bytes when absent.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Comma-separated text sizes.
    #[arg(long, default_value = "65536,131072")]
    grid_n: String,
    /// Suffix count per run.
    #[arg(long, value_name = "B", default_value_t = 1024)]
    random_b: u32,
    #[arg(long, default_value_t = sparsa_core::fingerprint::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    security: u32,
    #[arg(long, value_enum, default_value_t = BuildModeFlag::Mc)]
    mode: BuildModeFlag,
    #[arg(long, value_enum, default_value_t = LceFlag::Dc)]
    lce: LceFlag,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Build(a) => cmd_build(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Lce(a) => cmd_lce(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

// ------------------------------------------------------------ plumbing ---

fn read_text(path: &Path) -> CliResult<Text> {
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(Text::from_bytes(bytes)?)
}

fn load_positions(src: &SourceArgs, n: usize, seed: u64) -> CliResult<Vec<Pos>> {
    if let Some(path) = &src.positions {
        let body =
            fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        return body
            .split_whitespace()
            .map(|w| {
                w.parse::<Pos>()
                    .map_err(|_| Failure::Config(format!("bad position {w:?} in {}", path.display())))
            })
            .collect();
    }
    if let Some(k) = src.stride {
        if k == 0 {
            return Err(Failure::Config("--stride must be at least 1".into()));
        }
        return Ok((1..=n as Pos).step_by(k as usize).collect());
    }
    let b = src.random_b.expect("clap enforces one source") as usize;
    if b == 0 || b > n {
        return Err(Failure::Config(format!("--random-b {b} outside 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<Pos> = (1..=n as Pos).collect();
    all.shuffle(&mut rng);
    all.truncate(b);
    Ok(all)
}

fn write_out(out: &Option<PathBuf>, body: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, body)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

struct Report<'a> {
    n: usize,
    seed: u64,
    prime: u128,
    mode: &'a str,
    positions: &'a [Pos],
    lcps: &'a [u32],
    security: Option<u32>,
    timings: Option<&'a sparsa_core::builder::BuildTimings>,
    peak_aux_words: Option<u64>,
    attempts: Option<u32>,
}

fn render_tsv(r: &Report) -> String {
    let mut s = format!(
        "# n={} b={} seed={} prime={} mode={}\n",
        r.n,
        r.positions.len(),
        r.seed,
        r.prime,
        r.mode
    );
    for (i, &p) in r.positions.iter().enumerate() {
        let lcp = if i == 0 { 0 } else { r.lcps[i - 1] };
        let _ = writeln!(s, "{}\t{}\t{}", i + 1, p, lcp);
    }
    s
}

fn render_json(r: &Report) -> String {
    let timings = r.timings.map(|t| {
        serde_json::json!({
            "lce_ms": t.lce_ms,
            "coarse_ms": t.coarse_ms,
            "uncoarsen_ms": t.uncoarsen_ms,
            "total_ms": t.total_ms,
        })
    });
    let mut meta = serde_json::json!({
        "n": r.n,
        "b": r.positions.len(),
        "seed": r.seed,
        "prime": r.prime.to_string(),
        "mode": r.mode,
    });
    if let Some(c) = r.security {
        meta["security"] = c.into();
    }
    if let Some(a) = r.attempts {
        meta["attempts"] = a.into();
    }
    let doc = serde_json::json!({
        "meta": meta,
        "positions": r.positions,
        "lcps": r.lcps,
        "timings": timings,
        "peak_aux_words": r.peak_aux_words,
    });
    format!("{doc}\n")
}

fn render(format: FormatFlag, r: &Report) -> String {
    match format {
        FormatFlag::Tsv => render_tsv(r),
        FormatFlag::Json => render_json(r),
    }
}

impl From<LceFlag> for LceMode {
    fn from(f: LceFlag) -> LceMode {
        match f {
            LceFlag::Dc => LceMode::Fast,
            LceFlag::Baseline => LceMode::Slow,
        }
    }
}

/// The worker pool the batch scanner uses allocates on first touch; spin it
/// up before any measurement window opens.
fn warm_up(t: &Text) {
    let eqs: Vec<Equation> = (0..96).map(|_| Equation { p: 1, q: 1, pp: 1, qp: 1 }).collect();
    let _ = naive_check_all(t, &eqs, 0);
}

// ------------------------------------------------------------- commands ---

fn cmd_build(a: BuildArgs) -> CliResult<u8> {
    if a.security == 0 {
        return Err(Failure::Config("--security must be at least 1".into()));
    }
    let t = read_text(&a.text)?;
    let positions = load_positions(&a.source, t.n(), a.seed)?;
    let set = PositionSet::new(&t, positions)?;
    let cfg = BuildConfig { seed: a.seed, c: a.security, mode: a.lce.into(), path_override: None };

    if a.instrument {
        warm_up(&t);
    }
    let window = a.instrument.then(audit::Window::open);
    let (sst, attempts): (SparseSuffixTree, Option<u32>) = match a.mode {
        BuildModeFlag::Mc => (build_sst(&t, &set, &cfg)?, None),
        BuildModeFlag::Lv => {
            let lv = LvConfig { build: cfg, verify: VerifyMode::Fast, retries: a.retries };
            match build_las_vegas(&t, &set, &lv)? {
                LvOutcome::Built { sst, attempts } => (sst, Some(attempts)),
                LvOutcome::Bottom { attempts, last_reason } => {
                    return Err(Failure::Reject(format!(
                        "las vegas bottom after {attempts} attempts: {last_reason}"
                    )));
                }
            }
        }
    };
    let peak = window.as_ref().map(|w| w.peak_aux_words());

    let meta = sst.meta();
    let report = Report {
        n: t.n(),
        seed: a.seed,
        prime: meta.prime,
        mode: match a.mode {
            BuildModeFlag::Mc => "mc",
            BuildModeFlag::Lv => "lv",
        },
        positions: sst.positions(),
        lcps: sst.lcps(),
        security: Some(a.security),
        timings: a.instrument.then_some(&meta.timings),
        peak_aux_words: peak,
        attempts,
    };
    write_out(&a.out, &render(a.format, &report))?;
    Ok(0)
}

/// Array rows as emitted by build/oracle: `rank position lcp`, ranks
/// consecutive from 1, first lcp 0; `#` lines ignored.
fn parse_array_file(path: &Path) -> CliResult<(Vec<Pos>, Vec<u32>)> {
    let body =
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut positions = Vec::new();
    let mut lcps = Vec::new();
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = || Failure::Config(format!("bad array row {line:?}"));
        let [rank, pos, lcp] = fields.as_slice() else { return Err(bad()) };
        let rank: usize = rank.parse().map_err(|_| bad())?;
        let pos: Pos = pos.parse().map_err(|_| bad())?;
        let lcp: u32 = lcp.parse().map_err(|_| bad())?;
        if rank != positions.len() + 1 {
            return Err(Failure::Config(format!("rank {rank} out of order in {line:?}")));
        }
        if positions.is_empty() {
            if lcp != 0 {
                return Err(Failure::Config("first row must carry lcp 0".into()));
            }
        } else {
            lcps.push(lcp);
        }
        positions.push(pos);
    }
    if positions.is_empty() {
        return Err(Failure::Config(format!("{}: no array rows", path.display())));
    }
    Ok((positions, lcps))
}

fn parse_equations_file(path: &Path) -> CliResult<Vec<Equation>> {
    let body =
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut eqs = Vec::new();
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Failure::Config(format!("bad equation row {line:?}"));
        let nums: Vec<Pos> =
            line.split_whitespace().map(|w| w.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let [p, q, pp, qp] = nums.as_slice() else { return Err(bad()) };
        eqs.push(Equation::new(*p, *q, *pp, *qp)?);
    }
    Ok(eqs)
}

fn render_verdict(verdict: &Verdict) -> (String, u8) {
    match verdict {
        Verdict::Accept => ("accept\n".into(), 0),
        Verdict::Reject { reason, witness } => {
            let mut s = format!("reject\t{reason}\n");
            if let Some(Witness { equation: e, offset }) = witness {
                let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", e.p, e.q, e.pp, e.qp, offset);
            }
            (s, 3)
        }
    }
}

fn cmd_verify(a: VerifyArgs) -> CliResult<u8> {
    let t = read_text(&a.text)?;
    let mode = match a.mode {
        VerifyFlag::Fast => VerifyMode::Fast,
        VerifyFlag::Slow => VerifyMode::Slow,
    };
    let verdict = match (&a.array, &a.equations) {
        (Some(path), None) => {
            let (positions, lcps) = parse_array_file(path)?;
            verify_array(&t, &positions, &lcps, mode)?
        }
        (None, Some(path)) => verify_system(&t, &parse_equations_file(path)?, mode)?,
        _ => return Err(Failure::Config("pass an array file or --equations".into())),
    };
    let (body, code) = render_verdict(&verdict);
    write_out(&a.out, &body)?;
    Ok(code)
}

fn cmd_lce(a: LceArgs) -> CliResult<u8> {
    if a.security == 0 {
        return Err(Failure::Config("--security must be at least 1".into()));
    }
    let t = read_text(&a.text)?;
    // Anchor granularity √n: a serviceable default for ad-hoc queries.
    let b = ((t.n() as f64).sqrt().ceil() as u32).clamp(1, t.n() as u32);
    let ctx = new_context(&t, a.security, a.seed)?;
    enum Engine<'a> {
        Baseline(sparsa_core::lce::BaselineLce<'a>),
        Dc(sparsa_core::lce::DcLce<'a>),
    }
    let engine = match a.lce {
        LceFlag::Baseline => Engine::Baseline(build_baseline(&t, &ctx, b)?),
        LceFlag::Dc => Engine::Dc(build_dc_lce(&t, &ctx, b, &mut CoarseRoundSource)?),
    };
    let stdin = io::stdin();
    let mut body = String::new();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| Failure::Io(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(|w| w.parse::<Pos>());
        let (Some(Ok(i)), Some(Ok(j)), None) = (it.next(), it.next(), it.next()) else {
            return Err(Failure::Config(format!("bad query line {line:?}")));
        };
        let l = match &engine {
            Engine::Baseline(s) => baseline_query(s, i, j)?,
            Engine::Dc(s) => dc_query(s, i, j)?,
        };
        let _ = writeln!(body, "{l}");
    }
    write_out(&a.out, &body)?;
    Ok(0)
}

fn cmd_oracle(a: OracleArgs) -> CliResult<u8> {
    let t = read_text(&a.text)?;
    let positions = load_positions(&a.source, t.n(), a.seed)?;
    let set = PositionSet::new(&t, positions)?;
    let (positions, lcps) = brute_sparse_sort(&t, &set);
    let report = Report {
        n: t.n(),
        seed: a.seed,
        prime: 0,
        mode: "oracle",
        positions: &positions,
        lcps: &lcps,
        security: None,
        timings: None,
        peak_aux_words: None,
        attempts: None,
    };
    write_out(&a.out, &render(a.format, &report))?;
    Ok(0)
}

fn cmd_bench(a: BenchArgs) -> CliResult<u8> {
    if a.security == 0 {
        return Err(Failure::Config("--security must be at least 1".into()));
    }
    let grid: Vec<usize> = a
        .grid_n
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| Failure::Config(format!("bad grid size {w:?} in --grid-n")))
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err(Failure::Config("--grid-n is empty".into()));
    }
    let source = a.text.as_deref().map(read_text).transpose()?;
    let mode_name = match a.mode {
        BuildModeFlag::Mc => "mc",
        BuildModeFlag::Lv => "lv",
    };

    // Runs stay sequential: the allocation meter is process-global, so
    // overlapping builds would attribute peaks to the wrong row.
    let mut body = String::from("n,b,mode,build_ms,verify_ms,peak_aux_words\n");
    for &n in &grid {
        let t = match &source {
            Some(full) => {
                let bytes = full.bytes().expect("cli texts are byte texts");
                if bytes.len() < n {
                    return Err(Failure::Config(format!(
                        "--text holds {} bytes, grid asks for {n}",
                        bytes.len()
                    )));
                }
                Text::from_bytes(bytes[..n].to_vec())?
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ n as u64);
                Text::from_bytes((0..n).map(|_| b'a' + rng.gen_range(0..4)).collect::<Vec<u8>>())?
            }
        };
        if (a.random_b as usize) > n {
            return Err(Failure::Config(format!("--random-b {} exceeds n={n}", a.random_b)));
        }
        let set = PositionSet::new(
            &t,
            load_positions(
                &SourceArgs { positions: None, stride: None, random_b: Some(a.random_b) },
                n,
                a.seed,
            )?,
        )?;
        let cfg =
            BuildConfig { seed: a.seed, c: a.security, mode: a.lce.into(), path_override: None };
        warm_up(&t);
        let window = audit::Window::open();
        let started = Instant::now();
        let sst = match a.mode {
            BuildModeFlag::Mc => build_sst(&t, &set, &cfg)?,
            BuildModeFlag::Lv => {
                let lv = LvConfig { build: cfg, verify: VerifyMode::Fast, retries: a.retries };
                match build_las_vegas(&t, &set, &lv)? {
                    LvOutcome::Built { sst, .. } => sst,
                    LvOutcome::Bottom { attempts, last_reason } => {
                        return Err(Failure::Reject(format!(
                            "las vegas bottom at n={n} after {attempts} attempts: {last_reason}"
                        )));
                    }
                }
            }
        };
        let build_ms = started.elapsed().as_secs_f64() * 1e3;
        let peak = window.peak_aux_words();
        let started = Instant::now();
        let verdict = verify_array(&t, sst.positions(), sst.lcps(), VerifyMode::Fast)?;
        let verify_ms = started.elapsed().as_secs_f64() * 1e3;
        if let Verdict::Reject { reason, .. } = verdict {
            return Err(Failure::Reject(format!("bench output rejected at n={n}: {reason}")));
        }
        let _ = writeln!(
            body,
            "{n},{},{mode_name},{build_ms:.3},{verify_ms:.3},{peak}",
            set.b()
        );
    }
    write_out(&a.out, &body)?;
    Ok(0)
}
