//! `pickmix` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or parse failure.
//! `PMIX_THREADS` caps the worker pool.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use pickmix::dataset::{
    default_grid, grid_cases, random_corpus, read_corpus, run_blend_eval, shuffled_ground_truth,
    write_corpus, CasePick, CorpusEntry, EvalCase,
};
use pickmix::descriptor::{HogConfig, HogVariant};
use pickmix::index::{build_index, load_index, save_index, IndexConfig, ShapeIndex};
use pickmix::manifold::SammonConfig;
use pickmix::raster::DEFAULT_RESOLUTION;
use pickmix::retrieval::BlendQuery;
use pickmix_service::{router, run_query, scatter, ApiSession};
use serde::Serialize;

const CASES_FILE: &str = "cases.json";

#[derive(Parser)]
#[command(name = "pickmix", version, about = "Part-based 3D shape retrieval")]
struct Cli {
    /// Human-readable tables on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic chair corpus plus evaluation cases.
    Generate(GenerateArgs),
    /// Describe a corpus and build its part manifolds.
    Build(BuildArgs),
    /// Run a blend query.
    Query {
        #[arg(long)]
        index: PathBuf,
        /// Query JSON file, `-` for stdin.
        #[arg(long)]
        query: PathBuf,
        /// Include per-part costs.
        #[arg(long)]
        explain: bool,
    },
    /// Top-k accuracy over a set of cases.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        cases: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Replace every ground truth by a random shape (chance baseline).
        #[arg(long, value_name = "SEED")]
        shuffle: Option<u64>,
    },
    /// 2D projection of one part manifold as `id,x,y` CSV.
    Project {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        part: String,
        /// Output file, stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of UI assets served for non-API paths.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Keep external embeddings in this file across restarts.
        #[arg(long)]
        persist_ext: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct CorpusKind {
    /// `LxB` grid: L leg variants by B backrest variants.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Number of random chairs.
    #[arg(long)]
    random: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    kind: CorpusKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, value_enum, default_value = "two-level")]
    variant: Variant,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: u32,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.3)]
    step_factor: f64,
    #[arg(long, default_value_t = 1e-7)]
    rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overwrite an existing index file.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Variant {
    TwoLevel,
    /// Adds the fine 34×34 level.
    ThreeLevel,
}

impl BuildArgs {
    fn config(&self) -> IndexConfig {
        let variant = match self.variant {
            Variant::TwoLevel => HogVariant::TwoLevel,
            Variant::ThreeLevel => HogVariant::ThreeLevel,
        };
        IndexConfig {
            hog: HogConfig::for_variant(variant),
            resolution: self.resolution,
            sammon: SammonConfig {
                dim: self.dim,
                max_iters: self.max_iters,
                step_factor: self.step_factor,
                rel_tol: self.rel_tol,
                distance_floor: None,
                seed: self.seed,
            },
        }
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (l, b) = s.split_once(['x', 'X']).ok_or("expected LxB, e.g. 10x10")?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((n(l)?, n(b)?))
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<pickmix::Error> for Failure {
    fn from(e: pickmix::Error) -> Self {
        use pickmix::Error::*;
        let name = match &e {
            Param(_) => "ParamError",
            Json(_) | Parse(_) => "ParseError",
            Config(_) | Resolution(_) => "ConfigError",
            Io(_) => "IOError",
            _ => "error",
        };
        let msg = format!("{name}: {e}");
        match e {
            Param(_) | Json(_) | Parse(_) | Config(_) | Resolution(_) => Failure::Usage(msg),
            _ => Failure::Runtime(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("IOError: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        std::io::read_to_string(std::io::stdin()).map_err(Failure::from)
    } else {
        fs::read_to_string(path)
            .map_err(|e| Failure::Runtime(format!("IOError: {}: {e}", path.display())))
    }
}

fn open_index(path: &Path) -> Result<ShapeIndex, Failure> {
    load_index(path).map_err(|e| match e {
        pickmix::Error::Io(io) => Failure::Runtime(format!("IOError: {}: {io}", path.display())),
        other => Failure::Runtime(format!("index {}: {other}", path.display())),
    })
}

fn generate(args: GenerateArgs) -> CmdResult {
    let (entries, cases): (Vec<CorpusEntry>, Vec<EvalCase>) =
        match (args.kind.grid, args.kind.random) {
            (Some((l, b)), _) => (default_grid(l, b)?, grid_cases(l, b)),
            (None, Some(n)) => {
                if n == 0 {
                    return Err(Failure::Usage(
                        "ParamError: --random needs at least one chair".into(),
                    ));
                }
                let entries = random_corpus(n, args.seed)?;
                let cases = entries
                    .iter()
                    .map(|e| EvalCase {
                        picks: e
                            .mesh
                            .label_set()
                            .iter()
                            .map(|l| CasePick {
                                shape: e.id,
                                part: l.clone(),
                            })
                            .collect(),
                        ground_truth: e.id,
                    })
                    .collect();
                (entries, cases)
            }
            (None, None) => unreachable!("clap requires one corpus kind"),
        };
    write_corpus(&args.out, &entries)?;
    fs::write(
        args.out.join(CASES_FILE),
        serde_json::to_string_pretty(&cases).expect("serializable"),
    )?;
    print_json(&serde_json::json!({
        "out": args.out,
        "shapes": entries.len(),
        "cases": cases.len(),
    }));
    Ok(())
}

#[derive(Serialize)]
struct PartSummary<'a> {
    part: &'a str,
    stress: f64,
    groups: usize,
    duplicates: usize,
    iterations: usize,
    converged: bool,
}

fn build(args: BuildArgs, verbose: bool) -> CmdResult {
    let cfg = args.config();
    cfg.validate()?;
    if args.out.exists() && !args.force {
        return Err(Failure::Runtime(format!(
            "{} exists; pass --force to overwrite",
            args.out.display()
        )));
    }
    // Absolute sources keep silhouettes renderable when serving from elsewhere.
    let corpus_dir = fs::canonicalize(&args.corpus)
        .map_err(|e| Failure::Runtime(format!("IOError: {}: {e}", args.corpus.display())))?;
    let corpus = read_corpus(&corpus_dir)?;
    let built = build_index(&corpus, &cfg)?;
    save_index(&built.index, &args.out)?;
    let parts: Vec<PartSummary> = built
        .reports
        .iter()
        .map(|r| PartSummary {
            part: &r.part,
            stress: r.stress,
            groups: r.groups,
            duplicates: r.duplicates,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    if verbose {
        eprintln!(
            "{:<10} {:>12} {:>7} {:>10} {:>6}",
            "part", "stress", "groups", "duplicates", "iters"
        );
        for p in &parts {
            eprintln!(
                "{:<10} {:>12.4e} {:>7} {:>10} {:>6}",
                p.part, p.stress, p.groups, p.duplicates, p.iterations
            );
        }
    }
    print_json(&serde_json::json!({
        "index": args.out,
        "shapes": built.index.len(),
        "dim": built.index.dim(),
        "fingerprint": cfg.fingerprint(),
        "parts": parts,
    }));
    Ok(())
}

fn query(index: &Path, query: &Path, explain: bool) -> CmdResult {
    let index = open_index(index)?;
    let q: BlendQuery = serde_json::from_str(&read_input(query)?)
        .map_err(|e| Failure::Usage(format!("ParseError: malformed query: {e}")))?;
    let session = ApiSession::new(index);
    let results = run_query(&session, &q)?;
    let mut out = serde_json::to_value(&results).expect("serializable");
    if !explain {
        for r in out.as_array_mut().expect("array") {
            r.as_object_mut().expect("object").remove("per_part_costs");
        }
    }
    print_json(&out);
    Ok(())
}

fn eval(index: &Path, cases: &Path, k: usize, shuffle: Option<u64>, verbose: bool) -> CmdResult {
    if k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let index = open_index(index)?;
    let mut cases: Vec<EvalCase> = serde_json::from_str(&read_input(cases)?)
        .map_err(|e| Failure::Usage(format!("ParseError: malformed cases: {e}")))?;
    if let Some(seed) = shuffle {
        cases = shuffled_ground_truth(&index, &cases, seed);
    }
    let report = run_blend_eval(&index, &cases, k)?;
    if verbose {
        eprint!("{}", report.table());
    }
    print_json(&report);
    Ok(())
}

fn project(index: &Path, part: &str, out: Option<&Path>) -> CmdResult {
    let index = open_index(index)?;
    let points = scatter(&index, part)?;
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for p in &points {
        w.serialize(p)
            .map_err(|e| Failure::Runtime(format!("IOError: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

fn serve(
    index: &Path,
    host: &str,
    port: u16,
    static_dir: Option<&Path>,
    persist_ext: Option<&Path>,
) -> CmdResult {
    let index = open_index(index)?;
    if let Some(dir) = static_dir {
        if !dir.is_dir() {
            return Err(Failure::Usage(format!(
                "--static {} is not a directory",
                dir.display()
            )));
        }
    }
    let mut session = ApiSession::new(index);
    if let Some(p) = persist_ext {
        session = session.persist_externals(p)?;
    }
    let app = router(Arc::new(session), static_dir);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        pickmix_service::serve(listener, app).await
    })?;
    eprintln!("shut down");
    Ok(())
}

fn init_threads() -> CmdResult {
    let Ok(v) = std::env::var("PMIX_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Usage(format!(
            "PMIX_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: Cli) -> CmdResult {
    init_threads()?;
    let verbose = cli.verbose;
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Build(a) => build(a, verbose),
        Command::Query {
            index,
            query: q,
            explain,
        } => query(&index, &q, explain),
        Command::Eval {
            index,
            cases,
            k,
            shuffle,
        } => eval(&index, &cases, k, shuffle, verbose),
        Command::Project { index, part, out } => project(&index, &part, out.as_deref()),
        Command::Serve {
            index,
            port,
            host,
            static_dir,
            persist_ext,
        } => serve(
            &index,
            &host,
            port,
            static_dir.as_deref(),
            persist_ext.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pickmix: {f}");
            ExitCode::from(f.code())
        }
    }
}
