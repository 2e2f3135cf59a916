mod manifest;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fliplab::algebra::Ring;
use fliplab::lift::{lift_first, LiftOutcome, DEFAULT_TARGET_LEVEL};
use fliplab::meta::{
    combine, enumerate_grid_paths, extend, project, run_meta_campaign_with, CampaignSpec, DimAxis, GenealogyDag,
    GridConstraints, PoolStore,
};
use fliplab::scheme::{permute_format, read_scheme, scheme_to_json, Format, FormatPerm, Scheme};
use fliplab::search::{search_to_minimum_with, ProgressEvent, SearchConfig};
use fliplab::Error;
use manifest::{FileHash, RunManifest};

#[derive(Parser)]
#[command(name = "fliplab", version, about = "Flip-graph search for matrix multiplication schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every Brent equation of a scheme file exactly.
    Verify { file: PathBuf },
    /// Random flip-graph walks down to a local minimum of the rank.
    Search(SearchCmd),
    /// Grow one dimension by one.
    Extend(AxisCmd),
    /// Shrink one dimension by one.
    Project(AxisCmd),
    /// Block-combine two schemes along one dimension.
    Combine {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rewrite a scheme for a permuted format.
    Permute {
        file: PathBuf,
        /// id, rot, rot2, swap-np, swap-nm, swap-mp, or digits such as 120.
        #[arg(long)]
        perm: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lift Z2 schemes to Z/2^l and reconstruct rational coefficients.
    Lift {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TARGET_LEVEL)]
        level: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Lift report as JSON; printed to stderr when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a campaign over formats joined by extension, projection and combination edges.
    Campaign {
        spec: PathBuf,
        #[arg(long)]
        pool_root: PathBuf,
        /// Genealogy as JSON; `<pool-root>/genealogy.json` when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// List simple paths of extension edges through sorted formats from (2,2,2).
    EnumeratePaths {
        #[arg(long, default_value_t = 2)]
        min_dim: usize,
        #[arg(long, default_value_t = 8)]
        max_dim: usize,
        #[arg(long, default_value_t = 14)]
        sum_cap: usize,
        #[arg(long, default_value_t = 11)]
        max_len: usize,
        #[arg(long)]
        allow_projection: bool,
        /// Print only the number of paths.
        #[arg(long)]
        count: bool,
    },
    /// Render a genealogy JSON file as Graphviz DOT.
    ExportDot {
        dag: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct AxisCmd {
    file: PathBuf,
    /// n, m or p.
    #[arg(long)]
    axis: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchCmd {
    /// Starting pool; all files must share format, ring and rank.
    #[arg(conflicts_with = "standard", required_unless_present = "standard")]
    files: Vec<PathBuf>,
    /// Start from the standard scheme of format n m p.
    #[arg(long, num_args = 3, value_names = ["N", "M", "P"])]
    standard: Option<Vec<usize>>,
    /// Z2 or Z<p>; only used with --standard.
    #[arg(long, default_value = "Z2")]
    ring: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also store the final pool under this root.
    #[arg(long)]
    pool_root: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args, Clone, Default)]
struct SearchArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "paths-mult")]
    paths_mult: Option<u64>,
    #[arg(long = "len-mult")]
    len_mult: Option<u64>,
    #[arg(long)]
    plus_prob: Option<f64>,
    #[arg(long)]
    plus_overshoot: Option<usize>,
    #[arg(long)]
    stall: Option<u64>,
    #[arg(long)]
    target_pool: Option<usize>,
    #[arg(long)]
    pool_cap: Option<usize>,
    /// Stream progress events to stderr as JSON lines.
    #[arg(long)]
    progress: bool,
}

/// A failed command and its exit code.
enum Failure {
    /// Verification or reconstruction failed.
    Rejected(String),
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::NotVerified(_) => Failure::Rejected(e.to_string()),
            Error::Io { .. } | Error::Parse { .. } => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Rejected(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Rejected(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// Flag, then `FLIPLAB_SEED`, then entropy. The result goes to stderr.
fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    let seed = match flag {
        Some(s) => s,
        None => match std::env::var("FLIPLAB_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("FLIPLAB_SEED is not a 64-bit integer: '{v}'")))?,
            Err(_) => rand::random(),
        },
    };
    eprintln!("seed={seed}");
    Ok(seed)
}

impl SearchArgs {
    fn config(&self, base: SearchConfig) -> CliResult<SearchConfig> {
        let cfg = SearchConfig {
            seed: resolve_seed(self.seed)?,
            workers: self.workers.unwrap_or(base.workers),
            paths_multiplier: self.paths_mult.unwrap_or(base.paths_multiplier),
            length_multiplier: self.len_mult.unwrap_or(base.length_multiplier),
            plus_probability: self.plus_prob.unwrap_or(base.plus_probability),
            plus_overshoot_budget: self.plus_overshoot.unwrap_or(base.plus_overshoot_budget),
            stall_threshold: self.stall.unwrap_or(base.stall_threshold),
            target_pool: self.target_pool.or(base.target_pool),
            pool_cap: self.pool_cap.unwrap_or(base.pool_cap),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_progress(ev: &ProgressEvent) {
    eprintln!("{}", serde_json::to_string(ev).expect("event serializes"));
}

fn load(path: &Path) -> CliResult<Scheme> {
    Ok(read_scheme(path)?)
}

fn load_verified(path: &Path) -> CliResult<Scheme> {
    let s = load(path)?;
    s.verify().map_err(Error::NotVerified)?;
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Io(format!("stdout: {e}")))
        }
    }
}

/// Writes the manifest next to `out`; nothing when output goes to stdout.
fn write_manifest(mut m: RunManifest, inputs: &[&Path], out: Option<&Path>) -> CliResult {
    let Some(out) = out else { return Ok(()) };
    for p in inputs {
        m.inputs.push(FileHash::of(p).map_err(|e| io_failure(p, e))?);
    }
    m.outputs.push(FileHash::of(out).map_err(|e| io_failure(out, e))?);
    let path = RunManifest::path_for(out);
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| io_failure(&path, e))
}

fn write_scheme_out(s: &Scheme, out: Option<&Path>, inputs: &[&Path], config: serde_json::Value) -> CliResult {
    emit(out, &scheme_to_json(s))?;
    write_manifest(RunManifest::new(config, None), inputs, out)?;
    eprintln!("format={} rank={}", s.format(), s.rank());
    Ok(())
}

fn axis(s: &str) -> CliResult<DimAxis> {
    Ok(DimAxis::parse(s)?)
}

fn cmd_search(c: SearchCmd) -> CliResult {
    let cfg = c.search.config(SearchConfig::default())?;
    let pool: Vec<Scheme> = match &c.standard {
        Some(d) => {
            let f = Format::new(d[0], d[1], d[2])?;
            let ring: Ring = c.ring.parse()?;
            vec![Scheme::standard(f, ring)]
        }
        None => c.files.iter().map(|p| load(p)).collect::<CliResult<_>>()?,
    };
    let progress = |ev: &ProgressEvent| print_progress(ev);
    let outcome = search_to_minimum_with(&pool, &cfg, c.search.progress.then_some(&progress as _))?;
    let best = &outcome.final_pool[0];
    if let Some(root) = &c.pool_root {
        let store = PoolStore::open(root)?;
        store.save(&outcome.final_pool, "search")?;
    }
    emit(c.out.as_deref(), &scheme_to_json(best))?;
    let inputs: Vec<&Path> = c.files.iter().map(PathBuf::as_path).collect();
    let config = serde_json::to_value(&cfg).expect("config serializes");
    write_manifest(RunManifest::new(config, Some(cfg.seed)), &inputs, c.out.as_deref())?;
    eprintln!(
        "format={} rank={} pool={} levels={}",
        best.format(),
        outcome.final_rank,
        outcome.final_pool.len(),
        outcome.trace.len()
    );
    Ok(())
}

fn cmd_lift(files: &[PathBuf], level: u32, out: Option<&Path>, report: Option<&Path>) -> CliResult {
    let pool: Vec<Scheme> = files.iter().map(|p| load(p)).collect::<CliResult<_>>()?;
    let (index, result) = lift_first(&pool, level)?.expect("at least one file");
    let text = serde_json::to_string_pretty(&result.report).expect("report serializes") + "\n";
    match report {
        Some(p) => std::fs::write(p, &text).map_err(|e| io_failure(p, e))?,
        None => eprint!("{text}"),
    }
    match result.outcome {
        LiftOutcome::Rational(q) => {
            let inputs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
            let config = serde_json::json!({"level": level, "lifted": files[index].display().to_string()});
            write_scheme_out(&q, out, &inputs, config)
        }
        LiftOutcome::Partial { level, .. } => Err(Failure::Rejected(format!(
            "no verifying rational reconstruction up to level {level}"
        ))),
        LiftOutcome::Unsolvable { level, .. } => {
            Err(Failure::Rejected(format!("lifting system unsolvable at level {level}")))
        }
    }
}

fn cmd_campaign(
    spec_path: &Path,
    pool_root: &Path,
    out: Option<&Path>,
    dot: Option<&Path>,
    args: &SearchArgs,
) -> CliResult {
    let spec = CampaignSpec::load(spec_path)?;
    let cfg = args.config(spec.search.clone().unwrap_or_default())?;
    let store = PoolStore::open(pool_root)?;
    let progress = |f: Format, ev: &ProgressEvent| {
        let mut v = serde_json::to_value(ev).expect("event serializes");
        v["format"] = serde_json::json!(f.dims());
        eprintln!("{v}");
    };
    let dag = run_meta_campaign_with(&spec, &cfg, Some(&store), args.progress.then_some(&progress as _))?;
    emit(out, &dag.to_json())?;
    if let Some(d) = dot {
        std::fs::write(d, dag.to_dot()).map_err(|e| io_failure(d, e))?;
    }
    let config = serde_json::to_value(&cfg).expect("config serializes");
    let manifest_target = out.map(Path::to_path_buf).unwrap_or_else(|| pool_root.join("genealogy.json"));
    if out.is_none() {
        std::fs::write(&manifest_target, dag.to_json()).map_err(|e| io_failure(&manifest_target, e))?;
    }
    write_manifest(RunManifest::new(config, Some(cfg.seed)), &[spec_path], Some(&manifest_target))?;
    for v in dag.vertices.iter().filter(|v| v.kind == fliplab::meta::VertexKind::Format) {
        eprintln!(
            "{} start={} best={}",
            v.format,
            v.start_rank.map_or("-".into(), |r| r.to_string()),
            v.best_rank.map_or("-".into(), |r| r.to_string())
        );
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Verify { file } => {
            let s = load(&file)?;
            match s.verify() {
                Ok(()) => {
                    println!("rank={} verified", s.rank());
                    Ok(())
                }
                Err(report) => {
                    println!("rank={} not verified", s.rank());
                    Err(Failure::Rejected(report.to_string()))
                }
            }
        }
        Command::Search(c) => cmd_search(c),
        Command::Extend(c) => {
            let s = load_verified(&c.file)?;
            let out = extend(&s, axis(&c.axis)?)?;
            let config = serde_json::json!({"op": "extend", "axis": c.axis});
            write_scheme_out(&out, c.out.as_deref(), &[&c.file], config)
        }
        Command::Project(c) => {
            let s = load_verified(&c.file)?;
            let out = project(&s, axis(&c.axis)?)?;
            let config = serde_json::json!({"op": "project", "axis": c.axis});
            write_scheme_out(&out, c.out.as_deref(), &[&c.file], config)
        }
        Command::Combine {
            first,
            second,
            axis: ax,
            out,
        } => {
            let (a, b) = (load_verified(&first)?, load_verified(&second)?);
            let s = combine(&a, &b, axis(&ax)?)?;
            let config = serde_json::json!({"op": "combine", "axis": ax});
            write_scheme_out(&s, out.as_deref(), &[&first, &second], config)
        }
        Command::Permute { file, perm, out } => {
            let s = load_verified(&file)?;
            let sigma = FormatPerm::parse(&perm)?;
            let p = permute_format(&s, sigma)?;
            let config = serde_json::json!({"op": "permute", "perm": sigma.to_string()});
            write_scheme_out(&p, out.as_deref(), &[&file], config)
        }
        Command::Lift {
            files,
            level,
            out,
            report,
        } => cmd_lift(&files, level, out.as_deref(), report.as_deref()),
        Command::Campaign {
            spec,
            pool_root,
            out,
            dot,
            search,
        } => cmd_campaign(&spec, &pool_root, out.as_deref(), dot.as_deref(), &search),
        Command::EnumeratePaths {
            min_dim,
            max_dim,
            sum_cap,
            max_len,
            allow_projection,
            count,
        } => {
            let c = GridConstraints {
                min_dim,
                max_dim,
                sum_cap,
                max_length: max_len,
                allow_projection,
            };
            let mut total = 0usize;
            let mut stdout = std::io::stdout().lock();
            for path in enumerate_grid_paths(&c) {
                total += 1;
                if !count {
                    let line: Vec<String> = path.iter().map(Format::label).collect();
                    writeln!(stdout, "{}", line.join(" ")).map_err(|e| Failure::Io(format!("stdout: {e}")))?;
                }
            }
            if count {
                writeln!(stdout, "{total}").map_err(|e| Failure::Io(format!("stdout: {e}")))?;
            } else {
                eprintln!("paths={total}");
            }
            Ok(())
        }
        Command::ExportDot { dag, out } => {
            let text = std::fs::read_to_string(&dag).map_err(|e| io_failure(&dag, e))?;
            let g = GenealogyDag::from_json(&text)?;
            emit(out.as_deref(), &g.to_dot())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
