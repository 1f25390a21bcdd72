//! `pa-lab`: generate, estimate, solve and experiment on sublinear
//! preferential attachment trees from the command line.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pa_lab::ctbp::{run, CtbpSim, RootMode, StopRule};
use pa_lab::estimator::{
    census_from_edges, estimate, lemma_check, monotonize, normalize_by_degree_one,
};
use pa_lab::experiments::{
    run_study_to_dir, summarize, write_summary_csv, Execution, ExperimentPlan, Study,
};
use pa_lab::pa_model::{census_from_snapshot, validate_function};
use pa_lab::theory::{identity_check, solve_malthusian, SolveOptions};
use pa_lab::{grow, EvolutionLog, GrowthConfig, PaFunction, TreeSnapshot};

/// Degrees scanned when validating a user-supplied function.
const VALIDATION_HORIZON: u64 = 10_000;

#[derive(Parser)]
#[command(
    name = "pa-lab",
    version,
    about = "Sublinear preferential attachment tree lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a tree and write its parent array.
    Generate(GenerateArgs),
    /// Estimate r_k = f(k)/λ* from a snapshot or edge list.
    Estimate(EstimateArgs),
    /// Solve for λ* and the limiting degree law.
    Theory(TheoryArgs),
    /// Simulate the continuous-time branching process.
    Ctbp(CtbpArgs),
    /// Run a replicated study from a plan file.
    Experiment(ExperimentArgs),
    /// Group long-format CSVs by (f_id, n, k) and summarize the value column.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// PA function as inline JSON or a path to a JSON file.
    #[arg(long = "f")]
    f: String,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    seed: u64,
    /// Also write the chosen-degree log to `<out>.log`.
    #[arg(long)]
    log: bool,
    /// Write the compact binary snapshot instead of text.
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Parent-array snapshot (text or binary).
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    snapshot: Option<PathBuf>,
    /// Whitespace-separated "u v" edge list of a tree.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Chosen-degree log; if given, the attachment identity is verified.
    #[arg(long, requires = "snapshot")]
    log: Option<PathBuf>,
    /// Divide by r̂_1 so that the first entry is 1.
    #[arg(long)]
    normalize: bool,
    /// Replace the estimates by their monotone rearrangement.
    #[arg(long)]
    monotone: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long = "f")]
    f: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Largest k written; defaults to min(horizon, 1000).
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CtbpArgs {
    #[arg(long = "f")]
    f: String,
    /// Stop when the population reaches this size.
    #[arg(long)]
    n: usize,
    /// Degree tracked in the Z_eq_k / Z_gt_k columns.
    #[arg(long)]
    k: u32,
    #[arg(long, default_value = "two_roots")]
    mode: RootMode,
    #[arg(long)]
    seed: u64,
    /// Record one trajectory row every this many births.
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// Also write the final tree's parent array here.
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Plan JSON; fields left out take their defaults.
    #[arg(long, required_unless_present = "full_scale")]
    plan: Option<PathBuf>,
    /// Use the full 10^4/10^5/10^6 grid with 1000 replicates.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    study: Study,
    /// Degree for the normality study.
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Run replicates on one thread (outputs are identical either way).
    #[arg(long)]
    serial: bool,
    /// Worker threads for the parallel mode.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Theory(a) => theory(a),
        Command::Ctbp(a) => ctbp(a),
        Command::Experiment(a) => experiment(a),
        Command::Summarize(a) => summarize_cmd(a),
    }
}

/// Accepts inline JSON (anything starting with `{`) or a file path.
fn load_function(spec: &str) -> Result<PaFunction> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_owned()
    } else {
        fs::read_to_string(spec).with_context(|| format!("reading PA function from {spec}"))?
    };
    let f: PaFunction = serde_json::from_str(&text).context("parsing PA function")?;
    let report = validate_function(&f, VALIDATION_HORIZON);
    if let Some(v) = report.first_violation() {
        bail!(
            "invalid PA function at k = {}: {:?} ({})",
            v.k,
            v.kind,
            v.detail
        );
    }
    Ok(f)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let f = load_function(&a.f)?;
    let mut cfg = GrowthConfig::new(f, a.n, a.seed);
    cfg.record_log = a.log;
    let (tree, log) = grow(&cfg)?;
    let mut w = create(&a.out)?;
    if a.binary {
        tree.write_binary(&mut w)?;
    } else {
        tree.write_text(&mut w)?;
    }
    w.flush()?;
    if let Some(log) = log {
        let mut w = create(&log_path(&a.out))?;
        log.write_text(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn estimate_cmd(a: EstimateArgs) -> Result<()> {
    let census = match (&a.snapshot, &a.edges) {
        (Some(path), _) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let tree = TreeSnapshot::read_any(&bytes)?;
            let census = census_from_snapshot(&tree);
            if let Some(lp) = &a.log {
                let log = EvolutionLog::read_text(BufReader::new(File::open(lp)?))?;
                let report = lemma_check(&census, &log);
                if !report.holds() {
                    bail!(
                        "log does not match snapshot: {:?}",
                        report.mismatches.first()
                    );
                }
            }
            census
        }
        (None, Some(path)) => census_from_edges(BufReader::new(File::open(path)?))?,
        (None, None) => bail!("one of --snapshot or --edges is required"),
    };
    let mut table = estimate(&census)?;
    if a.normalize {
        table = normalize_by_degree_one(&table)?;
    }
    if a.monotone {
        table = monotonize(&table);
    }
    let mut w = create(&a.out)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn theory(a: TheoryArgs) -> Result<()> {
    let f = load_function(&a.f)?;
    let sol = solve_malthusian(&f, &SolveOptions::with_tol(a.tol))?;
    identity_check(&sol, 100.min(sol.horizon)).into_result()?;
    let kmax = a.kmax.unwrap_or(1000).min(sol.horizon);
    let mut w = create(&a.out)?;
    sol.write_csv(&mut w, kmax)?;
    w.flush()?;
    Ok(())
}

fn ctbp(a: CtbpArgs) -> Result<()> {
    let f = load_function(&a.f)?;
    let mut sim = CtbpSim::new(f, a.mode, a.k, a.seed)?;
    let out = run(&mut sim, StopRule::Size(a.n), a.record_every)?;
    let mut w = create(&a.out)?;
    out.trajectory.write_csv(&mut w)?;
    w.flush()?;
    if let Some(path) = &a.snapshot_out {
        let tree = out
            .snapshot
            .context("population too small for a tree snapshot")?;
        let mut w = create(path)?;
        tree.write_text(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let plan = match &a.plan {
        Some(path) => ExperimentPlan::from_json(&fs::read_to_string(path)?)?,
        None => ExperimentPlan::full_scale(),
    };
    let exec = if a.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let written = match a.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(|| run_study_to_dir(&plan, a.study, a.k, &a.out_dir, exec))?,
        None => run_study_to_dir(&plan, a.study, a.k, &a.out_dir, exec)?,
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn summarize_cmd(a: SummarizeArgs) -> Result<()> {
    let readers = a
        .inputs
        .iter()
        .map(|p| {
            File::open(p)
                .map(BufReader::new)
                .with_context(|| format!("opening {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = summarize(readers)?;
    write_summary_csv(&rows, create(&a.out)?)?;
    Ok(())
}
