//! `pds` command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pds_core::baselines::{self, AnnealSchedule};
use pds_core::domain_selection::{DomainConfig, Penalty};
use pds_core::generators::{Distribution, Family, InstanceSpec, Preset};
use pds_core::io::{self as pio, ResultRecord, ResultWriter};
use pds_core::metrics;
use pds_core::solver::{self, SolveConfig, SolveResult};
use pds_core::IsingModel;

/// Environment variable holding the default worker-thread count.
const THREADS_ENV: &str = "PDS_THREADS";

#[derive(Parser)]
#[command(name = "pds", version, about = "Ising/QUBO ground-state heuristic: pruning plus domain selection")]
struct Cli {
    /// Worker threads (default: $PDS_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Solve one instance file.
    Solve(SolveArgs),
    /// Solve a generated ensemble and write a results table.
    Bench(BenchArgs),
    /// Evaluate the first-round pruning estimate η₁.
    EstimateEta(EtaArgs),
    /// Run a reference method on one instance.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    d: usize,
    /// Degree for k-regular and MaxCut-3 families.
    #[arg(long)]
    k: Option<usize>,
    /// Edge density for MaxCut-D.
    #[arg(long)]
    density: Option<f64>,
    /// Clause-to-variable ratio for NAE-3SAT.
    #[arg(long)]
    clause_ratio: Option<f64>,
    /// Coupling distribution, e.g. `uniform:1`, `gaussian:0.333`, `binary:0.577`.
    #[arg(long)]
    couplings: Option<String>,
    /// Field distribution, same syntax as --couplings.
    #[arg(long)]
    fields: Option<String>,
    /// Maximum Gaussian scale for the complete-scaled family.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// Penalty: `auto` (dominant row sum), `rownorm:<factor>`, or a number.
    #[arg(long, default_value = "rownorm:0.01")]
    mu: String,
    #[arg(long, default_value_t = 6.0)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    /// Skip the graph-pruning stage.
    #[arg(long)]
    no_pruning: bool,
    /// Skip the steepest-descent finish of each restart.
    #[arg(long)]
    no_polish: bool,
    /// Include wall-clock fields (time, TTS, speed); these vary run to run.
    #[arg(long)]
    timing: bool,
}

impl SolverFlags {
    fn config(&self, seed: u64) -> Result<SolveConfig> {
        let config = SolveConfig {
            domain: DomainConfig {
                penalty: parse_penalty(&self.mu)?,
                learning_rate: self.learning_rate,
                max_iterations: self.max_iterations,
                restarts: self.restarts,
                polish: !self.no_polish,
                seed,
                ..DomainConfig::default()
            },
            enable_pruning: !self.no_pruning,
            collect_metrics: true,
        };
        config.domain.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Treat edge-list indices as 1-based.
    #[arg(long)]
    one_indexed: bool,
    /// Append a results row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print the result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// table1-uniform, table1-gaussian, table1-binary, table2, or a family
    /// name (maxcut-3, maxcut-d, sk-ising, sk-qubo, nae-3sat).
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// Spins per instance (default depends on the preset).
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Write the CSV here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print a JSON summary instead of the CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EtaArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Exhaustive search (d ≤ 24).
    Oracle,
    /// Steepest descent from a random start.
    Sd,
    /// Simulated annealing.
    Sa,
}

#[derive(Args)]
struct BaselineArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Annealing sweeps.
    #[arg(long, default_value_t = AnnealSchedule::DEFAULT_SWEEPS)]
    sweeps: usize,
    #[arg(long)]
    one_indexed: bool,
    #[arg(long)]
    json: bool,
}

fn parse_penalty(text: &str) -> Result<Penalty> {
    if text == "auto" {
        return Ok(Penalty::Dominant);
    }
    if let Some(f) = text.strip_prefix("rownorm:") {
        return Ok(Penalty::RowNorm(f.parse().with_context(|| format!("bad row-norm factor {f:?}"))?));
    }
    Ok(Penalty::Fixed(text.parse().with_context(|| format!("bad --mu value {text:?}"))?))
}

fn parse_distribution(text: &str) -> Result<Distribution> {
    let (kind, value) = text.split_once(':').with_context(|| format!("distribution {text:?} must be kind:value"))?;
    let v: f64 = value.parse().with_context(|| format!("bad distribution parameter {value:?}"))?;
    let dist = match kind {
        "uniform" => Distribution::Uniform { half_width: v },
        "gaussian" => Distribution::Gaussian { variance: v },
        "binary" => Distribution::Binary { level: v },
        other => bail!("unknown distribution kind {other:?}"),
    };
    dist.validate()?;
    Ok(dist)
}

fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn load(path: &Path, one_indexed: bool) -> Result<IsingModel> {
    pio::load_instance_with(path, one_indexed).with_context(|| format!("reading {}", path.display()))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let family: Family = args.family.parse()?;
    let spec = InstanceSpec {
        k: args.k,
        density: args.density,
        clause_ratio: args.clause_ratio,
        couplings: args.couplings.as_deref().map(parse_distribution).transpose()?,
        fields: args.fields.as_deref().map(parse_distribution).transpose()?,
        scale: args.scale,
        ..InstanceSpec::new(family, args.d, args.seed)
    };
    let model = spec.generate()?;
    match args.output {
        Some(path) => pio::save_instance(&model, &path).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&pio::to_json(&model))?,
    }
    Ok(())
}

fn result_json(r: &SolveResult, timing: bool) -> serde_json::Value {
    let mut v = json!({
        "d": r.s.len(),
        "energy": r.energy,
        "eta": r.eta,
        "reduced_d": r.reduced_d,
        "iterations": r.iterations,
        "iterations_per_restart": r.iterations_per_restart,
        "converged": r.converged_flags,
        "best_restart": r.best_restart,
        "mu": r.mu,
        "chi_hat": r.chi_hat(),
        "s": &*r.s,
    });
    if timing {
        v["wall_time_s"] = json!(r.wall_time);
        v["tts"] = json!(r.tts());
        v["speed"] = json!(r.speed());
    }
    v
}

/// Drops wall-clock fields so that output depends only on the inputs.
fn untimed(mut record: ResultRecord, timing: bool) -> ResultRecord {
    if !timing {
        record.wall_time_s = None;
        record.tts = None;
        record.speed = None;
    }
    record
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let model = load(&args.instance, args.one_indexed)?;
    let config = args.solver.config(args.solver.seed)?;
    let r = solver::solve(&model, &config)?;
    if let Some(csv) = &args.csv {
        let id = args.instance.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let row = untimed(ResultRecord::from_solve(&id, "file", args.solver.seed, &r), args.solver.timing);
        pio::append_results(csv, &[row]).with_context(|| format!("appending to {}", csv.display()))?;
    }
    if args.json {
        emit(&serde_json::to_string_pretty(&result_json(&r, args.solver.timing))?)
    } else {
        let mut text = format!(
            "energy {}\neta {}\niterations {}\nchi_hat {}\n",
            r.energy,
            r.eta,
            r.iterations,
            r.chi_hat().map(|c| c.to_string()).unwrap_or_else(|| "-".into())
        );
        if args.solver.timing {
            text.push_str(&format!("wall_time_s {}\n", r.wall_time));
        }
        emit(&text)
    }
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let preset: Preset = args.preset.parse()?;
    let d = args.d.unwrap_or_else(|| preset.default_d());
    let seeds = Preset::instance_seeds(args.solver.seed, args.instances);
    let specs: Vec<InstanceSpec> =
        seeds.iter().enumerate().map(|(k, &s)| preset.instance(k, d, s)).collect::<pds_core::Result<_>>()?;

    // Solve instance by instance so memory stays bounded for large dense
    // ensembles; each solve already runs its restarts in parallel.
    let mut rows = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let model = spec.generate()?;
        let config = args.solver.config(spec.seed)?;
        let r = solver::solve(&model, &config).with_context(|| format!("instance {k}"))?;
        let id = format!("{}-{k}", preset.name());
        rows.push(untimed(ResultRecord::from_solve(&id, spec.family.name(), spec.seed, &r), args.solver.timing));
    }

    if args.json {
        let n = rows.len().max(1) as f64;
        let mean = |f: &dyn Fn(&ResultRecord) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let summary = json!({
            "preset": preset.name(),
            "instances": rows.len(),
            "d": d,
            "mean_chi_hat": mean(&|r| r.chi_hat.unwrap_or(f64::NAN)),
            "mean_eta": mean(&|r| r.eta),
            "mean_iterations": mean(&|r| r.iterations as f64),
        });
        emit(&serde_json::to_string_pretty(&summary)?)?;
    }
    match (&args.output, args.json) {
        (Some(path), _) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_rows(file, &rows)?;
        }
        (None, false) => write_rows(io::stdout().lock(), &rows)?,
        (None, true) => {}
    }
    Ok(())
}

fn write_rows<W: Write>(sink: W, rows: &[ResultRecord]) -> Result<()> {
    let mut w = ResultWriter::new(sink, true);
    for r in rows {
        w.write(r)?;
    }
    w.finish()?.flush()?;
    Ok(())
}

fn cmd_eta(args: EtaArgs) -> Result<()> {
    let eta = metrics::estimate_eta1(args.k, args.alpha, args.beta)?;
    if args.json {
        emit(&json!({ "k": args.k, "alpha": args.alpha, "beta": args.beta, "eta1": eta }).to_string())
    } else {
        emit(&format!("{eta:.4}"))
    }
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let model = load(&args.instance, args.one_indexed)?;
    let start = Instant::now();
    let (name, s) = match args.method {
        Method::Oracle => ("oracle", baselines::brute_force(&model)?.0),
        Method::Sd => ("sd", baselines::steepest_descent_seeded(&model, args.seed)?),
        Method::Sa => {
            let schedule = AnnealSchedule::for_model(&model, args.sweeps);
            ("sa", baselines::simulated_annealing(&model, &schedule, args.seed)?)
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let energy = model.energy(&s)?;
    let chi = metrics::chi_hat(&model, energy).ok();
    if args.json {
        emit(&serde_json::to_string_pretty(&json!({
            "method": name,
            "d": model.d(),
            "energy": energy,
            "chi_hat": chi,
            "s": &*s,
        }))?)
    } else {
        eprintln!("{name}: {elapsed:.3} s");
        emit(&format!("energy {energy}\nchi_hat {}", chi.map(|c| c.to_string()).unwrap_or_else(|| "-".into())))
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let from_env = std::env::var(THREADS_ENV).ok().map(|v| v.parse::<usize>()).transpose();
    let threads = match (flag, from_env) {
        (Some(n), _) => Some(n),
        (None, Ok(n)) => n,
        (None, Err(_)) => bail!("{THREADS_ENV} must be a non-negative integer"),
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::EstimateEta(a) => cmd_eta(a),
        Command::Baseline(a) => cmd_baseline(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
