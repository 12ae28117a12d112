//! `remaug`: generate synthetic coverage maps, hide bins, reconstruct them,
//! compare methods, and ask the selector which technique fits a scenario.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use remaug_core::evaluation::{
    check_assertions, reconstruct, reconstruct_samples, run_benchmark, BenchmarkConfig, Details,
    MethodSpec, ModelContext, ReconstructError, Stat,
};
use remaug_core::selector::{select, Label, ScenarioFeatures};
use remaug_core::{apply_mask, generate_truth, sample_from_map, GridSpec, MaskSpec, Scenario};
use serde_json::{Map, Value};

use io::{
    read_json, read_map, read_samples, write_flat_csv, write_json, write_map, write_samples, Meta,
    ReconInfo,
};

#[derive(Parser)]
#[command(
    name = "remaug",
    version,
    about = "Radio coverage map reconstruction toolkit"
)]
struct Cli {
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed override; takes precedence over REMAUG_SEED and config files
    #[arg(long, global = true, env = "REMAUG_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-truth map from a scenario file
    Generate {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Hide bins of a map
    Mask(MaskArgs),
    /// Fill a sparse map or a sample set
    Reconstruct(ReconstructArgs),
    /// Compare methods over seeds
    Benchmark {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Flat (method, seed, metric, value) CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Recommend techniques for a feature file
    Select { features: PathBuf },
}

#[derive(Args)]
struct MaskArgs {
    input: PathBuf,
    /// Mask JSON, e.g. {"kind": "UniformRandom", "fraction": 0.1, "seed": 1}
    #[arg(long, conflicts_with = "fraction")]
    mask: Option<PathBuf>,
    /// Keep each bin with this probability
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
    /// Also write the observed bins as a sample CSV
    #[arg(long)]
    samples_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Sparse grid CSV (with sidecar)
    #[arg(long, required_unless_present = "samples", conflicts_with = "samples")]
    input: Option<PathBuf>,
    /// Sample CSV with header x_m,y_m,value_dbm[,z_m]
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Target grid JSON for --samples (defaults to the scenario grid)
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    method: String,
    /// Method parameters as a JSON object file
    #[arg(long)]
    params: Option<PathBuf>,
    /// One parameter, `key=value` with a JSON value; repeatable
    #[arg(long = "param", value_name = "KEY=VALUE")]
    param: Vec<String>,
    /// Scenario supplying the propagation parameters and transmitter for
    /// model-based methods (defaults to the input sidecar)
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
    /// Fail instead of leaving unestimated bins as nan
    #[arg(long)]
    strict: bool,
    /// Record wall time in the sidecar (makes output non-reproducible)
    #[arg(long)]
    timing: bool,
}

/// Exit 1: a run or check failed; exit 2: bad usage or configuration.
enum Failure {
    Run(anyhow::Error),
    Usage(anyhow::Error),
}

type Res<T> = Result<T, Failure>;

trait Classify<T> {
    fn run_err(self) -> Res<T>;
    fn usage_err(self) -> Res<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn run_err(self) -> Res<T> {
        self.map_err(|e| Failure::Run(e.into()))
    }
    fn usage_err(self) -> Res<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("warning: {e}");
        }
    }
    let result = match &cli.command {
        Command::Generate { scenario, out } => cmd_generate(scenario, out, cli.seed),
        Command::Mask(a) => cmd_mask(a, cli.seed),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Benchmark { config, out, csv } => {
            cmd_benchmark(config, out, csv.as_deref(), cli.seed)
        }
        Command::Select { features } => cmd_select(features),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_generate(scenario: &Path, out: &Path, seed: Option<u64>) -> Res<()> {
    let mut s: Scenario = read_json(scenario).usage_err()?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s.validate().usage_err()?;
    let truth = generate_truth(&s).run_err()?;
    let mut meta = Meta::new(s.grid);
    meta.scenario = Some(s);
    write_map(out, &truth, &meta).run_err()
}

fn cmd_mask(a: &MaskArgs, seed: Option<u64>) -> Res<()> {
    let (map, meta_in) = read_map(&a.input).usage_err()?;
    let mut mask: MaskSpec = match (&a.mask, a.fraction) {
        (Some(p), _) => read_json(p).usage_err()?,
        (None, Some(f)) => MaskSpec::uniform(f, 0),
        (None, None) => {
            return Err(Failure::Usage(anyhow!("give --mask FILE or --fraction F")));
        }
    };
    if let Some(seed) = seed {
        mask.seed = seed;
    }
    mask.validate().usage_err()?;
    let observed = apply_mask(&map, &mask).run_err()?;
    let mut meta = Meta::new(*map.grid());
    meta.scenario = meta_in.scenario;
    meta.mask = Some(mask);
    write_map(&a.out, &observed, &meta).run_err()?;
    if let Some(p) = &a.samples_out {
        write_samples(p, &sample_from_map(&observed).run_err()?).run_err()?;
    }
    Ok(())
}

/// Method spec from a CLI name and parameters. Selector labels are accepted
/// for implemented techniques.
fn method_spec(name: &str, params: Option<&Path>, kv: &[String]) -> Res<MethodSpec> {
    let upper = name.to_ascii_uppercase();
    let label = Label::ALL.into_iter().find(|l| l.as_str() == upper);
    let canonical = match label {
        Some(l) if l.is_advisory() => {
            return Err(Failure::Usage(anyhow!(
                "{l}: advisory label, not implemented; the selector may recommend it, but it \
                 is outside what this tool reconstructs"
            )))
        }
        Some(Label::Aoa) | Some(Label::SnrMethod) => {
            return Err(Failure::Usage(anyhow!(
                "{upper} needs antenna-array snapshots or per-receiver SNR, which a coverage \
                 map does not carry; use the library API"
            )))
        }
        Some(Label::Splines) => "tps".to_string(),
        Some(Label::MatrixCompletion) => "svt".to_string(),
        Some(l) => l.as_str().to_ascii_lowercase(),
        None => name.to_ascii_lowercase(),
    };
    if !MethodSpec::NAMES.contains(&canonical.as_str()) {
        return Err(Failure::Usage(anyhow!(
            "unknown method `{name}` (available: {})",
            MethodSpec::NAMES.join(", ")
        )));
    }
    let mut obj = match params {
        Some(p) => match read_json::<Value>(p).usage_err()? {
            Value::Object(m) => m,
            _ => {
                return Err(Failure::Usage(anyhow!(
                    "{}: parameters must be a JSON object",
                    p.display()
                )))
            }
        },
        None => Map::new(),
    };
    for item in kv {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::Usage(anyhow!("--param expects KEY=VALUE, got `{item}`")))?;
        let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        obj.insert(k.trim().to_string(), v);
    }
    obj.insert("method".into(), Value::String(canonical.clone()));
    serde_json::from_value(Value::Object(obj))
        .with_context(|| format!("invalid parameters for {canonical}"))
        .usage_err()
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Res<()> {
    let method = method_spec(&a.method, a.params.as_deref(), &a.param)?;
    let scenario: Option<Scenario> = match &a.scenario {
        Some(p) => Some(read_json(p).usage_err()?),
        None => None,
    };
    let started = Instant::now();
    let (result, grid, scenario) = if let Some(input) = &a.input {
        let (map, meta_in) = read_map(input).usage_err()?;
        let scenario = scenario.or(meta_in.scenario);
        let ctx = context(scenario.as_ref());
        (reconstruct(&map, &method, &ctx), *map.grid(), scenario)
    } else {
        let path = a
            .samples
            .as_ref()
            .expect("clap enforces --input or --samples");
        let samples = read_samples(path).usage_err()?;
        let grid: GridSpec = match (&a.grid, &scenario) {
            (Some(g), _) => read_json(g).usage_err()?,
            (None, Some(s)) => s.grid,
            (None, None) => {
                return Err(Failure::Usage(anyhow!(
                    "--samples needs a target grid: give --grid or --scenario"
                )))
            }
        };
        let ctx = context(scenario.as_ref());
        (
            reconstruct_samples(&samples, &grid, &method, &ctx),
            grid,
            scenario,
        )
    };
    let r = result.map_err(|e| {
        let usage = matches!(e, ReconstructError::MissingContext { .. });
        let e = anyhow!(e).context(format!("{} failed", method.name()));
        if usage {
            Failure::Usage(e)
        } else {
            Failure::Run(e)
        }
    })?;
    if r.failed_bins > 0 {
        let why = r
            .first_bin_error
            .as_ref()
            .map(|e| format!(" ({e})"))
            .unwrap_or_default();
        let msg = format!(
            "{} of {} bins could not be estimated{why}",
            r.failed_bins,
            grid.len()
        );
        if a.strict {
            return Err(Failure::Run(anyhow!(msg)));
        }
        eprintln!("warning: {msg}; written as nan");
    }
    let mut meta = Meta::new(grid);
    meta.scenario = scenario;
    meta.method = Some(method);
    let not_converged = matches!(
        r.details,
        Details::Completion {
            converged: false,
            ..
        }
    );
    meta.reconstruction = Some(ReconInfo {
        failed_bins: r.failed_bins,
        fallbacks: r.fallbacks,
        details: r.details,
    });
    if a.timing {
        meta.wall_time_s = Some(started.elapsed().as_secs_f64());
    }
    write_map(&a.out, &r.map, &meta).run_err()?;
    if not_converged {
        return Err(Failure::Run(anyhow!(
            "completion did not converge within the iteration budget; the last iterate was written"
        )));
    }
    Ok(())
}

fn context(s: Option<&Scenario>) -> ModelContext {
    ModelContext {
        prop: s.map(|s| s.prop),
        transmitter: s.and_then(|s| s.transmitters.first().cloned()),
    }
}

fn cmd_benchmark(config: &Path, out: &Path, csv: Option<&Path>, seed: Option<u64>) -> Res<()> {
    let mut cfg: BenchmarkConfig = read_json(config).usage_err()?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
        cfg.mask.seed = seed;
    }
    cfg.validate().usage_err()?;
    let report = run_benchmark(&cfg).usage_err()?;
    write_json(out, &report).run_err()?;
    if let Some(p) = csv {
        write_flat_csv(p, &report.flat_rows()).run_err()?;
    }
    for a in &report.aggregates {
        let stat = |s: Option<Stat>| {
            s.map(|s| format!("{:.4} ± {:.4}", s.mean, s.std))
                .unwrap_or_else(|| "-".into())
        };
        println!(
            "{:<18} rmse {:<20} mae {:<20} ok {}/{}",
            a.method,
            stat(a.rmse),
            stat(a.mae),
            a.n_success,
            a.n_success + a.n_failed
        );
    }
    let outcomes = check_assertions(&report);
    let mut failed = 0;
    for o in &outcomes {
        println!(
            "{} {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.description
        );
        for d in &o.diagnostics {
            println!("    {d}");
        }
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        return Err(Failure::Run(anyhow!(
            "{failed} of {} assertions failed",
            outcomes.len()
        )));
    }
    Ok(())
}

fn cmd_select(features: &Path) -> Res<()> {
    // the deserializer error names the unknown key and lists the valid ones
    let f: ScenarioFeatures = read_json(features).usage_err()?;
    let rec = select(&f);
    println!("{}", serde_json::to_string_pretty(&rec).run_err()?);
    Ok(())
}
