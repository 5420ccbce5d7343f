use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use twdm_core::{Distribution, Error, RandomInstanceConfig};
use twdm_sim::compare::write_corpus;
use twdm_sim::{
    compare_corpus, generate_instances, load_corpus, profile_runtime, run_scenario, summarize, sweep, write_csv,
    Algorithm, ChannelConfig, ProfileConfig, Scenario, SweepConfig, QUICK_FRAMES,
};

#[derive(Parser, Debug)]
#[command(name = "twdm-sim", version, about = "Multi-tenant TWDM-PON bandwidth map merging simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Base seed; overrides the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Frames per repetition; overrides the scenario file.
    #[arg(long, global = true)]
    frames: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Shorthand for --frames 100.
    #[arg(long, global = true)]
    quick: bool,
}

impl Global {
    fn frames(&self) -> Option<u64> {
        if self.quick {
            Some(QUICK_FRAMES)
        } else {
            self.frames
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario from a file and/or flags.
    Run(RunArgs),
    /// Run the Cartesian product described by a sweep file.
    Sweep {
        config: PathBuf,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Profile per-frame merge time over line capacities.
    Profile {
        #[arg(long, value_enum, default_value = "both")]
        algorithm: ProfileAlgorithm,
        /// Capacities in Gb/s, served by 25G channels.
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        capacities: Vec<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare DTWA and SWA with the exact solver on a directory of instances.
    OracleCompare {
        corpus: PathBuf,
        /// Write this many random instances into the corpus first.
        #[arg(long)]
        generate: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProfileAlgorithm {
    Dtwa,
    Swa,
    Both,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario JSON file; flags below override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// 8x25G, 4x50G, 1x200G or any WxRG.
    #[arg(long)]
    channels: Option<String>,
    #[arg(long)]
    tuning_us: Option<f64>,
    #[arg(long)]
    load: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    sla_fractions: Option<Vec<f64>>,
    /// uniform, poisson, zipf_mandelbrot or pareto.
    #[arg(long)]
    distribution: Option<String>,
    /// dtwa, swa or oracle.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    repetitions: Option<u32>,
    #[arg(long)]
    output: Option<PathBuf>,
}

enum Failure {
    Core(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.command {
        Command::Run(args) => {
            let scenario = build_scenario(&args, g)?;
            let result = run_scenario(&scenario)?;
            match g.format.unwrap_or(Format::Json) {
                Format::Json => emit_json(&result, args.output.as_deref()),
                Format::Csv => emit_csv(&result.rows(), args.output.as_deref()),
            }
        }
        Command::Sweep { config, out } => {
            let mut cfg = SweepConfig::load(&config)?;
            if let Some(s) = g.seed {
                cfg.base.seed = s;
            }
            if let Some(f) = g.frames() {
                cfg.base.frames = f;
            }
            let result = sweep(&cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            match g.format.unwrap_or(Format::Csv) {
                Format::Json => emit_json(&result, Some(&out.join("sweep.json"))),
                Format::Csv => {
                    emit_csv(&result.rows, Some(&out.join("sweep.csv")))?;
                    emit_csv(&result.distribution_summary, Some(&out.join("distribution_summary.csv")))
                }
            }
        }
        Command::Profile {
            algorithm,
            capacities,
            output,
        } => {
            let algorithms = match algorithm {
                ProfileAlgorithm::Dtwa => vec![Algorithm::Dtwa],
                ProfileAlgorithm::Swa => vec![Algorithm::Swa],
                ProfileAlgorithm::Both => vec![Algorithm::Dtwa, Algorithm::Swa],
            };
            let mut cfg = ProfileConfig {
                capacities_gbps: capacities,
                algorithms,
                ..ProfileConfig::default()
            };
            if let Some(f) = g.frames() {
                cfg.frames = f;
            }
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            let rows = profile_runtime(&cfg)?;
            match g.format.unwrap_or(Format::Csv) {
                Format::Json => emit_json(&rows, output.as_deref()),
                Format::Csv => emit_csv(&rows, output.as_deref()),
            }
        }
        Command::OracleCompare {
            corpus,
            generate,
            output,
        } => {
            if let Some(n) = generate {
                let instances = generate_instances(n, g.seed.unwrap_or(1), &RandomInstanceConfig::default())?;
                write_corpus(&corpus, &instances)?;
            }
            let instances = load_corpus(&corpus)?;
            let rows = compare_corpus(&instances)?;
            let summary = summarize(&rows);
            match g.format.unwrap_or(Format::Csv) {
                Format::Json => {
                    #[derive(Serialize)]
                    struct Report<'a> {
                        summary: &'a twdm_sim::CompareSummary,
                        rows: &'a [twdm_sim::CompareRow],
                    }
                    emit_json(&Report { summary: &summary, rows: &rows }, output.as_deref())?;
                }
                Format::Csv => {
                    emit_csv(&rows, output.as_deref())?;
                    eprintln!(
                        "{} instances: DTWA optimal on {}, SWA optimal on {}",
                        summary.instances, summary.dtwa_optimal, summary.swa_optimal
                    );
                }
            }
            if summary.dominance_violations > 0 {
                return Err(Failure::Invariant(format!(
                    "a heuristic beat the exact solver on {} instances",
                    summary.dominance_violations
                )));
            }
            Ok(())
        }
    }
}

fn build_scenario(args: &RunArgs, g: &Global) -> Result<Scenario, Error> {
    let mut s = match &args.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(c) = &args.channels {
        s.channel_config = c.parse::<ChannelConfig>()?;
    }
    if let Some(t) = args.tuning_us {
        s.tuning_time_us = t;
    }
    if let Some(l) = args.load {
        s.load = l;
    }
    if let Some(f) = &args.sla_fractions {
        s.sla_fractions = f.clone();
    }
    if let Some(d) = &args.distribution {
        s.distribution = d.parse::<Distribution>()?;
    }
    if let Some(a) = &args.algorithm {
        s.algorithm = a.parse::<Algorithm>()?;
    }
    if let Some(r) = args.repetitions {
        s.repetitions = r;
    }
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    if let Some(f) = g.frames() {
        s.frames = f;
    }
    s.validate()?;
    Ok(s)
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        context: "json output".into(),
        message: e.to_string(),
    })?;
    write_out(path, format!("{text}\n").as_bytes())
}

fn emit_csv<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).map_err(|e| Error::Parse {
        context: "csv output".into(),
        message: e.to_string(),
    })?;
    write_out(path, &buf)
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io_err(p, e).into()),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| io_err(Path::new("<stdout>"), e).into()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
