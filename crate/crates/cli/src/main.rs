use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtamper::attacks::{AttackKind, AttackSpec};
use qtamper::data::{
    load_features_csv, load_timeseries_csv, save_features_csv, save_tampered_csv, synth_generate, Profile,
};
use qtamper::experiment::{
    ingest_timeseries, results_table, run_attack, run_experiment, table_csv, table_markdown, write_outputs,
    ExperimentConfig, ExperimentReport, SvmConfig,
};
use qtamper::{Error, Result};

/// Tampering detection on physiological feature data with quantum and
/// classical one-class SVMs.
#[derive(Parser, Debug)]
#[command(name = "qtamper", version)]
struct Cli {
    /// Seed for commands that draw random numbers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (synth, ingest, attack, report) or directory (run).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config (TOML) for `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic feature dataset.
    Synth {
        #[arg(long)]
        profile: String,
        /// Samples per class.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Feature count; defaults to the profile's.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
    },
    /// Turn a time-series CSV into a feature CSV.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Moving-average downsampling window.
        #[arg(long, default_value_t = 60)]
        window: usize,
        /// Downsampled samples per feature row.
        #[arg(long, default_value_t = 16)]
        segment: usize,
        #[arg(long, default_value_t = 0)]
        label: usize,
    },
    /// Tamper with a feature CSV.
    Attack {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Run a full experiment from a config.
    Run,
    /// Render the results table of a report.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// csv or markdown.
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[arg(long)]
    kind: String,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = qtamper::attacks::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    source_class: usize,
    #[arg(long, default_value_t = 1)]
    target_class: usize,
    #[arg(long, default_value_t = qtamper::attacks::DEFAULT_ANOMALY_MAGNITUDE)]
    magnitude: f64,
}

fn require_out(out: &Option<PathBuf>) -> Result<&Path> {
    out.as_deref()
        .ok_or_else(|| Error::Usage("--out is required for this command".into()))
}

fn execute(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Synth { profile, n, d, separation } => {
            let profile: Profile = profile.parse()?;
            let ds = synth_generate(profile, n, d.unwrap_or(profile.default_dim()), separation, seed)?;
            let out = require_out(&cli.out)?;
            save_features_csv(&ds, out)?;
            eprintln!("wrote {} rows to {}", ds.len(), out.display());
        }
        Command::Ingest { input, window, segment, label } => {
            let ts = load_timeseries_csv(&input)?;
            let ds = ingest_timeseries(&ts, window, segment, label)?;
            let out = require_out(&cli.out)?;
            save_features_csv(&ds, out)?;
            eprintln!("wrote {} rows of {} features to {}", ds.len(), ds.dim(), out.display());
        }
        Command::Attack { input, attack } => {
            let kind: AttackKind = attack.kind.parse()?;
            let out = require_out(&cli.out)?.to_path_buf();
            let clean = load_features_csv(&input)?;
            let spec = AttackSpec {
                kind,
                rate: attack.rate,
                epsilon: attack.epsilon,
                source_class: attack.source_class,
                target_class: attack.target_class,
                magnitude: attack.magnitude,
                seed,
            };
            let tampered = run_attack(&clean, &spec, &SvmConfig::default())?;
            save_tampered_csv(&tampered, &out)?;
            eprintln!("tampered {} of {} rows", tampered.tampered_count(), clean.len());
        }
        Command::Run => {
            let mut cfg = match &cli.config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.master_seed = s;
            }
            if let Some(dir) = &cli.out {
                cfg.output_dir = dir.clone();
            }
            let (report, suspect) = run_experiment(&cfg)?;
            for path in write_outputs(&report, &suspect)? {
                eprintln!("wrote {}", path.display());
            }
            print!("{}", table_markdown(&results_table(&report)?));
            println!("delta (quantum - classical): {:+.3} points", 100.0 * report.delta);
        }
        Command::Report { input, format } => {
            let report = ExperimentReport::load(&input)?;
            let rows = results_table(&report)?;
            let body = match format.as_str() {
                "csv" => table_csv(&rows),
                "markdown" | "md" => table_markdown(&rows),
                other => return Err(Error::Usage(format!("unknown format '{other}' (expected csv or markdown)"))),
            };
            match &cli.out {
                Some(path) => std::fs::write(path, body).map_err(|e| Error::io(path, e))?,
                None => print!("{body}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
