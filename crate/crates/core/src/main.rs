use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aicp::harness::{self, check, ExperimentConfig, RunMetadata};

#[derive(Parser)]
#[command(name = "aicp", version, about = "Active invariant causal prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the SCM ensemble described by a config.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        master_seed: Option<u64>,
    },
    /// Run every configured policy over the ensemble and write JSONL traces.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use this ensemble instead of generating one from the config.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        master_seed: Option<u64>,
    },
    /// Summarize traces into Jaccard curves, FWER and recovery times.
    Metrics {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Value given to runs that never recover the parents (default: T).
        #[arg(long)]
        censor: Option<usize>,
    },
    /// Property checks on random graphs and null calibration of the tests.
    Check {
        #[arg(long, default_value_t = 500)]
        graphs: usize,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<aicp::Error> for Failure {
    fn from(e: aicp::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(path: &Path, master_seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = master_seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(aicp::Error::from)? + "\n";
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen {
            config,
            out,
            master_seed,
        } => {
            let cfg = load_config(&config, master_seed)?;
            create_dir(&out)?;
            let scms = harness::generate_ensemble(&cfg)?;
            let path = out.join("scms.json");
            harness::write_ensemble(&scms, &path)?;
            println!("wrote {} SCMs to {}", scms.len(), path.display());
        }
        Command::Run {
            config,
            out,
            ensemble,
            workers,
            master_seed,
        } => {
            let cfg = load_config(&config, master_seed)?;
            let scms = match ensemble {
                Some(path) => harness::read_ensemble(&path)?,
                None => harness::generate_ensemble(&cfg)?,
            };
            create_dir(&out)?;
            let traces = harness::run_experiment(&cfg, &scms, workers)?;
            let path = out.join("traces.jsonl");
            harness::write_jsonl(&traces, fs::File::create(&path).map_err(aicp::Error::from)?)?;
            write_json(&RunMetadata::new(&cfg), &out.join("run_metadata.json"))?;
            println!("wrote {} traces to {}", traces.len(), path.display());
        }
        Command::Metrics {
            traces,
            out,
            censor,
        } => {
            let traces = harness::read_traces(&traces)?;
            let m = harness::compute_metrics(&traces, censor)?;
            create_dir(&out)?;
            let file = |name: &str| fs::File::create(out.join(name)).map_err(aicp::Error::from);
            harness::write_jaccard_csv(&m, file("jaccard.csv")?)?;
            harness::write_summary_csv(&m, file("summary.csv")?)?;
            println!("{:<12} {:>6} {:>8} {:>14}", "policy", "runs", "fwer", "mean_recovery");
            for p in &m.policies {
                println!("{:<12} {:>6} {:>8.4} {:>14.3}", p.policy, p.runs, p.fwer, p.mean_recovery);
            }
        }
        Command::Check {
            graphs,
            replicates,
            master_seed,
            out,
        } => {
            let props = check::stable_set_properties(graphs, 10, master_seed)?;
            for (name, count) in &props.violations {
                println!("{name}: {count} violations over {graphs} graphs");
            }
            let cal = check::calibration(replicates, master_seed)?;
            println!(
                "size at level {}: t-test {:.4}, F-test {:.4}, invariance {:.4}",
                cal.level, cal.t_test_size, cal.f_test_size, cal.invariance_size
            );
            if let Some(dir) = out {
                create_dir(&dir)?;
                write_json(&props, &dir.join("properties.json"))?;
                write_json(&cal, &dir.join("calibration.json"))?;
            }
            if !(props.passed() && cal.passed()) {
                return Err(Failure::Runtime("checks failed".into()));
            }
            println!("all checks passed");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
