use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use pivgait::config::{effective_config, load_scenario, ConfigError, Override};
use pivgait::output::{write_artifacts, Summary};
use pivgait::repro;
use pivgait_core::sim::run;

/// Default base directory for run artifacts.
const OUT_ENV: &str = "PIVGAIT_OUT";
/// Default scenario corpus for `repro`.
const CORPUS_ENV: &str = "PIVGAIT_CORPUS";

const EXIT_RUN_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "pivgait", version, about = "Pivoting-gait simulator with graph-selected gait modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Output directory [default: $PIVGAIT_OUT/<name>, else out/<name>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the scenario's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Sets a scenario field, e.g. `mpc.n_p=5`; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<Override>,
    },
    /// Run the reproduction corpus and print the pass/fail table.
    Repro {
        /// Corpus directory holding `repro.toml` [default: $PIVGAIT_CORPUS, else scenarios/].
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Also write every run's artifacts under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<Override>,
    },
    /// Check a scenario file and print its effective configuration.
    Validate {
        scenario: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<Override>,
    },
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn io_failure(what: &Path, e: std::io::Error) -> ExitCode {
    eprintln!("error: cannot write {}: {e}", what.display());
    ExitCode::from(EXIT_IO)
}

fn default_out(name: &str) -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map_or_else(|| PathBuf::from("out"), PathBuf::from)
        .join(name)
}

fn default_corpus() -> PathBuf {
    if let Some(dir) = std::env::var_os(CORPUS_ENV) {
        return dir.into();
    }
    let local = PathBuf::from("scenarios");
    if local.join(repro::MANIFEST_FILE).is_file() {
        return local;
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run_command(path: &Path, out: Option<PathBuf>, seed: Option<u64>, mut overrides: Vec<Override>) -> ExitCode {
    if let Some(seed) = seed {
        overrides.push(Override::new("seed", toml::Value::Integer(seed as i64)));
    }
    let scenario = match load_scenario(path, &overrides) {
        Ok(s) => s,
        Err(e) => return config_failure(e),
    };
    let start = Instant::now();
    let log = match run(&scenario) {
        Ok(log) => log,
        Err(e) => return config_failure(ConfigError::Validation {
            origin: scenario.name.clone(),
            problems: vec![e.to_string()],
        }),
    };
    let wall = start.elapsed().as_secs_f64();
    let dir = out.unwrap_or_else(|| default_out(&scenario.name));
    if let Err(e) = write_artifacts(&dir, &scenario, &log) {
        return io_failure(&dir, e);
    }
    let sum = Summary::new(&scenario, &log);
    let switches: String = sum
        .switches
        .iter()
        .map(|w| format!(", {}→{} at {:.2} s", w.from, w.to, w.time))
        .collect();
    println!(
        "{}: {} after {} steps, {:.3} s simulated, {wall:.2} s wall{switches}; artifacts in {}",
        sum.scenario,
        sum.reason,
        sum.steps_completed,
        sum.end_time,
        dir.display()
    );
    if sum.completed {
        ExitCode::SUCCESS
    } else {
        eprintln!("run failed: {} {}", sum.reason, sum.detail);
        ExitCode::from(EXIT_RUN_FAILED)
    }
}

fn repro_command(corpus: Option<PathBuf>, out: Option<PathBuf>, overrides: Vec<Override>) -> ExitCode {
    let dir = corpus.unwrap_or_else(default_corpus);
    let corpus = match repro::load_corpus(&dir, &overrides) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let logs = repro::run_all(&corpus);
    let mut reports = Vec::new();
    for ((row, scenario), log) in corpus.iter().zip(logs) {
        let log = match log {
            Ok(log) => log,
            Err(e) => return config_failure(ConfigError::Validation {
                origin: scenario.name.clone(),
                problems: vec![e.to_string()],
            }),
        };
        if let Some(base) = &out {
            let d = base.join(&scenario.name);
            if let Err(e) = write_artifacts(&d, scenario, &log) {
                return io_failure(&d, e);
            }
        }
        reports.push(repro::check(row, scenario, &log));
    }
    print!("{}", repro::format_table(&reports));
    if reports.iter().all(|r| r.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUN_FAILED)
    }
}

fn validate_command(path: &Path, overrides: Vec<Override>) -> ExitCode {
    match load_scenario(path, &overrides) {
        Ok(s) => {
            print!("{}", effective_config(&s));
            ExitCode::SUCCESS
        }
        Err(e) => config_failure(e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, out, seed, overrides } => run_command(&scenario, out, seed, overrides),
        Command::Repro { corpus, out, overrides } => repro_command(corpus, out, overrides),
        Command::Validate { scenario, overrides } => validate_command(&scenario, overrides),
    }
}
