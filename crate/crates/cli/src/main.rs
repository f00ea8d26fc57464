use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixlab::experiments::{
    emit_config, parse_configs, run_and_write, ExperimentConfig, ExperimentError, ExperimentKind,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_ORACLE: u8 = 2;
const EXIT_RUN: u8 = 3;

#[derive(Parser)]
#[command(name = "mixlab", version, about = "Typical versus worst-case mixing experiments for open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment section in a TOML config file.
    Run {
        config: PathBuf,
        /// Output root; each experiment writes to <out>/<experiment>/.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Overrides the seed of every section.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List the available experiments.
    ListExperiments,
    /// Compare every fast channel with its dense oracle; exits 2 on failure.
    CheckOracles {
        #[arg(long)]
        seed: Option<u64>,
        /// Random (state, s, t) triples per model.
        #[arg(long)]
        samples: Option<usize>,
        /// Also write the oracle tables under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default config section of one experiment.
    DefaultConfig { experiment: String },
}

fn fail(code: u8, err: &ExperimentError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn error_code(err: &ExperimentError) -> u8 {
    if err.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_RUN
    }
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, workers: Option<usize>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut configs = match parse_configs(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    if configs.is_empty() {
        eprintln!("error: {} contains no experiment sections", config.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    for c in &mut configs {
        let p = c.run_params_mut();
        if let Some(s) = seed {
            p.seed = s;
        }
        if let Some(w) = workers {
            p.workers = w;
        }
        if let Err(e) = c.validate() {
            return fail(EXIT_CONFIG, &e);
        }
    }
    for c in &configs {
        eprintln!("running {} (seed {})", c.name(), c.run_params().seed);
        match run_and_write(c, &out) {
            Ok((output, dir)) => {
                for w in &output.warnings {
                    eprintln!("warning: {w}");
                }
                println!("{}", dir.display());
            }
            Err(e) => return fail(error_code(&e), &e),
        }
    }
    ExitCode::SUCCESS
}

fn check_oracles(seed: Option<u64>, samples: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let ExperimentConfig::OracleChecks(mut c) = ExperimentKind::OracleChecks.default_config() else {
        unreachable!("default oracle config has the oracle kind")
    };
    if let Some(s) = seed {
        c.run.seed = s;
    }
    if let Some(n) = samples {
        c.run.n_samples = n;
    }
    let config = ExperimentConfig::OracleChecks(c);
    let result = match &out {
        Some(dir) => run_and_write(&config, dir).map(|(o, _)| o),
        None => mixlab::experiments::run_experiment(&config),
    };
    let output = match result {
        Ok(o) => o,
        Err(e) => return fail(error_code(&e), &e),
    };
    let t = &output.summary;
    let idx = |name: &str| t.column_index(name).expect("oracle table column");
    let (model, check, resid, tol, pass) = (idx("model"), idx("check"), idx("max_residual"), idx("tolerance"), idx("pass"));
    let mut all = true;
    for row in t.rows() {
        let ok = row[pass] == mixlab::experiments::Cell::Bool(true);
        all &= ok;
        let r = row[resid].as_real().unwrap_or(f64::NAN);
        let tl = row[tol].as_real().unwrap_or(f64::NAN);
        let name = |c: &mixlab::experiments::Cell| match c {
            mixlab::experiments::Cell::Text(s) => s.clone(),
            other => format!("{other:?}"),
        };
        println!(
            "{} {:<16} {:<24} residual {r:.3e} (tol {tl:.0e})",
            if ok { "PASS" } else { "FAIL" },
            name(&row[model]),
            name(&row[check]),
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ORACLE)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, seed, workers } => run(config, out, seed, workers),
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<22} {}", k.name(), k.description());
            }
            ExitCode::SUCCESS
        }
        Command::CheckOracles { seed, samples, out } => check_oracles(seed, samples, out),
        Command::DefaultConfig { experiment } => match ExperimentKind::from_name(&experiment) {
            Some(k) => match emit_config(&k.default_config()) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_RUN, &e),
            },
            None => {
                eprintln!("error: unknown experiment `{experiment}`; see `mixlab list-experiments`");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
