use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pcf_cli::{load_config, run, Command, RunError};

/// Band structures, corner exponents and convergence studies for
/// photonic-crystal fibres.
#[derive(Debug, Parser)]
#[command(name = "pcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory [default: the config's `output`, else ./out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0, value_name = "K")]
    threads: usize,

    /// Eigensolver tolerance, overriding the config.
    #[arg(long, global = true, value_name = "T")]
    tol: Option<f64>,

    /// Seed for randomized checks, overriding the config.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Band diagram along the k-path, with gaps and a gnuplot script.
    Bands,
    /// Singular exponents of every interface corner.
    Exponents,
    /// Eigenvalue convergence over the cutoff ladder.
    Converge,
    /// Invariant suite; exits 1 if any check fails.
    Validate,
    /// h and E sampled on a grid for one Bloch mode.
    Field,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Bands => Command::Bands,
            Sub::Exponents => Command::Exponents,
            Sub::Converge => Command::Converge,
            Sub::Validate => Command::Validate,
            Sub::Field => Command::Field,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pcf {}: {e}", Command::from(cli.command).name());
            if let RunError::ValidationFailed { files, .. } = &e {
                for f in files {
                    println!("{}", f.display());
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, RunError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        RunError::Config(pcf_cli::ConfigError::Schema {
            path: "--config".into(),
            message: "a configuration file is required".into(),
        })
    })?;
    let mut cfg = load_config(path)?;
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(RunError::Config(pcf_cli::ConfigError::Schema {
                path: "--tol".into(),
                message: format!("must be positive and finite, got {t}"),
            }));
        }
        cfg.tol = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| {
                RunError::Config(pcf_cli::ConfigError::Schema {
                    path: "--threads".into(),
                    message: e.to_string(),
                })
            })?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("./out"));
    run(cli.command.into(), &cfg, &out)
}
