use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

/// Design and analysis of group-velocity-matched down-conversion sources.
#[derive(Parser, Debug)]
#[command(name = "spdc-forge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for synthetic data; overrides `synth.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a config key, e.g. `--set process.temperature_c=185`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the group-velocity-matched triple and the poling period.
    Design,
    /// Marginal spectra over a temperature list plus a FWHM summary.
    Sweep,
    /// Joint spectral amplitude, spectrum and correlation time at one temperature.
    Jsa,
    /// Coincidence analysis of tag files.
    AnalyzeTags {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Seeded synthetic tag stream.
    SynthTags,
}

fn run(cli: Cli) -> Result<String, commands::CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| config::ConfigError::Invalid("--config is required".into()))?;
    let cfg = config::load(&config_path, &cli.overrides)?;
    let config_dir = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config::ConfigError::Invalid("--threads must be at least 1".into()).into());
        }
        // only fails when a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Design => commands::design(&cfg, &config_dir, &out),
        Command::Sweep => commands::sweep(&cfg, &config_dir, &out),
        Command::Jsa => commands::jsa_export(&cfg, &config_dir, &out),
        Command::AnalyzeTags { files } => commands::analyze_tags(&cfg, &files, &out),
        Command::SynthTags => commands::synth_tags(&cfg, cli.seed, &out),
    }
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
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
