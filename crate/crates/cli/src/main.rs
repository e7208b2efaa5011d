use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghostbench_cli::config::{Command, RawConfig};
use ghostbench_cli::run::{run, RunError};

/// Classical ghost imaging simulator.
///
/// Any config key can be given as `--key value` after the command; flags win
/// over the config file. `--no-key` sets a boolean key to false.
#[derive(Parser)]
#[command(name = "ghostbench", version)]
struct Cli {
    /// `key = value` config file with `[section]` headers.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a mask ensemble and export a few masks.
    Masks(Overrides),
    /// Simulate bucket measurements of an object.
    Simulate(Overrides),
    /// Simulate and reconstruct, reporting RMSE and SNR.
    Reconstruct(Overrides),
    /// Estimate and fit the ensemble PSF.
    Psf(Overrides),
    /// Run an SNR sweep and write a CSV.
    Sweep(Overrides),
    /// Replicate the shutterless CCD experiments.
    Zhang(Overrides),
}

#[derive(Args)]
struct Overrides {
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    keys: Vec<String>,
}

impl Cmd {
    fn split(self) -> (Command, Vec<String>) {
        match self {
            Cmd::Masks(o) => (Command::Masks, o.keys),
            Cmd::Simulate(o) => (Command::Simulate, o.keys),
            Cmd::Reconstruct(o) => (Command::Reconstruct, o.keys),
            Cmd::Psf(o) => (Command::Psf, o.keys),
            Cmd::Sweep(o) => (Command::Sweep, o.keys),
            Cmd::Zhang(o) => (Command::Zhang, o.keys),
        }
    }
}

fn apply_overrides(raw: &mut RawConfig, cmd: Command, args: &[String]) -> Result<(), String> {
    let mut it = args.iter().peekable();
    while let Some(arg) = it.next() {
        let flag = arg
            .strip_prefix("--")
            .ok_or_else(|| format!("expected `--key value`, got `{arg}`"))?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.replace('-', "_"), v.to_string()),
            None => {
                let key = flag.replace('-', "_");
                if let Some(k) = key.strip_prefix("no_") {
                    (k.to_string(), "false".to_string())
                } else {
                    match it.next_if(|v| !v.starts_with("--")) {
                        Some(v) => (key, v.clone()),
                        None => (key, "true".to_string()),
                    }
                }
            }
        };
        match key.as_str() {
            "seed" | "output_dir" => raw.set_top(&key, &value),
            _ => raw.set(cmd, &key, &value),
        }
    }
    Ok(())
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("GHOSTBENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("GHOSTBENCH_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, args) = cli.command.split();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let text = match &cli.config {
        Some(p) => match fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(4);
            }
        },
        None => String::new(),
    };
    let cfg = RawConfig::parse(&text).and_then(|mut raw| {
        apply_overrides(&mut raw, cmd, &args).map_err(ghostbench_cli::ConfigError::Invalid)?;
        raw.resolve(Some(cmd))
    });
    let result = cfg.map_err(RunError::from).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
