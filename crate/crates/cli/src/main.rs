use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entropy_dg::config::{ConfigError, ExperimentConfig, ExperimentKind};
use entropy_dg::presets;
use entropy_dg::runner::{self, RunResult, EXIT_CONFIG, EXIT_OK};

#[derive(Parser)]
#[command(name = "entropy-dg", version, about = "Log-variable DG experiments for the Fisher-KPP equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `out_dir` from the config, then `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named batch; each run writes into `<out>/<run name>`.
    Preset {
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the diagnostics battery and write certify.json.
    Certify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the available presets.
    ListPresets,
}

fn report(result: &RunResult, dir: &std::path::Path) -> i32 {
    let code = result.exit_code();
    if let Err(e) = runner::write_artifacts(result, dir) {
        eprintln!("{}: cannot write artifacts to {}: {e}", result.config.name, dir.display());
        return EXIT_CONFIG;
    }
    let failed: Vec<&str> = result.certificates.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let status = result.summary()["status"].as_str().unwrap_or("").to_string();
    if failed.is_empty() {
        println!("{}: {status} ({:.2} s) -> {}", result.config.name, result.wall_time, dir.display());
    } else {
        println!("{}: {status}, failed certificates: {} -> {}", result.config.name, failed.join(", "), dir.display());
    }
    code
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}

fn single(cfg: ExperimentConfig, out: Option<PathBuf>) -> i32 {
    match runner::execute(&cfg) {
        Ok(r) => report(&r, &out_dir(&cfg, out)),
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}

fn main_code(cli: Cli) -> Result<i32, ConfigError> {
    Ok(match cli.command {
        Command::Run { config, out } => single(ExperimentConfig::from_file(&config)?, out),
        Command::Certify { config, out } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::from_file(&p)?,
                None => ExperimentConfig { name: "certify".into(), ..ExperimentConfig::default() },
            };
            cfg.kind = ExperimentKind::Certify;
            let out = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            single(cfg, Some(out))
        }
        Command::Preset { name, out } => {
            let preset = presets::find(&name)?;
            let results = runner::run_batch(&preset.runs);
            let mut code = runner::batch_exit_code(&results);
            for (cfg, r) in preset.runs.iter().zip(&results) {
                match r {
                    Ok(r) => code = code.max(report(r, &out.join(&cfg.name))),
                    Err(e) => eprintln!("{}: {e}", cfg.name),
                }
            }
            code
        }
        Command::ListPresets => {
            for p in presets::all() {
                println!("{:<12} {} ({} runs)", p.name, p.description, p.runs.len());
            }
            EXIT_OK
        }
    })
}

fn main() -> ExitCode {
    let code = match main_code(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(code as u8)
}
