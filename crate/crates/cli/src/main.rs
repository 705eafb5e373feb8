//! `raddiff`: run Marshak-wave simulations and convergence studies.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use raddiff_core::driver::{
    preset, run_simulation, run_study, RunConfig, StudyConfig, StudyMode, PRESET_NAMES,
};

#[derive(Parser, Debug)]
#[command(
    name = "raddiff",
    version,
    about = "Implicit adaptive-mesh radiation diffusion solver"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Worker threads for data-parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized inputs. Simulations themselves are deterministic
    /// and do not consume it; it is recorded in the log.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write its artefacts.
    Run {
        /// Run configuration (TOML). Defaults to the `--preset`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in configuration used when no `--config` is given.
        #[arg(long, default_value = "marshak")]
        preset: String,
        /// Output directory for steps.csv, regrid.csv, snapshots/ and summary.txt.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the final time.
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Run a convergence or efficiency study and print its tables.
    Study {
        /// temporal, spatial or efficiency.
        #[arg(long, default_value = "efficiency")]
        mode: StudyMode,
        /// Study configuration (TOML); defaults to the built-in study set-up.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory to write `study_<mode>.txt` into.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the final time of the efficiency runs.
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Print a built-in configuration as TOML.
    PresetDump {
        /// One of the built-in presets.
        #[arg(default_value = "marshak")]
        name: String,
        /// Directory to write `<name>.toml` into instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    if let Some(seed) = cli.common.seed {
        log::info!("seed {seed}");
    }
    match cli.command {
        Command::Run {
            config,
            preset: name,
            out,
            t_final,
        } => run(config.as_deref(), &name, &out, t_final),
        Command::Study {
            mode,
            config,
            out,
            t_final,
        } => study(mode, config.as_deref(), out.as_deref(), t_final),
        Command::PresetDump { name, out } => preset_dump(&name, out.as_deref()),
    }
}

fn load_config(config: Option<&Path>, name: &str) -> Result<RunConfig> {
    match config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("cannot load {}", path.display()))
        }
        None => Ok(preset(name)?),
    }
}

fn run(config: Option<&Path>, name: &str, out: &Path, t_final: Option<f64>) -> Result<ExitCode> {
    let mut cfg = load_config(config, name)?;
    if let Some(t) = t_final {
        cfg.time.t_final = t;
    }
    log::info!(
        "running `{}` to t = {} into {}",
        cfg.name,
        cfg.time.t_final,
        out.display()
    );
    let result =
        run_simulation(&cfg, Some(out)).with_context(|| format!("run `{}` failed", cfg.name))?;
    print!("{}", result.summary);
    Ok(ExitCode::SUCCESS)
}

fn study(
    mode: StudyMode,
    config: Option<&Path>,
    out: Option<&Path>,
    t_final: Option<f64>,
) -> Result<ExitCode> {
    let mut cfg = match config {
        Some(path) => {
            StudyConfig::load(path).with_context(|| format!("cannot load {}", path.display()))?
        }
        None => StudyConfig::default(),
    };
    if let Some(t) = t_final {
        cfg.efficiency.t_final = t;
    }
    let report = run_study(mode, &cfg)?.to_string();
    print!("{report}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("study_{}.txt", mode_name(mode))), &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn mode_name(mode: StudyMode) -> &'static str {
    match mode {
        StudyMode::Temporal => "temporal",
        StudyMode::Spatial => "spatial",
        StudyMode::Efficiency => "efficiency",
    }
}

fn preset_dump(name: &str, out: Option<&Path>) -> Result<ExitCode> {
    let cfg =
        preset(name).with_context(|| format!("known presets: {}", PRESET_NAMES.join(", ")))?;
    let text = cfg.to_toml()?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("{name}.toml")), text)?;
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
