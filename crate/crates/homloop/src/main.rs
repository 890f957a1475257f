use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homloop::{run, Command, ExperimentConfig, OutDir};

#[derive(Parser, Debug)]
#[command(name = "homloop", version, about = "Loop maps near a homoclinic orbit of a planar piecewise-smooth system")]
struct Cli {
    #[command(subcommand)]
    cmd: Sub,
    /// Experiment configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid runs
    #[arg(long, global = true, env = "HOMLOOP_THREADS")]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Spectrum, assumptions and scenario (JSON)
    Classify,
    /// Melnikov profile (CSV) and its zeros (JSON)
    Melnikov,
    /// Leaf anchors over the tau grid (CSV)
    Leaves,
    /// Barrier curves (CSV) and band report (JSON)
    Barriers,
    /// Loop map batch over the (d, tau) grid (CSV)
    Loop,
    /// Exponent fits of the loop batch (JSON)
    Scaling,
    /// Dulac stability probe (JSON)
    Stability,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Classify => Command::Classify,
            Sub::Melnikov => Command::Melnikov,
            Sub::Leaves => Command::Leaves,
            Sub::Barriers => Command::Barriers,
            Sub::Loop => Command::Loop,
            Sub::Scaling => Command::Scaling,
            Sub::Stability => Command::Stability,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: threads: {e}");
            return ExitCode::from(1);
        }
    }
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config is required");
        return ExitCode::from(1);
    };
    let res = ExperimentConfig::load(path).and_then(|cfg| {
        let dir = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
        let out = OutDir::new(&dir, cfg.output.prefix.as_deref())?;
        run(cli.cmd.into(), &cfg, &out)
    });
    match res {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
