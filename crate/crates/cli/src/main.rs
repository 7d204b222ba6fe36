use clap::{Parser, Subcommand};
use noisyctl_cli::commands;
use noisyctl_cli::config::ExperimentConfig;
use noisyctl_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "noisyctl", version, about = "Experiments on robust control from noisy data")]
struct Cli {
    /// JSON or `key = value` configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for grid cells; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Exact aggregate inequalities and boundaries of the worked example.
    Example1,
    /// Set boundaries and membership maps of a scalar study.
    EllipseSweep,
    /// Aggregate versus over-approximated set size along one trajectory.
    SizeRatio,
    /// Median design times per horizon.
    Timing,
    /// Fraction of solvable designs per noise bound and horizon.
    Heatmap,
    /// Both controller designs for the first grid cell.
    Design,
    /// Over-approximation of the per-sample intersection for the first cell.
    Overapprox,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Example1 => "example1",
            Command::EllipseSweep => "ellipse-sweep",
            Command::SizeRatio => "size-ratio",
            Command::Timing => "timing",
            Command::Heatmap => "heatmap",
            Command::Design => "design",
            Command::Overapprox => "overapprox",
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(cfg: &ExperimentConfig, file: &str, body: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(file);
    std::fs::write(&path, format!("{body}\n"))?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global().ok();
    let tables = match cli.command {
        Command::Example1 => commands::example1(&cfg)?,
        Command::EllipseSweep => commands::ellipse_sweep(&cfg)?,
        Command::SizeRatio => commands::size_ratio(&cfg)?,
        Command::Timing => commands::timing(&cfg)?,
        Command::Heatmap => commands::heatmap(&cfg)?,
        Command::Design => {
            for r in commands::design_both(&cfg)? {
                write_json(&cfg, &format!("design_{}.json", r.approach.name()), &r.to_json()?)?;
            }
            return Ok(());
        }
        Command::Overapprox => {
            let (r, ratio) = commands::overapprox(&cfg)?;
            write_json(&cfg, "overapprox.json", &r.to_json()?)?;
            println!("size ratio {ratio}");
            return Ok(());
        }
    };
    for t in tables {
        println!("{}", t.write_to_dir(cli.command.name(), &cfg, &cfg.out_dir)?.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("noisyctl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
