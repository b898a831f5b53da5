mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::{Failure, Result};

#[derive(Debug, Parser)]
#[command(name = "roomgen", version, about = "Collision-aware indoor layout synthesis")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML config file; command-line flags take precedence.
    #[arg(long, global = true, env = "ROOMGEN_CONFIG")]
    config: Option<PathBuf>,
    /// Print the effective config as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-scene and per-batch parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// House-level palette JSON.
    #[arg(long, global = true)]
    palette: Option<PathBuf>,
    /// Asset database JSON.
    #[arg(long, global = true)]
    assets: Option<PathBuf>,
    /// Square canvas side in pixels.
    #[arg(long, global = true)]
    size: Option<usize>,
    /// Canvas margin in pixels.
    #[arg(long, global = true)]
    margin: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check scene JSON files for structural problems.
    Validate(commands::ValidateArgs),
    /// Corpus statistics: POR/PIoU, empty-room rate and histograms.
    Stats(commands::StatsArgs),
    /// Render a scene to layout and floor-plan PNGs.
    Rasterize(commands::RasterizeArgs),
    /// Generate synthetic toy scenes.
    GenToy(commands::GenToyArgs),
    /// Train the denoiser on a corpus of scenes.
    Train(commands::TrainArgs),
    /// Sample a layout for a floor plan.
    Sample(commands::SampleArgs),
    /// Decode furniture boxes from a layout PNG.
    Detect(commands::DetectArgs),
    /// Build the scene graph and its SVG drawing.
    Graph(commands::GraphArgs),
    /// POR/PIoU report for scenes or detection files.
    Metrics(commands::MetricsArgs),
    /// Out-of-distribution score of a layout under a checkpoint.
    Ood(commands::OodArgs),
    /// Floor plan to sampled layout, detections, scene graph and SVG.
    Pipeline(commands::PipelineArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Stats(_) => "stats",
            Command::Rasterize(_) => "rasterize",
            Command::GenToy(_) => "gen-toy",
            Command::Train(_) => "train",
            Command::Sample(_) => "sample",
            Command::Detect(_) => "detect",
            Command::Graph(_) => "graph",
            Command::Metrics(_) => "metrics",
            Command::Ood(_) => "ood",
            Command::Pipeline(_) => "pipeline",
        }
    }
}

fn effective_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.threads {
        cfg.threads = t;
    }
    if let Some(p) = &g.palette {
        cfg.palette = Some(p.clone());
    }
    if let Some(p) = &g.assets {
        cfg.assets = Some(p.clone());
    }
    if let Some(s) = g.size {
        cfg.canvas.width = s;
        cfg.canvas.height = s;
    }
    if let Some(m) = g.margin {
        cfg.canvas.margin = m;
    }
    cfg.train.threads = cfg.threads;
    cfg.train.seed = cfg.seed;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = effective_config(&cli.global)?;
    commands::apply_overrides(&cli.command, &mut cfg);
    cfg.check()?;
    if cli.global.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| Failure::new("config", e.to_string()))?;
    let name = cli.command.name();
    match cli.command {
        Command::Validate(a) => commands::validate(a, &cfg),
        Command::Stats(a) => commands::stats(a, &cfg, name),
        Command::Rasterize(a) => commands::rasterize(a, &cfg, name),
        Command::GenToy(a) => commands::gen_toy(a, &cfg, name),
        Command::Train(a) => commands::train(a, &cfg, name),
        Command::Sample(a) => commands::sample(a, &cfg, name),
        Command::Detect(a) => commands::detect(a, &cfg, name),
        Command::Graph(a) => commands::graph(a, &cfg, name),
        Command::Metrics(a) => commands::metrics(a, &cfg, name),
        Command::Ood(a) => commands::ood(a, &cfg, name),
        Command::Pipeline(a) => commands::pipeline(a, &cfg, name),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprint!("{e}");
            }
            let msg = e.to_string();
            let msg = msg.trim().trim_start_matches("error: ");
            eprintln!("{}", Failure::new("usage", msg).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::FAILURE
        }
    }
}
