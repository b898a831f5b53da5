mod layout;
mod model;
mod scene;

use std::path::{Path, PathBuf};

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use roomgen_core::raster::{decode_png, LayoutImage};
use roomgen_core::scene::{parse_furniture_list, parse_scene, Scene};

use crate::config::RunConfig;
use crate::output::{read_bytes, read_text, Failure, Result};
use crate::Command;

pub use layout::{detect, graph, pipeline};
pub use model::{ood, sample, train};
pub use scene::{gen_toy, metrics, rasterize, stats, validate};

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Scene JSON files or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write the JSON report here (`-` for stdout).
    #[arg(short, long)]
    pub output: Option<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Directory for metrics.json, metrics.txt and the histogram CSVs.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory; files are named `<stem>_layout.png` and
    /// `<stem>_floorplan.png`.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write `<stem>_rooms.png` with grey room-type fills.
    #[arg(long)]
    pub room_types: bool,
}

#[derive(Debug, Args)]
pub struct GenToyArgs {
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// `forbid` or `force`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Output directory, or `-` for a single scene on stdout.
    #[arg(short, long)]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Scene JSON files or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Checkpoint JSON path.
    #[arg(short, long)]
    pub output: String,
    /// Loss curve CSV; defaults to `<checkpoint>.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Floor-plan PNG used as the condition.
    #[arg(long)]
    pub floorplan: PathBuf,
    /// Layout PNG path (`-` for stdout).
    #[arg(short, long)]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Layout PNG.
    pub input: PathBuf,
    /// Decode with the fine-level palette.
    #[arg(long)]
    pub fine: bool,
    #[arg(short, long)]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Detections JSON; the scene's own furniture is used when absent.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Scene JSON supplying rooms and openings.
    #[arg(long, conflicts_with = "floorplan")]
    pub scene: Option<PathBuf>,
    /// Floor-plan PNG to segment into rooms.
    #[arg(long)]
    pub floorplan: Option<PathBuf>,
    /// Fine-level checkpoint; supported parents get sampled children.
    #[arg(long)]
    pub fine_checkpoint: Option<PathBuf>,
    /// Scene-graph JSON path (`-` for stdout).
    #[arg(short, long)]
    pub output: String,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Scene JSON or detections JSON files, or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_parser = ["json", "table"], default_value = "json")]
    pub format: String,
    #[arg(short, long)]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct OodArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub floorplan: PathBuf,
    /// Step window on the 1000-step scale.
    #[arg(long)]
    pub t_lo: Option<usize>,
    #[arg(long)]
    pub t_hi: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(short, long)]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Floor-plan PNG; rooms are segmented from it.
    #[arg(long, required_unless_present = "scene")]
    pub floorplan: Option<PathBuf>,
    /// Scene JSON: its floor plan is rasterized and its rooms and openings
    /// feed the graph.
    #[arg(long, conflicts_with = "floorplan")]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub fine_checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Fold subcommand flags that mirror config keys into the config.
pub fn apply_overrides(cmd: &Command, cfg: &mut RunConfig) {
    match cmd {
        Command::GenToy(a) => {
            if let Some(m) = &a.mode {
                if let Ok(m) = m.parse() {
                    cfg.toy.collision_mode = m;
                }
            }
        }
        Command::Train(a) => {
            if let Some(e) = a.epochs {
                cfg.train.epochs = e;
            }
            if let Some(lr) = a.lr {
                cfg.train.learning_rate = lr;
            }
            if let Some(b) = a.batch_size {
                cfg.train.batch_size = b;
            }
        }
        Command::Ood(a) => {
            if let Some(v) = a.t_lo {
                cfg.ood.t_lo = v;
            }
            if let Some(v) = a.t_hi {
                cfg.ood.t_hi = v;
            }
            if let Some(v) = a.iters {
                cfg.ood.iters = v;
            }
        }
        _ => {}
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or("scene".into(), |s| s.to_string_lossy().into_owned())
}

fn load_scene(p: &Path) -> Result<Scene> {
    parse_scene(&read_bytes(p)?).map_err(|e| Failure::from(e).at(p))
}

fn load_png(p: &Path) -> Result<LayoutImage> {
    decode_png(&read_bytes(p)?).map_err(|e| Failure::from(e).at(p))
}

/// Scene file, or a detections file read as a room-less scene.
fn load_scene_or_detections(p: &Path) -> Result<Scene> {
    let text = read_text(p)?;
    let Ok(v) = serde_json::from_str::<Value>(&text) else {
        return load_scene(p);
    };
    if v.get("rooms").is_some() {
        return load_scene(p);
    }
    Ok(Scene {
        furniture: detections_from_value(&v).map_err(|e| e.at(p))?,
        ..Scene::default()
    })
}

/// Boxes from a detections document: a bare list or `{"detections": [..]}`.
fn detections_from_value(v: &Value) -> Result<Vec<roomgen_core::scene::OrientedBox>> {
    let list = match v {
        Value::Array(_) => v,
        Value::Object(m) => m
            .get("detections")
            .ok_or_else(|| Failure::new("input", "expected a `detections` list"))?,
        _ => return Err(Failure::new("input", "expected a detections list")),
    };
    Ok(parse_furniture_list(list.to_string().as_bytes())?)
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
