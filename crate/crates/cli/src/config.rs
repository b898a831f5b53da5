use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use roomgen_core::diffusion::{ScheduleSpec, TrainConfig, UNetConfig};
use roomgen_core::perception::DetectConfig;
use roomgen_core::raster::{Canvas, Palette};
use roomgen_core::scene::ToyConfig;
use roomgen_core::scenegraph::{builtin_assets, AssetDatabase, GraphConfig};

use crate::output::{read_text, Failure};

/// Step window and repetition count for the OOD score. The window is given
/// on the 1000-step scale and rescaled to the checkpoint's schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OodConfig {
    pub t_lo: usize,
    pub t_hi: usize,
    pub iters: usize,
}

impl Default for OodConfig {
    fn default() -> Self {
        OodConfig {
            t_lo: 900,
            t_hi: 1000,
            iters: 100,
        }
    }
}

/// Effective settings of one invocation: config file values with command
/// line overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    /// House-level palette JSON; the built-in palette when unset.
    pub palette: Option<PathBuf>,
    /// Fine-level palette JSON; the built-in one when unset.
    pub fine_palette: Option<PathBuf>,
    /// Asset database JSON; the built-in database when unset.
    pub assets: Option<PathBuf>,
    pub canvas: Canvas,
    pub schedule: ScheduleSpec,
    pub model: UNetConfig,
    pub train: TrainConfig,
    pub detect: DetectConfig,
    pub graph: GraphConfig,
    pub toy: ToyConfig,
    pub ood: OodConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            palette: None,
            fine_palette: None,
            assets: None,
            canvas: Canvas::square(64, 2),
            schedule: ScheduleSpec::default(),
            model: UNetConfig::default(),
            train: TrainConfig::default(),
            detect: DetectConfig::default(),
            graph: GraphConfig::default(),
            toy: ToyConfig::default(),
            ood: OodConfig::default(),
        }
    }
}

impl RunConfig {
    /// Read a TOML config; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, Failure> {
        let text = read_text(path)?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::new("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.palette, &mut cfg.fine_palette, &mut cfg.assets].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn check(&self) -> Result<(), Failure> {
        let c = self.canvas;
        if c.width == 0 || c.height == 0 || 2 * c.margin >= c.width.min(c.height) {
            return Err(Failure::new("config", "canvas must be non-empty and larger than twice the margin"));
        }
        if self.threads == 0 {
            return Err(Failure::new("config", "threads must be at least 1"));
        }
        self.detect.check()?;
        self.train.check()?;
        Ok(())
    }

    pub fn house_palette(&self) -> Result<Palette, Failure> {
        load_palette(self.palette.as_deref(), Palette::house)
    }

    pub fn fine_palette(&self) -> Result<Palette, Failure> {
        load_palette(self.fine_palette.as_deref(), Palette::fine)
    }

    pub fn asset_db(&self) -> Result<AssetDatabase, Failure> {
        match &self.assets {
            None => Ok(builtin_assets()),
            Some(p) => {
                let name = p.file_stem().map_or("assets".into(), |s| s.to_string_lossy().into_owned());
                Ok(AssetDatabase::from_json(&name, &read_text(p)?)?)
            }
        }
    }
}

fn load_palette(path: Option<&Path>, builtin: fn() -> Palette) -> Result<Palette, Failure> {
    let p = match path {
        None => builtin(),
        Some(p) => Palette::from_json(&read_text(p)?)?,
    };
    p.check()?;
    Ok(p)
}
