use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DiffusionError, NoiseSchedule, ScheduleSpec, TinyUNet, UNetConfig};
use crate::raster::Palette;

pub const CHECKPOINT_FORMAT: &str = "roomgen-ddpm";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained denoiser together with everything needed to sample from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub schedule: ScheduleSpec,
    pub palette_hash: String,
    pub unet: UNetConfig,
    /// `[width, height]` of training images.
    pub image_size: [usize; 2],
    pub params: Vec<f32>,
}

impl Checkpoint {
    pub fn new(model: &TinyUNet<f32>, schedule: &NoiseSchedule, palette: &Palette, image_size: [usize; 2]) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            schedule: schedule.spec,
            palette_hash: palette.hash(),
            unet: model.config().clone(),
            image_size,
            params: model.params().to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DiffusionError> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| DiffusionError::Checkpoint(e.to_string()))?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(DiffusionError::Checkpoint(format!(
                "unsupported format {} v{}",
                c.format, c.version
            )));
        }
        if c.params.iter().any(|p| !p.is_finite()) {
            return Err(DiffusionError::Checkpoint("non-finite parameter".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), DiffusionError> {
        std::fs::write(path, self.to_json()).map_err(|e| DiffusionError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, DiffusionError> {
        let text = std::fs::read_to_string(path).map_err(|e| DiffusionError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check_palette(&self, palette: &Palette) -> Result<(), DiffusionError> {
        let found = palette.hash();
        if found == self.palette_hash {
            Ok(())
        } else {
            Err(DiffusionError::PaletteMismatch {
                expected: self.palette_hash.clone(),
                found,
            })
        }
    }

    pub fn model(&self) -> Result<TinyUNet<f32>, DiffusionError> {
        TinyUNet::from_params(self.unet.clone(), self.params.clone())
    }

    pub fn schedule(&self) -> Result<NoiseSchedule, DiffusionError> {
        NoiseSchedule::from_spec(self.schedule)
    }
}
