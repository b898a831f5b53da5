//! Decoding layout images back into objects and rooms by exact colour
//! inversion of the palette.

mod detect;
mod rooms;

use serde::{Deserialize, Serialize};

use crate::raster::{LayoutImage, Palette, Role};

pub use detect::{detect_objects, detections_to_json, detections_to_scene, Detection};
pub use rooms::{segment_rooms, segment_rooms_image, RoomMask, RoomType};

#[derive(Debug, thiserror::Error)]
pub enum PerceptionError {
    #[error("palette colours `{a}` and `{b}` are only {distance:.4} apart")]
    AmbiguousPalette { a: String, b: String, distance: f64 },
    #[error("config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    /// Largest RGB distance at which a pixel is attributed to a palette colour.
    pub tau: f64,
    /// Smallest allowed distance between two composited palette colours.
    pub min_separation: f64,
    /// Components with fewer pixels are dropped.
    pub min_area: usize,
    /// Rotations within this many degrees of a multiple of 90 are snapped.
    pub snap_deg: f64,
    /// Components filling less of their rectangle than this are split.
    pub split_fill_ratio: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            tau: 0.06,
            min_separation: 0.02,
            min_area: 9,
            snap_deg: 10.0,
            split_fill_ratio: 0.75,
        }
    }
}

impl DetectConfig {
    pub fn check(&self) -> Result<(), PerceptionError> {
        if !(self.tau > 0.0) || !(self.min_separation >= 0.0) || !(self.snap_deg >= 0.0 && self.snap_deg < 45.0) {
            return Err(PerceptionError::Config(
                "need tau > 0, min_separation >= 0 and 0 <= snap_deg < 45".into(),
            ));
        }
        if !(self.split_fill_ratio >= 0.0 && self.split_fill_ratio <= 1.0) {
            return Err(PerceptionError::Config("split_fill_ratio must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-pixel decoding result; indices refer to `Palette::entries`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "entry", rename_all = "lowercase")]
pub enum PixelLabel {
    Background,
    Body(usize),
    Marker(usize),
    Structure(usize),
}

impl PixelLabel {
    /// Palette entry of a furniture body or marker pixel.
    pub fn furniture(self) -> Option<usize> {
        match self {
            PixelLabel::Body(i) | PixelLabel::Marker(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<PixelLabel>,
}

impl LabelMap {
    pub fn get(&self, x: usize, y: usize) -> PixelLabel {
        self.labels[y * self.width + x]
    }
}

/// Every colour a correctly rendered pixel can take, with its label.
#[derive(Debug, Clone)]
pub struct ColorTable {
    entries: Vec<([f64; 3], PixelLabel)>,
    tau: f64,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl ColorTable {
    /// Fails when two distinct labels composite to colours closer than
    /// `min_separation`.
    pub fn new(palette: &Palette, config: &DetectConfig) -> Result<Self, PerceptionError> {
        config.check()?;
        let mut entries = vec![(palette.background.to_unit(), PixelLabel::Background)];
        for (i, e) in palette.entries.iter().enumerate() {
            if e.role == Role::Furniture {
                entries.push((palette.composite(e.color, e.alpha), PixelLabel::Body(i)));
                entries.push((palette.composite(e.color, palette.marker_alpha), PixelLabel::Marker(i)));
            } else {
                entries.push((palette.composite(e.color, e.alpha), PixelLabel::Structure(i)));
            }
        }
        let name = |l: PixelLabel| match l {
            PixelLabel::Background => "background".to_string(),
            PixelLabel::Body(i) => palette.entries[i].name.clone(),
            PixelLabel::Marker(i) => format!("{} marker", palette.entries[i].name),
            PixelLabel::Structure(i) => palette.entries[i].name.clone(),
        };
        for (k, a) in entries.iter().enumerate() {
            for b in &entries[k + 1..] {
                let d = dist(a.0, b.0);
                if d < config.min_separation {
                    return Err(PerceptionError::AmbiguousPalette {
                        a: name(a.1),
                        b: name(b.1),
                        distance: d,
                    });
                }
            }
        }
        Ok(ColorTable { entries, tau: config.tau })
    }

    /// Nearest palette colour within `tau`, else background.
    pub fn classify(&self, rgb: [f32; 3]) -> PixelLabel {
        let p = rgb.map(|v| v as f64);
        let mut best = (f64::INFINITY, PixelLabel::Background);
        for &(c, l) in &self.entries {
            let d = dist(p, c);
            if d < best.0 {
                best = (d, l);
            }
        }
        if best.0 <= self.tau {
            best.1
        } else {
            PixelLabel::Background
        }
    }

    pub fn color_of(&self, label: PixelLabel) -> Option<[f64; 3]> {
        self.entries.iter().find(|e| e.1 == label).map(|e| e.0)
    }
}

pub fn classify_pixels(img: &LayoutImage, palette: &Palette) -> Result<LabelMap, PerceptionError> {
    classify_pixels_with(img, palette, &DetectConfig::default())
}

pub fn classify_pixels_with(img: &LayoutImage, palette: &Palette, config: &DetectConfig) -> Result<LabelMap, PerceptionError> {
    let table = ColorTable::new(palette, config)?;
    Ok(label_image(img, &table))
}

pub(crate) fn label_image(img: &LayoutImage, table: &ColorTable) -> LabelMap {
    let labels = (0..img.width * img.height)
        .map(|i| table.classify([img.pixels[3 * i], img.pixels[3 * i + 1], img.pixels[3 * i + 2]]))
        .collect();
    LabelMap {
        width: img.width,
        height: img.height,
        labels,
    }
}
