//! Colour-coded top-down rasterization of scenes, floor plans and parent
//! surfaces.

mod draw;
mod palette;
mod png_io;

pub use draw::{
    fit_transform, parent_transform, rasterize_fine_layout, rasterize_floorplan, rasterize_layout, rasterize_parent_boundary,
    rasterize_room_types, room_type_gray, BoundaryImage, FINE_WINDOW_CM,
};
pub use palette::{Category, Level, Palette, Rgb, Role, FINE_PARENTS, FURNITURE_ALPHA, MARKER_ALPHA};
pub use png_io::{decode_png, encode_png, read_png, write_png};

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("category `{0}` is not in the palette")]
    MissingCategory(String),
    #[error("palette has a duplicate {0}")]
    PaletteDuplicate(String),
    #[error("palette: {0}")]
    PaletteFormat(String),
    #[error("scene extent is degenerate ({0})")]
    DegenerateExtent(String),
    #[error("png: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pixel dimensions of an output image plus the fit margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub margin: usize,
}

impl Canvas {
    pub const fn square(size: usize, margin: usize) -> Self {
        Canvas {
            width: size,
            height: size,
            margin,
        }
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas::square(256, 8)
    }
}

/// Uniform-scale affine map from world centimetres to pixel coordinates:
/// `pixel = world * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldTransform {
    pub scale: f64,
    pub offset: Vec2,
}

impl WorldTransform {
    pub fn identity() -> Self {
        WorldTransform {
            scale: 1.0,
            offset: Vec2::default(),
        }
    }

    pub fn to_pixel(&self, w: Vec2) -> Vec2 {
        w.scale(self.scale) + self.offset
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        (p - self.offset).scale(1.0 / self.scale)
    }
}

/// Row-major RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
    pub transform: WorldTransform,
}

impl LayoutImage {
    pub fn filled(width: usize, height: usize, color: [f64; 3], transform: WorldTransform) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend(color.iter().map(|&c| c as f32));
        }
        LayoutImage {
            width,
            height,
            pixels,
            transform,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    /// Alpha-over: `src * alpha + dst * (1 - alpha)`.
    pub fn blend(&mut self, x: usize, y: usize, src: [f64; 3], alpha: f64) {
        let i = (y * self.width + x) * 3;
        for k in 0..3 {
            let d = self.pixels[i + k] as f64;
            self.pixels[i + k] = (src[k] * alpha + d * (1.0 - alpha)) as f32;
        }
    }

    /// Snap every channel to the nearest 8-bit level, as a PNG round trip would.
    pub fn quantized(&self) -> LayoutImage {
        let mut out = self.clone();
        for v in &mut out.pixels {
            *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        }
        out
    }

    pub fn mean_abs_diff(&self, other: &LayoutImage) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        let s: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum();
        s / self.pixels.len().max(1) as f64
    }
}
