use std::path::Path;

use super::{LayoutImage, RasterError, WorldTransform};

const TRANSFORM_KEY: &str = "roomgen:transform";
const META_KEY: &str = "roomgen:meta";

fn png_err(e: impl std::fmt::Display) -> RasterError {
    RasterError::Png(e.to_string())
}

/// Encode as 8-bit RGB PNG. The world transform, and optional metadata, go
/// into text chunks so decoding restores the pixel ↔ world mapping.
pub fn encode_png(img: &LayoutImage, meta: Option<&str>) -> Result<Vec<u8>, RasterError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let transform = serde_json::to_string(&img.transform).map_err(png_err)?;
        enc.add_text_chunk(TRANSFORM_KEY.into(), transform).map_err(png_err)?;
        if let Some(m) = meta {
            enc.add_text_chunk(META_KEY.into(), m.to_string()).map_err(png_err)?;
        }
        let mut w = enc.write_header().map_err(png_err)?;
        let bytes: Vec<u8> = img
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_image_data(&bytes).map_err(png_err)?;
    }
    Ok(out)
}

/// Decode an 8-bit RGB or RGBA PNG. Images without an embedded transform get
/// the identity transform.
pub fn decode_png(bytes: &[u8]) -> Result<LayoutImage, RasterError> {
    let mut dec = png::Decoder::new(bytes);
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(png_err)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let channels = match frame.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(RasterError::Png(format!("unsupported colour type {other:?}"))),
    };
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut pixels = Vec::with_capacity(w * h * 3);
    for px in buf[..frame.buffer_size()].chunks_exact(channels) {
        let rgb = if channels < 3 { [px[0]; 3] } else { [px[0], px[1], px[2]] };
        pixels.extend(rgb.iter().map(|&c| c as f32 / 255.0));
    }
    let transform = reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .find(|t| t.keyword == TRANSFORM_KEY)
        .and_then(|t| serde_json::from_str::<WorldTransform>(&t.text).ok())
        .unwrap_or_else(WorldTransform::identity);
    Ok(LayoutImage {
        width: w,
        height: h,
        pixels,
        transform,
    })
}

pub fn write_png(img: &LayoutImage, path: &Path, meta: Option<&str>) -> Result<(), RasterError> {
    std::fs::write(path, encode_png(img, meta)?)?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<LayoutImage, RasterError> {
    decode_png(&std::fs::read(path)?)
}
