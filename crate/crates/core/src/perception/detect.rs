use std::collections::{BinaryHeap, VecDeque};

use serde::Serialize;
use serde_json::json;

use super::{label_image, ColorTable, DetectConfig, LabelMap, PerceptionError, PixelLabel};
use crate::geometry::{normalize_deg, Vec2};
use crate::raster::{LayoutImage, Palette, WorldTransform};
use crate::scene::{OrientedBox, Scene};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub category: String,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    /// `(x, y)` pixels of the component, in scan order.
    pub pixel_mask: Vec<(u32, u32)>,
    /// Fraction of the fitted rectangle's pixels that carry the category.
    pub confidence: f64,
    /// 0 when the front side could not be read from the marker strip.
    pub orientation_confidence: f64,
}

/// Decode every furniture item in `img`. Boxes are mapped to world
/// centimetres through `transform`, or the image's own transform.
pub fn detect_objects(
    img: &LayoutImage,
    palette: &Palette,
    transform: Option<WorldTransform>,
    config: &DetectConfig,
) -> Result<Vec<Detection>, PerceptionError> {
    let table = ColorTable::new(palette, config)?;
    let labels = label_image(img, &table);
    let t = transform.unwrap_or(img.transform);
    let mut out = Vec::new();
    for comp in components(&labels) {
        let parts = if comp.pixels.len() >= config.min_area && fill_ratio(&comp.pixels) < config.split_fill_ratio {
            split_component(&comp.pixels)
        } else {
            vec![comp.pixels]
        };
        for pixels in parts {
            if pixels.len() < config.min_area {
                continue;
            }
            let markers: Vec<(u32, u32)> = pixels
                .iter()
                .copied()
                .filter(|&(x, y)| matches!(labels.get(x as usize, y as usize), PixelLabel::Marker(_)))
                .collect();
            let fit = fit_box(&pixels, &markers, config.snap_deg);
            let category = palette.entries[comp.entry].name.clone();
            let matching = rect_pixels(&fit, labels.width, labels.height)
                .filter(|&(x, y)| labels.get(x, y).furniture() == Some(comp.entry))
                .count();
            let total = rect_pixels(&fit, labels.width, labels.height).count().max(1);
            let mut bbox = OrientedBox::new(
                category.clone(),
                t.to_world(fit.center),
                fit.length / t.scale,
                fit.width / t.scale,
                fit.rotate,
            );
            bbox.height = 0.0;
            out.push(Detection {
                category,
                bbox,
                pixel_mask: pixels,
                confidence: (matching as f64 / total as f64).min(1.0),
                orientation_confidence: fit.orientation_confidence,
            });
        }
    }
    Ok(out)
}

struct Component {
    entry: usize,
    pixels: Vec<(u32, u32)>,
}

/// 8-connected components of furniture pixels (body and marker together)
/// per palette entry, in top-left scan order.
fn components(labels: &LabelMap) -> Vec<Component> {
    let (w, h) = (labels.width, labels.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] {
            continue;
        }
        let Some(entry) = labels.labels[start].furniture() else {
            continue;
        };
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push((x as u32, y as u32));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && labels.labels[j].furniture() == Some(entry) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        pixels.sort_by_key(|&(x, y)| (y, x));
        out.push(Component { entry, pixels });
    }
    out
}

/// Convex hull of the pixel squares' corners (monotone chain).
fn pixel_hull(pixels: &[(u32, u32)]) -> Vec<Vec2> {
    let mut pts: Vec<(i64, i64)> = Vec::with_capacity(pixels.len() * 4);
    for &(x, y) in pixels {
        let (x, y) = (x as i64, y as i64);
        pts.extend([(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]);
    }
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts.iter().map(|&(x, y)| Vec2::new(x as f64, y as f64)).collect();
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull.iter().map(|&(x, y)| Vec2::new(x as f64, y as f64)).collect()
}

/// Extents of `pts` along the unit axis `e` and its perpendicular.
fn extents(pts: &[Vec2], e: Vec2) -> (f64, f64, f64, f64) {
    let n = Vec2::new(-e.y, e.x);
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        let (u, v) = (p.dot(e), p.dot(n));
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    (u0, u1, v0, v1)
}

/// Minimum-area enclosing rectangle by rotating calipers over hull edges;
/// returns the first axis.
fn min_area_axis(hull: &[Vec2]) -> Vec2 {
    let mut best = (f64::INFINITY, Vec2::new(1.0, 0.0));
    for i in 0..hull.len() {
        let d = hull[(i + 1) % hull.len()] - hull[i];
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        let e = d.scale(1.0 / len);
        let (u0, u1, v0, v1) = extents(hull, e);
        let area = (u1 - u0) * (v1 - v0);
        if area < best.0 - 1e-9 {
            best = (area, e);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy)]
struct Fit {
    center: Vec2,
    length: f64,
    width: f64,
    rotate: f64,
    orientation_confidence: f64,
}

fn axis_for(rotate: f64) -> Vec2 {
    let (s, c) = crate::geometry::sin_cos_deg(rotate);
    Vec2::new(c, s)
}

fn fit_box(pixels: &[(u32, u32)], markers: &[(u32, u32)], snap_deg: f64) -> Fit {
    let hull = pixel_hull(pixels);
    let e = min_area_axis(&hull);
    let n = Vec2::new(-e.y, e.x);
    let (u0, u1, v0, v1) = extents(&hull, e);
    let center = e.scale((u0 + u1) * 0.5) + n.scale((v0 + v1) * 0.5);

    // front direction from the marker strip centroid
    let mut front = None;
    let mut confidence = 0.0;
    if !markers.is_empty() {
        let m = markers
            .iter()
            .fold(Vec2::default(), |acc, &(x, y)| acc + Vec2::new(x as f64 + 0.5, y as f64 + 0.5))
            .scale(1.0 / markers.len() as f64);
        let d = m - center;
        let (pe, pn) = (d.dot(e), d.dot(n));
        if pe.abs().max(pn.abs()) >= 0.25 {
            confidence = pe.abs().max(pn.abs()) / (pe.abs() + pn.abs());
            front = Some(if pe.abs() > pn.abs() {
                e.scale(pe.signum())
            } else {
                n.scale(pn.signum())
            });
        }
    }
    // rotate = angle taking local +y (front) onto `front`
    let raw = match front {
        Some(f) => normalize_deg((-f.x).atan2(f.y).to_degrees()),
        None => 0.0,
    };
    let nearest = (raw / 90.0).round() * 90.0;
    let rotate = if (raw - nearest).abs() <= snap_deg || front.is_none() {
        normalize_deg(nearest)
    } else {
        raw
    };
    // refit extents in the final frame
    let a = axis_for(rotate);
    let b = Vec2::new(-a.y, a.x);
    let (u0, u1, v0, v1) = extents(&hull, a);
    Fit {
        center: a.scale((u0 + u1) * 0.5) + b.scale((v0 + v1) * 0.5),
        length: u1 - u0,
        width: v1 - v0,
        rotate,
        orientation_confidence: confidence,
    }
}

/// Pixels whose centres fall inside the fitted rectangle.
fn rect_pixels(fit: &Fit, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let a = axis_for(fit.rotate);
    let b = Vec2::new(-a.y, a.x);
    let (hl, hw) = (fit.length * 0.5, fit.width * 0.5);
    let r = hl.hypot(hw) + 1.0;
    let x0 = (fit.center.x - r).floor().max(0.0) as usize;
    let y0 = (fit.center.y - r).floor().max(0.0) as usize;
    let x1 = ((fit.center.x + r).ceil().max(0.0) as usize).min(w);
    let y1 = ((fit.center.y + r).ceil().max(0.0) as usize).min(h);
    let c = fit.center;
    (y0..y1).flat_map(move |y| (x0..x1).map(move |x| (x, y))).filter(move |&(x, y)| {
        let d = Vec2::new(x as f64 + 0.5, y as f64 + 0.5) - c;
        let (u, v) = (d.dot(a), d.dot(b));
        u >= -hl && u < hl && v >= -hw && v < hw
    })
}

fn fill_ratio(pixels: &[(u32, u32)]) -> f64 {
    let hull = pixel_hull(pixels);
    let e = min_area_axis(&hull);
    let (u0, u1, v0, v1) = extents(&hull, e);
    let area = (u1 - u0) * (v1 - v0);
    if area <= 0.0 {
        1.0
    } else {
        pixels.len() as f64 / area
    }
}

/// Marker-based watershed on the chamfer distance transform: seeds are the
/// connected cores above 60% of the peak distance.
fn split_component(pixels: &[(u32, u32)]) -> Vec<Vec<(u32, u32)>> {
    let (x_min, y_min) = pixels.iter().fold((u32::MAX, u32::MAX), |a, p| (a.0.min(p.0), a.1.min(p.1)));
    let (x_max, y_max) = pixels.iter().fold((0, 0), |a, p| (a.0.max(p.0), a.1.max(p.1)));
    // local grid with a one-pixel empty border
    let gw = (x_max - x_min + 3) as usize;
    let gh = (y_max - y_min + 3) as usize;
    let idx = |x: u32, y: u32| (y - y_min + 1) as usize * gw + (x - x_min + 1) as usize;
    let mut inside = vec![false; gw * gh];
    for &(x, y) in pixels {
        inside[idx(x, y)] = true;
    }
    const INF: u32 = u32::MAX / 2;
    let mut d: Vec<u32> = inside.iter().map(|&b| if b { INF } else { 0 }).collect();
    let fwd = [(-1i64, -1i64, 4u32), (0, -1, 3), (1, -1, 4), (-1, 0, 3)];
    for y in 1..gh - 1 {
        for x in 1..gw - 1 {
            let i = y * gw + x;
            for &(dx, dy, c) in &fwd {
                let j = ((y as i64 + dy) as usize) * gw + (x as i64 + dx) as usize;
                d[i] = d[i].min(d[j] + c);
            }
        }
    }
    for y in (1..gh - 1).rev() {
        for x in (1..gw - 1).rev() {
            let i = y * gw + x;
            for &(dx, dy, c) in &fwd {
                let j = ((y as i64 - dy) as usize) * gw + (x as i64 - dx) as usize;
                d[i] = d[i].min(d[j] + c);
            }
        }
    }
    let peak = *d.iter().max().unwrap_or(&0);
    let level = (peak as f64 * 0.6).ceil() as u32;
    let mut label = vec![0usize; gw * gh];
    let mut seeds = 0;
    let neighbours = |i: usize| {
        let (x, y) = ((i % gw) as i64, (i / gw) as i64);
        (-1i64..=1)
            .flat_map(move |dy| (-1i64..=1).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx != 0 || dy != 0)
            .map(move |(dx, dy)| ((y + dy) as usize) * gw + (x + dx) as usize)
    };
    for i in 0..gw * gh {
        if d[i] >= level && inside[i] && label[i] == 0 {
            seeds += 1;
            label[i] = seeds;
            let mut stack = vec![i];
            while let Some(k) = stack.pop() {
                for j in neighbours(k) {
                    if inside[j] && d[j] >= level && label[j] == 0 {
                        label[j] = seeds;
                        stack.push(j);
                    }
                }
            }
        }
    }
    if seeds < 2 {
        return vec![pixels.to_vec()];
    }
    // flood from the seeds, highest distance first; ties by index
    let mut heap = BinaryHeap::new();
    for i in 0..gw * gh {
        if label[i] != 0 {
            for j in neighbours(i) {
                if inside[j] && label[j] == 0 {
                    heap.push((d[j], std::cmp::Reverse(j), label[i]));
                }
            }
        }
    }
    while let Some((_, std::cmp::Reverse(j), l)) = heap.pop() {
        if label[j] != 0 {
            continue;
        }
        label[j] = l;
        for k in neighbours(j) {
            if inside[k] && label[k] == 0 {
                heap.push((d[k], std::cmp::Reverse(k), l));
            }
        }
    }
    let mut parts = vec![Vec::new(); seeds];
    for &(x, y) in pixels {
        parts[label[idx(x, y)] - 1].push((x, y));
    }
    parts
}

/// JSON list in the scene furniture schema plus detection confidences.
pub fn detections_to_json(dets: &[Detection]) -> String {
    let items: Vec<_> = dets
        .iter()
        .map(|d| {
            json!({
                "type": d.category,
                "pos": d.bbox.pos,
                "length": d.bbox.length,
                "width": d.bbox.width,
                "height": d.bbox.height,
                "rotate": d.bbox.rotate,
                "confidence": d.confidence,
                "orientation_confidence": d.orientation_confidence,
                "pixels": d.pixel_mask.len(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&items).expect("detections serialize")
}

/// Structure of `base` with the detected boxes as furniture.
pub fn detections_to_scene(base: &Scene, dets: &[Detection]) -> Scene {
    Scene {
        rooms: base.rooms.clone(),
        openings: base.openings.clone(),
        furniture: dets.iter().map(|d| d.bbox.clone()).collect(),
    }
}
