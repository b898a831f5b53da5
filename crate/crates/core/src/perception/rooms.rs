use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{label_image, ColorTable, DetectConfig, PerceptionError, PixelLabel};
use crate::geometry::{signed_area, Vec2};
use crate::raster::{LayoutImage, Palette};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomType {
    Code(i64),
    Unknown,
    /// Region connected to the image border; not a room.
    Exterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomMask {
    /// Room id when taken from a scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub room_type: RoomType,
    /// Room name when taken from a scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `(x, y)` pixels; empty on the scene path.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pixels: Vec<(u32, u32)>,
    /// Boundary in world centimetres.
    pub polygon: Vec<Vec2>,
}

/// Exact room polygons from the scene's wall points.
pub fn segment_rooms(scene: &Scene) -> Vec<RoomMask> {
    scene
        .rooms
        .iter()
        .map(|r| RoomMask {
            id: Some(r.room_id.clone()),
            room_type: RoomType::Code(r.room_type),
            name: Some(r.room_name.clone()),
            pixels: Vec::new(),
            polygon: r.wall_points.clone(),
        })
        .collect()
}

/// Regions of non-structure pixels separated by walls, doors and windows
/// (4-connected). Regions reaching the border are exterior; room types come
/// from grey room-code fills when present.
pub fn segment_rooms_image(img: &LayoutImage, palette: &Palette, config: &DetectConfig) -> Result<Vec<RoomMask>, PerceptionError> {
    let table = ColorTable::new(palette, config)?;
    let labels = label_image(img, &table);
    let (w, h) = (img.width, img.height);
    let barrier: Vec<bool> = labels.labels.iter().map(|l| matches!(l, PixelLabel::Structure(_))).collect();
    let mut region = vec![usize::MAX; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if barrier[start] || region[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        region[start] = id;
        stack.push(start);
        let mut pixels = Vec::new();
        let mut touches_border = false;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x as u32, y as u32));
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                touches_border = true;
            }
            let mut visit = |j: usize| {
                if !barrier[j] && region[j] == usize::MAX {
                    region[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        pixels.sort_by_key(|&(x, y)| (y, x));
        let room_type = if touches_border {
            RoomType::Exterior
        } else {
            gray_code(img, &pixels).map_or(RoomType::Unknown, RoomType::Code)
        };
        let polygon = trace_outline(&pixels)
            .into_iter()
            .map(|p| img.transform.to_world(p))
            .collect();
        out.push(RoomMask {
            id: None,
            room_type,
            name: None,
            pixels,
            polygon,
        });
    }
    out.retain(|r| r.pixels.len() >= config.min_area);
    Ok(out)
}

/// Most frequent grey level in the region, decoded to a room code.
fn gray_code(img: &LayoutImage, pixels: &[(u32, u32)]) -> Option<i64> {
    let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
    for &(x, y) in pixels {
        let [r, g, b] = img.get(x as usize, y as usize);
        if (r - g).abs() < 0.01 && (g - b).abs() < 0.01 && r < 0.99 && r > 0.15 {
            let k = ((1.0 - r as f64) / 0.05).round() as i64;
            if (1..=16).contains(&k) {
                *votes.entry(k).or_insert(0) += 1;
            }
        }
    }
    votes.into_iter().max_by_key(|&(k, n)| (n, -k)).map(|(k, _)| k)
}

/// Outer boundary of a pixel set along pixel edges, collinear vertices removed.
fn trace_outline(pixels: &[(u32, u32)]) -> Vec<Vec2> {
    let set: std::collections::HashSet<(i64, i64)> = pixels.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    // directed edges with the region on the right (y down)
    let mut edges: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    let mut add = |a: (i64, i64), b: (i64, i64)| edges.entry(a).or_default().push(b);
    for &(x, y) in &set {
        if !set.contains(&(x, y - 1)) {
            add((x, y), (x + 1, y));
        }
        if !set.contains(&(x + 1, y)) {
            add((x + 1, y), (x + 1, y + 1));
        }
        if !set.contains(&(x, y + 1)) {
            add((x + 1, y + 1), (x, y + 1));
        }
        if !set.contains(&(x - 1, y)) {
            add((x, y + 1), (x, y));
        }
    }
    let mut starts: Vec<(i64, i64)> = edges.keys().copied().collect();
    starts.sort_unstable();
    let mut best: Vec<(i64, i64)> = Vec::new();
    let mut best_area = 0.0;
    for s in starts {
        while let Some(first) = edges.get_mut(&s).and_then(|v| v.pop()) {
            let mut lp = vec![s];
            let mut prev = s;
            let mut cur = first;
            while cur != s {
                lp.push(cur);
                let d = (cur.0 - prev.0, cur.1 - prev.1);
                let outs = edges.get_mut(&cur).expect("closed boundary");
                let prefs = [(-d.1, d.0), d, (d.1, -d.0)];
                let k = prefs
                    .iter()
                    .find_map(|p| outs.iter().position(|o| (o.0 - cur.0, o.1 - cur.1) == *p))
                    .unwrap_or(0);
                let next = outs.swap_remove(k);
                prev = cur;
                cur = next;
            }
            let poly: Vec<Vec2> = lp.iter().map(|&(x, y)| Vec2::new(x as f64, y as f64)).collect();
            let a = signed_area(&poly).abs();
            if a > best_area {
                best_area = a;
                best = lp;
            }
        }
    }
    simplify(&best)
}

fn simplify(lp: &[(i64, i64)]) -> Vec<Vec2> {
    let n = lp.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b, c) = (lp[(i + n - 1) % n], lp[i], lp[(i + 1) % n]);
        let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
        if cross != 0 {
            out.push(Vec2::new(b.0 as f64, b.1 as f64));
        }
    }
    out
}
