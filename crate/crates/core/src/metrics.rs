//! Collision metrics over object footprints and corpus statistics.
//!
//! POR is the fraction of unordered object pairs whose footprints overlap by
//! more than [`EPS_AREA`]; PIoU is the mean footprint IoU over all unordered
//! pairs. Corpus values are arithmetic means of the per-scene values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{ccw, clip_convex, point_in_polygon, polygon_area};
use crate::scene::{OrientedBox, Scene};

/// Overlap (cm²) above which a pair counts as colliding; shared edges do not.
pub const EPS_AREA: f64 = 1.0;

/// Exact area of intersection of two box footprints.
pub fn footprint_intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let pa = ccw(a.footprint().to_vec());
    let pb = ccw(b.footprint().to_vec());
    polygon_area(&clip_convex(&pa, &pb))
}

pub fn footprint_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = footprint_intersection_area(a, b);
    let union = a.footprint_area() + b.footprint_area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Pairwise overlap ratio; 0 for fewer than two objects.
pub fn scene_por(objects: &[OrientedBox]) -> f64 {
    let n = objects.len();
    if n < 2 {
        return 0.0;
    }
    let hits = pairs(n)
        .filter(|&(i, j)| footprint_intersection_area(&objects[i], &objects[j]) > EPS_AREA)
        .count();
    hits as f64 / (n * (n - 1) / 2) as f64
}

/// Mean pairwise IoU; 0 for fewer than two objects.
pub fn scene_piou(objects: &[OrientedBox]) -> f64 {
    let n = objects.len();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = pairs(n).map(|(i, j)| footprint_iou(&objects[i], &objects[j])).sum();
    total / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub por: f64,
    pub piou: f64,
    pub pair_count: usize,
    pub empty_room_count: usize,
    pub room_count: usize,
}

/// Metrics of one scene. Rooms are interior rooms only; a room is empty
/// when no furniture centre falls inside it.
pub fn scene_metrics(scene: &Scene) -> SceneMetrics {
    let n = scene.furniture.len();
    let rooms: Vec<_> = scene.interior_rooms().filter(|r| r.wall_points.len() >= 3).collect();
    let empty = rooms
        .iter()
        .filter(|r| {
            !scene
                .furniture
                .iter()
                .any(|f| point_in_polygon(f.center(), &r.wall_points))
        })
        .count();
    SceneMetrics {
        por: scene_por(&scene.furniture),
        piou: scene_piou(&scene.furniture),
        pair_count: n * n.saturating_sub(1) / 2,
        empty_room_count: empty,
        room_count: rooms.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub scene_count: usize,
    pub mean_por: f64,
    pub mean_piou: f64,
    pub empty_room_rate: f64,
    pub total_rooms: usize,
    pub empty_rooms: usize,
    pub category_histogram: BTreeMap<String, usize>,
    /// Number of scenes per interior room count.
    pub room_count_histogram: BTreeMap<usize, usize>,
    /// Number of scenes per furniture count.
    pub furniture_count_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("corpus is empty")]
    EmptyCorpus,
}

pub fn corpus_metrics<'a, I>(scenes: I) -> Result<CorpusMetrics, MetricsError>
where
    I: IntoIterator<Item = &'a Scene>,
{
    let mut count = 0usize;
    let (mut por, mut piou) = (0.0, 0.0);
    let (mut rooms, mut empty) = (0usize, 0usize);
    let mut cats = BTreeMap::new();
    let mut room_hist = BTreeMap::new();
    let mut furn_hist = BTreeMap::new();
    for s in scenes {
        let m = scene_metrics(s);
        count += 1;
        por += m.por;
        piou += m.piou;
        rooms += m.room_count;
        empty += m.empty_room_count;
        *room_hist.entry(m.room_count).or_insert(0) += 1;
        *furn_hist.entry(s.furniture.len()).or_insert(0) += 1;
        for f in &s.furniture {
            *cats.entry(f.category.clone()).or_insert(0) += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(CorpusMetrics {
        scene_count: count,
        mean_por: por / count as f64,
        mean_piou: piou / count as f64,
        empty_room_rate: if rooms == 0 { 0.0 } else { empty as f64 / rooms as f64 },
        total_rooms: rooms,
        empty_rooms: empty,
        category_histogram: cats,
        room_count_histogram: room_hist,
        furniture_count_histogram: furn_hist,
    })
}

impl CorpusMetrics {
    /// Aligned two-column text table. FID/KID are not computed.
    pub fn to_table(&self) -> String {
        let rows = [
            ("scenes", self.scene_count.to_string()),
            ("POR", format!("{:.4}", self.mean_por)),
            ("PIoU", format!("{:.4}", self.mean_piou)),
            ("empty-room rate", format!("{:.4}", self.empty_room_rate)),
            ("rooms", self.total_rooms.to_string()),
            ("FID", "n/a".to_string()),
            ("KID", "n/a".to_string()),
        ];
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<w$}  {v:>10}");
        }
        s
    }

    pub fn category_csv(&self) -> String {
        let mut s = String::from("category,count\n");
        for (k, v) in &self.category_histogram {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    pub fn room_count_csv(&self) -> String {
        let mut s = String::from("rooms,scenes\n");
        for (k, v) in &self.room_count_histogram {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    pub fn furniture_count_csv(&self) -> String {
        let mut s = String::from("furniture,scenes\n");
        for (k, v) in &self.furniture_count_histogram {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }
}
