//! Synthetic scenes used as fixtures: a row of rectangular rooms with
//! doors, windows and axis-aligned furniture.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Opening, OpeningKind, OrientedBox, Room, Scene, SceneError};
use crate::geometry::{sin_cos_deg, Vec2};
use crate::metrics::footprint_iou;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollisionMode {
    /// No two footprints come closer than `min_gap`.
    Forbid,
    /// At least one pair overlaps with footprint IoU ≥ 0.2.
    Force,
}

impl FromStr for CollisionMode {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forbid" => Ok(CollisionMode::Forbid),
            "force" => Ok(CollisionMode::Force),
            _ => Err(SceneError::Config(format!("unknown collision_mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub rooms: (usize, usize),
    pub furniture_per_room: (usize, usize),
    /// Room side length range, cm.
    pub room_size: (f64, f64),
    /// Minimum clearance between footprints in forbid mode, cm.
    pub min_gap: f64,
    /// Minimum distance from a footprint to a wall centre line, cm.
    pub wall_clearance: f64,
    pub collision_mode: CollisionMode,
    /// Placement attempts per object before giving up.
    pub max_retries: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            rooms: (1, 3),
            furniture_per_room: (2, 4),
            room_size: (320.0, 450.0),
            min_gap: 20.0,
            wall_clearance: 30.0,
            collision_mode: CollisionMode::Forbid,
            max_retries: 400,
        }
    }
}

impl ToyConfig {
    pub fn with_mode(mut self, mode: CollisionMode) -> Self {
        self.collision_mode = mode;
        self
    }

    /// Parse `key = value` lines over the defaults. Ranges are written
    /// `min..max`; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<ToyConfig, SceneError> {
        let mut cfg = ToyConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SceneError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || SceneError::Config(format!("line {}: bad value for `{k}`", lineno + 1));
            match k {
                "rooms" => cfg.rooms = parse_range(v).ok_or_else(bad)?,
                "furniture_per_room" => cfg.furniture_per_room = parse_range(v).ok_or_else(bad)?,
                "room_size" => cfg.room_size = parse_range(v).ok_or_else(bad)?,
                "min_gap" => cfg.min_gap = v.parse().map_err(|_| bad())?,
                "wall_clearance" => cfg.wall_clearance = v.parse().map_err(|_| bad())?,
                "collision_mode" => cfg.collision_mode = v.parse()?,
                "max_retries" => cfg.max_retries = v.parse().map_err(|_| bad())?,
                _ => return Err(SceneError::Config(format!("unknown key `{k}`"))),
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "rooms = {}..{}\nfurniture_per_room = {}..{}\nroom_size = {}..{}\nmin_gap = {}\nwall_clearance = {}\ncollision_mode = {}\nmax_retries = {}\n",
            self.rooms.0,
            self.rooms.1,
            self.furniture_per_room.0,
            self.furniture_per_room.1,
            self.room_size.0,
            self.room_size.1,
            self.min_gap,
            self.wall_clearance,
            match self.collision_mode {
                CollisionMode::Forbid => "forbid",
                CollisionMode::Force => "force",
            },
            self.max_retries
        )
    }

    fn check(&self) -> Result<(), SceneError> {
        let ok = self.rooms.0 >= 1
            && self.rooms.0 <= self.rooms.1
            && self.furniture_per_room.0 <= self.furniture_per_room.1
            && self.room_size.0 > 0.0
            && self.room_size.0 <= self.room_size.1
            && self.min_gap >= 0.0
            && self.wall_clearance >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SceneError::Config(format!("inconsistent ranges in {self:?}")))
        }
    }
}

fn parse_range<T: FromStr>(v: &str) -> Option<(T, T)> {
    let (a, b) = v.split_once("..")?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

const ROOM_KINDS: &[(&str, i64)] = &[
    ("living", 1),
    ("bedroom", 2),
    ("kitchen", 3),
    ("bathroom", 4),
    ("balcony", 5),
];

/// Category with length and width ranges in cm.
const FURNITURE: &[(&str, (f64, f64), (f64, f64))] = &[
    ("bed", (180.0, 210.0), (140.0, 180.0)),
    ("cabinet", (80.0, 160.0), (50.0, 62.0)),
    ("bedside_table", (48.0, 56.0), (48.0, 52.0)),
    ("table", (100.0, 150.0), (55.0, 80.0)),
    ("sofa", (180.0, 230.0), (85.0, 100.0)),
    ("tv_cabinet", (150.0, 210.0), (48.0, 55.0)),
    ("coffee_table", (90.0, 130.0), (50.0, 70.0)),
    ("dining_table", (120.0, 170.0), (80.0, 100.0)),
    ("shoe_cabinet", (80.0, 120.0), (48.0, 55.0)),
    ("single_sofa", (70.0, 95.0), (75.0, 90.0)),
    ("refrigerator", (60.0, 80.0), (60.0, 75.0)),
    ("toilet", (48.0, 55.0), (65.0, 75.0)),
    ("washbasin", (55.0, 80.0), (48.0, 55.0)),
    ("washing_machine", (58.0, 62.0), (58.0, 62.0)),
    ("shower", (80.0, 100.0), (80.0, 100.0)),
    ("dining_cabinet", (100.0, 150.0), (48.0, 55.0)),
];

/// Fresh attempts at furnishing a room before reporting it infeasible.
const ROOM_RESTARTS: usize = 25;

fn axis_extent(length: f64, width: f64, rotate: f64) -> (f64, f64) {
    let (s, c) = sin_cos_deg(rotate);
    (
        (c * length).abs() + (s * width).abs(),
        (s * length).abs() + (c * width).abs(),
    )
}

/// Deterministic synthetic scene for `seed`.
pub fn generate_toy_scene(seed: u64, config: &ToyConfig) -> Result<Scene, SceneError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_rooms = rng.gen_range(config.rooms.0..=config.rooms.1);
    let height = rng.gen_range(config.room_size.0..=config.room_size.1).round();
    let mut scene = Scene::default();
    let mut x0 = 0.0;
    for i in 0..n_rooms {
        let w = rng.gen_range(config.room_size.0..=config.room_size.1).round();
        let &(name, code) = ROOM_KINDS.choose(&mut rng).expect("non-empty");
        scene.rooms.push(Room {
            room_id: format!("R{i}"),
            room_name: name.to_string(),
            room_type: code,
            wall_points: vec![
                Vec2::new(x0, 0.0),
                Vec2::new(x0 + w, 0.0),
                Vec2::new(x0 + w, height),
                Vec2::new(x0, height),
            ],
        });
        scene.openings.push(Opening {
            kind: OpeningKind::Window,
            pos: [x0 + w * 0.5, 0.0, 90.0],
            length: (w * 0.4).min(150.0).round(),
            width: 12.0,
            height: 110.0,
            rotate: 0.0,
        });
        if i + 1 < n_rooms {
            let y = (height * rng.gen_range(0.3..0.7)).round();
            scene.openings.push(Opening {
                kind: OpeningKind::Door,
                pos: [x0 + w, y, 0.0],
                length: 90.0,
                width: 12.0,
                height: 210.0,
                rotate: 90.0,
            });
        }
        x0 += w;
    }

    let rooms = scene.rooms.clone();
    let mut per_room: Vec<Vec<usize>> = Vec::new();
    for room in &rooms {
        let lo = room.wall_points[0];
        let hi = room.wall_points[2];
        let k = rng.gen_range(config.furniture_per_room.0..=config.furniture_per_room.1);
        let base = scene.furniture.len();
        let mut last_err = None;
        for _ in 0..ROOM_RESTARTS {
            scene.furniture.truncate(base);
            last_err = None;
            for _ in 0..k {
                match place_one(&mut rng, config, lo, hi, &scene.furniture) {
                    Ok(b) => scene.furniture.push(b),
                    Err(e) => {
                        last_err = Some(e);
                        break;
                    }
                }
            }
            if last_err.is_none() {
                break;
            }
        }
        if let Some(e) = last_err {
            return Err(e);
        }
        per_room.push((base..scene.furniture.len()).collect());
    }

    if config.collision_mode == CollisionMode::Force {
        force_collision(&mut rng, &mut scene, &per_room)?;
    }
    Ok(scene)
}

fn place_one(
    rng: &mut ChaCha8Rng,
    config: &ToyConfig,
    lo: Vec2,
    hi: Vec2,
    placed: &[OrientedBox],
) -> Result<OrientedBox, SceneError> {
    let inner_lo = lo + Vec2::new(config.wall_clearance, config.wall_clearance);
    let inner_hi = hi - Vec2::new(config.wall_clearance, config.wall_clearance);
    for _ in 0..config.max_retries {
        let &(cat, lr, wr) = FURNITURE.choose(rng).expect("non-empty");
        let length = rng.gen_range(lr.0..=lr.1).round();
        let width = rng.gen_range(wr.0..=wr.1).round();
        let rotate = [0.0, 90.0, 180.0, 270.0][rng.gen_range(0..4)];
        let (ex, ey) = axis_extent(length, width, rotate);
        let (fx, fy) = (inner_hi.x - inner_lo.x - ex, inner_hi.y - inner_lo.y - ey);
        if fx < 0.0 || fy < 0.0 {
            continue;
        }
        let cx = (inner_lo.x + ex * 0.5 + rng.gen_range(0.0..=fx)).round();
        let cy = (inner_lo.y + ey * 0.5 + rng.gen_range(0.0..=fy)).round();
        let cand = OrientedBox {
            category: cat.to_string(),
            pos: [cx, cy, 0.0],
            length,
            width,
            height: rng.gen_range(40.0..=200.0_f64).round(),
            rotate,
        };
        let clear = placed.iter().all(|p| {
            let (px, py) = axis_extent(p.length, p.width, p.rotate);
            let gap_x = (cx - p.pos[0]).abs() - (ex + px) * 0.5;
            let gap_y = (cy - p.pos[1]).abs() - (ey + py) * 0.5;
            gap_x.max(gap_y) >= config.min_gap
        });
        let inside = cx - ex * 0.5 >= inner_lo.x - 1e-9
            && cx + ex * 0.5 <= inner_hi.x + 1e-9
            && cy - ey * 0.5 >= inner_lo.y - 1e-9
            && cy + ey * 0.5 <= inner_hi.y + 1e-9;
        if clear && inside {
            return Ok(cand);
        }
    }
    Err(SceneError::Placement(format!(
        "no collision-free spot after {} attempts in room spanning ({}, {})..({}, {})",
        config.max_retries, lo.x, lo.y, hi.x, hi.y
    )))
}

/// Drag one object of a same-room pair onto the other until their IoU lands
/// in `[0.25, 0.6]`.
fn force_collision(rng: &mut ChaCha8Rng, scene: &mut Scene, per_room: &[Vec<usize>]) -> Result<(), SceneError> {
    let candidates: Vec<&Vec<usize>> = per_room.iter().filter(|m| m.len() >= 2).collect();
    if candidates.is_empty() {
        return Err(SceneError::Placement(
            "force mode needs a room with at least two objects".into(),
        ));
    }
    let members = candidates[rng.gen_range(0..candidates.len())];
    let mut picks = members.clone();
    picks.shuffle(rng);
    let (ia, ib) = (picks[0], picks[1]);
    let a = scene.furniture[ia].clone();
    let mut b = scene.furniture[ib].clone();
    let target = rng.gen_range(0.25..=0.6);
    b.rotate = a.rotate;
    let overlap_at_center = {
        let mut c = b.clone();
        c.pos = a.pos;
        footprint_iou(&a, &c)
    };
    if overlap_at_center < target {
        let k = rng.gen_range(0.8..=1.0);
        b.length = (a.length * k).round();
        b.width = (a.width * k).round();
    }
    let dir = Vec2::new(1.0, 0.0).rotate_deg(rng.gen_range(0.0..360.0));
    let at = |r: f64| {
        let mut moved = b.clone();
        moved.pos[0] = a.pos[0] + dir.x * r;
        moved.pos[1] = a.pos[1] + dir.y * r;
        moved
    };
    let (mut near, mut far) = (0.0, a.length.max(a.width) + b.length.max(b.width));
    for _ in 0..60 {
        let mid = 0.5 * (near + far);
        if footprint_iou(&a, &at(mid)) >= target {
            near = mid;
        } else {
            far = mid;
        }
    }
    b = at(near);
    debug_assert!(footprint_iou(&a, &b) >= 0.2);
    scene.furniture[ib] = b;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{scene_piou, scene_por};

    #[test]
    fn forbid_mode_has_no_collisions() {
        for seed in 0..50 {
            let s = generate_toy_scene(seed, &ToyConfig::default()).unwrap();
            assert_eq!(scene_por(&s.furniture), 0.0, "seed {seed}");
            assert_eq!(scene_piou(&s.furniture), 0.0, "seed {seed}");
            assert!(crate::scene::validate_scene(&s).violations.is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn force_mode_collides() {
        let cfg = ToyConfig::default().with_mode(CollisionMode::Force);
        for seed in 0..50 {
            let s = generate_toy_scene(seed, &cfg).unwrap();
            assert!(scene_por(&s.furniture) > 0.0, "seed {seed}");
            let n = s.furniture.len();
            let best = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| footprint_iou(&s.furniture[i], &s.furniture[j]))
                .fold(0.0, f64::max);
            assert!(best >= 0.2, "seed {seed}: {best}");
        }
    }

    #[test]
    fn deterministic() {
        let cfg = ToyConfig::default();
        assert_eq!(generate_toy_scene(1, &cfg).unwrap(), generate_toy_scene(1, &cfg).unwrap());
        assert_ne!(generate_toy_scene(1, &cfg).unwrap(), generate_toy_scene(2, &cfg).unwrap());
    }

    #[test]
    fn infeasible_config_errors() {
        let cfg = ToyConfig {
            room_size: (100.0, 100.0),
            furniture_per_room: (3, 3),
            max_retries: 20,
            ..ToyConfig::default()
        };
        assert!(matches!(generate_toy_scene(0, &cfg), Err(SceneError::Placement(_))));
    }

    #[test]
    fn kv_config_round_trip() {
        let cfg = ToyConfig {
            rooms: (2, 2),
            collision_mode: CollisionMode::Force,
            ..ToyConfig::default()
        };
        assert_eq!(ToyConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
        assert!(ToyConfig::from_kv("rooms = 3..1").is_err());
        assert!(ToyConfig::from_kv("colour = red").is_err());
    }
}
