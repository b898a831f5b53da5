//! Scene data model: rooms, doors/windows and furniture as oriented boxes.
//! All lengths are centimetres and angles are degrees.

mod json;
mod toy;
mod validate;

pub use json::{parse_furniture_list, parse_scene, serialize_scene};
pub use toy::{generate_toy_scene, CollisionMode, ToyConfig};
pub use validate::{validate_scene, validate_scene_with, ValidationReport, Violation};

use serde::{Deserialize, Serialize};

use crate::geometry::{rect_corners, Vec2};

/// Room name / type used for the house outline loop, which is not an
/// interior room.
pub const OUTLINE_ROOM_NAME: &str = "out_room";
pub const OUTLINE_ROOM_TYPE: i64 = 0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub rooms: Vec<Room>,
    pub openings: Vec<Opening>,
    pub furniture: Vec<OrientedBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub room_id: String,
    pub room_name: String,
    pub room_type: i64,
    pub wall_points: Vec<Vec2>,
}

impl Room {
    /// The outline loop encloses the whole house rather than one room.
    pub fn is_outline(&self) -> bool {
        self.room_type == OUTLINE_ROOM_TYPE || self.room_name == OUTLINE_ROOM_NAME
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpeningKind {
    Door,
    Window,
}

impl OpeningKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpeningKind::Door => "door",
            OpeningKind::Window => "window",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    pub kind: OpeningKind,
    /// Box centre x, y and height above the floor.
    pub pos: [f64; 3],
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub rotate: f64,
}

impl Opening {
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.pos[0], self.pos[1])
    }

    pub fn footprint(&self) -> [Vec2; 4] {
        rect_corners(self.center(), self.length, self.width, self.rotate)
    }
}

/// Category-tagged box with its footprint rotated counter-clockwise about
/// the vertical axis through `pos`. Local +y is the front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub category: String,
    pub pos: [f64; 3],
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub rotate: f64,
}

impl OrientedBox {
    pub fn new(category: impl Into<String>, center: Vec2, length: f64, width: f64, rotate: f64) -> Self {
        OrientedBox {
            category: category.into(),
            pos: [center.x, center.y, 0.0],
            length,
            width,
            height: 1.0,
            rotate,
        }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.pos[0], self.pos[1])
    }

    pub fn footprint(&self) -> [Vec2; 4] {
        rect_corners(self.center(), self.length, self.width, self.rotate)
    }

    pub fn footprint_area(&self) -> f64 {
        self.length * self.width
    }

    pub fn translated(&self, d: Vec2) -> Self {
        let mut b = self.clone();
        b.pos[0] += d.x;
        b.pos[1] += d.y;
        b
    }
}

impl Scene {
    pub fn interior_rooms(&self) -> impl Iterator<Item = &Room> {
        self.rooms.iter().filter(|r| !r.is_outline())
    }

    /// Copy of the scene with all furniture removed.
    pub fn without_furniture(&self) -> Scene {
        Scene {
            rooms: self.rooms.clone(),
            openings: self.openings.clone(),
            furniture: Vec::new(),
        }
    }

    /// Every vertex of every element, for bounding-box computations.
    pub fn extent_points(&self) -> Vec<Vec2> {
        let mut pts: Vec<Vec2> = self.rooms.iter().flat_map(|r| r.wall_points.iter().copied()).collect();
        pts.extend(self.openings.iter().flat_map(|o| o.footprint()));
        pts.extend(self.furniture.iter().flat_map(|f| f.footprint()));
        pts
    }

    pub fn translated(&self, d: Vec2) -> Scene {
        let mut s = self.clone();
        for r in &mut s.rooms {
            for p in &mut r.wall_points {
                *p = *p + d;
            }
        }
        for o in &mut s.openings {
            o.pos[0] += d.x;
            o.pos[1] += d.y;
        }
        for f in &mut s.furniture {
            f.pos[0] += d.x;
            f.pos[1] += d.y;
        }
        s
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SceneError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("missing required key `{key}` at {path}")]
    MissingKey { path: String, key: String },
    #[error("type error at {path}: expected {expected}")]
    Type { path: String, expected: &'static str },
    #[error("cannot place objects: {0}")]
    Placement(String),
    #[error("invalid toy config: {0}")]
    Config(String),
}
