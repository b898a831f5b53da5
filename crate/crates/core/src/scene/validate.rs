use serde::Serialize;

use super::Scene;
use crate::geometry::{point_in_polygon, signed_area};
use crate::raster::{Palette, Role};

/// One problem found in a scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DegenerateRoom { room_id: String, reason: String },
    NonPositiveDimension { item: String, field: &'static str, value: f64 },
    NonFiniteValue { item: String, field: &'static str },
    OutsideRooms { item: String, category: String },
    EmptyRoom { room_id: String },
    UnknownCategory { item: String, category: String },
}

impl Violation {
    /// Structural problems make the scene unusable as a layout; the rest
    /// are warnings.
    pub fn is_structural(&self) -> bool {
        !matches!(self, Violation::EmptyRoom { .. } | Violation::UnknownCategory { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn structural(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.is_structural())
    }

    pub fn is_clean(&self) -> bool {
        self.structural().next().is_none()
    }
}

/// Validate against the default house palette.
pub fn validate_scene(scene: &Scene) -> ValidationReport {
    validate_scene_with(scene, &Palette::house())
}

pub fn validate_scene_with(scene: &Scene, palette: &Palette) -> ValidationReport {
    let mut out = Vec::new();

    for room in &scene.rooms {
        let n = room.wall_points.len();
        if n < 3 {
            out.push(Violation::DegenerateRoom {
                room_id: room.room_id.clone(),
                reason: format!("{n} wall points"),
            });
        } else if room.wall_points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            out.push(Violation::DegenerateRoom {
                room_id: room.room_id.clone(),
                reason: "non-finite wall point".into(),
            });
        } else if signed_area(&room.wall_points) == 0.0 {
            out.push(Violation::DegenerateRoom {
                room_id: room.room_id.clone(),
                reason: "zero area".into(),
            });
        }
    }

    let dims = |item: &str, l: f64, w: f64, h: f64, rot: f64, out: &mut Vec<Violation>| {
        for (field, v) in [("length", l), ("width", w), ("height", h)] {
            if !v.is_finite() {
                out.push(Violation::NonFiniteValue { item: item.to_string(), field });
            } else if v <= 0.0 {
                out.push(Violation::NonPositiveDimension {
                    item: item.to_string(),
                    field,
                    value: v,
                });
            }
        }
        if !rot.is_finite() {
            out.push(Violation::NonFiniteValue { item: item.to_string(), field: "rotate" });
        }
    };

    for (i, o) in scene.openings.iter().enumerate() {
        dims(&format!("windowsDoors[{i}]"), o.length, o.width, o.height, o.rotate, &mut out);
    }

    let usable: Vec<&super::Room> = scene
        .rooms
        .iter()
        .filter(|r| r.wall_points.len() >= 3)
        .collect();
    let mut occupied = vec![false; usable.len()];
    for (i, f) in scene.furniture.iter().enumerate() {
        let item = format!("furniture[{i}]");
        dims(&item, f.length, f.width, f.height, f.rotate, &mut out);
        match palette.get(&f.category) {
            Some(c) if c.role == Role::Furniture => {}
            _ => out.push(Violation::UnknownCategory {
                item: item.clone(),
                category: f.category.clone(),
            }),
        }
        let c = f.center();
        let mut inside_any = false;
        for (k, r) in usable.iter().enumerate() {
            if point_in_polygon(c, &r.wall_points) {
                inside_any = true;
                occupied[k] = true;
            }
        }
        if !inside_any {
            out.push(Violation::OutsideRooms {
                item,
                category: f.category.clone(),
            });
        }
    }

    for (k, r) in usable.iter().enumerate() {
        if !occupied[k] && !r.is_outline() {
            out.push(Violation::EmptyRoom {
                room_id: r.room_id.clone(),
            });
        }
    }

    ValidationReport { violations: out }
}
