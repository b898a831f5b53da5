//! Hierarchical House → Room → Object → child graph built from detections,
//! room masks and openings, with size-matched asset references.

mod assets;
mod fine;
mod straighten;
mod svg;

pub use assets::{builtin_assets, retrieve_asset, size_cost, AssetDatabase, AssetRef};
pub use fine::{fine_grained_generate, FineChildren, FineLevel, OVERHANG_FRACTION};
pub use straighten::{straighten_polygon, Straightened};
pub use svg::export_svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffusion::DiffusionError;
use crate::geometry::{angle_diff_deg, distance_to_boundary, intersection_area, normalize_deg, point_in_polygon, project_onto_segment, Vec2};
use crate::perception::{PerceptionError, RoomMask, RoomType};
use crate::raster::RasterError;
use crate::scene::{Opening, OrientedBox, Scene, OUTLINE_ROOM_NAME, OUTLINE_ROOM_TYPE};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("asset database: {0}")]
    AssetDatabase(String),
    #[error("`{0}` does not host fine-grained layouts")]
    UnsupportedParent(String),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("scene graph json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Edges this close to horizontal or vertical are snapped, in degrees.
    pub angle_tol: f64,
    /// Vertices closer than this are merged, in cm.
    pub snap_tol: f64,
    /// Openings farther than this from every wall stay unattached, in cm.
    pub max_dist: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            angle_tol: 5.0,
            snap_tol: 6.0,
            max_dist: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum NodeFlag {
    /// No asset of the category exists in the database.
    NoMatch,
    /// Child hangs past the parent edge within the overhang tolerance.
    Overhang,
    /// Child was cut back to the parent footprint.
    Clipped,
    /// A generated child fell outside the parent and was dropped.
    DiscardedChild { category: String },
    /// The parent did not fit the fine-grained window.
    ParentClipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectNode {
    /// World frame for room-level objects; children use the parent's local
    /// frame with `pos[2]` at the parent's top.
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub asset: Option<AssetRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<NodeFlag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ObjectNode>,
}

impl ObjectNode {
    /// Node with the best-matching asset, or a no-match flag.
    pub fn retrieve(bbox: OrientedBox, db: &AssetDatabase) -> Self {
        let asset = retrieve_asset(&bbox, db).cloned();
        let flags = if asset.is_none() { vec![NodeFlag::NoMatch] } else { Vec::new() };
        ObjectNode {
            bbox,
            asset,
            confidence: None,
            flags,
            children: Vec::new(),
        }
    }

    pub fn has_flag(&self, f: &NodeFlag) -> bool {
        self.flags.contains(f)
    }

    /// Replace the children with a fine-grained result, flagging discards.
    pub fn set_children(&mut self, fine: FineChildren) {
        self.children = fine.children;
        self.flags.retain(|f| !matches!(f, NodeFlag::DiscardedChild { .. } | NodeFlag::ParentClipped));
        if fine.parent_clipped {
            self.flags.push(NodeFlag::ParentClipped);
        }
        self.flags
            .extend(fine.discarded.into_iter().map(|b| NodeFlag::DiscardedChild { category: b.category }));
    }

    /// This node plus all descendants.
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(ObjectNode::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomNode {
    pub room_id: String,
    pub room_name: String,
    pub room_type: RoomType,
    /// Straightened boundary in world cm.
    pub polygon: Vec<Vec2>,
    /// Straightening failed and `polygon` is the input loop.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub straighten_warning: bool,
    /// Free-form material slots, filled by downstream tools.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub materials: std::collections::BTreeMap<String, String>,
    pub objects: Vec<ObjectNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttachedOpening {
    /// Position and rotation after snapping to the wall.
    pub opening: Opening,
    pub attached: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_id: Option<String>,
    /// Wall segment endpoints the opening sits on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<[Vec2; 2]>,
    pub original: Opening,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct House {
    pub rooms: Vec<RoomNode>,
    pub unassigned: Vec<ObjectNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub openings: Vec<AttachedOpening>,
    /// Straightened house outline, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outline: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneGraph {
    pub house: House,
}

impl SceneGraph {
    /// Every object node, children included.
    pub fn object_count(&self) -> usize {
        let h = &self.house;
        h.rooms
            .iter()
            .flat_map(|r| &r.objects)
            .chain(&h.unassigned)
            .map(ObjectNode::count)
            .sum()
    }

    /// Room-level objects only.
    pub fn top_level_count(&self) -> usize {
        self.house.rooms.iter().map(|r| r.objects.len()).sum::<usize>() + self.house.unassigned.len()
    }

    pub fn objects_mut(&mut self) -> impl Iterator<Item = &mut ObjectNode> {
        let h = &mut self.house;
        h.rooms.iter_mut().flat_map(|r| r.objects.iter_mut()).chain(h.unassigned.iter_mut())
    }
}

/// A closed wall loop openings can be attached to.
#[derive(Debug, Clone, Copy)]
pub struct WallLoop<'a> {
    pub room_id: &'a str,
    pub points: &'a [Vec2],
}

/// Distances closer than this count as equal; earlier loops win ties.
const TIE_CM: f64 = 1e-9;

fn wall_angle(a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    if d.x == 0.0 {
        90.0
    } else if d.y == 0.0 {
        0.0
    } else {
        normalize_deg(d.y.atan2(d.x).to_degrees())
    }
}

/// Snap each opening onto its nearest wall segment within `max_dist`, turning
/// it to whichever wall direction is closer to its own rotation.
pub fn attach_openings(openings: &[Opening], walls: &[WallLoop<'_>], max_dist: f64) -> Vec<AttachedOpening> {
    openings
        .iter()
        .map(|o| {
            let c = o.center();
            let mut best: Option<(f64, Vec2, &str, Vec2, Vec2)> = None;
            for wl in walls {
                let n = wl.points.len();
                if n < 2 {
                    continue;
                }
                for i in 0..n {
                    let (a, b) = (wl.points[i], wl.points[(i + 1) % n]);
                    if a == b {
                        continue;
                    }
                    let (q, d) = project_onto_segment(c, a, b);
                    if d <= max_dist && best.map_or(true, |bst| d < bst.0 - TIE_CM) {
                        best = Some((d, q, wl.room_id, a, b));
                    }
                }
            }
            match best {
                None => AttachedOpening {
                    opening: o.clone(),
                    attached: false,
                    room_id: None,
                    wall: None,
                    original: o.clone(),
                },
                Some((d, q, room, a, b)) => {
                    let base = wall_angle(a, b);
                    let flip = normalize_deg(base + 180.0);
                    let target = if angle_diff_deg(o.rotate, flip) < angle_diff_deg(o.rotate, base) { flip } else { base };
                    let mut snapped = o.clone();
                    if d > TIE_CM {
                        snapped.pos[0] = q.x;
                        snapped.pos[1] = q.y;
                    }
                    if angle_diff_deg(o.rotate, target) > 1e-9 {
                        snapped.rotate = target;
                    }
                    AttachedOpening {
                        opening: snapped,
                        attached: true,
                        room_id: Some(room.to_string()),
                        wall: Some([a, b]),
                        original: o.clone(),
                    }
                }
            }
        })
        .collect()
}

/// Index of the room holding each object's centroid. A centroid inside or on
/// the boundary of several rooms goes to the one sharing the most footprint.
pub fn assign_to_rooms(objects: &[OrientedBox], rooms: &[&[Vec2]]) -> Vec<Option<usize>> {
    objects
        .iter()
        .map(|o| {
            let c = o.center();
            let cands: Vec<usize> = (0..rooms.len())
                .filter(|&i| {
                    let poly = rooms[i];
                    poly.len() >= 3 && (point_in_polygon(c, poly) || distance_to_boundary(c, poly) <= 1e-9)
                })
                .collect();
            match cands.len() {
                0 => None,
                1 => Some(cands[0]),
                _ => {
                    let fp = o.footprint();
                    cands
                        .into_iter()
                        .map(|i| (i, intersection_area(rooms[i], &fp)))
                        .fold(None, |acc: Option<(usize, f64)>, (i, a)| match acc {
                            Some((_, ba)) if ba >= a => acc,
                            _ => Some((i, a)),
                        })
                        .map(|(i, _)| i)
                }
            }
        })
        .collect()
}

fn is_outline_mask(m: &RoomMask) -> bool {
    m.room_type == RoomType::Code(OUTLINE_ROOM_TYPE) || m.name.as_deref() == Some(OUTLINE_ROOM_NAME)
}

fn room_name(m: &RoomMask) -> String {
    match (&m.name, m.room_type) {
        (Some(n), _) => n.clone(),
        (None, RoomType::Code(k)) => format!("type_{k}"),
        _ => "unknown".into(),
    }
}

/// Straighten rooms, attach openings, assign objects to rooms and retrieve
/// an asset for each. Outline and exterior masks only serve as walls for
/// openings.
pub fn build_scene_graph(
    objects: &[OrientedBox],
    rooms: &[RoomMask],
    openings: &[Opening],
    db: &AssetDatabase,
    config: &GraphConfig,
) -> SceneGraph {
    let mut house = House::default();
    let mut outline_loops: Vec<(String, Vec<Vec2>)> = Vec::new();
    for (i, m) in rooms.iter().enumerate() {
        if m.room_type == RoomType::Exterior {
            continue;
        }
        let s = straighten_polygon(&m.polygon, config.angle_tol, config.snap_tol);
        let id = m.id.clone().unwrap_or_else(|| format!("room_{i}"));
        if is_outline_mask(m) {
            if house.outline.is_empty() {
                house.outline = s.points.clone();
            }
            outline_loops.push((id, s.points));
            continue;
        }
        house.rooms.push(RoomNode {
            room_id: id,
            room_name: room_name(m),
            room_type: m.room_type,
            polygon: s.points,
            straighten_warning: s.warning,
            materials: Default::default(),
            objects: Vec::new(),
        });
    }
    let walls: Vec<WallLoop> = house
        .rooms
        .iter()
        .map(|r| WallLoop {
            room_id: &r.room_id,
            points: &r.polygon,
        })
        .chain(outline_loops.iter().map(|(id, p)| WallLoop { room_id: id, points: p }))
        .collect();
    let attached = attach_openings(openings, &walls, config.max_dist);
    let polys: Vec<&[Vec2]> = house.rooms.iter().map(|r| r.polygon.as_slice()).collect();
    let assignment = assign_to_rooms(objects, &polys);
    house.openings = attached;
    for (o, room) in objects.iter().zip(assignment) {
        let node = ObjectNode::retrieve(o.clone(), db);
        match room {
            Some(r) => house.rooms[r].objects.push(node),
            None => house.unassigned.push(node),
        }
    }
    SceneGraph { house }
}

/// Graph of a scene using its exact room loops and furniture.
pub fn scene_to_graph(scene: &Scene, db: &AssetDatabase, config: &GraphConfig) -> SceneGraph {
    build_scene_graph(
        &scene.furniture,
        &crate::perception::segment_rooms(scene),
        &scene.openings,
        db,
        config,
    )
}

pub fn export_graph_json(graph: &SceneGraph) -> String {
    serde_json::to_string(graph).expect("scene graph serializes")
}

pub fn export_graph_json_pretty(graph: &SceneGraph) -> String {
    serde_json::to_string_pretty(graph).expect("scene graph serializes")
}

pub fn graph_from_json(text: &str) -> Result<SceneGraph, GraphError> {
    Ok(serde_json::from_str(text)?)
}
