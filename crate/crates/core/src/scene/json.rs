use serde_json::{json, Map, Value};

use super::{Opening, OpeningKind, OrientedBox, Room, Scene, SceneError};
use crate::geometry::{normalize_deg, Vec2};

/// Parse a scene from its JSON form (`rooms`, `windowsDoors`, `furniture`).
///
/// Category names are kept verbatim. A two-element `pos` gets `z = 0`, and
/// rotations are normalized into `[0, 360)`.
pub fn parse_scene(bytes: &[u8]) -> Result<Scene, SceneError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| SceneError::Json {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = root.as_object().ok_or(SceneError::Type {
        path: "$".into(),
        expected: "object",
    })?;

    let rooms = array_field(obj, "$", "rooms")?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_room(v, &format!("$.rooms[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let openings = array_field(obj, "$", "windowsDoors")?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_opening(v, &format!("$.windowsDoors[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let furniture = array_field(obj, "$", "furniture")?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_box(v, &format!("$.furniture[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Scene {
        rooms,
        openings,
        furniture,
    })
}

/// Parse a bare JSON list of boxes in the furniture schema, such as a
/// detections file. Unknown keys are ignored.
pub fn parse_furniture_list(bytes: &[u8]) -> Result<Vec<OrientedBox>, SceneError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| SceneError::Json {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    root.as_array()
        .ok_or(SceneError::Type {
            path: "$".into(),
            expected: "array",
        })?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_box(v, &format!("$[{i}]")))
        .collect()
}

/// Serialize a scene to pretty-printed JSON in the same schema
/// `parse_scene` reads.
pub fn serialize_scene(scene: &Scene) -> String {
    let rooms: Vec<Value> = scene
        .rooms
        .iter()
        .map(|r| {
            json!({
                "roomId": r.room_id,
                "roomName": r.room_name,
                "roomType": r.room_type,
                "wallPoints": r.wall_points.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
            })
        })
        .collect();
    let openings: Vec<Value> = scene
        .openings
        .iter()
        .map(|o| box_json(o.kind.as_str(), o.pos, o.length, o.width, o.height, o.rotate))
        .collect();
    let furniture: Vec<Value> = scene
        .furniture
        .iter()
        .map(|f| box_json(&f.category, f.pos, f.length, f.width, f.height, f.rotate))
        .collect();
    let v = json!({
        "rooms": rooms,
        "windowsDoors": openings,
        "furniture": furniture,
    });
    serde_json::to_string_pretty(&v).expect("scene JSON is always serializable")
}

fn box_json(kind: &str, pos: [f64; 3], length: f64, width: f64, height: f64, rotate: f64) -> Value {
    json!({
        "type": kind,
        "pos": pos,
        "length": length,
        "width": width,
        "height": height,
        "rotate": rotate,
    })
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, SceneError> {
    obj.get(key).ok_or_else(|| SceneError::MissingKey {
        path: path.to_string(),
        key: key.to_string(),
    })
}

fn array_field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Vec<Value>, SceneError> {
    field(obj, path, key)?.as_array().ok_or(SceneError::Type {
        path: format!("{path}.{key}"),
        expected: "array",
    })
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, SceneError> {
    v.as_object().ok_or(SceneError::Type {
        path: path.to_string(),
        expected: "object",
    })
}

fn number(v: &Value, path: &str) -> Result<f64, SceneError> {
    v.as_f64().ok_or(SceneError::Type {
        path: path.to_string(),
        expected: "number",
    })
}

fn number_field(obj: &Map<String, Value>, path: &str, key: &str) -> Result<f64, SceneError> {
    number(field(obj, path, key)?, &format!("{path}.{key}"))
}

fn string_field(obj: &Map<String, Value>, path: &str, key: &str) -> Result<String, SceneError> {
    field(obj, path, key)?
        .as_str()
        .map(str::to_string)
        .ok_or(SceneError::Type {
            path: format!("{path}.{key}"),
            expected: "string",
        })
}

fn parse_room(v: &Value, path: &str) -> Result<Room, SceneError> {
    let obj = object(v, path)?;
    let room_type_path = format!("{path}.roomType");
    let room_type = field(obj, path, "roomType")?;
    let room_type = room_type
        .as_i64()
        .or_else(|| room_type.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
        .ok_or(SceneError::Type {
            path: room_type_path,
            expected: "integer",
        })?;
    let wall_points = array_field(obj, path, "wallPoints")?
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pp = format!("{path}.wallPoints[{i}]");
            let arr = p.as_array().filter(|a| a.len() == 2).ok_or(SceneError::Type {
                path: pp.clone(),
                expected: "[x, y] pair",
            })?;
            Ok(Vec2::new(
                number(&arr[0], &format!("{pp}[0]"))?,
                number(&arr[1], &format!("{pp}[1]"))?,
            ))
        })
        .collect::<Result<Vec<_>, SceneError>>()?;
    Ok(Room {
        room_id: string_field(obj, path, "roomId")?,
        room_name: string_field(obj, path, "roomName")?,
        room_type,
        wall_points,
    })
}

struct RawBox {
    kind: String,
    pos: [f64; 3],
    length: f64,
    width: f64,
    height: f64,
    rotate: f64,
}

fn parse_raw_box(v: &Value, path: &str) -> Result<RawBox, SceneError> {
    let obj = object(v, path)?;
    let pos_path = format!("{path}.pos");
    let pos_arr = field(obj, path, "pos")?
        .as_array()
        .filter(|a| a.len() == 2 || a.len() == 3)
        .ok_or(SceneError::Type {
            path: pos_path.clone(),
            expected: "[x, y] or [x, y, z]",
        })?;
    let mut pos = [0.0; 3];
    for (i, c) in pos_arr.iter().enumerate() {
        pos[i] = number(c, &format!("{pos_path}[{i}]"))?;
    }
    let rotate = number_field(obj, path, "rotate")?;
    if !rotate.is_finite() {
        return Err(SceneError::Type {
            path: format!("{path}.rotate"),
            expected: "finite number",
        });
    }
    Ok(RawBox {
        kind: string_field(obj, path, "type")?,
        pos,
        length: number_field(obj, path, "length")?,
        width: number_field(obj, path, "width")?,
        height: number_field(obj, path, "height")?,
        rotate: normalize_deg(rotate),
    })
}

fn parse_opening(v: &Value, path: &str) -> Result<Opening, SceneError> {
    let raw = parse_raw_box(v, path)?;
    let kind = match raw.kind.as_str() {
        "door" => OpeningKind::Door,
        "window" => OpeningKind::Window,
        _ => {
            return Err(SceneError::Type {
                path: format!("{path}.type"),
                expected: "\"door\" or \"window\"",
            })
        }
    };
    Ok(Opening {
        kind,
        pos: raw.pos,
        length: raw.length,
        width: raw.width,
        height: raw.height,
        rotate: raw.rotate,
    })
}

fn parse_box(v: &Value, path: &str) -> Result<OrientedBox, SceneError> {
    let raw = parse_raw_box(v, path)?;
    Ok(OrientedBox {
        category: raw.kind,
        pos: raw.pos,
        length: raw.length,
        width: raw.width,
        height: raw.height,
        rotate: raw.rotate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn furniture_list() {
        let b = parse_furniture_list(br#"[{"type":"bed","pos":[1,2],"length":3,"width":4,"height":0,"rotate":-90,"confidence":1}]"#).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].rotate, 270.0);
        assert!(matches!(parse_furniture_list(b"{}"), Err(SceneError::Type { .. })));
    }

    #[test]
    fn empty_scene() {
        let s = parse_scene(br#"{"rooms":[],"windowsDoors":[],"furniture":[]}"#).unwrap();
        assert_eq!(s, Scene::default());
        let back = serialize_scene(&s);
        let v: Value = serde_json::from_str(&back).unwrap();
        assert_eq!(v, json!({"rooms": [], "windowsDoors": [], "furniture": []}));
    }

    #[test]
    fn malformed_json_reports_offset() {
        let src = b"{\"rooms\": [,]}";
        match parse_scene(src) {
            Err(SceneError::Json { offset, .. }) => assert_eq!(offset, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_key_is_named() {
        let err = parse_scene(br#"{"rooms":[],"furniture":[]}"#).unwrap_err();
        assert_eq!(
            err,
            SceneError::MissingKey {
                path: "$".into(),
                key: "windowsDoors".into()
            }
        );
    }

    #[test]
    fn non_numeric_coordinate_has_path() {
        let src = br#"{"rooms":[],"windowsDoors":[],"furniture":[
            {"type":"bed","pos":[1,"x",0],"length":1,"width":1,"height":1,"rotate":0}]}"#;
        let err = parse_scene(src).unwrap_err();
        assert_eq!(
            err,
            SceneError::Type {
                path: "$.furniture[0].pos[1]".into(),
                expected: "number"
            }
        );
    }

    #[test]
    fn z_defaults_and_rotation_normalizes() {
        let src = br#"{"rooms":[],"windowsDoors":[],"furniture":[
            {"type":"mystery","pos":[1,2],"length":1,"width":1,"height":1,"rotate":-90}]}"#;
        let s = parse_scene(src).unwrap();
        assert_eq!(s.furniture[0].pos, [1.0, 2.0, 0.0]);
        assert_eq!(s.furniture[0].rotate, 270.0);
        assert_eq!(s.furniture[0].category, "mystery");
    }
}
