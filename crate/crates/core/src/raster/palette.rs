use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RasterError;

/// 8-bit RGB colour, serialized as a six-digit hex string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const WHITE: Rgb = Rgb([255, 255, 255]);
    pub const BLACK: Rgb = Rgb([0, 0, 0]);

    pub fn from_hex(s: &str) -> Option<Rgb> {
        let s = s.trim_start_matches('#');
        if s.len() != 6 || !s.is_ascii() {
            return None;
        }
        let p = |i: usize| u8::from_str_radix(&s[i..i + 2], 16).ok();
        Some(Rgb([p(0)?, p(2)?, p(4)?]))
    }

    pub fn to_unit(self) -> [f64; 3] {
        self.0.map(|c| c as f64 / 255.0)
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02X}{:02X}{:02X}", self.0[0], self.0[1], self.0[2])
    }
}

impl TryFrom<String> for Rgb {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Rgb::from_hex(&s).ok_or_else(|| format!("invalid hex colour `{s}`"))
    }
}

impl From<Rgb> for String {
    fn from(c: Rgb) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    House,
    Fine,
}

/// What a palette entry draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Furniture,
    Wall,
    Door,
    Window,
    /// Outline of the parent surface on fine-grained canvases.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub color: Rgb,
    pub alpha: f64,
    #[serde(default)]
    pub layer: i32,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub level: Level,
    pub background: Rgb,
    /// Opacity of the orientation strip drawn along each object's front edge.
    pub marker_alpha: f64,
    /// Fraction of the object depth covered by the orientation strip.
    pub marker_depth: f64,
    /// Wall stroke thickness in centimetres.
    pub wall_thickness: f64,
    pub entries: Vec<Category>,
}

const HOUSE_FURNITURE: &[(&str, &str)] = &[
    ("bed", "FF0000"),
    ("cabinet", "FFFF00"),
    ("bed_background", "FF3333"),
    ("bedside_table", "F08080"),
    ("table", "A52A2A"),
    ("leisure_sofa", "666600"),
    ("sofa", "FF9933"),
    ("tv_cabinet", "FFCC99"),
    ("sofa_background", "99004C"),
    ("coffee_table", "CCFF99"),
    ("dining_cabinet", "FF9999"),
    ("shoe_cabinet", "006633"),
    ("single_sofa", "CC6600"),
    ("dining_table", "FF6666"),
    ("side_coffee_table", "99FFCC"),
    ("single_door_floor_cabinet", "9999FF"),
    ("double_door_floor_cabinet", "6666FF"),
    ("cooker_cabinet", "000099"),
    ("sink_cabinet", "0000CC"),
    ("electrical_floor_cabinet", "3333FF"),
    ("refrigerator", "006666"),
    ("shower", "33FF99"),
    ("toilet", "660033"),
    ("washbasin", "CC0066"),
    ("washing_machine", "FFCCE5"),
    ("washing_set", "FF66B2"),
];

const FINE_ITEMS: &[(&str, &str)] = &[
    ("lying_book", "0000FF"),
    ("standing_book", "FFFFAA"),
    ("magazine", "7FFFAA"),
    ("all_in_one_computer", "00FFAA"),
    ("laptop", "FF7FAA"),
    ("big_mouse_pad", "7F7FAA"),
    ("table_lamp", "007FAA"),
    ("small_ornament", "FF00AA"),
    ("pen_holder", "7F00AA"),
    ("big_plant", "0000AA"),
    ("small_plant", "FFFF55"),
    ("coffee_cup", "7FFF55"),
    ("electronic", "FF0000"),
    ("photo_frame", "FF7F55"),
    ("food", "7F7F55"),
    ("dinner_set", "FFFF00"),
    ("drinks", "7F7F00"),
];

/// Surfaces that host fine-grained layouts.
pub const FINE_PARENTS: &[(&str, &str)] = &[
    ("bedside_table", "F08080"),
    ("table", "A52A2A"),
    ("coffee_table", "CCFF99"),
    ("side_coffee_table", "99FFCC"),
    ("dining_table", "FF6666"),
];

pub const FURNITURE_ALPHA: f64 = 0.3;
pub const MARKER_ALPHA: f64 = 0.7;
pub const MARKER_DEPTH: f64 = 0.12;
pub const WALL_THICKNESS_CM: f64 = 24.0;

fn entry(name: &str, hex: &str, alpha: f64, layer: i32, role: Role) -> Category {
    Category {
        name: name.to_string(),
        color: Rgb::from_hex(hex).expect("static palette colour"),
        alpha,
        layer,
        role,
    }
}

impl Palette {
    /// House-level palette: 26 furniture categories plus wall, door, window.
    pub fn house() -> Palette {
        let mut entries: Vec<Category> = HOUSE_FURNITURE
            .iter()
            .map(|&(n, c)| {
                // bed/sofa backgrounds sit underneath the bed or sofa
                let layer = if n.ends_with("_background") { -1 } else { 0 };
                entry(n, c, FURNITURE_ALPHA, layer, Role::Furniture)
            })
            .collect();
        entries.push(entry("wall", "000000", 1.0, 10, Role::Wall));
        entries.push(entry("door", "139C5A", 1.0, 11, Role::Door));
        entries.push(entry("window", "0000FF", 1.0, 11, Role::Window));
        Palette {
            level: Level::House,
            background: Rgb::WHITE,
            marker_alpha: MARKER_ALPHA,
            marker_depth: MARKER_DEPTH,
            wall_thickness: WALL_THICKNESS_CM,
            entries,
        }
    }

    /// Fine-grained palette for objects placed on tables and desks.
    pub fn fine() -> Palette {
        let mut entries: Vec<Category> = FINE_ITEMS
            .iter()
            .map(|&(n, c)| entry(n, c, FURNITURE_ALPHA, 0, Role::Furniture))
            .collect();
        entries.extend(
            FINE_PARENTS
                .iter()
                .map(|&(n, c)| entry(n, c, 1.0, -10, Role::Boundary)),
        );
        Palette {
            level: Level::Fine,
            background: Rgb::WHITE,
            marker_alpha: MARKER_ALPHA,
            marker_depth: MARKER_DEPTH,
            wall_thickness: WALL_THICKNESS_CM,
            entries,
        }
    }

    pub fn from_json(text: &str) -> Result<Palette, RasterError> {
        let p: Palette =
            serde_json::from_str(text).map_err(|e| RasterError::PaletteFormat(e.to_string()))?;
        p.check()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("palette serializes")
    }

    /// Names and colours must be unique; alphas in `(0, 1]`.
    pub fn check(&self) -> Result<(), RasterError> {
        let mut names = HashSet::new();
        let mut colors = HashSet::new();
        for e in &self.entries {
            if !names.insert(e.name.as_str()) {
                return Err(RasterError::PaletteDuplicate(format!("name `{}`", e.name)));
            }
            if !colors.insert(e.color) {
                return Err(RasterError::PaletteDuplicate(format!("colour {}", e.color)));
            }
            if !(e.alpha > 0.0 && e.alpha <= 1.0) {
                return Err(RasterError::PaletteFormat(format!(
                    "alpha of `{}` must be in (0, 1]",
                    e.name
                )));
            }
        }
        if !(self.marker_alpha > 0.0 && self.marker_alpha <= 1.0) {
            return Err(RasterError::PaletteFormat("marker_alpha must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Category> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn first_with_role(&self, role: Role) -> Option<&Category> {
        self.entries.iter().find(|e| e.role == role)
    }

    pub fn furniture(&self) -> impl Iterator<Item = (usize, &Category)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.role == Role::Furniture)
    }

    /// Colour of `entry` composited at `alpha` over the background.
    pub fn composite(&self, color: Rgb, alpha: f64) -> [f64; 3] {
        let c = color.to_unit();
        let b = self.background.to_unit();
        [0, 1, 2].map(|i| alpha * c[i] + (1.0 - alpha) * b[i])
    }

    /// Stable digest of the palette, stored in checkpoints.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("palette serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let h = Palette::house();
        h.check().unwrap();
        assert_eq!(h.furniture().count(), 26);
        Palette::fine().check().unwrap();
    }

    #[test]
    fn bed_body_over_white() {
        let h = Palette::house();
        let bed = h.get("bed").unwrap();
        let c = h.composite(bed.color, bed.alpha);
        for (got, want) in c.iter().zip([1.0, 0.7, 0.7]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_and_hash() {
        let h = Palette::house();
        let back = Palette::from_json(&h.to_json()).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.hash(), h.hash());
        assert_ne!(h.hash(), Palette::fine().hash());
    }

    #[test]
    fn duplicate_colour_rejected() {
        let mut h = Palette::house();
        h.entries[1].color = h.entries[0].color;
        assert!(matches!(h.check(), Err(RasterError::PaletteDuplicate(_))));
    }
}
