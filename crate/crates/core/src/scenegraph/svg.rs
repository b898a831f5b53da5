use std::fmt::Write;

use super::{ObjectNode, SceneGraph};
use crate::geometry::{bounds, Vec2};
use crate::raster::{Palette, Rgb, Role};
use crate::scene::{OpeningKind, OrientedBox};

const MARGIN_CM: f64 = 50.0;
const ROOM_FILL: &str = "#F2F2F2";

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn points(poly: &[Vec2]) -> String {
    poly.iter()
        .map(|p| format!("{},{}", num(p.x), num(p.y)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn color_of(palette: &Palette, name: &str) -> Rgb {
    palette.get(name).map_or(Rgb([128, 128, 128]), |c| c.color)
}

fn role_color(palette: &Palette, role: Role, fallback: Rgb) -> Rgb {
    palette.first_with_role(role).map_or(fallback, |c| c.color)
}

fn rect(out: &mut String, class: &str, b: &OrientedBox, attrs: &str) {
    let c = b.center();
    let _ = writeln!(
        out,
        r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" transform="rotate({} {} {})" {attrs}/>"#,
        num(c.x - b.length * 0.5),
        num(c.y - b.width * 0.5),
        num(b.length),
        num(b.width),
        num(b.rotate),
        num(c.x),
        num(c.y),
    );
}

/// Child boxes stored in the parent frame, moved back to world coordinates.
fn child_world(parent: &OrientedBox, child: &OrientedBox) -> OrientedBox {
    let c = parent.center() + child.center().rotate_deg(parent.rotate);
    let mut b = child.clone();
    b.pos[0] = c.x;
    b.pos[1] = c.y;
    b.rotate = child.rotate + parent.rotate;
    b
}

fn object(out: &mut String, palette: &Palette, node: &ObjectNode, world: &OrientedBox, class: &str) {
    let b = world;
    let attrs = format!(
        r##"fill="#{}" fill-opacity="0.6" stroke="#{}" stroke-width="1" data-category="{}""##,
        color_of(palette, &b.category),
        color_of(palette, &b.category),
        escape(&b.category)
    );
    rect(out, class, b, &attrs);
    let c = b.center();
    let _ = writeln!(
        out,
        r#"<text class="label" x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
        num(c.x),
        num(c.y),
        escape(&b.category)
    );
    for child in &node.children {
        let cw = child_world(b, &child.bbox);
        object(out, palette, child, &cw, "child");
    }
}

fn collect_bounds(g: &SceneGraph) -> Option<(Vec2, Vec2)> {
    let h = &g.house;
    let mut pts: Vec<Vec2> = h.rooms.iter().flat_map(|r| r.polygon.iter().copied()).collect();
    pts.extend(h.outline.iter().copied());
    pts.extend(h.openings.iter().flat_map(|o| o.opening.footprint()));
    pts.extend(
        h.rooms
            .iter()
            .flat_map(|r| &r.objects)
            .chain(&h.unassigned)
            .flat_map(|o| o.bbox.footprint()),
    );
    bounds(pts)
}

/// Top-down SVG 1.1 drawing: room floors, walls, openings and objects in
/// their palette colours. Output depends only on the inputs.
pub fn export_svg(graph: &SceneGraph, palette: &Palette) -> String {
    let (lo, hi) = collect_bounds(graph)
        .map(|(lo, hi)| {
            let m = Vec2::new(MARGIN_CM, MARGIN_CM);
            (lo - m, hi + m)
        })
        .unwrap_or((Vec2::new(0.0, 0.0), Vec2::new(100.0, 100.0)));
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        num(lo.x),
        num(lo.y),
        num(w),
        num(h),
        num(w),
        num(h)
    );
    let _ = writeln!(
        out,
        r##"<rect class="background" x="{}" y="{}" width="{}" height="{}" fill="#{}"/>"##,
        num(lo.x),
        num(lo.y),
        num(w),
        num(h),
        palette.background
    );
    let house = &graph.house;
    for r in &house.rooms {
        let _ = writeln!(
            out,
            r#"<polygon class="room" points="{}" fill="{ROOM_FILL}" data-room-id="{}"><title>{}</title></polygon>"#,
            points(&r.polygon),
            escape(&r.room_id),
            escape(&r.room_name)
        );
    }
    let wall = role_color(palette, Role::Wall, Rgb::BLACK);
    let loops = house
        .rooms
        .iter()
        .map(|r| &r.polygon)
        .chain(std::iter::once(&house.outline).filter(|o| !o.is_empty()));
    for poly in loops {
        let _ = writeln!(
            out,
            r##"<polygon class="wall" points="{}" fill="none" stroke="#{wall}" stroke-width="{}" stroke-linejoin="miter"/>"##,
            points(poly),
            num(palette.wall_thickness)
        );
    }
    for a in &house.openings {
        let o = &a.opening;
        let (class, role) = match o.kind {
            OpeningKind::Door => ("door", Role::Door),
            OpeningKind::Window => ("window", Role::Window),
        };
        let b = OrientedBox {
            category: class.into(),
            pos: o.pos,
            length: o.length,
            width: o.width,
            height: o.height,
            rotate: o.rotate,
        };
        let attached = if a.attached { "" } else { r#" data-unattached="true""# };
        rect(
            &mut out,
            class,
            &b,
            &format!(r##"fill="#{}"{attached}"##, role_color(palette, role, Rgb::BLACK)),
        );
    }
    for node in house.rooms.iter().flat_map(|r| &r.objects).chain(&house.unassigned) {
        object(&mut out, palette, node, &node.bbox, "object");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph_is_background_only() {
        let s = export_svg(&SceneGraph::default(), &Palette::house());
        assert!(s.starts_with("<?xml"));
        assert!(s.contains(r#"class="background""#));
        assert_eq!(s.matches("<rect").count(), 1);
        assert!(s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn number_format() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-0.001), "0");
        assert_eq!(num(717.32), "717.32");
        assert_eq!(num(2.5), "2.5");
        assert_eq!(escape("a<b&\"c\""), "a&lt;b&amp;&quot;c&quot;");
    }
}
