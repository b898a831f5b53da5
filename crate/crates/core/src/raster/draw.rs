use super::{Canvas, LayoutImage, Palette, RasterError, Role, WorldTransform};
use crate::geometry::{bounds, point_in_polygon, sin_cos_deg, Vec2};
use crate::scene::{OrientedBox, Scene};

/// Side of the fixed world window used for fine-grained canvases.
pub const FINE_WINDOW_CM: f64 = 200.0;

/// Narrowest orientation strip in pixels, so small objects keep a readable
/// front edge.
const MIN_MARKER_PX: f64 = 1.5;

/// Width of the parent outline on fine-grained canvases, in pixels.
const BOUNDARY_PX: f64 = 2.0;

/// Uniform scale that fits the scene's bounding box into the canvas minus
/// the margin, centred.
pub fn fit_transform(scene: &Scene, canvas: Canvas) -> Result<WorldTransform, RasterError> {
    let (lo, hi) = bounds(scene.extent_points())
        .ok_or_else(|| RasterError::DegenerateExtent("scene is empty".into()))?;
    let (bw, bh) = (hi.x - lo.x, hi.y - lo.y);
    if !(bw.is_finite() && bh.is_finite()) || (bw <= 0.0 && bh <= 0.0) {
        return Err(RasterError::DegenerateExtent(format!("{bw} x {bh} cm")));
    }
    let avail_w = canvas.width as f64 - 2.0 * canvas.margin as f64;
    let avail_h = canvas.height as f64 - 2.0 * canvas.margin as f64;
    if avail_w <= 0.0 || avail_h <= 0.0 {
        return Err(RasterError::DegenerateExtent("margin exceeds canvas".into()));
    }
    let sx = if bw > 0.0 { avail_w / bw } else { f64::INFINITY };
    let sy = if bh > 0.0 { avail_h / bh } else { f64::INFINITY };
    let scale = sx.min(sy);
    let center = Vec2::new((lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5);
    let canvas_center = Vec2::new(canvas.width as f64 * 0.5, canvas.height as f64 * 0.5);
    Ok(WorldTransform {
        scale,
        offset: canvas_center - center.scale(scale),
    })
}

/// Fixed 200 cm window centred on `center`.
pub fn parent_transform(center: Vec2, canvas: Canvas) -> WorldTransform {
    let scale = canvas.width.min(canvas.height) as f64 / FINE_WINDOW_CM;
    let canvas_center = Vec2::new(canvas.width as f64 * 0.5, canvas.height as f64 * 0.5);
    WorldTransform {
        scale,
        offset: canvas_center - center.scale(scale),
    }
}

/// Visit every pixel whose centre lies in the rotated rectangle, passing the
/// pixel and its local coordinates. Membership is half-open on both axes.
fn for_each_in_rect(
    width: usize,
    height: usize,
    center: Vec2,
    len: f64,
    wid: f64,
    rotate_deg: f64,
    mut f: impl FnMut(usize, usize, f64, f64),
) {
    let (hl, hw) = (len * 0.5, wid * 0.5);
    let (s, c) = sin_cos_deg(rotate_deg);
    let ex = (c * hl).abs() + (s * hw).abs();
    let ey = (s * hl).abs() + (c * hw).abs();
    let x0 = ((center.x - ex - 1.0).floor().max(0.0)) as usize;
    let y0 = ((center.y - ey - 1.0).floor().max(0.0)) as usize;
    let x1 = ((center.x + ex + 1.0).ceil().max(0.0) as usize).min(width);
    let y1 = ((center.y + ey + 1.0).ceil().max(0.0) as usize).min(height);
    for y in y0..y1 {
        let dy = y as f64 + 0.5 - center.y;
        for x in x0..x1 {
            let dx = x as f64 + 0.5 - center.x;
            // rotate by -rotate_deg into the box frame
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            if u >= -hl && u < hl && v >= -hw && v < hw {
                f(x, y, u, v);
            }
        }
    }
}

fn draw_furniture(
    img: &mut LayoutImage,
    scene: &Scene,
    palette: &Palette,
) -> Result<(), RasterError> {
    let mut order: Vec<(usize, i32)> = Vec::with_capacity(scene.furniture.len());
    for (i, f) in scene.furniture.iter().enumerate() {
        let cat = palette
            .get(&f.category)
            .ok_or_else(|| RasterError::MissingCategory(f.category.clone()))?;
        order.push((i, cat.layer));
    }
    order.sort_by(|a, b| {
        a.1.cmp(&b.1).then_with(|| {
            let (fa, fb) = (&scene.furniture[a.0], &scene.furniture[b.0]);
            fb.footprint_area().total_cmp(&fa.footprint_area())
        })
    });
    let t = img.transform;
    for (i, _) in order {
        let f = &scene.furniture[i];
        let cat = palette.get(&f.category).expect("checked above");
        draw_box(img, t, f, cat.color.to_unit(), cat.alpha, Some(palette));
    }
    Ok(())
}

/// Filled box; with a palette, the front strip is drawn at the marker alpha.
fn draw_box(
    img: &mut LayoutImage,
    t: WorldTransform,
    b: &OrientedBox,
    color: [f64; 3],
    alpha: f64,
    marker: Option<&Palette>,
) {
    let center = t.to_pixel(b.center());
    let len = b.length * t.scale;
    let wid = b.width * t.scale;
    let hw = wid * 0.5;
    let strip = marker.map(|p| (p.marker_alpha, (p.marker_depth * wid).max(MIN_MARKER_PX).min(hw)));
    let (w, h) = (img.width, img.height);
    for_each_in_rect(w, h, center, len, wid, b.rotate, |x, y, _u, v| {
        let a = match strip {
            Some((ma, depth)) if v >= hw - depth => ma,
            _ => alpha,
        };
        img.blend(x, y, color, a);
    });
}

fn draw_structure(img: &mut LayoutImage, scene: &Scene, palette: &Palette) {
    let t = img.transform;
    if let Some(wall) = palette.first_with_role(Role::Wall) {
        let thick = palette.wall_thickness * t.scale;
        let color = wall.color.to_unit();
        for room in &scene.rooms {
            let n = room.wall_points.len();
            if n < 2 {
                continue;
            }
            for i in 0..n {
                let a = t.to_pixel(room.wall_points[i]);
                let b = t.to_pixel(room.wall_points[(i + 1) % n]);
                let d = b - a;
                let mid = (a + b).scale(0.5);
                let angle = d.y.atan2(d.x).to_degrees();
                let (w, h) = (img.width, img.height);
                for_each_in_rect(w, h, mid, d.norm() + thick, thick, angle, |x, y, _, _| {
                    img.blend(x, y, color, wall.alpha);
                });
            }
        }
    }
    for o in &scene.openings {
        let role = match o.kind {
            crate::scene::OpeningKind::Door => Role::Door,
            crate::scene::OpeningKind::Window => Role::Window,
        };
        if let Some(cat) = palette.first_with_role(role) {
            let b = OrientedBox {
                category: cat.name.clone(),
                pos: o.pos,
                length: o.length,
                width: o.width,
                height: o.height,
                rotate: o.rotate,
            };
            draw_box(img, t, &b, cat.color.to_unit(), cat.alpha, None);
        }
    }
}

fn blank(scene: &Scene, palette: &Palette, canvas: Canvas) -> Result<LayoutImage, RasterError> {
    let transform = if scene.extent_points().is_empty() {
        WorldTransform {
            scale: 1.0,
            offset: Vec2::new(canvas.width as f64 * 0.5, canvas.height as f64 * 0.5),
        }
    } else {
        fit_transform(scene, canvas)?
    };
    Ok(LayoutImage::filled(
        canvas.width,
        canvas.height,
        palette.background.to_unit(),
        transform,
    ))
}

/// Furniture footprints (alpha-composited, largest first within a layer)
/// with walls, doors and windows drawn on top.
pub fn rasterize_layout(scene: &Scene, palette: &Palette, canvas: Canvas) -> Result<LayoutImage, RasterError> {
    let mut img = blank(scene, palette, canvas)?;
    draw_furniture(&mut img, scene, palette)?;
    draw_structure(&mut img, scene, palette);
    Ok(img)
}

/// Walls, doors and windows only, under the same transform the full layout
/// would use.
pub fn rasterize_floorplan(scene: &Scene, palette: &Palette, canvas: Canvas) -> Result<LayoutImage, RasterError> {
    let mut img = blank(scene, palette, canvas)?;
    draw_structure(&mut img, scene, palette);
    Ok(img)
}

/// Grey level encoding a room type code on open-plan images.
pub fn room_type_gray(room_type: i64) -> f64 {
    (1.0 - 0.05 * room_type.clamp(1, 15) as f64).max(0.2)
}

/// Floor plan with each interior room filled by its room-type grey.
pub fn rasterize_room_types(scene: &Scene, palette: &Palette, canvas: Canvas) -> Result<LayoutImage, RasterError> {
    let mut img = blank(scene, palette, canvas)?;
    let t = img.transform;
    for room in scene.interior_rooms() {
        let g = room_type_gray(room.room_type);
        for y in 0..img.height {
            for x in 0..img.width {
                let w = t.to_world(Vec2::new(x as f64 + 0.5, y as f64 + 0.5));
                if point_in_polygon(w, &room.wall_points) {
                    img.set(x, y, [g as f32; 3]);
                }
            }
        }
    }
    draw_structure(&mut img, scene, palette);
    Ok(img)
}

/// Condition image for a fine-grained layout.
#[derive(Debug, Clone)]
pub struct BoundaryImage {
    pub image: LayoutImage,
    /// The parent footprint did not fit inside the fixed window.
    pub clipped: bool,
}

/// Outline of `parent` on a fixed 200 × 200 cm window centred on it, so
/// objects keep their absolute size.
pub fn rasterize_parent_boundary(parent: &OrientedBox, palette: &Palette, canvas: Canvas) -> BoundaryImage {
    let t = parent_transform(parent.center(), canvas);
    let mut image = LayoutImage::filled(canvas.width, canvas.height, palette.background.to_unit(), t);
    let half = FINE_WINDOW_CM * 0.5;
    let clipped = parent.footprint().iter().any(|p| {
        let d = *p - parent.center();
        d.x.abs() > half + 1e-9 || d.y.abs() > half + 1e-9
    });
    let cat = palette
        .get(&parent.category)
        .or_else(|| palette.first_with_role(Role::Boundary));
    let (color, alpha) = cat.map_or(([0.0; 3], 1.0), |c| (c.color.to_unit(), c.alpha));
    let center = t.to_pixel(parent.center());
    let (len, wid) = (parent.length * t.scale, parent.width * t.scale);
    let (hl, hw) = (len * 0.5, wid * 0.5);
    let (w, h) = (image.width, image.height);
    for_each_in_rect(w, h, center, len, wid, parent.rotate, |x, y, u, v| {
        if u < -hl + BOUNDARY_PX || u >= hl - BOUNDARY_PX || v < -hw + BOUNDARY_PX || v >= hw - BOUNDARY_PX {
            image.blend(x, y, color, alpha);
        }
    });
    BoundaryImage { image, clipped }
}

/// Fine-grained layout: the parent outline plus `items` (world coordinates)
/// on the parent's fixed window.
pub fn rasterize_fine_layout(
    parent: &OrientedBox,
    items: &[OrientedBox],
    palette: &Palette,
    canvas: Canvas,
) -> Result<LayoutImage, RasterError> {
    let mut img = rasterize_parent_boundary(parent, palette, canvas).image;
    let scene = Scene {
        furniture: items.to_vec(),
        ..Scene::default()
    };
    draw_furniture(&mut img, &scene, palette)?;
    Ok(img)
}
