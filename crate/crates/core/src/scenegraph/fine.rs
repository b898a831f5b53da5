use rand::Rng;

use super::{AssetDatabase, GraphError, NodeFlag, ObjectNode};
use crate::diffusion::{sample_image, Denoiser, NoiseSchedule};
use crate::geometry::{bounds, ccw, clip_convex, normalize_deg, polygon_area, rect_corners, Vec2};
use crate::perception::{detect_objects, DetectConfig, Detection};
use crate::raster::{rasterize_parent_boundary, Canvas, Palette, Role};
use crate::scene::OrientedBox;

/// Children may hang past the parent edge by this fraction of their depth.
pub const OVERHANG_FRACTION: f64 = 0.15;

/// Everything needed to run one fine-grained generation step.
pub struct FineLevel<'a, D: Denoiser + ?Sized> {
    pub denoiser: &'a D,
    pub palette: &'a Palette,
    pub schedule: &'a NoiseSchedule,
    pub canvas: Canvas,
    pub detect: DetectConfig,
    pub overhang: f64,
}

impl<'a, D: Denoiser + ?Sized> FineLevel<'a, D> {
    pub fn new(denoiser: &'a D, palette: &'a Palette, schedule: &'a NoiseSchedule, canvas: Canvas) -> Self {
        FineLevel {
            denoiser,
            palette,
            schedule,
            canvas,
            detect: DetectConfig::default(),
            overhang: OVERHANG_FRACTION,
        }
    }

    pub fn supports(&self, category: &str) -> bool {
        self.palette
            .entries
            .iter()
            .any(|c| c.role == Role::Boundary && c.name == category)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FineChildren {
    /// Nodes in the parent's local frame.
    pub children: Vec<ObjectNode>,
    /// Detections that fell outside the parent, in the local frame.
    pub discarded: Vec<OrientedBox>,
    pub parent_clipped: bool,
}

/// Sample a layout on top of `parent`, decode it and turn the detections
/// into child nodes.
pub fn fine_grained_generate<D, R>(
    parent: &OrientedBox,
    level: &FineLevel<'_, D>,
    db: &AssetDatabase,
    rng: &mut R,
) -> Result<FineChildren, GraphError>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
{
    if !level.supports(&parent.category) {
        return Err(GraphError::UnsupportedParent(parent.category.clone()));
    }
    let cond = rasterize_parent_boundary(parent, level.palette, level.canvas);
    let img = sample_image(level.denoiser, &cond.image, level.schedule, rng)?;
    let dets = detect_objects(&img, level.palette, None, &level.detect)?;
    let mut out = place_children(parent, &dets, level.overhang, db);
    out.parent_clipped = cond.clipped;
    Ok(out)
}

/// Map world-frame detections into the parent's frame, applying the
/// overhang and clipping rules.
pub fn place_children(parent: &OrientedBox, dets: &[Detection], overhang: f64, db: &AssetDatabase) -> FineChildren {
    let (hl, hw) = (parent.length * 0.5, parent.width * 0.5);
    let surface = ccw(rect_corners(Vec2::default(), parent.length, parent.width, 0.0).to_vec());
    let mut out = FineChildren::default();
    for d in dets {
        let mut b = d.bbox.clone();
        let c = (b.center() - parent.center()).rotate_deg(-parent.rotate);
        b.pos = [c.x, c.y, parent.height];
        b.rotate = normalize_deg(b.rotate - parent.rotate);
        let corners = b.footprint();
        let excess = corners
            .iter()
            .map(|p| (p.x.abs() - hl).max(p.y.abs() - hw).max(0.0))
            .fold(0.0, f64::max);
        let mut flags = Vec::new();
        if excess > 1e-9 {
            if excess <= overhang * b.width {
                flags.push(NodeFlag::Overhang);
            } else {
                let kept = clip_convex(&corners, &surface);
                if polygon_area(&kept) <= 1e-9 {
                    out.discarded.push(b);
                    continue;
                }
                let local: Vec<Vec2> = kept.iter().map(|p| (*p - c).rotate_deg(-b.rotate)).collect();
                let (lo, hi) = bounds(local).expect("non-empty clip");
                let mid = (lo + hi).scale(0.5).rotate_deg(b.rotate) + c;
                b.pos[0] = mid.x;
                b.pos[1] = mid.y;
                b.length = hi.x - lo.x;
                b.width = hi.y - lo.y;
                flags.push(NodeFlag::Clipped);
            }
        }
        let mut node = ObjectNode::retrieve(b, db);
        node.confidence = Some(d.confidence);
        node.flags.extend(flags);
        out.children.push(node);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{image_to_tensor, MemorizingDenoiser, ScheduleSpec};
    use crate::scenegraph::builtin_assets;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk() -> OrientedBox {
        let mut d = OrientedBox::new("table", Vec2::new(500.0, 300.0), 120.0, 60.0, 90.0);
        d.height = 75.0;
        d
    }

    fn det(b: OrientedBox) -> Detection {
        Detection {
            category: b.category.clone(),
            bbox: b,
            pixel_mask: Vec::new(),
            confidence: 1.0,
            orientation_confidence: 1.0,
        }
    }

    /// World box at a position given in the desk's local frame.
    fn on_desk(cat: &str, local: Vec2, l: f64, w: f64) -> OrientedBox {
        let p = desk();
        let world = p.center() + local.rotate_deg(p.rotate);
        OrientedBox::new(cat, world, l, w, p.rotate)
    }

    #[test]
    fn inside_child_in_local_frame() {
        let out = place_children(&desk(), &[det(on_desk("table_lamp", Vec2::new(30.0, 10.0), 20.0, 20.0))], 0.15, &builtin_assets());
        assert_eq!(out.children.len(), 1);
        let b = &out.children[0].bbox;
        assert!((b.pos[0] - 30.0).abs() < 1e-9 && (b.pos[1] - 10.0).abs() < 1e-9);
        assert_eq!(b.pos[2], 75.0);
        assert!(b.rotate.abs() < 1e-9 || (b.rotate - 360.0).abs() < 1e-9);
        assert!(out.children[0].flags.is_empty());
    }

    #[test]
    fn overhang_clip_and_discard() {
        // desk local y spans [-30, 30]; depth 20 allows 3 cm of overhang
        let hang = on_desk("laptop", Vec2::new(0.0, 22.0), 30.0, 20.0);
        let clip = on_desk("laptop", Vec2::new(0.0, 30.0), 30.0, 20.0);
        let gone = on_desk("laptop", Vec2::new(0.0, 60.0), 30.0, 20.0);
        let out = place_children(&desk(), &[det(hang), det(clip), det(gone)], 0.15, &builtin_assets());
        assert_eq!(out.children.len(), 2);
        assert_eq!(out.children[0].flags, vec![NodeFlag::Overhang]);
        let c = &out.children[1];
        assert_eq!(c.flags, vec![NodeFlag::Clipped]);
        assert!((c.bbox.width - 10.0).abs() < 1e-6);
        assert!((c.bbox.pos[1] - 25.0).abs() < 1e-6);
        assert_eq!(out.discarded.len(), 1);
    }

    #[test]
    fn blank_sample_gives_no_children() {
        let palette = Palette::fine();
        let schedule = NoiseSchedule::from_spec(ScheduleSpec {
            steps: 10,
            ..ScheduleSpec::default()
        })
        .unwrap();
        let canvas = Canvas::square(32, 0);
        let blank = rasterize_parent_boundary(&desk(), &palette, canvas).image;
        let stub = MemorizingDenoiser {
            x0: image_to_tensor(&blank),
            schedule: schedule.clone(),
        };
        let level = FineLevel::new(&stub, &palette, &schedule, canvas);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = fine_grained_generate(&desk(), &level, &builtin_assets(), &mut rng).unwrap();
        assert!(out.children.is_empty());
        let sofa = OrientedBox::new("sofa", Vec2::default(), 10.0, 10.0, 0.0);
        assert!(matches!(
            fine_grained_generate(&sofa, &level, &builtin_assets(), &mut rng),
            Err(GraphError::UnsupportedParent(_))
        ));
    }
}
