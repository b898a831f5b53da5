use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roomgen_core::diffusion::{image_to_tensor, MemorizingDenoiser, NoiseSchedule, ScheduleSpec};
use roomgen_core::geometry::Vec2;
use roomgen_core::raster::{rasterize_fine_layout, Canvas, Palette};
use roomgen_core::scene::OrientedBox;
use roomgen_core::scenegraph::{builtin_assets, fine_grained_generate, FineLevel, NodeFlag, ObjectNode};

fn desk(rotate: f64) -> OrientedBox {
    let mut d = OrientedBox::new("table", Vec2::new(300.0, 200.0), 120.0, 60.0, rotate);
    d.height = 75.0;
    d
}

fn lamp_on(parent: &OrientedBox, local: Vec2) -> OrientedBox {
    let c = parent.center() + local.rotate_deg(parent.rotate);
    OrientedBox::new("table_lamp", c, 25.0, 25.0, parent.rotate)
}

#[test]
fn memorized_lamp_is_recovered_as_child() {
    let palette = Palette::fine();
    let canvas = Canvas::square(64, 0);
    let schedule = NoiseSchedule::from_spec(ScheduleSpec {
        steps: 50,
        ..ScheduleSpec::default()
    })
    .unwrap();
    for rotate in [0.0, 90.0] {
        let parent = desk(rotate);
        let target = rasterize_fine_layout(&parent, &[lamp_on(&parent, Vec2::new(30.0, 10.0))], &palette, canvas).unwrap();
        let stub = MemorizingDenoiser {
            x0: image_to_tensor(&target),
            schedule: schedule.clone(),
        };
        let level = FineLevel::new(&stub, &palette, &schedule, canvas);
        let db = builtin_assets();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fine = fine_grained_generate(&parent, &level, &db, &mut rng).unwrap();
        assert_eq!(fine.children.len(), 1, "rotate {rotate}");
        assert!(fine.discarded.is_empty());
        let lamp = &fine.children[0];
        assert_eq!(lamp.bbox.category, "table_lamp");
        // one pixel is 200 / 64 cm
        let px = 200.0 / 64.0;
        assert!((lamp.bbox.pos[0] - 30.0).abs() <= px, "{:?}", lamp.bbox);
        assert!((lamp.bbox.pos[1] - 10.0).abs() <= px, "{:?}", lamp.bbox);
        assert_eq!(lamp.bbox.pos[2], 75.0);
        assert!((lamp.bbox.length - 25.0).abs() <= 2.0 * px);
        assert_eq!(lamp.asset.as_ref().unwrap().category, "table_lamp");
        assert!(lamp.flags.is_empty());

        let mut node = ObjectNode::retrieve(parent.clone(), &db);
        node.set_children(fine);
        assert_eq!(node.count(), 2);
        assert!(!node.flags.iter().any(|f| matches!(f, NodeFlag::DiscardedChild { .. })));
    }
}
