use rayon::prelude::*;
use serde_json::Value;

use roomgen_core::perception::{detect_objects, detections_to_json, segment_rooms, segment_rooms_image, RoomMask};
use roomgen_core::raster::{decode_png, rasterize_floorplan, Canvas, LayoutImage, Palette};
use roomgen_core::scene::{Opening, OrientedBox};
use roomgen_core::scenegraph::{build_scene_graph, export_graph_json_pretty, export_svg, fine_grained_generate, FineLevel, SceneGraph};

use super::model::{load_checkpoint, sample_layout};
use super::{detections_from_value, load_png, load_scene, rng_for, DetectArgs, GraphArgs, PipelineArgs};
use crate::config::RunConfig;
use crate::output::{json_with_meta, note, png_bytes, pretty, read_text, svg_with_meta, Failure, Meta, Result, Sink};

fn detections_doc(img: &LayoutImage, palette: &Palette, cfg: &RunConfig, meta: &Meta) -> Result<String> {
    let dets = detect_objects(img, palette, None, &cfg.detect)?;
    let list: Value = serde_json::from_str(&detections_to_json(&dets))?;
    Ok(pretty(&json_with_meta(list, "detections", meta)))
}

pub fn detect(args: DetectArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let palette = if args.fine { cfg.fine_palette()? } else { cfg.house_palette()? };
    let img = load_png(&args.input)?;
    let doc = detections_doc(&img, &palette, cfg, &Meta::new(name, cfg))?;
    Sink::parse(&args.output).write(doc.as_bytes())
}

/// Rooms, openings and objects a graph is built from.
struct GraphInputs {
    objects: Vec<OrientedBox>,
    rooms: Vec<RoomMask>,
    openings: Vec<Opening>,
}

fn graph_with_children(inputs: &GraphInputs, cfg: &RunConfig, fine: Option<&std::path::Path>) -> Result<SceneGraph> {
    let db = cfg.asset_db()?;
    let mut graph = build_scene_graph(&inputs.objects, &inputs.rooms, &inputs.openings, &db, &cfg.graph);
    let Some(path) = fine else {
        return Ok(graph);
    };
    let palette = cfg.fine_palette()?;
    let (model, schedule, size) = load_checkpoint(path, &palette)?;
    let mut level = FineLevel::new(&model, &palette, &schedule, Canvas { width: size[0], height: size[1], margin: 0 });
    level.detect = cfg.detect.clone();
    let mut nodes: Vec<_> = graph.objects_mut().collect();
    let results: Vec<Result<()>> = nodes
        .par_iter_mut()
        .enumerate()
        .map(|(i, node)| {
            if !level.supports(&node.bbox.category) {
                return Ok(());
            }
            let mut rng = rng_for(cfg.seed);
            rng.set_stream(i as u64 + 1);
            let kids = fine_grained_generate(&node.bbox, &level, &db, &mut rng)?;
            node.set_children(kids);
            Ok(())
        })
        .collect();
    results.into_iter().collect::<Result<()>>()?;
    Ok(graph)
}

fn write_graph(graph: &SceneGraph, cfg: &RunConfig, meta: &Meta, out: &Sink, svg: Option<&Sink>) -> Result<()> {
    let v: Value = serde_json::from_str(&export_graph_json_pretty(graph))?;
    out.write(pretty(&json_with_meta(v, "graph", meta)).as_bytes())?;
    if let Some(s) = svg {
        let palette = cfg.house_palette()?;
        s.write(svg_with_meta(&export_svg(graph, &palette), meta).as_bytes())?;
    }
    note(format!(
        "{} room(s), {} object(s), {} unassigned",
        graph.house.rooms.len(),
        graph.object_count(),
        graph.house.unassigned.len()
    ));
    Ok(())
}

pub fn graph(args: GraphArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let palette = cfg.house_palette()?;
    let mut inputs = GraphInputs {
        objects: Vec::new(),
        rooms: Vec::new(),
        openings: Vec::new(),
    };
    if let Some(p) = &args.scene {
        let scene = load_scene(p)?;
        inputs.rooms = segment_rooms(&scene);
        inputs.openings = scene.openings.clone();
        inputs.objects = scene.furniture;
    } else if let Some(p) = &args.floorplan {
        inputs.rooms = segment_rooms_image(&load_png(p)?, &palette, &cfg.detect)?;
    }
    if let Some(p) = &args.detections {
        let v: Value = serde_json::from_str(&read_text(p)?).map_err(|e| Failure::from(e).at(p))?;
        inputs.objects = detections_from_value(&v).map_err(|e| e.at(p))?;
    } else if args.scene.is_none() {
        return Err(Failure::new("usage", "graph needs --detections or --scene"));
    }
    let g = graph_with_children(&inputs, cfg, args.fine_checkpoint.as_deref())?;
    let svg = args.svg.clone().map(Sink::File);
    write_graph(&g, cfg, &Meta::new(name, cfg), &Sink::parse(&args.output), svg.as_ref())
}

/// Floor plan → sampled layout → detections → scene graph and SVG. Every
/// intermediate goes through the same bytes the single commands would
/// write and read, so chaining them gives identical results.
pub fn pipeline(args: PipelineArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let palette = cfg.house_palette()?;
    let meta = Meta::new(name, cfg);
    let dir = &args.output;
    let (plan, scene) = match (&args.floorplan, &args.scene) {
        (_, Some(p)) => {
            let scene = load_scene(p)?;
            let plan = rasterize_floorplan(&scene, &palette, cfg.canvas).map_err(|e| Failure::from(e).at(p))?;
            let bytes = png_bytes(&plan, &meta)?;
            Sink::File(dir.join("floorplan.png")).write(&bytes)?;
            (decode_png(&bytes)?, Some(scene))
        }
        (Some(p), None) => (load_png(p)?, None),
        (None, None) => return Err(Failure::new("usage", "pipeline needs --floorplan or --scene")),
    };
    let (model, schedule, size) = load_checkpoint(&args.checkpoint, &palette)?;
    if [plan.width, plan.height] != size {
        return Err(Failure::new(
            "input",
            format!("floor plan is {}x{}, checkpoint expects {}x{}", plan.width, plan.height, size[0], size[1]),
        ));
    }
    let layout = sample_layout(&model, &schedule, &plan, cfg.seed)?;
    let layout_bytes = png_bytes(&layout, &meta)?;
    Sink::File(dir.join("layout.png")).write(&layout_bytes)?;

    let doc = detections_doc(&decode_png(&layout_bytes)?, &palette, cfg, &meta)?;
    Sink::File(dir.join("detections.json")).write(doc.as_bytes())?;
    let objects = detections_from_value(&serde_json::from_str(&doc)?)?;

    let inputs = match scene {
        Some(s) => GraphInputs {
            objects,
            rooms: segment_rooms(&s),
            openings: s.openings,
        },
        None => GraphInputs {
            objects,
            rooms: segment_rooms_image(&plan, &palette, &cfg.detect)?,
            openings: Vec::new(),
        },
    };
    let g = graph_with_children(&inputs, cfg, args.fine_checkpoint.as_deref())?;
    write_graph(
        &g,
        cfg,
        &meta,
        &Sink::File(dir.join("graph.json")),
        Some(&Sink::File(dir.join("graph.svg"))),
    )
}
