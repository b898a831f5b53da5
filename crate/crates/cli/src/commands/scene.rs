use rayon::prelude::*;
use serde_json::{json, Value};

use roomgen_core::metrics::corpus_metrics;
use roomgen_core::raster::rasterize_room_types;
use roomgen_core::raster::{rasterize_floorplan, rasterize_layout};
use roomgen_core::scene::{generate_toy_scene, serialize_scene, validate_scene_with, CollisionMode, Scene};

use super::{load_scene, load_scene_or_detections, stem, GenToyArgs, MetricsArgs, RasterizeArgs, StatsArgs, ValidateArgs};
use crate::config::RunConfig;
use crate::output::{collect_json_inputs, csv_with_meta, json_with_meta, note, png_bytes, pretty, Failure, Meta, Result, Sink};

pub fn validate(args: ValidateArgs, cfg: &RunConfig) -> Result<()> {
    let palette = cfg.house_palette()?;
    let files = collect_json_inputs(&args.inputs)?;
    let reports: Vec<Result<Value>> = files
        .par_iter()
        .map(|f| {
            let scene = load_scene(f)?;
            let r = validate_scene_with(&scene, &palette);
            Ok(json!({
                "file": f.display().to_string(),
                "clean": r.is_clean(),
                "violations": r.violations,
            }))
        })
        .collect();
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let bad = reports.iter().filter(|r| r["clean"] == false).count();
    let warnings: usize = reports.iter().map(|r| r["violations"].as_array().map_or(0, Vec::len)).sum();
    if let Some(o) = &args.output {
        let meta = Meta::new("validate", cfg);
        Sink::parse(o).write(pretty(&json_with_meta(Value::Array(reports), "reports", &meta)).as_bytes())?;
    }
    note(format!("{} scene(s), {bad} with structural problems, {warnings} finding(s)", files.len()));
    if bad > 0 {
        return Err(Failure::new("validation", format!("{bad} scene(s) failed validation")));
    }
    Ok(())
}

fn load_all(inputs: &[std::path::PathBuf], detections: bool) -> Result<Vec<Scene>> {
    let files = collect_json_inputs(inputs)?;
    let scenes: Vec<Result<Scene>> = files
        .par_iter()
        .map(|f| if detections { load_scene_or_detections(f) } else { load_scene(f) })
        .collect();
    scenes.into_iter().collect()
}

pub fn stats(args: StatsArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let scenes = load_all(&args.inputs, false)?;
    let m = corpus_metrics(&scenes)?;
    let meta = Meta::new(name, cfg);
    let dir = &args.output;
    let write = |file: &str, body: String| Sink::File(dir.join(file)).write(body.as_bytes());
    write("metrics.json", pretty(&json_with_meta(serde_json::to_value(&m)?, "metrics", &meta)))?;
    write("metrics.txt", m.to_table())?;
    write("categories.csv", csv_with_meta(&m.category_csv(), &meta))?;
    write("room_counts.csv", csv_with_meta(&m.room_count_csv(), &meta))?;
    write("furniture_counts.csv", csv_with_meta(&m.furniture_count_csv(), &meta))?;
    note(format!("{} scene(s) summarized into {}", m.scene_count, dir.display()));
    Ok(())
}

pub fn rasterize(args: RasterizeArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let palette = cfg.house_palette()?;
    let files = collect_json_inputs(&args.inputs)?;
    let meta = Meta::new(name, cfg);
    let results: Vec<Result<()>> = files
        .par_iter()
        .map(|f| {
            let scene = load_scene(f)?;
            let s = stem(f);
            let out = |suffix: &str| Sink::File(args.output.join(format!("{s}_{suffix}.png")));
            let layout = rasterize_layout(&scene, &palette, cfg.canvas).map_err(|e| Failure::from(e).at(f))?;
            out("layout").write(&png_bytes(&layout, &meta)?)?;
            let plan = rasterize_floorplan(&scene, &palette, cfg.canvas).map_err(|e| Failure::from(e).at(f))?;
            out("floorplan").write(&png_bytes(&plan, &meta)?)?;
            if args.room_types {
                let rooms = rasterize_room_types(&scene, &palette, cfg.canvas).map_err(|e| Failure::from(e).at(f))?;
                out("rooms").write(&png_bytes(&rooms, &meta)?)?;
            }
            Ok(())
        })
        .collect();
    results.into_iter().collect::<Result<()>>()?;
    note(format!("rasterized {} scene(s)", files.len()));
    Ok(())
}

pub fn gen_toy(args: GenToyArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    if let Some(m) = &args.mode {
        m.parse::<CollisionMode>()?;
    }
    let sink = Sink::parse(&args.output);
    if sink == Sink::Stdout && args.count != 1 {
        return Err(Failure::new("usage", "stdout output takes exactly one scene"));
    }
    let meta = Meta::new(name, cfg);
    let seeds: Vec<u64> = (0..args.count as u64).map(|i| cfg.seed + i).collect();
    let docs: Vec<Result<(u64, String)>> = seeds
        .par_iter()
        .map(|&seed| {
            let scene = generate_toy_scene(seed, &cfg.toy)?;
            let v: Value = serde_json::from_str(&serialize_scene(&scene))?;
            let mut v = json_with_meta(v, "scene", &meta);
            v["meta"]["seed"] = json!(seed);
            Ok((seed, pretty(&v)))
        })
        .collect();
    for d in docs {
        let (seed, body) = d?;
        match &sink {
            Sink::Stdout => sink.write(body.as_bytes())?,
            Sink::File(dir) => Sink::File(dir.join(format!("scene_{seed}.json"))).write(body.as_bytes())?,
        }
    }
    note(format!("generated {} toy scene(s)", args.count));
    Ok(())
}

pub fn metrics(args: MetricsArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let scenes = load_all(&args.inputs, true)?;
    let m = corpus_metrics(&scenes)?;
    let meta = Meta::new(name, cfg);
    let body = if args.format == "table" {
        format!("# {}\n{}", meta.to_json(), m.to_table())
    } else {
        let mut v = json_with_meta(serde_json::to_value(&m)?, "metrics", &meta);
        v["fid"] = json!("n/a");
        v["kid"] = json!("n/a");
        pretty(&v)
    };
    Sink::parse(&args.output).write(body.as_bytes())
}
