use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use roomgen_core::diffusion::{
    image_to_tensor, loss_curve_csv, ood_score, sample_image, train_with_progress, Checkpoint, NoiseSchedule, Tensor, TinyUNet,
};
use roomgen_core::raster::{rasterize_floorplan, rasterize_layout, LayoutImage, Palette};

use super::{load_png, load_scene, rng_for, OodArgs, SampleArgs, TrainArgs};
use crate::config::RunConfig;
use crate::output::{collect_json_inputs, csv_with_meta, json_with_meta, note, png_bytes, pretty, read_text, Failure, Meta, Result, Sink};

pub fn train(args: TrainArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let palette = cfg.house_palette()?;
    let schedule = NoiseSchedule::from_spec(cfg.schedule)?;
    let k = cfg.model.size_multiple();
    if cfg.canvas.width % k != 0 || cfg.canvas.height % k != 0 {
        return Err(Failure::new(
            "config",
            format!("canvas {}x{} is not a multiple of {k}", cfg.canvas.width, cfg.canvas.height),
        ));
    }
    let files = collect_json_inputs(&args.inputs)?;
    let pairs: Vec<Result<(Tensor<f32>, Tensor<f32>)>> = files
        .par_iter()
        .map(|f| {
            let scene = load_scene(f)?;
            let layout = rasterize_layout(&scene, &palette, cfg.canvas).map_err(|e| Failure::from(e).at(f))?;
            let plan = rasterize_floorplan(&scene, &palette, cfg.canvas).map_err(|e| Failure::from(e).at(f))?;
            Ok((image_to_tensor(&layout.quantized()), image_to_tensor(&plan.quantized())))
        })
        .collect();
    let data = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut model: TinyUNet<f32> = TinyUNet::new(cfg.model.clone(), cfg.seed);
    note(format!(
        "training on {} scene(s), {} parameters, {} epoch(s)",
        data.len(),
        model.num_params(),
        cfg.train.epochs
    ));
    let report = train_with_progress(&mut model, &data, &schedule, &cfg.train, |e, l| {
        note(format!("epoch {e} loss {l:.6}"))
    })?;
    let ckpt = Checkpoint::new(&model, &schedule, &palette, [cfg.canvas.width, cfg.canvas.height]);
    let meta = Meta::new(name, cfg);
    let v = json_with_meta(serde_json::to_value(&ckpt)?, "checkpoint", &meta);
    let sink = Sink::parse(&args.output);
    sink.write(v.to_string().as_bytes())?;
    let csv_path = match (&args.loss_csv, &sink) {
        (Some(p), _) => Some(p.clone()),
        (None, Sink::File(p)) => Some(PathBuf::from(format!("{}.loss.csv", p.display()))),
        (None, Sink::Stdout) => None,
    };
    if let Some(p) = csv_path {
        Sink::File(p).write(csv_with_meta(&loss_curve_csv(&report), &meta).as_bytes())?;
    }
    Ok(())
}

pub(super) fn load_checkpoint(path: &Path, palette: &Palette) -> Result<(TinyUNet<f32>, NoiseSchedule, [usize; 2])> {
    let ckpt = Checkpoint::from_json(&read_text(path)?).map_err(|e| Failure::from(e).at(path))?;
    ckpt.check_palette(palette).map_err(|e| Failure::from(e).at(path))?;
    Ok((ckpt.model()?, ckpt.schedule()?, ckpt.image_size))
}

fn check_size(img: &LayoutImage, size: [usize; 2], what: &Path) -> Result<()> {
    if [img.width, img.height] != size {
        return Err(Failure::new(
            "input",
            format!("image is {}x{}, checkpoint expects {}x{}", img.width, img.height, size[0], size[1]),
        )
        .at(what));
    }
    Ok(())
}

/// Sample a layout for `plan`, seeded by `seed`.
pub(super) fn sample_layout(
    model: &TinyUNet<f32>,
    schedule: &NoiseSchedule,
    plan: &LayoutImage,
    seed: u64,
) -> Result<LayoutImage> {
    let mut rng = rng_for(seed);
    Ok(sample_image(model, plan, schedule, &mut rng)?)
}

pub fn sample(args: SampleArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let palette = cfg.house_palette()?;
    let (model, schedule, size) = load_checkpoint(&args.checkpoint, &palette)?;
    let plan = load_png(&args.floorplan)?;
    check_size(&plan, size, &args.floorplan)?;
    let img = sample_layout(&model, &schedule, &plan, cfg.seed)?;
    Sink::parse(&args.output).write(&png_bytes(&img, &Meta::new(name, cfg))?)
}

pub fn ood(args: OodArgs, cfg: &RunConfig, name: &str) -> Result<()> {
    let palette = cfg.house_palette()?;
    let (model, schedule, size) = load_checkpoint(&args.checkpoint, &palette)?;
    let layout = load_png(&args.layout)?;
    let plan = load_png(&args.floorplan)?;
    check_size(&layout, size, &args.layout)?;
    check_size(&plan, size, &args.floorplan)?;
    let (lo, hi) = schedule.scaled_range(cfg.ood.t_lo, cfg.ood.t_hi);
    let mut rng = rng_for(cfg.seed);
    let score = ood_score(
        &model,
        &image_to_tensor(&layout),
        &image_to_tensor(&plan),
        &schedule,
        &mut rng,
        lo,
        hi,
        cfg.ood.iters,
    )?;
    let v: Value = json!({ "score": score, "t_lo": lo, "t_hi": hi, "steps": schedule.steps(), "iters": cfg.ood.iters });
    Sink::parse(&args.output).write(pretty(&json_with_meta(v, "ood", &Meta::new(name, cfg))).as_bytes())
}
