use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roomgen_core::raster::read_png;
use roomgen_core::scene::parse_scene;
use serde_json::Value;

fn roomgen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roomgen"))
        .current_dir(dir)
        .env_remove("ROOMGEN_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = roomgen(dir, args);
    assert!(
        out.status.success(),
        "roomgen {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn without_meta(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("meta");
    v
}

fn error_of(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    serde_json::from_str::<Value>(line).expect("error is JSON")["error"].clone()
}

#[test]
fn gen_toy_forbid_then_metrics_gives_zero_por() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--seed", "1", "gen-toy", "--mode", "forbid", "--count", "5", "-o", "toy"]);
    ok(d.path(), &["metrics", "toy", "-o", "m.json"]);
    let m = read_json(d.path().join("m.json"));
    assert_eq!(m["scene_count"], 5);
    assert_eq!(m["mean_por"].as_f64(), Some(0.0));
    assert_eq!(m["meta"]["command"], "metrics");
    assert_eq!(m["fid"], "n/a");
}

#[test]
fn rasterize_detect_metrics_round_trip_stays_collision_free() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--seed", "100", "gen-toy", "--count", "8", "-o", "toy"]);
    ok(p, &["--size", "256", "--margin", "8", "rasterize", "toy", "-o", "img"]);
    let mut dets = Vec::new();
    for seed in 100..108 {
        let det = format!("det/scene_{seed}.json");
        ok(p, &["detect", &format!("img/scene_{seed}_layout.png"), "-o", &det]);
        let scene = parse_scene(&std::fs::read(p.join(format!("toy/scene_{seed}.json"))).unwrap()).unwrap();
        let n = read_json(p.join(&det))["detections"].as_array().unwrap().len();
        assert_eq!(n, scene.furniture.len(), "scene {seed}");
        dets.push(det);
    }
    ok(p, &["metrics", "det", "-o", "m.json"]);
    let m = read_json(p.join("m.json"));
    assert_eq!(m["scene_count"], 8);
    assert!(m["mean_piou"].as_f64().unwrap() <= 0.005, "{m}");
}

#[test]
fn errors_are_json_on_stderr() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("bad.json"), "{\"rooms\": [}").unwrap();
    let out = roomgen(p, &["metrics", "bad.json", "-o", "-"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let e = error_of(&out);
    assert_eq!(e["kind"], "scene");
    assert!(e["message"].as_str().unwrap().contains("bad.json"));

    let out = roomgen(p, &["detect", "missing.png", "-o", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["kind"], "io");

    let out = roomgen(p, &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "usage");

    let out = roomgen(p, &["--threads", "0", "metrics", "x", "-o", "-"]);
    assert_eq!(error_of(&out)["kind"], "config");
}

#[test]
fn config_file_then_flags() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("run.toml"), "seed = 5\nthreads = 2\n[canvas]\nwidth = 32\nheight = 32\n").unwrap();
    let out = ok(p, &["--config", "run.toml", "--seed", "9", "--print-config", "metrics", "x", "-o", "-"]);
    let cfg: toml::Value = toml::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg["seed"].as_integer(), Some(9));
    assert_eq!(cfg["threads"].as_integer(), Some(2));
    assert_eq!(cfg["canvas"]["width"].as_integer(), Some(32));

    let out = Command::new(env!("CARGO_BIN_EXE_roomgen"))
        .current_dir(p)
        .env("ROOMGEN_CONFIG", "run.toml")
        .args(["--print-config", "metrics", "x", "-o", "-"])
        .output()
        .unwrap();
    let cfg: toml::Value = toml::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg["seed"].as_integer(), Some(5));

    std::fs::write(p.join("typo.toml"), "sed = 5\n").unwrap();
    let out = roomgen(p, &["--config", "typo.toml", "metrics", "x", "-o", "-"]);
    assert_eq!(error_of(&out)["kind"], "config");

    let out = ok(p, &["--version"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("roomgen "));
}

#[test]
fn outputs_carry_metadata_and_are_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--seed", "7", "gen-toy", "-o", "a"]);
    ok(p, &["--seed", "7", "gen-toy", "-o", "b"]);
    let a = std::fs::read(p.join("a/scene_7.json")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b/scene_7.json")).unwrap());
    let scene = read_json(p.join("a/scene_7.json"));
    assert_eq!(scene["meta"]["seed"], 7);
    assert_eq!(scene["meta"]["tool"], "roomgen");
    assert!(scene["meta"]["config"]["canvas"].is_object());

    let out = ok(p, &["--seed", "7", "gen-toy", "-o", "-"]);
    assert_eq!(out.stdout, a);
    let out = ok(p, &["--seed", "7", "--size", "64", "rasterize", "a/scene_7.json", "-o", "img"]);
    assert!(out.stdout.is_empty());
    let png = std::fs::read(p.join("img/scene_7_layout.png")).unwrap();
    assert!(png.windows(15).any(|w| w == b"\"seed\":7,\"tool\""));
    ok(p, &["stats", "a", "-o", "stats"]);
    let csv = std::fs::read_to_string(p.join("stats/categories.csv")).unwrap();
    assert!(csv.starts_with("# {"));
    assert_eq!(csv.lines().nth(1), Some("category,count"));
    ok(p, &["graph", "--scene", "a/scene_7.json", "-o", "g.json", "--svg", "g.svg"]);
    let svg = std::fs::read_to_string(p.join("g.svg")).unwrap();
    assert!(svg.contains("<metadata>{&quot;command&quot;:&quot;graph&quot;") || svg.contains("<metadata>{\"command\":\"graph\""));
    assert_eq!(read_json(p.join("g.json"))["meta"]["command"], "graph");
}

fn with<'a>(config: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["--config", config];
    v.extend_from_slice(rest);
    v
}

fn write_toml(p: &Path, name: &str, body: &str) -> PathBuf {
    let f = p.join(name);
    std::fs::write(&f, body).unwrap();
    f
}

#[test]
fn pipeline_equals_chained_commands() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write_toml(
        p,
        "small.toml",
        "seed = 3\n[canvas]\nwidth = 32\nheight = 32\nmargin = 2\n[model]\nwidths = [4, 8]\n\
         [schedule]\nsteps = 20\n[train]\nepochs = 2\nbatch_size = 2\n",
    );
    ok(p, &with("small.toml", &["gen-toy", "--count", "3", "-o", "toy"]));
    ok(p, &with("small.toml", &["train", "toy", "-o", "ckpt.json"]));
    assert!(p.join("ckpt.json.loss.csv").exists());

    ok(p, &with("small.toml", &["pipeline", "--checkpoint", "ckpt.json", "--scene", "toy/scene_3.json", "-o", "pipe"]));
    ok(p, &with("small.toml", &["rasterize", "toy/scene_3.json", "-o", "chain"]));
    ok(p, &with("small.toml", &["sample", "--checkpoint", "ckpt.json", "--floorplan", "chain/scene_3_floorplan.png", "-o", "chain/layout.png"]));
    ok(p, &with("small.toml", &["detect", "chain/layout.png", "-o", "chain/det.json"]));
    ok(
        p,
        &with("small.toml", &["graph", "--detections", "chain/det.json", "--scene", "toy/scene_3.json", "-o", "chain/g.json", "--svg", "chain/g.svg"]),
    );

    let a = read_png(&p.join("pipe/layout.png")).unwrap();
    let b = read_png(&p.join("chain/layout.png")).unwrap();
    assert_eq!(a.pixels, b.pixels);
    assert_eq!(
        without_meta(read_json(p.join("pipe/detections.json"))),
        without_meta(read_json(p.join("chain/det.json")))
    );
    assert_eq!(
        without_meta(read_json(p.join("pipe/graph.json"))),
        without_meta(read_json(p.join("chain/g.json")))
    );
    let strip = |s: String| s.lines().filter(|l| !l.starts_with("<metadata>")).collect::<Vec<_>>().join("\n");
    assert_eq!(
        strip(std::fs::read_to_string(p.join("pipe/graph.svg")).unwrap()),
        strip(std::fs::read_to_string(p.join("chain/g.svg")).unwrap())
    );

    let out = ok(p, &with("small.toml", &["--threads", "3", "train", "toy", "-o", "ckpt3.json"]));
    drop(out);
    let strip_meta = |f: &str| without_meta(read_json(p.join(f)));
    assert_eq!(strip_meta("ckpt.json")["params"], strip_meta("ckpt3.json")["params"]);

    let out = roomgen(p, &with("small.toml", &["--size", "64", "sample", "--checkpoint", "ckpt.json", "--floorplan", "pipe/floorplan.png", "-o", "x.png"]));
    assert!(out.status.success(), "size flag does not change an existing image");
    let out = roomgen(p, &["sample", "--checkpoint", "ckpt.json", "--floorplan", "nope.png", "-o", "x.png"]);
    assert_eq!(error_of(&out)["kind"], "io");
}

/// One layout memorised by overfitting; the pipeline must draw its objects.
#[test]
fn pipeline_with_overfit_checkpoint_draws_memorized_objects() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write_toml(
        p,
        "overfit.toml",
        "seed = 1\n[canvas]\nwidth = 32\nheight = 32\nmargin = 2\n\
         [train]\nlearning_rate = 0.002\nmilestones = [2000, 2600]\nbatch_size = 8\nepochs = 3000\n",
    );
    let scene = r#"{
        "rooms": [{"roomId": "R0", "roomName": "bedroom", "roomType": 2,
                   "wallPoints": [[0, 0], [500, 0], [500, 400], [0, 400]]}],
        "windowsDoors": [],
        "furniture": [
            {"type": "bed", "pos": [140, 200, 0], "length": 200, "width": 180, "height": 50, "rotate": 90},
            {"type": "sofa", "pos": [380, 120, 0], "length": 220, "width": 90, "height": 80, "rotate": 180}
        ]
    }"#;
    std::fs::write(p.join("room.json"), scene).unwrap();
    std::fs::create_dir_all(p.join("copies")).unwrap();
    for i in 0..8 {
        std::fs::write(p.join(format!("copies/c{i}.json")), scene).unwrap();
    }
    ok(p, &with("overfit.toml", &["train", "copies", "-o", "ckpt.json"]));
    ok(p, &with("overfit.toml", &["pipeline", "--checkpoint", "ckpt.json", "--scene", "room.json", "-o", "out"]));

    let svg = std::fs::read_to_string(p.join("out/graph.svg")).unwrap();
    let drawn: Vec<&str> = svg
        .split("data-category=\"")
        .skip(1)
        .map(|s| &s[..s.find('"').unwrap()])
        .collect();
    for want in ["bed", "sofa"] {
        assert!(drawn.contains(&want), "{want} missing from {drawn:?}");
    }
}
