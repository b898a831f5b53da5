use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use roomgen_core::diffusion::DiffusionError;
use roomgen_core::metrics::MetricsError;
use roomgen_core::perception::PerceptionError;
use roomgen_core::raster::{encode_png, LayoutImage, RasterError};
use roomgen_core::scene::SceneError;
use roomgen_core::scenegraph::GraphError;

use crate::config::RunConfig;

/// Error reported as one JSON object on stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Failure {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn at(self, path: &Path) -> Self {
        Failure {
            message: format!("{}: {}", path.display(), self.message),
            ..self
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self }).to_string()
    }
}

macro_rules! failure_from {
    ($($t:ty => $kind:literal),* $(,)?) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new($kind, e.to_string())
            }
        })*
    };
}

failure_from! {
    std::io::Error => "io",
    serde_json::Error => "json",
    SceneError => "scene",
    RasterError => "raster",
    DiffusionError => "diffusion",
    PerceptionError => "perception",
    GraphError => "graph",
    MetricsError => "metrics",
}

pub type Result<T> = std::result::Result<T, Failure>;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::from(e).at(path))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::from(e).at(path))
}

/// Provenance attached to every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
}

impl<'a> Meta<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        Meta {
            tool: "roomgen",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seed,
            config,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("meta serializes")
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }
}

/// Where data goes: a file, or stdout for `-`.
#[derive(Debug, Clone, PartialEq)]
pub enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    pub fn parse(s: &str) -> Sink {
        if s == "-" {
            Sink::Stdout
        } else {
            Sink::File(PathBuf::from(s))
        }
    }

    pub fn write(&self, bytes: &[u8]) -> Result<()> {
        match self {
            Sink::Stdout => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(())
            }
            Sink::File(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| Failure::from(e).at(dir))?;
                }
                std::fs::write(p, bytes).map_err(|e| Failure::from(e).at(p))
            }
        }
    }
}

/// Insert `meta` into a JSON object, or wrap a bare array as
/// `{"meta": .., key: [..]}`.
pub fn json_with_meta(value: Value, key: &str, meta: &Meta) -> Value {
    match value {
        Value::Object(mut m) => {
            m.insert("meta".into(), meta.to_value());
            Value::Object(m)
        }
        other => json!({ "meta": meta.to_value(), key: other }),
    }
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

pub fn png_bytes(img: &LayoutImage, meta: &Meta) -> Result<Vec<u8>> {
    Ok(encode_png(img, Some(&meta.to_json()))?)
}

/// CSV with a leading `#` comment line carrying the metadata.
pub fn csv_with_meta(csv: &str, meta: &Meta) -> String {
    format!("# {}\n{csv}", meta.to_json())
}

pub fn svg_with_meta(svg: &str, meta: &Meta) -> String {
    let tag = format!("<metadata>{}</metadata>\n", escape_xml(&meta.to_json()));
    let open_end = svg.find("<svg").and_then(|i| svg[i..].find('>').map(|j| i + j + 1));
    match open_end {
        Some(at) => format!("{}\n{}{}", &svg[..at], tag.trim_end(), &svg[at..]),
        None => svg.to_string(),
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Files named on the command line, with directories expanded to their
/// `.json` entries in name order.
pub fn collect_json_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Failure::from(e).at(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Failure::new("usage", "no input files"));
    }
    Ok(out)
}

/// Progress and warnings go to stderr.
pub fn note(msg: impl AsRef<str>) {
    eprintln!("roomgen: {}", msg.as_ref());
}
