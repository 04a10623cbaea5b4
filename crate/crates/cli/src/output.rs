//! Output directory, artifact files and run manifests.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const OUTPUT_DIR_ENV: &str = "WEX_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "wex-out";

const DENSITY_1D: &str = include_str!("../gnuplot/density_1d.gp");
const TRIANGLE_HEATMAP: &str = include_str!("../gnuplot/triangle_heatmap.gp");

/// Flag, then config file, then `WEX_OUTPUT_DIR`, then `wex-out`.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Artifacts of one command, all named `<command>_<suffix>`.
pub struct Artifacts {
    pub dir: PathBuf,
    pub command: String,
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: PathBuf, command: &str) -> io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command: command.to_string(),
            files: Vec::new(),
        })
    }

    pub fn name(&self, suffix: &str) -> String {
        format!("{}_{suffix}", self.command)
    }

    pub fn create(&mut self, suffix: &str) -> io::Result<BufWriter<File>> {
        let path = self.dir.join(self.name(suffix));
        let file = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    pub fn write_json<T: Serialize>(&mut self, suffix: &str, value: &T) -> io::Result<()> {
        let mut w = self.create(suffix)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()
    }

    pub fn write_text(&mut self, suffix: &str, text: &str) -> io::Result<()> {
        let mut w = self.create(suffix)?;
        w.write_all(text.as_bytes())?;
        w.flush()
    }

    /// Plot script for a segment density CSV written under `data_suffix`.
    pub fn plot_1d(&mut self, data_suffix: &str, times: &[f64]) -> io::Result<()> {
        let times: Vec<String> = times.iter().map(f64::to_string).collect();
        let head = format!(
            "datafile = \"{}\"\noutfile = \"{}\"\ntimes = \"{}\"\n",
            self.name(data_suffix),
            self.name("density.png"),
            times.join(" ")
        );
        self.write_text("plot.gp", &(head + DENSITY_1D))
    }

    /// Plot script for a triangle density CSV written under `data_suffix`.
    pub fn plot_triangle(&mut self, data_suffix: &str, time: f64, total: f64) -> io::Result<()> {
        let head = format!(
            "datafile = \"{}\"\noutfile = \"{}\"\ntime = {time}\ntotal = {total}\n",
            self.name(data_suffix),
            self.name("heatmap.png"),
        );
        self.write_text("plot.gp", &(head + TRIANGLE_HEATMAP))
    }
}

#[derive(Debug, Serialize)]
struct OutputRecord {
    file: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Versions {
    #[serde(rename = "wex-cli")]
    cli: &'static str,
    #[serde(rename = "wex-core")]
    core: &'static str,
    os: &'static str,
    arch: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    wex_manifest: u32,
    command: &'a str,
    created: String,
    status: &'a str,
    versions: Versions,
    threads: usize,
    argv: Vec<String>,
    config: serde_json::Value,
    outputs: Vec<OutputRecord>,
}

/// The config as JSON without unset fields or empty blocks.
fn pruned(config: &RunConfig) -> io::Result<serde_json::Value> {
    fn prune(v: &mut serde_json::Value) -> bool {
        match v {
            serde_json::Value::Null => false,
            serde_json::Value::Object(map) => {
                map.retain(|_, child| prune(child));
                !map.is_empty()
            }
            _ => true,
        }
    }
    let mut value = serde_json::to_value(config)?;
    prune(&mut value);
    Ok(value)
}

fn digest(path: &Path) -> io::Result<(u64, String)> {
    let bytes = fs::read(path)?;
    let hash = Sha256::digest(&bytes);
    let hex = hash.iter().map(|b| format!("{b:02x}")).collect();
    Ok((bytes.len() as u64, hex))
}

/// Writes `<command>_manifest_<UTC timestamp>.json` and returns its path.
/// Feeding the manifest back through `wex run --config` repeats the run.
pub fn write_manifest(artifacts: &Artifacts, config: &RunConfig, status: &str) -> io::Result<PathBuf> {
    let now = chrono::Utc::now();
    let outputs = artifacts
        .files
        .iter()
        .map(|p| {
            let (bytes, sha256) = digest(p)?;
            Ok(OutputRecord {
                file: p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                bytes,
                sha256,
            })
        })
        .collect::<io::Result<Vec<_>>>()?;
    let manifest = Manifest {
        wex_manifest: 1,
        command: &artifacts.command,
        created: now.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        status,
        versions: Versions {
            cli: env!("CARGO_PKG_VERSION"),
            core: wex_core::VERSION,
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
        },
        threads: rayon::current_num_threads(),
        argv: std::env::args().collect(),
        config: pruned(config)?,
        outputs,
    };
    let path = artifacts.dir.join(format!(
        "{}_manifest_{}.json",
        artifacts.command,
        now.format("%Y%m%dT%H%M%S%.3fZ")
    ));
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(path)
}
