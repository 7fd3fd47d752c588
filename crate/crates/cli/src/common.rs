//! Shared plumbing: unit/grid/packet resolution and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempus_core::state::{GaussianComponent, MomentumGrid, TimeGrid, UnitSystem, WavePacket};

use crate::config::{Config, Section};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reproducibility record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: BTreeMap<String, BTreeMap<String, String>>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    /// Scalar results of the run, formatted for byte-stable serialization.
    pub metrics: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, cfg: &Config) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            version: VERSION.to_string(),
            config: cfg.resolved(),
            outputs: Vec::new(),
            seed: None,
            metrics: BTreeMap::new(),
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), format!("{value:.12e}"));
    }

    /// Serializes to `run_manifest.json` in the directory of `out`.
    pub fn write(&self, out: &Path) -> Result<PathBuf, CliError> {
        let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let path = dir.join("run_manifest.json");
        let file = File::create(&path)
            .map_err(|e| CliError::Config(format!("cannot write manifest {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)
            .map_err(|e| CliError::Config(format!("manifest serialization failed: {e}")))?;
        writeln!(w).map_err(|e| CliError::Config(format!("manifest write failed: {e}")))?;
        Ok(path)
    }
}

pub fn create_out(path: &Path) -> Result<BufWriter<File>, CliError> {
    let file = File::create(path)
        .map_err(|e| CliError::Config(format!("cannot create output {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// `name.csv` -> `name_suffix.csv` in the same directory.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

pub fn resolve_units(cfg: &Config) -> Result<UnitSystem, CliError> {
    match cfg.opt_section("units") {
        None => Ok(UnitSystem::natural()),
        Some(sec) => {
            let hbar = sec.opt_f64("hbar", 1.0)?;
            let mass = sec.opt_f64("mass", 1.0)?;
            Ok(UnitSystem::new(hbar, mass)?)
        }
    }
}

pub fn resolve_times(cfg: &Config) -> Result<TimeGrid, CliError> {
    let sec = cfg.section("times")?;
    let t_min = sec.f64("t_min")?;
    let t_max = sec.f64("t_max")?;
    let n = sec.usize("n")?;
    Ok(TimeGrid::new(t_min, t_max, n)?)
}

/// Builds a momentum grid from a `[grid]` section:
/// `kind = symmetric|positive|span` plus the matching bounds and `n`.
pub fn momentum_grid(sec: &Section) -> Result<MomentumGrid, CliError> {
    let kind = sec.opt("kind").unwrap_or("symmetric");
    let n = sec.usize("n")?;
    match kind {
        "symmetric" => Ok(MomentumGrid::symmetric(sec.f64("k_max")?, n)?),
        "positive" => Ok(MomentumGrid::positive(sec.opt_f64("k_min", 0.0)?, sec.f64("k_max")?, n)?),
        "span" => Ok(MomentumGrid::span(sec.f64("k_min")?, sec.f64("k_max")?, n)?),
        other => Err(CliError::Config(format!(
            "field 'kind' in [grid] must be symmetric, positive, or span, got '{other}'"
        ))),
    }
}

/// Splits `a:b:c[:d[:e]]` into floats.
pub fn split_floats(value: &str, field: &str, min: usize, max: usize) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() < min || parts.len() > max {
        return Err(CliError::Config(format!(
            "field '{field}' needs {min}..{max} colon-separated numbers, got '{value}'"
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("field '{field}' has a non-numeric part '{p}' in '{value}'")))
        })
        .collect()
}

/// Reads `componentN = k0:sigma_k:x0[:weight[:phase]]` lines.
pub fn packet_components(sec: &Section) -> Result<Vec<GaussianComponent>, CliError> {
    let rows = sec.numbered("component")?;
    if rows.is_empty() {
        return Err(CliError::Config(
            "the [packet] section needs at least one 'componentN = k0:sigma_k:x0[:weight[:phase]]' line".into(),
        ));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (idx, value) in rows {
        let v = split_floats(value, &format!("component{idx}"), 3, 5)?;
        out.push(GaussianComponent {
            k0: v[0],
            sigma_k: v[1],
            x0: v[2],
            weight: v.get(3).copied().unwrap_or(1.0),
            phase: v.get(4).copied().unwrap_or(0.0),
        });
    }
    Ok(out)
}

pub fn build_packet(cfg: &Config, grid: &MomentumGrid) -> Result<WavePacket, CliError> {
    let comps = packet_components(cfg.section("packet")?)?;
    Ok(WavePacket::superposition(grid, &comps)?)
}
