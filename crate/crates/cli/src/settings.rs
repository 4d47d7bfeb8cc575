//! Run settings: a flat key = value config file merged with flag
//! overrides. Grids accept `start:step:count` or a comma list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use coverage_forecast::model::{ProcedureId, SimulationConfig};

pub const OUT_DIR_ENV: &str = "COVERAGE_FORECAST_OUT_DIR";

/// Resolved settings for a sweep run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub config: SimulationConfig,
    pub bins_d: usize,
    pub bins_w: usize,
    pub procedures: Vec<ProcedureId>,
    pub out_dir: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            config: SimulationConfig::reference_sweep(42),
            bins_d: 50,
            bins_w: 25,
            procedures: ProcedureId::SUBMARINE.to_vec(),
            out_dir: default_out_dir(),
        }
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// `start:step:count` or a comma-separated list of numbers.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid `{text}` must be start:step:count"));
        }
        let start: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| format!("bad grid start in `{text}`"))?;
        let step: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| format!("bad grid step in `{text}`"))?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("bad grid count in `{text}`"))?;
        if count == 0 {
            return Err(format!("grid `{text}` has zero points"));
        }
        Ok((0..count).map(|i| start + step * i as f64).collect())
    } else {
        text.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad grid value `{v}`"))
            })
            .collect()
    }
}

pub fn parse_procedures(text: &str) -> Result<Vec<ProcedureId>, String> {
    let mut out: Vec<ProcedureId> = Vec::new();
    for token in text.split(',') {
        let proc = ProcedureId::from_str(token.trim()).map_err(|e| e.to_string())?;
        if !out.contains(&proc) {
            out.push(proc);
        }
    }
    Ok(out)
}

/// The key = value file; `#` starts a comment.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut out = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", number + 1))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    const KNOWN: [&str; 9] = [
        "theta_grid",
        "hull_width_grid",
        "n_trials",
        "seed",
        "alpha",
        "bins_d",
        "bins_w",
        "procedures",
        "out_dir",
    ];
    for key in out.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(format!("unknown config key `{key}`"));
        }
    }
    Ok(out)
}

pub struct Overrides {
    pub theta_grid: Option<String>,
    pub hull_width_grid: Option<String>,
    pub n_trials: Option<u64>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub bins_d: Option<usize>,
    pub bins_w: Option<usize>,
    pub procedures: Option<String>,
    pub out_dir: Option<PathBuf>,
}

/// Defaults, then file values, then flags.
pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Settings, String> {
    let mut settings = Settings::default();
    if let Some(path) = file {
        let map = parse_config_file(path)?;
        if let Some(v) = map.get("theta_grid") {
            settings.config.theta_grid = parse_grid(v)?;
        }
        if let Some(v) = map.get("hull_width_grid") {
            settings.config.hull_width_grid = parse_grid(v)?;
        }
        if let Some(v) = map.get("n_trials") {
            settings.config.n_trials = v.parse().map_err(|_| format!("bad n_trials `{v}`"))?;
        }
        if let Some(v) = map.get("seed") {
            settings.config.seed = v.parse().map_err(|_| format!("bad seed `{v}`"))?;
        }
        if let Some(v) = map.get("alpha") {
            settings.config.alpha = v.parse().map_err(|_| format!("bad alpha `{v}`"))?;
        }
        if let Some(v) = map.get("bins_d") {
            settings.bins_d = v.parse().map_err(|_| format!("bad bins_d `{v}`"))?;
        }
        if let Some(v) = map.get("bins_w") {
            settings.bins_w = v.parse().map_err(|_| format!("bad bins_w `{v}`"))?;
        }
        if let Some(v) = map.get("procedures") {
            settings.procedures = parse_procedures(v)?;
        }
        if let Some(v) = map.get("out_dir") {
            settings.out_dir = PathBuf::from(v);
        }
    }
    if let Some(v) = &flags.theta_grid {
        settings.config.theta_grid = parse_grid(v)?;
    }
    if let Some(v) = &flags.hull_width_grid {
        settings.config.hull_width_grid = parse_grid(v)?;
    }
    if let Some(v) = flags.n_trials {
        settings.config.n_trials = v;
    }
    if let Some(v) = flags.seed {
        settings.config.seed = v;
    }
    if let Some(v) = flags.alpha {
        settings.config.alpha = v;
    }
    if let Some(v) = flags.bins_d {
        settings.bins_d = v;
    }
    if let Some(v) = flags.bins_w {
        settings.bins_w = v;
    }
    if let Some(v) = &flags.procedures {
        settings.procedures = parse_procedures(v)?;
    }
    if let Some(v) = &flags.out_dir {
        settings.out_dir = v.clone();
    }
    settings.config.validate().map_err(|e| e.to_string())?;
    if settings.bins_d == 0 || settings.bins_w == 0 {
        return Err("bin counts must be at least 1".to_string());
    }
    Ok(settings)
}
