//! Run configuration: one TOML file, every key carrying its unit, with
//! `--set section.key=value` overrides applied before validation.
//!
//! ```toml
//! output_dir = "out"
//!
//! [materials]
//! pump = "cln-o-edwards-lawrence-1984"
//! signal = "cln-e-jundt-1997"
//! idler = "cln-o-edwards-lawrence-1984"
//! coefficient_dirs = []
//!
//! [process]
//! type = "type-ii"
//! pump_wavelength_nm = 517.4      # give one wavelength to solve for GVM, two to fix the triple
//! length_mm = 40.0
//! effective_length_mm = 25.0      # optional
//! solve_poling_period = true      # or: poling_period_um = 3.69
//! temperature_c = 205.0
//!
//! [pump]
//! linewidth_mhz = 1.0
//!
//! [sweep]
//! temperatures_c = [203.0, 204.0, 205.0]   # or start_c / stop_c / step_c
//!
//! [grid]
//! points = 2048
//!
//! [analysis]
//! window_ps = 1400
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use toml::Value;

use spdc_forge::phasematch::ProcessType;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub materials: Option<MaterialsConfig>,
    pub process: Option<ProcessConfig>,
    #[serde(default)]
    pub pump: PumpConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    pub analysis: Option<AnalysisConfig>,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    pub pump: String,
    pub signal: String,
    pub idler: String,
    #[serde(default)]
    pub coefficient_dirs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    #[serde(rename = "type")]
    pub process_type: ProcessType,
    pub pump_wavelength_nm: Option<f64>,
    pub signal_wavelength_nm: Option<f64>,
    pub idler_wavelength_nm: Option<f64>,
    pub length_mm: f64,
    pub effective_length_mm: Option<f64>,
    pub poling_period_um: Option<f64>,
    #[serde(default)]
    pub solve_poling_period: bool,
    /// -1 flips the grating vector of a given period.
    #[serde(default = "default_order_sign")]
    pub poling_order_sign: i8,
    pub temperature_c: f64,
}

fn default_order_sign() -> i8 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    #[serde(default)]
    pub linewidth_mhz: f64,
    #[serde(default = "default_floor_mhz")]
    pub linewidth_floor_mhz: f64,
}

fn default_floor_mhz() -> f64 {
    100.0
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self {
            linewidth_mhz: 0.0,
            linewidth_floor_mhz: default_floor_mhz(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub temperatures_c: Option<Vec<f64>>,
    pub start_c: Option<f64>,
    pub stop_c: Option<f64>,
    pub step_c: Option<f64>,
    /// Also search the lowest merged temperature between the sweep ends.
    #[serde(default)]
    pub find_merge: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Axis half-width; automatic (±3 PM bandwidths) when absent.
    pub half_span_thz: Option<f64>,
    /// Cells of |f|² below this are left out of the JSA export.
    #[serde(default = "default_export_threshold")]
    pub export_threshold: f64,
}

fn default_points() -> usize {
    spdc_forge::jsa::DEFAULT_GRID_POINTS
}

fn default_export_threshold() -> f64 {
    1e-4
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: default_points(),
            half_span_thz: None,
            export_threshold: default_export_threshold(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Coincidence half-window: events pair when |Δt| ≤ window_ps.
    pub window_ps: i64,
    pub pump_power_mw: Option<f64>,
    pub bandwidth_ghz: Option<f64>,
    #[serde(default)]
    pub power_rel_error: f64,
    /// Acquisition time; the tag span is used when absent.
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub pair_rate_hz: f64,
    pub eta_s: f64,
    pub eta_i: f64,
    #[serde(default)]
    pub jitter_ps: f64,
    #[serde(default)]
    pub dark_rate_s_hz: f64,
    #[serde(default)]
    pub dark_rate_i_hz: f64,
    #[serde(default)]
    pub dead_time_ps: i64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Reads `path`, applies overrides, deserializes and validates.
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut value: Value = text
        .parse::<toml::Table>()
        .map(Value::Table)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let config: RunConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// `a.b.c=value`; the value is read as a TOML literal, or as a bare string
/// when it does not parse as one.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let raw = raw.trim();
    let parsed = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));

    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("nonempty key");
    let mut table = root
        .as_table_mut()
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(last.to_string(), parsed);
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.process {
            let given = [p.pump_wavelength_nm, p.signal_wavelength_nm, p.idler_wavelength_nm];
            let n = given.iter().flatten().count();
            if !(1..=2).contains(&n) {
                return Err(ConfigError::Invalid(
                    "process: give one wavelength (GVM solve) or two (fixed triple) of pump/signal/idler".into(),
                ));
            }
            for (name, v) in ["pump_wavelength_nm", "signal_wavelength_nm", "idler_wavelength_nm"]
                .iter()
                .zip(given)
            {
                if let Some(v) = v {
                    positive(&format!("process.{name}"), v)?;
                }
            }
            positive("process.length_mm", p.length_mm)?;
            if let Some(l) = p.effective_length_mm {
                positive("process.effective_length_mm", l)?;
            }
            match (p.poling_period_um, p.solve_poling_period) {
                (Some(_), true) | (None, false) => {
                    return Err(ConfigError::Invalid(
                        "process: set exactly one of poling_period_um or solve_poling_period = true".into(),
                    ))
                }
                (Some(l), false) => positive("process.poling_period_um", l)?,
                (None, true) => {}
            }
            if p.poling_order_sign != 1 && p.poling_order_sign != -1 {
                return Err(ConfigError::Invalid("process.poling_order_sign must be 1 or -1".into()));
            }
            if !p.temperature_c.is_finite() {
                return Err(ConfigError::Invalid("process.temperature_c must be finite".into()));
            }
        }
        if !(self.pump.linewidth_mhz >= 0.0 && self.pump.linewidth_mhz.is_finite()) {
            return Err(ConfigError::Invalid("pump.linewidth_mhz must be nonnegative".into()));
        }
        positive("pump.linewidth_floor_mhz", self.pump.linewidth_floor_mhz)?;
        if self.grid.points < 16 {
            return Err(ConfigError::Invalid("grid.points must be at least 16".into()));
        }
        if let Some(h) = self.grid.half_span_thz {
            positive("grid.half_span_thz", h)?;
        }
        if let Some(s) = &self.sweep {
            s.temperatures()?;
        }
        if let Some(a) = &self.analysis {
            if a.window_ps <= 0 {
                return Err(ConfigError::Invalid("analysis.window_ps must be positive".into()));
            }
            if a.pump_power_mw.is_some() != a.bandwidth_ghz.is_some() {
                return Err(ConfigError::Invalid(
                    "analysis: pump_power_mw and bandwidth_ghz go together".into(),
                ));
            }
            for (name, v) in [("pump_power_mw", a.pump_power_mw), ("bandwidth_ghz", a.bandwidth_ghz), ("duration_s", a.duration_s)] {
                if let Some(v) = v {
                    positive(&format!("analysis.{name}"), v)?;
                }
            }
            if !(a.power_rel_error >= 0.0 && a.power_rel_error.is_finite()) {
                return Err(ConfigError::Invalid("analysis.power_rel_error must be nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn require<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid(format!("missing [{name}] section")))
    }
}

impl SweepConfig {
    /// Explicit list, or `start_c` to `stop_c` inclusive on a `step_c` lattice.
    pub fn temperatures(&self) -> Result<Vec<f64>> {
        let range = [self.start_c, self.stop_c, self.step_c];
        let temps = match (&self.temperatures_c, range) {
            (Some(list), [None, None, None]) => list.clone(),
            (None, [Some(a), Some(b), Some(step)]) => {
                positive("sweep.step_c", step)?;
                if b < a {
                    return Err(ConfigError::Invalid("sweep.stop_c is below sweep.start_c".into()));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| a + k as f64 * step).collect()
            }
            _ => {
                return Err(ConfigError::Invalid(
                    "sweep: give temperatures_c, or all of start_c, stop_c and step_c".into(),
                ))
            }
        };
        if temps.is_empty() {
            return Err(ConfigError::Invalid("sweep: temperature list is empty".into()));
        }
        if temps.iter().any(|t| !t.is_finite()) {
            return Err(ConfigError::Invalid("sweep: temperatures must be finite".into()));
        }
        Ok(temps)
    }
}
