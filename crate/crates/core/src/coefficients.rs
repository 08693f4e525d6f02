//! Named, versioned coefficient sets stored as TOML files.
//!
//! ```toml
//! name = "cln-e-jundt-1997"
//! version = 1
//! material = "congruent lithium niobate"   # optional, informational
//! polarization = "extraordinary"           # or "ordinary"
//! formula = "jundt"                        # jundt | edwards-lawrence | constant | omega-polynomial
//!
//! [coefficients]                           # keys depend on the formula
//! a1 = 5.35583
//! # ...
//!
//! [validity]
//! wavelength_um = [0.4, 5.0]
//! temperature_c = [20.0, 250.0]
//!
//! [waveguide_shift]                        # optional: Δn(ω) = Σ c_k (ω in rad/fs)^k
//! omega_poly = [0.0]
//! ```
//!
//! Sets shipped with the crate are compiled in; directories listed in
//! `SPDC_FORGE_COEFF_DIR` (path-list syntax) or passed explicitly are scanned
//! for `*.toml` files, which shadow built-ins of the same name.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::dispersion::{
    wavelength_um_to_omega, DispersionError, DispersionModel, IndexFormula, OmegaPolynomial, Polarization,
    Validity,
};

pub const COEFF_DIR_ENV: &str = "SPDC_FORGE_COEFF_DIR";

const BUILTIN: &[(&str, &str)] = &[
    (
        "cln-e-jundt-1997.toml",
        include_str!("../data/coefficients/cln-e-jundt-1997.toml"),
    ),
    (
        "cln-o-edwards-lawrence-1984.toml",
        include_str!("../data/coefficients/cln-o-edwards-lawrence-1984.toml"),
    ),
    (
        "synthetic-constant-2.2.toml",
        include_str!("../data/coefficients/synthetic-constant-2.2.toml"),
    ),
];

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: {source}")]
    Model {
        origin: String,
        #[source]
        source: DispersionError,
    },
    #[error("unknown coefficient set `{name}` (available: {available})")]
    UnknownModel { name: String, available: String },
    #[error("coefficient set `{name}` defined twice ({first} and {second})")]
    Duplicate { name: String, first: String, second: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientFile {
    name: String,
    version: u32,
    #[serde(default)]
    #[allow(dead_code)]
    material: Option<String>,
    polarization: Polarization,
    formula: String,
    coefficients: BTreeMap<String, f64>,
    validity: Validity,
    #[serde(default)]
    waveguide_shift: Option<WaveguideShiftFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaveguideShiftFile {
    omega_poly: Vec<f64>,
}

/// A parsed coefficient set and where it came from.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub model: DispersionModel,
    pub version: u32,
    pub origin: String,
}

/// Parses one coefficient file and checks that n > 1 on a sample grid
/// spanning the validity range.
pub fn parse_coefficient_set(text: &str, origin: &str) -> Result<CoefficientSet, CoefficientError> {
    let file: CoefficientFile = toml::from_str(text).map_err(|e| CoefficientError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    let wrap = |source| CoefficientError::Model {
        origin: origin.to_string(),
        source,
    };
    let formula = IndexFormula::from_coefficients(&file.name, &file.formula, &file.coefficients).map_err(wrap)?;
    let mut model = DispersionModel::new(file.name, file.polarization, formula, file.validity).map_err(wrap)?;
    if let Some(shift) = file.waveguide_shift {
        model = model.with_waveguide_shift(OmegaPolynomial::new(shift.omega_poly));
    }
    sample_check(&model).map_err(wrap)?;
    Ok(CoefficientSet {
        model,
        version: file.version,
        origin: origin.to_string(),
    })
}

fn sample_check(model: &DispersionModel) -> Result<(), DispersionError> {
    let [wl_lo, wl_hi] = model.validity.wavelength_um;
    let [t_lo, t_hi] = model.validity.temperature_c;
    for i in 0..=32 {
        let wl = wl_lo + (wl_hi - wl_lo) * i as f64 / 32.0;
        // guard the end points against round-off in the ω ↔ λ conversion
        let wl = wl.clamp(wl_lo * (1.0 + 1e-12), wl_hi * (1.0 - 1e-12));
        for j in 0..=4 {
            let t = t_lo + (t_hi - t_lo) * j as f64 / 4.0;
            model.refractive_index(wavelength_um_to_omega(wl), t)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct CoefficientRegistry {
    sets: BTreeMap<String, CoefficientSet>,
}

impl CoefficientRegistry {
    /// Only the compiled-in sets.
    pub fn builtin() -> Self {
        let mut sets = BTreeMap::new();
        for (file, text) in BUILTIN {
            let set = parse_coefficient_set(text, &format!("builtin:{file}")).expect("bundled coefficient set is valid");
            sets.insert(set.model.name.clone(), set);
        }
        Self { sets }
    }

    /// Built-ins, then every directory from the environment, then `extra_dirs`.
    pub fn discover(extra_dirs: &[PathBuf]) -> Result<Self, CoefficientError> {
        let mut dirs: Vec<PathBuf> = std::env::var_os(COEFF_DIR_ENV)
            .map(|v| std::env::split_paths(&v).filter(|p| !p.as_os_str().is_empty()).collect())
            .unwrap_or_default();
        dirs.extend(extra_dirs.iter().cloned());
        let mut registry = Self::builtin();
        for dir in &dirs {
            registry.load_dir(dir)?;
        }
        Ok(registry)
    }

    /// Loads every `*.toml` in `dir` (sorted by file name). A name defined by
    /// a file shadows a built-in; two files defining one name is an error.
    pub fn load_dir(&mut self, dir: &Path) -> Result<(), CoefficientError> {
        let io = |source| CoefficientError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|source| CoefficientError::Io {
                path: path.clone(),
                source,
            })?;
            let set = parse_coefficient_set(&text, &path.display().to_string())?;
            if let Some(prev) = self.sets.get(&set.model.name) {
                if !prev.origin.starts_with("builtin:") {
                    return Err(CoefficientError::Duplicate {
                        name: set.model.name.clone(),
                        first: prev.origin.clone(),
                        second: set.origin,
                    });
                }
            }
            self.sets.insert(set.model.name.clone(), set);
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&CoefficientSet, CoefficientError> {
        self.sets.get(name).ok_or_else(|| CoefficientError::UnknownModel {
            name: name.to_string(),
            available: self.sets.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    pub fn model(&self, name: &str) -> Result<DispersionModel, CoefficientError> {
        Ok(self.get(name)?.model.clone())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }
}
