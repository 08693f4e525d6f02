//! Refractive-index models and the propagation constants derived from them.
//!
//! A [`DispersionModel`] wraps one polarization of one material: a Sellmeier
//! style formula with optional thermo-optic terms, the range the fit is valid
//! for, and an optional additive effective-index correction for guided modes.
//! Coefficient sets live in small TOML files (see [`crate::coefficients`]).
//!
//! Units at this interface: angular frequency in rad/s, temperature in °C,
//! propagation constants in rad/m, inverse group velocities in s/m.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum speed of light [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative step of the central-difference stencil used for dβ/dω.
pub const DERIVATIVE_REL_STEP: f64 = 1e-6;

/// Offset between °C and K that the temperature-dependent fits are written in.
const CELSIUS_KELVIN_DOUBLED: f64 = 2.0 * 273.16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error(
        "model `{model}` evaluated outside its validity range \
         (λ = {wavelength_um:.6} µm, T = {temperature_c:.3} °C)"
    )]
    OutOfValidityRange {
        model: String,
        wavelength_um: f64,
        temperature_c: f64,
    },
    #[error("model `{model}` produced an unphysical index n = {index} at λ = {wavelength_um:.6} µm")]
    Unphysical {
        model: String,
        index: f64,
        wavelength_um: f64,
    },
    #[error("model `{model}`: missing coefficient `{key}` for formula `{formula}`")]
    MissingCoefficient {
        model: String,
        formula: &'static str,
        key: &'static str,
    },
    #[error("model `{model}`: unexpected coefficient `{key}` for formula `{formula}`")]
    UnexpectedCoefficient {
        model: String,
        formula: &'static str,
        key: String,
    },
    #[error("model `{model}`: invalid validity range: {reason}")]
    InvalidValidity { model: String, reason: String },
}

pub type Result<T, E = DispersionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::Ordinary => f.write_str("o"),
            Polarization::Extraordinary => f.write_str("e"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldRole {
    Pump,
    Signal,
    Idler,
}

impl fmt::Display for FieldRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldRole::Pump => f.write_str("pump"),
            FieldRole::Signal => f.write_str("signal"),
            FieldRole::Idler => f.write_str("idler"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldLabel {
    pub role: FieldRole,
    pub polarization: Polarization,
}

impl FieldLabel {
    pub fn new(role: FieldRole, polarization: Polarization) -> Self {
        Self { role, polarization }
    }
}

/// Wavelength [µm] ↔ angular frequency [rad/s].
pub fn wavelength_um_to_omega(wavelength_um: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (wavelength_um * 1e-6)
}

pub fn omega_to_wavelength_um(omega: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / omega * 1e6
}

/// Fit range of a coefficient set. Both bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub wavelength_um: [f64; 2],
    pub temperature_c: [f64; 2],
}

impl Validity {
    pub fn contains(&self, wavelength_um: f64, temperature_c: f64) -> bool {
        let [wl_lo, wl_hi] = self.wavelength_um;
        let [t_lo, t_hi] = self.temperature_c;
        wavelength_um >= wl_lo && wavelength_um <= wl_hi && temperature_c >= t_lo && temperature_c <= t_hi
    }

    /// Angular-frequency interval covered by the wavelength range, low to high.
    pub fn omega_range(&self) -> (f64, f64) {
        (
            wavelength_um_to_omega(self.wavelength_um[1]),
            wavelength_um_to_omega(self.wavelength_um[0]),
        )
    }

    fn check(&self, model: &str) -> Result<()> {
        let bad = |reason: &str| DispersionError::InvalidValidity {
            model: model.to_string(),
            reason: reason.to_string(),
        };
        let [wl_lo, wl_hi] = self.wavelength_um;
        let [t_lo, t_hi] = self.temperature_c;
        if !(wl_lo.is_finite() && wl_hi.is_finite() && wl_lo > 0.0 && wl_lo < wl_hi) {
            return Err(bad("wavelength bounds must satisfy 0 < low < high"));
        }
        if !(t_lo.is_finite() && t_hi.is_finite() && t_lo <= t_hi) {
            return Err(bad("temperature bounds must satisfy low <= high"));
        }
        Ok(())
    }
}

/// Polynomial in angular frequency expressed in rad/fs: `Σ c_k (ω·1e-15)^k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OmegaPolynomial {
    pub coefficients: Vec<f64>,
}

impl OmegaPolynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let x = omega * 1e-15;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| *c == 0.0)
    }
}

/// Jundt-type temperature-dependent extraordinary-index fit.
///
/// n² = a1 + b1·f + (a2 + b2·f)/(λ² − (a3 + b3·f)²) + (a4 + b4·f)/(λ² − a5²) − a6·λ²
/// with f = (T − t0)(T + t0 + 546.32), λ in µm, T in °C.
#[derive(Debug, Clone, PartialEq)]
pub struct JundtCoefficients {
    pub a: [f64; 6],
    pub b: [f64; 4],
    pub t0_c: f64,
}

/// Edwards–Lawrence-type temperature-dependent fit.
///
/// n² = a1 + (a2 + b1·F)/(λ² − (a3 + b2·F)²) + b3·F − a4·λ²
/// with F = (T − t0)(T + t0 + 546.32), λ in µm, T in °C.
#[derive(Debug, Clone, PartialEq)]
pub struct EdwardsLawrenceCoefficients {
    pub a: [f64; 4],
    pub b: [f64; 3],
    pub t0_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexFormula {
    Jundt(JundtCoefficients),
    EdwardsLawrence(EdwardsLawrenceCoefficients),
    /// Dispersionless medium.
    Constant { n: f64 },
    /// Temperature-independent `n(ω) = Σ c_k (ω·1e-15)^k`.
    OmegaPolynomial(OmegaPolynomial),
}

const JUNDT_KEYS: [&str; 11] = ["a1", "a2", "a3", "a4", "a5", "a6", "b1", "b2", "b3", "b4", "t0_c"];
const EDWARDS_LAWRENCE_KEYS: [&str; 8] = ["a1", "a2", "a3", "a4", "b1", "b2", "b3", "t0_c"];

impl IndexFormula {
    pub fn kind(&self) -> &'static str {
        match self {
            IndexFormula::Jundt(_) => "jundt",
            IndexFormula::EdwardsLawrence(_) => "edwards-lawrence",
            IndexFormula::Constant { .. } => "constant",
            IndexFormula::OmegaPolynomial(_) => "omega-polynomial",
        }
    }

    /// Builds a formula from a named coefficient map. Every key of the formula
    /// must be present and no others may appear.
    pub fn from_coefficients(
        model: &str,
        formula: &str,
        coefficients: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        fn take<const N: usize>(
            model: &str,
            formula: &'static str,
            keys: &[&'static str; N],
            map: &BTreeMap<String, f64>,
        ) -> Result<[f64; N]> {
            if let Some(extra) = map.keys().find(|k| !keys.contains(&k.as_str())) {
                return Err(DispersionError::UnexpectedCoefficient {
                    model: model.to_string(),
                    formula,
                    key: extra.clone(),
                });
            }
            let mut out = [0.0; N];
            for (slot, key) in out.iter_mut().zip(keys) {
                *slot = *map.get(*key).ok_or(DispersionError::MissingCoefficient {
                    model: model.to_string(),
                    formula,
                    key,
                })?;
            }
            Ok(out)
        }

        match formula {
            "jundt" => {
                let v = take(model, "jundt", &JUNDT_KEYS, coefficients)?;
                Ok(IndexFormula::Jundt(JundtCoefficients {
                    a: [v[0], v[1], v[2], v[3], v[4], v[5]],
                    b: [v[6], v[7], v[8], v[9]],
                    t0_c: v[10],
                }))
            }
            "edwards-lawrence" => {
                let v = take(model, "edwards-lawrence", &EDWARDS_LAWRENCE_KEYS, coefficients)?;
                Ok(IndexFormula::EdwardsLawrence(EdwardsLawrenceCoefficients {
                    a: [v[0], v[1], v[2], v[3]],
                    b: [v[4], v[5], v[6]],
                    t0_c: v[7],
                }))
            }
            "constant" => {
                let [n] = take(model, "constant", &["n"], coefficients)?;
                Ok(IndexFormula::Constant { n })
            }
            "omega-polynomial" => {
                // c0, c1, ... contiguous from zero
                let mut coeffs = Vec::new();
                while let Some(c) = coefficients.get(&format!("c{}", coeffs.len())) {
                    coeffs.push(*c);
                }
                if coeffs.is_empty() {
                    return Err(DispersionError::MissingCoefficient {
                        model: model.to_string(),
                        formula: "omega-polynomial",
                        key: "c0",
                    });
                }
                if coefficients.len() != coeffs.len() {
                    let key = coefficients
                        .keys()
                        .find(|k| {
                            k.strip_prefix('c')
                                .and_then(|i| i.parse::<usize>().ok())
                                .map_or(true, |i| i >= coeffs.len())
                        })
                        .cloned()
                        .unwrap_or_default();
                    return Err(DispersionError::UnexpectedCoefficient {
                        model: model.to_string(),
                        formula: "omega-polynomial",
                        key,
                    });
                }
                Ok(IndexFormula::OmegaPolynomial(OmegaPolynomial::new(coeffs)))
            }
            _ => Err(DispersionError::UnexpectedCoefficient {
                model: model.to_string(),
                formula: "formula",
                key: formula.to_string(),
            }),
        }
    }

    fn bulk_index(&self, wavelength_um: f64, omega: f64, temperature_c: f64) -> f64 {
        let l2 = wavelength_um * wavelength_um;
        match self {
            IndexFormula::Jundt(JundtCoefficients { a, b, t0_c }) => {
                let f = (temperature_c - t0_c) * (temperature_c + t0_c + CELSIUS_KELVIN_DOUBLED);
                let pole = a[2] + b[2] * f;
                let n2 = a[0]
                    + b[0] * f
                    + (a[1] + b[1] * f) / (l2 - pole * pole)
                    + (a[3] + b[3] * f) / (l2 - a[4] * a[4])
                    - a[5] * l2;
                n2.sqrt()
            }
            IndexFormula::EdwardsLawrence(EdwardsLawrenceCoefficients { a, b, t0_c }) => {
                let f = (temperature_c - t0_c) * (temperature_c + t0_c + CELSIUS_KELVIN_DOUBLED);
                let pole = a[2] + b[1] * f;
                let n2 = a[0] + (a[1] + b[0] * f) / (l2 - pole * pole) + b[2] * f - a[3] * l2;
                n2.sqrt()
            }
            IndexFormula::Constant { n } => *n,
            IndexFormula::OmegaPolynomial(poly) => poly.eval(omega),
        }
    }
}

/// One polarization of one (possibly guided) medium.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionModel {
    pub name: String,
    pub polarization: Polarization,
    pub formula: IndexFormula,
    pub validity: Validity,
    /// Additive effective-index correction Δn(ω) for the guided mode.
    pub waveguide_shift: Option<OmegaPolynomial>,
}

impl DispersionModel {
    pub fn new(
        name: impl Into<String>,
        polarization: Polarization,
        formula: IndexFormula,
        validity: Validity,
    ) -> Result<Self> {
        let name = name.into();
        validity.check(&name)?;
        Ok(Self {
            name,
            polarization,
            formula,
            validity,
            waveguide_shift: None,
        })
    }

    pub fn with_waveguide_shift(mut self, shift: OmegaPolynomial) -> Self {
        self.waveguide_shift = if shift.is_zero() { None } else { Some(shift) };
        self
    }

    fn check_range(&self, omega: f64, temperature_c: f64) -> Result<f64> {
        let wavelength_um = omega_to_wavelength_um(omega);
        if !(omega > 0.0 && omega.is_finite() && self.validity.contains(wavelength_um, temperature_c)) {
            return Err(DispersionError::OutOfValidityRange {
                model: self.name.clone(),
                wavelength_um,
                temperature_c,
            });
        }
        Ok(wavelength_um)
    }

    /// Effective refractive index n(ω, T).
    pub fn refractive_index(&self, omega: f64, temperature_c: f64) -> Result<f64> {
        let wavelength_um = self.check_range(omega, temperature_c)?;
        let mut n = self.formula.bulk_index(wavelength_um, omega, temperature_c);
        if let Some(shift) = &self.waveguide_shift {
            n += shift.eval(omega);
        }
        if !(n.is_finite() && n > 1.0) {
            return Err(DispersionError::Unphysical {
                model: self.name.clone(),
                index: n,
                wavelength_um,
            });
        }
        Ok(n)
    }

    /// Propagation constant β = n(ω,T)·ω/c [rad/m].
    pub fn beta(&self, omega: f64, temperature_c: f64) -> Result<f64> {
        Ok(self.refractive_index(omega, temperature_c)? * omega / SPEED_OF_LIGHT)
    }

    /// dβ/dω [s/m] by a central difference with step `DERIVATIVE_REL_STEP·ω`.
    /// Both stencil points must lie inside the validity range.
    pub fn inverse_group_velocity(&self, omega: f64, temperature_c: f64) -> Result<f64> {
        self.check_range(omega, temperature_c)?;
        let h = DERIVATIVE_REL_STEP * omega;
        let hi = self.beta(omega + h, temperature_c)?;
        let lo = self.beta(omega - h, temperature_c)?;
        // (ω+h) − (ω−h) is not exactly 2h in floating point
        Ok((hi - lo) / ((omega + h) - (omega - h)))
    }

    /// Group index n_g = c·dβ/dω.
    pub fn group_index(&self, omega: f64, temperature_c: f64) -> Result<f64> {
        Ok(self.inverse_group_velocity(omega, temperature_c)? * SPEED_OF_LIGHT)
    }

    /// d²β/dω² [s²/m] from a three-point stencil on β.
    pub fn group_velocity_dispersion(&self, omega: f64, temperature_c: f64) -> Result<f64> {
        let h = 1e-4 * omega;
        let hi = self.beta(omega + h, temperature_c)?;
        let mid = self.beta(omega, temperature_c)?;
        let lo = self.beta(omega - h, temperature_c)?;
        Ok((hi - 2.0 * mid + lo) / (h * h))
    }
}

/// 1/v_g,s − 1/v_g,i [s/m].
pub fn group_velocity_mismatch(
    signal: &DispersionModel,
    idler: &DispersionModel,
    omega_s: f64,
    omega_i: f64,
    temperature_c: f64,
) -> Result<f64> {
    Ok(signal.inverse_group_velocity(omega_s, temperature_c)?
        - idler.inverse_group_velocity(omega_i, temperature_c)?)
}
