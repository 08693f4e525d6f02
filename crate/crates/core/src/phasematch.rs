//! Phase mismatch, the sinc phase-matching function, quasi-phase-matching
//! poling periods and group-velocity-matched frequency triples.
//!
//! Sign conventions: Δβ = β_p(ω_s + ω_i) − β_s(ω_s) − β_i(ω_i) − σ·2π/Λ, where
//! Λ > 0 is the poling period and σ = ±1 the grating-order sign chosen so the
//! grating cancels the zeroth-order mismatch at the design centers.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{
    group_velocity_mismatch, omega_to_wavelength_um, DispersionError, DispersionModel, FieldLabel, FieldRole,
    Polarization,
};
use crate::jsa::{self, GridSpec, JsaError, PumpModel, SpectralRegime};
use crate::roots::{brent, scan_sign_changes, RootError};

/// Default GVM residual tolerance [s/m] (≈ 0.1 fs/mm).
pub const DEFAULT_GVM_TOLERANCE: f64 = 1e-16;
pub const DEFAULT_SCAN_POINTS: usize = 512;
/// Temperature lattice spacing of the merge search [°C].
pub const MERGE_RESOLUTION_C: f64 = 0.05;

const ENERGY_REL_TOL: f64 = 1e-12;
/// |β_p − β_s − β_i| below this fraction of β_p counts as already phase matched.
const DEGENERATE_REL_MISMATCH: f64 = 1e-12;
/// Keeps the free frequency far enough from validity edges for the stencil.
const EDGE_MARGIN_REL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum PhaseMatchError {
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error("energy not conserved: ω_p = {omega_p:e}, ω_s + ω_i = {sum:e}")]
    EnergyNotConserved { omega_p: f64, sum: f64 },
    #[error("interaction length must be positive and finite, got {0} m")]
    InvalidLength(f64),
    #[error("poling period must be positive and finite, got {0} m")]
    InvalidPoling(f64),
    #[error("zeroth-order mismatch {mismatch:e} rad/m is already ~0; no poling needed")]
    DegenerateMismatch { mismatch: f64 },
    #[error("no group-velocity-matching root between {lo_nm:.3} nm and {hi_nm:.3} nm (free {free} wavelength)")]
    NoRootInBracket { free: FieldRole, lo_nm: f64, hi_nm: f64 },
    #[error("GVM residual {residual:e} s/m exceeds tolerance {tolerance:e} s/m")]
    ToleranceNotMet { residual: f64, tolerance: f64 },
    #[error("root finder: {0}")]
    Root(String),
    #[error("{process} requires {requirement}")]
    Polarizations { process: ProcessType, requirement: &'static str },
    #[error("no peak merge between {lo_c} °C and {hi_c} °C: {reason}")]
    NoMergeInBracket { lo_c: f64, hi_c: f64, reason: String },
    #[error(transparent)]
    Jsa(Box<JsaError>),
}

impl From<JsaError> for PhaseMatchError {
    fn from(e: JsaError) -> Self {
        PhaseMatchError::Jsa(Box::new(e))
    }
}

impl From<RootError<PhaseMatchError>> for PhaseMatchError {
    fn from(e: RootError<PhaseMatchError>) -> Self {
        match e {
            RootError::Function(inner) => inner,
            other => PhaseMatchError::Root(other.to_string()),
        }
    }
}

pub type Result<T, E = PhaseMatchError> = std::result::Result<T, E>;

/// Polarization configuration of a three-wave process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcessType {
    #[serde(rename = "type-0")]
    Type0,
    #[serde(rename = "type-i")]
    TypeI,
    #[serde(rename = "type-ii")]
    TypeII,
}

impl fmt::Display for ProcessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessType::Type0 => "type-0",
            ProcessType::TypeI => "type-I",
            ProcessType::TypeII => "type-II",
        })
    }
}

impl ProcessType {
    pub fn check(self, pump: Polarization, signal: Polarization, idler: Polarization) -> Result<()> {
        let (ok, requirement) = match self {
            ProcessType::Type0 => (pump == signal && signal == idler, "identical polarizations on all fields"),
            ProcessType::TypeI => (signal == idler && pump != signal, "signal = idler orthogonal to pump"),
            ProcessType::TypeII => (signal != idler, "orthogonal signal and idler polarizations"),
        };
        if ok {
            Ok(())
        } else {
            Err(PhaseMatchError::Polarizations { process: self, requirement })
        }
    }
}

/// Dispersion models for the three fields.
#[derive(Debug, Clone)]
pub struct ProcessModels {
    pub pump: Arc<DispersionModel>,
    pub signal: Arc<DispersionModel>,
    pub idler: Arc<DispersionModel>,
}

impl ProcessModels {
    pub fn new(pump: DispersionModel, signal: DispersionModel, idler: DispersionModel) -> Self {
        Self {
            pump: Arc::new(pump),
            signal: Arc::new(signal),
            idler: Arc::new(idler),
        }
    }

    pub fn label(&self, role: FieldRole) -> FieldLabel {
        let model = match role {
            FieldRole::Pump => &self.pump,
            FieldRole::Signal => &self.signal,
            FieldRole::Idler => &self.idler,
        };
        FieldLabel::new(role, model.polarization)
    }

    /// β_p(ω_s + ω_i) − β_s(ω_s) − β_i(ω_i), without any grating term.
    pub fn material_mismatch(&self, omega_s: f64, omega_i: f64, temperature_c: f64) -> Result<f64> {
        Ok(self.pump.beta(omega_s + omega_i, temperature_c)?
            - self.signal.beta(omega_s, temperature_c)?
            - self.idler.beta(omega_i, temperature_c)?)
    }

    pub fn gvm(&self, omega_s: f64, omega_i: f64, temperature_c: f64) -> Result<f64> {
        Ok(group_velocity_mismatch(
            &self.signal,
            &self.idler,
            omega_s,
            omega_i,
            temperature_c,
        )?)
    }
}

/// First-order poling: period Λ > 0 and the sign of the grating vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolingPeriod {
    pub period_m: f64,
    pub order_sign: i8,
}

impl PolingPeriod {
    pub fn new(period_m: f64, order_sign: i8) -> Result<Self> {
        if !(period_m.is_finite() && period_m > 0.0) {
            return Err(PhaseMatchError::InvalidPoling(period_m));
        }
        Ok(Self {
            period_m,
            order_sign: if order_sign < 0 { -1 } else { 1 },
        })
    }

    /// σ·2π/Λ [rad/m].
    pub fn grating_vector(&self) -> f64 {
        f64::from(self.order_sign) * 2.0 * std::f64::consts::PI / self.period_m
    }
}

/// Design centers of a process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centers {
    pub omega_p: f64,
    pub omega_s: f64,
    pub omega_i: f64,
}

impl Centers {
    /// Centers from signal and idler, with ω_p defined as their sum.
    pub fn from_daughters(omega_s: f64, omega_i: f64) -> Self {
        Self {
            omega_p: omega_s + omega_i,
            omega_s,
            omega_i,
        }
    }
}

/// A parametric down-conversion process at one temperature.
#[derive(Debug, Clone)]
pub struct ProcessSpec {
    pub models: ProcessModels,
    pub centers: Centers,
    /// Physical interaction length [m].
    pub length_m: f64,
    /// Length used in the phase-matching function when set [m].
    pub effective_length_m: Option<f64>,
    /// `None` means no poling (Λ = ∞).
    pub poling: Option<PolingPeriod>,
    pub temperature_c: f64,
}

impl ProcessSpec {
    pub fn new(models: ProcessModels, centers: Centers, length_m: f64, temperature_c: f64) -> Result<Self> {
        let sum = centers.omega_s + centers.omega_i;
        if !((centers.omega_p - sum).abs() <= ENERGY_REL_TOL * centers.omega_p.abs()) {
            return Err(PhaseMatchError::EnergyNotConserved {
                omega_p: centers.omega_p,
                sum,
            });
        }
        check_length(length_m)?;
        Ok(Self {
            models,
            centers,
            length_m,
            effective_length_m: None,
            poling: None,
            temperature_c,
        })
    }

    pub fn with_poling(mut self, poling: Option<PolingPeriod>) -> Self {
        self.poling = poling;
        self
    }

    pub fn with_effective_length(mut self, length_m: Option<f64>) -> Result<Self> {
        if let Some(l) = length_m {
            check_length(l)?;
        }
        self.effective_length_m = length_m;
        Ok(self)
    }

    pub fn at_temperature(&self, temperature_c: f64) -> Self {
        Self {
            temperature_c,
            ..self.clone()
        }
    }

    /// Length entering the sinc: the effective length when one is set.
    pub fn pm_length(&self) -> f64 {
        self.effective_length_m.unwrap_or(self.length_m)
    }

    pub fn grating_vector(&self) -> f64 {
        self.poling.map_or(0.0, |p| p.grating_vector())
    }

    /// Phase mismatch Δβ(ω_s, ω_i) [rad/m] including the grating vector.
    pub fn delta_beta(&self, omega_s: f64, omega_i: f64) -> Result<f64> {
        Ok(self.models.material_mismatch(omega_s, omega_i, self.temperature_c)? - self.grating_vector())
    }

    /// Phase-matching function φ = sinc(LΔβ/2)·exp(iLΔβ/2).
    pub fn pm_function(&self, omega_s: f64, omega_i: f64) -> Result<Complex64> {
        Ok(pm_from_mismatch(self.pm_length(), self.delta_beta(omega_s, omega_i)?))
    }

    /// β_p − β_s − β_i at the design centers (ω_p taken as ω̄_s + ω̄_i).
    pub fn zeroth_order_mismatch(&self) -> Result<f64> {
        self.models
            .material_mismatch(self.centers.omega_s, self.centers.omega_i, self.temperature_c)
    }
}

fn check_length(length_m: f64) -> Result<()> {
    if length_m.is_finite() && length_m > 0.0 {
        Ok(())
    } else {
        Err(PhaseMatchError::InvalidLength(length_m))
    }
}

/// sin(x)/x with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// φ for a given interaction length and mismatch.
pub fn pm_from_mismatch(length_m: f64, delta_beta: f64) -> Complex64 {
    let x = 0.5 * length_m * delta_beta;
    let (s, c) = x.sin_cos();
    let amp = sinc(x);
    Complex64::new(amp * c, amp * s)
}

/// Poling period that cancels the zeroth-order mismatch at the spec's
/// centers and temperature. Any poling already on `spec` is ignored.
pub fn solve_poling_period(spec: &ProcessSpec) -> Result<PolingPeriod> {
    let mismatch = spec.zeroth_order_mismatch()?;
    let beta_p = spec
        .models
        .pump
        .beta(spec.centers.omega_s + spec.centers.omega_i, spec.temperature_c)?;
    if mismatch.abs() <= DEGENERATE_REL_MISMATCH * beta_p {
        return Err(PhaseMatchError::DegenerateMismatch { mismatch });
    }
    PolingPeriod::new(
        2.0 * std::f64::consts::PI / mismatch.abs(),
        if mismatch < 0.0 { -1 } else { 1 },
    )
}

/// Which frequency of the triple is held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedFrequency {
    Pump(f64),
    Signal(f64),
    Idler(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvmOptions {
    pub scan_points: usize,
    pub tolerance: f64,
    /// Restricts the free frequency [rad/s] to this interval (intersected
    /// with the validity ranges).
    pub bracket: Option<(f64, f64)>,
}

impl Default for GvmOptions {
    fn default() -> Self {
        Self {
            scan_points: DEFAULT_SCAN_POINTS,
            tolerance: DEFAULT_GVM_TOLERANCE,
            bracket: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GvmSolution {
    pub omega_p: f64,
    pub omega_s: f64,
    pub omega_i: f64,
    /// 1/v_g,s − 1/v_g,i at the solution [s/m].
    pub residual_gvm: f64,
    /// β_p − β_s − β_i at the solution [rad/m].
    pub zeroth_order_mismatch: f64,
    /// `None` when the triple is already phase matched without poling.
    pub poling: Option<PolingPeriod>,
    pub temperature_c: f64,
}

impl GvmSolution {
    pub fn centers(&self) -> Centers {
        Centers {
            omega_p: self.omega_p,
            omega_s: self.omega_s,
            omega_i: self.omega_i,
        }
    }
}

fn shrink(range: (f64, f64)) -> (f64, f64) {
    (range.0 * (1.0 + EDGE_MARGIN_REL), range.1 * (1.0 - EDGE_MARGIN_REL))
}

/// Finds ω_s, ω_i with ω_p = ω_s + ω_i and 1/v_g,s = 1/v_g,i, holding one of
/// the three frequencies fixed.
///
/// The free frequency is scanned over the intersection of validity ranges;
/// every sign change is refined with Brent's method. When several roots
/// exist the one closest to the middle of the scanned interval is returned.
/// Identical signal and idler models short-circuit to the degenerate split.
pub fn solve_gvm_triple(
    models: &ProcessModels,
    fixed: FixedFrequency,
    temperature_c: f64,
    options: &GvmOptions,
) -> Result<GvmSolution> {
    let s_range = shrink(models.signal.validity.omega_range());
    let i_range = shrink(models.idler.validity.omega_range());
    let p_range = shrink(models.pump.validity.omega_range());

    // free variable x → (ω_s, ω_i)
    let (free, lo, hi, split): (FieldRole, f64, f64, Box<dyn Fn(f64) -> (f64, f64)>) = match fixed {
        FixedFrequency::Pump(wp) => {
            models.pump.refractive_index(wp, temperature_c)?;
            let lo = s_range.0.max(wp - i_range.1);
            let hi = s_range.1.min(wp - i_range.0);
            (FieldRole::Signal, lo, hi, Box::new(move |x| (x, wp - x)))
        }
        FixedFrequency::Signal(ws) => {
            models.signal.inverse_group_velocity(ws, temperature_c)?;
            let lo = i_range.0.max(p_range.0 - ws);
            let hi = i_range.1.min(p_range.1 - ws);
            (FieldRole::Idler, lo, hi, Box::new(move |x| (ws, x)))
        }
        FixedFrequency::Idler(wi) => {
            models.idler.inverse_group_velocity(wi, temperature_c)?;
            let lo = s_range.0.max(p_range.0 - wi);
            let hi = s_range.1.min(p_range.1 - wi);
            (FieldRole::Signal, lo, hi, Box::new(move |x| (x, wi)))
        }
    };
    let (lo, hi) = match options.bracket {
        Some((a, b)) => (lo.max(a.min(b)), hi.min(a.max(b))),
        None => (lo, hi),
    };
    let no_root = || PhaseMatchError::NoRootInBracket {
        free,
        lo_nm: omega_to_wavelength_um(hi) * 1e3,
        hi_nm: omega_to_wavelength_um(lo) * 1e3,
    };
    if !(lo < hi) {
        return Err(no_root());
    }

    let mismatch = |x: f64| -> Result<f64> {
        let (ws, wi) = split(x);
        models.gvm(ws, wi, temperature_c)
    };

    let root = if models.signal == models.idler {
        // degenerate photons share one dispersion relation
        match fixed {
            FixedFrequency::Pump(wp) => 0.5 * wp,
            FixedFrequency::Signal(ws) => ws,
            FixedFrequency::Idler(wi) => wi,
        }
    } else {
        let brackets = scan_sign_changes(&mismatch, lo, hi, options.scan_points.max(2))?;
        let mid = 0.5 * (lo + hi);
        let &(a, b) = brackets
            .iter()
            .min_by(|p, q| {
                let dp = (0.5 * (p.0 + p.1) - mid).abs();
                let dq = (0.5 * (q.0 + q.1) - mid).abs();
                dp.total_cmp(&dq)
            })
            .ok_or_else(no_root)?;
        if a == b {
            a
        } else {
            brent(&mismatch, a, b, 1e-13 * b, 200)?
        }
    };

    let (omega_s, omega_i) = split(root);
    let residual_gvm = models.gvm(omega_s, omega_i, temperature_c)?;
    if !(residual_gvm.abs() < options.tolerance) {
        return Err(PhaseMatchError::ToleranceNotMet {
            residual: residual_gvm,
            tolerance: options.tolerance,
        });
    }
    let omega_p = match fixed {
        FixedFrequency::Pump(wp) => wp,
        _ => omega_s + omega_i,
    };
    let centers = Centers {
        omega_p,
        omega_s,
        omega_i,
    };
    // the length does not enter the poling period
    let spec = ProcessSpec::new(models.clone(), centers, 1.0, temperature_c)?;
    let zeroth_order_mismatch = spec.zeroth_order_mismatch()?;
    let poling = match solve_poling_period(&spec) {
        Ok(p) => Some(p),
        Err(PhaseMatchError::DegenerateMismatch { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(GvmSolution {
        omega_p,
        omega_s,
        omega_i,
        residual_gvm,
        zeroth_order_mismatch,
        poling,
        temperature_c,
    })
}

/// Lowest temperature on the lattice `t_lo + k·0.05 °C` at which the
/// marginal signal spectrum is merged (one half-maximum region).
///
/// The spectrum passes through three regimes as the phase matching is tuned
/// across the pump line: two peaks, merged, vanishing overlap. The search
/// assumes that order between `t_lo` and `t_hi` and bisects on it. A bracket
/// whose low end is not two-peaked, whose high end is still two-peaked, or in
/// which the spectrum jumps straight from two peaks to vanishing yields
/// [`PhaseMatchError::NoMergeInBracket`].
pub fn find_merge_temperature(
    spec: &ProcessSpec,
    pump: &PumpModel,
    t_lo: f64,
    t_hi: f64,
    grid: &GridSpec,
) -> Result<f64> {
    let no_merge = |reason: &str| PhaseMatchError::NoMergeInBracket {
        lo_c: t_lo,
        hi_c: t_hi,
        reason: reason.to_string(),
    };
    if !(t_lo < t_hi) {
        return Err(no_merge("empty bracket"));
    }
    let steps = ((t_hi - t_lo) / MERGE_RESOLUTION_C).floor() as i64;
    let temp_at = |k: i64| t_lo + k as f64 * MERGE_RESOLUTION_C;
    let regime = |k: i64| -> Result<SpectralRegime> {
        Ok(jsa::spectral_regime(&spec.at_temperature(temp_at(k)), pump, grid)?.regime)
    };

    if regime(0)? != SpectralRegime::TwoPeaked {
        return Err(no_merge("spectrum is not two-peaked at the low end"));
    }
    if regime(steps)? == SpectralRegime::TwoPeaked {
        return Err(no_merge("spectrum is still two-peaked at the high end"));
    }
    // invariant: regime(lo) is two-peaked, regime(hi) is not
    let (mut lo, mut hi) = (0i64, steps);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if regime(mid)? == SpectralRegime::TwoPeaked {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    match regime(hi)? {
        SpectralRegime::Merged => Ok(temp_at(hi)),
        _ => Err(no_merge("overlap vanishes before the peaks merge")),
    }
}
