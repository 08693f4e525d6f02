//! Joint spectral amplitude on frequency grids, marginal spectra, bandwidths,
//! correlation times and time-bandwidth products.
//!
//! Grids are pump aligned: the signal and idler axes share one step δ and are
//! offset so that every anti-diagonal `k + j = const` has a single pump
//! frequency `ω_p0 + (k + j − N + 1)·δ`. A pump narrower than δ then occupies
//! exactly one anti-diagonal instead of being aliased between samples.
//!
//! Time-bandwidth products use ordinary frequency ν (Hz): Δτ·Δν. Multiply by
//! 2π for the angular-frequency product Δτ·Δω. The correlation time is the
//! FWHM of |FT{√S(ν)}|², the transform of the spectral amplitude with a flat
//! phase.

use std::f64::consts::{LN_2, PI};
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::dispersion::{omega_to_wavelength_um, DispersionError, SPEED_OF_LIGHT};
use crate::format::sig9;
use crate::phasematch::{PhaseMatchError, ProcessSpec};

/// Minimum pump FWHM [rad/s] used on grids (2π × 100 MHz).
pub const DEFAULT_LINEWIDTH_FLOOR: f64 = 2.0 * PI * 100e6;
pub const DEFAULT_GRID_POINTS: usize = 2048;
/// Half-span of automatic grids in units of the expected PM bandwidth.
pub const AUTO_SPAN_FACTOR: f64 = 3.0;
/// Peaks less prominent than this fraction of the maximum are ripple.
pub const PEAK_PROMINENCE: f64 = 0.05;
/// Largest allowed change of L·Δβ/2 between neighbouring samples (8 per lobe).
pub const MAX_PHASE_STEP: f64 = PI / 8.0;
/// Samples whose pump amplitude is below this are outside the pump support.
const PUMP_SUPPORT: f64 = 1e-3;
/// Zero-padding factor of the correlation-time transform.
pub const FFT_PADDING: usize = 16;
/// Half-maximum argument of sinc²: sinc²(x) = 1/2.
const SINC2_HALF_MAX_ARG: f64 = 1.391_557_377_3;

#[derive(Debug, Error)]
pub enum JsaError {
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    PhaseMatch(Box<PhaseMatchError>),
    #[error("grid too coarse: L·Δβ/2 changes by {max_step:.3} rad between neighbouring samples (limit {limit:.3})")]
    GridTooCoarse { max_step: f64, limit: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("joint spectral amplitude is zero everywhere on the grid")]
    ZeroAmplitude,
    #[error("trace has {0} samples; at least 16 are required")]
    TooFewSamples(usize),
    #[error("trace has no peak (all zero or flat)")]
    NoPeak,
    #[error("half-maximum region reaches the edge of the trace")]
    Truncated,
    #[error("trace is not sampled uniformly in frequency")]
    NonUniform,
    #[error("trace span {span_thz:.4} THz is less than 4× its FWHM {fwhm_thz:.4} THz")]
    SpanTooNarrow { span_thz: f64, fwhm_thz: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<PhaseMatchError> for JsaError {
    fn from(e: PhaseMatchError) -> Self {
        match e {
            PhaseMatchError::Dispersion(d) => JsaError::Dispersion(d),
            PhaseMatchError::Jsa(j) => *j,
            other => JsaError::PhaseMatch(Box::new(other)),
        }
    }
}

pub type Result<T, E = JsaError> = std::result::Result<T, E>;

/// Gaussian pump envelope α(ω_p) with α(center) = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpModel {
    pub center_omega: f64,
    /// Intensity FWHM [rad/s]; 0 means an ideal CW line.
    pub linewidth_fwhm: f64,
    /// Narrowest FWHM represented on grids [rad/s].
    pub linewidth_floor: f64,
}

impl PumpModel {
    pub fn cw(center_omega: f64) -> Self {
        Self {
            center_omega,
            linewidth_fwhm: 0.0,
            linewidth_floor: DEFAULT_LINEWIDTH_FLOOR,
        }
    }

    pub fn with_linewidth(mut self, fwhm: f64) -> Self {
        self.linewidth_fwhm = fwhm;
        self
    }

    pub fn effective_fwhm(&self) -> f64 {
        self.linewidth_fwhm.max(self.linewidth_floor)
    }

    /// Amplitude, so that |α|² has the configured intensity FWHM.
    pub fn amplitude(&self, omega_p: f64) -> f64 {
        let u = (omega_p - self.center_omega) / self.effective_fwhm();
        (-2.0 * LN_2 * u * u).exp()
    }
}

/// Square, pump-aligned sampling of the (ω_s, ω_i) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    /// Center of the signal axis [rad/s].
    pub center_signal: f64,
    /// Half-width of each axis [rad/s].
    pub half_span: f64,
}

impl GridSpec {
    /// `points` samples over ±3× the expected phase-matching bandwidth
    /// around the spec's signal center.
    ///
    /// The bandwidth estimate expands Δβ along the pump line to second order,
    /// Δβ(Ω) ≈ (β_i' − β_s')Ω − ½(β_s'' + β_i'')Ω², and takes the detuning at
    /// which L·|Δβ|/2 reaches the sinc² half-maximum.
    pub fn auto(spec: &ProcessSpec, points: usize) -> Result<Self> {
        let t = spec.temperature_c;
        let (ws, wi) = (spec.centers.omega_s, spec.centers.omega_i);
        let m = &spec.models;
        let linear = (m.idler.inverse_group_velocity(wi, t)? - m.signal.inverse_group_velocity(ws, t)?).abs();
        let quadratic =
            0.5 * (m.signal.group_velocity_dispersion(ws, t)? + m.idler.group_velocity_dispersion(wi, t)?).abs();
        let target = 2.0 * SINC2_HALF_MAX_ARG / spec.pm_length();
        // positive root of quadratic·Ω² + linear·Ω − target = 0
        let half_width = if quadratic > 0.0 {
            (-linear + (linear * linear + 4.0 * quadratic * target).sqrt()) / (2.0 * quadratic)
        } else if linear > 0.0 {
            target / linear
        } else {
            return Err(JsaError::InvalidGrid("dispersionless process has no finite bandwidth".into()));
        };
        let spec = Self {
            points,
            center_signal: ws,
            half_span: AUTO_SPAN_FACTOR * 2.0 * half_width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(JsaError::InvalidGrid(format!("need at least 2 points, got {}", self.points)));
        }
        if !(self.half_span.is_finite() && self.half_span > 0.0) {
            return Err(JsaError::InvalidGrid(format!("half span must be positive, got {}", self.half_span)));
        }
        if !(self.center_signal - self.half_span > 0.0) {
            return Err(JsaError::InvalidGrid("signal axis reaches zero frequency".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_span / (self.points - 1) as f64
    }

    /// Signal and idler axes aligned to `pump_center`.
    pub fn axes(&self, pump_center: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let n = self.points;
        let step = self.step();
        let mid = 0.5 * (n - 1) as f64;
        let idler_center = pump_center - self.center_signal;
        if !(idler_center - self.half_span > 0.0) {
            return Err(JsaError::InvalidGrid("idler axis reaches zero frequency".into()));
        }
        let signal = (0..n).map(|k| self.center_signal + (k as f64 - mid) * step).collect();
        let idler = (0..n).map(|j| idler_center + (j as f64 - mid) * step).collect();
        Ok((signal, idler))
    }
}

/// Sampled joint spectral amplitude, normalized to max |f| = 1.
#[derive(Debug, Clone)]
pub struct JsaGrid {
    pub omega_s: Vec<f64>,
    pub omega_i: Vec<f64>,
    pub step: f64,
    /// Row-major: `amplitude[k * n + j]` is f(ω_s[k], ω_i[j]).
    pub amplitude: Vec<Complex64>,
    /// max |f| before normalization.
    pub raw_peak: f64,
    /// Inclusive range of anti-diagonals `k + j` on which the pump is nonzero.
    pub pump_band: (usize, usize),
    pub pump: PumpModel,
    pub spec: Option<ProcessSpec>,
}

impl JsaGrid {
    pub fn len(&self) -> usize {
        self.omega_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_s.is_empty()
    }

    pub fn at(&self, k: usize, j: usize) -> Complex64 {
        self.amplitude[k * self.len() + j]
    }

    /// Columns of row `k` that can be nonzero.
    fn row_band(&self, k: usize) -> std::ops::Range<usize> {
        row_band(k, self.len(), self.pump_band)
    }

    /// Orientation of the principal axis of |f|² in the (ω_s, ω_i) plane,
    /// in degrees within (−90°, 90°]. −45° is a ridge along the anti-diagonal.
    pub fn principal_axis_deg(&self) -> f64 {
        let n = self.len();
        let (mut w, mut ms, mut mi) = (0.0, 0.0, 0.0);
        for k in 0..n {
            for j in self.row_band(k) {
                let p = self.at(k, j).norm_sqr();
                w += p;
                ms += p * k as f64;
                mi += p * j as f64;
            }
        }
        ms /= w;
        mi /= w;
        let (mut css, mut cii, mut csi) = (0.0, 0.0, 0.0);
        for k in 0..n {
            for j in self.row_band(k) {
                let p = self.at(k, j).norm_sqr();
                let (ds, di) = (k as f64 - ms, j as f64 - mi);
                css += p * ds * ds;
                cii += p * di * di;
                csi += p * ds * di;
            }
        }
        let angle = 0.5 * (2.0 * csi).atan2(css - cii);
        let deg = angle.to_degrees();
        if deg <= -90.0 {
            deg + 180.0
        } else {
            deg
        }
    }
}

fn row_band(k: usize, n: usize, band: (usize, usize)) -> std::ops::Range<usize> {
    let lo = band.0.saturating_sub(k);
    let hi = (band.1 + 1).saturating_sub(k).min(n);
    lo.min(hi)..hi
}

struct PumpLine {
    alpha: Vec<f64>,
    band: (usize, usize),
}

fn pump_line(pump: &PumpModel, n: usize, step: f64) -> Result<PumpLine> {
    let alpha: Vec<f64> = (0..2 * n - 1)
        .map(|m| pump.amplitude(pump.center_omega + (m as f64 - (n - 1) as f64) * step))
        .collect();
    let lo = alpha.iter().position(|a| *a > 0.0);
    let hi = alpha.iter().rposition(|a| *a > 0.0);
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(PumpLine { alpha, band: (lo, hi) }),
        _ => Err(JsaError::ZeroAmplitude),
    }
}

fn normalize(amplitude: &mut [Complex64]) -> Result<f64> {
    let peak = amplitude.par_iter().map(|z| z.norm()).reduce(|| 0.0, f64::max);
    if !(peak > 0.0) {
        return Err(JsaError::ZeroAmplitude);
    }
    amplitude.par_iter_mut().for_each(|z| *z /= peak);
    Ok(peak)
}

/// f(ω_s, ω_i) = α(ω_s + ω_i)·φ(ω_s, ω_i) on a pump-aligned grid.
///
/// Fails with [`JsaError::GridTooCoarse`] when L·Δβ/2 moves by more than π/8
/// between neighbouring samples (along either axis or the anti-diagonal)
/// that both lie inside the pump support.
pub fn evaluate_jsa(spec: &ProcessSpec, pump: &PumpModel, grid: &GridSpec) -> Result<JsaGrid> {
    let (omega_s, omega_i) = grid.axes(pump.center_omega)?;
    let n = grid.points;
    let step = grid.step();
    let line = pump_line(pump, n, step)?;
    let t = spec.temperature_c;
    let m = &spec.models;

    let beta_s = omega_s.iter().map(|w| m.signal.beta(*w, t)).collect::<Result<Vec<_>, _>>()?;
    let beta_i = omega_i.iter().map(|w| m.idler.beta(*w, t)).collect::<Result<Vec<_>, _>>()?;
    let mut beta_p = vec![f64::NAN; 2 * n - 1];
    for (mm, slot) in beta_p.iter_mut().enumerate().take(line.band.1 + 1).skip(line.band.0) {
        *slot = m.pump.beta(pump.center_omega + (mm as f64 - (n - 1) as f64) * step, t)?;
    }
    let half_l = 0.5 * spec.pm_length();
    let grating = spec.grating_vector();
    let phase = |k: usize, j: usize| half_l * (beta_p[k + j] - beta_s[k] - beta_i[j] - grating);

    let band = line.band;
    let alpha = &line.alpha;
    let in_support = |k: usize, j: usize| alpha[k + j] >= PUMP_SUPPORT;

    let max_step = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut worst = 0.0f64;
            for j in row_band(k, n, band) {
                if !in_support(k, j) {
                    continue;
                }
                let x = phase(k, j);
                if j + 1 < n && in_support(k, j + 1) {
                    worst = worst.max((phase(k, j + 1) - x).abs());
                }
                if k + 1 < n && in_support(k + 1, j) {
                    worst = worst.max((phase(k + 1, j) - x).abs());
                }
                if k + 1 < n && j >= 1 && in_support(k + 1, j - 1) {
                    worst = worst.max((phase(k + 1, j - 1) - x).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    if max_step > MAX_PHASE_STEP {
        return Err(JsaError::GridTooCoarse {
            max_step,
            limit: MAX_PHASE_STEP,
        });
    }

    let mut amplitude = vec![Complex64::new(0.0, 0.0); n * n];
    amplitude.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
        for j in row_band(k, n, band) {
            let x = phase(k, j);
            let (s, c) = x.sin_cos();
            let a = alpha[k + j] * crate::phasematch::sinc(x);
            row[j] = Complex64::new(a * c, a * s);
        }
    });
    let raw_peak = normalize(&mut amplitude)?;
    Ok(JsaGrid {
        omega_s,
        omega_i,
        step,
        amplitude,
        raw_peak,
        pump_band: band,
        pump: *pump,
        spec: Some(spec.clone()),
    })
}

/// Same grid construction as [`evaluate_jsa`] with an arbitrary
/// phase-matching function `pm(ω_s, ω_i)` and no fringe-sampling check.
pub fn evaluate_jsa_with<F>(pump: &PumpModel, grid: &GridSpec, pm: F) -> Result<JsaGrid>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let (omega_s, omega_i) = grid.axes(pump.center_omega)?;
    let n = grid.points;
    let step = grid.step();
    let line = pump_line(pump, n, step)?;
    let band = line.band;
    let mut amplitude = vec![Complex64::new(0.0, 0.0); n * n];
    amplitude.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
        for j in row_band(k, n, band) {
            row[j] = line.alpha[k + j] * pm(omega_s[k], omega_i[j]);
        }
    });
    let raw_peak = normalize(&mut amplitude)?;
    Ok(JsaGrid {
        omega_s,
        omega_i,
        step,
        amplitude,
        raw_peak,
        pump_band: band,
        pump: *pump,
        spec: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceMeta {
    pub temperature_c: Option<f64>,
    pub pump_wavelength_nm: Option<f64>,
    pub effective_length_m: Option<f64>,
    /// Factor that turns `intensity` back into the unnormalized spectrum.
    pub scale: f64,
}

/// Sampled 1-D intensity spectrum on an increasing frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub frequency_thz: Vec<f64>,
    /// Normalized to max 1.
    pub intensity: Vec<f64>,
    pub meta: TraceMeta,
}

impl SpectrumTrace {
    /// Builds a trace from raw nonnegative samples, normalizing to max 1.
    pub fn from_raw(frequency_thz: Vec<f64>, raw: Vec<f64>, meta: TraceMeta) -> Result<Self> {
        if frequency_thz.len() != raw.len() {
            return Err(JsaError::InvalidInput("axis and intensity lengths differ".into()));
        }
        if frequency_thz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(JsaError::InvalidInput("frequency axis must be strictly increasing".into()));
        }
        if raw.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(JsaError::InvalidInput("intensity must be finite and nonnegative".into()));
        }
        let scale = raw.iter().copied().fold(0.0, f64::max);
        let intensity = if scale > 0.0 {
            raw.iter().map(|v| v / scale).collect()
        } else {
            raw
        };
        Ok(Self {
            frequency_thz,
            intensity,
            meta: TraceMeta { scale, ..meta },
        })
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn wavelength_nm(&self, index: usize) -> f64 {
        thz_to_nm(self.frequency_thz[index])
    }
}

pub fn thz_to_nm(frequency_thz: f64) -> f64 {
    SPEED_OF_LIGHT / (frequency_thz * 1e12) * 1e9
}

fn omega_to_thz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e-12
}

/// S(ω_s) = Σ_i |f(ω_s, ω_i)|²·Δω_i, normalized to max 1.
pub fn marginal_signal_spectrum(jsa: &JsaGrid) -> Result<SpectrumTrace> {
    let n = jsa.len();
    let raw: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| jsa.row_band(k).map(|j| jsa.at(k, j).norm_sqr()).sum::<f64>() * jsa.step)
        .collect();
    let meta = TraceMeta {
        temperature_c: jsa.spec.as_ref().map(|s| s.temperature_c),
        pump_wavelength_nm: Some(omega_to_wavelength_um(jsa.pump.center_omega) * 1e3),
        effective_length_m: jsa.spec.as_ref().map(|s| s.pm_length()),
        scale: 0.0,
    };
    SpectrumTrace::from_raw(jsa.omega_s.iter().map(|w| omega_to_thz(*w)).collect(), raw, meta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FwhmResult {
    /// Width of the half-maximum region around the global maximum [THz].
    pub bandwidth_thz: f64,
    /// True when every peak reaching half the maximum lies in that region.
    pub merged: bool,
    /// Prominent peaks at or above half maximum, by increasing frequency [THz].
    pub peak_positions_thz: Vec<f64>,
    /// Interpolated half-maximum crossings [THz].
    pub left_thz: f64,
    pub right_thz: f64,
}

/// Local maxima whose topographic prominence is at least `min_prominence`.
/// Plateaus report their middle sample; the end samples are never peaks.
pub fn find_peaks(y: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = y.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let p = (i + j) / 2;
                if prominence(y, p) >= min_prominence {
                    peaks.push(p);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn prominence(y: &[f64], p: usize) -> f64 {
    let h = y[p];
    let mut left_min = h;
    for v in y[..p].iter().rev() {
        if *v > h {
            break;
        }
        left_min = left_min.min(*v);
    }
    let mut right_min = h;
    for v in &y[p + 1..] {
        if *v > h {
            break;
        }
        right_min = right_min.min(*v);
    }
    h - left_min.max(right_min)
}

/// FWHM with the two-peak merge rule.
///
/// The bandwidth is the distance between the outermost half-maximum
/// crossings of the contiguous region around the global maximum (ties go to
/// the lowest frequency), linearly interpolated between samples. Two peaks
/// count as merged when the valley between them stays above half maximum,
/// which is the same as both lying in that region.
pub fn fwhm_bandwidth(trace: &SpectrumTrace) -> Result<FwhmResult> {
    let y = &trace.intensity;
    let x = &trace.frequency_thz;
    let n = y.len();
    if n < 16 {
        return Err(JsaError::TooFewSamples(n));
    }
    let (mut top, mut max) = (0, y[0]);
    let mut min = y[0];
    for (i, v) in y.iter().enumerate() {
        if *v > max {
            top = i;
            max = *v;
        }
        min = min.min(*v);
    }
    if !(max > 0.0) || max == min {
        return Err(JsaError::NoPeak);
    }
    let half = 0.5 * max;
    let mut lo = top;
    while lo > 0 && y[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = top;
    while hi + 1 < n && y[hi + 1] >= half {
        hi += 1;
    }
    if lo == 0 || hi == n - 1 {
        return Err(JsaError::Truncated);
    }
    let cross = |a: usize, b: usize| x[a] + (half - y[a]) / (y[b] - y[a]) * (x[b] - x[a]);
    let left_thz = cross(lo - 1, lo);
    let right_thz = cross(hi, hi + 1);

    let significant: Vec<usize> = find_peaks(y, PEAK_PROMINENCE * max)
        .into_iter()
        .filter(|p| y[*p] >= half)
        .collect();
    let merged = significant.iter().all(|p| (lo..=hi).contains(p));
    Ok(FwhmResult {
        bandwidth_thz: right_thz - left_thz,
        merged,
        peak_positions_thz: significant.iter().map(|p| x[*p]).collect(),
        left_thz,
        right_thz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationTime {
    /// FWHM of |FT{√S}|² [s].
    pub delta_tau_fwhm_s: f64,
    /// FWHM of |FT{√S}| [s], the amplitude-width alternative.
    pub delta_tau_amplitude_fwhm_s: f64,
    /// FWHM of the spectrum [Hz].
    pub spectral_fwhm_hz: f64,
    /// Δτ·Δν.
    pub classical_tbp: f64,
    /// Δτ·Δω = 2π·Δτ·Δν.
    pub classical_tbp_angular: f64,
}

fn is_uniform(x: &[f64]) -> bool {
    let d0 = x[1] - x[0];
    x.windows(2).all(|w| ((w[1] - w[0]) - d0).abs() <= 1e-6 * d0.abs())
}

/// FWHM of a symmetric peak centred on index 0 of a circular buffer,
/// interpolating each side linearly.
fn circular_fwhm(y: &[f64], dt: f64) -> f64 {
    let n = y.len();
    let half = 0.5 * y[0];
    let side = |index: &dyn Fn(usize) -> usize| {
        let mut m = 1;
        while m < n / 2 && y[index(m)] >= half {
            m += 1;
        }
        let (a, b) = (y[index(m - 1)], y[index(m)]);
        ((m - 1) as f64 + (a - half) / (a - b)) * dt
    };
    side(&|m| m) + side(&|m| n - m)
}

/// Transform-limited correlation time of a spectrum with flat phase.
pub fn correlation_time(trace: &SpectrumTrace) -> Result<CorrelationTime> {
    correlation_time_padded(trace, FFT_PADDING)
}

/// [`correlation_time`] with an explicit zero-padding factor.
pub fn correlation_time_padded(trace: &SpectrumTrace, padding: usize) -> Result<CorrelationTime> {
    let fwhm = fwhm_bandwidth(trace)?;
    let x = &trace.frequency_thz;
    if !is_uniform(x) {
        return Err(JsaError::NonUniform);
    }
    let span = x[x.len() - 1] - x[0];
    if span < 4.0 * fwhm.bandwidth_thz {
        return Err(JsaError::SpanTooNarrow {
            span_thz: span,
            fwhm_thz: fwhm.bandwidth_thz,
        });
    }
    let d_nu = (x[1] - x[0]) * 1e12;
    let len = trace.len().next_power_of_two() * padding.max(1);
    let mut buf: Vec<Complex64> = trace
        .intensity
        .iter()
        .map(|v| Complex64::new(v.sqrt(), 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(len)
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let dt = 1.0 / (len as f64 * d_nu);
    let amp: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let power: Vec<f64> = amp.iter().map(|a| a * a).collect();
    let delta_tau = circular_fwhm(&power, dt);
    let delta_tau_amp = circular_fwhm(&amp, dt);
    let spectral_fwhm_hz = fwhm.bandwidth_thz * 1e12;
    let tbp = delta_tau * spectral_fwhm_hz;
    Ok(CorrelationTime {
        delta_tau_fwhm_s: delta_tau,
        delta_tau_amplitude_fwhm_s: delta_tau_amp,
        spectral_fwhm_hz,
        classical_tbp: tbp,
        classical_tbp_angular: 2.0 * PI * tbp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiphotonTbp {
    pub value: f64,
    /// `value < classical_tbp`, strictly.
    pub entangled: bool,
}

/// Δτ·Δν_p for a correlation time [s] and pump linewidth [Hz], compared
/// against a classical limit in the same ordinary-frequency convention.
pub fn biphoton_tbp(delta_tau_s: f64, pump_linewidth_hz: f64, classical_tbp: f64) -> Result<BiphotonTbp> {
    if !(delta_tau_s > 0.0 && pump_linewidth_hz > 0.0) {
        return Err(JsaError::InvalidInput(
            "correlation time and pump linewidth must be positive".into(),
        ));
    }
    let value = delta_tau_s * pump_linewidth_hz;
    Ok(BiphotonTbp {
        value,
        entangled: value < classical_tbp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralRegime {
    /// Pump and phase matching intersect twice; the peaks are separated.
    TwoPeaked,
    /// One half-maximum region.
    Merged,
    /// Best phase matching on the pump line is below half efficiency.
    Vanishing,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub temperature_c: f64,
    pub trace: SpectrumTrace,
    pub fwhm: FwhmResult,
    pub regime: SpectralRegime,
    /// max |f|² before normalization.
    pub raw_peak_intensity: f64,
}

impl SpectrumReport {
    /// Merged in the operating-point sense: one half-maximum region and a
    /// pump line that still meets the main phase-matching lobe. Spectra in
    /// the vanishing regime are sidelobe fragments and never count.
    pub fn merged(&self) -> bool {
        self.regime == SpectralRegime::Merged
    }
}

/// Marginal spectrum, bandwidth and regime at the spec's temperature.
pub fn spectral_regime(spec: &ProcessSpec, pump: &PumpModel, grid: &GridSpec) -> Result<SpectrumReport> {
    let jsa = evaluate_jsa(spec, pump, grid)?;
    let trace = marginal_signal_spectrum(&jsa)?;
    let fwhm = fwhm_bandwidth(&trace)?;
    let raw_peak_intensity = jsa.raw_peak * jsa.raw_peak;
    let regime = if raw_peak_intensity < 0.5 {
        SpectralRegime::Vanishing
    } else if fwhm.merged {
        SpectralRegime::Merged
    } else {
        SpectralRegime::TwoPeaked
    };
    Ok(SpectrumReport {
        temperature_c: spec.temperature_c,
        trace,
        fwhm,
        regime,
        raw_peak_intensity,
    })
}

/// One spectrum per temperature, in input order. The grid is shared by all
/// temperatures; the effective length of `spec` applies throughout.
pub fn temperature_sweep(
    spec: &ProcessSpec,
    pump: &PumpModel,
    temperatures_c: &[f64],
    grid: &GridSpec,
) -> Result<Vec<SpectrumReport>> {
    temperatures_c
        .iter()
        .map(|t| spectral_regime(&spec.at_temperature(*t), pump, grid))
        .collect()
}

pub const TRACE_CSV_HEADER: &str = "wavelength_nm,frequency_THz,intensity_norm";
pub const SWEEP_CSV_HEADER: &str = "temperature_C,fwhm_THz,merged,peak1_nm,peak2_nm";

pub fn write_trace_csv<W: Write>(trace: &SpectrumTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for (f, v) in trace.frequency_thz.iter().zip(&trace.intensity) {
        writeln!(out, "{},{},{}", sig9(thz_to_nm(*f)), sig9(*f), sig9(*v))?;
    }
    Ok(())
}

/// The two highest half-maximum peaks in increasing wavelength; empty
/// fields when fewer exist. `merged` is [`SpectrumReport::merged`].
pub fn write_sweep_csv<W: Write>(reports: &[SpectrumReport], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in reports {
        let mut peaks: Vec<(f64, f64)> = r
            .fwhm
            .peak_positions_thz
            .iter()
            .map(|f| {
                let idx = r.trace.frequency_thz.partition_point(|x| x < f);
                (r.trace.intensity[idx], thz_to_nm(*f))
            })
            .collect();
        peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
        peaks.truncate(2);
        let mut nm: Vec<f64> = peaks.into_iter().map(|p| p.1).collect();
        nm.sort_by(f64::total_cmp);
        let field = |i: usize| nm.get(i).map(|v| sig9(*v)).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            sig9(r.temperature_c),
            sig9(r.fwhm.bandwidth_thz),
            r.merged(),
            field(0),
            field(1)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_from(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> SpectrumTrace {
        let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let y = x.iter().map(|v| f(*v)).collect();
        SpectrumTrace::from_raw(x, y, TraceMeta::default()).unwrap()
    }

    fn gaussian(center: f64, sigma: f64) -> impl Fn(f64) -> f64 {
        move |x| (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp()
    }

    #[test]
    fn gaussian_fwhm_closed_form() {
        let sigma = 1.3;
        let t = trace_from(gaussian(375.0, sigma), 360.0, 390.0, 2001);
        let r = fwhm_bandwidth(&t).unwrap();
        let want = 2.0 * (2.0 * LN_2).sqrt() * sigma;
        assert!((r.bandwidth_thz - want).abs() / want < 5e-3);
        assert!(r.merged);
        assert_eq!(r.peak_positions_thz.len(), 1);
    }

    #[test]
    fn flat_and_zero_traces_have_no_peak() {
        let t = trace_from(|_| 0.0, 0.0, 1.0, 32);
        assert!(matches!(fwhm_bandwidth(&t), Err(JsaError::NoPeak)));
        let t = trace_from(|_| 3.0, 0.0, 1.0, 32);
        assert!(matches!(fwhm_bandwidth(&t), Err(JsaError::NoPeak)));
        let t = trace_from(gaussian(0.5, 0.1), 0.0, 1.0, 8);
        assert!(matches!(fwhm_bandwidth(&t), Err(JsaError::TooFewSamples(8))));
    }

    #[test]
    fn truncated_half_max_region_rejected() {
        let t = trace_from(gaussian(0.0, 1.0), 0.0, 5.0, 64);
        assert!(matches!(fwhm_bandwidth(&t), Err(JsaError::Truncated)));
    }

    #[test]
    fn ties_break_to_lowest_frequency() {
        // two identical well-separated peaks: dominant is the low-frequency one
        let g1 = gaussian(10.0, 0.5);
        let g2 = gaussian(20.0, 0.5);
        let t = trace_from(|x| g1(x) + g2(x), 0.0, 30.0, 3001);
        let r = fwhm_bandwidth(&t).unwrap();
        assert!(!r.merged);
        assert!(r.left_thz < 10.0 && r.right_thz > 10.0 && r.right_thz < 15.0);
        assert_eq!(r.peak_positions_thz.len(), 2);
    }

    #[test]
    fn ripple_does_not_split_peaks() {
        let g = gaussian(50.0, 4.0);
        let t = trace_from(|x| g(x) * (1.0 + 0.02 * (x * 9.0).sin()), 20.0, 80.0, 4001);
        let r = fwhm_bandwidth(&t).unwrap();
        assert!(r.merged);
        assert_eq!(r.peak_positions_thz.len(), 1);
    }

    #[test]
    fn prominence_of_nested_peaks() {
        let y = [0.0, 1.0, 0.5, 0.8, 0.0, 0.0];
        assert_eq!(find_peaks(&y, 0.0), vec![1, 3]);
        assert_eq!(find_peaks(&y, 0.4), vec![1]);
        // plateau peak reported at its middle
        let y = [0.0, 1.0, 1.0, 1.0, 0.0];
        assert_eq!(find_peaks(&y, 0.5), vec![2]);
    }

    #[test]
    fn biphoton_tbp_values() {
        let r = biphoton_tbp(120e-15, 1e6, 0.93).unwrap();
        assert_eq!(r.value, 1.20e-7);
        assert!(r.entangled);
        let r = biphoton_tbp(2.0, 0.5, 1.0).unwrap();
        assert!(!r.entangled);
        let a = biphoton_tbp(3e-13, 2e6, 1.0).unwrap().value;
        let b = biphoton_tbp(6e-13, 4e6, 1.0).unwrap().value;
        assert!((b - 4.0 * a).abs() <= 1e-15 * b);
        assert!(biphoton_tbp(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn span_must_cover_four_fwhm() {
        let t = trace_from(gaussian(0.0, 1.0), -4.0, 4.0, 256);
        assert!(matches!(correlation_time(&t), Err(JsaError::SpanTooNarrow { .. })));
    }

    #[test]
    fn row_band_limits() {
        assert_eq!(row_band(0, 4, (3, 3)), 3..4);
        assert_eq!(row_band(3, 4, (3, 3)), 0..1);
        assert_eq!(row_band(2, 4, (0, 6)), 0..4);
        let r = row_band(0, 4, (5, 6));
        assert!(r.is_empty());
    }

    #[test]
    fn pump_amplitude_fwhm() {
        let p = PumpModel::cw(1e15).with_linewidth(2e9);
        assert_eq!(p.amplitude(1e15), 1.0);
        let half = p.amplitude(1e15 + 1e9);
        assert!((half * half - 0.5).abs() < 1e-12);
        assert_eq!(PumpModel::cw(1.0).effective_fwhm(), DEFAULT_LINEWIDTH_FLOOR);
    }
}
