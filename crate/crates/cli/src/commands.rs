use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use spdc_forge::coefficients::{CoefficientError, CoefficientRegistry};
use spdc_forge::dispersion::{omega_to_wavelength_um, wavelength_um_to_omega};
use spdc_forge::format::sig9;
use spdc_forge::jsa::{
    self, biphoton_tbp, correlation_time, evaluate_jsa, marginal_signal_spectrum, spectral_regime,
    temperature_sweep, GridSpec, JsaError, PumpModel, SpectrumReport,
};
use spdc_forge::phasematch::{
    find_merge_temperature, solve_gvm_triple, solve_poling_period, Centers, FixedFrequency, GvmOptions,
    GvmSolution, PhaseMatchError, PolingPeriod, ProcessModels, ProcessSpec,
};
use spdc_forge::tagproc::{self, BrightnessInputs, CoincidenceReport, SyntheticParams, TagError};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    PhaseMatch(#[from] PhaseMatchError),
    #[error(transparent)]
    Jsa(#[from] JsaError),
    #[error(transparent)]
    Tags(TagError),
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<TagError> for CliError {
    fn from(e: TagError) -> Self {
        match e {
            TagError::Parse { .. } | TagError::Io { .. } => CliError::Input(e.to_string()),
            other => CliError::Tags(other),
        }
    }
}

impl CliError {
    /// 1 for configuration and input errors, 2 for computation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Coefficients(_) | CliError::Input(_) => 1,
            CliError::PhaseMatch(PhaseMatchError::Polarizations { .. }) => 1,
            _ => 2,
        }
    }

    /// Name of the error variant, printed with the message.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Coefficients(_) => "CoefficientError",
            CliError::Input(_) => "InputError",
            CliError::PhaseMatch(e) => match e {
                PhaseMatchError::NoRootInBracket { .. } => "NoRootInBracket",
                PhaseMatchError::ToleranceNotMet { .. } => "ToleranceNotMet",
                PhaseMatchError::DegenerateMismatch { .. } => "DegenerateMismatch",
                PhaseMatchError::NoMergeInBracket { .. } => "NoMergeInBracket",
                PhaseMatchError::Polarizations { .. } => "Polarizations",
                PhaseMatchError::Dispersion(_) => "OutOfValidityRange",
                _ => "PhaseMatchError",
            },
            CliError::Jsa(e) => match e {
                JsaError::GridTooCoarse { .. } => "GridTooCoarse",
                JsaError::Dispersion(_) => "OutOfValidityRange",
                _ => "SpectrumError",
            },
            CliError::Tags(e) => match e {
                TagError::AccidentalsDominate { .. } => "AccidentalsDominate",
                TagError::NoCorrectedCoincidences { .. } => "NoCorrectedCoincidences",
                TagError::EmptyStream => "EmptyStream",
                _ => "TagError",
            },
            CliError::Output { .. } => "OutputError",
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Everything a command writes, collected before the first byte hits disk.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    /// Writes every file or, on failure, removes the ones already written.
    fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        let fail = |path: &Path, source| CliError::Output {
            path: path.to_path_buf(),
            source,
        };
        fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
        let mut written = Vec::new();
        for (name, body) in &self.files {
            let path = dir.join(name);
            if let Err(e) = fs::write(&path, body) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(fail(&path, e));
            }
            written.push(path);
        }
        Ok(written)
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

fn nm(omega: f64) -> f64 {
    omega_to_wavelength_um(omega) * 1e3
}

fn thz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e-12
}

/// Resolved process: models, centers, poling and pump.
pub struct Setup {
    pub spec: ProcessSpec,
    pub gvm: Option<GvmSolution>,
    pub pump: PumpModel,
}

pub fn build_setup(cfg: &RunConfig, config_dir: &Path) -> Result<Setup> {
    let materials = cfg.require(&cfg.materials, "materials")?;
    let process = cfg.require(&cfg.process, "process")?;
    let dirs: Vec<PathBuf> = materials.coefficient_dirs.iter().map(|d| config_dir.join(d)).collect();
    let registry = CoefficientRegistry::discover(&dirs)?;
    let models = ProcessModels::new(
        registry.model(&materials.pump)?,
        registry.model(&materials.signal)?,
        registry.model(&materials.idler)?,
    );
    process.process_type.check(
        models.pump.polarization,
        models.signal.polarization,
        models.idler.polarization,
    )?;
    let t = process.temperature_c;
    let w = |nm: Option<f64>| nm.map(|v| wavelength_um_to_omega(v * 1e-3));
    let (wp, ws, wi) = (
        w(process.pump_wavelength_nm),
        w(process.signal_wavelength_nm),
        w(process.idler_wavelength_nm),
    );
    let (centers, gvm) = match (wp, ws, wi) {
        (Some(p), None, None) => solved(&models, FixedFrequency::Pump(p), t)?,
        (None, Some(s), None) => solved(&models, FixedFrequency::Signal(s), t)?,
        (None, None, Some(i)) => solved(&models, FixedFrequency::Idler(i), t)?,
        (Some(p), Some(s), None) => (Centers::from_daughters(s, p - s), None),
        (Some(p), None, Some(i)) => (Centers::from_daughters(p - i, i), None),
        (None, Some(s), Some(i)) => (Centers::from_daughters(s, i), None),
        _ => unreachable!("validated: one or two wavelengths"),
    };
    if !(centers.omega_s > 0.0 && centers.omega_i > 0.0) {
        return Err(ConfigError::Invalid("process: daughter wavelengths must be longer than the pump's".into()).into());
    }
    let spec = ProcessSpec::new(models, centers, process.length_mm * 1e-3, t)?
        .with_effective_length(process.effective_length_mm.map(|l| l * 1e-3))?;
    let poling = match process.poling_period_um {
        Some(l) => Some(PolingPeriod::new(l * 1e-6, process.poling_order_sign)?),
        None => match solve_poling_period(&spec) {
            Ok(p) => Some(p),
            Err(PhaseMatchError::DegenerateMismatch { .. }) => None,
            Err(e) => return Err(e.into()),
        },
    };
    let pump = PumpModel {
        center_omega: centers.omega_p,
        linewidth_fwhm: 2.0 * PI * cfg.pump.linewidth_mhz * 1e6,
        linewidth_floor: 2.0 * PI * cfg.pump.linewidth_floor_mhz * 1e6,
    };
    Ok(Setup {
        spec: spec.with_poling(poling),
        gvm,
        pump,
    })
}

fn solved(models: &ProcessModels, fixed: FixedFrequency, t: f64) -> Result<(Centers, Option<GvmSolution>)> {
    let sol = solve_gvm_triple(models, fixed, t, &GvmOptions::default())?;
    Ok((sol.centers(), Some(sol)))
}

fn grid_for(cfg: &RunConfig, spec: &ProcessSpec) -> Result<GridSpec> {
    let grid = match cfg.grid.half_span_thz {
        Some(h) => GridSpec {
            points: cfg.grid.points,
            center_signal: spec.centers.omega_s,
            half_span: 2.0 * PI * h * 1e12,
        },
        None => GridSpec::auto(spec, cfg.grid.points)?,
    };
    grid.validate()?;
    Ok(grid)
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "{key}: {value}").expect("string write");
}

pub fn design(cfg: &RunConfig, config_dir: &Path, out_dir: &Path) -> Result<String> {
    let setup = build_setup(cfg, config_dir)?;
    let spec = &setup.spec;
    let c = spec.centers;
    let t = spec.temperature_c;
    let residual = spec.models.gvm(c.omega_s, c.omega_i, t)?;
    let mismatch = spec.zeroth_order_mismatch()?;
    let net = spec.delta_beta(c.omega_s, c.omega_i)?;

    let mut text = String::new();
    kv(&mut text, "process", cfg.process.as_ref().map(|p| p.process_type).expect("process"));
    for (role, label) in [("pump", "p"), ("signal", "s"), ("idler", "i")] {
        let model = match role {
            "pump" => &spec.models.pump,
            "signal" => &spec.models.signal,
            _ => &spec.models.idler,
        };
        kv(&mut text, &format!("model_{label}"), format!("{} ({})", model.name, model.polarization));
    }
    kv(&mut text, "temperature_c", sig9(t));
    kv(&mut text, "pump_nm", sig9(nm(c.omega_p)));
    kv(&mut text, "signal_nm", sig9(nm(c.omega_s)));
    kv(&mut text, "idler_nm", sig9(nm(c.omega_i)));
    kv(&mut text, "gvm_solved", setup.gvm.is_some());
    kv(&mut text, "gvm_residual_s_per_m", sig9(residual));
    kv(&mut text, "zeroth_order_mismatch_per_m", sig9(mismatch));
    let (period, sign) = match spec.poling {
        Some(p) => (sig9(p.period_m * 1e6), p.order_sign.to_string()),
        None => ("none".to_string(), "0".to_string()),
    };
    kv(&mut text, "poling_period_um", &period);
    kv(&mut text, "poling_order_sign", &sign);
    kv(&mut text, "net_mismatch_per_m", sig9(net));

    let csv = format!(
        "pump_nm,signal_nm,idler_nm,temperature_C,poling_period_um,order_sign,gvm_residual_s_per_m,zeroth_order_mismatch_per_m\n\
         {},{},{},{},{},{},{},{}\n",
        sig9(nm(c.omega_p)),
        sig9(nm(c.omega_s)),
        sig9(nm(c.omega_i)),
        sig9(t),
        if spec.poling.is_some() { period.clone() } else { String::new() },
        sign,
        sig9(residual),
        sig9(mismatch)
    );
    let mut outputs = Outputs::default();
    outputs.add("design.csv", csv);
    outputs.add("design.txt", text.clone());
    outputs.commit(out_dir)?;
    Ok(text)
}

pub fn spectrum_file_name(temperature_c: f64) -> String {
    format!("spectrum_T{temperature_c:.2}.csv")
}

fn spectrum_lines(r: &SpectrumReport, text: &mut String, prefix: &str) {
    kv(text, &format!("{prefix}temperature_c"), sig9(r.temperature_c));
    kv(text, &format!("{prefix}regime"), format!("{:?}", r.regime));
    kv(text, &format!("{prefix}fwhm_thz"), sig9(r.fwhm.bandwidth_thz));
    kv(text, &format!("{prefix}merged"), r.merged());
    let peaks: Vec<String> = r.fwhm.peak_positions_thz.iter().map(|f| sig9(jsa::thz_to_nm(*f))).collect();
    kv(text, &format!("{prefix}peaks_nm"), peaks.join(" "));
    kv(text, &format!("{prefix}raw_peak_intensity"), sig9(r.raw_peak_intensity));
}

fn correlation_lines(r: &SpectrumReport, pump: &PumpModel, text: &mut String) {
    match correlation_time(&r.trace) {
        Ok(ct) => {
            kv(text, "delta_tau_fs", sig9(ct.delta_tau_fwhm_s * 1e15));
            kv(text, "delta_tau_amplitude_fs", sig9(ct.delta_tau_amplitude_fwhm_s * 1e15));
            kv(text, "classical_tbp", sig9(ct.classical_tbp));
            kv(text, "classical_tbp_angular", sig9(ct.classical_tbp_angular));
            let linewidth_hz = pump.linewidth_fwhm / (2.0 * PI);
            if let Ok(b) = biphoton_tbp(ct.delta_tau_fwhm_s, linewidth_hz, ct.classical_tbp) {
                kv(text, "biphoton_tbp", sig9(b.value));
                kv(text, "entangled", b.entangled);
            }
        }
        Err(e) => kv(text, "correlation_time", format!("unavailable ({e})")),
    }
}

pub fn sweep(cfg: &RunConfig, config_dir: &Path, out_dir: &Path) -> Result<String> {
    let sweep = cfg.require(&cfg.sweep, "sweep")?;
    let temps = sweep.temperatures()?;
    let mut names: Vec<String> = temps.iter().map(|t| spectrum_file_name(*t)).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(ConfigError::Invalid("sweep: two temperatures map to the same file name".into()).into());
    }
    let setup = build_setup(cfg, config_dir)?;
    let grid = grid_for(cfg, &setup.spec)?;
    let reports = temperature_sweep(&setup.spec, &setup.pump, &temps, &grid)?;

    let mut outputs = Outputs::default();
    for r in &reports {
        outputs.add(
            spectrum_file_name(r.temperature_c),
            csv_bytes(|b| jsa::write_trace_csv(&r.trace, b)),
        );
    }
    let summary = csv_bytes(|b| jsa::write_sweep_csv(&reports, b));
    outputs.add("sweep_summary.csv", summary.clone());

    let mut text = summary;
    if sweep.find_merge {
        let lo = temps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tm = find_merge_temperature(&setup.spec, &setup.pump, lo, hi, &grid)?;
        let r = spectral_regime(&setup.spec.at_temperature(tm), &setup.pump, &grid)?;
        let mut merge = String::new();
        kv(&mut merge, "merge_temperature_c", sig9(tm));
        spectrum_lines(&r, &mut merge, "");
        correlation_lines(&r, &setup.pump, &mut merge);
        outputs.add("merge.txt", merge.clone());
        outputs.add(spectrum_file_name(tm).replace("spectrum_", "merge_spectrum_"), csv_bytes(|b| jsa::write_trace_csv(&r.trace, b)));
        text.push_str(&merge);
    }
    outputs.commit(out_dir)?;
    Ok(text)
}

pub fn jsa_export(cfg: &RunConfig, config_dir: &Path, out_dir: &Path) -> Result<String> {
    let setup = build_setup(cfg, config_dir)?;
    let grid = grid_for(cfg, &setup.spec)?;
    let grid_jsa = evaluate_jsa(&setup.spec, &setup.pump, &grid)?;
    let trace = marginal_signal_spectrum(&grid_jsa)?;
    let fwhm = jsa::fwhm_bandwidth(&trace)?;
    let raw_peak_intensity = grid_jsa.raw_peak * grid_jsa.raw_peak;
    let report = SpectrumReport {
        temperature_c: setup.spec.temperature_c,
        regime: if raw_peak_intensity < 0.5 {
            jsa::SpectralRegime::Vanishing
        } else if fwhm.merged {
            jsa::SpectralRegime::Merged
        } else {
            jsa::SpectralRegime::TwoPeaked
        },
        trace,
        fwhm,
        raw_peak_intensity,
    };

    let threshold = cfg.grid.export_threshold;
    let n = grid_jsa.len();
    let mut cells = String::from("signal_THz,idler_THz,intensity,phase_rad\n");
    for k in 0..n {
        for j in 0..n {
            let z = grid_jsa.at(k, j);
            let p = z.norm_sqr();
            if p >= threshold && p > 0.0 {
                writeln!(
                    cells,
                    "{},{},{},{}",
                    sig9(thz(grid_jsa.omega_s[k])),
                    sig9(thz(grid_jsa.omega_i[j])),
                    sig9(p),
                    sig9(z.arg())
                )
                .expect("string write");
            }
        }
    }
    let mut text = String::new();
    spectrum_lines(&report, &mut text, "");
    kv(&mut text, "grid_points", n);
    kv(&mut text, "grid_step_thz", sig9(thz(grid_jsa.step)));
    kv(&mut text, "principal_axis_deg", sig9(grid_jsa.principal_axis_deg()));
    correlation_lines(&report, &setup.pump, &mut text);

    let mut outputs = Outputs::default();
    outputs.add("jsa.csv", cells);
    outputs.add("spectrum.csv", csv_bytes(|b| jsa::write_trace_csv(&report.trace, b)));
    outputs.add("spectral_report.txt", text.clone());
    outputs.commit(out_dir)?;
    Ok(text)
}

fn report_stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    name.strip_suffix(".csv").unwrap_or(name).to_string()
}

pub fn analyze_tags(cfg: &RunConfig, files: &[PathBuf], out_dir: &Path) -> Result<String> {
    let analysis = cfg.require(&cfg.analysis, "analysis")?;
    if files.is_empty() {
        return Err(ConfigError::Invalid("analyze-tags needs at least one tag file".into()).into());
    }
    let mut stems: Vec<String> = files.iter().map(|f| report_stem(f)).collect();
    stems.sort();
    if stems.windows(2).any(|w| w[0] == w[1]) {
        return Err(ConfigError::Invalid("tag files must have distinct names".into()).into());
    }
    let power = match (analysis.pump_power_mw, analysis.bandwidth_ghz) {
        (Some(p), Some(b)) => Some(BrightnessInputs {
            pump_power_mw: p,
            bandwidth_ghz: b,
            power_rel_error: analysis.power_rel_error,
        }),
        _ => None,
    };
    let streams: Vec<_> = files
        .par_iter()
        .map(|f| tagproc::read_tag_file(f, analysis.duration_s))
        .collect::<std::result::Result<_, _>>()?;
    let reports: Vec<CoincidenceReport> = streams
        .par_iter()
        .map(|s| tagproc::analyze(s, analysis.window_ps, power))
        .collect::<std::result::Result<_, _>>()?;

    let mut outputs = Outputs::default();
    let mut combined = format!("{}\n", CoincidenceReport::CSV_HEADER);
    let mut text = String::new();
    for (file, report) in files.iter().zip(&reports) {
        let stem = report_stem(file);
        let body = report.to_text();
        writeln!(text, "# {}", file.display()).expect("string write");
        text.push_str(&body);
        outputs.add(format!("{stem}.report.txt"), body);
        combined.push_str(&report.csv_row(&stem));
        combined.push('\n');
    }
    outputs.add("coincidences.csv", combined);
    outputs.commit(out_dir)?;
    Ok(text)
}

pub fn synth_tags(cfg: &RunConfig, seed: Option<u64>, out_dir: &Path) -> Result<String> {
    let s = cfg.require(&cfg.synth, "synth")?;
    let seed = seed.unwrap_or(s.seed);
    let params = SyntheticParams {
        pair_rate_hz: s.pair_rate_hz,
        eta_s: s.eta_s,
        eta_i: s.eta_i,
        jitter_sigma_ps: s.jitter_ps,
        dark_rate_s_hz: s.dark_rate_s_hz,
        dark_rate_i_hz: s.dark_rate_i_hz,
        dead_time_ps: s.dead_time_ps,
        duration_s: s.duration_s,
    };
    params.validate().map_err(|e| ConfigError::Invalid(format!("synth: {e}")))?;
    let stream = tagproc::generate_synthetic_tags(&params, seed)?;
    let mut truth = String::new();
    kv(&mut truth, "seed", seed);
    kv(&mut truth, "pair_rate_hz", sig9(params.pair_rate_hz));
    kv(&mut truth, "eta_s", sig9(params.eta_s));
    kv(&mut truth, "eta_i", sig9(params.eta_i));
    kv(&mut truth, "jitter_ps", sig9(params.jitter_sigma_ps));
    kv(&mut truth, "dark_rate_s_hz", sig9(params.dark_rate_s_hz));
    kv(&mut truth, "dark_rate_i_hz", sig9(params.dark_rate_i_hz));
    kv(&mut truth, "dead_time_ps", params.dead_time_ps);
    kv(&mut truth, "duration_s", sig9(params.duration_s));
    kv(&mut truth, "n_signal", stream.signal().len());
    kv(&mut truth, "n_idler", stream.idler().len());

    let mut outputs = Outputs::default();
    outputs.add("tags.csv", csv_bytes(|b| tagproc::write_tags(&stream, b)));
    outputs.add("truth.txt", truth.clone());
    outputs.commit(out_dir)?;
    Ok(truth)
}
