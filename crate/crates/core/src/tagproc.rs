//! Two-channel time-tag reduction: singles and coincidence counting,
//! accidental subtraction, Klyshko efficiencies, generated pair rate and
//! brightness, plus a seeded synthetic tag generator.
//!
//! A coincidence is a signal event and an idler event with
//! `|t_i − t_s| ≤ t_w`, so the window has total width `2·t_w`. With that
//! convention the accidental rate of independent Poisson streams is
//! `r_cA = 2·r_s·r_i·t_w`. Each event pairs at most once: signal events are
//! visited in time order and take the nearest still-unmatched idler inside
//! the window, the earlier idler winning a tie.
//!
//! Tag files are CSV with header `channel,timestamp_ps`; channel 0 is the
//! signal and 1 the idler. Gzip-compressed files are recognized by their
//! magic bytes.

use std::collections::VecDeque;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::format::sig9;

const PS: f64 = 1e-12;
/// Relative tolerance between the two forms of the pair-rate formula.
pub const PAIR_RATE_FORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TagError {
    #[error("stream contains no events")]
    EmptyStream,
    #[error("coincidence window must be positive, got {0} ps")]
    InvalidWindow(i64),
    #[error("acquisition time must be positive and cover the tag span ({span_s} s), got {duration_s} s")]
    InvalidDuration { duration_s: f64, span_s: f64 },
    #[error("no coincidences left after accidental subtraction ({corrected})")]
    NoCorrectedCoincidences { corrected: f64 },
    #[error(
        "accidentals dominate: measured coincidence rate {r_cm} Hz ≤ accidental rate {r_ca} Hz \
         (n_s = {n_s}, n_i = {n_i}, n_c = {n_c})"
    )]
    AccidentalsDominate {
        r_cm: f64,
        r_ca: f64,
        n_s: u64,
        n_i: u64,
        n_c: u64,
    },
    #[error("the two forms of the pair-rate formula disagree: {a} vs {b}")]
    InconsistentPairRate { a: f64, b: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{origin}: line {line}: {message}")]
    Parse { origin: String, line: u64, message: String },
}

pub type Result<T, E = TagError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Signal,
    Idler,
}

impl Channel {
    pub fn index(self) -> u8 {
        match self {
            Channel::Signal => 0,
            Channel::Idler => 1,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            0 => Some(Channel::Signal),
            1 => Some(Channel::Idler),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TagEvent {
    pub timestamp_ps: i64,
    pub channel: Channel,
}

/// Detector clicks of one acquisition, kept sorted per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TagStream {
    signal: Vec<i64>,
    idler: Vec<i64>,
    duration_s: f64,
    sorted_on_load: bool,
}

impl TagStream {
    /// Builds a stream from per-channel timestamps, sorting them if needed.
    /// Without `duration_s` the acquisition time is the tag span.
    pub fn new(mut signal: Vec<i64>, mut idler: Vec<i64>, duration_s: Option<f64>) -> Result<Self> {
        let mut sorted_on_load = false;
        for ch in [&mut signal, &mut idler] {
            if ch.windows(2).any(|w| w[1] < w[0]) {
                ch.sort_unstable();
                sorted_on_load = true;
            }
        }
        let first = signal.first().into_iter().chain(idler.first()).min().copied();
        let last = signal.last().into_iter().chain(idler.last()).max().copied();
        let span_s = match (first, last) {
            (Some(a), Some(b)) => (b - a) as f64 * PS,
            _ => 0.0,
        };
        let duration_s = duration_s.unwrap_or(span_s);
        if !(duration_s > 0.0 && duration_s.is_finite()) || duration_s < span_s {
            return Err(TagError::InvalidDuration { duration_s, span_s });
        }
        Ok(Self {
            signal,
            idler,
            duration_s,
            sorted_on_load,
        })
    }

    pub fn from_events(events: impl IntoIterator<Item = TagEvent>, duration_s: Option<f64>) -> Result<Self> {
        let (mut signal, mut idler) = (Vec::new(), Vec::new());
        for e in events {
            match e.channel {
                Channel::Signal => signal.push(e.timestamp_ps),
                Channel::Idler => idler.push(e.timestamp_ps),
            }
        }
        Self::new(signal, idler, duration_s)
    }

    pub fn signal(&self) -> &[i64] {
        &self.signal
    }

    pub fn idler(&self) -> &[i64] {
        &self.idler
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    /// True when the input was not already time ordered per channel.
    pub fn sorted_on_load(&self) -> bool {
        self.sorted_on_load
    }

    pub fn len(&self) -> usize {
        self.signal.len() + self.idler.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All events merged by time; signal first on equal timestamps.
    pub fn events(&self) -> Vec<TagEvent> {
        let mut out = Vec::with_capacity(self.len());
        let (mut a, mut b) = (0, 0);
        while a < self.signal.len() || b < self.idler.len() {
            let take_signal = b == self.idler.len() || (a < self.signal.len() && self.signal[a] <= self.idler[b]);
            if take_signal {
                out.push(TagEvent {
                    timestamp_ps: self.signal[a],
                    channel: Channel::Signal,
                });
                a += 1;
            } else {
                out.push(TagEvent {
                    timestamp_ps: self.idler[b],
                    channel: Channel::Idler,
                });
                b += 1;
            }
        }
        out
    }
}

pub const TAG_CSV_HEADER: &str = "channel,timestamp_ps";

/// Reads a tag file, transparently decompressing gzip.
pub fn read_tag_file(path: &Path, duration_s: Option<f64>) -> Result<TagStream> {
    let origin = path.display().to_string();
    let io_err = |source| TagError::Io {
        path: origin.clone(),
        source,
    };
    let mut file = BufReader::new(File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 2];
    let mut got = 0;
    while got < 2 {
        let n = file.read(&mut magic[got..]).map_err(io_err)?;
        if n == 0 {
            break;
        }
        got += n;
    }
    let head = io::Cursor::new(magic[..got].to_vec()).chain(file);
    if got == 2 && magic == [0x1f, 0x8b] {
        read_tags(GzDecoder::new(head), &origin, duration_s)
    } else {
        read_tags(head, &origin, duration_s)
    }
}

/// Parses tag CSV from any reader; errors carry 1-based line numbers.
pub fn read_tags<R: Read>(reader: R, origin: &str, duration_s: Option<f64>) -> Result<TagStream> {
    let parse = |line: u64, message: String| TagError::Parse {
        origin: origin.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    if header.len() != 2 || &header[0] != "channel" || &header[1] != "timestamp_ps" {
        return Err(parse(1, format!("expected header `{TAG_CSV_HEADER}`")));
    }
    let (mut signal, mut idler) = (Vec::new(), Vec::new());
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(parse(line, format!("expected 2 fields, found {}", record.len())));
        }
        let channel = record[0]
            .parse::<u8>()
            .ok()
            .and_then(Channel::from_index)
            .ok_or_else(|| parse(line, format!("channel must be 0 or 1, got `{}`", &record[0])))?;
        let t: i64 = record[1]
            .parse()
            .map_err(|_| parse(line, format!("timestamp must be an integer, got `{}`", &record[1])))?;
        match channel {
            Channel::Signal => signal.push(t),
            Channel::Idler => idler.push(t),
        }
    }
    TagStream::new(signal, idler, duration_s)
}

pub fn write_tags<W: Write>(stream: &TagStream, mut out: W) -> io::Result<()> {
    writeln!(out, "{TAG_CSV_HEADER}")?;
    for e in stream.events() {
        writeln!(out, "{},{}", e.channel.index(), e.timestamp_ps)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoincidenceCounts {
    pub n_s: u64,
    pub n_i: u64,
    pub n_c: u64,
}

/// Single pass over both channels with a queue of idlers that can still
/// pair with the current signal event.
pub fn count_coincidences(stream: &TagStream, window_ps: i64) -> Result<CoincidenceCounts> {
    if window_ps <= 0 {
        return Err(TagError::InvalidWindow(window_ps));
    }
    if stream.is_empty() {
        return Err(TagError::EmptyStream);
    }
    let idler = stream.idler();
    // (timestamp, matched)
    let mut open: VecDeque<(i64, bool)> = VecDeque::new();
    let mut next = 0;
    let mut n_c = 0;
    for &ts in stream.signal() {
        let lo = ts.saturating_sub(window_ps);
        let hi = ts.saturating_add(window_ps);
        while open.front().is_some_and(|(t, matched)| *t < lo || *matched) {
            open.pop_front();
        }
        while next < idler.len() && idler[next] <= hi {
            if idler[next] >= lo {
                open.push_back((idler[next], false));
            }
            next += 1;
        }
        let mut best: Option<(usize, i64)> = None;
        for (k, (t, matched)) in open.iter().enumerate() {
            if *matched || *t < lo {
                continue;
            }
            let d = (t - ts).abs();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        if let Some((k, _)) = best {
            open[k].1 = true;
            n_c += 1;
        }
    }
    Ok(CoincidenceCounts {
        n_s: stream.signal().len() as u64,
        n_i: idler.len() as u64,
        n_c,
    })
}

/// Accidental coincidence rate [Hz] for singles rates [Hz] and half-window [ps].
pub fn accidental_rate(r_s: f64, r_i: f64, window_ps: i64) -> f64 {
    2.0 * r_s * r_i * window_ps as f64 * PS
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiencies {
    pub eta_s: f64,
    pub eta_i: f64,
}

/// Klyshko efficiencies: each arm's efficiency is the corrected coincidence
/// count over the singles of the other arm.
pub fn klyshko_efficiencies(n_s: f64, n_i: f64, n_c_corrected: f64) -> Result<Efficiencies> {
    if !(n_c_corrected > 0.0) {
        return Err(TagError::NoCorrectedCoincidences {
            corrected: n_c_corrected,
        });
    }
    if !(n_s > 0.0 && n_i > 0.0) {
        return Err(TagError::InvalidInput("singles counts must be positive".into()));
    }
    Ok(Efficiencies {
        eta_s: n_c_corrected / n_i,
        eta_i: n_c_corrected / n_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRate {
    /// (r_cM − r_cA)/(η_s·η_i) [Hz].
    pub value: f64,
    /// r_sM·r_iM/(r_cM − r_cA) [Hz].
    pub alternate: f64,
}

/// Generated pair rate from measured rates [Hz], evaluated in both
/// algebraic forms, which must agree to [`PAIR_RATE_FORM_TOL`].
pub fn generated_pair_rate(r_sm: f64, r_im: f64, r_cm: f64, r_ca: f64) -> Result<PairRate> {
    if !(r_sm > 0.0 && r_im > 0.0 && r_cm >= 0.0 && r_ca >= 0.0) {
        return Err(TagError::InvalidInput("rates must be nonnegative and singles positive".into()));
    }
    let net = r_cm - r_ca;
    if !(net > 0.0) {
        return Err(TagError::AccidentalsDominate {
            r_cm,
            r_ca,
            n_s: 0,
            n_i: 0,
            n_c: 0,
        });
    }
    let eta = klyshko_efficiencies(r_sm, r_im, net)?;
    let value = net / (eta.eta_s * eta.eta_i);
    let alternate = r_sm * r_im / net;
    if (value - alternate).abs() > PAIR_RATE_FORM_TOL * value.abs().max(alternate.abs()) {
        return Err(TagError::InconsistentPairRate { a: value, b: alternate });
    }
    Ok(PairRate { value, alternate })
}

/// Pairs per second per mW of pump per GHz of bandwidth.
pub fn brightness(pair_rate_hz: f64, pump_power_mw: f64, bandwidth_ghz: f64) -> f64 {
    pair_rate_hz / (pump_power_mw * bandwidth_ghz)
}

/// Pump power and bandwidth for the brightness figure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrightnessInputs {
    pub pump_power_mw: f64,
    pub bandwidth_ghz: f64,
    /// Relative standard uncertainty of the power reading.
    pub power_rel_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl fmt::Display for Measured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {}", sig9(self.value), sig9(self.sigma))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceReport {
    pub window_tw_ps: i64,
    pub duration_s: f64,
    pub counts: CoincidenceCounts,
    pub r_sm: Measured,
    pub r_im: Measured,
    pub r_cm: Measured,
    pub r_ca: Measured,
    pub eta_s: Measured,
    pub eta_i: Measured,
    pub r_c: Measured,
    /// Second form of the pair-rate formula, for the consistency record.
    pub r_c_alternate: f64,
    pub brightness: Option<Measured>,
    pub sorted_on_load: bool,
}

/// First-order shot-noise propagation for a function of (N_s, N_i, N_c).
///
/// The raw counts share the coincident events, so the independent Poisson
/// variables are N_c, N_s − N_c and N_i − N_c.
fn shot_noise_sigma(counts: &CoincidenceCounts, d_ns: f64, d_ni: f64, d_nc: f64) -> f64 {
    let c = counts.n_c as f64;
    let s_only = counts.n_s.saturating_sub(counts.n_c) as f64;
    let i_only = counts.n_i.saturating_sub(counts.n_c) as f64;
    ((d_ns + d_ni + d_nc).powi(2) * c + d_ns * d_ns * s_only + d_ni * d_ni * i_only).sqrt()
}

/// Counts a stream and reduces it to rates, efficiencies and pair rate.
pub fn analyze(stream: &TagStream, window_ps: i64, power: Option<BrightnessInputs>) -> Result<CoincidenceReport> {
    let counts = count_coincidences(stream, window_ps)?;
    report_from_counts(counts, window_ps, stream.duration_s(), power, stream.sorted_on_load())
}

pub fn report_from_counts(
    counts: CoincidenceCounts,
    window_ps: i64,
    duration_s: f64,
    power: Option<BrightnessInputs>,
    sorted_on_load: bool,
) -> Result<CoincidenceReport> {
    if window_ps <= 0 {
        return Err(TagError::InvalidWindow(window_ps));
    }
    if !(duration_s > 0.0) {
        return Err(TagError::InvalidDuration { duration_s, span_s: 0.0 });
    }
    let t = duration_s;
    let (ns, ni, nc) = (counts.n_s as f64, counts.n_i as f64, counts.n_c as f64);
    let tw = window_ps as f64 * PS;
    let acc = 2.0 * ns * ni * tw / t;
    let net = nc - acc;
    let r_ca = accidental_rate(ns / t, ni / t, window_ps);
    if !(net > 0.0) || ns == 0.0 || ni == 0.0 {
        return Err(TagError::AccidentalsDominate {
            r_cm: nc / t,
            r_ca,
            n_s: counts.n_s,
            n_i: counts.n_i,
            n_c: counts.n_c,
        });
    }
    let sigma = |d_ns, d_ni, d_nc| shot_noise_sigma(&counts, d_ns, d_ni, d_nc);
    // ∂A/∂N_s = A/N_s and ∂A/∂N_i = A/N_i
    let (da_ns, da_ni) = (acc / ns, acc / ni);

    let eta = klyshko_efficiencies(ns, ni, net)?;
    let pair = generated_pair_rate(ns / t, ni / t, nc / t, r_ca)?;
    let rc = pair.value;

    let r_c = Measured {
        value: rc,
        sigma: sigma(rc * (1.0 / ns + da_ns / net), rc * (1.0 / ni + da_ni / net), -rc / net),
    };
    let eta_s = Measured {
        value: eta.eta_s,
        sigma: sigma(-da_ns / ni, -da_ni / ni - net / (ni * ni), 1.0 / ni),
    };
    let eta_i = Measured {
        value: eta.eta_i,
        sigma: sigma(-da_ns / ns - net / (ns * ns), -da_ni / ns, 1.0 / ns),
    };
    let brightness = power.map(|p| {
        let value = brightness(rc, p.pump_power_mw, p.bandwidth_ghz);
        let rel = ((r_c.sigma / rc).powi(2) + p.power_rel_error.powi(2)).sqrt();
        Measured {
            value,
            sigma: value * rel,
        }
    });
    Ok(CoincidenceReport {
        window_tw_ps: window_ps,
        duration_s: t,
        counts,
        r_sm: Measured {
            value: ns / t,
            sigma: ns.sqrt() / t,
        },
        r_im: Measured {
            value: ni / t,
            sigma: ni.sqrt() / t,
        },
        r_cm: Measured {
            value: nc / t,
            sigma: nc.sqrt() / t,
        },
        r_ca: Measured {
            value: r_ca,
            sigma: sigma(da_ns / t, da_ni / t, 0.0),
        },
        eta_s,
        eta_i,
        r_c,
        r_c_alternate: pair.alternate,
        brightness,
        sorted_on_load,
    })
}

impl CoincidenceReport {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(": ");
            s.push_str(&v);
            s.push('\n');
        };
        line("window_tw_ps", self.window_tw_ps.to_string());
        line("duration_s", sig9(self.duration_s));
        line("n_s", self.counts.n_s.to_string());
        line("n_i", self.counts.n_i.to_string());
        line("n_c", self.counts.n_c.to_string());
        line("r_sM_Hz", self.r_sm.to_string());
        line("r_iM_Hz", self.r_im.to_string());
        line("r_cM_Hz", self.r_cm.to_string());
        line("r_cA_Hz", self.r_ca.to_string());
        line("eta_s", self.eta_s.to_string());
        line("eta_i", self.eta_i.to_string());
        line("r_c_Hz", self.r_c.to_string());
        line("r_c_alt_Hz", sig9(self.r_c_alternate));
        if let Some(b) = &self.brightness {
            line("brightness_pairs_per_s_mW_GHz", b.to_string());
        }
        line("sorted_on_load", self.sorted_on_load.to_string());
        s
    }

    pub const CSV_HEADER: &'static str = "source,window_tw_ps,duration_s,n_s,n_i,n_c,r_sM_Hz,r_iM_Hz,r_cM_Hz,\
r_cA_Hz,r_cA_sigma_Hz,eta_s,eta_s_sigma,eta_i,eta_i_sigma,r_c_Hz,r_c_sigma_Hz,brightness,brightness_sigma";

    /// One CSV row matching [`Self::CSV_HEADER`]; brightness fields are
    /// empty when no power was given.
    pub fn csv_row(&self, source: &str) -> String {
        let (b, bs) = self
            .brightness
            .map(|b| (sig9(b.value), sig9(b.sigma)))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            source,
            self.window_tw_ps,
            sig9(self.duration_s),
            self.counts.n_s,
            self.counts.n_i,
            self.counts.n_c,
            sig9(self.r_sm.value),
            sig9(self.r_im.value),
            sig9(self.r_cm.value),
            sig9(self.r_ca.value),
            sig9(self.r_ca.sigma),
            sig9(self.eta_s.value),
            sig9(self.eta_s.sigma),
            sig9(self.eta_i.value),
            sig9(self.eta_i.sigma),
            sig9(self.r_c.value),
            sig9(self.r_c.sigma),
            b,
            bs
        )
    }
}

/// Ground truth for [`generate_synthetic_tags`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub pair_rate_hz: f64,
    pub eta_s: f64,
    pub eta_i: f64,
    /// Gaussian timing jitter per arm [ps].
    pub jitter_sigma_ps: f64,
    pub dark_rate_s_hz: f64,
    pub dark_rate_i_hz: f64,
    /// Clicks closer than this to the previous kept click on the same
    /// detector are lost [ps].
    pub dead_time_ps: i64,
    pub duration_s: f64,
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.pair_rate_hz, self.dark_rate_s_hz, self.dark_rate_i_hz, self.jitter_sigma_ps];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(TagError::InvalidInput("rates and jitter must be finite and nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.eta_s) || !(0.0..=1.0).contains(&self.eta_i) {
            return Err(TagError::InvalidInput("efficiencies must lie in [0, 1]".into()));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(TagError::InvalidInput("duration must be positive".into()));
        }
        if self.dead_time_ps < 0 {
            return Err(TagError::InvalidInput("dead time must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Seeded synthetic acquisition.
///
/// Pairs arrive as a Poisson process; each photon survives its arm with
/// probability η. Splitting the pair process into its detected classes
/// (both, signal only, idler only) gives three independent Poisson
/// processes, so undetected pairs are never drawn. Timestamps are clamped to
/// the acquisition interval after jitter.
pub fn generate_synthetic_tags(params: &SyntheticParams, seed: u64) -> Result<TagStream> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = params.duration_s;
    let t_ps = (t / PS).floor() as i64;
    let r = params.pair_rate_hz;
    let (es, ei) = (params.eta_s, params.eta_i);

    let draw_times = |rate: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mean = rate * t;
        if mean <= 0.0 {
            return Vec::new();
        }
        let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
        (0..n).map(|_| rng.gen::<f64>() * t_ps as f64).collect()
    };
    let both = draw_times(r * es * ei, &mut rng);
    let s_only = draw_times(r * es * (1.0 - ei), &mut rng);
    let i_only = draw_times(r * (1.0 - es) * ei, &mut rng);
    let dark_s = draw_times(params.dark_rate_s_hz, &mut rng);
    let dark_i = draw_times(params.dark_rate_i_hz, &mut rng);

    let jitter = if params.jitter_sigma_ps > 0.0 {
        Some(Normal::new(0.0, params.jitter_sigma_ps).expect("valid sigma"))
    } else {
        None
    };
    let stamp = |t0: f64, rng: &mut ChaCha8Rng| -> i64 {
        let dt = jitter.map_or(0.0, |j| j.sample(rng));
        ((t0 + dt).round() as i64).clamp(0, t_ps)
    };
    let mut signal = Vec::with_capacity(both.len() + s_only.len() + dark_s.len());
    let mut idler = Vec::with_capacity(both.len() + i_only.len() + dark_i.len());
    for t0 in &both {
        signal.push(stamp(*t0, &mut rng));
        idler.push(stamp(*t0, &mut rng));
    }
    for t0 in &s_only {
        signal.push(stamp(*t0, &mut rng));
    }
    for t0 in &i_only {
        idler.push(stamp(*t0, &mut rng));
    }
    signal.extend(dark_s.iter().map(|t0| t0.round() as i64));
    idler.extend(dark_i.iter().map(|t0| t0.round() as i64));
    signal.sort_unstable();
    idler.sort_unstable();
    if params.dead_time_ps > 0 {
        apply_dead_time(&mut signal, params.dead_time_ps);
        apply_dead_time(&mut idler, params.dead_time_ps);
    }
    TagStream::new(signal, idler, Some(t))
}

fn apply_dead_time(clicks: &mut Vec<i64>, dead_ps: i64) {
    let mut last: Option<i64> = None;
    clicks.retain(|t| match last {
        Some(l) if t - l < dead_ps => false,
        _ => {
            last = Some(*t);
            true
        }
    });
}
