use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spdc_forge::tagproc::{
    accidental_rate, analyze, brightness, count_coincidences, generate_synthetic_tags, generated_pair_rate,
    read_tag_file, write_tags, CoincidenceReport, SyntheticParams, TagStream,
};

/// All-pairs matcher: each signal in time order takes the nearest unmatched
/// idler within ±window, the earlier idler on a tie.
fn brute_force(signal: &[i64], idler: &[i64], window: i64) -> u64 {
    let mut used = vec![false; idler.len()];
    let mut n = 0;
    for &s in signal {
        let mut best: Option<(usize, i64)> = None;
        for (j, &i) in idler.iter().enumerate() {
            let d = (i - s).abs();
            if !used[j] && d <= window && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            n += 1;
        }
    }
    n
}

fn random_stream(seed: u64) -> (TagStream, i64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_s = rng.gen_range(0..5000);
    let n_i = rng.gen_range(0..5000);
    // coarse ticks produce exact ties; short spans produce contention
    let tick = [1, 10, 100, 1000][rng.gen_range(0..4)];
    let span = rng.gen_range(1_000..5_000_000) / tick;
    let s: Vec<i64> = (0..n_s).map(|_| rng.gen_range(0..span) * tick).collect();
    let mut i: Vec<i64> = (0..n_i).map(|_| rng.gen_range(0..span) * tick).collect();
    // correlated partners for part of the idlers
    for (k, t) in i.iter_mut().enumerate().take(n_s.min(n_i) / 2) {
        *t = s[k] + rng.gen_range(-2000..2000);
    }
    let window = rng.gen_range(1..3000);
    (TagStream::new(s, i, Some(1.0)).unwrap(), window)
}

#[test]
fn streaming_counter_equals_brute_force() {
    for seed in 0..100 {
        let (stream, window) = random_stream(seed);
        if stream.is_empty() {
            continue;
        }
        let fast = count_coincidences(&stream, window).unwrap().n_c;
        let slow = brute_force(stream.signal(), stream.idler(), window);
        assert_eq!(fast, slow, "seed {seed}, window {window}");
    }
}

fn params(rate: f64, eta_s: f64, eta_i: f64, duration: f64) -> SyntheticParams {
    SyntheticParams {
        pair_rate_hz: rate,
        eta_s,
        eta_i,
        jitter_sigma_ps: 50.0,
        dark_rate_s_hz: 200.0,
        dark_rate_i_hz: 200.0,
        dead_time_ps: 0,
        duration_s: duration,
    }
}

/// What the estimators converge to once dark counts sit in the singles.
fn expected(p: &SyntheticParams) -> (f64, f64, f64) {
    let r = p.pair_rate_hz;
    let s = r * p.eta_s + p.dark_rate_s_hz;
    let i = r * p.eta_i + p.dark_rate_i_hz;
    let c = r * p.eta_s * p.eta_i;
    (c / i, c / s, s * i / c)
}

fn within(value: f64, truth: f64, sigma: f64, k: f64) -> bool {
    (value - truth).abs() <= k * sigma
}

#[test]
fn klyshko_round_trip() {
    for (seed, eta) in [0.05, 0.3, 0.9].into_iter().enumerate() {
        let p = params(5e4, eta, eta, 20.0);
        let stream = generate_synthetic_tags(&p, seed as u64 + 11).unwrap();
        let r = analyze(&stream, 1400, None).unwrap();
        let (es, ei, rc) = expected(&p);
        assert!(within(r.eta_s.value, es, r.eta_s.sigma, 3.0), "η={eta}: {}", r.eta_s);
        assert!(within(r.eta_i.value, ei, r.eta_i.sigma, 3.0), "η={eta}: {}", r.eta_i);
        assert!(within(r.r_c.value, rc, r.r_c.sigma, 3.0), "η={eta}: {}", r.r_c);
    }
}

#[test]
fn pair_rate_round_trip() {
    let p = params(1e6, 0.1, 0.05, 10.0);
    let stream = generate_synthetic_tags(&p, 5).unwrap();
    let r = analyze(&stream, 1400, None).unwrap();
    let (es, ei, rc) = expected(&p);
    assert!(within(r.r_c.value, rc, r.r_c.sigma, 3.0), "{}", r.r_c);
    assert!(within(r.eta_s.value, es, r.eta_s.sigma, 3.0), "{}", r.eta_s);
    assert!(within(r.eta_i.value, ei, r.eta_i.sigma, 3.0), "{}", r.eta_i);
    // darks bias the pair rate by well under a percent here
    assert!((r.r_c.value - 1e6).abs() < 0.01 * 1e6);
}

#[test]
fn signal_thinning_leaves_idler_efficiency() {
    let (pf, pt) = (params(2e5, 1.0, 0.4, 5.0), params(2e5, 0.5, 0.4, 5.0));
    let full = analyze(&generate_synthetic_tags(&pf, 3).unwrap(), 1400, None).unwrap();
    let thin = analyze(&generate_synthetic_tags(&pt, 4).unwrap(), 1400, None).unwrap();
    let (es, ei_thin, _) = expected(&pt);
    let (_, ei_full, _) = expected(&pf);
    assert!(within(thin.eta_s.value, es, thin.eta_s.sigma, 3.0), "{}", thin.eta_s);
    assert!(within(thin.eta_i.value, ei_thin, thin.eta_i.sigma, 3.0), "{}", thin.eta_i);
    assert!(within(full.eta_i.value, ei_full, full.eta_i.sigma, 3.0), "{}", full.eta_i);
    // only the dark share of the signal singles differs between the two
    assert!((ei_thin - ei_full).abs() < 1e-3);
}

#[test]
fn lossless_generator_recovers_every_pair() {
    let mut p = params(1e5, 1.0, 1.0, 1.0);
    p.jitter_sigma_ps = 0.0;
    p.dark_rate_s_hz = 0.0;
    p.dark_rate_i_hz = 0.0;
    let stream = generate_synthetic_tags(&p, 9).unwrap();
    let c = count_coincidences(&stream, 1400).unwrap();
    assert_eq!(c.n_c, c.n_s);
    assert_eq!(c.n_c, c.n_i);
}

#[test]
fn accidentals_match_independent_streams() {
    let (rate, window, duration) = (3e5, 1400, 0.1);
    let (mut counted, mut expected) = (0.0, 0.0);
    for seed in 0..100 {
        let p = SyntheticParams {
            pair_rate_hz: 0.0,
            eta_s: 0.0,
            eta_i: 0.0,
            jitter_sigma_ps: 0.0,
            dark_rate_s_hz: rate,
            dark_rate_i_hz: rate,
            dead_time_ps: 0,
            duration_s: duration,
        };
        let stream = generate_synthetic_tags(&p, 1000 + seed).unwrap();
        let c = count_coincidences(&stream, window).unwrap();
        counted += c.n_c as f64;
        expected += accidental_rate(c.n_s as f64 / duration, c.n_i as f64 / duration, window) * duration;
    }
    assert!((counted - expected).abs() <= 3.0 * expected.sqrt(), "{counted} vs {expected}");
}

#[test]
fn high_rate_synthetic_round_trip() {
    // ~300 kHz singles per arm and a 7e9 Hz pair rate
    let eta = 3e5 / 7e9;
    let p = params(7e9, eta, eta, 10.0);
    let stream = generate_synthetic_tags(&p, 21).unwrap();
    let r = analyze(&stream, 1400, None).unwrap();
    assert!((r.r_ca.value - 252.0).abs() < 0.05 * 252.0, "r_cA {}", r.r_ca);
    assert!(within(r.r_c.value, expected(&p).2, r.r_c.sigma, 3.0), "{}", r.r_c);
}

#[test]
fn generator_output_is_byte_identical() {
    let p = params(1e5, 0.2, 0.3, 0.5);
    let bytes = |seed| {
        let mut buf = Vec::new();
        write_tags(&generate_synthetic_tags(&p, seed).unwrap(), &mut buf).unwrap();
        buf
    };
    assert_eq!(bytes(42), bytes(42));
    assert_ne!(bytes(42), bytes(43));
}

#[test]
fn gzip_and_plain_files_read_alike() {
    let stream = generate_synthetic_tags(&params(1e4, 0.5, 0.5, 0.1), 2).unwrap();
    let mut plain = Vec::new();
    write_tags(&stream, &mut plain).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv.gz");
    std::fs::write(&a, &plain).unwrap();
    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    gz.write_all(&plain).unwrap();
    std::fs::write(&b, gz.finish().unwrap()).unwrap();
    let ra = read_tag_file(&a, Some(0.1)).unwrap();
    let rb = read_tag_file(&b, Some(0.1)).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(ra.signal(), stream.signal());
}

#[test]
fn report_text_and_csv_row() {
    let stream = generate_synthetic_tags(&params(1e5, 0.5, 0.5, 1.0), 8).unwrap();
    let power = spdc_forge::tagproc::BrightnessInputs {
        pump_power_mw: 2.0,
        bandwidth_ghz: 7800.0,
        power_rel_error: 0.05,
    };
    let r = analyze(&stream, 1400, Some(power)).unwrap();
    let text = r.to_text();
    assert!(text.contains("window_tw_ps: 1400\n"));
    assert!(text.contains("brightness_pairs_per_s_mW_GHz: "));
    let row = r.csv_row("run");
    assert_eq!(
        row.split(',').count(),
        CoincidenceReport::CSV_HEADER.split(',').count()
    );
    let b = r.brightness.unwrap();
    assert!(b.sigma / b.value >= 0.05);
}

proptest! {
    #[test]
    fn pair_rate_forms_agree(r_s in 1.0f64..1e7, r_i in 1.0f64..1e7, frac in 0.01f64..1.0, acc in 0.0f64..0.99) {
        let r_cm = frac * r_s.min(r_i);
        let r_ca = acc * r_cm;
        let p = generated_pair_rate(r_s, r_i, r_cm, r_ca).unwrap();
        prop_assert!(((p.value - p.alternate) / p.alternate).abs() < 1e-9);
    }

    #[test]
    fn brightness_is_homogeneous(r in 1.0f64..1e10, p in 0.01f64..100.0, bw in 0.1f64..1e4, k in 0.1f64..100.0) {
        let a = brightness(k * r, k * p, bw);
        let b = brightness(r, p, bw);
        prop_assert!(((a - b) / b).abs() < 1e-12);
    }
}

#[test]
fn malformed_gzip_row_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv.gz");
    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    gz.write_all(b"channel,timestamp_ps\n0,10\n1,20\n2,30\n").unwrap();
    std::fs::write(&path, gz.finish().unwrap()).unwrap();
    match read_tag_file(&path, None) {
        Err(spdc_forge::tagproc::TagError::Parse { line, origin, .. }) => {
            assert_eq!(line, 4);
            assert!(origin.ends_with("bad.csv.gz"));
        }
        other => panic!("{other:?}"),
    }
}
