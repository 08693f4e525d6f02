use std::f64::consts::PI;

use proptest::prelude::*;

use spdc_forge::coefficients::CoefficientRegistry;
use spdc_forge::dispersion::{omega_to_wavelength_um, wavelength_um_to_omega};
use spdc_forge::jsa::{fwhm_bandwidth, GridSpec, SpectrumTrace, TraceMeta};
use spdc_forge::phasematch::{
    pm_from_mismatch, solve_gvm_triple, solve_poling_period, Centers, FixedFrequency, GvmOptions, ProcessModels,
    ProcessSpec, DEFAULT_GVM_TOLERANCE,
};

fn ti_ln_type_ii() -> ProcessModels {
    let reg = CoefficientRegistry::builtin();
    let o = reg.model("cln-o-edwards-lawrence-1984").unwrap();
    let e = reg.model("cln-e-jundt-1997").unwrap();
    ProcessModels::new(o.clone(), e, o)
}

proptest! {
    #[test]
    fn pm_magnitude_bounded(length in 1e-4f64..0.1, db in -1e6f64..1e6) {
        prop_assert!(pm_from_mismatch(length, db).norm() <= 1.0 + 1e-15);
    }

    #[test]
    fn pm_zeros_at_multiples_of_pi(length in 1e-3f64..0.1, k in 1i32..50) {
        let db = 2.0 * k as f64 * PI / length;
        prop_assert!(pm_from_mismatch(length, db).norm() < 1e-12);
        prop_assert!(pm_from_mismatch(length, -db).norm() < 1e-12);
    }
}

#[test]
fn gvm_triple_for_green_pump() {
    let models = ti_ln_type_ii();
    let wp = wavelength_um_to_omega(0.5174);
    let sol = solve_gvm_triple(&models, FixedFrequency::Pump(wp), 185.0, &GvmOptions::default()).unwrap();
    assert!(sol.residual_gvm.abs() < DEFAULT_GVM_TOLERANCE);
    let ls = omega_to_wavelength_um(sol.omega_s) * 1e3;
    assert!((780.0..880.0).contains(&ls), "signal {ls} nm");
    assert!((sol.omega_s + sol.omega_i - wp).abs() < 1e-12 * wp);
    let period = sol.poling.unwrap().period_m;
    assert!((period - 3.69e-6).abs() / 3.69e-6 < 0.1, "Λ = {period}");

    // holding the solved signal fixed finds the same idler
    let again = solve_gvm_triple(&models, FixedFrequency::Signal(sol.omega_s), 185.0, &GvmOptions::default()).unwrap();
    assert!((again.omega_i - sol.omega_i).abs() < 1e-6 * sol.omega_i);
}

#[test]
fn pm_width_scales_inversely_with_length() {
    let models = ti_ln_type_ii();
    let wp = wavelength_um_to_omega(0.775);
    let centers = Centers::from_daughters(0.5 * wp, 0.5 * wp);
    let base = ProcessSpec::new(models, centers, 0.01, 100.0).unwrap();
    let poling = solve_poling_period(&base).unwrap();
    let base = base.with_poling(Some(poling));

    let width = |length: f64| {
        let spec = ProcessSpec { length_m: length, ..base.clone() };
        let span = GridSpec::auto(&base, 16).unwrap().half_span;
        let n = 8001;
        let ws: Vec<f64> = (0..n).map(|k| centers.omega_s + span * (2.0 * k as f64 / (n - 1) as f64 - 1.0)).collect();
        let y: Vec<f64> = ws.iter().map(|w| spec.pm_function(*w, wp - *w).unwrap().norm_sqr()).collect();
        let x: Vec<f64> = ws.iter().map(|w| w / (2.0 * PI) * 1e-12).collect();
        fwhm_bandwidth(&SpectrumTrace::from_raw(x, y, TraceMeta::default()).unwrap())
            .unwrap()
            .bandwidth_thz
    };
    let (w1, w2) = (width(0.01), width(0.02));
    let ratio = w1 / w2;
    assert!((ratio - 2.0).abs() / 2.0 < 0.01, "ratio {ratio}");
}

#[test]
fn poling_cancels_mismatch_at_center() {
    let models = ti_ln_type_ii();
    let wp = wavelength_um_to_omega(0.5174);
    let sol = solve_gvm_triple(&models, FixedFrequency::Pump(wp), 205.0, &GvmOptions::default()).unwrap();
    let spec = ProcessSpec::new(models, sol.centers(), 0.04, 205.0).unwrap().with_poling(sol.poling);
    let db = spec.delta_beta(sol.omega_s, sol.omega_i).unwrap();
    assert!(db.abs() < 1e-6 * sol.zeroth_order_mismatch.abs(), "Δβ = {db}");
    assert!((spec.pm_function(sol.omega_s, sol.omega_i).unwrap().norm() - 1.0).abs() < 1e-12);
}
