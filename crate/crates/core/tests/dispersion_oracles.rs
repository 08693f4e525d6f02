use proptest::prelude::*;

use spdc_forge::coefficients::CoefficientRegistry;
use spdc_forge::dispersion::{
    wavelength_um_to_omega, DispersionModel, IndexFormula, OmegaPolynomial, Polarization, Validity, SPEED_OF_LIGHT,
};

const T0: f64 = 24.5;

fn f_of(t: f64) -> f64 {
    (t - T0) * (t + T0 + 546.32)
}

/// n_e² and d(n_e²)/dλ written out by hand from the published fit.
fn jundt_n2(l: f64, t: f64) -> (f64, f64) {
    let f = f_of(t);
    let (a1, a2, a3, a4, a5, a6) = (5.35583, 0.100473, 0.20692, 100.0, 11.34927, 1.5334e-2);
    let (b1, b2, b3, b4) = (4.629e-7, 3.862e-8, -0.89e-8, 2.657e-5);
    let p = a3 + b3 * f;
    let d1 = l * l - p * p;
    let d2 = l * l - a5 * a5;
    let n2 = a1 + b1 * f + (a2 + b2 * f) / d1 + (a4 + b4 * f) / d2 - a6 * l * l;
    let dn2 = -2.0 * l * (a2 + b2 * f) / (d1 * d1) - 2.0 * l * (a4 + b4 * f) / (d2 * d2) - 2.0 * a6 * l;
    (n2, dn2)
}

fn edwards_lawrence_n2(l: f64, t: f64) -> (f64, f64) {
    let f = f_of(t);
    let (a1, a2, a3, a4) = (4.9048, 0.11775, 0.21802, 0.027153);
    let (b1, b2, b3) = (2.2314e-8, -2.9671e-8, 2.1429e-8);
    let p = a3 + b2 * f;
    let d = l * l - p * p;
    let n2 = a1 + (a2 + b1 * f) / d + b3 * f - a4 * l * l;
    let dn2 = -2.0 * l * (a2 + b1 * f) / (d * d) - 2.0 * a4 * l;
    (n2, dn2)
}

/// dβ/dω = (n − λ·dn/dλ)/c.
fn analytic_inverse_vg(n2: f64, dn2: f64, l: f64) -> f64 {
    let n = n2.sqrt();
    (n - l * dn2 / (2.0 * n)) / SPEED_OF_LIGHT
}

#[test]
fn extraordinary_index_at_1064_nm() {
    let m = CoefficientRegistry::builtin().model("cln-e-jundt-1997").unwrap();
    let n = m.refractive_index(wavelength_um_to_omega(1.064), 25.0).unwrap();
    assert!((n - 2.1558).abs() < 1e-4, "n_e = {n}");
    // hand evaluation of the same fit
    assert!((n - 2.155_817_466_485_496).abs() < 1e-12, "n_e = {n}");
}

#[test]
fn ordinary_index_at_1064_nm() {
    let m = CoefficientRegistry::builtin().model("cln-o-edwards-lawrence-1984").unwrap();
    let n = m.refractive_index(wavelength_um_to_omega(1.064), 25.0).unwrap();
    assert!((n - 2.232_183_095_109_197_4).abs() < 1e-12, "n_o = {n}");
}

#[test]
fn finite_difference_group_velocity_matches_closed_form() {
    let reg = CoefficientRegistry::builtin();
    let cases: [(&str, fn(f64, f64) -> (f64, f64)); 2] = [
        ("cln-e-jundt-1997", jundt_n2),
        ("cln-o-edwards-lawrence-1984", edwards_lawrence_n2),
    ];
    for (name, oracle) in cases {
        let m = reg.model(name).unwrap();
        for &l in &[0.5174, 0.8, 0.825, 1.064, 1.39, 1.55, 2.0] {
            for &t in &[25.0, 100.0, 185.0, 205.0] {
                let (n2, dn2) = oracle(l, t);
                let want = analytic_inverse_vg(n2, dn2, l);
                let got = m.inverse_group_velocity(wavelength_um_to_omega(l), t).unwrap();
                let rel = ((got - want) / want).abs();
                assert!(rel < 1e-6, "{name} λ={l} T={t}: {got} vs {want} ({rel:e})");
            }
        }
    }
}

#[test]
fn omega_polynomial_group_velocity() {
    // n = 2 + 0.1 x + 0.02 x², x = ω in rad/fs
    let m = DispersionModel::new(
        "poly",
        Polarization::Ordinary,
        IndexFormula::OmegaPolynomial(OmegaPolynomial::new(vec![2.0, 0.1, 0.02])),
        Validity {
            wavelength_um: [0.4, 4.0],
            temperature_c: [0.0, 100.0],
        },
    )
    .unwrap();
    for &l in &[0.5, 1.0, 2.0, 3.5] {
        let w = wavelength_um_to_omega(l);
        let x = w * 1e-15;
        let n = 2.0 + 0.1 * x + 0.02 * x * x;
        let dn_dw = (0.1 + 0.04 * x) * 1e-15;
        let want = (n + w * dn_dw) / SPEED_OF_LIGHT;
        let got = m.inverse_group_velocity(w, 20.0).unwrap();
        assert!(((got - want) / want).abs() < 1e-6);
        // second derivative: d²β/dω² = (2 dn/dω + ω d²n/dω²)/c
        let want2 = (2.0 * dn_dw + w * 0.04 * 1e-30) / SPEED_OF_LIGHT;
        let got2 = m.group_velocity_dispersion(w, 20.0).unwrap();
        assert!(((got2 - want2) / want2).abs() < 1e-4, "{got2} vs {want2}");
    }
}

#[test]
fn thermo_optic_trend() {
    // both indices rise with temperature in this range
    let reg = CoefficientRegistry::builtin();
    for name in ["cln-e-jundt-1997", "cln-o-edwards-lawrence-1984"] {
        let m = reg.model(name).unwrap();
        let w = wavelength_um_to_omega(0.8);
        let cold = m.refractive_index(w, 50.0).unwrap();
        let hot = m.refractive_index(w, 200.0).unwrap();
        assert!(hot > cold, "{name}");
    }
}

#[test]
fn outside_validity_is_an_error() {
    let m = CoefficientRegistry::builtin().model("cln-e-jundt-1997").unwrap();
    assert!(m.refractive_index(wavelength_um_to_omega(0.3), 25.0).is_err());
    assert!(m.refractive_index(wavelength_um_to_omega(1.0), 300.0).is_err());
    assert!(m.refractive_index(wavelength_um_to_omega(6.0), 25.0).is_err());
}

proptest! {
    #[test]
    fn constant_index_group_velocity(n in 1.01f64..4.0, l in 0.3f64..9.0) {
        let m = DispersionModel::new(
            "c",
            Polarization::Extraordinary,
            IndexFormula::Constant { n },
            Validity { wavelength_um: [0.2, 10.0], temperature_c: [0.0, 1.0] },
        )
        .unwrap();
        let w = wavelength_um_to_omega(l);
        let got = m.inverse_group_velocity(w, 0.5).unwrap();
        prop_assert!(((got - n / SPEED_OF_LIGHT) / (n / SPEED_OF_LIGHT)).abs() < 1e-9);
        prop_assert!((m.beta(w, 0.5).unwrap() - n * w / SPEED_OF_LIGHT).abs() <= 1e-12 * n * w / SPEED_OF_LIGHT);
    }

    #[test]
    fn index_above_one_across_validity(l in 0.4f64..5.0, t in 20.0f64..250.0) {
        let m = CoefficientRegistry::builtin().model("cln-e-jundt-1997").unwrap();
        let n = m.refractive_index(wavelength_um_to_omega(l), t).unwrap();
        prop_assert!(n > 1.0 && n.is_finite());
    }
}
