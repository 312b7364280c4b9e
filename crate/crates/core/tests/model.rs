use std::f64::consts::PI;

use brillouin_qc::model::{
    build_diffusion_matrix, build_drift_matrix, calibrate_drives, effective_params,
    solve_mean_fields, RawParams, SystemParams,
};
use nalgebra::{Complex, Matrix6, Vector6};
use proptest::prelude::*;

type C = Complex<f64>;

fn params_strategy() -> impl Strategy<Value = SystemParams> {
    (
        (0.001..1.0f64, 1e-6..0.1f64, 0.01..1.0f64),
        (-2.0..2.0f64, -2.0..2.0f64),
        (0.0..0.4f64, 0.0..0.4f64, 0.0..0.4f64, -10.0..10.0f64),
        (0.0..500.0f64, 0.5..2.0f64),
    )
        .prop_map(|((kappa, gamma_m, gamma_a), (dt, da), (gm, ga, j, theta), (n_th, omega_m))| {
            SystemParams {
                omega_m,
                kappa,
                gamma_m,
                gamma_a,
                delta_tilde: dt,
                delta_a: da,
                coupling_m: gm,
                coupling_a: ga,
                hopping: j,
                theta,
                n_th,
            }
        })
}

fn complex3() -> impl Strategy<Value = [C; 3]> {
    prop::array::uniform6(-5.0..5.0f64)
        .prop_map(|x| [C::new(x[0], x[1]), C::new(x[2], x[3]), C::new(x[4], x[5])])
}

/// Noise-free linearized fluctuation equations written directly in the
/// complex amplitudes `(δa₁, δb_a, δb_m)`.
fn complex_rhs(p: &SystemParams, z: &[C; 3]) -> [C; 3] {
    let i = C::i();
    let [a, ba, bm] = *z;
    let gm = C::from(p.coupling_m);
    let ga = C::from(p.coupling_a);
    let j = p.hopping;
    [
        (i * p.delta_tilde - p.kappa / 2.0) * a + i * gm * (bm.conj() + bm) + i * ga * ba,
        -(p.gamma_a / 2.0 + i * p.delta_a) * ba - i * j * C::from_polar(1.0, p.theta) * bm
            + i * ga * a,
        -(p.gamma_m / 2.0 + i * p.omega_m) * bm - i * j * C::from_polar(1.0, -p.theta) * ba
            + i * (gm.conj() * a + gm * a.conj()),
    ]
}

/// `X = (o + o†)/√2`, `Y = i(o† − o)/√2` for each mode.
fn quadratures(z: &[C; 3]) -> Vector6<f64> {
    let s = std::f64::consts::SQRT_2;
    Vector6::new(
        s * z[0].re,
        s * z[0].im,
        s * z[1].re,
        s * z[1].im,
        s * z[2].re,
        s * z[2].im,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn drift_is_the_quadrature_image_of_the_complex_equations(p in params_strategy(), z in complex3()) {
        let a = build_drift_matrix(&p).unwrap();
        let lhs = a * quadratures(&z);
        let rhs = quadratures(&complex_rhs(&p, &z));
        let scale = rhs.norm().max(lhs.norm()).max(1e-300);
        prop_assert!((lhs - rhs).norm() / scale <= 1e-12, "{} vs {}", lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn drift_is_two_pi_periodic_in_theta(p in params_strategy(), k in -3i32..4) {
        let shifted = SystemParams { theta: p.theta + 2.0 * PI * k as f64, ..p };
        let a0 = build_drift_matrix(&p).unwrap();
        let a1 = build_drift_matrix(&shifted).unwrap();
        prop_assert!((a0 - a1).amax() <= 1e-12);
    }

    #[test]
    fn drift_is_affine_in_hopping_through_four_blocks(p in params_strategy(), j2 in 0.0..0.4f64) {
        let a0 = build_drift_matrix(&SystemParams { hopping: 0.0, ..p }).unwrap();
        let a1 = build_drift_matrix(&SystemParams { hopping: p.hopping, ..p }).unwrap();
        let a2 = build_drift_matrix(&SystemParams { hopping: j2, ..p }).unwrap();
        let a_sum = build_drift_matrix(&SystemParams { hopping: p.hopping + j2, ..p }).unwrap();
        prop_assert!(((a1 - a0) + (a2 - a0) - (a_sum - a0)).amax() <= 1e-12);

        let hop = a1 - a0;
        for r in 0..6 {
            for c in 0..6 {
                let in_block = (2..4).contains(&r) && (4..6).contains(&c)
                    || (4..6).contains(&r) && (2..4).contains(&c);
                if !in_block {
                    prop_assert_eq!(hop[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn diffusion_ignores_couplings_and_detunings(p in params_strategy(), q in params_strategy()) {
        let mixed = SystemParams {
            delta_tilde: q.delta_tilde,
            delta_a: q.delta_a,
            coupling_m: q.coupling_m,
            coupling_a: q.coupling_a,
            hopping: q.hopping,
            theta: q.theta,
            ..p
        };
        let d = build_diffusion_matrix(&p).unwrap();
        prop_assert_eq!(d, build_diffusion_matrix(&mixed).unwrap());
        prop_assert!(d.diagonal().iter().all(|x| *x >= 0.0));
        prop_assert_eq!(d - Matrix6::from_diagonal(&d.diagonal()), Matrix6::zeros());
    }
}

#[test]
fn zero_hopping_reproduces_printed_matrix() {
    let p = SystemParams::reference();
    let a = build_drift_matrix(&p).unwrap();
    let mut expected = Matrix6::zeros();
    let rows: [[f64; 6]; 6] = [
        [-0.01, 1.0, 0.0, -0.15, 0.0, 0.0],
        [-1.0, -0.01, 0.15, 0.0, 0.3, 0.0],
        [0.0, -0.15, -0.2, 1.0, 0.0, 0.0],
        [0.15, 0.0, -1.0, -0.2, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -5e-5, 1.0],
        [0.3, 0.0, 0.0, 0.0, -1.0, -5e-5],
    ];
    for r in 0..6 {
        for c in 0..6 {
            expected[(r, c)] = rows[r][c];
        }
    }
    assert!((a - expected).amax() < 1e-15, "{a}");
}

fn raw_weak() -> RawParams {
    RawParams {
        g_m: 1e-4,
        g_a: 1e-4,
        drive_1: 60.0,
        drive_2: 300.0,
        delta_1: -1.0,
        delta_2: -0.5,
        kappa_2: 0.5,
        omega_m: 1.0,
        kappa: 0.2,
        gamma_m: 0.05,
        gamma_a: 0.4,
        delta_a: 1.0,
        hopping: 0.1,
        theta: 0.7,
        n_th: 10.0,
        omega_a: 0.0,
    }
}

/// Explicit RK4 on the full time-dependent mean-field equations, including
/// the control-field amplitude as a fourth dynamical variable.
fn integrate_mean_fields(raw: &RawParams, t_end: f64, dt: f64) -> [C; 4] {
    let i = C::i();
    let rhs = |s: &[C; 4]| -> [C; 4] {
        let [a1, a2, ba, bm] = *s;
        let ga = raw.g_a * a2;
        let d1 = raw.delta_1 - 2.0 * raw.g_m * bm.re;
        let d2 = raw.delta_2 + 2.0 * raw.g_m * bm.re;
        [
            (i * d1 - raw.kappa / 2.0) * a1 + i * ga * ba + raw.drive_1,
            (i * d2 - raw.kappa_2 / 2.0) * a2 + raw.drive_2,
            -(raw.gamma_a / 2.0 + i * raw.delta_a) * ba
                - i * raw.hopping * C::from_polar(1.0, raw.theta) * bm
                + i * ga * a1,
            -(raw.gamma_m / 2.0 + i * raw.omega_m) * bm
                - i * raw.hopping * C::from_polar(1.0, -raw.theta) * ba
                + i * raw.g_m * a1.norm_sqr(),
        ]
    };
    let axpy = |s: &[C; 4], k: &[C; 4], h: f64| -> [C; 4] {
        [s[0] + k[0] * h, s[1] + k[1] * h, s[2] + k[2] * h, s[3] + k[3] * h]
    };
    let mut s = [C::new(0.0, 0.0); 4];
    let steps = (t_end / dt).ceil() as usize;
    for _ in 0..steps {
        let k1 = rhs(&s);
        let k2 = rhs(&axpy(&s, &k1, dt / 2.0));
        let k3 = rhs(&axpy(&s, &k2, dt / 2.0));
        let k4 = rhs(&axpy(&s, &k3, dt));
        for n in 0..4 {
            s[n] += (k1[n] + k2[n] * 2.0 + k3[n] * 2.0 + k4[n]) * (dt / 6.0);
        }
    }
    s
}

#[test]
fn mean_fields_match_long_time_integration() {
    let raw = raw_weak();
    let mf = solve_mean_fields(&raw).unwrap();
    let [a1, a2, ba, bm] = integrate_mean_fields(&raw, 1e3 / raw.gamma_m, 0.01);
    for (name, ours, oracle) in [
        ("alpha_1", mf.alpha_1, a1),
        ("alpha_2", mf.alpha_2, a2),
        ("beta_a", mf.beta_a, ba),
        ("beta_m", mf.beta_m, bm),
    ] {
        let rel = (ours - oracle).norm() / oracle.norm();
        assert!(rel < 1e-8, "{name}: {ours} vs {oracle} (rel {rel:.2e})");
    }
}

#[test]
fn calibrated_drives_reproduce_target_couplings() {
    let template = RawParams {
        g_m: 1e-4,
        g_a: 1e-4,
        drive_1: 0.0,
        drive_2: 0.0,
        delta_1: -1.0,
        delta_2: 0.0,
        kappa_2: 0.02,
        omega_m: 1.0,
        kappa: 0.02,
        gamma_m: 1e-4,
        gamma_a: 0.4,
        delta_a: 1.0,
        hopping: 0.0,
        theta: 0.0,
        n_th: 100.0,
        omega_a: 0.0,
    };
    let raw = calibrate_drives(&template, 0.15, 0.15).unwrap();
    let eff = effective_params(&raw, &solve_mean_fields(&raw).unwrap());
    assert!((eff.coupling_m - 0.15).abs() < 1e-9, "{}", eff.coupling_m);
    assert!((eff.coupling_a - 0.15).abs() < 1e-9, "{}", eff.coupling_a);
    // |α₂| = E₂ / |iΔ'₂ − κ₂/2| in closed form
    let d2 = raw.delta_2 + 2.0 * raw.g_m * solve_mean_fields(&raw).unwrap().beta_m.re;
    let alpha_2 = raw.drive_2 / d2.hypot(raw.kappa_2 / 2.0);
    assert!((raw.g_a * alpha_2 - 0.15).abs() < 1e-9);
}
