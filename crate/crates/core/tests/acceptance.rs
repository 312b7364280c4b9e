//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use brillouin_qc::experiments::{
    analyze_point, find_threshold, grid_points, robustness_scan, study_grids, sweep, Extinction,
    SweepAxis, SweepRow, ENTANGLEMENT_FLOOR, GRID_1D_STEPS, GRID_2D_STEPS,
};
use brillouin_qc::lyapunov::{check_stability, solve_steady_lyapunov, RESIDUAL_TOL};
use brillouin_qc::measures::{gaussian_discord, log_negativity, Pair};
use brillouin_qc::oracle::{estimate_covariance, OracleConfig, Scheme, BURN_IN_RELAXATIONS};
use brillouin_qc::{FullReport, LinearModel, SystemParams};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rayon::prelude::*;

struct Outcome {
    id: &'static str,
    pass: bool,
}

fn criterion(
    id: &'static str,
    title: &str,
    limit: Option<Duration>,
    body: impl FnOnce() -> (bool, String),
) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = body();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = ok && in_time;
    let timing = match limit {
        Some(l) => format!("{:.2} s, limit {:.0} s", elapsed.as_secs_f64(), l.as_secs_f64()),
        None => format!("{:.2} s", elapsed.as_secs_f64()),
    };
    println!(
        "[{}] {id} {title}: {detail} ({timing})",
        if pass { "PASS" } else { "FAIL" }
    );
    Outcome { id, pass }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn params(f: impl FnOnce(&mut SystemParams)) -> SystemParams {
    let mut p = SystemParams::reference();
    f(&mut p);
    p
}

fn om(report: &FullReport) -> (f64, f64) {
    let r = report.get(Pair::OpticalMechanical);
    (r.log_negativity, r.discord)
}

fn theta_curve(base: &SystemParams) -> (SweepAxis, Vec<SweepRow>) {
    let axis = SweepAxis::linear("theta", 0.0, 4.0 * PI, GRID_1D_STEPS);
    let rows = sweep(base, std::slice::from_ref(&axis)).unwrap().rows;
    (axis, rows)
}

fn series(rows: &[SweepRow], f: impl Fn(&FullReport) -> f64) -> Vec<f64> {
    rows.iter()
        .map(|r| r.report.as_ref().map_or(f64::NAN, &f))
        .collect()
}

/// Indices of strict-left local maxima `y[k-1] < y[k] >= y[k+1]`.
fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len() - 1)
        .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1])
        .collect()
}

fn near(x: &[f64], k: usize, target: f64, step: f64) -> bool {
    (x[k] - target).abs() <= step * (1.0 + 1e-9)
}

/// Everything the grid-wide criteria need from one reproduction point.
struct PointCheck {
    stable: bool,
    error: Option<String>,
    residual_ratio: f64,
    asymmetry: f64,
    min_eig: f64,
    min_uncertainty: f64,
    nu_en: Vec<(f64, f64)>,
    qd_en: Vec<(f64, f64)>,
}

fn check_point(p: &SystemParams) -> PointCheck {
    let mut out = PointCheck {
        stable: false,
        error: None,
        residual_ratio: 0.0,
        asymmetry: 0.0,
        min_eig: f64::INFINITY,
        min_uncertainty: f64::INFINITY,
        nu_en: vec![],
        qd_en: vec![],
    };
    let model = LinearModel::new(p).unwrap();
    out.stable = check_stability(&model.drift).unwrap().stable;
    if !out.stable {
        return out;
    }
    match analyze_point(p) {
        Ok(a) => {
            let v = &a.covariance;
            let bound = a.model.drift.norm() * v.v.norm() + a.model.diffusion.norm();
            out.residual_ratio = v.residual / bound;
            out.asymmetry = v.max_asymmetry();
            out.min_eig = v.min_eigenvalue();
            out.min_uncertainty = v.min_uncertainty_eigenvalue();
            for r in &a.report.pairs {
                out.nu_en.push((r.nu_minus, r.log_negativity));
                out.qd_en.push((r.discord, r.log_negativity));
            }
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// All 2D study grids at default resolution plus the 1D curves.
fn reproduction_points() -> Vec<SystemParams> {
    let mut points = Vec::new();
    for grid in study_grids(GRID_2D_STEPS) {
        points.extend(grid_points(&grid.base, &grid.axes).unwrap().into_iter().map(|(_, p)| p));
    }
    let theta = SweepAxis::linear("theta", 0.0, 4.0 * PI, GRID_1D_STEPS);
    let n_th = SweepAxis::linear("n_th", 0.0, 300.0, GRID_1D_STEPS);
    for j in [0.1, 0.15, 0.2] {
        let curves = [
            (params(|p| { p.coupling_a = 0.2; p.coupling_m = 0.2; p.hopping = j }), &theta),
            (params(|p| { p.theta = FRAC_PI_2; p.hopping = j }), &n_th),
            (params(|p| { p.coupling_a = 0.2; p.hopping = j }), &theta),
            (params(|p| { p.coupling_a = 0.2; p.theta = FRAC_PI_2; p.hopping = j }), &n_th),
        ];
        for (base, axis) in curves {
            points.extend(
                grid_points(&base, std::slice::from_ref(axis))
                    .unwrap()
                    .into_iter()
                    .map(|(_, p)| p),
            );
        }
    }
    points
}

fn main() {
    let mut outcomes = Vec::new();
    let n_th_axis = SweepAxis::linear("n_th", 0.0, 300.0, GRID_1D_STEPS);
    let thermal_base = params(|p| p.theta = FRAC_PI_2);

    outcomes.push(criterion("C1", "acoustic threshold without hopping", secs(5), || {
        match find_threshold(&SystemParams::reference(), "G_a", (0.01, 0.3), Pair::OpticalMechanical) {
            Ok(t) => ((0.10..=0.14).contains(&t), format!("G_a* = {t:.5}, want [0.10, 0.14]")),
            Err(e) => (false, e.to_string()),
        }
    }));

    outcomes.push(criterion("C2", "no threshold with hopping", secs(1), || {
        let p = params(|p| {
            p.hopping = 0.2;
            p.theta = FRAC_PI_2;
            p.coupling_a = 0.01;
            p.delta_a = 1.0;
        });
        match analyze_point(&p) {
            Ok(a) => {
                let en = om(&a.report).0;
                (en > ENTANGLEMENT_FLOOR, format!("E_N(G_a = 0.01) = {en:.5e}"))
            }
            Err(e) => (false, e.to_string()),
        }
    }));

    outcomes.push(criterion("C3", "phase structure of E_N", secs(30), || {
        let base = params(|p| {
            p.hopping = 0.2;
            p.coupling_a = 0.2;
            p.coupling_m = 0.2;
        });
        let (axis, rows) = theta_curve(&base);
        let theta = axis.values();
        let step = axis.step();
        let en = series(&rows, |r| om(r).0);
        let mut ok = true;
        let mut notes = Vec::new();
        for n in 0..=4 {
            let target = n as f64 * PI;
            let dip = (0..theta.len())
                .filter(|&k| near(&theta, k, target, step))
                .map(|k| en[k])
                .fold(f64::INFINITY, f64::min);
            if !(dip < ENTANGLEMENT_FLOOR) {
                ok = false;
                notes.push(format!("min E_N near {n}π = {dip:.3e}"));
            }
        }
        let maxima = local_maxima(&en);
        for n in 0..4 {
            let target = (n as f64 + 0.5) * PI;
            if !maxima.iter().any(|&k| near(&theta, k, target, step)) {
                ok = false;
                let nearest = maxima
                    .iter()
                    .min_by(|&&a, &&b| (theta[a] - target).abs().total_cmp(&(theta[b] - target).abs()));
                notes.push(match nearest {
                    Some(&k) => format!(
                        "peak for {}π at {:.3}π ({:.0} steps off)",
                        n as f64 + 0.5,
                        theta[k] / PI,
                        (theta[k] - target).abs() / step
                    ),
                    None => "no local maxima".into(),
                });
            }
        }
        let peaks: Vec<String> = maxima.iter().map(|&k| format!("{:.3}π", theta[k] / PI)).collect();
        let detail = if notes.is_empty() {
            format!("zeros at nπ, peaks at [{}]", peaks.join(", "))
        } else {
            format!("{}; peaks at [{}]", notes.join("; "), peaks.join(", "))
        };
        (ok, detail)
    }));

    let mut entanglement_extinction = None;

    outcomes.push(criterion("C4", "thermal robustness of entanglement", secs(60), || {
        let records = robustness_scan(
            &thermal_base,
            &n_th_axis,
            &[0.1, 0.2],
            Extinction::Entanglement {
                pair: Pair::OpticalMechanical,
            },
        );
        match records {
            Ok(r) => {
                entanglement_extinction = Some(r.clone());
                let star = |i: usize| r[i].extinction.unwrap_or(f64::INFINITY);
                (
                    star(0) < 150.0 && star(1) > 150.0,
                    format!("n_th*(J_m=0.1) = {:.2}, n_th*(J_m=0.2) = {:.2}", star(0), star(1)),
                )
            }
            Err(e) => (false, e.to_string()),
        }
    }));

    outcomes.push(criterion("C5", "discord plateau and peak", None, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for j in [0.1, 0.15, 0.2] {
            let p = params(|p| {
                p.coupling_a = 0.2;
                p.hopping = j;
                p.theta = PI;
            });
            let a = analyze_point(&p).unwrap();
            let qd = om(&a.report).1;
            ok &= (qd - 0.24).abs() <= 0.10;
            parts.push(format!("QD(π, J_m={j}) = {qd:.4}"));
        }
        let p = params(|p| {
            p.coupling_a = 0.2;
            p.hopping = 0.2;
            p.theta = FRAC_PI_2;
        });
        let a = analyze_point(&p).unwrap();
        let qd = om(&a.report).1;
        ok &= qd > 1.0;
        parts.push(format!("QD(π/2, J_m=0.2) = {qd:.4} (want > 1)"));
        (ok, format!("{}; want 0.24 ± 0.10 at π", parts.join(", ")))
    }));

    outcomes.push(criterion("C6", "discord outlives entanglement in n_th", None, || {
        let Some(ent) = entanglement_extinction else {
            return (false, "no entanglement scan to compare with".into());
        };
        let disc = robustness_scan(
            &thermal_base,
            &n_th_axis,
            &[0.1, 0.2],
            Extinction::Discord {
                pair: Pair::OpticalMechanical,
                floor: 0.01,
            },
        )
        .unwrap();
        let show = |x: Option<f64>| x.map_or("beyond 300".to_string(), |v| format!("{v:.2}"));
        let mut ok = true;
        let mut parts = Vec::new();
        for (e, d) in ent.iter().zip(&disc) {
            let e_star = e.extinction.unwrap_or(f64::INFINITY);
            let d_star = d.extinction.unwrap_or(f64::INFINITY);
            ok &= d_star > e_star || (d.extinction.is_none() && e.extinction.is_none());
            parts.push(format!(
                "J_m={}: QD < 0.01 at {} vs E_N gone at {}",
                e.hopping,
                show(d.extinction),
                show(e.extinction)
            ));
        }
        (ok, parts.join("; "))
    }));

    outcomes.push(criterion("C7", "Monte Carlo agrees with Lyapunov", secs(300), || {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20_241_019);
        let grids = study_grids(GRID_2D_STEPS);
        let mut chosen = vec![("reference".to_string(), SystemParams::reference())];
        while chosen.len() < 6 {
            let grid = grids.choose(&mut rng).unwrap();
            let points = grid_points(&grid.base, &grid.axes).unwrap();
            let (coords, p) = points.choose(&mut rng).unwrap();
            let model = LinearModel::new(p).unwrap();
            if check_stability(&model.drift).unwrap().stable {
                chosen.push((format!("{}{:.3?}", grid.name, coords), *p));
            }
        }
        let mut ok = true;
        let mut parts = Vec::new();
        for (k, (name, p)) in chosen.iter().enumerate() {
            let model = LinearModel::new(p).unwrap();
            let margin = check_stability(&model.drift).unwrap().margin;
            let lyap = solve_steady_lyapunov(&model.drift, &model.diffusion).unwrap().v;
            let t_burn = BURN_IN_RELAXATIONS / margin.abs();
            let t_sample = t_burn.max(1000.0);
            let cfg = OracleConfig {
                n_traj: 2000,
                dt: ((t_burn + t_sample) / 5000.0).clamp(0.25, 10.0),
                t_burn,
                t_sample,
                seed: 1000 + k as u64,
                scheme: Scheme::ExactDiscretization,
                n_batches: 20,
            };
            let est = estimate_covariance(&model, &cfg).unwrap();
            let rel = (est.v - lyap).norm() / lyap.norm();
            ok &= rel < 0.05;
            parts.push(format!("{name}: {rel:.4}"));
        }
        (ok, format!("relative Frobenius distances {}", parts.join(", ")))
    }));

    outcomes.push(criterion("C8", "analytic fixtures", None, || {
        let mut ok = true;
        let mut parts = Vec::new();
        let mut thermal_err: f64 = 0.0;
        for n_th in [0.0, 1.0, 100.0, 1000.0] {
            let p = params(|p| {
                p.coupling_m = 0.0;
                p.coupling_a = 0.0;
                p.n_th = n_th;
            });
            let a = analyze_point(&p).unwrap();
            let mech = a.covariance.block(4, 4);
            let expected = nalgebra::Matrix2::identity() * (n_th + 0.5);
            thermal_err = thermal_err.max((mech - expected).amax() / (n_th + 0.5));
        }
        ok &= thermal_err <= 1e-10;
        parts.push(format!("thermal block rel. error {thermal_err:.1e}"));

        let vacuum = nalgebra::Matrix4::identity() * 0.5;
        let (nu, en) = log_negativity(&vacuum).unwrap();
        ok &= en == 0.0 && nu == 0.5;
        parts.push(format!("vacuum E_N = {en}"));
        let mut worst_qd: f64 = 0.0;
        for a in [0.5, 1.0, 7.3, 100.5] {
            let (qd, _) = gaussian_discord(&(nalgebra::Matrix4::identity() * a)).unwrap();
            worst_qd = worst_qd.max(qd.abs());
        }
        ok &= worst_qd <= 1e-12;
        parts.push(format!("symmetric product |QD| ≤ {worst_qd:.1e}"));
        (ok, parts.join(", "))
    }));

    let grid_start = Instant::now();
    let points = reproduction_points();
    let checks: Vec<PointCheck> = points.par_iter().map(check_point).collect();
    let grid_time = grid_start.elapsed();
    let stable: Vec<&PointCheck> = checks.iter().filter(|c| c.stable).collect();

    outcomes.push(criterion("C8b", "Lyapunov residual on every accepted solve", None, || {
        let worst = stable
            .iter()
            .filter(|c| c.error.is_none())
            .map(|c| c.residual_ratio)
            .fold(0.0, f64::max);
        (
            worst < RESIDUAL_TOL,
            format!(
                "max ‖AV+VAᵀ+D‖/(‖A‖‖V‖+‖D‖) = {worst:.2e} over {} solves",
                stable.len()
            ),
        )
    }));

    outcomes.push(criterion("C9", "physicality on the reproduction grids", None, || {
        let failed: Vec<&String> = stable.iter().filter_map(|c| c.error.as_ref()).collect();
        let asym = stable.iter().map(|c| c.asymmetry).fold(0.0, f64::max);
        let min_eig = stable.iter().map(|c| c.min_eig).fold(f64::INFINITY, f64::min);
        let min_unc = stable.iter().map(|c| c.min_uncertainty).fold(f64::INFINITY, f64::min);
        let ok = failed.is_empty() && asym == 0.0 && min_eig >= -1e-10 && min_unc >= -1e-10;
        (
            ok,
            format!(
                "{} points, {} stable, {} failed solves, max asymmetry {asym:.1e}, min eig(V) {min_eig:.3e}, min eig(V + iΩ/2) {min_unc:.3e}, grid time {:.1} s",
                checks.len(),
                stable.len(),
                failed.len(),
                grid_time.as_secs_f64()
            ),
        )
    }));

    outcomes.push(criterion("C10", "QD > 1.05 implies entanglement", None, || {
        let mut parts = Vec::new();
        let mut total = 0;
        for (i, pair) in Pair::ALL.iter().enumerate() {
            let mut strong = 0;
            let mut violations = 0;
            let mut max_qd = f64::NEG_INFINITY;
            for c in &stable {
                let (qd, en) = c.qd_en[i];
                max_qd = max_qd.max(qd);
                if qd > 1.05 {
                    strong += 1;
                    if !(en > 0.0) {
                        violations += 1;
                    }
                }
            }
            total += violations;
            parts.push(format!(
                "{pair}: {strong} points with QD > 1.05, {violations} unentangled, max QD {max_qd:.4}"
            ));
        }
        (total == 0, parts.join("; "))
    }));

    outcomes.push(criterion("P1", "E_N = 0 exactly when ν⁻ ≥ ½", None, || {
        let bad = stable
            .iter()
            .flat_map(|c| c.nu_en.iter())
            .filter(|&&(nu, en)| (en == 0.0) != (nu >= 0.5))
            .count();
        (bad == 0, format!("{bad} mismatches"))
    }));

    outcomes.push(criterion("P2", "grids repeat after θ → θ + 2π", None, || {
        let grid = study_grids(GRID_2D_STEPS)
            .into_iter()
            .find(|g| g.name == "hopping_phase")
            .unwrap();
        let rows = sweep(&grid.base, &grid.axes).unwrap().rows;
        let n = GRID_2D_STEPS;
        let half = (n - 1) / 2;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in 0..=half {
                let (a, b) = (&rows[i * n + k], &rows[i * n + k + half]);
                if let (Some(ra), Some(rb)) = (&a.report, &b.report) {
                    for pair in Pair::ALL {
                        let (x, y) = (ra.get(pair), rb.get(pair));
                        worst = worst
                            .max((x.log_negativity - y.log_negativity).abs())
                            .max((x.discord - y.discord).abs())
                            .max((x.nu_minus - y.nu_minus).abs());
                    }
                } else if a.stable != b.stable {
                    worst = f64::INFINITY;
                }
            }
        }
        (worst <= 1e-10, format!("max deviation {worst:.2e}"))
    }));

    outcomes.push(criterion("P3", "E_N stronger in odd half-periods", None, || {
        let base = params(|p| {
            p.hopping = 0.2;
            p.coupling_a = 0.2;
            p.coupling_m = 0.2;
        });
        let (axis, rows) = theta_curve(&base);
        let theta = axis.values();
        let en = series(&rows, |r| om(r).0);
        let max_in = |lo: f64, hi: f64| {
            (0..theta.len())
                .filter(|&k| theta[k] > lo && theta[k] < hi)
                .map(|k| en[k])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let (first, second) = (max_in(0.0, PI), max_in(PI, 2.0 * PI));
        (
            second > first,
            format!("max E_N on (π, 2π) = {second:.4}, on (0, π) = {first:.4}"),
        )
    }));

    outcomes.push(criterion("P4", "discord peaks at odd multiples of π/2", None, || {
        let base = params(|p| {
            p.hopping = 0.2;
            p.coupling_a = 0.2;
        });
        let (axis, rows) = theta_curve(&base);
        let theta = axis.values();
        let step = axis.step();
        let qd = series(&rows, |r| om(r).1);
        let maxima = local_maxima(&qd);
        let mut missing = Vec::new();
        for n in [1, 3, 5, 7] {
            let target = n as f64 * FRAC_PI_2;
            if !maxima.iter().any(|&k| near(&theta, k, target, step)) {
                missing.push(format!("{n}π/2"));
            }
        }
        let peaks: Vec<String> = maxima.iter().map(|&k| format!("{:.3}π", theta[k] / PI)).collect();
        (
            missing.is_empty(),
            format!(
                "QD maxima at [{}]{}",
                peaks.join(", "),
                if missing.is_empty() {
                    String::new()
                } else {
                    format!("; none near {}", missing.join(", "))
                }
            ),
        )
    }));

    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {} of {} passed{}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {}", failed.join(", "))
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
