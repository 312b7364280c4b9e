//! Physical parameters, mean-field reduction and the linearized quadrature
//! dynamics of the three-mode (optical, acoustic, mechanical) system.
//!
//! All rates and detunings are dimensionless, measured in units of the
//! mechanical frequency `omega_m`. Quadratures are ordered
//! `(X_a1, Y_a1, X_ba, Y_ba, X_bm, Y_bm)` with `X = (o + o†)/√2` and
//! `Y = i(o† - o)/√2`.

use nalgebra::{Complex, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `omega_m / 2π` in Hz, used only when reporting rates in SI units.
pub const OMEGA_M_OVER_2PI_HZ: f64 = 1.0e6;

/// Fixed-point damping of the mean-field iteration.
pub const MEAN_FIELD_DAMPING: f64 = 0.5;
/// Iteration cap of the mean-field solver.
pub const MEAN_FIELD_MAX_ITER: usize = 100_000;
/// Scaled residual at which the mean-field iteration stops.
pub const MEAN_FIELD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("mean-field iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("drive calibration failed for `{name}`: {reason}")]
    Calibration {
        name: &'static str,
        reason: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, ModelError>;

fn default_omega_m() -> f64 {
    1.0
}

/// Rates and detunings of the effective three-mode model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    #[serde(default = "default_omega_m")]
    pub omega_m: f64,
    pub kappa: f64,
    pub gamma_m: f64,
    pub gamma_a: f64,
    pub delta_tilde: f64,
    pub delta_a: f64,
    /// Effective optomechanical coupling.
    #[serde(rename = "G_m")]
    pub coupling_m: f64,
    /// Effective Brillouin (acoustic) coupling.
    #[serde(rename = "G_a")]
    pub coupling_a: f64,
    /// Phonon hopping rate between acoustic and mechanical modes.
    #[serde(rename = "J_m")]
    pub hopping: f64,
    pub theta: f64,
    pub n_th: f64,
}

/// Names accepted by [`SystemParams::get`] and [`SystemParams::with`], in
/// config-key spelling.
pub const SYSTEM_PARAM_NAMES: [&str; 11] = [
    "omega_m",
    "kappa",
    "gamma_m",
    "gamma_a",
    "delta_tilde",
    "delta_a",
    "G_m",
    "G_a",
    "J_m",
    "theta",
    "n_th",
];

impl SystemParams {
    /// Red-sideband working point shared by the study grids: `κ = 0.02`,
    /// `γ_a = 0.4`, `γ_m = 1e-4`, `n_th = 100`, `G_m = 0.15`, `Δ̃ = -1`,
    /// `Δ_a = 1`, no hopping. `G_a` starts at 0.15.
    pub fn reference() -> Self {
        Self {
            omega_m: 1.0,
            kappa: 0.02,
            gamma_m: 1e-4,
            gamma_a: 0.4,
            delta_tilde: -1.0,
            delta_a: 1.0,
            coupling_m: 0.15,
            coupling_a: 0.15,
            hopping: 0.0,
            theta: 0.0,
            n_th: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in SYSTEM_PARAM_NAMES {
            let value = self.get(name).expect("listed name");
            if !value.is_finite() {
                return Err(ModelError::InvalidParam {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        positive("omega_m", self.omega_m)?;
        positive("kappa", self.kappa)?;
        positive("gamma_m", self.gamma_m)?;
        positive("gamma_a", self.gamma_a)?;
        non_negative("n_th", self.n_th)?;
        non_negative("J_m", self.hopping)?;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "omega_m" => self.omega_m,
            "kappa" => self.kappa,
            "gamma_m" => self.gamma_m,
            "gamma_a" => self.gamma_a,
            "delta_tilde" => self.delta_tilde,
            "delta_a" => self.delta_a,
            "G_m" => self.coupling_m,
            "G_a" => self.coupling_a,
            "J_m" => self.hopping,
            "theta" => self.theta,
            "n_th" => self.n_th,
            _ => return None,
        })
    }

    /// Copy with one field replaced. No validation is done here.
    pub fn with(mut self, name: &str, value: f64) -> Result<Self> {
        let slot = match name {
            "omega_m" => &mut self.omega_m,
            "kappa" => &mut self.kappa,
            "gamma_m" => &mut self.gamma_m,
            "gamma_a" => &mut self.gamma_a,
            "delta_tilde" => &mut self.delta_tilde,
            "delta_a" => &mut self.delta_a,
            "G_m" => &mut self.coupling_m,
            "G_a" => &mut self.coupling_a,
            "J_m" => &mut self.hopping,
            "theta" => &mut self.theta,
            "n_th" => &mut self.n_th,
            _ => return Err(ModelError::UnknownParam(name.to_string())),
        };
        *slot = value;
        Ok(self)
    }

    /// Converts a dimensionless rate to Hz (`rate · ω_m/2π`).
    pub fn rate_in_hz(&self, rate: f64) -> f64 {
        rate * OMEGA_M_OVER_2PI_HZ / self.omega_m
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParam {
            name,
            value,
            reason: "must be > 0",
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParam {
            name,
            value,
            reason: "must be >= 0",
        })
    }
}

/// Drift and diffusion matrices of `du = A u dt + noise`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearModel {
    pub drift: Matrix6<f64>,
    pub diffusion: Matrix6<f64>,
}

impl LinearModel {
    pub fn new(params: &SystemParams) -> Result<Self> {
        Ok(Self {
            drift: build_drift_matrix(params)?,
            diffusion: build_diffusion_matrix(params)?,
        })
    }
}

/// Writes the quadrature image of a complex coupling `ȯ_row ∋ c·o_col`
/// into the 2×2 block at (`row`, `col`).
fn add_complex_coupling(a: &mut Matrix6<f64>, row: usize, col: usize, c: Complex<f64>) {
    a[(row, col)] += c.re;
    a[(row, col + 1)] -= c.im;
    a[(row + 1, col)] += c.im;
    a[(row + 1, col + 1)] += c.re;
}

/// Full 6×6 drift matrix, hopping blocks included.
///
/// With `J_m = 0` this is entry for entry the textbook three-mode matrix:
/// optical block `[[-κ/2, -Δ̃], [Δ̃, -κ/2]]`, beam-splitter coupling `±G_a`
/// between optical and acoustic quadratures, and position-position coupling
/// `2G_m` feeding `Y_a1` from `X_bm` and `Y_bm` from `X_a1`.
pub fn build_drift_matrix(params: &SystemParams) -> Result<Matrix6<f64>> {
    params.validate()?;
    let p = params;
    let mut a = Matrix6::zeros();

    a[(0, 0)] = -p.kappa / 2.0;
    a[(0, 1)] = -p.delta_tilde;
    a[(1, 0)] = p.delta_tilde;
    a[(1, 1)] = -p.kappa / 2.0;

    a[(0, 3)] = -p.coupling_a;
    a[(1, 2)] = p.coupling_a;
    a[(2, 1)] = -p.coupling_a;
    a[(3, 0)] = p.coupling_a;

    a[(2, 2)] = -p.gamma_a / 2.0;
    a[(2, 3)] = p.delta_a;
    a[(3, 2)] = -p.delta_a;
    a[(3, 3)] = -p.gamma_a / 2.0;

    a[(1, 4)] = 2.0 * p.coupling_m;
    a[(5, 0)] = 2.0 * p.coupling_m;

    a[(4, 4)] = -p.gamma_m / 2.0;
    a[(4, 5)] = p.omega_m;
    a[(5, 4)] = -p.omega_m;
    a[(5, 5)] = -p.gamma_m / 2.0;

    // ḃ_a ∋ -i J e^{iθ} b_m and ḃ_m ∋ -i J e^{-iθ} b_a
    let minus_i = Complex::new(0.0, -1.0);
    let to_acoustic = minus_i * Complex::from_polar(p.hopping, p.theta);
    let to_mechanical = minus_i * Complex::from_polar(p.hopping, -p.theta);
    add_complex_coupling(&mut a, 2, 4, to_acoustic);
    add_complex_coupling(&mut a, 4, 2, to_mechanical);

    Ok(a)
}

/// `diag[κ/2, κ/2, γ_a/2, γ_a/2, γ_m(2n_th+1)/2, γ_m(2n_th+1)/2]`; the
/// acoustic bath is at zero temperature.
pub fn build_diffusion_matrix(params: &SystemParams) -> Result<Matrix6<f64>> {
    params.validate()?;
    let thermal = params.gamma_m / 2.0 * (2.0 * params.n_th + 1.0);
    Ok(Matrix6::from_diagonal(&nalgebra::Vector6::new(
        params.kappa / 2.0,
        params.kappa / 2.0,
        params.gamma_a / 2.0,
        params.gamma_a / 2.0,
        thermal,
        thermal,
    )))
}

/// Pre-elimination parameters, for deriving the effective couplings from
/// drive amplitudes instead of fixing them directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    /// Single-photon optomechanical coupling.
    pub g_m: f64,
    /// Single-photon Brillouin coupling.
    pub g_a: f64,
    #[serde(rename = "E_1")]
    pub drive_1: f64,
    #[serde(rename = "E_2")]
    pub drive_2: f64,
    pub delta_1: f64,
    pub delta_2: f64,
    pub kappa_2: f64,
    #[serde(default = "default_omega_m")]
    pub omega_m: f64,
    pub kappa: f64,
    pub gamma_m: f64,
    pub gamma_a: f64,
    pub delta_a: f64,
    #[serde(rename = "J_m")]
    pub hopping: f64,
    pub theta: f64,
    pub n_th: f64,
    /// Bare acoustic frequency. Only recorded; it drops out in the rotating frame.
    #[serde(default)]
    pub omega_a: f64,
}

impl RawParams {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 16] = [
            ("g_m", self.g_m),
            ("g_a", self.g_a),
            ("E_1", self.drive_1),
            ("E_2", self.drive_2),
            ("delta_1", self.delta_1),
            ("delta_2", self.delta_2),
            ("kappa_2", self.kappa_2),
            ("omega_m", self.omega_m),
            ("kappa", self.kappa),
            ("gamma_m", self.gamma_m),
            ("gamma_a", self.gamma_a),
            ("delta_a", self.delta_a),
            ("J_m", self.hopping),
            ("theta", self.theta),
            ("n_th", self.n_th),
            ("omega_a", self.omega_a),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(ModelError::InvalidParam {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        non_negative("E_1", self.drive_1)?;
        non_negative("E_2", self.drive_2)?;
        positive("kappa_2", self.kappa_2)?;
        positive("omega_m", self.omega_m)?;
        positive("kappa", self.kappa)?;
        positive("gamma_m", self.gamma_m)?;
        positive("gamma_a", self.gamma_a)?;
        non_negative("n_th", self.n_th)?;
        non_negative("J_m", self.hopping)?;
        Ok(())
    }
}

/// Classical steady-state amplitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFields {
    pub alpha_1: Complex<f64>,
    pub alpha_2: Complex<f64>,
    pub beta_a: Complex<f64>,
    pub beta_m: Complex<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn control_field(raw: &RawParams, beta_m: Complex<f64>) -> Complex<f64> {
    let shifted = raw.delta_2 + 2.0 * raw.g_m * beta_m.re;
    -raw.drive_2 / Complex::new(-raw.kappa_2 / 2.0, shifted)
}

/// Right-hand side of the mean-field equations for `(α₁, β_a, β_m)`, with
/// the control field slaved to `β_m`.
pub fn mean_field_rhs(raw: &RawParams, state: &Vector3<Complex<f64>>) -> Vector3<Complex<f64>> {
    let (alpha_1, beta_a, beta_m) = (state[0], state[1], state[2]);
    let i = Complex::new(0.0, 1.0);
    let ga = raw.g_a * control_field(raw, beta_m);
    let delta_eff = raw.delta_1 - 2.0 * raw.g_m * beta_m.re;
    let hop_am = -i * Complex::from_polar(raw.hopping, raw.theta);
    let hop_ma = -i * Complex::from_polar(raw.hopping, -raw.theta);
    Vector3::new(
        Complex::new(-raw.kappa / 2.0, delta_eff) * alpha_1 + i * ga * beta_a + raw.drive_1,
        -Complex::new(raw.gamma_a / 2.0, raw.delta_a) * beta_a + hop_am * beta_m + i * ga * alpha_1,
        -Complex::new(raw.gamma_m / 2.0, raw.omega_m) * beta_m
            + hop_ma * beta_a
            + i * raw.g_m * alpha_1.norm_sqr(),
    )
}

/// Steady state of the mean-field equations by damped fixed-point iteration
/// from the empty state.
///
/// Each step freezes the radiation-pressure source `g_m|α₁|²` and the
/// `β_m`-dependent detunings, solves the remaining linear 3×3 system exactly,
/// and mixes the result with the previous iterate.
pub fn solve_mean_fields(raw: &RawParams) -> Result<MeanFields> {
    raw.validate()?;
    let i = Complex::new(0.0, 1.0);
    let scale = 1.0_f64.max(raw.drive_1);
    let mut state = Vector3::<Complex<f64>>::zeros();
    let mut residual = f64::INFINITY;

    for iter in 0..=MEAN_FIELD_MAX_ITER {
        let rhs = mean_field_rhs(raw, &state);
        let source = raw.g_m * state[0].norm_sqr();
        residual = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale.max(source);
        if residual <= MEAN_FIELD_TOL {
            let beta_m = state[2];
            return Ok(MeanFields {
                alpha_1: state[0],
                alpha_2: control_field(raw, beta_m),
                beta_a: state[1],
                beta_m,
                iterations: iter,
                residual,
            });
        }
        if iter == MEAN_FIELD_MAX_ITER {
            break;
        }

        let beta_m = state[2];
        let ga = raw.g_a * control_field(raw, beta_m);
        let delta_eff = raw.delta_1 - 2.0 * raw.g_m * beta_m.re;
        let hop_am = -i * Complex::from_polar(raw.hopping, raw.theta);
        let hop_ma = -i * Complex::from_polar(raw.hopping, -raw.theta);
        let system = Matrix3::new(
            Complex::new(-raw.kappa / 2.0, delta_eff),
            i * ga,
            Complex::new(0.0, 0.0),
            i * ga,
            -Complex::new(raw.gamma_a / 2.0, raw.delta_a),
            hop_am,
            Complex::new(0.0, 0.0),
            hop_ma,
            -Complex::new(raw.gamma_m / 2.0, raw.omega_m),
        );
        let b = Vector3::new(
            Complex::new(-raw.drive_1, 0.0),
            Complex::new(0.0, 0.0),
            -i * source,
        );
        let Some(next) = system.lu().solve(&b) else {
            return Err(ModelError::NonConvergence {
                iterations: iter,
                residual,
            });
        };
        state = state * Complex::new(1.0 - MEAN_FIELD_DAMPING, 0.0)
            + next * Complex::new(MEAN_FIELD_DAMPING, 0.0);
        if state.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            break;
        }
    }
    Err(ModelError::NonConvergence {
        iterations: MEAN_FIELD_MAX_ITER,
        residual,
    })
}

/// Effective couplings from converged mean fields. Only magnitudes are kept:
/// the phases of `α₁` and `α₂` are absorbed into the fluctuation operators so
/// that `G_m` and `G_a` are real and non-negative.
pub fn effective_params(raw: &RawParams, mf: &MeanFields) -> SystemParams {
    SystemParams {
        omega_m: raw.omega_m,
        kappa: raw.kappa,
        gamma_m: raw.gamma_m,
        gamma_a: raw.gamma_a,
        delta_tilde: raw.delta_1 - 2.0 * raw.g_m * mf.beta_m.re,
        delta_a: raw.delta_a,
        coupling_m: raw.g_m * mf.alpha_1.norm(),
        coupling_a: raw.g_a * mf.alpha_2.norm(),
        hopping: raw.hopping,
        theta: raw.theta,
        n_th: raw.n_th,
    }
}

fn bisect_drive(
    name: &'static str,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    rel_tol: f64,
    mut eval: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let f_lo = eval(lo)? - target;
    let f_hi = eval(hi)? - target;
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(ModelError::Calibration {
            name,
            reason: "target coupling not bracketed by the drive range",
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel_tol * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finds drive amplitudes `(E_1, E_2)` whose mean-field steady state yields
/// the requested effective couplings, by alternating bisection on each drive.
///
/// The drive fields of `template` are ignored. Returns the template with the
/// calibrated drives filled in.
pub fn calibrate_drives(template: &RawParams, target_gm: f64, target_ga: f64) -> Result<RawParams> {
    let mut raw = *template;
    raw.drive_1 = 0.0;
    raw.drive_2 = 0.0;
    raw.validate()?;
    if target_gm <= 0.0 || target_ga <= 0.0 || raw.g_m <= 0.0 || raw.g_a <= 0.0 {
        return Err(ModelError::Calibration {
            name: "G_m/G_a",
            reason: "targets and single-photon couplings must be positive",
        });
    }
    // Linear-response estimates bracket the answer from above once scaled.
    let e1_hi = 8.0 * target_gm / raw.g_m * raw.kappa.hypot(raw.delta_1.abs() + 1.0);
    let e2_hi = 8.0 * target_ga / raw.g_a * raw.kappa_2.hypot(raw.delta_2.abs() + 1.0);

    for _ in 0..50 {
        raw.drive_1 = bisect_drive("E_1", 0.0, e1_hi, target_gm, 1e-13, |e1| {
            let mut trial = raw;
            trial.drive_1 = e1;
            let mf = solve_mean_fields(&trial)?;
            Ok(effective_params(&trial, &mf).coupling_m)
        })?;
        raw.drive_2 = bisect_drive("E_2", 0.0, e2_hi, target_ga, 1e-13, |e2| {
            let mut trial = raw;
            trial.drive_2 = e2;
            let mf = solve_mean_fields(&trial)?;
            Ok(effective_params(&trial, &mf).coupling_a)
        })?;
        let eff = effective_params(&raw, &solve_mean_fields(&raw)?);
        if (eff.coupling_m - target_gm).abs() <= 1e-10 * target_gm
            && (eff.coupling_a - target_ga).abs() <= 1e-10 * target_ga
        {
            return Ok(raw);
        }
    }
    Err(ModelError::Calibration {
        name: "E_1/E_2",
        reason: "alternating bisection did not settle",
    })
}
