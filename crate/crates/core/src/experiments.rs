//! Parameter sweeps, threshold bisection and thermal robustness scans.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::lyapunov::{check_stability, solve_steady_lyapunov, CovarianceMatrix, StabilityReport};
use crate::measures::{full_report, FullReport, Pair};
use crate::model::{LinearModel, SystemParams, SYSTEM_PARAM_NAMES};
use crate::Error;

/// `E_N` above this counts as entangled.
pub const ENTANGLEMENT_FLOOR: f64 = 1e-6;
/// Absolute bracket width at which threshold bisection stops.
pub const THRESHOLD_TOL: f64 = 1e-4;
/// Default resolution of 2D grids.
pub const GRID_2D_STEPS: usize = 101;
/// Default resolution of 1D curves.
pub const GRID_1D_STEPS: usize = 401;

#[derive(Debug, ThisError, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid axis `{param}`: {reason}")]
    InvalidAxis { param: String, reason: String },
    #[error("a sweep takes 1 or 2 axes, got {0}")]
    AxisCount(usize),
    #[error("predicate has the same value ({value}) at both ends of [{lo}, {hi}] for `{param}`")]
    NoSignChange {
        param: String,
        lo: f64,
        hi: f64,
        value: bool,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl SweepAxis {
    pub fn linear(param: &str, min: f64, max: f64, steps: usize) -> Self {
        Self {
            param: param.to_string(),
            min,
            max,
            steps,
            scale: Scale::Linear,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |reason: String| {
            Err(SweepError::InvalidAxis {
                param: self.param.clone(),
                reason,
            })
        };
        if !SYSTEM_PARAM_NAMES.contains(&self.param.as_str()) {
            return bad("not a SystemParams field".into());
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return bad(format!("need finite min < max, got [{}, {}]", self.min, self.max));
        }
        if self.steps < 2 {
            return bad(format!("steps must be >= 2, got {}", self.steps));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let span = self.max - self.min;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.max
                } else {
                    self.min + span * i as f64 / last
                }
            })
            .collect()
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }
}

/// Everything computed at one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointAnalysis {
    pub params: SystemParams,
    pub model: LinearModel,
    pub stability: StabilityReport,
    pub covariance: CovarianceMatrix,
    pub report: FullReport,
}

/// Model, stability, Lyapunov solve and all correlation measures.
pub fn analyze_point(params: &SystemParams) -> Result<PointAnalysis, Error> {
    let model = LinearModel::new(params)?;
    let stability = check_stability(&model.drift)?;
    let covariance = solve_steady_lyapunov(&model.drift, &model.diffusion)?;
    let report = full_report(&covariance, &stability)?;
    Ok(PointAnalysis {
        params: *params,
        model,
        stability,
        covariance,
        report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub coords: Vec<f64>,
    pub stable: bool,
    /// Spectral abscissa; NaN when the parameters were rejected.
    pub margin: f64,
    pub residual: Option<f64>,
    /// `None` at unstable or failed points.
    pub report: Option<FullReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub rows: Vec<SweepRow>,
}

/// Parameter points of a 1–2 axis grid in row-major order, paired with
/// their coordinates.
pub fn grid_points(
    base: &SystemParams,
    axes: &[SweepAxis],
) -> Result<Vec<(Vec<f64>, SystemParams)>, SweepError> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(SweepError::AxisCount(axes.len()));
    }
    for axis in axes {
        axis.validate()?;
    }
    let mut points = vec![(Vec::new(), *base)];
    for axis in axes {
        let values = axis.values();
        points = points
            .into_iter()
            .flat_map(|(coords, params)| {
                values.iter().map(move |&x| {
                    let mut c = coords.clone();
                    c.push(x);
                    (c, params.with(&axis.param, x).expect("validated axis"))
                })
            })
            .collect();
    }
    Ok(points)
}

/// Evaluates `f` at every grid point, in parallel, returning results in
/// row-major order.
pub fn map_grid<T, F>(base: &SystemParams, axes: &[SweepAxis], f: F) -> Result<Vec<T>, SweepError>
where
    T: Send,
    F: Fn(&[f64], &SystemParams) -> T + Sync,
{
    let points = grid_points(base, axes)?;
    Ok(points.par_iter().map(|(c, p)| f(c, p)).collect())
}

fn evaluate_row(coords: &[f64], params: &SystemParams) -> SweepRow {
    let mut row = SweepRow {
        coords: coords.to_vec(),
        stable: false,
        margin: f64::NAN,
        residual: None,
        report: None,
        error: None,
    };
    let model = match LinearModel::new(params) {
        Ok(m) => m,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    match check_stability(&model.drift) {
        Ok(s) => {
            row.margin = s.margin;
            row.stable = s.stable;
        }
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }
    if !row.stable {
        return row;
    }
    match analyze_point(params) {
        Ok(a) => {
            row.residual = Some(a.covariance.residual);
            row.report = Some(a.report);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

pub fn sweep(base: &SystemParams, axes: &[SweepAxis]) -> Result<SweepResult, SweepError> {
    let rows = map_grid(base, axes, evaluate_row)?;
    Ok(SweepResult {
        axes: axes.to_vec(),
        rows,
    })
}

/// Bisection on the boundary of a boolean predicate over `[lo, hi]`.
pub fn bisect_predicate(
    param: &str,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    pred: impl Fn(f64) -> bool,
) -> Result<f64, SweepError> {
    let at_lo = pred(lo);
    if at_lo == pred(hi) {
        return Err(SweepError::NoSignChange {
            param: param.to_string(),
            lo,
            hi,
            value: at_lo,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn is_entangled(params: &SystemParams, pair: Pair) -> bool {
    analyze_point(params)
        .map(|a| a.report.get(pair).log_negativity > ENTANGLEMENT_FLOOR)
        .unwrap_or(false)
}

/// Value of `param` in `bracket` where `pair` switches between entangled and
/// separable, to within [`THRESHOLD_TOL`]. Points that cannot be analyzed
/// count as not entangled.
pub fn find_threshold(
    base: &SystemParams,
    param: &str,
    bracket: (f64, f64),
    pair: Pair,
) -> Result<f64, Error> {
    SweepAxis::linear(param, bracket.0, bracket.1, 2).validate()?;
    let t = bisect_predicate(param, bracket.0, bracket.1, THRESHOLD_TOL, |x| {
        base.with(param, x)
            .map(|p| is_entangled(&p, pair))
            .unwrap_or(false)
    })?;
    Ok(t)
}

/// Which correlation must vanish for a thermal extinction point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extinction {
    /// `E_N ≤ ENTANGLEMENT_FLOOR`.
    Entanglement { pair: Pair },
    /// `ε_QD < floor`.
    Discord { pair: Pair, floor: f64 },
}

impl Extinction {
    fn alive(&self, report: Option<&FullReport>) -> bool {
        match (self, report) {
            (_, None) => false,
            (Extinction::Entanglement { pair }, Some(r)) => {
                r.get(*pair).log_negativity > ENTANGLEMENT_FLOOR
            }
            (Extinction::Discord { pair, floor }, Some(r)) => r.get(*pair).discord >= *floor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RobustnessRecord {
    pub hopping: f64,
    /// First `n_th` on the axis where the correlation is gone; `None` when it
    /// survives the whole axis.
    pub extinction: Option<f64>,
}

/// For each hopping rate, scans `n_th` upward and records where the chosen
/// correlation first vanishes.
pub fn robustness_scan(
    base: &SystemParams,
    n_th_axis: &SweepAxis,
    hopping: &[f64],
    criterion: Extinction,
) -> Result<Vec<RobustnessRecord>, Error> {
    if n_th_axis.param != "n_th" {
        return Err(SweepError::InvalidAxis {
            param: n_th_axis.param.clone(),
            reason: "robustness scans run along n_th".into(),
        }
        .into());
    }
    hopping
        .iter()
        .map(|&j| {
            let params = base.with("J_m", j)?;
            let rows = sweep(&params, std::slice::from_ref(n_th_axis))?.rows;
            let extinction = rows
                .iter()
                .find(|r| !criterion.alive(r.report.as_ref()))
                .map(|r| r.coords[0]);
            Ok(RobustnessRecord {
                hopping: j,
                extinction,
            })
        })
        .collect()
}

/// A named 2D grid reproducing one of the standard parameter studies.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyGrid {
    pub name: &'static str,
    pub base: SystemParams,
    pub axes: Vec<SweepAxis>,
}

fn with_hopping(j: f64, theta: f64) -> SystemParams {
    SystemParams {
        hopping: j,
        theta,
        ..SystemParams::reference()
    }
}

/// The 2D studies over couplings, detuning, acoustic damping, hopping phase
/// and temperature, each at `steps × steps` resolution.
pub fn study_grids(steps: usize) -> Vec<StudyGrid> {
    let no_hop = SystemParams::reference();
    let hop = with_hopping(0.2, FRAC_PI_2);
    let strong = SystemParams {
        coupling_a: 0.2,
        coupling_m: 0.2,
        ..SystemParams::reference()
    };
    let discord_base = SystemParams {
        coupling_a: 0.2,
        ..SystemParams::reference()
    };
    let thermal = SystemParams {
        theta: FRAC_PI_2,
        ..SystemParams::reference()
    };
    let thermal_discord = SystemParams {
        coupling_a: 0.2,
        theta: FRAC_PI_2,
        ..SystemParams::reference()
    };
    let ga = SweepAxis::linear("G_a", 0.01, 0.3, steps);
    let grid = |name, base, axes| StudyGrid { name, base, axes };
    vec![
        grid(
            "coupling_detuning",
            no_hop,
            vec![ga.clone(), SweepAxis::linear("delta_a", 0.0, 2.0, steps)],
        ),
        grid(
            "coupling_detuning_hopping",
            hop,
            vec![ga.clone(), SweepAxis::linear("delta_a", 0.0, 2.0, steps)],
        ),
        grid(
            "couplings",
            no_hop,
            vec![ga.clone(), SweepAxis::linear("G_m", 0.01, 0.3, steps)],
        ),
        grid(
            "couplings_hopping",
            hop,
            vec![ga.clone(), SweepAxis::linear("G_m", 0.01, 0.3, steps)],
        ),
        grid(
            "damping_coupling",
            no_hop,
            vec![SweepAxis::linear("gamma_a", 0.01, 1.0, steps), ga.clone()],
        ),
        grid(
            "damping_coupling_hopping",
            hop,
            vec![SweepAxis::linear("gamma_a", 0.01, 1.0, steps), ga],
        ),
        grid(
            "hopping_phase",
            strong,
            vec![
                SweepAxis::linear("J_m", 0.0, 0.2, steps),
                SweepAxis::linear("theta", 0.0, 4.0 * PI, steps),
            ],
        ),
        grid(
            "thermal_hopping",
            thermal,
            vec![
                SweepAxis::linear("n_th", 0.0, 300.0, steps),
                SweepAxis::linear("J_m", 0.0, 0.2, steps),
            ],
        ),
        grid(
            "hopping_phase_discord",
            discord_base,
            vec![
                SweepAxis::linear("J_m", 0.0, 0.2, steps),
                SweepAxis::linear("theta", 0.0, 4.0 * PI, steps),
            ],
        ),
        grid(
            "thermal_hopping_discord",
            thermal_discord,
            vec![
                SweepAxis::linear("n_th", 0.0, 300.0, steps),
                SweepAxis::linear("J_m", 0.0, 0.2, steps),
            ],
        ),
    ]
}
