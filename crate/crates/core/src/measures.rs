//! Bipartite Gaussian correlation measures of two-mode reductions of the
//! steady state: symplectic invariants, logarithmic negativity and Gaussian
//! quantum discord.
//!
//! Covariances use the convention in which the vacuum is `½·I`.

use std::fmt;

use nalgebra::{Matrix4, Matrix6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lyapunov::{CovarianceMatrix, StabilityReport};

/// Relative slack on square-root arguments before an input is declared
/// unphysical; scaled by the magnitude of the terms that cancel.
pub const PHYSICAL_SLACK: f64 = 1e-12;
/// Slack below `½` on entropy arguments. Nearly degenerate symplectic
/// eigenvalues are only determined to about `√ε_mach`, so near-pure states
/// land a few `1e-9` under `½`.
pub const ENTROPY_SLACK: f64 = 1e-7;
/// `|I3|` below which the discord branch test is treated as divergent.
pub const BRANCH_I3_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("non-physical covariance: {quantity} = {value:e}")]
    NonPhysicalInput { quantity: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, MeasureError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Optical,
    Acoustic,
    Mechanical,
}

impl Mode {
    /// Index of the mode's X quadrature in the state vector.
    pub fn offset(self) -> usize {
        match self {
            Mode::Optical => 0,
            Mode::Acoustic => 2,
            Mode::Mechanical => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pair {
    #[serde(rename = "om")]
    OpticalMechanical,
    #[serde(rename = "oa")]
    OpticalAcoustic,
    #[serde(rename = "ma")]
    MechanicalAcoustic,
}

impl Pair {
    pub const ALL: [Pair; 3] = [
        Pair::OpticalMechanical,
        Pair::OpticalAcoustic,
        Pair::MechanicalAcoustic,
    ];

    /// Modes in their canonical order; the first one plays the role of mode
    /// `i` in the discord formula.
    pub fn modes(self) -> (Mode, Mode) {
        match self {
            Pair::OpticalMechanical => (Mode::Optical, Mode::Mechanical),
            Pair::OpticalAcoustic => (Mode::Optical, Mode::Acoustic),
            Pair::MechanicalAcoustic => (Mode::Mechanical, Mode::Acoustic),
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Pair::OpticalMechanical => "om",
            Pair::OpticalAcoustic => "oa",
            Pair::MechanicalAcoustic => "ma",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Pair::ALL.into_iter().find(|p| p.code() == code)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Two-mode covariance `χ = [[V_i, V_ij], [V_ijᵀ, V_j]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bipartition {
    pub first: Mode,
    pub second: Mode,
    pub chi: Matrix4<f64>,
}

/// Reduced covariance of `pair`, in the pair's canonical mode order.
pub fn extract_bipartition(v: &CovarianceMatrix, pair: Pair) -> Bipartition {
    let (first, second) = pair.modes();
    extract_ordered(&v.v, first, second)
}

/// Reduced covariance with an explicit mode order, so both orderings of the
/// discord formula can be evaluated.
pub fn extract_ordered(v: &Matrix6<f64>, first: Mode, second: Mode) -> Bipartition {
    let idx = [
        first.offset(),
        first.offset() + 1,
        second.offset(),
        second.offset() + 1,
    ];
    Bipartition {
        first,
        second,
        chi: Matrix4::from_fn(|r, c| v[(idx[r], idx[c])]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invariants4 {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
}

pub fn symplectic_invariants(chi: &Matrix4<f64>) -> Invariants4 {
    Invariants4 {
        i1: chi.fixed_view::<2, 2>(0, 0).determinant(),
        i2: chi.fixed_view::<2, 2>(2, 2).determinant(),
        i3: chi.fixed_view::<2, 2>(0, 2).determinant(),
        i4: chi.determinant(),
    }
}

/// `√x`, clamping `x ∈ [-PHYSICAL_SLACK·max(1, scale), 0)` to zero.
fn checked_sqrt(quantity: &'static str, x: f64, scale: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x.sqrt())
    } else if x >= -PHYSICAL_SLACK * scale.abs().max(1.0) {
        Ok(0.0)
    } else {
        Err(MeasureError::NonPhysicalInput { quantity, value: x })
    }
}

/// Symplectic eigenvalues `2^{-1/2}[Δ ∓ √(Δ² - 4 I4)]^{1/2}` for a given
/// combination `Δ` of the invariants.
///
/// The smaller one is evaluated as `√(2 I4 / (Δ + √(Δ² - 4 I4)))`, which is
/// the same quantity without the cancellation.
fn symplectic_pair(delta: f64, i4: f64) -> Result<(f64, f64)> {
    let disc = checked_sqrt("Δ² - 4 I4", delta * delta - 4.0 * i4, delta * delta)?;
    let sum = delta + disc;
    if !(sum > 0.0) || i4 < 0.0 {
        return Err(MeasureError::NonPhysicalInput {
            quantity: if i4 < 0.0 { "I4" } else { "Δ" },
            value: if i4 < 0.0 { i4 } else { delta },
        });
    }
    let plus = (sum / 2.0).sqrt();
    let minus = (2.0 * i4 / sum).sqrt();
    Ok((minus, plus))
}

/// Smallest partially transposed symplectic eigenvalue `ν⁻` and the
/// logarithmic negativity `max[0, -ln 2ν⁻]`.
pub fn log_negativity(chi: &Matrix4<f64>) -> Result<(f64, f64)> {
    let inv = symplectic_invariants(chi);
    let delta = inv.i1 + inv.i2 - 2.0 * inv.i3;
    let (nu_minus, _) = symplectic_pair(delta, inv.i4)?;
    let en = if nu_minus < 0.5 {
        -(2.0 * nu_minus).ln()
    } else {
        0.0
    };
    Ok((nu_minus, en))
}

/// `f(x) = (x+½)ln(x+½) - (x-½)ln(x-½)`, with `0·ln 0 = 0` at `x = ½`.
pub fn entropy_fn(x: f64) -> Result<f64> {
    if !(x >= 0.5 - ENTROPY_SLACK) {
        return Err(MeasureError::NonPhysicalInput {
            quantity: "entropy argument",
            value: x,
        });
    }
    let x = x.max(0.5);
    let upper = (x + 0.5) * (x + 0.5).ln();
    let lower = if x > 0.5 {
        (x - 0.5) * (x - 0.5).ln()
    } else {
        0.0
    };
    Ok(upper - lower)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscordBranch {
    /// Condition `4(I1 I2 - I4)² / ((I2 + 4I4)(1 + 4I1) I3²) ≤ 1`.
    First,
    Second,
}

/// Both candidate values of the conditional-entropy argument `ε`, with the
/// value of the branch test; used to probe continuity at the branch boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonBranches {
    pub condition: f64,
    pub first: f64,
    pub second: f64,
}

pub fn epsilon_branches(inv: &Invariants4) -> EpsilonBranches {
    let Invariants4 { i1, i2, i3, i4 } = *inv;
    let condition = if i3.abs() < BRANCH_I3_FLOOR {
        f64::INFINITY
    } else {
        4.0 * (i1 * i2 - i4).powi(2) / ((i2 + 4.0 * i4) * (1.0 + 4.0 * i1) * i3 * i3)
    };
    let cross = (4.0 * i1 - 1.0) * (4.0 * i4 - i2);
    let root = checked_sqrt("ε radicand", 4.0 * i3 * i3 + cross, cross).unwrap_or(f64::NAN);
    let first = ((2.0 * i3.abs() + root) / (4.0 * i1 - 1.0)).powi(2);
    let q = i1 * i2 + i4 - i3 * i3;
    let second = (q - (q * q - 4.0 * i1 * i2 * i4).max(0.0).sqrt()) / (2.0 * i1);
    EpsilonBranches {
        condition,
        first,
        second,
    }
}

/// Gaussian quantum discord
/// `ε_QD = f(√I2) - f(η⁻) - f(η⁺) + f(√ε)` with `η±` built from
/// `I1 + I2 + 2 I3`.
///
/// The formula is taken verbatim, mode `i` being the first mode of `chi`.
/// For asymmetric product states (`I1 ≠ I2`, `I3 = 0`) it returns
/// `f(√I2) - f(√I1)`, not zero; swap the mode order to see the other value.
pub fn gaussian_discord(chi: &Matrix4<f64>) -> Result<(f64, DiscordBranch)> {
    let inv = symplectic_invariants(chi);
    let delta = inv.i1 + inv.i2 + 2.0 * inv.i3;
    let (eta_minus, eta_plus) = symplectic_pair(delta, inv.i4)?;
    let branches = epsilon_branches(&inv);
    let (eps, branch) = if branches.condition <= 1.0 {
        (branches.first, DiscordBranch::First)
    } else {
        (branches.second, DiscordBranch::Second)
    };
    if !eps.is_finite() {
        return Err(MeasureError::NonPhysicalInput {
            quantity: "ε",
            value: eps,
        });
    }
    let sqrt_i2 = checked_sqrt("I2", inv.i2, inv.i2)?;
    let sqrt_eps = checked_sqrt("ε", eps, eps)?;
    let qd = entropy_fn(sqrt_i2)? - entropy_fn(eta_minus)? - entropy_fn(eta_plus)?
        + entropy_fn(sqrt_eps)?;
    Ok((qd, branch))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub pair: Pair,
    pub nu_minus: f64,
    pub log_negativity: f64,
    pub discord: f64,
    pub branch: DiscordBranch,
}

pub fn correlation_report(cov: &CovarianceMatrix, pair: Pair) -> Result<CorrelationReport> {
    let bip = extract_bipartition(cov, pair);
    let (nu_minus, log_negativity) = log_negativity(&bip.chi)?;
    let (discord, branch) = gaussian_discord(&bip.chi)?;
    Ok(CorrelationReport {
        pair,
        nu_minus,
        log_negativity,
        discord,
        branch,
    })
}

/// All three bipartitions plus the solve diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FullReport {
    pub margin: f64,
    pub residual: f64,
    pub pairs: [CorrelationReport; 3],
}

impl FullReport {
    pub fn get(&self, pair: Pair) -> &CorrelationReport {
        self.pairs.iter().find(|r| r.pair == pair).expect("all pairs present")
    }
}

pub fn full_report(cov: &CovarianceMatrix, stability: &StabilityReport) -> Result<FullReport> {
    let [om, oa, ma] = Pair::ALL;
    Ok(FullReport {
        margin: stability.margin,
        residual: cov.residual,
        pairs: [
            correlation_report(cov, om)?,
            correlation_report(cov, oa)?,
            correlation_report(cov, ma)?,
        ],
    })
}
