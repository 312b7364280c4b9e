//! Monte Carlo estimate of the stationary covariance by integrating the
//! classical Langevin equation `du = A u dt + dW`, `E[dW dWᵀ] = D dt`.
//!
//! For linear dynamics the second moments of this classical process obey
//! `dV/dt = A V + V Aᵀ + D`, the same equation as the symmetrized quantum
//! covariance, so the ensemble statistics give an estimate of the Lyapunov
//! solution that shares no code with it.
//!
//! Two update rules are available. [`Scheme::EulerMaruyama`] is the plain
//! explicit step. Its stationary covariance carries an `O(dt)` bias that
//! grows like `dt·ω²/|margin|` for weakly damped oscillators.
//! [`Scheme::ExactDiscretization`] propagates with `e^{A dt}` and samples the
//! exactly integrated noise covariance (Van Loan's block exponential). It is
//! unbiased for any `dt`.
//!
//! Each trajectory owns the ChaCha stream numbered by its index, and the
//! per-trajectory sums are reduced in index order, so results do not depend on
//! how trajectories are scheduled over threads.

use nalgebra::{Matrix6, SMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lyapunov::{check_stability, LyapunovError};
use crate::model::LinearModel;

/// Euler–Maruyama headroom: `dt·‖A‖₂` must stay below this.
pub const EM_STEP_LIMIT: f64 = 0.1;
/// Burn-in must cover this many relaxation times `1/|margin|`.
pub const BURN_IN_RELAXATIONS: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("drift matrix is not stable (spectral abscissa {margin:e})")]
    UnstableSystem { margin: f64 },
    #[error("invalid oracle config `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
    ExactDiscretization,
}

fn default_batches() -> usize {
    20
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub n_traj: usize,
    pub dt: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Trajectory groups used for the batch-means standard error.
    #[serde(default = "default_batches")]
    pub n_batches: usize,
}

impl OracleConfig {
    /// Checks the config against a model with spectral abscissa `margin`.
    pub fn validate(&self, model: &LinearModel, margin: f64) -> Result<()> {
        let bad = |field, reason: String| Err(OracleError::Config { field, reason });
        if self.n_batches < 2 {
            return bad("n_batches", "need at least 2 batches".into());
        }
        if self.n_traj < self.n_batches {
            return bad(
                "n_traj",
                format!("{} trajectories cannot fill {} batches", self.n_traj, self.n_batches),
            );
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("{} is not a positive step", self.dt));
        }
        if !(self.t_sample >= self.dt && self.t_sample.is_finite()) {
            return bad("t_sample", format!("{} is shorter than one step", self.t_sample));
        }
        let min_burn = BURN_IN_RELAXATIONS / margin.abs();
        if !(self.t_burn >= min_burn) {
            return bad(
                "t_burn",
                format!("{} < {min_burn} (10 relaxation times)", self.t_burn),
            );
        }
        if self.scheme == Scheme::EulerMaruyama {
            let norm = spectral_norm(&model.drift);
            if self.dt * norm >= EM_STEP_LIMIT {
                return bad(
                    "dt",
                    format!("dt·‖A‖ = {} must be < {EM_STEP_LIMIT}", self.dt * norm),
                );
            }
        }
        Ok(())
    }

    fn burn_steps(&self) -> usize {
        (self.t_burn / self.dt).ceil() as usize
    }

    fn sample_steps(&self) -> usize {
        ((self.t_sample / self.dt).round() as usize).max(1)
    }
}

pub fn spectral_norm(a: &Matrix6<f64>) -> f64 {
    a.svd(false, false).singular_values.max()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    /// Time-and-ensemble averaged second moments.
    pub v: Matrix6<f64>,
    /// Batch-means standard error of each entry.
    pub stderr: Matrix6<f64>,
    pub samples_per_trajectory: usize,
}

/// One step `u ← M u + N ξ` with `ξ` standard normal.
struct Propagator {
    transition: [[f64; 6]; 6],
    /// Lower-triangular noise factor.
    noise: [[f64; 6]; 6],
}

impl Propagator {
    fn euler_maruyama(model: &LinearModel, dt: f64) -> Self {
        let transition = Matrix6::identity() + model.drift * dt;
        let noise = Matrix6::from_diagonal(&model.diffusion.diagonal().map(|d| (d * dt).sqrt()));
        Self {
            transition: to_rows(&transition),
            noise: to_rows(&noise),
        }
    }

    fn exact(model: &LinearModel, dt: f64) -> Self {
        // exp([[-A, D], [0, Aᵀ]] dt) = [[·, F12], [0, F22]], with
        // F22 = e^{Aᵀ dt} and Q(dt) = F22ᵀ F12.
        let a = model.drift;
        let mut block = SMatrix::<f64, 12, 12>::zeros();
        block.fixed_view_mut::<6, 6>(0, 0).copy_from(&(-a * dt));
        block.fixed_view_mut::<6, 6>(0, 6).copy_from(&(model.diffusion * dt));
        block.fixed_view_mut::<6, 6>(6, 6).copy_from(&(a.transpose() * dt));
        let e = block.exp();
        let f22: Matrix6<f64> = e.fixed_view::<6, 6>(6, 6).into_owned();
        let f12: Matrix6<f64> = e.fixed_view::<6, 6>(0, 6).into_owned();
        let transition = f22.transpose();
        let q = (transition * f12).symmetric_part();
        let noise = match q.cholesky() {
            Some(ch) => ch.l(),
            None => {
                // rounding can leave Q a hair indefinite when D is tiny
                let eig = SymmetricEigen::new(q);
                let root = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
                eig.eigenvectors * Matrix6::from_diagonal(&root)
            }
        };
        Self {
            transition: to_rows(&transition),
            noise: to_rows(&noise),
        }
    }

    #[inline]
    fn step(&self, u: &mut [f64; 6], rng: &mut ChaCha8Rng) {
        let mut xi = [0.0; 6];
        for x in xi.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let mut next = [0.0; 6];
        for (r, out) in next.iter_mut().enumerate() {
            let m = &self.transition[r];
            let n = &self.noise[r];
            let mut acc = 0.0;
            for c in 0..6 {
                acc += m[c] * u[c] + n[c] * xi[c];
            }
            *out = acc;
        }
        *u = next;
    }
}

fn to_rows(m: &Matrix6<f64>) -> [[f64; 6]; 6] {
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

const TRI: usize = 21;

fn run_trajectory(prop: &Propagator, cfg: &OracleConfig, index: usize) -> [f64; TRI] {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mut u = [0.0; 6];
    for _ in 0..cfg.burn_steps() {
        prop.step(&mut u, &mut rng);
    }
    let n = cfg.sample_steps();
    let mut acc = [0.0; TRI];
    for _ in 0..n {
        prop.step(&mut u, &mut rng);
        let mut k = 0;
        for i in 0..6 {
            for j in i..6 {
                acc[k] += u[i] * u[j];
                k += 1;
            }
        }
    }
    acc.map(|x| x / n as f64)
}

fn unpack(tri: &[f64; TRI]) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            m[(i, j)] = tri[k];
            m[(j, i)] = tri[k];
            k += 1;
        }
    }
    m
}

/// Empirical stationary covariance of the linear Langevin dynamics.
pub fn estimate_covariance(model: &LinearModel, cfg: &OracleConfig) -> Result<OracleEstimate> {
    let stability = check_stability(&model.drift)?;
    if !stability.stable {
        return Err(OracleError::UnstableSystem {
            margin: stability.margin,
        });
    }
    cfg.validate(model, stability.margin)?;
    let prop = match cfg.scheme {
        Scheme::EulerMaruyama => Propagator::euler_maruyama(model, cfg.dt),
        Scheme::ExactDiscretization => Propagator::exact(model, cfg.dt),
    };

    let per_traj: Vec<[f64; TRI]> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| run_trajectory(&prop, cfg, i))
        .collect();

    // Contiguous batches; the first `extra` batches get one more trajectory.
    let base = cfg.n_traj / cfg.n_batches;
    let extra = cfg.n_traj % cfg.n_batches;
    let mut batch_means = Vec::with_capacity(cfg.n_batches);
    let mut total = [0.0; TRI];
    let mut start = 0;
    for b in 0..cfg.n_batches {
        let len = base + usize::from(b < extra);
        let mut sum = [0.0; TRI];
        for traj in &per_traj[start..start + len] {
            for k in 0..TRI {
                sum[k] += traj[k];
                total[k] += traj[k];
            }
        }
        batch_means.push(unpack(&sum.map(|x| x / len as f64)));
        start += len;
    }
    let v = unpack(&total.map(|x| x / cfg.n_traj as f64));

    let nb = cfg.n_batches as f64;
    let batch_avg = batch_means.iter().fold(Matrix6::zeros(), |acc, m| acc + m) / nb;
    let var = batch_means.iter().fold(Matrix6::zeros(), |acc, m| {
        let d = m - batch_avg;
        acc + d.component_mul(&d)
    }) / (nb - 1.0);
    let stderr = var.map(|x| (x / nb).sqrt());

    Ok(OracleEstimate {
        v,
        stderr,
        samples_per_trajectory: cfg.sample_steps(),
    })
}
