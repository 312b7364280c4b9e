//! Steady-state quantum correlations of a three-mode Brillouin
//! optomechanical system: one optical mode coupled by radiation pressure to a
//! mechanical resonator and by Brillouin scattering to an acoustic mode, with
//! phase-modulated phonon hopping `J_m e^{±iθ}` between the two phonon modes.
//!
//! The pipeline is
//! [`model`] (drift and diffusion matrices) →
//! [`lyapunov`] (stability and steady covariance) →
//! [`measures`] (logarithmic negativity and Gaussian discord),
//! with [`experiments`] driving sweeps over it, [`oracle`] cross-checking the
//! covariance by Monte Carlo, and [`cli`] exposing everything on the command
//! line.

pub mod cli;
pub mod experiments;
pub mod lyapunov;
pub mod measures;
pub mod model;
pub mod oracle;

use thiserror::Error;

pub use experiments::{analyze_point, PointAnalysis};
pub use lyapunov::CovarianceMatrix;
pub use measures::{FullReport, Pair};
pub use model::{LinearModel, RawParams, SystemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Lyapunov(#[from] lyapunov::LyapunovError),
    #[error(transparent)]
    Measure(#[from] measures::MeasureError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error(transparent)]
    Sweep(#[from] experiments::SweepError),
}

impl Error {
    /// True for failures of the numerics on valid input, as opposed to
    /// rejected input.
    pub fn is_numerical(&self) -> bool {
        use lyapunov::LyapunovError as L;
        use oracle::OracleError as O;
        match self {
            Error::Model(model::ModelError::NonConvergence { .. })
            | Error::Model(model::ModelError::Calibration { .. }) => true,
            Error::Model(_) | Error::Sweep(_) => false,
            Error::Lyapunov(L::NonFinite(_)) => false,
            Error::Lyapunov(_) | Error::Measure(_) => true,
            Error::Oracle(O::Config { .. }) => false,
            Error::Oracle(O::UnstableSystem { .. }) => true,
            Error::Oracle(O::Lyapunov(l)) => !matches!(l, L::NonFinite(_)),
        }
    }
}
