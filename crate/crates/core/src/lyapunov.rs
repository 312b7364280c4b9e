//! Routh–Hurwitz stability of the drift matrix and the steady-state
//! covariance from `A V + V Aᵀ = -D`.

use nalgebra::{Complex, DMatrix, DVector, Matrix2, Matrix6, SMatrix, SymmetricEigen};
use thiserror::Error;

/// Largest admissible spectral abscissa of a stable drift matrix.
pub const STABILITY_EPS: f64 = 1e-9;
/// Relative residual bound every accepted solve must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Pivot ratio below which the vectorized Lyapunov operator counts as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Number of independent entries of a symmetric 6×6 matrix.
const SYM_DIM: usize = 21;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("matrix `{0}` has non-finite entries")]
    NonFinite(&'static str),
    #[error("drift matrix is not stable (spectral abscissa {margin:e})")]
    UnstableSystem { margin: f64 },
    #[error("Lyapunov operator is numerically singular (pivot ratio {pivot_ratio:e})")]
    SingularSystem { pivot_ratio: f64 },
    #[error("Lyapunov residual {residual:e} exceeds bound {bound:e}")]
    Inaccurate { residual: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, LyapunovError>;

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    /// Maximum real part over the eigenvalues of A.
    pub margin: f64,
    pub eigenvalues: [Complex<f64>; 6],
}

pub fn check_stability(a: &Matrix6<f64>) -> Result<StabilityReport> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(LyapunovError::NonFinite("A"));
    }
    let eig = a.complex_eigenvalues();
    let mut eigenvalues = [Complex::new(0.0, 0.0); 6];
    eigenvalues.copy_from_slice(eig.as_slice());
    eigenvalues.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let margin = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport {
        stable: margin < -STABILITY_EPS,
        margin,
        eigenvalues,
    })
}

/// Symplectic form of three modes, `⊕ [[0, 1], [-1, 0]]`.
pub fn symplectic_form() -> Matrix6<f64> {
    let mut omega = Matrix6::zeros();
    for k in 0..3 {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Steady-state covariance matrix together with its Lyapunov residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceMatrix {
    pub v: Matrix6<f64>,
    /// Frobenius norm of `A V + V Aᵀ + D`.
    pub residual: f64,
}

impl CovarianceMatrix {
    pub fn block(&self, row_offset: usize, col_offset: usize) -> Matrix2<f64> {
        self.v.fixed_view::<2, 2>(row_offset, col_offset).into_owned()
    }

    pub fn max_asymmetry(&self) -> f64 {
        (self.v - self.v.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.v.symmetric_part())
            .eigenvalues
            .min()
    }

    /// Smallest eigenvalue of the Hermitian matrix `V + iΩ/2`; negative values
    /// violate the uncertainty principle.
    ///
    /// Uses the real embedding `[[V, -Ω/2], [Ω/2, V]]`, whose spectrum is that
    /// of `V + iΩ/2` with every eigenvalue doubled in multiplicity.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let half_omega = symplectic_form() * 0.5;
        let v = self.v.symmetric_part();
        let mut embed = SMatrix::<f64, 12, 12>::zeros();
        embed.fixed_view_mut::<6, 6>(0, 0).copy_from(&v);
        embed.fixed_view_mut::<6, 6>(6, 6).copy_from(&v);
        embed.fixed_view_mut::<6, 6>(0, 6).copy_from(&(-half_omega));
        embed.fixed_view_mut::<6, 6>(6, 0).copy_from(&half_omega);
        SymmetricEigen::new(embed).eigenvalues.min()
    }
}

fn sym_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row-major over the upper triangle
    i * 6 - i * (i + 1) / 2 + j
}

pub fn lyapunov_residual(a: &Matrix6<f64>, d: &Matrix6<f64>, v: &Matrix6<f64>) -> f64 {
    (a * v + v * a.transpose() + d).norm()
}

/// Solves `A V + V Aᵀ = -D` for symmetric `V` as a dense 21×21 linear system
/// over the upper triangle.
pub fn solve_steady_lyapunov(a: &Matrix6<f64>, d: &Matrix6<f64>) -> Result<CovarianceMatrix> {
    if d.iter().any(|x| !x.is_finite()) {
        return Err(LyapunovError::NonFinite("D"));
    }
    let report = check_stability(a)?;
    if !report.stable {
        return Err(LyapunovError::UnstableSystem {
            margin: report.margin,
        });
    }

    // (A V + V Aᵀ)_{pq} = Σ_k A_pk V_kq + A_qk V_pk
    let mut op = DMatrix::<f64>::zeros(SYM_DIM, SYM_DIM);
    let mut rhs = DVector::<f64>::zeros(SYM_DIM);
    for p in 0..6 {
        for q in p..6 {
            let row = sym_index(p, q);
            for k in 0..6 {
                op[(row, sym_index(k, q))] += a[(p, k)];
                op[(row, sym_index(p, k))] += a[(q, k)];
            }
            rhs[row] = -0.5 * (d[(p, q)] + d[(q, p)]);
        }
    }

    let lu = op.full_piv_lu();
    let pivots = lu.u().diagonal().map(f64::abs);
    let pivot_ratio = pivots.min() / pivots.max();
    if !(pivot_ratio > SINGULAR_PIVOT_RATIO) {
        return Err(LyapunovError::SingularSystem { pivot_ratio });
    }
    let sol = lu
        .solve(&rhs)
        .ok_or(LyapunovError::SingularSystem { pivot_ratio })?;

    let v = Matrix6::from_fn(|i, j| sol[sym_index(i, j)]);
    let residual = lyapunov_residual(a, d, &v);
    let bound = RESIDUAL_TOL * (a.norm() * v.norm() + d.norm());
    if !(residual <= bound) {
        return Err(LyapunovError::Inaccurate { residual, bound });
    }
    Ok(CovarianceMatrix { v, residual })
}
