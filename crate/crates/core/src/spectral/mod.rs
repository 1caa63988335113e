//! Spectra, Green's functions, the weighted offset norm and the cube classifier.

mod classify;
mod sobolev;
mod tensor;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use classify::{
    classify, classify_with_spectrum, pointwise_decay_check, singular_at, CubeClassification, NsThresholds, PointwiseDecay,
};
pub use sobolev::{
    default_c0, pointwise_from_norm, sobolev_norm, NormProfile, OffsetTable, DEFAULT_C0_CUTOFF,
};
pub use tensor::{minkowski_spectrum, pi_subsystems, spectral_mismatch, PiSplit};

/// Numerical thresholds of the spectral layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralTolerances {
    /// Relative eigen-residual bound (times the matrix max-row-sum norm).
    pub eig_tol: f64,
    /// `E` closer than this to the spectrum has no Green's function.
    pub singular_tol: f64,
    /// Bound on `||(H - E) G - I||_inf`.
    pub green_tol: f64,
}

impl Default for SpectralTolerances {
    fn default() -> Self {
        SpectralTolerances { eig_tol: 1e-9, singular_tol: 1e-12, green_tol: 1e-8 }
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    /// Column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    /// `max_k ||H v_k - λ_k v_k||_inf`.
    pub residual: f64,
}

impl SpectrumReport {
    /// `dist(E, σ(H))`.
    pub fn distance_to(&self, energy: f64) -> f64 {
        distance_to_spectrum(&self.eigenvalues, energy)
    }

    /// `max |V^T V - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let v = &self.eigenvectors;
        let gram = v.transpose() * v;
        (gram - DMatrix::identity(v.ncols(), v.ncols())).amax()
    }
}

/// Distance from `energy` to the nearest point of an ascending list.
pub fn distance_to_spectrum(sorted: &[f64], energy: f64) -> f64 {
    let idx = sorted.partition_point(|&l| l < energy);
    let above = sorted.get(idx).map(|l| l - energy);
    let below = idx.checked_sub(1).map(|i| energy - sorted[i]);
    match (below, above) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => f64::INFINITY,
    }
}

/// Max row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn check_square_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Precondition(format!("matrix not symmetric (defect {asym:e})")));
    }
    Ok(())
}

/// Symmetric eigensolve with ascending eigenvalues and the eigen-residual.
pub fn eigenpairs(m: &DMatrix<f64>) -> Result<SpectrumReport> {
    check_square_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(SpectrumReport { eigenvalues: vec![], eigenvectors: DMatrix::zeros(0, 0), residual: 0.0 });
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    let av = m * &eigenvectors;
    let mut residual: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            residual = residual.max((av[(i, k)] - eigenvalues[k] * eigenvectors[(i, k)]).abs());
        }
    }
    Ok(SpectrumReport { eigenvalues, eigenvectors, residual })
}

/// [`eigenpairs`] plus the residual bound `eig_tol * ||H||_inf`.
pub fn checked_eigenpairs(m: &DMatrix<f64>, tol: &SpectralTolerances) -> Result<SpectrumReport> {
    let rep = eigenpairs(m)?;
    if rep.residual > tol.eig_tol * inf_norm(m).max(1.0) {
        return Err(Error::ConvergenceFailure);
    }
    Ok(rep)
}

/// `||(H - E) G - I||_inf`.
pub fn green_residual(m: &DMatrix<f64>, energy: f64, g: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let shifted = m - DMatrix::identity(n, n) * energy;
    inf_norm(&(shifted * g - DMatrix::identity(n, n)))
}

/// `(H - E)^{-1}` by LU, after checking `dist(E, σ(H)) > singular_tol`.
pub fn green(m: &DMatrix<f64>, energy: f64, tol: &SpectralTolerances) -> Result<DMatrix<f64>> {
    check_square_symmetric(m)?;
    let mut eigenvalues: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let distance = distance_to_spectrum(&eigenvalues, energy);
    if distance <= tol.singular_tol {
        return Err(Error::SingularEnergy { energy, distance });
    }
    let n = m.nrows();
    let g = (m - DMatrix::identity(n, n) * energy)
        .lu()
        .try_inverse()
        .ok_or(Error::SingularEnergy { energy, distance })?;
    let residual = green_residual(m, energy, &g);
    if residual > tol.green_tol {
        return Err(Error::InaccurateInverse { residual });
    }
    Ok(g)
}

/// `Σ_k v_k v_k^T / (λ_k - E)` from a finished eigendecomposition.
pub fn green_from_spectrum(rep: &SpectrumReport, energy: f64, tol: &SpectralTolerances) -> Result<DMatrix<f64>> {
    let distance = rep.distance_to(energy);
    if distance <= tol.singular_tol {
        return Err(Error::SingularEnergy { energy, distance });
    }
    let q = &rep.eigenvectors;
    let mut scaled = q.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col /= rep.eigenvalues[k] - energy;
    }
    Ok(scaled * q.transpose())
}
