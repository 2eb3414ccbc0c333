//! Branching matrix `Phi` and the stability diagnostics built on it.

use nalgebra::{DMatrix, DVector};

use super::params::{KernelSpec, ModelParams};
use crate::error::{Error, Result};

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;
const EIGEN_FALLBACK_MAX_DIM: usize = 16;

/// `Phi_ij` is the expected number of direct offspring of type `i` produced by
/// one event of type `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMatrix {
    phi: DMatrix<f64>,
}

impl BranchingMatrix {
    pub fn from_matrix(phi: DMatrix<f64>) -> Result<Self> {
        if !phi.is_square() {
            return Err(Error::InvalidArgument("branching matrix must be square".into()));
        }
        Ok(Self { phi })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }
}

/// Integrated kernel per edge. Marked models need the mean of the stationary
/// mark law to average the jump sizes.
pub fn branching_matrix(params: &ModelParams, mark_mean: Option<&[f64]>) -> Result<BranchingMatrix> {
    let d = params.dim();
    let needs_mean = match params.kernel() {
        KernelSpec::ScalarExp { .. } => params.is_marked(),
        KernelSpec::MatrixExp { mark_weights, .. } => mark_weights.is_some(),
    };
    if needs_mean {
        match mark_mean {
            None => return Err(Error::InvalidArgument("marked model needs the stationary mark mean".into())),
            Some(m) if m.len() != params.mark_dim() => {
                return Err(Error::MarkDimension { expected: params.mark_dim(), got: m.len() })
            }
            _ => {}
        }
    }
    let mean = if needs_mean { mark_mean } else { None };
    let mut phi = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let g = params.excitation_weight(i, j, mean);
            phi[(i, j)] = match params.kernel() {
                KernelSpec::ScalarExp { .. } => match params.beta(i, j) {
                    Some(b) if g != 0.0 => g / b,
                    _ => 0.0,
                },
                KernelSpec::MatrixExp { a, b, .. } => {
                    let binv = b[i * d + j]
                        .clone()
                        .try_inverse()
                        .ok_or_else(|| Error::InvalidParams("decay matrix is singular".into()))?;
                    a[i * d + j].dot(&binv) * g
                }
            };
        }
    }
    Ok(BranchingMatrix { phi })
}

/// Largest eigenvalue modulus of `Phi`. Power iteration first; if it does not
/// settle (periodic or near-degenerate spectra), a full eigen-decomposition is
/// used for `d <= 16`.
pub fn spectral_radius(phi: &BranchingMatrix) -> Result<f64> {
    let m = &phi.phi;
    let d = m.nrows();
    if d == 0 {
        return Ok(0.0);
    }
    if let Some(r) = power_iteration(m) {
        return Ok(r);
    }
    if d <= EIGEN_FALLBACK_MAX_DIM {
        return Ok(m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Err(Error::NoConvergence(POWER_MAX_ITER))
}

fn power_iteration(m: &DMatrix<f64>) -> Option<f64> {
    let d = m.nrows();
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let w = m * &v;
        let r = w.norm();
        if r == 0.0 {
            return Some(0.0);
        }
        // stop well below the target so slow geometric convergence still lands within it
        let settled = (r - prev).abs() <= 1e-3 * POWER_TOL * r;
        let next = w / r;
        if settled {
            // the norm ratio can plateau on non-eigenvectors; require a small residual too
            let residual = (m * &next - &next * r).norm();
            if residual <= 1e3 * POWER_TOL * r.max(m.norm()) {
                return Some(r);
            }
        }
        prev = r;
        v = next;
    }
    None
}

/// Long-run event rates `lambda_bar = (I - Phi)^{-1} mu` of a stable model.
pub fn stationary_mean_intensity(params: &ModelParams, mark_mean: Option<&[f64]>) -> Result<Vec<f64>> {
    let phi = branching_matrix(params, mark_mean)?;
    let rho = spectral_radius(&phi)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let d = params.dim();
    let lhs = DMatrix::identity(d, d) - phi.matrix();
    let rhs = DVector::from_column_slice(params.mu());
    let sol = lhs.lu().solve(&rhs).ok_or(Error::Unstable(rho))?;
    Ok(sol.iter().copied().collect())
}
