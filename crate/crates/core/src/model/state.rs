//! Elementary excitation state `(E_t, X_t)`.
//!
//! For `ScalarExp` kernels `E_ij` already includes the excitation coefficient,
//! i.e. it stores `sum_k g_ij(x_k) exp(-beta_ij (t - t_k))` over past events of
//! component `j`, so the intensity is `mu_i + sum_j E_ij`. For `MatrixExp`
//! kernels `E_ij = sum_k exp(-(t - t_k) B_ij) g_ij(x_k)` is a `p x p` matrix and
//! the intensity is `mu_i + sum_j <A_ij | E_ij>`.

use nalgebra::DMatrix;

use super::expm::decay_matrix;
use super::params::{KernelSpec, ModelParams};
use crate::error::{Error, Result};
use crate::marks::check_simplex;

#[derive(Debug, Clone, PartialEq)]
pub enum Excitation {
    Scalar(Vec<f64>),
    Matrix(Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationState {
    time: f64,
    excitation: Excitation,
    mark: Option<Vec<f64>>,
}

impl ExcitationState {
    /// Empty history at `t = 0`. Marked models start from the barycenter mark.
    pub fn new(params: &ModelParams) -> Self {
        let mark = params.is_marked().then(|| vec![1.0 / params.mark_dim() as f64; params.mark_dim()]);
        Self { time: 0.0, excitation: zero_excitation(params), mark }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn excitation(&self) -> &Excitation {
        &self.excitation
    }

    pub fn mark(&self) -> Option<&[f64]> {
        self.mark.as_deref()
    }

    /// Advance by `dt` with no event.
    pub fn decay(&self, params: &ModelParams, dt: f64) -> Result<Self> {
        let mut next = self.clone();
        next.decay_in_place(params, dt)?;
        Ok(next)
    }

    /// Register an event of component `j` (0-based) carrying `mark`.
    pub fn apply_jump(&self, params: &ModelParams, j: usize, mark: Option<&[f64]>) -> Result<Self> {
        let mut next = self.clone();
        next.jump_in_place(params, j, mark)?;
        Ok(next)
    }

    /// Conditional intensities `lambda^i` at the current time, given the
    /// events registered so far.
    pub fn intensity(&self, params: &ModelParams) -> Vec<f64> {
        let d = params.dim();
        let mu = params.mu();
        match (&self.excitation, params.kernel()) {
            (Excitation::Scalar(e), _) => (0..d).map(|i| mu[i] + e[i * d..(i + 1) * d].iter().sum::<f64>()).collect(),
            (Excitation::Matrix(e), KernelSpec::MatrixExp { a, .. }) => (0..d)
                .map(|i| mu[i] + (0..d).map(|j| a[i * d + j].dot(&e[i * d + j])).sum::<f64>())
                .collect(),
            (Excitation::Matrix(_), KernelSpec::ScalarExp { .. }) => {
                panic!("excitation state does not match the kernel form")
            }
        }
    }

    pub(crate) fn decay_in_place(&mut self, params: &ModelParams, dt: f64) -> Result<()> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("decay duration must be finite and >= 0, got {dt}")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let d = params.dim();
        match (&mut self.excitation, params.kernel()) {
            (Excitation::Scalar(e), KernelSpec::ScalarExp { beta, .. }) => {
                for (ek, bk) in e.iter_mut().zip(beta) {
                    if let Some(b) = bk {
                        *ek *= (-b * dt).exp();
                    }
                }
            }
            (Excitation::Matrix(e), KernelSpec::MatrixExp { b, .. }) => {
                for k in 0..d * d {
                    if e[k].iter().any(|&v| v != 0.0) {
                        e[k] = decay_matrix(&b[k], dt) * &e[k];
                    }
                }
            }
            _ => panic!("excitation state does not match the kernel form"),
        }
        self.time += dt;
        Ok(())
    }

    pub(crate) fn jump_in_place(&mut self, params: &ModelParams, j: usize, mark: Option<&[f64]>) -> Result<()> {
        let d = params.dim();
        if j >= d {
            return Err(Error::ComponentOutOfRange { component: j, dim: d });
        }
        match (params.is_marked(), mark) {
            (true, Some(x)) => check_simplex(x, params.mark_dim())?,
            (true, None) => return Err(Error::MarkDimension { expected: params.mark_dim(), got: 0 }),
            (false, Some(x)) => return Err(Error::MarkDimension { expected: 0, got: x.len() }),
            (false, None) => {}
        }
        match &mut self.excitation {
            Excitation::Scalar(e) => {
                for i in 0..d {
                    e[i * d + j] += params.excitation_weight(i, j, mark);
                }
            }
            Excitation::Matrix(e) => {
                for i in 0..d {
                    let g = params.excitation_weight(i, j, mark);
                    for r in 0..e[i * d + j].nrows() {
                        e[i * d + j][(r, r)] += g;
                    }
                }
            }
        }
        if let Some(x) = mark {
            self.mark = Some(x.to_vec());
        }
        Ok(())
    }
}

fn zero_excitation(params: &ModelParams) -> Excitation {
    let d = params.dim();
    match params.kernel() {
        KernelSpec::ScalarExp { .. } => Excitation::Scalar(vec![0.0; d * d]),
        KernelSpec::MatrixExp { order, .. } => Excitation::Matrix(vec![DMatrix::zeros(*order, *order); d * d]),
    }
}
