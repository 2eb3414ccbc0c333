//! Mark transition kernels `Q_j(x, dy) = p_j(x, y) dy` on the simplex.
//!
//! Densities are taken with respect to Lebesgue measure on the first
//! `d' - 1` coordinates of the simplex.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Tolerance for membership of the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A user-supplied, possibly state-dependent mark kernel.
pub trait MarkTransition: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Draw the mark of an event of component `j` given the previous mark.
    fn sample(&self, x_prev: Option<&[f64]>, j: usize, rng: &mut dyn RngCore) -> Vec<f64>;
    fn log_density(&self, x_prev: Option<&[f64]>, x: &[f64], j: usize) -> f64;
    /// Mean of the stationary mark law, when known.
    fn stationary_mean(&self) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone)]
pub enum MarkKernel {
    None,
    /// Marks drawn i.i.d. from a Dirichlet law, independent of the past.
    IidDirichlet { concentration: Vec<f64> },
    Custom(Arc<dyn MarkTransition>),
}

impl PartialEq for MarkKernel {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (MarkKernel::None, MarkKernel::None) => true,
            (MarkKernel::IidDirichlet { concentration: a }, MarkKernel::IidDirichlet { concentration: b }) => a == b,
            (MarkKernel::Custom(a), MarkKernel::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl MarkKernel {
    pub fn dirichlet(concentration: Vec<f64>) -> Result<Self> {
        if concentration.len() < 2 {
            return Err(Error::InvalidParams("Dirichlet marks need at least two coordinates".into()));
        }
        if concentration.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
            return Err(Error::InvalidParams("Dirichlet concentrations must be positive".into()));
        }
        Ok(MarkKernel::IidDirichlet { concentration })
    }

    /// Mark dimension `d'`; 0 for unmarked models.
    pub fn dim(&self) -> usize {
        match self {
            MarkKernel::None => 0,
            MarkKernel::IidDirichlet { concentration } => concentration.len(),
            MarkKernel::Custom(k) => k.dim(),
        }
    }

    /// Mean of the stationary mark law.
    pub fn stationary_mean(&self) -> Option<Vec<f64>> {
        match self {
            MarkKernel::None => None,
            MarkKernel::IidDirichlet { concentration } => {
                let total: f64 = concentration.iter().sum();
                Some(concentration.iter().map(|a| a / total).collect())
            }
            MarkKernel::Custom(k) => k.stationary_mean(),
        }
    }

    /// Draw the mark of the next event of component `j`.
    pub fn sample_mark<R: Rng>(&self, x_prev: Option<&[f64]>, j: usize, rng: &mut R) -> Option<Vec<f64>> {
        match self {
            MarkKernel::None => None,
            MarkKernel::IidDirichlet { concentration } => Some(sample_dirichlet(concentration, rng)),
            MarkKernel::Custom(k) => Some(k.sample(x_prev, j, rng)),
        }
    }

    /// `log p_j(x_prev, x)`. Unmarked kernels contribute 0.
    pub fn log_mark_density(&self, x_prev: Option<&[f64]>, x: Option<&[f64]>, j: usize) -> Result<f64> {
        match (self, x) {
            (MarkKernel::None, None) => Ok(0.0),
            (MarkKernel::None, Some(x)) => Err(Error::MarkDimension { expected: 0, got: x.len() }),
            (_, None) => Err(Error::MarkDimension { expected: self.dim(), got: 0 }),
            (MarkKernel::IidDirichlet { concentration }, Some(x)) => {
                check_simplex(x, concentration.len())?;
                Ok(dirichlet_log_density(concentration, x))
            }
            (MarkKernel::Custom(k), Some(x)) => {
                check_simplex(x, k.dim())?;
                Ok(k.log_density(x_prev, x, j))
            }
        }
    }
}

fn sample_dirichlet<R: Rng>(concentration: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut draws: Vec<f64> = concentration
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("validated concentration").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        // all-zero draws only happen for tiny concentrations; redraw
        if total > 0.0 && total.is_finite() {
            draws.iter_mut().for_each(|v| *v /= total);
            return draws;
        }
    }
}

fn dirichlet_log_density(concentration: &[f64], x: &[f64]) -> f64 {
    let total: f64 = concentration.iter().sum();
    let norm = ln_gamma(total) - concentration.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    norm + concentration
        .iter()
        .zip(x)
        .map(|(&a, &v)| if a == 1.0 { 0.0 } else { (a - 1.0) * v.ln() })
        .sum::<f64>()
}

/// Components nonnegative and summing to one, both within [`SIMPLEX_TOL`].
pub fn check_simplex(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::MarkDimension { expected: dim, got: x.len() });
    }
    if x.iter().any(|&v| !v.is_finite() || v < -SIMPLEX_TOL) {
        return Err(Error::OffSimplex(format!("{x:?} has a negative or non-finite component")));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::OffSimplex(format!("{x:?} sums to {sum}")));
    }
    Ok(())
}
