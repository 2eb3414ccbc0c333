//! Elastic-net least squares for exponential models with known decays:
//!
//! ```text
//! minimize  R_T(mu, alpha) + C_e { (1 - rho_e) |alpha|_1 + rho_e |alpha|_2^2 / 2 }
//! ```
//!
//! over the nonnegative box, by accelerated proximal gradient with adaptive
//! restart. `mu` is not penalized. Steps are taken in the diagonal metric of
//! the Gram row sums, which dominates the Hessian and keeps the baseline and
//! excitation blocks on comparable scales.

use serde::{Deserialize, Serialize};

use super::Diagnostics;
use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::likelihood::LeastSquaresGram;
use crate::model::Bounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetOptions {
    /// Stop once successive iterates differ by at most this in sup norm.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Coefficients below this are reported as exactly zero.
    pub zero_snap: f64,
}

impl Default for ElasticNetOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 200_000, max_halvings: 60, zero_snap: 1e-8 }
    }
}

/// Solve the elastic-net problem. `x0` and the result are laid out as `mu`
/// followed by `alpha` row-major; `beta` is the known `d x d` decay matrix.
pub fn elastic_net_ls(
    log: &EventLog,
    c_e: f64,
    rho_e: f64,
    beta: &[Option<f64>],
    x0: &[f64],
    bounds: &Bounds,
    opts: &ElasticNetOptions,
) -> Result<(Vec<f64>, Diagnostics)> {
    if !(c_e >= 0.0 && c_e.is_finite()) {
        return Err(Error::InvalidArgument(format!("C_e must be finite and >= 0, got {c_e}")));
    }
    if !(0.0..=1.0).contains(&rho_e) {
        return Err(Error::InvalidArgument(format!("rho_e must lie in [0, 1], got {rho_e}")));
    }
    bounds.validate()?;
    let gram = LeastSquaresGram::new(log, beta)?;
    let d = gram.dim();
    if x0.len() != d + d * d {
        return Err(Error::InvalidArgument(format!("start has {} coordinates, expected {}", x0.len(), d + d * d)));
    }
    let l1 = c_e * (1.0 - rho_e);
    let l2 = c_e * rho_e;
    let live: Vec<bool> = (0..d * d).map(|e| beta[e].is_some()).collect();

    let smooth = |x: &[f64]| -> (f64, Vec<f64>) {
        let (mut v, mut g) = gram.value_and_gradient(x);
        for e in 0..d * d {
            let a = x[d + e];
            v += 0.5 * l2 * a * a;
            g[d + e] += l2 * a;
        }
        (v, g)
    };
    let penalty = |x: &[f64]| -> f64 { l1 * x[d..].iter().sum::<f64>() };
    let prox = |y: &[f64], g: &[f64], step: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        for i in 0..d {
            out[i] = (y[i] - step[i] * g[i]).clamp(bounds.mu.0, bounds.mu.1);
        }
        for e in 0..d * d {
            let k = d + e;
            out[k] = if live[e] {
                (y[k] - step[k] * (g[k] + l1)).clamp(bounds.coef.0.max(0.0), bounds.coef.1)
            } else {
                0.0
            };
        }
        out
    };

    let mut metric: Vec<f64> = gram.diagonal_majorizer();
    for (k, m) in metric.iter_mut().enumerate() {
        if k >= d {
            *m += l2;
        }
        *m = m.max(1e-12);
    }
    let mut x: Vec<f64> = prox(x0, &vec![0.0; x0.len()], &vec![0.0; x0.len()]);
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut converged = false;
    let mut objective = {
        evaluations += 1;
        smooth(&x).0 + penalty(&x)
    };

    while iterations < opts.max_iter {
        iterations += 1;
        let (fy, gy) = smooth(&y);
        evaluations += 1;
        let mut halvings = 0;
        let xn = loop {
            let step: Vec<f64> = metric.iter().map(|m| 1.0 / m).collect();
            let cand = prox(&y, &gy, &step);
            let (fc, _) = smooth(&cand);
            evaluations += 1;
            let diff: Vec<f64> = cand.iter().zip(&y).map(|(a, b)| a - b).collect();
            let model = fy
                + diff.iter().zip(&gy).map(|(a, b)| a * b).sum::<f64>()
                + 0.5 * diff.iter().zip(&metric).map(|(v, m)| m * v * v).sum::<f64>();
            if fc <= model + 1e-12 * fc.abs().max(1.0) {
                break cand;
            }
            halvings += 1;
            if halvings > opts.max_halvings {
                return Err(Error::Optimizer("elastic-net step size search failed".into()));
            }
            metric.iter_mut().for_each(|m| *m *= 2.0);
        };
        let obj_new = smooth(&xn).0 + penalty(&xn);
        evaluations += 1;
        let change = xn.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

        if obj_new > objective {
            // adaptive restart: drop momentum and redo from the last iterate
            momentum = 1.0;
            y = x.clone();
            if change <= opts.tol {
                converged = true;
                break;
            }
            continue;
        }
        let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let w = (momentum - 1.0) / next_momentum;
        y = xn.iter().zip(&x).map(|(a, b)| a + w * (a - b)).collect();
        momentum = next_momentum;
        x = xn;
        objective = obj_new;
        if change <= opts.tol {
            converged = true;
            break;
        }
    }

    for v in x[d..].iter_mut() {
        if *v < opts.zero_snap {
            *v = 0.0;
        }
    }
    let (fx, gx) = smooth(&x);
    let mut grad_norm: f64 = 0.0;
    for k in 0..x.len() {
        let (lo, hi) = if k < d { bounds.mu } else { (bounds.coef.0.max(0.0), bounds.coef.1) };
        let g = if k >= d { gx[k] + l1 } else { gx[k] };
        let moved = (x[k] - g).clamp(lo, hi);
        grad_norm = grad_norm.max((x[k] - moved).abs());
    }
    let active = (d..x.len()).filter(|&k| x[k] == 0.0).collect();
    let diagnostics = Diagnostics {
        iterations,
        evaluations,
        objective: -(fx + penalty(&x)),
        grad_norm,
        converged,
        active,
        message: if converged { "iterates settled".into() } else { "iteration limit reached".into() },
    };
    Ok((x, diagnostics))
}
