//! Least-squares contrast `R_T = (1/T) sum_i { int lambda_i^2 dt - 2 int lambda_i dN_i }`
//! for unmarked exponential models.
//!
//! Between events every excitation term decays as `R e^{-beta s}`, so the
//! integrals of `lambda^2` over an inter-event interval reduce to
//! `I0(c, h) = int_0^h e^{-cs} ds` and, for the decay gradient,
//! `I1(c, h) = int_0^h s e^{-cs} ds`.

use nalgebra::{DMatrix, DVector};

use super::point::check_compatible;
use super::{gather, Objective};
use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::model::{KernelSpec, Layout, ModelParams};

fn i0(c: f64, h: f64) -> f64 {
    if c * h < 1e-300 {
        return h;
    }
    -(-c * h).exp_m1() / c
}

fn i1(c: f64, h: f64) -> f64 {
    let x = c * h;
    if x < 0.1 {
        // 1 - e^{-x}(1 + x) = sum_{n>=2} (-1)^n (n - 1) x^n / n!
        let mut term = x * x / 2.0;
        let mut sum = 0.0;
        for n in 2..30 {
            sum += (n - 1) as f64 * term;
            term *= -x / (n + 1) as f64;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum / (c * c);
    }
    (1.0 - (-x).exp() * (1.0 + x)) / (c * c)
}

fn require_unmarked_scalar(params: &ModelParams) -> Result<()> {
    match params.kernel() {
        KernelSpec::ScalarExp { .. } if !params.is_marked() => Ok(()),
        _ => Err(Error::Unsupported("the least-squares contrast is implemented for unmarked exponential kernels".into())),
    }
}

/// `R_T` and its gradient in `(mu, alpha, beta)`.
pub fn least_squares(log: &EventLog, params: &ModelParams, layout: &Layout) -> Result<Objective> {
    require_unmarked_scalar(params)?;
    check_compatible(log, params)?;
    for &c in layout.coords() {
        if params.get(c).is_none() {
            return Err(Error::InvalidArgument(format!("{} is not a free coordinate", params.coord_name(c))));
        }
    }
    let d = params.dim();
    let horizon = log.horizon();
    if horizon <= 0.0 {
        return Err(Error::InvalidArgument("least squares needs a positive horizon".into()));
    }
    let mu = params.mu();
    let alpha: Vec<f64> = (0..d * d).map(|e| if params.beta(e / d, e % d).is_some() { params.coef(e / d, e % d)[0] } else { 0.0 }).collect();
    let beta: Vec<f64> = (0..d * d).map(|e| params.beta(e / d, e % d).unwrap_or(1.0)).collect();
    let live: Vec<bool> = (0..d * d).map(|e| params.beta(e / d, e % d).is_some()).collect();

    let mut value = 0.0;
    let mut g_mu = vec![0.0; d];
    let mut g_alpha = vec![0.0; d * d];
    let mut g_beta = vec![0.0; d * d];
    let mut r = vec![0.0; d * d];
    let mut s = vec![0.0; d * d];

    let integrate = |h: f64, r: &[f64], s: &[f64], value: &mut f64, g_mu: &mut [f64], g_alpha: &mut [f64], g_beta: &mut [f64]| {
        if h <= 0.0 {
            return;
        }
        for i in 0..d {
            let m = mu[i];
            *value += m * m * h;
            g_mu[i] += 2.0 * m * h;
            for j in 0..d {
                let e = i * d + j;
                if !live[e] || r[e] == 0.0 && s[e] == 0.0 {
                    continue;
                }
                let b = beta[e];
                let (z0, z1) = (i0(b, h), i1(b, h));
                *value += 2.0 * m * alpha[e] * r[e] * z0;
                g_mu[i] += 2.0 * alpha[e] * r[e] * z0;
                g_alpha[e] += 2.0 * m * r[e] * z0;
                g_beta[e] -= 2.0 * m * alpha[e] * (s[e] * z0 + r[e] * z1);
                for k in 0..d {
                    let f = i * d + k;
                    if !live[f] || r[f] == 0.0 {
                        continue;
                    }
                    let c = b + beta[f];
                    let (w0, w1) = (i0(c, h), i1(c, h));
                    *value += alpha[e] * alpha[f] * r[e] * r[f] * w0;
                    g_alpha[e] += 2.0 * alpha[f] * r[e] * r[f] * w0;
                    g_beta[e] -= 2.0 * alpha[e] * alpha[f] * (s[e] * r[f] * w0 + r[e] * r[f] * w1);
                }
            }
        }
    };

    let mut t_prev = 0.0;
    for ev in log.events() {
        let h = ev.time - t_prev;
        integrate(h, &r, &s, &mut value, &mut g_mu, &mut g_alpha, &mut g_beta);
        for e in 0..d * d {
            if live[e] {
                let f = (-beta[e] * h).exp();
                s[e] = f * (s[e] + h * r[e]);
                r[e] *= f;
            }
        }
        let i = ev.component;
        let mut lambda = mu[i];
        for j in 0..d {
            let e = i * d + j;
            if live[e] {
                lambda += alpha[e] * r[e];
                g_alpha[e] -= 2.0 * r[e];
                g_beta[e] += 2.0 * alpha[e] * s[e];
            }
        }
        value -= 2.0 * lambda;
        g_mu[i] -= 2.0;
        for i2 in 0..d {
            r[i2 * d + ev.component] += 1.0;
        }
        t_prev = ev.time;
    }
    integrate(horizon - t_prev, &r, &s, &mut value, &mut g_mu, &mut g_alpha, &mut g_beta);

    let scale = 1.0 / horizon;
    let gradient: Vec<f64> =
        gather(layout, d, 1, &g_mu, &g_alpha, &g_beta, &[]).into_iter().map(|g| g * scale).collect();
    Ok(Objective { value: value * scale, gradient })
}

/// Quadratic form of `R_T` in `(mu_i, alpha_i1, ..., alpha_id)` for fixed decays:
/// `R_T = (1/T) sum_i { x_i' G_i x_i - 2 b_i' x_i }`.
#[derive(Debug, Clone)]
pub struct LeastSquaresGram {
    horizon: f64,
    gram: Vec<DMatrix<f64>>,
    linear: Vec<DVector<f64>>,
}

impl LeastSquaresGram {
    /// `beta` is row-major `d x d`; `None` edges contribute no feature.
    pub fn new(log: &EventLog, beta: &[Option<f64>]) -> Result<Self> {
        let d = log.dim();
        if beta.len() != d * d {
            return Err(Error::InvalidArgument(format!("expected {} decays, got {}", d * d, beta.len())));
        }
        if log.mark_dim() != 0 {
            return Err(Error::Unsupported("the least-squares contrast is implemented for unmarked logs".into()));
        }
        if beta.iter().flatten().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidParams("decays must be positive".into()));
        }
        let horizon = log.horizon();
        if horizon <= 0.0 {
            return Err(Error::InvalidArgument("least squares needs a positive horizon".into()));
        }
        let mut gram = vec![DMatrix::zeros(d + 1, d + 1); d];
        let mut linear = vec![DVector::zeros(d + 1); d];
        let mut r = vec![0.0; d * d];

        let accumulate = |h: f64, r: &[f64], gram: &mut [DMatrix<f64>]| {
            if h <= 0.0 {
                return;
            }
            for i in 0..d {
                let g = &mut gram[i];
                g[(0, 0)] += h;
                for j in 0..d {
                    let Some(bj) = beta[i * d + j] else { continue };
                    let rj = r[i * d + j];
                    if rj == 0.0 {
                        continue;
                    }
                    let v = rj * i0(bj, h);
                    g[(0, j + 1)] += v;
                    g[(j + 1, 0)] += v;
                    for k in 0..d {
                        let Some(bk) = beta[i * d + k] else { continue };
                        let rk = r[i * d + k];
                        if rk != 0.0 {
                            g[(j + 1, k + 1)] += rj * rk * i0(bj + bk, h);
                        }
                    }
                }
            }
        };

        let mut t_prev = 0.0;
        for ev in log.events() {
            let h = ev.time - t_prev;
            accumulate(h, &r, &mut gram);
            for e in 0..d * d {
                if let Some(b) = beta[e] {
                    r[e] *= (-b * h).exp();
                }
            }
            let i = ev.component;
            linear[i][0] += 1.0;
            for j in 0..d {
                if beta[i * d + j].is_some() {
                    linear[i][j + 1] += r[i * d + j];
                }
            }
            for i2 in 0..d {
                r[i2 * d + ev.component] += 1.0;
            }
            t_prev = ev.time;
        }
        accumulate(horizon - t_prev, &r, &mut gram);
        Ok(Self { horizon, gram, linear })
    }

    pub fn dim(&self) -> usize {
        self.gram.len()
    }

    /// `R_T` and its gradient at `x` laid out as `mu` (d entries) followed
    /// by `alpha` row-major (d * d entries).
    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        assert_eq!(x.len(), d + d * d, "expected mu followed by alpha");
        let mut value = 0.0;
        let mut grad = vec![0.0; d + d * d];
        for i in 0..d {
            let mut xi = DVector::zeros(d + 1);
            xi[0] = x[i];
            for j in 0..d {
                xi[j + 1] = x[d + i * d + j];
            }
            let gx = &self.gram[i] * &xi;
            value += xi.dot(&gx) - 2.0 * self.linear[i].dot(&xi);
            let gi = (gx - &self.linear[i]) * 2.0;
            grad[i] = gi[0];
            for j in 0..d {
                grad[d + i * d + j] = gi[j + 1];
            }
        }
        let scale = 1.0 / self.horizon;
        (value * scale, grad.into_iter().map(|g| g * scale).collect())
    }

    /// Diagonal majorizer of the Hessian: `2 sum_k |G_i[r, k]| / T` per
    /// coordinate, in the `mu`-then-`alpha` layout.
    pub fn diagonal_majorizer(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d + d * d];
        for i in 0..d {
            let g = &self.gram[i];
            let row = |r: usize| 2.0 * (0..=d).map(|k| g[(r, k)].abs()).sum::<f64>() / self.horizon;
            out[i] = row(0);
            for j in 0..d {
                out[d + i * d + j] = row(j + 1);
            }
        }
        out
    }

    /// Lipschitz constant of the gradient, `2 max_i lambda_max(G_i) / T`.
    pub fn lipschitz(&self) -> f64 {
        let top = self
            .gram
            .iter()
            .map(|g| g.clone().symmetric_eigenvalues().iter().copied().fold(0.0, f64::max))
            .fold(0.0, f64::max);
        2.0 * top / self.horizon
    }
}
