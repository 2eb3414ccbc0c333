//! Point-process part of the quasi log-likelihood,
//! `l1 = sum_i { int log lambda^i dN^i - int lambda^i dt }`.
//!
//! The log term is accumulated through the excitation recursion at event
//! times and the compensator is evaluated in closed form. For scalar
//! kernels the recursion also carries `S_ijl(t) = sum_k (t - t_k) e^{-beta_ij (t - t_k)} phi_l(x_k)`,
//! which is `-d/dbeta` of the excitation sum `R_ijl` and gives the decay gradient.

use nalgebra::DMatrix;

use super::{gather, Objective};
use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::model::{decay_matrix, Coord, KernelSpec, Layout, ModelParams};

pub(super) fn check_compatible(log: &EventLog, params: &ModelParams) -> Result<()> {
    if log.dim() != params.dim() {
        return Err(Error::InvalidArgument(format!(
            "event log has dimension {} but the model has {}",
            log.dim(),
            params.dim()
        )));
    }
    if log.mark_dim() != params.mark_dim() {
        return Err(Error::MarkDimension { expected: params.mark_dim(), got: log.mark_dim() });
    }
    Ok(())
}

/// Value of `l1` and its gradient over the coordinates of `layout`.
///
/// The value is `-inf` when some intensity at an event is not positive;
/// parameters are otherwise not range-checked, so the function can be probed
/// slightly outside the admissible box.
pub fn loglik_point(log: &EventLog, params: &ModelParams, layout: &Layout) -> Result<Objective> {
    check_compatible(log, params)?;
    for &c in layout.coords() {
        if params.get(c).is_none() {
            return Err(Error::InvalidArgument(format!(
                "{} is not a free coordinate of this model",
                params.coord_name(c)
            )));
        }
        if let Coord::Coef { i, j, .. } = c {
            if params.is_nuisance_edge(i, j) {
                return Err(Error::InvalidArgument(format!(
                    "{} sits on an edge whose decay is nuisance",
                    params.coord_name(c)
                )));
            }
        }
    }
    match params.kernel() {
        KernelSpec::ScalarExp { .. } => Ok(scalar(log, params, layout)),
        KernelSpec::MatrixExp { .. } => matrix(log, params, layout),
    }
}

fn features(params: &ModelParams, mark: Option<&[f64]>) -> Vec<f64> {
    match mark {
        Some(x) if params.is_marked() => x.to_vec(),
        _ => vec![1.0],
    }
}

fn scalar(log: &EventLog, params: &ModelParams, layout: &Layout) -> Objective {
    let d = params.dim();
    let nl = params.feature_dim();
    let horizon = log.horizon();
    let mu = params.mu();
    let betas: Vec<Option<f64>> = (0..d * d).map(|e| params.beta(e / d, e % d)).collect();

    let mut value = 0.0;
    let mut g_mu = vec![0.0; d];
    let mut g_coef = vec![0.0; d * d * nl];
    let mut g_beta = vec![0.0; d * d];

    let mut r = vec![0.0; d * d * nl];
    let mut s = vec![0.0; d * d * nl];
    let mut t_prev = 0.0;
    let mut finite = true;

    for ev in log.events() {
        let dt = ev.time - t_prev;
        for (e, b) in betas.iter().enumerate() {
            if let Some(b) = b {
                let f = (-b * dt).exp();
                for k in e * nl..(e + 1) * nl {
                    s[k] = f * (s[k] + dt * r[k]);
                    r[k] *= f;
                }
            }
        }
        let i = ev.component;
        let mut lambda = mu[i];
        for j in 0..d {
            let e = i * d + j;
            if betas[e].is_some() {
                let c = params.coef(i, j);
                lambda += (0..nl).map(|l| c[l] * r[e * nl + l]).sum::<f64>();
            }
        }
        if !(lambda > 0.0) {
            finite = false;
        } else {
            value += lambda.ln();
            let inv = 1.0 / lambda;
            g_mu[i] += inv;
            for j in 0..d {
                let e = i * d + j;
                if betas[e].is_none() {
                    continue;
                }
                let c = params.coef(i, j);
                let mut dbeta = 0.0;
                for l in 0..nl {
                    g_coef[e * nl + l] += r[e * nl + l] * inv;
                    dbeta -= c[l] * s[e * nl + l];
                }
                g_beta[e] += dbeta * inv;
            }
        }
        let phi = features(params, ev.mark.as_deref());
        let j = ev.component;
        for i2 in 0..d {
            let e = i2 * d + j;
            for l in 0..nl {
                r[e * nl + l] += phi[l];
            }
        }
        t_prev = ev.time;
    }

    for i in 0..d {
        value -= mu[i] * horizon;
        g_mu[i] -= horizon;
    }
    for ev in log.events() {
        let j = ev.component;
        let phi = features(params, ev.mark.as_deref());
        let lag = horizon - ev.time;
        for i in 0..d {
            let e = i * d + j;
            let Some(b) = betas[e] else { continue };
            let ex = (-b * lag).exp();
            let one = -(-b * lag).exp_m1();
            let c = params.coef(i, j);
            let dfac = -one / (b * b) + lag * ex / b;
            let mut weight = 0.0;
            for l in 0..nl {
                let a = phi[l] * one / b;
                value -= c[l] * a;
                g_coef[e * nl + l] -= a;
                weight += c[l] * phi[l];
            }
            g_beta[e] -= weight * dfac;
        }
    }

    if !finite {
        value = f64::NEG_INFINITY;
    }
    let gradient = gather(layout, d, nl, &g_mu, &g_coef, &g_beta, &[]);
    Objective { value, gradient }
}

fn matrix(log: &EventLog, params: &ModelParams, layout: &Layout) -> Result<Objective> {
    let KernelSpec::MatrixExp { order, a, b, .. } = params.kernel() else { unreachable!() };
    let d = params.dim();
    let p = *order;
    let horizon = log.horizon();
    let mu = params.mu();

    let mut value = 0.0;
    let mut g_mu = vec![0.0; d];
    let mut g_a = vec![DMatrix::<f64>::zeros(p, p); d * d];
    let mut e = vec![DMatrix::<f64>::zeros(p, p); d * d];
    let mut t_prev = 0.0;
    let mut finite = true;

    for ev in log.events() {
        let dt = ev.time - t_prev;
        if dt > 0.0 {
            for k in 0..d * d {
                if e[k].iter().any(|&v| v != 0.0) {
                    e[k] = decay_matrix(&b[k], dt) * &e[k];
                }
            }
        }
        let i = ev.component;
        let lambda = mu[i] + (0..d).map(|j| a[i * d + j].dot(&e[i * d + j])).sum::<f64>();
        if !(lambda > 0.0) {
            finite = false;
        } else {
            value += lambda.ln();
            g_mu[i] += 1.0 / lambda;
            for j in 0..d {
                g_a[i * d + j] += &e[i * d + j] / lambda;
            }
        }
        let j = ev.component;
        for i2 in 0..d {
            let g = params.excitation_weight(i2, j, ev.mark.as_deref());
            for r in 0..p {
                e[i2 * d + j][(r, r)] += g;
            }
        }
        t_prev = ev.time;
    }

    let binv: Vec<DMatrix<f64>> = b
        .iter()
        .map(|m| m.clone().try_inverse().ok_or_else(|| Error::InvalidParams("decay matrix is singular".into())))
        .collect::<Result<_>>()?;
    let eye = DMatrix::<f64>::identity(p, p);
    for i in 0..d {
        value -= mu[i] * horizon;
        g_mu[i] -= horizon;
    }
    for ev in log.events() {
        let j = ev.component;
        for i in 0..d {
            let k = i * d + j;
            let g = params.excitation_weight(i, j, ev.mark.as_deref());
            if g == 0.0 {
                continue;
            }
            let integrated = &binv[k] * (&eye - decay_matrix(&b[k], horizon - ev.time)) * g;
            value -= a[k].dot(&integrated);
            g_a[k] -= integrated;
        }
    }
    if !finite {
        value = f64::NEG_INFINITY;
    }
    let gradient = gather(layout, d, 1, &g_mu, &[], &[], &g_a);
    Ok(Objective { value, gradient })
}
