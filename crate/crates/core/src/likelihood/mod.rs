//! Quasi log-likelihood `l_T = l1 + l2` and the least-squares contrast `R_T`.

mod least_squares;
mod point;

use nalgebra::DMatrix;

pub use least_squares::{least_squares, LeastSquaresGram};
pub use point::loglik_point;

use crate::error::{Error, Result};
use crate::events::{Event, EventLog};
use crate::marks::MarkKernel;
use crate::model::{decay_matrix, Coord, Excitation, ExcitationState, KernelSpec, Layout, ModelParams};

/// Value and gradient over the coordinates of a [`Layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Pick the layout coordinates out of full per-block gradients.
fn gather(
    layout: &Layout,
    d: usize,
    nl: usize,
    g_mu: &[f64],
    g_coef: &[f64],
    g_beta: &[f64],
    g_a: &[DMatrix<f64>],
) -> Vec<f64> {
    layout
        .coords()
        .iter()
        .map(|&c| match c {
            Coord::Mu(i) => g_mu[i],
            Coord::Coef { i, j, l } => g_coef[(i * d + j) * nl + l],
            Coord::Beta { i, j } => g_beta[i * d + j],
            Coord::KernelA { i, j, r, c } => g_a[i * d + j][(r, c)],
        })
        .collect()
}

/// `l2`: sum of `log p_j(X_{n-1}, X_n)` over the events. The mark before the
/// first event is the barycenter.
pub fn loglik_mark(log: &EventLog, marks: &MarkKernel) -> Result<f64> {
    if log.mark_dim() != marks.dim() {
        return Err(Error::MarkDimension { expected: marks.dim(), got: log.mark_dim() });
    }
    let m = log.mark_dim();
    let mut prev: Option<Vec<f64>> = (m > 0).then(|| vec![1.0 / m as f64; m]);
    let mut total = 0.0;
    for ev in log.events() {
        total += marks.log_mark_density(prev.as_deref(), ev.mark.as_deref(), ev.component)?;
        if ev.mark.is_some() {
            prev = ev.mark.clone();
        }
    }
    Ok(total)
}

/// Largest relative deviation `|fd - g| / max(1, |g|)` between the analytic
/// gradient of `l1` and central differences with step `1e-5 (1 + |theta_j|)`.
pub fn gradient_check(log: &EventLog, params: &ModelParams, layout: &Layout) -> Result<f64> {
    finite_difference_check(params, layout, |p| loglik_point(log, p, layout))
}

/// Same check for `R_T`.
pub fn gradient_check_least_squares(log: &EventLog, params: &ModelParams, layout: &Layout) -> Result<f64> {
    finite_difference_check(params, layout, |p| least_squares(log, p, layout))
}

fn finite_difference_check(
    params: &ModelParams,
    layout: &Layout,
    f: impl Fn(&ModelParams) -> Result<Objective>,
) -> Result<f64> {
    let x = layout.values(params);
    let analytic = f(params)?.gradient;
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        let h = 1e-5 * (1.0 + x[k].abs());
        let mut xp = x.clone();
        xp[k] += h;
        let mut xm = x.clone();
        xm[k] -= h;
        let fp = f(&layout.apply(params, &xp))?.value;
        let fm = f(&layout.apply(params, &xm))?.value;
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - analytic[k]).abs() / analytic[k].abs().max(1.0));
    }
    Ok(worst)
}

/// Contribution to `l1` of the events in `events` and of the compensator over
/// `(state.time(), end]`, starting from a carried excitation state. Returns the
/// contribution and the state at `end`.
///
/// Summing segments reproduces [`loglik_point`] on the whole log.
pub fn loglik_segment(
    params: &ModelParams,
    start: &ExcitationState,
    events: &[Event],
    end: f64,
) -> Result<(f64, ExcitationState)> {
    let mut state = start.clone();
    let mut value = 0.0;
    let t0 = start.time();
    for ev in events {
        if !(ev.time > state.time() && ev.time <= end) {
            return Err(Error::EventLog(format!("event at t = {} is outside ({}, {end}]", ev.time, state.time())));
        }
        state.decay_in_place(params, ev.time - state.time())?;
        value += state.intensity(params)[ev.component].ln();
        state.jump_in_place(params, ev.component, ev.mark.as_deref())?;
    }
    if end < state.time() {
        return Err(Error::InvalidArgument("segment end precedes the last event".into()));
    }

    value -= params.mu().iter().sum::<f64>() * (end - t0);
    // carried excitation decays freely from t0, new events from their own times
    let carried = compensate_state(params, start, end - t0)?;
    value -= carried;
    let mut fresh = 0.0;
    for ev in events {
        let mut single = ExcitationState::new(params);
        single.jump_in_place(params, ev.component, ev.mark.as_deref())?;
        fresh += compensate_state(params, &single, end - ev.time)?;
    }
    value -= fresh;
    state.decay_in_place(params, end - state.time())?;
    Ok((value, state))
}

/// `int_0^h sum_i (lambda^i - mu_i)` along pure decay from `state`.
fn compensate_state(params: &ModelParams, state: &ExcitationState, h: f64) -> Result<f64> {
    let d = params.dim();
    match (state.excitation(), params.kernel()) {
        (Excitation::Scalar(e), KernelSpec::ScalarExp { beta, .. }) => Ok(e
            .iter()
            .zip(beta)
            .map(|(&ek, bk)| match bk {
                Some(b) if ek != 0.0 => ek * -(-b * h).exp_m1() / b,
                _ => 0.0,
            })
            .sum()),
        (Excitation::Matrix(e), KernelSpec::MatrixExp { order, a, b, .. }) => {
            let eye = DMatrix::<f64>::identity(*order, *order);
            let mut total = 0.0;
            for k in 0..d * d {
                if e[k].iter().all(|&v| v == 0.0) {
                    continue;
                }
                let binv = b[k]
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidParams("decay matrix is singular".into()))?;
                total += a[k].dot(&(binv * (&eye - decay_matrix(&b[k], h)) * &e[k]));
            }
            Ok(total)
        }
        _ => Err(Error::InvalidArgument("excitation state does not match the kernel form".into())),
    }
}
