//! Exact simulation by Ogata's thinning.
//!
//! Candidates are exponential draws against a dominating rate. For scalar
//! exponential kernels the total intensity only decreases between events, so
//! the current total is a valid bound until the next acceptance. Matrix
//! kernels may rise after an event; their bound is a grid maximum over a
//! lookahead window, inflated, and the window is re-evaluated on expiry. A
//! candidate whose intensity exceeds the bound triggers a retry with a larger
//! inflation from the same state.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, EventLog};
use crate::marks::MarkKernel;
use crate::model::{
    branching_matrix, decay_matrix, spectral_radius, stationary_mean_intensity, Excitation, ExcitationState,
    KernelSpec, ModelParams,
};

/// Number of grid points used by the lookahead bound of matrix kernels.
pub const BOUND_GRID_POINTS: usize = 32;
/// Multiplicative safety margin on the grid maximum.
pub const BOUND_INFLATION: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationOptions {
    /// Window over which a non-monotone bound is valid.
    pub lookahead: f64,
    /// Refuse to simulate when the expected number of events exceeds this.
    pub max_expected_events: f64,
    /// Initial segment simulated and then discarded.
    pub burn_in: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { lookahead: 1.0, max_expected_events: 1e7, burn_in: 0.0 }
    }
}

/// Per-trial generator used throughout the crate.
pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simulate one path on `[0, horizon]`, starting from an empty history.
pub fn simulate<R: Rng>(
    params: &ModelParams,
    marks: &MarkKernel,
    horizon: f64,
    rng: &mut R,
    opts: &SimulationOptions,
) -> Result<EventLog> {
    if marks.dim() != params.mark_dim() {
        return Err(Error::MarkDimension { expected: params.mark_dim(), got: marks.dim() });
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    if !(opts.lookahead > 0.0 && opts.burn_in >= 0.0) {
        return Err(Error::InvalidArgument("lookahead must be positive and burn-in nonnegative".into()));
    }
    let mark_mean = marks.stationary_mean();
    let needs_mean = match params.kernel() {
        KernelSpec::ScalarExp { .. } => params.is_marked(),
        KernelSpec::MatrixExp { mark_weights, .. } => mark_weights.is_some(),
    };
    if needs_mean && mark_mean.is_none() {
        return Err(Error::InvalidArgument("mark kernel has no stationary mean; stability cannot be checked".into()));
    }
    let rho = spectral_radius(&branching_matrix(params, mark_mean.as_deref())?)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let total = opts.burn_in + horizon;
    let rates = stationary_mean_intensity(params, mark_mean.as_deref())?;
    let expected = rates.iter().sum::<f64>() * total;
    if expected > opts.max_expected_events {
        return Err(Error::ResourceLimit { expected, cap: opts.max_expected_events });
    }
    if horizon == 0.0 {
        return EventLog::empty(0.0, params.dim(), params.mark_dim());
    }

    let monotone = matches!(params.kernel(), KernelSpec::ScalarExp { .. });
    let hard_cap = (opts.max_expected_events * 10.0).max(1000.0) as usize;
    let mut state = ExcitationState::new(params);
    let mut events = Vec::new();
    let mut last_time = 0.0;
    let mut inflation = BOUND_INFLATION;

    loop {
        let bound = if monotone {
            state.intensity(params).iter().sum::<f64>()
        } else {
            grid_bound(&state, params, opts.lookahead, inflation)?
        };
        let u: f64 = rng.sample(Open01);
        let wait = -u.ln() / bound;
        if !monotone && wait > opts.lookahead {
            if state.time() + opts.lookahead >= total {
                break;
            }
            state.decay_in_place(params, opts.lookahead)?;
            inflation = BOUND_INFLATION;
            continue;
        }
        let t_cand = state.time() + wait;
        if t_cand > total {
            break;
        }
        let mut cand = state.clone();
        cand.decay_in_place(params, wait)?;
        let lambda = cand.intensity(params);
        if let Some(i) = lambda.iter().position(|&l| l < 0.0) {
            return Err(Error::NegativeIntensity { component: i, time: t_cand, value: lambda[i] });
        }
        let sum: f64 = lambda.iter().sum();
        if sum > bound * (1.0 + 1e-12) {
            // bound violated: only possible for non-monotone kernels
            inflation *= 2.0;
            continue;
        }
        state = cand;
        let v = rng.random::<f64>() * bound;
        if v >= sum || t_cand <= last_time {
            continue;
        }
        let mut acc = 0.0;
        let mut k = lambda.len() - 1;
        for (i, l) in lambda.iter().enumerate() {
            acc += l;
            if v < acc {
                k = i;
                break;
            }
        }
        let mark = marks.sample_mark(state.mark(), k, rng);
        state.jump_in_place(params, k, mark.as_deref())?;
        last_time = t_cand;
        inflation = BOUND_INFLATION;
        if t_cand > opts.burn_in {
            let time = t_cand - opts.burn_in;
            if time > 0.0 {
                events.push(Event { time, component: k, mark });
            }
        }
        if events.len() > hard_cap {
            return Err(Error::ResourceLimit { expected: events.len() as f64, cap: opts.max_expected_events });
        }
    }
    EventLog::new(horizon, params.dim(), params.mark_dim(), events)
}

/// [`simulate`] with the crate's per-trial generator.
pub fn simulate_seeded(
    params: &ModelParams,
    marks: &MarkKernel,
    horizon: f64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<EventLog> {
    simulate(params, marks, horizon, &mut trial_rng(seed), opts)
}

/// Dominating rate for thinning from the current state. Scalar exponential
/// kernels: the current total intensity. Matrix kernels: the inflated
/// maximum of the total intensity over a grid on `[t, t + lookahead]`.
pub fn thinning_bound(state: &ExcitationState, params: &ModelParams, lookahead: f64) -> Result<f64> {
    match params.kernel() {
        KernelSpec::ScalarExp { .. } => Ok(state.intensity(params).iter().sum()),
        KernelSpec::MatrixExp { .. } => grid_bound(state, params, lookahead, BOUND_INFLATION),
    }
}

fn grid_bound(state: &ExcitationState, params: &ModelParams, lookahead: f64, inflation: f64) -> Result<f64> {
    let KernelSpec::MatrixExp { a, b, .. } = params.kernel() else {
        return Ok(state.intensity(params).iter().sum());
    };
    let Excitation::Matrix(e0) = state.excitation() else {
        return Err(Error::InvalidArgument("excitation state does not match the kernel form".into()));
    };
    let d = params.dim();
    let base: f64 = params.mu().iter().sum();
    let step = lookahead / (BOUND_GRID_POINTS - 1) as f64;
    let step_decay: Vec<_> = b.iter().map(|bm| decay_matrix(bm, step)).collect();
    let mut e = e0.clone();
    let mut best = f64::NEG_INFINITY;
    for k in 0..BOUND_GRID_POINTS {
        if k > 0 {
            for (ek, dk) in e.iter_mut().zip(&step_decay) {
                *ek = dk * &*ek;
            }
        }
        let total = base + (0..d * d).map(|k| a[k].dot(&e[k])).sum::<f64>();
        best = best.max(total);
    }
    Ok(best.max(0.0) * inflation)
}
