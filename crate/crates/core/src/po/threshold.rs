//! Adaptive thresholding of first-stage estimates.
//!
//! Each coordinate solves `min (theta - theta_tilde)^2 + kappa |theta|^q` over
//! its box segment, with adaptive weight
//! `kappa = alpha_T |eps_T + |theta_tilde||^{-gamma}`,
//! `alpha_T = T^{-(1+a)/2}` and `eps_T = T^{-1/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHyper")]
pub struct PoHyper {
    q: f64,
    gamma: f64,
    a: f64,
}

#[derive(Deserialize)]
struct RawHyper {
    q: f64,
    gamma: f64,
    a: f64,
}

impl TryFrom<RawHyper> for PoHyper {
    type Error = Error;
    fn try_from(r: RawHyper) -> Result<Self> {
        PoHyper::new(r.q, r.gamma, r.a)
    }
}

impl PoHyper {
    /// Requires `q` in `(0, 1]`, `gamma > -(1 - q)` and `a` in `(0, 1 - q + gamma)`.
    pub fn new(q: f64, gamma: f64, a: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidParams(format!("q must lie in (0, 1], got {q}")));
        }
        if !(gamma.is_finite() && gamma > -(1.0 - q)) {
            return Err(Error::InvalidParams(format!("gamma must exceed {}, got {gamma}", -(1.0 - q))));
        }
        let top = 1.0 - q + gamma;
        if !(a > 0.0 && a < top) {
            return Err(Error::InvalidParams(format!("a must lie in (0, {top}), got {a}")));
        }
        Ok(Self { q, gamma, a })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn alpha_t(&self, horizon: f64) -> f64 {
        horizon.powf(-(1.0 + self.a) / 2.0)
    }

    pub fn epsilon_t(&self, horizon: f64) -> f64 {
        horizon.powf(-0.5)
    }

    pub fn kappa(&self, theta_tilde: f64, horizon: f64) -> f64 {
        self.alpha_t(horizon) * (self.epsilon_t(horizon) + theta_tilde.abs()).powf(-self.gamma)
    }
}

/// `(theta - theta_tilde)^2 + kappa |theta|^q`.
pub fn threshold_objective(theta: f64, theta_tilde: f64, kappa: f64, q: f64) -> f64 {
    let pen = if theta == 0.0 { 0.0 } else { kappa * theta.abs().powf(q) };
    (theta - theta_tilde).powi(2) + pen
}

/// Exact minimizer over `[lower, upper]`, which must contain 0. Ties between
/// 0 and an interior point go to 0.
pub fn threshold_coordinate(theta_tilde: f64, kappa: f64, q: f64, lower: f64, upper: f64) -> f64 {
    if theta_tilde > 0.0 {
        half_line(theta_tilde, kappa, q, upper)
    } else if theta_tilde < 0.0 && lower < 0.0 {
        -half_line(-theta_tilde, kappa, q, -lower)
    } else {
        0.0
    }
}

/// Minimizer over `[0, cap]` for `t > 0`.
fn half_line(t: f64, kappa: f64, q: f64, cap: f64) -> f64 {
    if q == 1.0 {
        return (t - kappa / 2.0).clamp(0.0, cap);
    }
    if kappa == 0.0 {
        return t.min(cap);
    }
    // f' = 2(x - t) + q kappa x^{q-1} is convex with its minimum at x_c;
    // a local minimizer of f exists iff f'(x_c) < 0, and it lies in (x_c, t)
    let fp = |x: f64| 2.0 * (x - t) + q * kappa * x.powf(q - 1.0);
    let fpp = |x: f64| 2.0 + q * (q - 1.0) * kappa * x.powf(q - 2.0);
    let xc = (q * (1.0 - q) * kappa / 2.0).powf(1.0 / (2.0 - q));
    if xc >= t || fp(xc) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (xc, t);
    let mut x = t;
    for _ in 0..200 {
        let g = fp(x);
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - g / fpp(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            x = next;
            break;
        }
        x = next;
    }
    let cand = x.min(cap);
    if threshold_objective(cand, t, kappa, q) < t * t {
        cand
    } else {
        0.0
    }
}

/// Output of the thresholding step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2 {
    pub theta: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa_theta: Vec<f64>,
    pub kappa_nu: Vec<f64>,
    /// Indices into `theta` that are exactly zero.
    pub zero_theta: Vec<usize>,
    pub zero_nu: Vec<usize>,
}

/// Threshold the zero-able first-stage coordinates (`theta0`) and zero-able
/// nuisance coordinates (`nu0`) with their box segments.
pub fn step2_threshold(
    theta0: &[f64],
    nu0: &[f64],
    horizon: f64,
    hyper: &PoHyper,
    theta_box: &[(f64, f64)],
    nu_box: &[(f64, f64)],
) -> Result<Step2> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let run = |vals: &[f64], boxes: &[(f64, f64)]| -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
        if vals.len() != boxes.len() {
            return Err(Error::InvalidArgument("one box segment per coordinate is required".into()));
        }
        let mut out = Vec::with_capacity(vals.len());
        let mut kappas = Vec::with_capacity(vals.len());
        let mut zeros = Vec::new();
        for (k, (&v, &(lo, hi))) in vals.iter().zip(boxes).enumerate() {
            if !(lo <= 0.0 && hi >= 0.0) {
                return Err(Error::InvalidArgument(format!("box [{lo}, {hi}] of coordinate {k} excludes zero")));
            }
            let kappa = hyper.kappa(v, horizon);
            let t = threshold_coordinate(v, kappa, hyper.q(), lo, hi);
            if t == 0.0 {
                zeros.push(k);
            }
            out.push(t);
            kappas.push(kappa);
        }
        Ok((out, kappas, zeros))
    };
    let (theta, kappa_theta, zero_theta) = run(theta0, theta_box)?;
    let (nu, kappa_nu, zero_nu) = run(nu0, nu_box)?;
    Ok(Step2 { theta, nu, kappa_theta, kappa_nu, zero_theta, zero_nu })
}
