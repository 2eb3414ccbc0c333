//! Projected limited-memory BFGS for smooth maximization over a box.
//!
//! Internally the negated objective is minimized. Each iteration builds a
//! two-loop quasi-Newton direction on the coordinates not held at a bound,
//! then backtracks along the projected path `P(x + t d)` until the Armijo
//! condition holds. Projection clamps, so coordinates that reach a bound sit
//! on it exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub armijo_c1: f64,
    pub max_iter: usize,
    /// Stop once the sup norm of the projected gradient falls below this.
    pub pg_tol: f64,
    pub max_shrinks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 10, armijo_c1: 1e-4, max_iter: 500, pg_tol: 1e-8, max_shrinks: 60 }
    }
}

/// Box constraints with optional pinned coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxProblem {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `Some(v)` pins a coordinate to `v`.
    pub fixed: Vec<Option<f64>>,
}

impl BoxProblem {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let fixed = vec![None; lower.len()];
        Self::with_fixed(lower, upper, fixed)
    }

    pub fn with_fixed(lower: Vec<f64>, upper: Vec<f64>, fixed: Vec<Option<f64>>) -> Result<Self> {
        if lower.len() != upper.len() || fixed.len() != lower.len() {
            return Err(Error::InvalidArgument("bound vectors differ in length".into()));
        }
        for k in 0..lower.len() {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] <= upper[k]) {
                return Err(Error::InvalidArgument(format!("coordinate {k}: bounds must be finite with lower <= upper")));
            }
            if let Some(v) = fixed[k] {
                if !(v >= lower[k] && v <= upper[k]) {
                    return Err(Error::InvalidArgument(format!("coordinate {k}: pinned value {v} is outside its bounds")));
                }
            }
        }
        Ok(Self { lower, upper, fixed })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    fn project(&self, x: &mut [f64]) {
        for k in 0..x.len() {
            x[k] = match self.fixed[k] {
                Some(v) => v,
                None => x[k].clamp(self.lower[k], self.upper[k]),
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub objective: f64,
    /// Sup norm of the projected gradient at the returned point.
    pub grad_norm: f64,
    pub converged: bool,
    /// Indices of free coordinates sitting on a bound.
    pub active: Vec<usize>,
    pub message: String,
}

/// Maximize `f` over the box. `f` returns the value and gradient; a
/// non-finite value is treated as a failed trial point.
pub fn maximize_box<F>(mut f: F, problem: &BoxProblem, x0: &[f64], opts: &LbfgsOptions) -> Result<(Vec<f64>, Diagnostics)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = problem.len();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!("start has {} coordinates, problem has {n}", x0.len())));
    }
    for k in 0..n {
        if !(x0[k] >= problem.lower[k] && x0[k] <= problem.upper[k]) {
            return Err(Error::InvalidArgument(format!("start coordinate {k} = {} is outside the box", x0[k])));
        }
    }
    let mut x = x0.to_vec();
    problem.project(&mut x);

    // minimize phi = -f
    let mut evals = 0;
    let mut eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        evals += 1;
        let (v, g) = f(x)?;
        if g.len() != n {
            return Err(Error::Optimizer(format!("gradient has {} entries, expected {n}", g.len())));
        }
        Ok((-v, g.into_iter().map(|v| -v).collect()))
    };

    let (mut phi, mut g) = eval(&x)?;
    if !phi.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Optimizer("objective is not finite at the start point".into()));
    }

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    let mut message = String::from("iteration limit reached");
    let mut converged = false;

    loop {
        let pg = projected_grad_norm(problem, &x, &g);
        if pg <= opts.pg_tol {
            converged = true;
            message = "projected gradient below tolerance".into();
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let active = active_mask(problem, &x, &g);
        let mut stepped = false;
        for attempt in 0..2 {
            let steepest = attempt == 1 || s_hist.is_empty();
            let mut d = if steepest { masked_neg(&g, &active) } else { two_loop(&g, &active, &s_hist, &y_hist) };
            let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !steepest && !(slope < 0.0) {
                d = masked_neg(&g, &active);
                slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            }
            if !(slope < 0.0) {
                break;
            }
            let mut t = if steepest && s_hist.is_empty() {
                let dn = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (1.0 / dn).min(1.0)
            } else {
                1.0
            };
            for _ in 0..=opts.max_shrinks {
                let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                problem.project(&mut xn);
                let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                if step.iter().all(|&v| v == 0.0) {
                    break;
                }
                let decrease: f64 = step.iter().zip(&g).map(|(a, b)| a * b).sum();
                let (phin, gn) = eval(&xn)?;
                if phin.is_finite() && gn.iter().all(|v| v.is_finite()) && phin <= phi + opts.armijo_c1 * decrease {
                    let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy: f64 = step.iter().zip(&y).map(|(a, b)| a * b).sum();
                    let ss: f64 = step.iter().map(|v| v * v).sum();
                    let yy: f64 = y.iter().map(|v| v * v).sum();
                    if sy > 1e-10 * (ss * yy).sqrt() {
                        s_hist.push(step);
                        y_hist.push(y);
                        if s_hist.len() > opts.memory {
                            s_hist.remove(0);
                            y_hist.remove(0);
                        }
                    }
                    x = xn;
                    phi = phin;
                    g = gn;
                    stepped = true;
                    break;
                }
                t *= 0.5;
            }
            if stepped {
                break;
            }
            // quasi-Newton direction failed; retry from scratch along the gradient
            s_hist.clear();
            y_hist.clear();
        }
        if !stepped {
            message = "line search made no progress".into();
            break;
        }
    }

    let grad_norm = projected_grad_norm(problem, &x, &g);
    let active = (0..n)
        .filter(|&k| problem.fixed[k].is_none() && (x[k] == problem.lower[k] || x[k] == problem.upper[k]))
        .collect();
    let diagnostics =
        Diagnostics { iterations, evaluations: evals, objective: -phi, grad_norm, converged, active, message };
    Ok((x, diagnostics))
}

/// Sup norm of `x - P(x - g)` over free coordinates.
fn projected_grad_norm(problem: &BoxProblem, x: &[f64], g: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        if problem.fixed[k].is_some() {
            continue;
        }
        let moved = (x[k] - g[k]).clamp(problem.lower[k], problem.upper[k]);
        worst = worst.max((x[k] - moved).abs());
    }
    worst
}

/// Coordinates that are pinned, or on a bound with the descent direction
/// pointing outward.
fn active_mask(problem: &BoxProblem, x: &[f64], g: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|k| {
            problem.fixed[k].is_some()
                || (x[k] <= problem.lower[k] && g[k] > 0.0)
                || (x[k] >= problem.upper[k] && g[k] < 0.0)
        })
        .collect()
}

fn masked_neg(g: &[f64], active: &[bool]) -> Vec<f64> {
    g.iter().zip(active).map(|(&v, &a)| if a { 0.0 } else { -v }).collect()
}

fn two_loop(g: &[f64], active: &[bool], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(active).map(|(&x, &a)| if a { 0.0 } else { x }).collect() };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let s: Vec<Vec<f64>> = s_hist.iter().map(|v| mask(v)).collect();
    let y: Vec<Vec<f64>> = y_hist.iter().map(|v| mask(v)).collect();
    let mut q = mask(g);
    let m = s.len();
    let mut alpha = vec![0.0; m];
    let mut rho = vec![0.0; m];
    for k in (0..m).rev() {
        let sy = dot(&s[k], &y[k]);
        rho[k] = if sy > 0.0 { 1.0 / sy } else { 0.0 };
        alpha[k] = rho[k] * dot(&s[k], &q);
        for (qi, yi) in q.iter_mut().zip(&y[k]) {
            *qi -= alpha[k] * yi;
        }
    }
    let gamma = (0..m)
        .rev()
        .find_map(|k| {
            let yy = dot(&y[k], &y[k]);
            let sy = dot(&s[k], &y[k]);
            (yy > 0.0 && sy > 0.0).then(|| sy / yy)
        })
        .unwrap_or(1.0);
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for k in 0..m {
        let b = rho[k] * dot(&y[k], &q);
        for (qi, si) in q.iter_mut().zip(&s[k]) {
            *qi += (alpha[k] - b) * si;
        }
    }
    q.iter().zip(active).map(|(&v, &a)| if a { 0.0 } else { -v }).collect()
}
