//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use gemhp::events::EventLog;
use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

/// Shapiro-Wilk `(W, p)` with Royston's approximations, valid for
/// `3 <= n <= 5000`.
pub fn shapiro_wilk(sample: &[f64]) -> (f64, f64) {
    let n = sample.len();
    assert!((3..=5000).contains(&n), "Shapiro-Wilk needs 3..=5000 points");
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let norm = std_normal();

    let mut a = vec![0.0; n];
    if n == 3 {
        a[0] = -std::f64::consts::FRAC_1_SQRT_2;
        a[2] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let m: Vec<f64> = (1..=n).map(|i| norm.inverse_cdf((i as f64 - 0.375) / (nf + 0.25))).collect();
        let summ2: f64 = m.iter().map(|v| v * v).sum();
        let ssumm2 = summ2.sqrt();
        let u = 1.0 / nf.sqrt();
        let an = poly(&[0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], u) + m[n - 1] / ssumm2;
        if n > 5 {
            let an1 = poly(&[0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], u) + m[n - 2] / ssumm2;
            let eps = (summ2 - 2.0 * m[n - 1].powi(2) - 2.0 * m[n - 2].powi(2))
                / (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
            for i in 2..n - 2 {
                a[i] = m[i] / eps.sqrt();
            }
            a[n - 1] = an;
            a[n - 2] = an1;
            a[0] = -an;
            a[1] = -an1;
        } else {
            let eps = (summ2 - 2.0 * m[n - 1].powi(2)) / (1.0 - 2.0 * an * an);
            for i in 1..n - 1 {
                a[i] = m[i] / eps.sqrt();
            }
            a[n - 1] = an;
            a[0] = -an;
        }
    }

    let mean = x.iter().sum::<f64>() / nf;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
    let w = (num * num / ss).min(1.0);

    let p = if n == 3 {
        (6.0 / PI * (w.sqrt().asin() - 0.75f64.sqrt().asin())).max(0.0)
    } else if n <= 11 {
        let gamma = poly(&[-2.273, 0.459], nf);
        let mu = poly(&[0.5440, -0.39978, 0.025054, -0.0006714], nf);
        let sigma = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
        let z = (-(gamma - (1.0 - w).ln()).ln() - mu) / sigma;
        1.0 - norm.cdf(z)
    } else {
        let ln = nf.ln();
        let mu = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln);
        let sigma = poly(&[-0.4803, -0.082676, 0.0030302], ln).exp();
        let z = ((1.0 - w).ln() - mu) / sigma;
        1.0 - norm.cdf(z)
    };
    (w, p)
}

/// Kolmogorov survival function `P(K > z)`.
pub fn kolmogorov_sf(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 0.27 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * z * z).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS statistic against `Exp(1)` and its asymptotic p-value.
pub fn ks_exponential(sample: &[f64]) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let f = -(-v).exp_m1();
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    (d, kolmogorov_sf(d * n.sqrt()))
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WEIGHTS[7];
    let mut g = fc * G_WEIGHTS[3];
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7, 15) quadrature by recursive bisection.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(&f, a, b, tol, 40)
}

/// Kernel of one edge, written out independently of the library.
#[derive(Debug, Clone)]
pub enum OracleKernel {
    /// `h(s) = g(x) exp(-beta s)` with `g(x) = c . (1, x)` features.
    Exp { coef: Vec<f64>, beta: f64 },
    /// `<A | exp(-s B)> g(x)` with `B = b I + w J`, `J = [[0, 1], [-1, 0]]`.
    Rotation { a: DMatrix<f64>, b: f64, w: f64, weights: Option<Vec<f64>> },
    /// `<A | exp(-s B)> g(x)` with `B = [[b, c], [0, b]]`.
    Shear { a: DMatrix<f64>, b: f64, c: f64, weights: Option<Vec<f64>> },
}

impl OracleKernel {
    fn mark_gain(coef: &[f64], mark: Option<&[f64]>) -> f64 {
        match mark {
            Some(x) if coef.len() == x.len() => coef.iter().zip(x).map(|(c, v)| c * v).sum(),
            _ => coef[0],
        }
    }

    pub fn value(&self, s: f64, mark: Option<&[f64]>) -> f64 {
        match self {
            OracleKernel::Exp { coef, beta } => Self::mark_gain(coef, mark) * (-beta * s).exp(),
            OracleKernel::Rotation { a, b, w, weights } => {
                let (cs, sn) = ((w * s).cos(), (w * s).sin());
                let e = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]) * (-b * s).exp();
                let g = weights.as_deref().map_or(1.0, |wt| Self::mark_gain(wt, mark));
                a.dot(&e) * g
            }
            OracleKernel::Shear { a, b, c, weights } => {
                let e = DMatrix::from_row_slice(2, 2, &[1.0, -c * s, 0.0, 1.0]) * (-b * s).exp();
                let g = weights.as_deref().map_or(1.0, |wt| Self::mark_gain(wt, mark));
                a.dot(&e) * g
            }
        }
    }
}

/// Brute-force intensity: baseline plus a sum over every past event.
pub struct IntensityOracle {
    pub mu: Vec<f64>,
    /// Row-major over `(i, j)`; `None` for an absent edge.
    pub kernels: Vec<Option<OracleKernel>>,
}

impl IntensityOracle {
    pub fn intensity(&self, log: &EventLog, i: usize, t: f64) -> f64 {
        let d = self.mu.len();
        let mut v = self.mu[i];
        for ev in log.events() {
            if ev.time >= t {
                break;
            }
            if let Some(k) = &self.kernels[i * d + ev.component] {
                v += k.value(t - ev.time, ev.mark.as_deref());
            }
        }
        v
    }

    /// `int_0^T sum_i lambda^i` by quadrature between consecutive events.
    pub fn compensator(&self, log: &EventLog, tol: f64) -> f64 {
        let d = self.mu.len();
        let mut knots = vec![0.0];
        knots.extend(log.events().iter().map(|e| e.time));
        knots.push(log.horizon());
        let pieces = knots.len() - 1;
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            total += integrate(|t| (0..d).map(|i| self.intensity(log, i, t)).sum(), lo, hi, tol / pieces as f64);
        }
        total
    }
}
