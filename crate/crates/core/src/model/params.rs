//! Parameterization of linear exponential-family marked Hawkes models.
//!
//! Two kernel families are supported. `ScalarExp` edges carry a decay rate
//! `beta_ij` and a vector of excitation coefficients `c_ijl` that multiply the
//! mark features: the constant feature `1` for unmarked models (so `c_ij1` is
//! the usual `alpha_ij`) or the mark coordinates `x_l` for marked models (so
//! `c_ijl` is the topic weight `m_ijl`). `MatrixExp` edges carry a pair of
//! `p x p` matrices and evaluate `<A | exp(-s B)> g(x)`.
//!
//! A decay rate is a nuisance coordinate when every excitation coefficient on
//! its edge is zero; it is then stored as `None` and never read.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported order of the matrix kernels.
pub const MAX_MATRIX_ORDER: usize = 8;

/// Closed parameter box per coordinate block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bounds {
    pub mu: (f64, f64),
    /// Excitation coefficients (`alpha` in unmarked models, `m` in marked ones).
    pub coef: (f64, f64),
    pub beta: (f64, f64),
    /// Entries of the matrix-kernel coefficient `A`.
    pub kernel_a: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self { mu: (1e-6, 10.0), coef: (0.0, 10.0), beta: (1e-2, 20.0), kernel_a: (-10.0, 10.0) }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in
            [("mu", self.mu), ("coef", self.coef), ("beta", self.beta), ("kernel_a", self.kernel_a)]
        {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParams(format!("bounds for {name} must be finite with lower <= upper")));
            }
        }
        if self.mu.0 <= 0.0 {
            return Err(Error::InvalidParams("lower bound of mu must be positive".into()));
        }
        if self.beta.0 <= 0.0 {
            return Err(Error::InvalidParams("lower bound of beta must be positive".into()));
        }
        Ok(())
    }

    pub fn for_coord(&self, coord: Coord) -> (f64, f64) {
        match coord {
            Coord::Mu(_) => self.mu,
            Coord::Coef { .. } => self.coef,
            Coord::Beta { .. } => self.beta,
            Coord::KernelA { .. } => self.kernel_a,
        }
    }
}

/// Address of one scalar parameter. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coord {
    Mu(usize),
    Coef { i: usize, j: usize, l: usize },
    Beta { i: usize, j: usize },
    KernelA { i: usize, j: usize, r: usize, c: usize },
}

impl Coord {
    pub fn is_excitation(&self) -> bool {
        matches!(self, Coord::Coef { .. } | Coord::KernelA { .. })
    }
}

fn join_indices(idx: &[usize]) -> String {
    if idx.iter().all(|&k| k < 9) {
        idx.iter().map(|k| (k + 1).to_string()).collect()
    } else {
        idx.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join("_")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    ScalarExp,
    MatrixExp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    ScalarExp {
        /// Row-major over `(i, j, l)`, length `d * d * feature_dim`.
        coef: Vec<f64>,
        /// Row-major over `(i, j)`; `None` marks a nuisance decay.
        beta: Vec<Option<f64>>,
    },
    MatrixExp {
        order: usize,
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        /// Optional linear mark response `g_ij(x) = sum_l w_ijl x_l`; `g = 1` when absent.
        mark_weights: Option<Vec<f64>>,
    },
}

/// Full parameter set of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dim: usize,
    mark_dim: usize,
    mu: Vec<f64>,
    kernel: KernelSpec,
}

impl ModelParams {
    /// Unmarked multivariate exponential Hawkes model. `beta[i][j] = None`
    /// declares a nuisance decay and requires `alpha[i][j] == 0`.
    pub fn scalar_exp(mu: Vec<f64>, alpha: Vec<Vec<f64>>, beta: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let d = mu.len();
        check_square(&alpha, d, "alpha")?;
        check_square(&beta, d, "beta")?;
        let params = Self {
            dim: d,
            mark_dim: 0,
            mu,
            kernel: KernelSpec::ScalarExp {
                coef: alpha.into_iter().flatten().collect(),
                beta: beta.into_iter().flatten().collect(),
            },
        };
        params.validate()?;
        Ok(params)
    }

    /// Exponential Hawkes model whose jump sizes are linear in a simplex mark:
    /// the edge `(i, j)` jumps by `sum_l m[i][j][l] x_l`.
    pub fn marked_scalar_exp(
        mu: Vec<f64>,
        m: Vec<Vec<Vec<f64>>>,
        beta: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        let d = mu.len();
        check_square(&m, d, "m")?;
        check_square(&beta, d, "beta")?;
        let mark_dim = m.first().and_then(|row| row.first()).map_or(0, Vec::len);
        if mark_dim == 0 {
            return Err(Error::InvalidParams("marked model needs at least one mark coordinate".into()));
        }
        if m.iter().flatten().any(|w| w.len() != mark_dim) {
            return Err(Error::InvalidParams("every m[i][j] must have the same length".into()));
        }
        let params = Self {
            dim: d,
            mark_dim,
            mu,
            kernel: KernelSpec::ScalarExp {
                coef: m.into_iter().flatten().flatten().collect(),
                beta: beta.into_iter().flatten().collect(),
            },
        };
        params.validate()?;
        Ok(params)
    }

    /// Matrix-exponential kernels `<A_ij | exp(-s B_ij)> g_ij(x)`. Matrices are
    /// given row-major over edges `(i, j)`.
    pub fn matrix_exp(
        mu: Vec<f64>,
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        mark_dim: usize,
        mark_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let d = mu.len();
        let order = a.first().map_or(0, |m| m.nrows());
        let params = Self { dim: d, mark_dim, mu, kernel: KernelSpec::MatrixExp { order, a, b, mark_weights } };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        if self.mu.len() != d {
            return Err(Error::InvalidParams("mu must have one entry per component".into()));
        }
        if let Some(i) = self.mu.iter().position(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(Error::InvalidParams(format!("mu[{}] must be positive and finite", i + 1)));
        }
        match &self.kernel {
            KernelSpec::ScalarExp { coef, beta } => {
                let l = self.feature_dim();
                if coef.len() != d * d * l || beta.len() != d * d {
                    return Err(Error::InvalidParams("kernel arrays have the wrong shape".into()));
                }
                if let Some(k) = coef.iter().position(|&c| !(c.is_finite() && c >= 0.0)) {
                    return Err(Error::InvalidParams(format!(
                        "excitation coefficient #{k} must be nonnegative and finite"
                    )));
                }
                for e in 0..d * d {
                    let active = coef[e * l..(e + 1) * l].iter().any(|&c| c != 0.0);
                    match beta[e] {
                        Some(b) if !(b.is_finite() && b > 0.0) => {
                            return Err(Error::InvalidParams(format!(
                                "beta_{} must be positive",
                                join_indices(&[e / d, e % d])
                            )))
                        }
                        None if active => {
                            return Err(Error::InvalidParams(format!(
                                "beta_{} is marked nuisance but its edge has nonzero excitation",
                                join_indices(&[e / d, e % d])
                            )))
                        }
                        _ => {}
                    }
                }
            }
            KernelSpec::MatrixExp { order, a, b, mark_weights } => {
                let p = *order;
                if p == 0 || p > MAX_MATRIX_ORDER {
                    return Err(Error::InvalidParams(format!(
                        "matrix kernel order must be in 1..={MAX_MATRIX_ORDER}"
                    )));
                }
                if a.len() != d * d || b.len() != d * d {
                    return Err(Error::InvalidParams("need one A and one B matrix per edge".into()));
                }
                for m in a.iter().chain(b.iter()) {
                    if m.nrows() != p || m.ncols() != p || m.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidParams(format!("kernel matrices must be finite {p}x{p}")));
                    }
                }
                for (e, bm) in b.iter().enumerate() {
                    let min_re = bm
                        .complex_eigenvalues()
                        .iter()
                        .map(|z| z.re)
                        .fold(f64::INFINITY, f64::min);
                    if min_re <= 0.0 {
                        return Err(Error::InvalidParams(format!(
                            "B_{} must have eigenvalues with positive real part",
                            join_indices(&[e / d, e % d])
                        )));
                    }
                }
                if let Some(w) = mark_weights {
                    if self.mark_dim == 0 || w.len() != d * d * self.mark_dim {
                        return Err(Error::InvalidParams("mark weights have the wrong shape".into()));
                    }
                    if w.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                        return Err(Error::InvalidParams("mark weights must be nonnegative".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    pub fn is_marked(&self) -> bool {
        self.mark_dim > 0
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn form(&self) -> KernelForm {
        match self.kernel {
            KernelSpec::ScalarExp { .. } => KernelForm::ScalarExp,
            KernelSpec::MatrixExp { .. } => KernelForm::MatrixExp,
        }
    }

    /// Number of excitation coefficients per `ScalarExp` edge.
    pub fn feature_dim(&self) -> usize {
        self.mark_dim.max(1)
    }

    /// Coefficients `c_ij.` of a `ScalarExp` edge.
    pub fn coef(&self, i: usize, j: usize) -> &[f64] {
        match &self.kernel {
            KernelSpec::ScalarExp { coef, .. } => {
                let l = self.feature_dim();
                let e = i * self.dim + j;
                &coef[e * l..(e + 1) * l]
            }
            KernelSpec::MatrixExp { .. } => &[],
        }
    }

    pub fn beta(&self, i: usize, j: usize) -> Option<f64> {
        match &self.kernel {
            KernelSpec::ScalarExp { beta, .. } => beta[i * self.dim + j],
            KernelSpec::MatrixExp { .. } => None,
        }
    }

    /// True when the decay of edge `(i, j)` is undefined.
    pub fn is_nuisance_edge(&self, i: usize, j: usize) -> bool {
        matches!(&self.kernel, KernelSpec::ScalarExp { beta, .. } if beta[i * self.dim + j].is_none())
    }

    /// Jump size `g_ij(x)` contributed to edge `(i, j)` by an event with the given mark.
    pub fn excitation_weight(&self, i: usize, j: usize, mark: Option<&[f64]>) -> f64 {
        match &self.kernel {
            KernelSpec::ScalarExp { .. } => {
                let c = self.coef(i, j);
                match mark {
                    Some(x) if self.is_marked() => c.iter().zip(x).map(|(a, b)| a * b).sum(),
                    _ => c[0],
                }
            }
            KernelSpec::MatrixExp { mark_weights, .. } => match (mark_weights, mark) {
                (Some(w), Some(x)) => {
                    let e = (i * self.dim + j) * self.mark_dim;
                    w[e..e + self.mark_dim].iter().zip(x).map(|(a, b)| a * b).sum()
                }
                _ => 1.0,
            },
        }
    }

    /// Every coordinate of the model in layout order (mu block, excitation
    /// block row-major, decay block row-major). Nuisance decays and the
    /// coefficients pinned to zero on their edges are skipped.
    pub fn coords(&self) -> Vec<Coord> {
        self.coords_impl(false)
    }

    /// Like [`ModelParams::coords`] but includes nuisance edges.
    pub fn all_coords(&self) -> Vec<Coord> {
        self.coords_impl(true)
    }

    fn coords_impl(&self, with_nuisance: bool) -> Vec<Coord> {
        let d = self.dim;
        let mut out: Vec<Coord> = (0..d).map(Coord::Mu).collect();
        match &self.kernel {
            KernelSpec::ScalarExp { beta, .. } => {
                let l = self.feature_dim();
                for i in 0..d {
                    for j in 0..d {
                        if with_nuisance || beta[i * d + j].is_some() {
                            out.extend((0..l).map(|l| Coord::Coef { i, j, l }));
                        }
                    }
                }
                for i in 0..d {
                    for j in 0..d {
                        if with_nuisance || beta[i * d + j].is_some() {
                            out.push(Coord::Beta { i, j });
                        }
                    }
                }
            }
            KernelSpec::MatrixExp { order, .. } => {
                for i in 0..d {
                    for j in 0..d {
                        for r in 0..*order {
                            out.extend((0..*order).map(|c| Coord::KernelA { i, j, r, c }));
                        }
                    }
                }
            }
        }
        out
    }

    /// Value of a coordinate; `None` for a nuisance decay or a coordinate the
    /// model does not have.
    pub fn get(&self, coord: Coord) -> Option<f64> {
        let d = self.dim;
        match (coord, &self.kernel) {
            (Coord::Mu(i), _) => self.mu.get(i).copied(),
            (Coord::Coef { i, j, l }, KernelSpec::ScalarExp { coef, .. }) => {
                (i < d && j < d && l < self.feature_dim()).then(|| coef[(i * d + j) * self.feature_dim() + l])
            }
            (Coord::Beta { i, j }, KernelSpec::ScalarExp { beta, .. }) => {
                if i < d && j < d {
                    beta[i * d + j]
                } else {
                    None
                }
            }
            (Coord::KernelA { i, j, r, c }, KernelSpec::MatrixExp { order, a, .. }) => {
                (i < d && j < d && r < *order && c < *order).then(|| a[i * d + j][(r, c)])
            }
            _ => None,
        }
    }

    /// Overwrite one coordinate. Setting a decay revives a nuisance edge.
    /// Callers re-validate where the result leaves the admissible set.
    pub fn set(&mut self, coord: Coord, value: f64) {
        let d = self.dim;
        let l_dim = self.feature_dim();
        match (coord, &mut self.kernel) {
            (Coord::Mu(i), _) => self.mu[i] = value,
            (Coord::Coef { i, j, l }, KernelSpec::ScalarExp { coef, .. }) => coef[(i * d + j) * l_dim + l] = value,
            (Coord::Beta { i, j }, KernelSpec::ScalarExp { beta, .. }) => beta[i * d + j] = Some(value),
            (Coord::KernelA { i, j, r, c }, KernelSpec::MatrixExp { a, .. }) => a[i * d + j][(r, c)] = value,
            (c, _) => panic!("coordinate {c:?} does not exist in this model"),
        }
    }

    /// Mark the decay of edge `(i, j)` as nuisance. Its coefficients must be zero.
    pub fn set_nuisance(&mut self, i: usize, j: usize) {
        if let KernelSpec::ScalarExp { beta, .. } = &mut self.kernel {
            beta[i * self.dim + j] = None;
        }
    }

    /// Flag every decay whose edge has no excitation left as nuisance and
    /// return the affected edges.
    pub fn prune_nuisance(&mut self) -> Vec<(usize, usize)> {
        let d = self.dim;
        let mut pruned = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if self.beta(i, j).is_some() && self.coef(i, j).iter().all(|&c| c == 0.0) {
                    self.set_nuisance(i, j);
                    pruned.push((i, j));
                }
            }
        }
        pruned
    }

    /// Human-readable coordinate name with 1-based indices, e.g. `alpha_12`.
    pub fn coord_name(&self, coord: Coord) -> String {
        match coord {
            Coord::Mu(i) => format!("mu_{}", join_indices(&[i])),
            Coord::Coef { i, j, l } => {
                if self.is_marked() {
                    format!("m_{}", join_indices(&[i, j, l]))
                } else {
                    format!("alpha_{}", join_indices(&[i, j]))
                }
            }
            Coord::Beta { i, j } => format!("beta_{}", join_indices(&[i, j])),
            Coord::KernelA { i, j, r, c } => format!("a_{}", join_indices(&[i, j, r, c])),
        }
    }

    /// Inverse of [`ModelParams::coord_name`].
    pub fn parse_coord(&self, name: &str) -> Option<Coord> {
        self.all_coords().into_iter().find(|&c| self.coord_name(c) == name)
    }
}

fn check_square<T>(rows: &[Vec<T>], d: usize, name: &str) -> Result<()> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParams(format!("{name} must be {d}x{d}")));
    }
    Ok(())
}

/// Ordered subset of coordinates exposed to an optimizer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    coords: Vec<Coord>,
}

impl Layout {
    /// All non-nuisance coordinates.
    pub fn full(params: &ModelParams) -> Self {
        Self { coords: params.coords() }
    }

    /// Non-nuisance coordinates minus those selected by `fixed`.
    pub fn free(params: &ModelParams, fixed: impl Fn(Coord) -> bool) -> Self {
        Self { coords: params.coords().into_iter().filter(|&c| !fixed(c)).collect() }
    }

    pub fn from_coords(coords: Vec<Coord>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn index_of(&self, coord: Coord) -> Option<usize> {
        self.coords.iter().position(|&c| c == coord)
    }

    pub fn values(&self, params: &ModelParams) -> Vec<f64> {
        self.coords.iter().map(|&c| params.get(c).expect("layout coordinate missing from model")).collect()
    }

    /// Copy of `params` with the layout coordinates replaced by `x`.
    pub fn apply(&self, params: &ModelParams, x: &[f64]) -> ModelParams {
        let mut out = params.clone();
        for (&c, &v) in self.coords.iter().zip(x) {
            out.set(c, v);
        }
        out
    }

    pub fn bounds(&self, bounds: &Bounds) -> (Vec<f64>, Vec<f64>) {
        self.coords.iter().map(|&c| bounds.for_coord(c)).unzip()
    }

    pub fn names(&self, params: &ModelParams) -> Vec<String> {
        self.coords.iter().map(|&c| params.coord_name(c)).collect()
    }
}
