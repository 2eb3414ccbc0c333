//! TOML configuration.
//!
//! Model keys sit at the top level; everything else lives in optional
//! sections:
//!
//! ```toml
//! dim = 3
//! mu = [0.2, 0.1, 0.1]
//! alpha = [[0.0, 0.2, 0.0], [0.2, 0.1, 0.4], [0.0, 0.0, 0.2]]
//! beta = [["*", 0.9, "*"], [0.5, 1.2, 0.6], ["*", "*", 0.7]]
//!
//! [bounds]
//! coef = [0.0, 10.0]
//!
//! [po]
//! q = 1.0
//! gamma = 1.0
//! a = 0.5
//!
//! [experiment]
//! horizons = [100, 500, 3000]
//! trials = 100
//! methods = ["qmle", "po"]
//! base_seed = 1
//! ```
//!
//! Marked models replace `alpha` by `m` (`m[i][j]` is a vector over topics)
//! and add a `[mark]` section. Matrix kernels set `kernel = "matrix_exp"`,
//! `order`, and per-edge matrices `a[i][j]`, `b[i][j]`. A decay written as
//! `"*"` is a nuisance entry of an edge without excitation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::marks::MarkKernel;
use crate::model::{Bounds, Coord, KernelForm, KernelSpec, ModelParams};
use crate::optimize::{ElasticNetOptions, LbfgsOptions};
use crate::po::{Method, PoHyper};
use crate::simulate::SimulationOptions;

/// A decay entry: a positive number, or `"*"` for a nuisance decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay(pub Option<f64>);

impl Serialize for Decay {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("*"),
        }
    }
}

impl<'de> Deserialize<'de> for Decay {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Decay(Some(v))),
            Raw::Text(s) if s == "*" => Ok(Decay(None)),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"*\", got {s:?}"))),
        }
    }
}

fn scalar_form() -> KernelForm {
    KernelForm::ScalarExp
}

type Nested2 = Vec<Vec<f64>>;
type Nested3 = Vec<Vec<Vec<f64>>>;
type Nested4 = Vec<Vec<Vec<Vec<f64>>>>;

/// Serialized form of [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    #[serde(default)]
    pub mark_dim: usize,
    #[serde(default = "scalar_form")]
    pub kernel: KernelForm,
    pub mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Nested2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Nested3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Vec<Decay>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Nested4>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Nested4>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark_weights: Option<Nested3>,
}

const MODEL_KEYS: &[&str] = &["dim", "mark_dim", "kernel", "mu", "alpha", "m", "beta", "order", "a", "b", "mark_weights"];

fn missing(key: &str) -> Error {
    Error::Config(format!("missing key `{key}`"))
}

fn edge_matrices(raw: &Nested4, d: usize, p: usize, name: &str) -> Result<Vec<DMatrix<f64>>> {
    if raw.len() != d || raw.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("`{name}` must have {d}x{d} entries")));
    }
    raw.iter()
        .flatten()
        .map(|m| {
            if m.len() != p || m.iter().any(|r| r.len() != p) {
                return Err(Error::Config(format!("every `{name}[i][j]` must be {p}x{p}")));
            }
            Ok(DMatrix::from_row_iterator(p, p, m.iter().flatten().copied()))
        })
        .collect()
}

fn matrices_out(ms: &[DMatrix<f64>], d: usize) -> Nested4 {
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let m = &ms[i * d + j];
                    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
                })
                .collect()
        })
        .collect()
}

impl ModelConfig {
    pub fn to_params(&self) -> Result<ModelParams> {
        let d = self.dim;
        if self.mu.len() != d {
            return Err(Error::Config(format!("`mu` has {} entries but dim = {d}", self.mu.len())));
        }
        let decays = || -> Result<Vec<Vec<Option<f64>>>> {
            let beta = self.beta.as_ref().ok_or_else(|| missing("beta"))?;
            Ok(beta.iter().map(|r| r.iter().map(|b| b.0).collect()).collect())
        };
        match self.kernel {
            KernelForm::ScalarExp => {
                if self.a.is_some() || self.b.is_some() || self.order.is_some() || self.mark_weights.is_some() {
                    return Err(Error::Config("`a`, `b`, `order`, `mark_weights` belong to matrix kernels".into()));
                }
                if self.mark_dim == 0 {
                    if self.m.is_some() {
                        return Err(Error::Config("`m` needs mark_dim > 0".into()));
                    }
                    let alpha = self.alpha.clone().ok_or_else(|| missing("alpha"))?;
                    ModelParams::scalar_exp(self.mu.clone(), alpha, decays()?)
                } else {
                    if self.alpha.is_some() {
                        return Err(Error::Config("marked models take `m` instead of `alpha`".into()));
                    }
                    let m = self.m.clone().ok_or_else(|| missing("m"))?;
                    if m.iter().flatten().any(|w| w.len() != self.mark_dim) {
                        return Err(Error::Config(format!("every `m[i][j]` must have {} entries", self.mark_dim)));
                    }
                    ModelParams::marked_scalar_exp(self.mu.clone(), m, decays()?)
                }
            }
            KernelForm::MatrixExp => {
                if self.alpha.is_some() || self.m.is_some() || self.beta.is_some() {
                    return Err(Error::Config("matrix kernels take `a` and `b` instead of `alpha`, `m`, `beta`".into()));
                }
                let p = self.order.ok_or_else(|| missing("order"))?;
                let a = edge_matrices(self.a.as_ref().ok_or_else(|| missing("a"))?, d, p, "a")?;
                let b = edge_matrices(self.b.as_ref().ok_or_else(|| missing("b"))?, d, p, "b")?;
                let weights = match &self.mark_weights {
                    None => None,
                    Some(w) => {
                        if w.len() != d
                            || w.iter().any(|r| r.len() != d)
                            || w.iter().flatten().any(|v| v.len() != self.mark_dim)
                        {
                            return Err(Error::Config(format!("`mark_weights` must be {d}x{d}x{}", self.mark_dim)));
                        }
                        Some(w.iter().flatten().flatten().copied().collect())
                    }
                };
                ModelParams::matrix_exp(self.mu.clone(), a, b, self.mark_dim, weights)
            }
        }
    }

    pub fn from_params(params: &ModelParams) -> Self {
        let d = params.dim();
        let mut out = ModelConfig {
            dim: d,
            mark_dim: params.mark_dim(),
            kernel: params.form(),
            mu: params.mu().to_vec(),
            alpha: None,
            m: None,
            beta: None,
            order: None,
            a: None,
            b: None,
            mark_weights: None,
        };
        match params.kernel() {
            KernelSpec::ScalarExp { .. } => {
                out.beta = Some((0..d).map(|i| (0..d).map(|j| Decay(params.beta(i, j))).collect()).collect());
                if params.is_marked() {
                    out.m = Some((0..d).map(|i| (0..d).map(|j| params.coef(i, j).to_vec()).collect()).collect());
                } else {
                    out.alpha = Some((0..d).map(|i| (0..d).map(|j| params.coef(i, j)[0]).collect()).collect());
                }
            }
            KernelSpec::MatrixExp { order, a, b, mark_weights } => {
                let l = params.mark_dim();
                out.order = Some(*order);
                out.a = Some(matrices_out(a, d));
                out.b = Some(matrices_out(b, d));
                out.mark_weights = mark_weights.as_ref().map(|w| {
                    (0..d).map(|i| (0..d).map(|j| w[(i * d + j) * l..(i * d + j + 1) * l].to_vec()).collect()).collect()
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    #[default]
    None,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkConfig {
    pub kind: MarkKind,
    /// Dirichlet concentration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

impl MarkConfig {
    pub fn to_kernel(&self) -> Result<MarkKernel> {
        match self.kind {
            MarkKind::None => {
                if self.alpha.is_some() {
                    return Err(Error::Config("`mark.alpha` needs mark.kind = \"dirichlet\"".into()));
                }
                Ok(MarkKernel::None)
            }
            MarkKind::Dirichlet => {
                MarkKernel::dirichlet(self.alpha.clone().ok_or_else(|| missing("mark.alpha"))?)
            }
        }
    }

    pub fn from_kernel(kernel: &MarkKernel) -> Result<Self> {
        match kernel {
            MarkKernel::None => Ok(Self::default()),
            MarkKernel::IidDirichlet { concentration } => {
                Ok(Self { kind: MarkKind::Dirichlet, alpha: Some(concentration.clone()) })
            }
            MarkKernel::Custom(_) => Err(Error::Unsupported("custom mark kernels have no config form".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Horizon used by `simulate` and, when reading event files, as the
    /// observation window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub lookahead: f64,
    pub max_expected_events: f64,
    pub burn_in: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let o = SimulationOptions::default();
        Self { horizon: None, lookahead: o.lookahead, max_expected_events: o.max_expected_events, burn_in: o.burn_in }
    }
}

impl SimulationConfig {
    pub fn options(&self) -> SimulationOptions {
        SimulationOptions {
            lookahead: self.lookahead,
            max_expected_events: self.max_expected_events,
            burn_in: self.burn_in,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Random starts in addition to the default one.
    pub restarts: usize,
    /// Seed for the random starts.
    pub seed: u64,
    /// Coordinates held at their configured values, by name (`beta_12`) or
    /// by block (`mu`, `alpha`, `m`, `beta`).
    pub fixed: Vec<String>,
    pub lbfgs: LbfgsOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoConfig {
    pub q: f64,
    pub gamma: f64,
    pub a: f64,
}

impl Default for PoConfig {
    fn default() -> Self {
        Self { q: 1.0, gamma: 1.0, a: 0.5 }
    }
}

impl PoConfig {
    pub fn hyper(&self) -> Result<PoHyper> {
        PoHyper::new(self.q, self.gamma, self.a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticNetConfig {
    pub c_e: f64,
    pub rho_e: f64,
    /// Known decay shared by every edge; when absent the model's decays are
    /// used and must all be given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub zero_snap: f64,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        let o = ElasticNetOptions::default();
        Self { c_e: 1e-3, rho_e: 0.05, beta: None, tol: o.tol, max_iter: o.max_iter, zero_snap: o.zero_snap }
    }
}

impl ElasticNetConfig {
    pub fn options(&self) -> ElasticNetOptions {
        ElasticNetOptions { tol: self.tol, max_iter: self.max_iter, zero_snap: self.zero_snap, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizons: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizons: vec![100.0, 500.0, 3000.0],
            trials: 100,
            methods: vec![Method::Qmle, Method::Po],
            base_seed: 1,
            output: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Sections {
    bounds: Bounds,
    mark: MarkConfig,
    simulation: SimulationConfig,
    fit: FitConfig,
    po: PoConfig,
    elastic_net: ElasticNetConfig,
    experiment: ExperimentConfig,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub model: ModelConfig,
    pub params: ModelParams,
    pub marks: MarkKernel,
    pub bounds: Bounds,
    pub simulation: SimulationConfig,
    pub fit: FitConfig,
    pub hyper: PoHyper,
    pub elastic_net: ElasticNetConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut model = toml::Table::new();
        let mut rest = toml::Table::new();
        for (k, v) in table {
            if MODEL_KEYS.contains(&k.as_str()) {
                model.insert(k, v);
            } else {
                rest.insert(k, v);
            }
        }
        let model: ModelConfig = toml::Value::Table(model).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let sections: Sections = toml::Value::Table(rest).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::assemble(model, sections)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn assemble(model: ModelConfig, s: Sections) -> Result<Self> {
        let params = model.to_params()?;
        let marks = s.mark.to_kernel()?;
        if marks.dim() != params.mark_dim() {
            return Err(Error::Config(format!(
                "mark kernel has dimension {} but the model has mark_dim = {}",
                marks.dim(),
                params.mark_dim()
            )));
        }
        s.bounds.validate()?;
        let hyper = s.po.hyper()?;
        if let Some(h) = s.simulation.horizon {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::Config("simulation.horizon must be finite and >= 0".into()));
            }
        }
        if !(s.simulation.lookahead > 0.0) || !(s.simulation.burn_in >= 0.0) {
            return Err(Error::Config("simulation needs lookahead > 0 and burn_in >= 0".into()));
        }
        let en = &s.elastic_net;
        if !(en.c_e >= 0.0 && en.c_e.is_finite()) || !(0.0..=1.0).contains(&en.rho_e) {
            return Err(Error::Config("elastic_net needs c_e >= 0 and rho_e in [0, 1]".into()));
        }
        if let Some(b) = en.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Config("elastic_net.beta must be positive".into()));
            }
        }
        let ex = &s.experiment;
        if ex.trials == 0 {
            return Err(Error::Config("experiment.trials must be at least 1".into()));
        }
        if ex.methods.is_empty() {
            return Err(Error::Config("experiment.methods must not be empty".into()));
        }
        if ex.methods.iter().collect::<BTreeSet<_>>().len() != ex.methods.len() {
            return Err(Error::Config("experiment.methods lists a method twice".into()));
        }
        if ex.horizons.is_empty() || ex.horizons.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config("experiment.horizons must be positive".into()));
        }
        if ex.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("experiment.horizons must be strictly ascending".into()));
        }
        let config = Self {
            model,
            params,
            marks,
            bounds: s.bounds,
            simulation: s.simulation,
            fit: s.fit,
            hyper,
            elastic_net: s.elastic_net,
            experiment: s.experiment,
        };
        config.fixed_coords()?;
        if config.experiment.methods.contains(&Method::ElasticNet) {
            config.elastic_net_decays()?;
        }
        Ok(config)
    }

    /// Resolve `fit.fixed` against the model.
    pub fn fixed_coords(&self) -> Result<Vec<Coord>> {
        let p = &self.params;
        let mut out = BTreeSet::new();
        for name in &self.fit.fixed {
            let block: Vec<Coord> = p
                .all_coords()
                .into_iter()
                .filter(|&c| match (name.as_str(), c) {
                    ("mu", Coord::Mu(_)) => true,
                    ("alpha", Coord::Coef { .. }) => !p.is_marked(),
                    ("m", Coord::Coef { .. }) => p.is_marked(),
                    ("beta", Coord::Beta { .. }) => true,
                    ("a", Coord::KernelA { .. }) => true,
                    _ => false,
                })
                .collect();
            if !block.is_empty() {
                out.extend(block);
                continue;
            }
            match p.parse_coord(name) {
                Some(c) => {
                    out.insert(c);
                }
                None => return Err(Error::Config(format!("fit.fixed: unknown coordinate `{name}`"))),
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Known decays for the elastic-net baseline, row-major.
    pub fn elastic_net_decays(&self) -> Result<Vec<Option<f64>>> {
        let p = &self.params;
        if p.form() != KernelForm::ScalarExp || p.is_marked() {
            return Err(Error::Config("the elastic-net baseline needs an unmarked exponential model".into()));
        }
        let d = p.dim();
        match self.elastic_net.beta {
            Some(b) => Ok(vec![Some(b); d * d]),
            None => {
                let betas: Vec<Option<f64>> = (0..d * d).map(|e| p.beta(e / d, e % d)).collect();
                if betas.iter().any(Option::is_none) {
                    return Err(Error::Config(
                        "the elastic-net baseline needs every decay; set elastic_net.beta or give all of `beta`".into(),
                    ));
                }
                Ok(betas)
            }
        }
    }

    /// Horizon for `simulate` and for reading event files.
    pub fn horizon(&self) -> Option<f64> {
        self.simulation.horizon.or_else(|| self.experiment.horizons.last().copied())
    }
}
