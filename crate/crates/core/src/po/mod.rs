//! Penalized-to-ordinary (P-O) sparse estimation and its baselines.
//!
//! Step 1 maximizes the quasi log-likelihood over all coordinates. Step 2
//! thresholds the excitation coordinates of the first-stage estimate to
//! pick a zero set. Step 3 pins the zero set, drops decays left on empty
//! edges, and re-maximizes over what remains.

mod threshold;

pub use threshold::{step2_threshold, threshold_coordinate, threshold_objective, PoHyper, Step2};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{Config, MarkConfig, ModelConfig};
use crate::error::{Error, Result};
use crate::events::EventLog;
use crate::likelihood::loglik_point;
use crate::marks::MarkKernel;
use crate::model::{Bounds, Coord, KernelForm, Layout, ModelParams};
use crate::optimize::{elastic_net_ls, maximize_box, BoxProblem, Diagnostics, ElasticNetOptions, LbfgsOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qmle,
    Po,
    #[serde(alias = "elastic-net")]
    ElasticNet,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Qmle => "qmle",
            Method::Po => "po",
            Method::ElasticNet => "elastic_net",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qmle" => Ok(Method::Qmle),
            "po" => Ok(Method::Po),
            "elastic_net" | "elastic-net" => Ok(Method::ElasticNet),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

/// Settings shared by the likelihood-based fits.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub bounds: Bounds,
    pub lbfgs: LbfgsOptions,
    /// Random starts tried after the default one.
    pub restarts: usize,
    pub seed: u64,
    /// Coordinates held at the template's values.
    pub fixed: Vec<Coord>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { bounds: Bounds::default(), lbfgs: LbfgsOptions::default(), restarts: 0, seed: 0, fixed: Vec::new() }
    }
}

/// One maximization stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub params: ModelParams,
    /// Coordinates the stage optimized over.
    pub estimated: Vec<Coord>,
    /// `objective` holds the unscaled quasi log-likelihood; `grad_norm` is
    /// measured on the per-unit-time objective that was optimized.
    pub diagnostics: Diagnostics,
}

/// Outcome of the thresholding step.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdStage {
    pub params: ModelParams,
    pub coords: Vec<Coord>,
    pub first_stage: Vec<f64>,
    pub kappa: Vec<f64>,
    pub thresholded: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: Method,
    pub horizon: f64,
    pub n_events: usize,
    pub step1: Stage,
    pub step2: Option<ThresholdStage>,
    pub step3: Option<Stage>,
    /// Excitation coordinates estimated as exactly zero.
    pub zero_set: Vec<Coord>,
    /// Decays dropped because their edge was selected away.
    pub nuisance: Vec<Coord>,
    /// Coordinates not estimated by the method.
    pub fixed: Vec<Coord>,
    pub hyper: Option<PoHyper>,
}

impl FitResult {
    pub fn final_params(&self) -> &ModelParams {
        self.step3.as_ref().map_or(&self.step1.params, |s| &s.params)
    }

    /// Final value of a coordinate; `None` when it is a nuisance decay.
    pub fn estimate(&self, coord: Coord) -> Option<f64> {
        self.final_params().get(coord)
    }

    pub fn to_json(&self, marks: &MarkKernel) -> Result<Value> {
        let p = self.final_params();
        let names = |cs: &[Coord]| -> Vec<String> { cs.iter().map(|&c| p.coord_name(c)).collect() };
        let mut nuisance = Map::new();
        for &c in &self.nuisance {
            nuisance.insert(p.coord_name(c), number(self.step1.params.get(c)));
        }
        let mut stages = vec![stage_json("step1", &self.step1)];
        if let Some(s2) = &self.step2 {
            let mut values = Map::new();
            for (k, &c) in s2.coords.iter().enumerate() {
                values.insert(
                    p.coord_name(c),
                    json!({"first_stage": s2.first_stage[k], "kappa": s2.kappa[k], "thresholded": s2.thresholded[k]}),
                );
            }
            stages.push(json!({"name": "step2", "estimates": estimates_json(&s2.params), "threshold": values}));
        }
        if let Some(s3) = &self.step3 {
            stages.push(stage_json("step3", s3));
        }
        let mut out = json!({
            "method": self.method,
            "horizon": self.horizon,
            "events": self.n_events,
            "estimate": ModelConfig::from_params(p),
            "marks": MarkConfig::from_kernel(marks)?,
            "zero_set": names(&self.zero_set),
            "nuisance": nuisance,
            "fixed": names(&self.fixed),
            "stages": stages,
        });
        if let Some(h) = &self.hyper {
            out["hyper"] = json!({
                "q": h.q(),
                "gamma": h.gamma(),
                "a": h.a(),
                "alpha_T": h.alpha_t(self.horizon),
                "epsilon_T": h.epsilon_t(self.horizon),
            });
        }
        Ok(out)
    }
}

fn number(v: Option<f64>) -> Value {
    match v {
        Some(x) => json!(x),
        None => json!("*"),
    }
}

fn estimates_json(p: &ModelParams) -> Value {
    let mut m = Map::new();
    for c in p.all_coords() {
        m.insert(p.coord_name(c), number(p.get(c)));
    }
    Value::Object(m)
}

fn stage_json(name: &str, s: &Stage) -> Value {
    json!({"name": name, "estimates": estimates_json(&s.params), "diagnostics": s.diagnostics})
}

fn default_start(log: &EventLog, c: Coord) -> f64 {
    match c {
        Coord::Mu(_) if log.horizon() > 0.0 => log.len() as f64 / (log.dim() as f64 * log.horizon()),
        Coord::Mu(_) => 0.1,
        Coord::Coef { .. } => 0.1,
        Coord::Beta { .. } => 1.0,
        Coord::KernelA { r, c: col, .. } => {
            if r == col {
                0.1
            } else {
                0.0
            }
        }
    }
}

fn random_start<R: Rng>(rng: &mut R, base: f64, c: Coord) -> f64 {
    match c {
        Coord::Mu(_) => base * rng.random_range(0.5..2.0),
        Coord::Coef { .. } => rng.random_range(0.0..0.5),
        Coord::Beta { .. } => rng.random_range(0.5..3.0),
        Coord::KernelA { r, c: col, .. } => {
            if r == col {
                rng.random_range(0.0..0.5)
            } else {
                rng.random_range(-0.1..0.1)
            }
        }
    }
}

/// Maximize the quasi log-likelihood over `layout`, trying each start and
/// keeping the best. Starts after the first that fail are skipped.
fn maximize_loglik(
    log: &EventLog,
    model: &ModelParams,
    layout: &Layout,
    bounds: &Bounds,
    starts: Vec<Vec<f64>>,
    lbfgs: &LbfgsOptions,
) -> Result<Stage> {
    let scale = if log.horizon() > 0.0 { 1.0 / log.horizon() } else { 1.0 };
    if layout.is_empty() {
        let value = loglik_point(log, model, layout)?.value;
        let diagnostics = Diagnostics {
            iterations: 0,
            evaluations: 1,
            objective: value,
            grad_norm: 0.0,
            converged: true,
            active: Vec::new(),
            message: "no free coordinates".into(),
        };
        return Ok(Stage { params: model.clone(), estimated: Vec::new(), diagnostics });
    }
    let (lo, hi) = layout.bounds(bounds);
    let problem = BoxProblem::new(lo.clone(), hi.clone())?;
    let mut best: Option<(Vec<f64>, Diagnostics)> = None;
    for (k, x0) in starts.into_iter().enumerate() {
        let x0: Vec<f64> = x0.iter().zip(lo.iter().zip(&hi)).map(|(v, (a, b))| v.clamp(*a, *b)).collect();
        let run = maximize_box(
            |x| {
                let o = loglik_point(log, &layout.apply(model, x), layout)?;
                Ok((o.value * scale, o.gradient.iter().map(|g| g * scale).collect()))
            },
            &problem,
            &x0,
            lbfgs,
        );
        match run {
            Ok((x, diag)) => {
                if best.as_ref().is_none_or(|(_, b)| diag.objective > b.objective) {
                    best = Some((x, diag));
                }
            }
            Err(e) if k == 0 => return Err(e),
            Err(_) => {}
        }
    }
    let (x, mut diagnostics) = best.expect("the default start either succeeds or returns early");
    diagnostics.objective /= scale;
    Ok(Stage { params: layout.apply(model, &x), estimated: layout.coords().to_vec(), diagnostics })
}

/// First-stage quasi maximum likelihood over every coordinate that is not
/// fixed. Nuisance decays in `template` are revived at 1.0 so every edge is
/// estimated.
pub fn step1_qmle(log: &EventLog, template: &ModelParams, opts: &FitOptions) -> Result<Stage> {
    opts.bounds.validate()?;
    let mut model = template.clone();
    for c in template.all_coords() {
        if let Coord::Beta { .. } = c {
            if template.get(c).is_none() {
                if opts.fixed.contains(&c) {
                    let name = template.coord_name(c);
                    return Err(Error::InvalidArgument(format!("fixed decay `{name}` has no value")));
                }
                model.set(c, 1.0f64.clamp(opts.bounds.beta.0, opts.bounds.beta.1));
            }
        }
    }
    let layout = Layout::free(&model, |c| opts.fixed.contains(&c));
    let x0: Vec<f64> = layout.coords().iter().map(|&c| default_start(log, c)).collect();
    let mut starts = vec![x0.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        starts.push(layout.coords().iter().zip(&x0).map(|(&c, &b)| random_start(&mut rng, b, c)).collect());
    }
    maximize_loglik(log, &model, &layout, &opts.bounds, starts, &opts.lbfgs)
}

/// Threshold the free excitation coordinates of a first-stage fit.
pub fn step2_stage(step1: &Stage, horizon: f64, hyper: &PoHyper, bounds: &Bounds) -> Result<ThresholdStage> {
    let coords: Vec<Coord> = step1.estimated.iter().copied().filter(Coord::is_excitation).collect();
    let first_stage: Vec<f64> = coords.iter().map(|&c| step1.params.get(c).unwrap_or(0.0)).collect();
    let boxes: Vec<(f64, f64)> = coords.iter().map(|&c| bounds.for_coord(c)).collect();
    let s2 = step2_threshold(&first_stage, &[], horizon, hyper, &boxes, &[])?;
    let mut params = step1.params.clone();
    for (&c, &v) in coords.iter().zip(&s2.theta) {
        params.set(c, v);
    }
    Ok(ThresholdStage { params, coords, first_stage, kappa: s2.kappa_theta, thresholded: s2.theta })
}

/// Refit with `zero_set` pinned at zero, starting from the first-stage
/// estimate. Returns the stage and the decays dropped as nuisance.
pub fn step3_refit(
    log: &EventLog,
    step1: &Stage,
    zero_set: &[Coord],
    opts: &FitOptions,
) -> Result<(Stage, Vec<Coord>)> {
    let mut model = step1.params.clone();
    for &c in zero_set {
        model.set(c, 0.0);
    }
    let pruned: Vec<Coord> = model.prune_nuisance().into_iter().map(|(i, j)| Coord::Beta { i, j }).collect();
    let layout = Layout::free(&model, |c| opts.fixed.contains(&c) || zero_set.contains(&c));
    let x0 = layout.values(&model);
    let stage = maximize_loglik(log, &model, &layout, &opts.bounds, vec![x0], &opts.lbfgs)?;
    Ok((stage, pruned))
}

fn excitation_zeros(stage: &Stage) -> Vec<Coord> {
    stage.params.all_coords().into_iter().filter(|c| c.is_excitation() && stage.params.get(*c) == Some(0.0)).collect()
}

fn qmle_from_step1(log: &EventLog, step1: Stage, opts: &FitOptions) -> FitResult {
    FitResult {
        method: Method::Qmle,
        horizon: log.horizon(),
        n_events: log.len(),
        zero_set: excitation_zeros(&step1),
        step1,
        step2: None,
        step3: None,
        nuisance: Vec::new(),
        fixed: opts.fixed.clone(),
        hyper: None,
    }
}

fn po_from_step1(log: &EventLog, step1: Stage, opts: &FitOptions, hyper: &PoHyper) -> Result<FitResult> {
    let s2 = step2_stage(&step1, log.horizon(), hyper, &opts.bounds)?;
    let selected: Vec<Coord> =
        s2.coords.iter().zip(&s2.thresholded).filter(|(_, &v)| v == 0.0).map(|(&c, _)| c).collect();
    let (step3, nuisance) = step3_refit(log, &step1, &selected, opts)?;
    let zero_set = excitation_zeros(&step3);
    Ok(FitResult {
        method: Method::Po,
        horizon: log.horizon(),
        n_events: log.len(),
        step1,
        step2: Some(s2),
        step3: Some(step3),
        zero_set,
        nuisance,
        fixed: opts.fixed.clone(),
        hyper: Some(*hyper),
    })
}

pub fn qmle_estimate(log: &EventLog, template: &ModelParams, opts: &FitOptions) -> Result<FitResult> {
    let step1 = step1_qmle(log, template, opts)?;
    Ok(qmle_from_step1(log, step1, opts))
}

pub fn po_estimate(log: &EventLog, template: &ModelParams, opts: &FitOptions, hyper: &PoHyper) -> Result<FitResult> {
    let step1 = step1_qmle(log, template, opts)?;
    po_from_step1(log, step1, opts, hyper)
}

/// Elastic-net least-squares baseline with known decays (`d x d`, row-major;
/// `None` edges are excluded).
pub fn elastic_net_estimate(
    log: &EventLog,
    decays: &[Option<f64>],
    c_e: f64,
    rho_e: f64,
    bounds: &Bounds,
    opts: &ElasticNetOptions,
) -> Result<FitResult> {
    let d = log.dim();
    if log.mark_dim() != 0 {
        return Err(Error::Unsupported("the elastic-net baseline needs unmarked events".into()));
    }
    let base = log.len() as f64 / (d as f64 * log.horizon());
    let mut x0 = vec![base; d];
    x0.extend(decays.iter().map(|b| if b.is_some() { 0.1 } else { 0.0 }));
    let (x, diagnostics) = elastic_net_ls(log, c_e, rho_e, decays, &x0, bounds, opts)?;
    let alpha: Vec<Vec<f64>> = (0..d).map(|i| x[d + i * d..d + (i + 1) * d].to_vec()).collect();
    let beta: Vec<Vec<Option<f64>>> = (0..d).map(|i| decays[i * d..(i + 1) * d].to_vec()).collect();
    let params = ModelParams::scalar_exp(x[..d].to_vec(), alpha, beta)?;
    let estimated: Vec<Coord> =
        params.coords().into_iter().filter(|c| matches!(c, Coord::Mu(_) | Coord::Coef { .. })).collect();
    let fixed = params.coords().into_iter().filter(|c| matches!(c, Coord::Beta { .. })).collect();
    let step1 = Stage { params, estimated, diagnostics };
    Ok(FitResult {
        method: Method::ElasticNet,
        horizon: log.horizon(),
        n_events: log.len(),
        zero_set: excitation_zeros(&step1),
        step1,
        step2: None,
        step3: None,
        nuisance: Vec::new(),
        fixed,
        hyper: None,
    })
}

/// Everything needed to run any method on a log.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub template: ModelParams,
    pub fit: FitOptions,
    pub hyper: PoHyper,
    pub elastic_net: Option<(Vec<Option<f64>>, f64, f64, ElasticNetOptions)>,
}

impl Estimator {
    pub fn from_config(config: &Config) -> Result<Self> {
        let fit = FitOptions {
            bounds: config.bounds,
            lbfgs: config.fit.lbfgs,
            restarts: config.fit.restarts,
            seed: config.fit.seed,
            fixed: config.fixed_coords()?,
        };
        let elastic_net = config
            .elastic_net_decays()
            .ok()
            .map(|b| (b, config.elastic_net.c_e, config.elastic_net.rho_e, config.elastic_net.options()));
        Ok(Self { template: config.params.clone(), fit, hyper: config.hyper, elastic_net })
    }

    pub fn fit(&self, log: &EventLog, method: Method) -> Result<FitResult> {
        self.fit_many(log, &[method]).pop().expect("one result per method")
    }

    /// Fit every method on the same log. QMLE and P-O share the first stage.
    pub fn fit_many(&self, log: &EventLog, methods: &[Method]) -> Vec<Result<FitResult>> {
        let needs_step1 = methods.iter().any(|m| matches!(m, Method::Qmle | Method::Po));
        let step1 = needs_step1.then(|| step1_qmle(log, &self.template, &self.fit));
        let first = || match step1.as_ref().expect("computed above") {
            Ok(s) => Ok(s.clone()),
            Err(e) => Err(e.duplicate()),
        };
        methods
            .iter()
            .map(|m| match m {
                Method::Qmle => first().map(|s| qmle_from_step1(log, s, &self.fit)),
                Method::Po => {
                    first().and_then(|s| po_from_step1(log, s, &self.fit, &self.hyper))
                }
                Method::ElasticNet => {
                    if self.template.form() != KernelForm::ScalarExp || self.template.is_marked() {
                        return Err(Error::Unsupported(
                            "the elastic-net baseline needs an unmarked exponential model".into(),
                        ));
                    }
                    let (decays, c_e, rho_e, opts) = self.elastic_net.as_ref().ok_or_else(|| {
                        Error::Config("the elastic-net baseline needs every decay; set elastic_net.beta".into())
                    })?;
                    elastic_net_estimate(log, decays, *c_e, *rho_e, &self.fit.bounds, opts)
                }
            })
            .collect()
    }
}
