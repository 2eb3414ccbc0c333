//! Seeded Monte Carlo harness and its CSV report.
//!
//! Trial `k` draws one path with seed `base_seed + k` over the longest
//! horizon; shorter horizons use its prefix. Every method is fitted on the
//! same truncated log. Trials run on a dedicated thread pool and are reduced
//! in trial order, so the report does not depend on the pool size.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::model::{stationary_mean_intensity, Coord, ModelParams};
use crate::po::{Estimator, Method};
use crate::simulate::simulate_seeded;

/// Metrics of one coordinate in one (method, horizon) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateStats {
    pub name: String,
    /// `None` when the true value is undefined (nuisance).
    pub truth: Option<f64>,
    /// Successful fits in which the estimate is exactly zero.
    pub zeros: usize,
    pub fits: usize,
    pub zero_rate: f64,
    /// `None` for nuisance coordinates or when no fit defines the estimate.
    pub mse: Option<f64>,
    pub mse_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialErrors {
    pub trial: usize,
    /// `sqrt(T) (estimate - truth)` per coordinate; `None` where undefined.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub method: Method,
    pub horizon: f64,
    pub trials: usize,
    pub coordinates: Vec<CoordinateStats>,
    pub errors: Vec<TrialErrors>,
    pub failures: Vec<Failure>,
}

impl McCell {
    pub fn coordinate(&self, name: &str) -> Option<&CoordinateStats> {
        self.coordinates.iter().find(|c| c.name == name)
    }

    /// Scaled errors of one coordinate over the successful trials.
    pub fn error_samples(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.coordinates.iter().position(|c| c.name == name)?;
        Some(self.errors.iter().map(|e| e.values[k]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    /// Ordered by horizon, then by method in configuration order.
    pub cells: Vec<McCell>,
}

impl McReport {
    pub fn cell(&self, method: Method, horizon: f64) -> Option<&McCell> {
        self.cells.iter().find(|c| c.method == method && c.horizon == horizon)
    }
}

/// Coordinates a method reports on: everything the truth defines, minus
/// what the method holds fixed.
pub fn reported_coords(truth: &ModelParams, estimator: &Estimator, method: Method) -> Vec<Coord> {
    truth
        .all_coords()
        .into_iter()
        .filter(|c| match method {
            Method::ElasticNet => matches!(c, Coord::Mu(_) | Coord::Coef { .. }),
            Method::Qmle | Method::Po => !estimator.fit.fixed.contains(c),
        })
        .collect()
}

type TrialOutcome = Vec<std::result::Result<Vec<Option<f64>>, String>>;

fn run_trial(config: &Config, estimator: &Estimator, coords: &[Vec<Coord>], trial: usize) -> TrialOutcome {
    let exp = &config.experiment;
    let cells = exp.horizons.len() * exp.methods.len();
    let t_max = *exp.horizons.last().expect("horizons are validated non-empty");
    let seed = exp.base_seed.wrapping_add(trial as u64);
    let log = match simulate_seeded(&config.params, &config.marks, t_max, seed, &config.simulation.options()) {
        Ok(l) => l,
        Err(e) => return vec![Err(format!("simulation: {e}")); cells],
    };
    let mut out = Vec::with_capacity(cells);
    for &t in &exp.horizons {
        let sub = match log.truncate(t) {
            Ok(s) => s,
            Err(e) => {
                out.extend(std::iter::repeat_n(Err(e.to_string()), exp.methods.len()));
                continue;
            }
        };
        for (m, fit) in estimator.fit_many(&sub, &exp.methods).into_iter().enumerate() {
            out.push(
                fit.map(|r| coords[m].iter().map(|&c| r.estimate(c)).collect()).map_err(|e| e.to_string()),
            );
        }
    }
    out
}

/// Run the configured experiment on `threads` worker threads.
pub fn run_mc(config: &Config, threads: usize) -> Result<McReport> {
    if threads == 0 {
        return Err(Error::InvalidArgument("at least one worker thread is required".into()));
    }
    stationary_mean_intensity(&config.params, config.marks.stationary_mean().as_deref())?;
    let estimator = Estimator::from_config(config)?;
    let exp = &config.experiment;
    let mut truth = config.params.clone();
    truth.prune_nuisance();
    let coords: Vec<Vec<Coord>> = exp.methods.iter().map(|&m| reported_coords(&truth, &estimator, m)).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..exp.trials).into_par_iter().map(|k| run_trial(config, &estimator, &coords, k)).collect()
    });

    let mut cells = Vec::new();
    for (h, &t) in exp.horizons.iter().enumerate() {
        for (m, &method) in exp.methods.iter().enumerate() {
            let idx = h * exp.methods.len() + m;
            let cs = &coords[m];
            let truth_vals: Vec<Option<f64>> = cs.iter().map(|&c| truth.get(c)).collect();
            let mut zeros = vec![0usize; cs.len()];
            let mut sq = vec![0.0f64; cs.len()];
            let mut n_sq = vec![0usize; cs.len()];
            let mut errors = Vec::new();
            let mut failures = Vec::new();
            for (k, outcome) in outcomes.iter().enumerate() {
                match &outcome[idx] {
                    Ok(est) => {
                        let mut values = Vec::with_capacity(cs.len());
                        for (c, (e, tr)) in est.iter().zip(&truth_vals).enumerate() {
                            if *e == Some(0.0) {
                                zeros[c] += 1;
                            }
                            match (e, tr) {
                                (Some(e), Some(tr)) => {
                                    sq[c] += (e - tr) * (e - tr);
                                    n_sq[c] += 1;
                                    values.push(Some(t.sqrt() * (e - tr)));
                                }
                                _ => values.push(None),
                            }
                        }
                        errors.push(TrialErrors { trial: k, values });
                    }
                    Err(msg) => failures.push(Failure { trial: k, message: msg.clone() }),
                }
            }
            let fits = errors.len();
            let coordinates = cs
                .iter()
                .enumerate()
                .map(|(c, &coord)| CoordinateStats {
                    name: truth.coord_name(coord),
                    truth: truth_vals[c],
                    zeros: zeros[c],
                    fits,
                    zero_rate: if fits == 0 { 0.0 } else { zeros[c] as f64 / fits as f64 },
                    mse: (truth_vals[c].is_some() && n_sq[c] > 0).then(|| sq[c] / n_sq[c] as f64),
                    mse_samples: n_sq[c],
                })
                .collect();
            cells.push(McCell { method, horizon: t, trials: exp.trials, coordinates, errors, failures });
        }
    }
    Ok(McReport { cells })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "*".to_string(), |x| x.to_string())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == "*" {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| Error::Config(format!("not a number: `{s}`")))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Config(format!("malformed report field `{s}`")))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("report CSV: {other:?}")),
    }
}

fn errors_file(method: Method, horizon: f64) -> String {
    format!("errors_{}_{}.csv", method.name(), horizon)
}

/// Write `zero_rates.csv`, `mse.csv`, `failures.csv` and one
/// `errors_{method}_{T}.csv` per cell into `dir`.
pub fn export_report(report: &McReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut zr = csv::Writer::from_path(dir.join("zero_rates.csv")).map_err(csv_err)?;
    let mut mse = csv::Writer::from_path(dir.join("mse.csv")).map_err(csv_err)?;
    let mut fl = csv::Writer::from_path(dir.join("failures.csv")).map_err(csv_err)?;
    zr.write_record(["method", "T", "coordinate", "zero_rate", "zeros", "fits", "trials"]).map_err(csv_err)?;
    mse.write_record(["method", "T", "coordinate", "truth", "mse", "samples"]).map_err(csv_err)?;
    fl.write_record(["method", "T", "trial", "message"]).map_err(csv_err)?;
    for cell in &report.cells {
        let (m, t) = (cell.method.name(), cell.horizon.to_string());
        for c in &cell.coordinates {
            zr.write_record([
                m,
                &t,
                &c.name,
                &c.zero_rate.to_string(),
                &c.zeros.to_string(),
                &c.fits.to_string(),
                &cell.trials.to_string(),
            ])
            .map_err(csv_err)?;
            mse.write_record([m, &t, &c.name, &opt(c.truth), &opt(c.mse), &c.mse_samples.to_string()])
                .map_err(csv_err)?;
        }
        for f in &cell.failures {
            fl.write_record([m, &t, &f.trial.to_string(), &f.message]).map_err(csv_err)?;
        }
        let mut er = csv::Writer::from_path(dir.join(errors_file(cell.method, cell.horizon))).map_err(csv_err)?;
        let mut header = vec!["trial".to_string()];
        header.extend(cell.coordinates.iter().map(|c| c.name.clone()));
        er.write_record(&header).map_err(csv_err)?;
        for e in &cell.errors {
            let mut row = vec![e.trial.to_string()];
            row.extend(e.values.iter().map(|&v| opt(v)));
            er.write_record(&row).map_err(csv_err)?;
        }
        er.flush()?;
    }
    zr.flush()?;
    mse.flush()?;
    fl.flush()?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.records().map(|x| x.map_err(csv_err)).collect()
}

/// Inverse of [`export_report`].
pub fn parse_report(dir: &Path) -> Result<McReport> {
    let mut cells: Vec<McCell> = Vec::new();
    for row in read_rows(&dir.join("zero_rates.csv"))? {
        let method: Method = row[0].parse()?;
        let horizon: f64 = parse_num(&row[1])?;
        let stats = CoordinateStats {
            name: row[2].to_string(),
            truth: None,
            zero_rate: parse_num(&row[3])?,
            zeros: parse_num(&row[4])?,
            fits: parse_num(&row[5])?,
            mse: None,
            mse_samples: 0,
        };
        let trials: usize = parse_num(&row[6])?;
        match cells.iter_mut().find(|c| c.method == method && c.horizon == horizon) {
            Some(c) => c.coordinates.push(stats),
            None => cells.push(McCell {
                method,
                horizon,
                trials,
                coordinates: vec![stats],
                errors: Vec::new(),
                failures: Vec::new(),
            }),
        }
    }
    let find = |cells: &mut Vec<McCell>, m: &str, t: &str| -> Result<usize> {
        let method: Method = m.parse()?;
        let horizon: f64 = parse_num(t)?;
        cells
            .iter()
            .position(|c| c.method == method && c.horizon == horizon)
            .ok_or_else(|| Error::Config(format!("report row for unknown cell {m}, T = {t}")))
    };
    for row in read_rows(&dir.join("mse.csv"))? {
        let k = find(&mut cells, &row[0], &row[1])?;
        let c = cells[k]
            .coordinates
            .iter_mut()
            .find(|c| c.name == row[2])
            .ok_or_else(|| Error::Config(format!("mse row for unknown coordinate `{}`", &row[2])))?;
        c.truth = parse_opt(&row[3])?;
        c.mse = parse_opt(&row[4])?;
        c.mse_samples = parse_num(&row[5])?;
    }
    for row in read_rows(&dir.join("failures.csv"))? {
        let k = find(&mut cells, &row[0], &row[1])?;
        cells[k].failures.push(Failure { trial: parse_num(&row[2])?, message: row[3].to_string() });
    }
    for cell in cells.iter_mut() {
        for row in read_rows(&dir.join(errors_file(cell.method, cell.horizon)))? {
            let values = row.iter().skip(1).map(parse_opt).collect::<Result<Vec<_>>>()?;
            cell.errors.push(TrialErrors { trial: parse_num(&row[0])?, values });
        }
    }
    Ok(McReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::po::FitOptions;

    const SMALL: &str = r#"
        dim = 2
        mu = [0.3, 0.2]
        alpha = [[0.4, 0.0], [0.3, 0.0]]
        beta = [[1.0, "*"], [1.0, "*"]]

        [experiment]
        horizons = [100.0, 200.0]
        trials = 3
        methods = ["qmle", "po"]
        base_seed = 5
    "#;

    #[test]
    fn single_trial_matches_direct_fit() {
        let mut cfg = Config::from_toml_str(SMALL).unwrap();
        cfg.experiment.trials = 1;
        let report = run_mc(&cfg, 1).unwrap();
        let log = simulate_seeded(&cfg.params, &cfg.marks, 200.0, 5, &cfg.simulation.options()).unwrap();
        let opts = FitOptions { bounds: cfg.bounds, lbfgs: cfg.fit.lbfgs, ..FitOptions::default() };
        let fit = crate::po::po_estimate(&log, &cfg.params, &opts, &cfg.hyper).unwrap();
        let cell = report.cell(Method::Po, 200.0).unwrap();
        for c in &cell.coordinates {
            let coord = cfg.params.parse_coord(&c.name).unwrap();
            let est = fit.estimate(coord);
            assert_eq!(c.zero_rate, if est == Some(0.0) { 1.0 } else { 0.0 });
            match (est, c.truth) {
                (Some(e), Some(t)) => assert_eq!(c.mse, Some((e - t) * (e - t))),
                _ => assert_eq!(c.mse, None),
            }
        }
    }

    #[test]
    fn report_round_trips_through_csv() {
        let cfg = Config::from_toml_str(SMALL).unwrap();
        let mut report = run_mc(&cfg, 2).unwrap();
        report.cells[0].failures.push(Failure { trial: 7, message: "bad, \"quoted\" fit".into() });
        let dir = tempfile::tempdir().unwrap();
        export_report(&report, dir.path()).unwrap();
        assert_eq!(parse_report(dir.path()).unwrap(), report);
        let mse = fs::read_to_string(dir.path().join("mse.csv")).unwrap();
        assert!(mse.contains("beta_12,*,*"));
    }

    #[test]
    fn sample_counts_add_up() {
        let cfg = Config::from_toml_str(SMALL).unwrap();
        let report = run_mc(&cfg, 3).unwrap();
        assert_eq!(report.cells.len(), 4);
        for cell in &report.cells {
            assert_eq!(cell.errors.len() + cell.failures.len(), cell.trials);
            for c in &cell.coordinates {
                assert!((0.0..=1.0).contains(&c.zero_rate));
                if c.zero_rate == 1.0 && c.truth == Some(0.0) {
                    assert_eq!(c.mse, Some(0.0));
                }
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_the_report() {
        let cfg = Config::from_toml_str(SMALL).unwrap();
        assert_eq!(run_mc(&cfg, 1).unwrap(), run_mc(&cfg, 4).unwrap());
    }

    #[test]
    fn unstable_truth_rejected() {
        let cfg = Config::from_toml_str(&SMALL.replace("[0.4, 0.0], [0.3, 0.0]", "[1.4, 0.0], [0.3, 0.0]")).unwrap();
        assert!(matches!(run_mc(&cfg, 1), Err(Error::Unstable(_))));
    }
}
