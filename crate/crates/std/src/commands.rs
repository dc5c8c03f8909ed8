//! Subcommand implementations. Each returns the files it wrote.

use std::path::{Path, PathBuf};

use care_core::estimators::SampleRole;
use care_core::evaluation::{l2_distance, monte_carlo_points};
use care_core::model_selection::{CareSummary, GammaRow};
use care_core::{
    breslow_survival, concordance_index, fit_care, fit_feature_map_estimator, fit_kernel_estimator,
    predict_care, simulate_dataset, split_train_validation, theta_grid, CareEstimator, CenteredExternal, CvReport,
    ExternalPredictor, FeatureMapEstimator, KernelEstimator, SurvivalDataset, ThetaGrid,
};
use serde::{Deserialize, Serialize};

use crate::config::{builtin_external, ExternalSpec, FitMethod, RunConfig};
use crate::error::{CliError, Result};
use crate::io;
use crate::study::{run_study, StudySettings};

/// Options shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Globals {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
    pub quiet: bool,
}

impl Globals {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, suffix: &str) -> PathBuf {
        let mut s = self.out.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    }
}

/// Serialized fitted model, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "estimator", rename_all = "snake_case")]
pub enum SavedModel {
    Kernel(KernelEstimator),
    FeatureMap(FeatureMapEstimator),
    Care(CareSummary),
}

/// Selection JSON written by `cv` and `care`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    pub gamma_hat: f64,
    pub gamma: f64,
    pub theta: Vec<f64>,
    pub valid_loss: f64,
    pub externals: Vec<String>,
    pub gammas: Vec<GammaRow>,
}

impl From<&CvReport> for Selection {
    fn from(r: &CvReport) -> Self {
        Self {
            gamma_hat: r.gamma_hat,
            gamma: r.selected_gamma,
            theta: r.selected_theta.clone(),
            valid_loss: r.selected_valid_loss,
            externals: r.externals.clone(),
            gammas: r.gammas.clone(),
        }
    }
}

/// Evaluation JSON written by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub records: usize,
    pub events: usize,
    pub concordance: Option<f64>,
    pub l2_error: Option<f64>,
    pub mc_points: Option<usize>,
}

pub fn simulate(cfg: &RunConfig, g: &Globals) -> Result<Vec<PathBuf>> {
    let n = cfg.sample_size()?;
    let seed = g.seed.unwrap_or(cfg.seed);
    let (data, truth) = simulate_dataset(&cfg.dgp, n, seed)?;
    let mut written = Vec::new();
    let main = g.path(".csv");
    io::write_dataset(&main, &data)?;
    written.extend([main.clone(), io::sidecar_path(&main)]);
    let truth_path = g.path("_truth.csv");
    io::write_truth(&truth_path, data.covariates(), &truth.f0_values)?;
    written.push(truth_path);
    if cfg.split {
        let (train, valid) = split_train_validation(&data, seed)?;
        for (suffix, d) in [("_train.csv", &train), ("_valid.csv", &valid)] {
            let p = g.path(suffix);
            io::write_dataset(&p, d)?;
            written.extend([p.clone(), io::sidecar_path(&p)]);
        }
    }
    let censored = data.len() - data.event_count();
    g.note(format!("simulated {n} records, {censored} censored"));
    Ok(written)
}

fn required<'a>(p: &'a Option<PathBuf>, field: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::config(format!("{field}: required")))
}

/// Training and validation samples from `train`/`valid`, or a seeded split
/// of `data`.
fn load_pair(cfg: &RunConfig, g: &Globals) -> Result<(SurvivalDataset, SurvivalDataset)> {
    match (&cfg.train, &cfg.valid, &cfg.data) {
        (Some(t), Some(v), None) => {
            let train = io::read_dataset(t)?;
            let valid = io::read_dataset(v)?;
            if train.dim() != valid.dim() {
                return Err(CliError::config(format!(
                    "valid: {} covariates, train has {}",
                    valid.dim(),
                    train.dim()
                )));
            }
            Ok((train, valid))
        }
        (None, None, Some(d)) => {
            if cfg.externals.iter().any(|e| matches!(e, ExternalSpec::Table { .. })) {
                return Err(CliError::config("externals: prediction tables need explicit train and valid files"));
            }
            let data = io::read_dataset(d)?;
            Ok(split_train_validation(&data, g.seed.unwrap_or(cfg.seed))?)
        }
        _ => Err(CliError::config("give either `data` or both `train` and `valid`")),
    }
}

fn load_externals(cfg: &RunConfig, train: &SurvivalDataset, valid: &SurvivalDataset) -> Result<Vec<ExternalPredictor>> {
    let mut out = Vec::new();
    for (i, spec) in cfg.externals.iter().enumerate() {
        let ext = match spec {
            ExternalSpec::Builtin { name } => {
                if train.dim() != cfg.dgp.dim() {
                    return Err(CliError::config(format!(
                        "externals[{i}]: built-in `{name}` expects {} covariates, data has {}",
                        cfg.dgp.dim(),
                        train.dim()
                    )));
                }
                builtin_external(name, &cfg.dgp)?
            }
            ExternalSpec::Table {
                name,
                train: tp,
                valid: vp,
            } => {
                let t = io::read_prediction_column(tp)?;
                let v = io::read_prediction_column(vp)?;
                for (what, rows, expected) in [("train", t.len(), train.len()), ("valid", v.len(), valid.len())] {
                    if rows != expected {
                        return Err(CliError::config(format!(
                            "externals[{i}].{what}: {rows} rows, data has {expected}"
                        )));
                    }
                }
                ExternalPredictor::table(name.as_str(), t, v)
            }
        };
        if out.iter().any(|e: &ExternalPredictor| e.name() == ext.name()) {
            return Err(CliError::config(format!("externals[{i}]: duplicate name `{}`", ext.name())));
        }
        out.push(ext);
    }
    Ok(out)
}

fn prediction_rows(sample: &str, values: &[f64]) -> Vec<io::PredictionRow> {
    values
        .iter()
        .enumerate()
        .map(|(row, p)| io::PredictionRow {
            sample: sample.into(),
            row,
            prediction: *p,
        })
        .collect()
}

pub fn fit(cfg: &RunConfig, g: &Globals) -> Result<Vec<PathBuf>> {
    let path = cfg.data.as_ref().or(cfg.train.as_ref());
    let data = io::read_dataset(required(&path.cloned(), "data")?)?;
    let gamma = cfg.gamma.ok_or_else(|| CliError::config("gamma: required"))?;
    let (model, fitted, converged) = match cfg.method {
        FitMethod::Representer => {
            let est = fit_kernel_estimator(&data, &cfg.kernel, gamma, &cfg.optimizer, None)?;
            let f = est.predict_many(data.covariates())?;
            let c = est.converged();
            (SavedModel::Kernel(est), f, c)
        }
        FitMethod::FeatureMap => {
            let est = fit_feature_map_estimator(&data, &cfg.kernel, gamma, &cfg.optimizer, None)?;
            let f = est.predict_many(data.covariates())?;
            let c = est.diagnostics().converged;
            (SavedModel::FeatureMap(est), f, c)
        }
    };
    if !converged {
        g.note("warning: optimizer did not converge");
    }
    let model_path = g.path("_model.json");
    io::write_json(&model_path, &model)?;
    let pred_path = g.path("_predictions.csv");
    io::write_predictions(&pred_path, &prediction_rows("data", &fitted))?;
    Ok(vec![model_path, pred_path])
}

fn write_selection(
    g: &Globals,
    report: &CvReport,
    model: &SavedModel,
    train: &[f64],
    valid: &[f64],
) -> Result<Vec<PathBuf>> {
    let cv = g.path("_cv.csv");
    io::write_cv_table(&cv, &io::CvTable::from(report))?;
    let sel = g.path("_selection.json");
    io::write_json(&sel, &Selection::from(report))?;
    let model_path = g.path("_model.json");
    io::write_json(&model_path, model)?;
    let pred = g.path("_predictions.csv");
    let mut rows = prediction_rows("train", train);
    rows.extend(prediction_rows("valid", valid));
    io::write_predictions(&pred, &rows)?;
    g.note(format!(
        "selected gamma {} theta {:?} (validation loss {})",
        report.selected_gamma, report.selected_theta, report.selected_valid_loss
    ));
    Ok(vec![cv, sel, model_path, pred])
}

pub fn cv(cfg: &RunConfig, g: &Globals) -> Result<Vec<PathBuf>> {
    let grid = cfg.gamma_grid.build()?;
    let (train, valid) = load_pair(cfg, g)?;
    let fit = fit_care(&train, &valid, &cfg.kernel, &grid, &[], &ThetaGrid::kernel_only(), &cfg.optimizer)?;
    let est = fit.estimator.kernel();
    let (t, v) = (est.predict_many(train.covariates())?, est.predict_many(valid.covariates())?);
    write_selection(g, &fit.report, &SavedModel::Kernel(est.clone()), &t, &v)
}

pub fn care(cfg: &RunConfig, g: &Globals) -> Result<Vec<PathBuf>> {
    let grid = cfg.gamma_grid.build()?;
    let (train, valid) = load_pair(cfg, g)?;
    let externals = load_externals(cfg, &train, &valid)?;
    let thetas = if externals.is_empty() {
        ThetaGrid::kernel_only()
    } else {
        theta_grid(externals.len(), cfg.theta_resolution)
            .map_err(|e| CliError::config(format!("theta_resolution: {e}")))?
    };
    let fit = fit_care(&train, &valid, &cfg.kernel, &grid, &externals, &thetas, &cfg.optimizer)?;
    let t = fit.estimator.predict_rows(&train, SampleRole::Training)?;
    let v = fit.estimator.predict_rows(&valid, SampleRole::Validation)?;
    write_selection(g, &fit.report, &SavedModel::Care(fit.estimator.summary()), &t, &v)
}

/// Rebuilds a stored CARE model; externals are resolved among the
/// built-ins by name.
pub fn restore_care(summary: &CareSummary, cfg: &RunConfig) -> Result<CareEstimator> {
    let externals = summary
        .externals
        .iter()
        .map(|e| {
            let raw = builtin_external(&e.name, &cfg.dgp)
                .unwrap_or_else(|_| ExternalPredictor::table(e.name.as_str(), Vec::new(), Vec::new()));
            CenteredExternal::from_training_mean(raw, e.training_mean)
        })
        .collect::<care_core::Result<Vec<_>>>()?;
    Ok(CareEstimator::new(summary.kernel.clone(), externals, summary.theta.clone())?)
}

fn predictor(model: &SavedModel, cfg: &RunConfig) -> Result<Box<dyn Fn(&[f64]) -> care_core::Result<f64>>> {
    Ok(match model.clone() {
        SavedModel::Kernel(e) => Box::new(move |x| e.predict(x)),
        SavedModel::FeatureMap(e) => Box::new(move |x| e.predict(x)),
        SavedModel::Care(s) => {
            let est = restore_care(&s, cfg)?;
            Box::new(move |x| predict_care(&est, x))
        }
    })
}

pub fn evaluate(cfg: &RunConfig, g: &Globals) -> Result<Vec<PathBuf>> {
    let data_path = cfg.data.as_ref().or(cfg.valid.as_ref()).cloned();
    let data = io::read_dataset(required(&data_path, "data")?)?;
    let mut written = Vec::new();
    let curve = g.path("_breslow.csv");
    io::write_step_survival(&curve, &breslow_survival(&data))?;
    written.push(curve);

    let mut eval = Evaluation {
        records: data.len(),
        events: data.event_count(),
        concordance: None,
        l2_error: None,
        mc_points: None,
    };
    if let Some(p) = &cfg.model {
        let model: SavedModel = io::read_json(p)?;
        let f = predictor(&model, cfg)?;
        let preds = data
            .covariates()
            .iter()
            .map(|x| f(x))
            .collect::<care_core::Result<Vec<_>>>()?;
        eval.concordance = match concordance_index(&preds, &data) {
            Ok(c) => Some(c),
            Err(care_core::Error::NoComparablePairs) => None,
            Err(e) => return Err(e.into()),
        };
        if cfg.l2_against_dgp {
            let points = monte_carlo_points(&cfg.dgp, cfg.mc_points, g.seed.unwrap_or(cfg.seed));
            let p = points.iter().map(|x| f(x)).collect::<care_core::Result<Vec<_>>>()?;
            let t = points
                .iter()
                .map(|x| care_core::true_f0(&cfg.dgp, x))
                .collect::<care_core::Result<Vec<_>>>()?;
            eval.l2_error = Some(l2_distance(&p, &t)?);
            eval.mc_points = Some(cfg.mc_points);
        }
    } else if cfg.l2_against_dgp {
        return Err(CliError::config("l2_against_dgp: needs `model`"));
    }
    let out = g.path("_evaluation.json");
    io::write_json(&out, &eval)?;
    written.push(out);
    Ok(written)
}

pub fn study(cfg: &RunConfig, g: &Globals) -> Result<Vec<PathBuf>> {
    let mut cfg = cfg.clone();
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    let settings = StudySettings::from_config(&cfg)?;
    g.note(format!(
        "study: {} sample sizes x {} replications on {} workers",
        settings.ns.len(),
        settings.replications,
        g.workers
    ));
    let outcome = run_study(&settings, g.workers)?;
    let results = g.path("_results.csv");
    io::write_rows(&results, &outcome.rows)?;
    let summary = g.path("_summary.csv");
    io::write_rows(&summary, &outcome.summary)?;
    for r in &outcome.summary {
        g.note(format!(
            "n={:<5} {:<14} mean L2 {}",
            r.n,
            r.estimator,
            r.mean_l2.map_or("-".into(), |m| format!("{m:.4}"))
        ));
    }
    if !outcome.passed() {
        return Err(CliError::Study(format!(
            "only {} of {} replications succeeded; results in {}",
            outcome.replications_ok,
            outcome.replications_run,
            results.display()
        )));
    }
    Ok(vec![results, summary])
}
