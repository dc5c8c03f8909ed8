//! Replicated simulation study: cross-validated, oracle-`γ` and CARE
//! estimators against the true relative risk, scored by Monte Carlo `L₂`
//! error.
//!
//! Replication `(n, r)` draws everything from `derive_seed(derive_seed(seed,
//! n), r)`, so results do not depend on scheduling.

use care_core::evaluation::{l2_distance, monte_carlo_points};
use care_core::rng::derive_seed;
use care_core::{
    fit_care, predict_care, simulate_dataset, split_train_validation, theta_grid, true_f0, DgpConfig, GammaGrid,
    KernelConfig, OptimOptions, ThetaGrid,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{builtin_external, RunConfig};
use crate::error::{CliError, Result};

pub const ESTIMATORS: [&str; 4] = ["cv_kernel", "oracle_kernel", "care", "external"];

/// Share of replications that must succeed.
pub const SUCCESS_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct StudySettings {
    pub dgp: DgpConfig,
    pub kernel: KernelConfig,
    pub grid: GammaGrid,
    pub thetas: ThetaGrid,
    pub optimizer: OptimOptions,
    pub ns: Vec<usize>,
    pub replications: usize,
    pub mc_points: usize,
    pub seed: u64,
    pub external: bool,
}

impl StudySettings {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let s = &cfg.study;
        if s.ns.is_empty() {
            return Err(CliError::config("study.ns: no sample sizes"));
        }
        if let Some(n) = s.ns.iter().find(|n| **n < 4) {
            return Err(CliError::config(format!("study.ns: sample size {n} is below 4")));
        }
        if s.replications == 0 {
            return Err(CliError::config("study.replications: must be positive"));
        }
        let thetas = if s.external {
            theta_grid(1, cfg.theta_resolution).map_err(|e| CliError::config(format!("theta_resolution: {e}")))?
        } else {
            ThetaGrid::kernel_only()
        };
        Ok(Self {
            dgp: cfg.dgp.clone(),
            kernel: cfg.kernel.clone(),
            grid: cfg.gamma_grid.build()?,
            thetas,
            optimizer: OptimOptions {
                record_trace: false,
                ..cfg.optimizer.clone()
            },
            ns: s.ns.clone(),
            replications: s.replications,
            mc_points: cfg.mc_points,
            seed: cfg.seed,
            external: s.external,
        })
    }

    pub fn estimators(&self) -> &'static [&'static str] {
        if self.external {
            &ESTIMATORS
        } else {
            &ESTIMATORS[..2]
        }
    }

    pub fn replication_seed(&self, n: usize, rep: usize) -> u64 {
        derive_seed(derive_seed(self.seed, n as u64), rep as u64)
    }
}

/// One estimator in one replication. Missing values mean the replication
/// failed; `status` then carries the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub rep: usize,
    pub estimator: String,
    pub l2_error: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub theta_hat: Option<f64>,
    pub status: String,
}

/// `μ̂ ± 2σ̂/√n_rep` over successful replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub estimator: String,
    pub successes: usize,
    pub mean_l2: Option<f64>,
    pub sd_l2: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub median_theta_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub rows: Vec<StudyRow>,
    pub summary: Vec<SummaryRow>,
    pub replications_run: usize,
    pub replications_ok: usize,
}

impl StudyOutcome {
    pub fn success_rate(&self) -> f64 {
        self.replications_ok as f64 / self.replications_run as f64
    }

    pub fn passed(&self) -> bool {
        self.success_rate() >= SUCCESS_THRESHOLD
    }

    pub fn mean(&self, n: usize, estimator: &str) -> Option<f64> {
        self.summary_row(n, estimator)?.mean_l2
    }

    pub fn median_theta(&self, n: usize) -> Option<f64> {
        self.summary_row(n, "care")?.median_theta_hat
    }

    fn summary_row(&self, n: usize, estimator: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.n == n && r.estimator == estimator)
    }
}

struct Scores {
    cv: (f64, f64),
    oracle: (f64, f64),
    care: Option<(f64, f64, f64)>,
    external: Option<f64>,
}

fn score_replication(s: &StudySettings, n: usize, rep: usize) -> care_core::Result<Scores> {
    let seed = s.replication_seed(n, rep);
    let (data, _) = simulate_dataset(&s.dgp, n, seed)?;
    let (train, valid) = split_train_validation(&data, seed)?;
    let externals = if s.external {
        vec![builtin_external("perturbed", &s.dgp).expect("built-in external")]
    } else {
        Vec::new()
    };
    let fit = fit_care(&train, &valid, &s.kernel, &s.grid, &externals, &s.thetas, &s.optimizer)?;

    let points = monte_carlo_points(&s.dgp, s.mc_points, seed);
    let truth = points
        .iter()
        .map(|x| true_f0(&s.dgp, x))
        .collect::<care_core::Result<Vec<_>>>()?;

    let report = &fit.report;
    let mut cv = None;
    let mut oracle: Option<(f64, f64)> = None;
    for (row, est) in report.gammas.iter().zip(&fit.fits) {
        if !row.converged {
            continue;
        }
        let e = l2_distance(&est.predict_many(&points)?, &truth)?;
        if row.gamma == report.gamma_hat {
            cv = Some((e, row.gamma));
        }
        // first minimum in increasing γ
        if oracle.map_or(true, |(best, _)| e < best) {
            oracle = Some((e, row.gamma));
        }
    }
    let cv = cv.ok_or(care_core::Error::AllFitsFailed)?;
    let oracle = oracle.ok_or(care_core::Error::AllFitsFailed)?;

    let (care, external) = if s.external {
        let pred = points
            .iter()
            .map(|x| predict_care(&fit.estimator, x))
            .collect::<care_core::Result<Vec<_>>>()?;
        let ext = &fit.estimator.externals()[0];
        let ext_pred = points.iter().map(|x| ext.predict(x)).collect::<care_core::Result<Vec<_>>>()?;
        (
            Some((
                l2_distance(&pred, &truth)?,
                fit.estimator.gamma(),
                fit.estimator.theta()[0],
            )),
            Some(l2_distance(&ext_pred, &truth)?),
        )
    } else {
        (None, None)
    };
    Ok(Scores {
        cv,
        oracle,
        care,
        external,
    })
}

/// Rows for one replication in [`ESTIMATORS`] order.
pub fn run_replication(s: &StudySettings, n: usize, rep: usize) -> Vec<StudyRow> {
    let row = |estimator: &str, l2: Option<f64>, gamma: Option<f64>, theta: Option<f64>, status: &str| StudyRow {
        n,
        rep,
        estimator: estimator.into(),
        l2_error: l2,
        gamma_hat: gamma,
        theta_hat: theta,
        status: status.into(),
    };
    match score_replication(s, n, rep) {
        Ok(sc) => {
            let mut rows = vec![
                row("cv_kernel", Some(sc.cv.0), Some(sc.cv.1), None, "ok"),
                row("oracle_kernel", Some(sc.oracle.0), Some(sc.oracle.1), None, "ok"),
            ];
            if let (Some((e, g, t)), Some(x)) = (sc.care, sc.external) {
                rows.push(row("care", Some(e), Some(g), Some(t), "ok"));
                rows.push(row("external", Some(x), None, None, "ok"));
            }
            rows
        }
        Err(e) => {
            let msg = e.to_string();
            s.estimators()
                .iter()
                .map(|name| row(name, None, None, None, &msg))
                .collect()
        }
    }
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

pub fn summarize(s: &StudySettings, rows: &[StudyRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &n in &s.ns {
        for &est in s.estimators() {
            let sel: Vec<&StudyRow> = rows.iter().filter(|r| r.n == n && r.estimator == est).collect();
            let errs: Vec<f64> = sel.iter().filter_map(|r| r.l2_error).collect();
            let k = errs.len();
            let mean = (k > 0).then(|| errs.iter().sum::<f64>() / k as f64);
            let sd = mean.filter(|_| k > 1).map(|m| {
                let ss: f64 = errs.iter().map(|e| (e - m) * (e - m)).sum();
                (ss / (k - 1) as f64).sqrt()
            });
            let half = sd.map(|sd| 2.0 * sd / (k as f64).sqrt());
            let mut thetas: Vec<f64> = sel.iter().filter_map(|r| r.theta_hat).collect();
            out.push(SummaryRow {
                n,
                estimator: est.into(),
                successes: k,
                mean_l2: mean,
                sd_l2: sd,
                lower: mean.zip(half).map(|(m, h)| m - h),
                upper: mean.zip(half).map(|(m, h)| m + h),
                median_theta_hat: median(&mut thetas),
            });
        }
    }
    out
}

/// Runs every replication on a pool of `workers` threads.
pub fn run_study(s: &StudySettings, workers: usize) -> Result<StudyOutcome> {
    let jobs: Vec<(usize, usize)> = s
        .ns
        .iter()
        .flat_map(|&n| (0..s.replications).map(move |r| (n, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Study(e.to_string()))?;
    let per_job: Vec<Vec<StudyRow>> = pool.install(|| jobs.par_iter().map(|&(n, r)| run_replication(s, n, r)).collect());
    let replications_ok = per_job.iter().filter(|rows| rows.iter().all(|r| r.status == "ok")).count();
    let rows: Vec<StudyRow> = per_job.into_iter().flatten().collect();
    Ok(StudyOutcome {
        summary: summarize(s, &rows),
        rows,
        replications_run: jobs.len(),
        replications_ok,
    })
}
