//! Validation-sample selection of `γ` and of the aggregation weights `θ`.
//!
//! Selection uses `sargmin`: the smallest `γ` attaining the minimum, then the
//! lexicographically smallest `θ`. Fits that fail to converge are recorded but
//! never selected.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{center_external, CenteredExternal, ExternalPredictor, KernelEstimator, KernelFitter, SampleRole};
use crate::kernels::KernelConfig;
use crate::optimizer::OptimOptions;
use crate::partial_likelihood::{neg_log_partial_likelihood, RiskSets};
use crate::survival_data::SurvivalDataset;

/// Largest grid accepted for either `Γ` or `Θ`.
pub const GRID_LIMIT: usize = 1_000_000;

/// Finite, strictly increasing set of positive regularization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GammaGrid(Vec<f64>);

impl GammaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("gamma grid is empty".into()));
        }
        if values.len() > GRID_LIMIT {
            return Err(Error::GridTooLarge {
                count: values.len(),
                limit: GRID_LIMIT,
            });
        }
        if values.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidGrid("gamma values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid("gamma values must be strictly increasing".into()));
        }
        Ok(Self(values))
    }

    /// `count` geometrically spaced values from `low` to `high` inclusive.
    pub fn geometric(low: f64, high: f64, count: usize) -> Result<Self> {
        if count == 0 || !(low > 0.0 && low <= high && high.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cannot build a geometric grid from {low} to {high} with {count} points"
            )));
        }
        if count == 1 {
            return Self::new(vec![low]);
        }
        let (a, b) = (libm::log(low), libm::log(high));
        let mut values: Vec<f64> = (0..count)
            .map(|i| libm::exp(a + (b - a) * i as f64 / (count - 1) as f64))
            .collect();
        values[0] = low;
        values[count - 1] = high;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for GammaGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GammaGrid> for Vec<f64> {
    fn from(g: GammaGrid) -> Self {
        g.0
    }
}

/// Candidate weight vectors in `Δ_M = {θ ≥ 0, Σθ ≤ 1}`, in lexicographic
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    num_externals: usize,
    points: Vec<Vec<f64>>,
}

impl ThetaGrid {
    /// The single point `θ = ()` used when there are no externals.
    pub fn kernel_only() -> Self {
        Self {
            num_externals: 0,
            points: vec![Vec::new()],
        }
    }

    /// Arbitrary points, checked to lie in the simplex; sorted and
    /// deduplicated.
    pub fn from_points(num_externals: usize, mut points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("theta grid is empty".into()));
        }
        for p in &points {
            if p.len() != num_externals {
                return Err(Error::DimensionMismatch {
                    expected: num_externals,
                    found: p.len(),
                });
            }
            let s: f64 = p.iter().sum();
            if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || s > 1.0 + 1e-12 {
                return Err(Error::InvalidGrid("theta points must lie in the simplex".into()));
            }
        }
        points.sort_by(|a, b| lex_cmp(a, b));
        points.dedup();
        Ok(Self {
            num_externals,
            points,
        })
    }

    pub fn num_externals(&self) -> usize {
        self.num_externals
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether `0` and every `e_m` are present.
    pub fn contains_vertices(&self) -> bool {
        let has = |v: &[f64]| self.points.iter().any(|p| p.as_slice() == v);
        let mut v = vec![0.0; self.num_externals];
        if !has(&v) {
            return false;
        }
        for m in 0..self.num_externals {
            v[m] = 1.0;
            if !has(&v) {
                return false;
            }
            v[m] = 0.0;
        }
        true
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            core::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn lattice_count(m: usize, r: usize) -> Option<usize> {
    // C(r + m, m)
    let mut c: u128 = 1;
    for i in 1..=m as u128 {
        c = c * (r as u128 + i) / i;
        if c > GRID_LIMIT as u128 {
            return None;
        }
    }
    Some(c as usize)
}

/// All `θ` with `θ_m = k_m / resolution`, `k_m ≥ 0`, `Σ k_m ≤ resolution`.
pub fn theta_grid(num_externals: usize, resolution: usize) -> Result<ThetaGrid> {
    if num_externals == 0 || resolution == 0 {
        return Err(Error::InvalidGrid(
            "theta grid needs at least one external and a positive resolution".into(),
        ));
    }
    let count = lattice_count(num_externals, resolution).ok_or(Error::GridTooLarge {
        count: usize::MAX,
        limit: GRID_LIMIT,
    })?;
    let mut points = Vec::with_capacity(count);
    let mut k = vec![0usize; num_externals];
    // odometer over k in lexicographic order, skipping sums above resolution
    loop {
        points.push(k.iter().map(|&v| v as f64 / resolution as f64).collect());
        let mut pos = num_externals;
        loop {
            if pos == 0 {
                return Ok(ThetaGrid {
                    num_externals,
                    points,
                });
            }
            pos -= 1;
            let rest: usize = k[..pos].iter().sum();
            if rest + k[pos] < resolution {
                k[pos] += 1;
                for v in &mut k[pos + 1..] {
                    *v = 0;
                }
                break;
            }
        }
    }
}

/// Negative log-partial likelihood on the validation sample.
pub fn validation_loss(predicted: &[f64], valid: &SurvivalDataset) -> Result<f64> {
    neg_log_partial_likelihood(predicted, valid)
}

/// `(1 - Σθ_m) f + Σ θ_m e_m`, pointwise.
pub fn combine(theta: &[f64], kernel: &[f64], externals: &[Vec<f64>]) -> Vec<f64> {
    let w0 = 1.0 - theta.iter().sum::<f64>();
    let mut out: Vec<f64> = kernel.iter().map(|v| w0 * v).collect();
    for (t, e) in theta.iter().zip(externals) {
        if *t != 0.0 {
            for (o, v) in out.iter_mut().zip(e) {
                *o += t * v;
            }
        }
    }
    out
}

/// One fit per `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma: f64,
    /// Kernel-only losses.
    pub train_loss: f64,
    pub valid_loss: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `θ̌(γ)` and its validation loss.
    pub best_theta: Vec<f64>,
    pub best_valid_loss: f64,
}

/// One `(γ, θ)` candidate; losses are those of the combined predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub gamma: f64,
    pub theta: Vec<f64>,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub externals: Vec<String>,
    /// Increasing `γ`.
    pub gammas: Vec<GammaRow>,
    /// Increasing `γ`, then `θ` in grid order.
    pub candidates: Vec<CandidateRow>,
    /// Kernel-only selection `γ̂`.
    pub gamma_hat: f64,
    /// Aggregated selection `(γ̌, θ̌)`.
    pub selected_gamma: f64,
    pub selected_theta: Vec<f64>,
    pub selected_valid_loss: f64,
}

impl CvReport {
    pub fn row(&self, gamma: f64) -> Option<&GammaRow> {
        self.gammas.iter().find(|r| r.gamma == gamma)
    }
}

/// Output of [`cross_validate_gamma`].
#[derive(Debug, Clone)]
pub struct GammaSelection {
    pub gamma_hat: f64,
    pub report: CvReport,
    /// One estimator per grid value, increasing `γ`.
    pub fits: Vec<KernelEstimator>,
}

impl GammaSelection {
    pub fn selected(&self) -> &KernelEstimator {
        self.fit_at(self.gamma_hat).expect("selected gamma is on the grid")
    }

    pub fn fit_at(&self, gamma: f64) -> Option<&KernelEstimator> {
        self.fits.iter().find(|f| f.gamma() == gamma)
    }
}

/// Output of [`fit_care`].
#[derive(Debug, Clone)]
pub struct CareFit {
    pub estimator: CareEstimator,
    pub report: CvReport,
    pub fits: Vec<KernelEstimator>,
}

/// Selects `γ̂ = sargmin_γ ℓ̃_n(f̂_{n,γ})` by warm-started descent through the
/// grid from the largest `γ`.
pub fn cross_validate_gamma(
    train: &SurvivalDataset,
    valid: &SurvivalDataset,
    kernel: &KernelConfig,
    grid: &GammaGrid,
    options: &OptimOptions,
) -> Result<GammaSelection> {
    let fit = fit_care(train, valid, kernel, grid, &[], &ThetaGrid::kernel_only(), options)?;
    Ok(GammaSelection {
        gamma_hat: fit.report.gamma_hat,
        report: fit.report,
        fits: fit.fits,
    })
}

/// Fits the kernel path once and scans `Θ` per `γ` on cached predictions.
pub fn fit_care(
    train: &SurvivalDataset,
    valid: &SurvivalDataset,
    kernel: &KernelConfig,
    gammas: &GammaGrid,
    externals: &[ExternalPredictor],
    thetas: &ThetaGrid,
    options: &OptimOptions,
) -> Result<CareFit> {
    let fitter = KernelFitter::new(train, kernel)?;
    fit_care_with(&fitter, train, valid, gammas, externals, thetas, options)
}

/// [`fit_care`] on a prepared training context.
pub fn fit_care_with(
    fitter: &KernelFitter,
    train: &SurvivalDataset,
    valid: &SurvivalDataset,
    gammas: &GammaGrid,
    externals: &[ExternalPredictor],
    thetas: &ThetaGrid,
    options: &OptimOptions,
) -> Result<CareFit> {
    options.validate()?;
    if train.dim() != valid.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: valid.dim(),
        });
    }
    if fitter.context().n() != train.len() {
        return Err(Error::LengthMismatch {
            expected: train.len(),
            found: fitter.context().n(),
        });
    }
    let thetas = if externals.is_empty() {
        ThetaGrid::kernel_only()
    } else {
        if thetas.num_externals() != externals.len() {
            return Err(Error::DimensionMismatch {
                expected: externals.len(),
                found: thetas.num_externals(),
            });
        }
        thetas.clone()
    };
    let centered: Vec<CenteredExternal> = externals
        .iter()
        .map(|e| center_external(e, train))
        .collect::<Result<_>>()?;
    let ext_train: Vec<Vec<f64>> = centered
        .iter()
        .map(|e| e.rows(train, SampleRole::Training))
        .collect::<Result<_>>()?;
    let ext_valid: Vec<Vec<f64>> = centered
        .iter()
        .map(|e| e.rows(valid, SampleRole::Validation))
        .collect::<Result<_>>()?;
    let valid_design = fitter.design_at(valid.covariates())?;
    let train_risk = fitter.context().risk_sets();
    let valid_risk = RiskSets::new(valid);

    let mut fits = Vec::with_capacity(gammas.len());
    let mut gamma_rows = Vec::with_capacity(gammas.len());
    let mut candidate_blocks = Vec::with_capacity(gammas.len());
    let mut warm: Option<Vec<f64>> = None;
    for &gamma in gammas.values().iter().rev() {
        let est = fitter.fit(gamma, options, warm.as_deref())?;
        if est.beta().iter().all(|b| b.is_finite()) {
            warm = Some(est.beta().to_vec());
        }
        let converged = est.converged();
        let f_train = fitter.fitted_values(&est);
        let f_valid = valid_design.mul_vec(est.beta());
        let mut block = Vec::with_capacity(thetas.len());
        let mut best: Option<(usize, f64)> = None;
        for (k, theta) in thetas.points().iter().enumerate() {
            let tr = train_risk.evaluate(&combine(theta, &f_train, &ext_train), false)?.0;
            let va = valid_risk.evaluate(&combine(theta, &f_valid, &ext_valid), false)?.0;
            if best.map_or(true, |(_, b)| va < b) {
                best = Some((k, va));
            }
            block.push(CandidateRow {
                gamma,
                theta: theta.clone(),
                train_loss: tr,
                valid_loss: va,
                converged,
            });
        }
        let (bk, bl) = best.expect("theta grid is nonempty");
        let kernel_train = train_risk.evaluate(&f_train, false)?.0;
        let kernel_valid = valid_risk.evaluate(&f_valid, false)?.0;
        gamma_rows.push(GammaRow {
            gamma,
            train_loss: kernel_train,
            valid_loss: kernel_valid,
            converged,
            iterations: est.diagnostics().iterations,
            best_theta: thetas.points()[bk].clone(),
            best_valid_loss: bl,
        });
        candidate_blocks.push(block);
        fits.push(est);
    }
    fits.reverse();
    gamma_rows.reverse();
    candidate_blocks.reverse();

    let gamma_hat = sargmin(&gamma_rows, |r| r.valid_loss).ok_or(Error::AllFitsFailed)?;
    let selected = sargmin(&gamma_rows, |r| r.best_valid_loss).ok_or(Error::AllFitsFailed)?;
    let row = &gamma_rows[selected];
    let estimator = CareEstimator {
        kernel: fits[selected].clone(),
        externals: centered,
        theta: row.best_theta.clone(),
    };
    let report = CvReport {
        externals: externals.iter().map(|e| String::from(e.name())).collect(),
        gamma_hat: gamma_rows[gamma_hat].gamma,
        selected_gamma: row.gamma,
        selected_theta: row.best_theta.clone(),
        selected_valid_loss: row.best_valid_loss,
        gammas: gamma_rows,
        candidates: candidate_blocks.into_iter().flatten().collect(),
    };
    Ok(CareFit {
        estimator,
        report,
        fits,
    })
}

/// First converged row (rows are in increasing `γ`) attaining the minimum.
fn sargmin(rows: &[GammaRow], loss: impl Fn(&GammaRow) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        let l = loss(r);
        if r.converged && l.is_finite() && best.map_or(true, |(_, b)| l < b) {
            best = Some((i, l));
        }
    }
    best.map(|(i, _)| i)
}

/// `f̌ = (1 - Σθ_m) f̂_{n,γ̌} + Σ θ_m f̃_m`.
#[derive(Debug, Clone)]
pub struct CareEstimator {
    kernel: KernelEstimator,
    externals: Vec<CenteredExternal>,
    theta: Vec<f64>,
}

/// Serializable part of a [`CareEstimator`]; external models are recorded by
/// name and training mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CareSummary {
    pub gamma: f64,
    pub theta: Vec<f64>,
    pub kernel: KernelEstimator,
    pub externals: Vec<ExternalSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSummary {
    pub name: String,
    pub training_mean: f64,
}

impl CareEstimator {
    pub fn new(kernel: KernelEstimator, externals: Vec<CenteredExternal>, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != externals.len() {
            return Err(Error::LengthMismatch {
                expected: externals.len(),
                found: theta.len(),
            });
        }
        ThetaGrid::from_points(theta.len(), vec![theta.clone()])?;
        Ok(Self {
            kernel,
            externals,
            theta,
        })
    }

    pub fn kernel(&self) -> &KernelEstimator {
        &self.kernel
    }

    pub fn externals(&self) -> &[CenteredExternal] {
        &self.externals
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn gamma(&self) -> f64 {
        self.kernel.gamma()
    }

    pub fn kernel_weight(&self) -> f64 {
        1.0 - self.theta.iter().sum::<f64>()
    }

    pub fn summary(&self) -> CareSummary {
        CareSummary {
            gamma: self.gamma(),
            theta: self.theta.clone(),
            kernel: self.kernel.clone(),
            externals: self
                .externals
                .iter()
                .map(|e| ExternalSummary {
                    name: String::from(e.name()),
                    training_mean: e.training_mean(),
                })
                .collect(),
        }
    }

    /// Combined predictions for every row of `data`.
    pub fn predict_rows(&self, data: &SurvivalDataset, role: SampleRole) -> Result<Vec<f64>> {
        let f = self.kernel.predict_many(data.covariates())?;
        let mut ext = Vec::with_capacity(self.externals.len());
        for (e, t) in self.externals.iter().zip(&self.theta) {
            ext.push(if *t == 0.0 {
                vec![0.0; data.len()]
            } else {
                e.rows(data, role)?
            });
        }
        Ok(combine(&self.theta, &f, &ext))
    }
}

/// Pointwise CARE prediction. Externals with zero weight are not queried.
pub fn predict_care(est: &CareEstimator, x: &[f64]) -> Result<f64> {
    let mut value = est.kernel_weight() * est.kernel.predict(x)?;
    for (m, (e, t)) in est.externals.iter().zip(&est.theta).enumerate() {
        if *t != 0.0 {
            value += t * e.predict(x).map_err(|err| match err {
                Error::NotPointwise(_) => Error::NotPointwise(m),
                other => other,
            })?;
        }
    }
    Ok(value)
}
