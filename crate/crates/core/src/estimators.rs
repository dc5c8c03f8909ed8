//! Fitted relative-risk functions.
//!
//! [`KernelEstimator`] is the representer-form solution
//! `f(x) = Σ_{j∈A_n} (k(x, X_j) - k̄(X_j)) β_j`, [`FeatureMapEstimator`] the
//! primal solution for polynomial kernels, and [`CenteredExternal`] wraps a
//! pre-trained risk model shifted to zero mean on the training sample.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelConfig, PolynomialFeatures, DEFAULT_FEATURE_LIMIT};
use crate::linalg::{dot, Matrix};
use crate::optimizer::{minimize, Objective, OptimOptions, OptimResult};
use crate::partial_likelihood::{RepresenterContext, RiskSets};
use crate::survival_data::SurvivalDataset;

/// Default bound `M` on external predictor magnitudes; exceeding it only
/// raises a warning flag.
pub const DEFAULT_EXTERNAL_BOUND: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub objective_value: f64,
    /// No observed events: the objective is the penalty alone.
    pub all_censored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl FitDiagnostics {
    fn from_result(r: &OptimResult, all_censored: bool) -> Self {
        Self {
            converged: r.converged,
            gradient_norm: r.gradient_norm,
            iterations: r.iterations,
            objective_value: r.objective_value,
            all_censored,
            trace: r.trace.clone(),
        }
    }
}

/// Representer-form kernel estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelEstimatorParts", into = "KernelEstimatorParts")]
pub struct KernelEstimator {
    kernel: Kernel,
    gamma: f64,
    basis_points: Vec<Vec<f64>>,
    beta: Vec<f64>,
    kbar_at_basis: Vec<f64>,
    diagnostics: FitDiagnostics,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelEstimatorParts {
    kernel: KernelConfig,
    gamma: f64,
    basis_points: Vec<Vec<f64>>,
    beta: Vec<f64>,
    kbar: Vec<f64>,
    diagnostics: FitDiagnostics,
}

impl From<KernelEstimator> for KernelEstimatorParts {
    fn from(e: KernelEstimator) -> Self {
        Self {
            kernel: e.kernel.config().clone(),
            gamma: e.gamma,
            basis_points: e.basis_points,
            beta: e.beta,
            kbar: e.kbar_at_basis,
            diagnostics: e.diagnostics,
        }
    }
}

impl TryFrom<KernelEstimatorParts> for KernelEstimator {
    type Error = Error;
    fn try_from(p: KernelEstimatorParts) -> Result<Self> {
        let m = p.beta.len();
        if p.basis_points.len() != m || p.kbar.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: p.basis_points.len().min(p.kbar.len()),
            });
        }
        if p.beta.iter().chain(&p.kbar).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("estimator coefficients"));
        }
        Ok(Self {
            kernel: Kernel::new(p.kernel)?,
            gamma: p.gamma,
            basis_points: p.basis_points,
            beta: p.beta,
            kbar_at_basis: p.kbar,
            diagnostics: p.diagnostics,
        })
    }
}

impl KernelEstimator {
    pub fn kernel(&self) -> &KernelConfig {
        self.kernel.config()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn basis_points(&self) -> &[Vec<f64>] {
        &self.basis_points
    }

    pub fn kbar_at_basis(&self) -> &[f64] {
        &self.kbar_at_basis
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.converged
    }

    /// `f(x) = Σ_j (k(x, X_j) - k̄(X_j)) β_j`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.kernel.check_point(x)?;
        if let Some(b) = self.basis_points.first() {
            if b.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: b.len(),
                    found: x.len(),
                });
            }
        }
        Ok(self
            .basis_points
            .iter()
            .zip(&self.beta)
            .zip(&self.kbar_at_basis)
            .map(|((p, b), kb)| (self.kernel.eval_unchecked(x, p) - kb) * b)
            .sum())
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Centred kernel sections `k(x_i, X_j) - k̄(X_j)` at new points, so that
    /// predictions for many coefficient vectors cost one product each.
    pub fn prediction_design(&self, xs: &[Vec<f64>]) -> Result<Matrix> {
        for x in xs {
            self.kernel.check_point(x)?;
        }
        let mut m = self.kernel.cross_gram(xs, &self.basis_points)?;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                m[(i, j)] -= self.kbar_at_basis[j];
            }
        }
        Ok(m)
    }

    /// Squared RKHS norm `‖f‖²_H` (the function has zero training mean).
    pub fn rkhs_norm_squared(&self) -> f64 {
        // β₀ = -Σ k̄_j β_j; ‖β₀ + Σ k(·, X_j) β_j‖² by the bordered quadratic form
        let m = self.beta.len();
        let b0 = -dot(&self.kbar_at_basis, &self.beta);
        let c = self.kernel.constant_norm_squared().unwrap_or(f64::INFINITY);
        let mut total = b0 * b0 * c + 2.0 * b0 * self.beta.iter().sum::<f64>();
        for i in 0..m {
            for j in 0..m {
                total += self.beta[i]
                    * self.beta[j]
                    * self
                        .kernel
                        .eval_unchecked(&self.basis_points[i], &self.basis_points[j]);
            }
        }
        total
    }
}

/// Penalized objective bound to one `γ`, with the last evaluation cached so
/// that the gradient at an accepted line-search point reuses its scores.
struct RepresenterObjective<'a> {
    ctx: &'a RepresenterContext,
    gamma: f64,
    cache: Option<(Vec<f64>, Vec<f64>)>,
}

impl RepresenterObjective<'_> {
    fn scores(&mut self, beta: &[f64]) -> Vec<f64> {
        if let Some((b, f)) = &self.cache {
            if b.as_slice() == beta {
                return f.clone();
            }
        }
        let f = self.ctx.fitted_values(beta);
        self.cache = Some((beta.to_vec(), f.clone()));
        f
    }
}

impl Objective for RepresenterObjective<'_> {
    fn value(&mut self, beta: &[f64]) -> f64 {
        let f = self.scores(beta);
        match self.ctx.risk_sets().evaluate(&f, false) {
            Ok((loss, _)) => loss + self.gamma * self.ctx.penalty(beta),
            Err(_) => f64::INFINITY,
        }
    }

    fn gradient(&mut self, beta: &[f64]) -> Vec<f64> {
        let f = self.scores(beta);
        let df = match self.ctx.risk_sets().evaluate(&f, true) {
            Ok((_, Some(df))) => df,
            _ => return vec![f64::NAN; beta.len()],
        };
        let kb = self.ctx.penalty_matrix().mul_vec(beta);
        let mut g = self.ctx.design().transpose_mul_vec(&df);
        for (gi, p) in g.iter_mut().zip(kb) {
            *gi += 2.0 * self.gamma * p;
        }
        g
    }
}

/// Training sample prepared for repeated representer fits at different `γ`.
#[derive(Debug, Clone)]
pub struct KernelFitter {
    ctx: RepresenterContext,
    all_censored: bool,
    hessian_start: bool,
}

impl KernelFitter {
    pub fn new(train: &SurvivalDataset, kernel: &KernelConfig) -> Result<Self> {
        let kernel = Kernel::new(kernel.clone())?;
        let ctx = RepresenterContext::new(train, kernel)?;
        Ok(Self {
            ctx,
            all_censored: train.event_count() == 0,
            hessian_start: true,
        })
    }

    /// Whether BFGS starts from the inverse of the exact Hessian at the
    /// initial point (default) or from a scaled identity.
    pub fn with_hessian_start(mut self, on: bool) -> Self {
        self.hessian_start = on;
        self
    }

    pub fn context(&self) -> &RepresenterContext {
        &self.ctx
    }

    pub fn basis_len(&self) -> usize {
        self.ctx.basis().len()
    }

    /// Minimizes the penalized objective from `warm` (or zero).
    pub fn fit(&self, gamma: f64, options: &OptimOptions, warm: Option<&[f64]>) -> Result<KernelEstimator> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::NonPositiveGamma(gamma));
        }
        let m = self.basis_len();
        let init = match warm {
            Some(w) if w.len() == m => w.to_vec(),
            Some(w) => {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: w.len(),
                })
            }
            None => vec![0.0; m],
        };
        let h0 = if self.hessian_start {
            let f = self.ctx.fitted_values(&init);
            let mut h = self.ctx.risk_sets().hessian(&f, self.ctx.design())?;
            let p = self.ctx.penalty_matrix();
            for (a, b) in h.as_mut_slice().iter_mut().zip(p.as_slice()) {
                *a += 2.0 * gamma * b;
            }
            regularized_inverse(h)
        } else {
            None
        };
        let mut problem = RepresenterObjective {
            ctx: &self.ctx,
            gamma,
            cache: None,
        };
        let result = minimize(&mut problem, &init, options, h0.as_ref())?;
        Ok(self.estimator(gamma, result.minimizer.clone(), FitDiagnostics::from_result(&result, self.all_censored)))
    }

    fn estimator(&self, gamma: f64, beta: Vec<f64>, diagnostics: FitDiagnostics) -> KernelEstimator {
        let basis = self.ctx.basis();
        KernelEstimator {
            kernel: self.ctx.kernel().clone(),
            gamma,
            basis_points: basis.iter().map(|&j| self.ctx.points()[j].clone()).collect(),
            kbar_at_basis: basis.iter().map(|&j| self.ctx.kbar()[j]).collect(),
            beta,
            diagnostics,
        }
    }

    /// Centred kernel sections `k(x_i, X_j) - k̄(X_j)`, `j ∈ A_n`, at new
    /// points; `design_at(xs) · β` predicts any fit from this fitter.
    pub fn design_at(&self, xs: &[Vec<f64>]) -> Result<Matrix> {
        let kernel = self.ctx.kernel();
        for x in xs {
            kernel.check_point(x)?;
            if x.len() != self.ctx.points()[0].len() {
                return Err(Error::DimensionMismatch {
                    expected: self.ctx.points()[0].len(),
                    found: x.len(),
                });
            }
        }
        let basis = self.ctx.basis();
        let pts: Vec<Vec<f64>> = basis.iter().map(|&j| self.ctx.points()[j].clone()).collect();
        let mut m = kernel.cross_gram(xs, &pts)?;
        for i in 0..m.rows() {
            for (j, &b) in basis.iter().enumerate() {
                m[(i, j)] -= self.ctx.kbar()[b];
            }
        }
        Ok(m)
    }

    /// Training-point values of an estimator produced by this fitter.
    pub fn fitted_values(&self, est: &KernelEstimator) -> Vec<f64> {
        self.ctx.fitted_values(est.beta())
    }
}

/// Inverse of a symmetric matrix that should be positive definite, adding a
/// growing ridge when rounding makes the Cholesky factorization fail.
fn regularized_inverse(mut h: Matrix) -> Option<Matrix> {
    let scale = (0..h.rows()).fold(0.0f64, |m, i| m.max(h[(i, i)].abs()));
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let mut ridge = 0.0;
    for k in 0..8 {
        if let Some(inv) = h.spd_inverse() {
            return Some(inv);
        }
        let next = scale * libm::pow(10.0, -12.0 + k as f64);
        for i in 0..h.rows() {
            h[(i, i)] += next - ridge;
        }
        ridge = next;
    }
    None
}

/// Fits `f̂_{n,γ}` on `train`.
pub fn fit_kernel_estimator(
    train: &SurvivalDataset,
    kernel: &KernelConfig,
    gamma: f64,
    options: &OptimOptions,
    warm: Option<&[f64]>,
) -> Result<KernelEstimator> {
    KernelFitter::new(train, kernel)?.fit(gamma, options, warm)
}

/// Primal-form estimator `f(x) = αᵀ(φ(x)_{1..q} - P_n φ)` for polynomial
/// kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureMapParts", into = "FeatureMapParts")]
pub struct FeatureMapEstimator {
    kernel: KernelConfig,
    gamma: f64,
    features: PolynomialFeatures,
    alpha: Vec<f64>,
    feature_means: Vec<f64>,
    diagnostics: FitDiagnostics,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureMapParts {
    kernel: KernelConfig,
    dim: usize,
    gamma: f64,
    alpha: Vec<f64>,
    feature_means: Vec<f64>,
    constant: f64,
    diagnostics: FitDiagnostics,
}

impl From<FeatureMapEstimator> for FeatureMapParts {
    fn from(e: FeatureMapEstimator) -> Self {
        Self {
            dim: e.features.dim(),
            constant: e.features.constant(),
            kernel: e.kernel,
            gamma: e.gamma,
            alpha: e.alpha,
            feature_means: e.feature_means,
            diagnostics: e.diagnostics,
        }
    }
}

impl TryFrom<FeatureMapParts> for FeatureMapEstimator {
    type Error = Error;
    fn try_from(p: FeatureMapParts) -> Result<Self> {
        let features = PolynomialFeatures::new(&p.kernel, p.dim, usize::MAX)?;
        if p.alpha.len() != features.len() || p.feature_means.len() != features.len() {
            return Err(Error::LengthMismatch {
                expected: features.len(),
                found: p.alpha.len(),
            });
        }
        Ok(Self {
            kernel: p.kernel,
            gamma: p.gamma,
            features,
            alpha: p.alpha,
            feature_means: p.feature_means,
            diagnostics: p.diagnostics,
        })
    }
}

impl FeatureMapEstimator {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    /// Value `c` of the constant feature.
    pub fn constant(&self) -> f64 {
        self.features.constant()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let phi = self.features.features(x)?;
        Ok(self
            .alpha
            .iter()
            .zip(phi.iter().zip(&self.feature_means))
            .map(|(a, (p, m))| a * (p - m))
            .sum())
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// `Σ α_j² + (c⁻¹ Σ α_j P_n φ_j)²`, the squared RKHS norm of the fit.
    pub fn rkhs_norm_squared(&self) -> f64 {
        feature_penalty(&self.alpha, &self.feature_means, self.features.constant())
    }
}

/// `Σ α_j² + (c⁻¹ Σ α_j m_j)²`
pub fn feature_penalty(alpha: &[f64], means: &[f64], constant: f64) -> f64 {
    let t = dot(alpha, means) / constant;
    dot(alpha, alpha) + t * t
}

struct FeatureObjective<'a> {
    centered: &'a Matrix,
    means: &'a [f64],
    constant: f64,
    gamma: f64,
    risk: &'a RiskSets,
}

impl Objective for FeatureObjective<'_> {
    fn value(&mut self, alpha: &[f64]) -> f64 {
        let f = self.centered.mul_vec(alpha);
        match self.risk.evaluate(&f, false) {
            Ok((loss, _)) => loss + self.gamma * feature_penalty(alpha, self.means, self.constant),
            Err(_) => f64::INFINITY,
        }
    }

    fn gradient(&mut self, alpha: &[f64]) -> Vec<f64> {
        let f = self.centered.mul_vec(alpha);
        let Ok((_, Some(df))) = self.risk.evaluate(&f, true) else {
            return vec![f64::NAN; alpha.len()];
        };
        let mut g = self.centered.transpose_mul_vec(&df);
        let t = dot(alpha, self.means) / (self.constant * self.constant);
        for ((gi, a), m) in g.iter_mut().zip(alpha).zip(self.means) {
            *gi += 2.0 * self.gamma * (a + t * m);
        }
        g
    }
}

/// Fits the polynomial-kernel estimator in its finite feature space.
pub fn fit_feature_map_estimator(
    train: &SurvivalDataset,
    kernel: &KernelConfig,
    gamma: f64,
    options: &OptimOptions,
    warm: Option<&[f64]>,
) -> Result<FeatureMapEstimator> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let features = PolynomialFeatures::new(kernel, train.dim(), DEFAULT_FEATURE_LIMIT)?;
    let q = features.len();
    let n = train.len();
    let rows: Vec<Vec<f64>> = train
        .covariates()
        .iter()
        .map(|x| features.features(x))
        .collect::<Result<_>>()?;
    let means: Vec<f64> = (0..q)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = Matrix::from_fn(n, q, |i, j| rows[i][j] - means[j]);
    let risk = RiskSets::new(train);
    let mut problem = FeatureObjective {
        centered: &centered,
        means: &means,
        constant: features.constant(),
        gamma,
        risk: &risk,
    };
    let init = match warm {
        Some(w) if w.len() == q => w.to_vec(),
        Some(w) => {
            return Err(Error::LengthMismatch {
                expected: q,
                found: w.len(),
            })
        }
        None => vec![0.0; q],
    };
    let mut h = risk.hessian(&centered.mul_vec(&init), &centered)?;
    let c2 = features.constant() * features.constant();
    for r in 0..q {
        h[(r, r)] += 2.0 * gamma;
        for k in 0..q {
            h[(r, k)] += 2.0 * gamma * means[r] * means[k] / c2;
        }
    }
    let h0 = regularized_inverse(h);
    let result = minimize(&mut problem, &init, options, h0.as_ref())?;
    Ok(FeatureMapEstimator {
        kernel: kernel.clone(),
        gamma,
        features,
        alpha: result.minimizer.clone(),
        feature_means: means,
        diagnostics: FitDiagnostics::from_result(&result, train.event_count() == 0),
    })
}

/// Which half of a train/validation pair a row-keyed table refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRole {
    Training,
    Validation,
}

pub type RiskFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A pre-trained risk model, queried pointwise or through per-row tables.
#[derive(Clone)]
pub enum ExternalPredictor {
    ClosedForm { name: String, f: RiskFn },
    Table { name: String, training: Vec<f64>, validation: Vec<f64> },
}

impl fmt::Debug for ExternalPredictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExternalPredictor::ClosedForm { name, .. } => f.debug_struct("ClosedForm").field("name", name).finish(),
            ExternalPredictor::Table {
                name,
                training,
                validation,
            } => f
                .debug_struct("Table")
                .field("name", name)
                .field("training_rows", &training.len())
                .field("validation_rows", &validation.len())
                .finish(),
        }
    }
}

impl ExternalPredictor {
    pub fn closed_form(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ExternalPredictor::ClosedForm {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn table(name: impl Into<String>, training: Vec<f64>, validation: Vec<f64>) -> Self {
        ExternalPredictor::Table {
            name: name.into(),
            training,
            validation,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ExternalPredictor::ClosedForm { name, .. } | ExternalPredictor::Table { name, .. } => name,
        }
    }

    pub fn is_pointwise(&self) -> bool {
        matches!(self, ExternalPredictor::ClosedForm { .. })
    }

    /// Raw predictions for every row of `data`.
    pub fn rows(&self, data: &SurvivalDataset, role: SampleRole) -> Result<Vec<f64>> {
        let values = match self {
            ExternalPredictor::ClosedForm { f, .. } => data.covariates().iter().map(|x| f(x)).collect(),
            ExternalPredictor::Table {
                training,
                validation,
                ..
            } => {
                let t = match role {
                    SampleRole::Training => training,
                    SampleRole::Validation => validation,
                };
                if t.len() != data.len() {
                    return Err(Error::LengthMismatch {
                        expected: data.len(),
                        found: t.len(),
                    });
                }
                t.clone()
            }
        };
        if values.iter().any(|v: &f64| !v.is_finite()) {
            return Err(Error::NonFinite("external predictions"));
        }
        Ok(values)
    }
}

/// External predictor minus its training-sample mean.
#[derive(Debug, Clone)]
pub struct CenteredExternal {
    raw: ExternalPredictor,
    training_mean: f64,
    max_abs_training: f64,
}

impl CenteredExternal {
    /// Restores a centred external from a stored training mean.
    pub fn from_training_mean(raw: ExternalPredictor, training_mean: f64) -> Result<Self> {
        if !training_mean.is_finite() {
            return Err(Error::NonFinite("training mean"));
        }
        Ok(Self {
            raw,
            training_mean,
            max_abs_training: 0.0,
        })
    }

    pub fn raw(&self) -> &ExternalPredictor {
        &self.raw
    }

    pub fn training_mean(&self) -> f64 {
        self.training_mean
    }

    pub fn name(&self) -> &str {
        self.raw.name()
    }

    /// Whether the raw predictor exceeded `bound` in magnitude on the
    /// training sample.
    pub fn exceeds_bound(&self, bound: f64) -> bool {
        self.max_abs_training > bound
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match &self.raw {
            ExternalPredictor::ClosedForm { f, .. } => {
                let v = f(x);
                if !v.is_finite() {
                    return Err(Error::NonFinite("external predictions"));
                }
                Ok(v - self.training_mean)
            }
            ExternalPredictor::Table { .. } => Err(Error::NotPointwise(0)),
        }
    }

    pub fn rows(&self, data: &SurvivalDataset, role: SampleRole) -> Result<Vec<f64>> {
        Ok(self
            .raw
            .rows(data, role)?
            .into_iter()
            .map(|v| v - self.training_mean)
            .collect())
    }

    /// The centred function as a raw predictor in its own right.
    pub fn as_predictor(&self) -> ExternalPredictor {
        let m = self.training_mean;
        match &self.raw {
            ExternalPredictor::ClosedForm { name, f } => {
                let f = f.clone();
                ExternalPredictor::ClosedForm {
                    name: name.clone(),
                    f: Arc::new(move |x| f(x) - m),
                }
            }
            ExternalPredictor::Table {
                name,
                training,
                validation,
            } => ExternalPredictor::Table {
                name: name.clone(),
                training: training.iter().map(|v| v - m).collect(),
                validation: validation.iter().map(|v| v - m).collect(),
            },
        }
    }
}

/// Centres `raw` on the training sample: `f̃ = f - P_n(f)`.
pub fn center_external(raw: &ExternalPredictor, train: &SurvivalDataset) -> Result<CenteredExternal> {
    let values = raw.rows(train, SampleRole::Training)?;
    let training_mean = values.iter().sum::<f64>() / values.len() as f64;
    let max_abs_training = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(CenteredExternal {
        raw: raw.clone(),
        training_mean,
        max_abs_training,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival_data::SurvivalRecord;

    fn tiny() -> SurvivalDataset {
        SurvivalDataset::new(
            vec![
                SurvivalRecord::new(vec![0.1], 0.3, false),
                SurvivalRecord::new(vec![0.5], 0.8, true),
                SurvivalRecord::new(vec![0.9], 0.5, false),
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn single_record_gives_zero_function() {
        let d = SurvivalDataset::new(vec![SurvivalRecord::new(vec![0.4], 0.5, false)], 1.0).unwrap();
        let est = fit_kernel_estimator(&d, &KernelConfig::sobolev1(1.0), 0.1, &OptimOptions::default(), None).unwrap();
        assert!(est.converged());
        for x in [0.0, 0.4, 1.0] {
            assert!(est.predict(&[x]).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn zero_beta_predicts_zero() {
        let d = tiny();
        let fitter = KernelFitter::new(&d, &KernelConfig::sobolev1(1.0)).unwrap();
        let est = fitter.estimator(1.0, vec![0.0; fitter.basis_len()], FitDiagnostics {
            converged: true,
            gradient_norm: 0.0,
            iterations: 0,
            objective_value: 0.0,
            all_censored: false,
            trace: None,
        });
        assert_eq!(est.predict(&[0.37]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_unusable_kernels_and_gamma() {
        let d = tiny();
        let o = OptimOptions::default();
        assert_eq!(
            fit_kernel_estimator(&d, &KernelConfig::sobolev1(0.0), 0.1, &o, None).unwrap_err(),
            Error::NotInSpace
        );
        assert!(fit_kernel_estimator(&d, &KernelConfig::sobolev1(1.0), -1.0, &o, None).is_err());
        assert!(fit_feature_map_estimator(&d, &KernelConfig::sobolev1(1.0), 1.0, &o, None).is_err());
    }

    #[test]
    fn all_censored_fit_is_flagged_and_zero() {
        let d = SurvivalDataset::new(
            vec![
                SurvivalRecord::new(vec![0.1], 0.3, true),
                SurvivalRecord::new(vec![0.6], 0.8, true),
            ],
            1.0,
        )
        .unwrap();
        let est = fit_kernel_estimator(&d, &KernelConfig::sobolev1(1.0), 0.5, &OptimOptions::default(), None).unwrap();
        assert!(est.diagnostics().all_censored);
        assert!(est.beta().iter().all(|b| *b == 0.0));
    }

    #[test]
    fn external_centering() {
        let d = tiny();
        let seven = ExternalPredictor::closed_form("seven", |_| 7.0);
        let c = center_external(&seven, &d).unwrap();
        assert_eq!(c.training_mean(), 7.0);
        assert_eq!(c.predict(&[0.3]).unwrap(), 0.0);

        let lin = ExternalPredictor::closed_form("lin", |x| 3.0 * x[0] + 1.0);
        let once = center_external(&lin, &d).unwrap();
        let twice = center_external(&once.as_predictor(), &d).unwrap();
        assert!(twice.training_mean().abs() < 1e-15);
        let a = once.rows(&d, SampleRole::Training).unwrap();
        let b = twice.rows(&d, SampleRole::Training).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }

        let table = ExternalPredictor::table("t", vec![1.0, 2.0, 3.0], vec![0.0]);
        let c = center_external(&table, &d).unwrap();
        assert_eq!(c.training_mean(), 2.0);
        assert!(matches!(c.predict(&[0.1]), Err(Error::NotPointwise(_))));
        let short = ExternalPredictor::table("t", vec![1.0], vec![]);
        assert!(matches!(center_external(&short, &d), Err(Error::LengthMismatch { .. })));
        let nan = ExternalPredictor::closed_form("nan", |_| f64::NAN);
        assert!(center_external(&nan, &d).is_err());
        let big = ExternalPredictor::closed_form("big", |_| 500.0);
        assert!(center_external(&big, &d).unwrap().exceeds_bound(DEFAULT_EXTERNAL_BOUND));
    }
}
