//! Proportional-hazards data with a known relative risk function.
//!
//! Survival times are drawn by inverting the cumulative hazard:
//! `T_S = Λ⁻¹(-e^{-f₀(X)} log U)` with constant baseline hazard `λ₀`, so
//! `Λ⁻¹(s) = s / λ₀`. Censoring is independent, `T_C ~ U[low, high] ∧ 1`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{CounterRng, STREAM_CENSORING, STREAM_COVARIATES, STREAM_SURVIVAL};
use crate::survival_data::{SurvivalDataset, SurvivalRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpVariant {
    /// `X ~ U[0,1]`, `f₀(x) = 2 sin(2x) - 2 sin²(1)`.
    Univariate,
    /// `X ~ U[0,1]^10`, `f₀(x) = Σ_{j<5} {2 sin(2x_j) - 2 sin²(1)}`.
    MultivariateD10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub variant: DgpVariant,
    /// Constant baseline hazard `λ₀`.
    pub baseline_rate: f64,
    pub censoring_low: f64,
    pub censoring_high: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self::new(DgpVariant::Univariate)
    }
}

impl DgpConfig {
    pub fn new(variant: DgpVariant) -> Self {
        Self {
            variant,
            baseline_rate: 6.0,
            censoring_low: 0.2,
            censoring_high: 2.0,
        }
    }

    pub fn univariate() -> Self {
        Self::new(DgpVariant::Univariate)
    }

    pub fn multivariate() -> Self {
        Self::new(DgpVariant::MultivariateD10)
    }

    pub fn dim(&self) -> usize {
        match self.variant {
            DgpVariant::Univariate => 1,
            DgpVariant::MultivariateD10 => 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baseline_rate > 0.0 && self.baseline_rate.is_finite()) {
            return Err(Error::InvalidOptions("baseline_rate must be positive".into()));
        }
        if !(self.censoring_low > 0.0 && self.censoring_low < self.censoring_high)
            || !self.censoring_high.is_finite()
        {
            return Err(Error::InvalidOptions(
                "censoring bounds must satisfy 0 < low < high".into(),
            ));
        }
        Ok(())
    }

    /// Cumulative baseline hazard `Λ(t) = λ₀ t`.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        self.baseline_rate * t
    }

    /// `Λ⁻¹(s) = s / λ₀`.
    pub fn inverse_cumulative_hazard(&self, s: f64) -> f64 {
        s / self.baseline_rate
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutsideDomain);
        }
        Ok(())
    }

    pub fn sample_covariates(&self, rng: &mut CounterRng) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.uniform()).collect()
    }
}

fn univariate_f0(x: f64) -> f64 {
    let s1 = libm::sin(1.0);
    2.0 * libm::sin(2.0 * x) - 2.0 * s1 * s1
}

/// True relative risk `f₀(x)`.
pub fn true_f0(config: &DgpConfig, x: &[f64]) -> Result<f64> {
    config.check(x)?;
    Ok(match config.variant {
        DgpVariant::Univariate => univariate_f0(x[0]),
        DgpVariant::MultivariateD10 => x[..5].iter().map(|&v| univariate_f0(v)).sum(),
    })
}

/// The fixed "external" risk model used in aggregation studies: a perturbed
/// `f₀` in one dimension, the best linear `L₂` approximation on the first
/// four coordinates in ten.
pub fn external_predictor(config: &DgpConfig, x: &[f64]) -> Result<f64> {
    config.check(x)?;
    Ok(match config.variant {
        DgpVariant::Univariate => {
            let s = libm::sin(0.75);
            2.0 * libm::sin(1.5 * x[0]) - 8.0 / 3.0 * s * s
        }
        DgpVariant::MultivariateD10 => {
            let slope = libm::sin(2.0) - libm::cos(2.0) - 1.0;
            x[..4].iter().map(|&v| slope * (6.0 * v - 3.0)).sum()
        }
    })
}

/// Latent quantities kept for oracle checks; never shown to estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTruth {
    pub config: DgpConfig,
    pub survival_times: Vec<f64>,
    pub censoring_times: Vec<f64>,
    pub f0_values: Vec<f64>,
}

impl SimulationTruth {
    pub fn f0(&self, x: &[f64]) -> Result<f64> {
        true_f0(&self.config, x)
    }
}

/// Draws `n` records. Record `i` uses only the random streams addressed by
/// `(seed, ·, i)`.
pub fn simulate_dataset(config: &DgpConfig, n: usize, seed: u64) -> Result<(SurvivalDataset, SimulationTruth)> {
    config.validate()?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut records = Vec::with_capacity(n);
    let mut survival_times = Vec::with_capacity(n);
    let mut censoring_times = Vec::with_capacity(n);
    let mut f0_values = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let x = config.sample_covariates(&mut CounterRng::new(seed, STREAM_COVARIATES, i));
        let f0 = true_f0(config, &x)?;
        let mut surv = CounterRng::new(seed, STREAM_SURVIVAL, i);
        let mut cens = CounterRng::new(seed, STREAM_CENSORING, i);
        let (ts, tc) = loop {
            let u = surv.uniform_open_closed();
            let ts = config.inverse_cumulative_hazard(-libm::exp(-f0) * libm::log(u));
            let tc = cens
                .uniform_range(config.censoring_low, config.censoring_high)
                .min(1.0);
            if ts.min(tc) > 0.0 {
                break (ts, tc);
            }
        };
        records.push(SurvivalRecord::new(x, ts.min(tc), tc < ts));
        survival_times.push(ts);
        censoring_times.push(tc);
        f0_values.push(f0);
    }
    let data = SurvivalDataset::new(records, 1.0)?;
    Ok((
        data,
        SimulationTruth {
            config: config.clone(),
            survival_times,
            censoring_times,
            f0_values,
        },
    ))
}
