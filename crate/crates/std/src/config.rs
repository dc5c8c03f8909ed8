//! JSON run configuration shared by all subcommands.
//!
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory of the configuration file.

use std::path::{Path, PathBuf};

use care_core::{external_predictor, true_f0, DgpConfig, ExternalPredictor, GammaGrid, KernelConfig, OptimOptions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaGridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default = "yes")]
    pub geometric: bool,
}

fn yes() -> bool {
    true
}

impl Default for GammaGridSpec {
    fn default() -> Self {
        Self {
            min: 1e-5,
            max: 10.0,
            count: 50,
            geometric: true,
        }
    }
}

impl GammaGridSpec {
    pub fn build(&self) -> Result<GammaGrid> {
        if self.count == 0 {
            return Err(CliError::config("gamma_grid.count: grid is empty"));
        }
        if !(self.min > 0.0 && self.min.is_finite()) {
            return Err(CliError::config("gamma_grid.min: must be positive"));
        }
        if !(self.max >= self.min && self.max.is_finite()) {
            return Err(CliError::config("gamma_grid.max: must be finite and at least min"));
        }
        let grid = if self.geometric || self.count == 1 {
            GammaGrid::geometric(self.min, self.max, self.count)
        } else {
            let step = (self.max - self.min) / (self.count - 1) as f64;
            let mut v: Vec<f64> = (0..self.count).map(|i| self.min + step * i as f64).collect();
            v[self.count - 1] = self.max;
            GammaGrid::new(v)
        };
        grid.map_err(|e| CliError::config(format!("gamma_grid: {e}")))
    }
}

/// An external risk model: a built-in closed form evaluated on the DGP, or
/// per-row prediction tables aligned with the training and validation files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExternalSpec {
    /// `perturbed` (the simulation's misspecified risk score) or `truth`.
    Builtin { name: String },
    Table { name: String, train: PathBuf, valid: PathBuf },
}

pub const BUILTIN_EXTERNALS: [&str; 2] = ["perturbed", "truth"];

/// Closed-form external named `name` for covariates drawn from `dgp`.
pub fn builtin_external(name: &str, dgp: &DgpConfig) -> Result<ExternalPredictor> {
    let cfg = dgp.clone();
    // covariates outside the DGP domain surface as non-finite predictions
    match name {
        "perturbed" => Ok(ExternalPredictor::closed_form(name, move |x| {
            external_predictor(&cfg, x).unwrap_or(f64::NAN)
        })),
        "truth" => Ok(ExternalPredictor::closed_form(name, move |x| true_f0(&cfg, x).unwrap_or(f64::NAN))),
        other => Err(CliError::config(format!(
            "externals: unknown built-in `{other}` (expected one of {BUILTIN_EXTERNALS:?})"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    #[default]
    Representer,
    FeatureMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySpec {
    /// Training plus validation sample sizes.
    pub ns: Vec<usize>,
    pub replications: usize,
    /// Include the built-in perturbed external and the CARE estimator.
    pub external: bool,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            ns: vec![50, 100, 200, 400],
            replications: 20,
            external: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dgp: DgpConfig,
    /// Sample size for `simulate`; signed so that negative input is reported
    /// by name.
    pub n: Option<i64>,
    /// `simulate` also writes a train/validation split.
    pub split: bool,
    pub data: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub kernel: KernelConfig,
    pub method: FitMethod,
    pub gamma: Option<f64>,
    pub gamma_grid: GammaGridSpec,
    pub theta_resolution: usize,
    pub externals: Vec<ExternalSpec>,
    pub optimizer: OptimOptions,
    /// Fitted model for `evaluate`.
    pub model: Option<PathBuf>,
    /// `evaluate` also reports the Monte Carlo `L₂` distance to the DGP's `f₀`.
    pub l2_against_dgp: bool,
    pub mc_points: usize,
    pub study: StudySpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dgp: DgpConfig::univariate(),
            n: None,
            split: false,
            data: None,
            train: None,
            valid: None,
            kernel: KernelConfig::sobolev1(1.0),
            method: FitMethod::Representer,
            gamma: None,
            gamma_grid: GammaGridSpec::default(),
            theta_resolution: 20,
            externals: Vec::new(),
            optimizer: OptimOptions::default(),
            model: None,
            l2_against_dgp: false,
            mc_points: 500,
            study: StudySpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.data, &mut self.train, &mut self.valid, &mut self.model]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for e in &mut self.externals {
            if let ExternalSpec::Table { train, valid, .. } = e {
                fix(train);
                fix(valid);
            }
        }
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate().map_err(|e| CliError::config(format!("dgp: {e}")))?;
        care_core::Kernel::new(self.kernel.clone()).map_err(|e| CliError::config(format!("kernel: {e}")))?;
        self.optimizer
            .validate()
            .map_err(|e| CliError::config(format!("optimizer: {e}")))?;
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(CliError::config("gamma: must be positive and finite"));
            }
        }
        if self.mc_points == 0 {
            return Err(CliError::config("mc_points: must be positive"));
        }
        Ok(())
    }

    pub fn sample_size(&self) -> Result<usize> {
        match self.n {
            None => Err(CliError::config("n: required")),
            Some(n) if n <= 0 => Err(CliError::config(format!("n: must be positive, got {n}"))),
            Some(n) => usize::try_from(n).map_err(|_| CliError::config("n: too large")),
        }
    }
}
