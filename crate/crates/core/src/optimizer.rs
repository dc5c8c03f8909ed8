//! BFGS with Armijo backtracking for smooth, strongly convex objectives.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, norm_inf, Matrix};

/// Halvings tried before a line search is declared failed.
pub const MAX_BACKTRACKS: usize = 60;

/// Step lengths tried when objective values stop resolving progress.
const FLOOR_STEPS: usize = 4;

/// Increase of the objective, in units of `ε (1 + |f|)`, attributed to
/// rounding.
pub const ROUNDING_SLACK: f64 = 16.0;

/// Largest objective increase treated as rounding noise at value `f`.
pub fn rounding_tolerance(f: f64) -> f64 {
    ROUNDING_SLACK * f64::EPSILON * (1.0 + f.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimOptions {
    /// Stop once the ∞-norm of the gradient is at most this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant `c` in `f(x + t d) ≤ f(x) + c t ∇fᵀd`.
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub record_trace: bool,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            max_iterations: 500,
            armijo_slope: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            record_trace: true,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidOptions(format!("{what} out of range")));
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance.is_finite()) {
            return bad("gradient_tolerance");
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 1.0) {
            return bad("armijo_slope");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor");
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initial_step");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub minimizer: Vec<f64>,
    pub objective_value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

/// A differentiable objective. Implementors may cache work between a `value`
/// call and a `gradient` call at the same point.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;
}

struct Closures<F, G>(F, G);

impl<F, G> Objective for Closures<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        (self.1)(x)
    }
}

/// Minimizes `objective` starting from `init`.
pub fn minimize_bfgs<F, G>(objective: F, gradient: G, init: &[f64], options: &OptimOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    minimize(&mut Closures(objective, gradient), init, options, None)
}

/// BFGS driver.
///
/// `initial_inverse_hessian` overrides the default starting approximation
/// `I / (1 + ‖∇f(x₀)‖)`; it must be symmetric positive definite.
///
/// When backtracking finds no strict decrease the driver tries a few
/// shortened steps that reduce `‖∇f‖∞` while keeping the objective within
/// [`rounding_tolerance`] of its current value, then restarts once from the
/// initial inverse Hessian before giving up.
pub fn minimize(
    problem: &mut impl Objective,
    init: &[f64],
    options: &OptimOptions,
    initial_inverse_hessian: Option<&Matrix>,
) -> Result<OptimResult> {
    options.validate()?;
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial point"));
    }
    let n = init.len();
    let mut x = init.to_vec();
    let mut fx = problem.value(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut g = problem.gradient(&x);
    let default_h = |g: &[f64]| {
        let mut h = Matrix::identity(n);
        let s = 1.0 / (1.0 + norm2(g));
        for i in 0..n {
            h[(i, i)] = s;
        }
        h
    };
    let h0 = match initial_inverse_hessian {
        Some(h0) => {
            if h0.rows() != n || h0.cols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: h0.rows(),
                });
            }
            h0.clone()
        }
        None => default_h(&g),
    };
    let mut h = h0.clone();
    // set after a restart from h0, cleared by the next step that makes progress
    let mut restarted = false;
    let mut trace = options.record_trace.then(|| vec![fx]);
    let mut iterations = 0;
    let mut converged = norm_inf(&g) <= options.gradient_tolerance;

    while !converged && iterations < options.max_iterations {
        let mut d: Vec<f64> = h.mul_vec(&g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = default_h(&g);
            d = h.mul_vec(&g).into_iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            if !(slope < 0.0) {
                break;
            }
        }
        let mut t = options.initial_step;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let ft = problem.value(&trial);
            if ft.is_finite() && ft <= fx + options.armijo_slope * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= options.backtrack_factor;
        }
        let mut g_accepted = None;
        if !matches!(&accepted, Some((_, f_new)) if *f_new < fx) {
            // At the rounding floor of the objective the Armijo test cannot
            // see progress; take the first of a few steps that shrinks the
            // gradient without raising the objective beyond rounding.
            accepted = None;
            for k in 0..FLOOR_STEPS {
                let t = options.initial_step * (FLOOR_STEPS - k) as f64 / FLOOR_STEPS as f64;
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
                if problem.value(&trial) <= fx + rounding_tolerance(fx) {
                    let gt = problem.gradient(&trial);
                    if norm_inf(&gt) < norm_inf(&g) {
                        let ft = problem.value(&trial);
                        accepted = Some((trial, ft));
                        g_accepted = Some(gt);
                        break;
                    }
                }
            }
        }
        let (x_new, f_new) = match accepted {
            Some(step) => step,
            None if !restarted => {
                h = h0.clone();
                restarted = true;
                continue;
            }
            None => break,
        };
        restarted = false;
        let g_new = g_accepted.unwrap_or_else(|| problem.gradient(&x_new));
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        iterations += 1;
        if let Some(tr) = trace.as_mut() {
            tr.push(fx);
        }
        converged = norm_inf(&g) <= options.gradient_tolerance;
    }

    Ok(OptimResult {
        gradient_norm: norm_inf(&g),
        minimizer: x,
        objective_value: fx,
        iterations,
        converged,
        trace,
    })
}

/// `H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut Matrix, s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = h.mul_vec(y);
    let yhy = dot(y, &hy);
    let coef = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += coef * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
    }
}
