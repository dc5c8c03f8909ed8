//! Negative log-partial likelihood and the penalized representer objective.
//!
//! For relative-risk values `f_i = f(X_i)`,
//!
//! ```text
//! ℓ_n(f) = (1/n) Σ_{i observed} [ log S_n(f, T_i) - f_i ],
//! S_n(f, t) = (1/n) Σ_j 1{T_j ≥ t} e^{f_j}.
//! ```
//!
//! Risk sets are suffixes of the time-sorted sample, so one backward pass of
//! running log-sum-exp gives every `log S_n(f, T_i)` and one forward pass
//! gives the gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::{dot, Matrix};
use crate::survival_data::SurvivalDataset;

/// Relative pivot threshold used when selecting the representer basis.
pub const BASIS_PIVOT_TOLERANCE: f64 = 1e-10;

/// Time-sorted view of a sample with tie groups resolved.
#[derive(Debug, Clone)]
pub struct RiskSets {
    order: Vec<usize>,
    /// For each sorted position, the first sorted position with the same time.
    group_start: Vec<usize>,
    /// For each sorted position, one past the last position with the same time.
    group_end: Vec<usize>,
    observed: Vec<bool>,
}

impl RiskSets {
    pub fn new(data: &SurvivalDataset) -> Self {
        let order = data.event_order().to_vec();
        let times = data.times();
        let n = order.len();
        let mut group_start = vec![0; n];
        let mut group_end = vec![n; n];
        for p in 1..n {
            group_start[p] = if times[order[p]] == times[order[p - 1]] {
                group_start[p - 1]
            } else {
                p
            };
        }
        for p in (0..n.saturating_sub(1)).rev() {
            group_end[p] = if times[order[p]] == times[order[p + 1]] {
                group_end[p + 1]
            } else {
                p + 1
            };
        }
        let observed = data.censored().iter().map(|c| !c).collect();
        Self {
            order,
            group_start,
            group_end,
            observed,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `ℓ_n(f)` and, when requested, `∂ℓ_n/∂f_k` for every record.
    pub fn evaluate(&self, f: &[f64], want_gradient: bool) -> Result<(f64, Option<Vec<f64>>)> {
        let n = self.len();
        if f.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("risk scores"));
        }
        // suffix[p] = log Σ_{q ≥ p} exp(f[order[q]])
        let mut suffix = vec![0.0; n];
        let (mut m, mut s) = (f64::NEG_INFINITY, 0.0);
        for p in (0..n).rev() {
            let v = f[self.order[p]];
            if v > m {
                s = s * libm::exp(m - v) + 1.0;
                m = v;
            } else {
                s += libm::exp(v - m);
            }
            suffix[p] = m + libm::log(s);
        }
        let log_n = libm::log(n as f64);
        let inv_n = 1.0 / n as f64;
        let mut loss = 0.0;
        for p in 0..n {
            let i = self.order[p];
            if self.observed[i] {
                loss += suffix[self.group_start[p]] - log_n - f[i];
            }
        }
        loss *= inv_n;
        if !want_gradient {
            return Ok((loss, None));
        }
        // prefix[p] = log Σ_{observed i at sorted positions ≤ p} exp(-log Σ_{risk set of i} e^f)
        let mut prefix = vec![f64::NEG_INFINITY; n];
        let (mut m, mut s) = (f64::NEG_INFINITY, 0.0);
        for p in 0..n {
            let i = self.order[p];
            if self.observed[i] {
                let v = -suffix[self.group_start[p]];
                if v > m {
                    s = s * libm::exp(m - v) + 1.0;
                    m = v;
                } else {
                    s += libm::exp(v - m);
                }
            }
            prefix[p] = if s > 0.0 { m + libm::log(s) } else { f64::NEG_INFINITY };
        }
        let mut grad = vec![0.0; n];
        for p in 0..n {
            let k = self.order[p];
            let lp = prefix[self.group_end[p] - 1];
            let mut g = if lp.is_finite() { libm::exp(f[k] + lp) } else { 0.0 };
            if self.observed[k] {
                g -= 1.0;
            }
            grad[k] = g * inv_n;
        }
        Ok((loss, Some(grad)))
    }

    /// Hessian of `β ↦ ℓ_n(Dβ)` for the `n × m` design `D`:
    /// `(1/n) Σ_{i observed} Cov_{π_i}(d)`, with `π_i` the softmax of `f` over
    /// the risk set of `i`.
    pub fn hessian(&self, f: &[f64], design: &Matrix) -> Result<Matrix> {
        let n = self.len();
        if f.len() != n || design.rows() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: if f.len() != n { f.len() } else { design.rows() },
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("risk scores"));
        }
        let m = design.cols();
        let top = f.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let w: Vec<f64> = f.iter().map(|v| libm::exp(v - top)).collect();
        let mut hess = Matrix::zeros(m, m);
        // running Σ w_j, Σ w_j d_j and Σ_events 1/S over the current suffix
        let mut mass = 0.0;
        let mut first = vec![0.0; m];
        let mut weights = vec![0.0; n];
        let mut end = n;
        while end > 0 {
            let start = self.group_start[end - 1];
            for p in start..end {
                let j = self.order[p];
                mass += w[j];
                for (a, d) in first.iter_mut().zip(design.row(j)) {
                    *a += w[j] * d;
                }
            }
            let events = (start..end).filter(|&p| self.observed[self.order[p]]).count();
            if events > 0 {
                let e = events as f64;
                let mu: Vec<f64> = first.iter().map(|a| a / mass).collect();
                for r in 0..m {
                    for c in 0..m {
                        hess[(r, c)] -= e * mu[r] * mu[c];
                    }
                }
                weights[start] = e / mass;
            }
            end = start;
        }
        // second-moment term: record j carries w_j Σ_{events with j at risk} 1/S
        let mut acc = 0.0;
        for p in 0..n {
            acc += weights[p];
            let j = self.order[p];
            let c = w[j] * acc;
            if c != 0.0 {
                let d = design.row(j);
                for r in 0..m {
                    let dr = c * d[r];
                    for s in 0..m {
                        hess[(r, s)] += dr * d[s];
                    }
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        for v in hess.as_mut_slice() {
            *v *= inv_n;
        }
        hess.symmetrize();
        Ok(hess)
    }
}

/// `ℓ_n(f)` for the risk scores `fvalues[i] = f(X_i)`.
pub fn neg_log_partial_likelihood(fvalues: &[f64], data: &SurvivalDataset) -> Result<f64> {
    Ok(RiskSets::new(data).evaluate(fvalues, false)?.0)
}

/// Indices `A_n` (0-based) of a maximal set of training points whose bordered
/// rows `(1, k(X_i, X_1), …, k(X_i, X_n))` stay linearly independent together
/// with `(‖1‖², 1, …, 1)`.
///
/// Gaussian elimination runs on the `(n+1)×(n+1)` bordered matrix; the pivot
/// columns other than the border, shifted down by one, form the basis.
pub fn build_representer_basis(gram: &Matrix, constant_norm_sq: f64) -> Result<Vec<usize>> {
    if !(constant_norm_sq > 0.0 && constant_norm_sq.is_finite()) {
        return Err(Error::NotInSpace);
    }
    let bordered = bordered_gram(gram, constant_norm_sq);
    let tol = BASIS_PIVOT_TOLERANCE * bordered.max_abs();
    Ok(bordered
        .pivot_columns(tol)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| c - 1)
        .collect())
}

/// `[[‖1‖², 1ᵀ], [1, K]]`
pub fn bordered_gram(gram: &Matrix, constant_norm_sq: f64) -> Matrix {
    let n = gram.rows();
    Matrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => constant_norm_sq,
        (0, _) | (_, 0) => 1.0,
        _ => gram[(i - 1, j - 1)],
    })
}

/// Precomputed quantities for minimizing the penalized objective over
/// `β ∈ R^{A_n}`.
#[derive(Debug, Clone)]
pub struct RepresenterContext {
    kernel: Kernel,
    points: Vec<Vec<f64>>,
    gram: Matrix,
    constant_norm_sq: f64,
    basis: Vec<usize>,
    kbar: Vec<f64>,
    /// `k̃(X_i, X_j) = k(X_i, X_j) - k̄(X_j)` for `i ∈ [n]`, `j ∈ A_n`.
    design: Matrix,
    /// `k̂(X_i, X_j)` on `A_n × A_n`.
    penalty: Matrix,
    risk: RiskSets,
}

impl RepresenterContext {
    pub fn new(data: &SurvivalDataset, kernel: Kernel) -> Result<Self> {
        let constant_norm_sq = kernel.constant_norm_squared()?;
        let points = data.covariates().to_vec();
        let gram = kernel.gram(&points)?.into_matrix();
        let n = gram.rows();
        let basis = build_representer_basis(&gram, constant_norm_sq)?;
        let kbar: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| gram[(i, j)]).sum::<f64>() / n as f64)
            .collect();
        let design = Matrix::from_fn(n, basis.len(), |i, j| {
            let b = basis[j];
            gram[(i, b)] - kbar[b]
        });
        let penalty = Matrix::from_fn(basis.len(), basis.len(), |i, j| {
            let (a, b) = (basis[i], basis[j]);
            gram[(a, b)] - kbar[a] - kbar[b] + kbar[a] * kbar[b] * constant_norm_sq
        });
        Ok(Self {
            kernel,
            points,
            gram,
            constant_norm_sq,
            basis,
            kbar,
            design,
            penalty,
            risk: RiskSets::new(data),
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn constant_norm_sq(&self) -> f64 {
        self.constant_norm_sq
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    /// `k̄(X_j)` for every training point.
    pub fn kbar(&self) -> &[f64] {
        &self.kbar
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    /// `k̂` restricted to the basis.
    pub fn penalty_matrix(&self) -> &Matrix {
        &self.penalty
    }

    pub fn risk_sets(&self) -> &RiskSets {
        &self.risk
    }

    fn check(&self, beta: &[f64], gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::NonPositiveGamma(gamma));
        }
        if beta.len() != self.basis.len() {
            return Err(Error::LengthMismatch {
                expected: self.basis.len(),
                found: beta.len(),
            });
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        Ok(())
    }

    /// Training-point values `f_β(X_i)`.
    pub fn fitted_values(&self, beta: &[f64]) -> Vec<f64> {
        self.design.mul_vec(beta)
    }

    /// `βᵀ K̂ β = ‖f_β‖²_H`.
    pub fn penalty(&self, beta: &[f64]) -> f64 {
        self.penalty.quadratic_form(beta)
    }

    /// Objective and gradient in one pass.
    pub fn objective_and_gradient(&self, beta: &[f64], gamma: f64) -> Result<(f64, Vec<f64>)> {
        self.check(beta, gamma)?;
        let f = self.fitted_values(beta);
        let (loss, df) = self.risk.evaluate(&f, true)?;
        let df = df.expect("gradient requested");
        let kb = self.penalty.mul_vec(beta);
        let mut grad = self.design.transpose_mul_vec(&df);
        for (g, p) in grad.iter_mut().zip(&kb) {
            *g += 2.0 * gamma * p;
        }
        Ok((loss + gamma * dot(beta, &kb), grad))
    }
}

/// `ℓ_n(f_β) + γ βᵀ K̂ β`.
pub fn penalized_objective(beta: &[f64], ctx: &RepresenterContext, gamma: f64) -> Result<f64> {
    ctx.check(beta, gamma)?;
    let f = ctx.fitted_values(beta);
    let (loss, _) = ctx.risk.evaluate(&f, false)?;
    Ok(loss + gamma * ctx.penalty(beta))
}

/// Gradient of [`penalized_objective`] with respect to `β`.
pub fn penalized_gradient(beta: &[f64], ctx: &RepresenterContext, gamma: f64) -> Result<Vec<f64>> {
    Ok(ctx.objective_and_gradient(beta, gamma)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelConfig;
    use crate::survival_data::SurvivalRecord;

    fn data(rows: &[(f64, f64, bool)]) -> SurvivalDataset {
        SurvivalDataset::new(
            rows.iter()
                .map(|&(x, t, c)| SurvivalRecord::new(vec![x], t, c))
                .collect(),
            1.0,
        )
        .unwrap()
    }

    /// Literal double sum over individuals and risk sets.
    fn brute_force(f: &[f64], d: &SurvivalDataset) -> f64 {
        let n = d.len() as f64;
        let mut total = 0.0;
        for i in 0..d.len() {
            if d.censored()[i] {
                continue;
            }
            let s: f64 = (0..d.len())
                .filter(|&j| d.times()[j] >= d.times()[i])
                .map(|j| libm::exp(f[j]))
                .sum::<f64>()
                / n;
            total += libm::log(s) - f[i];
        }
        total / n
    }

    #[test]
    fn single_event_is_zero() {
        let d = data(&[(0.5, 0.3, false)]);
        assert!(neg_log_partial_likelihood(&[1.7], &d).unwrap().abs() < 1e-15);
    }

    #[test]
    fn two_events_at_zero() {
        let d = data(&[(0.1, 0.2, false), (0.2, 0.6, false)]);
        let v = neg_log_partial_likelihood(&[0.0, 0.0], &d).unwrap();
        // risk sets {1,2} then {2}: (log 1 + log 1/2) / 2
        assert!((v + libm::log(2.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ties_and_censoring_match_brute_force() {
        let d = data(&[
            (0.1, 0.5, false),
            (0.2, 0.2, true),
            (0.3, 0.5, false),
            (0.4, 0.9, false),
            (0.5, 0.2, false),
            (0.6, 0.5, true),
        ]);
        let f = [0.3, -1.2, 2.0, 0.1, -0.4, 0.9];
        let v = neg_log_partial_likelihood(&f, &d).unwrap();
        assert!((v - brute_force(&f, &d)).abs() < 1e-14);

        let (_, g) = RiskSets::new(&d).evaluate(&f, true).unwrap();
        let g = g.unwrap();
        for k in 0..f.len() {
            let mut fp = f;
            let mut fm = f;
            fp[k] += 1e-6;
            fm[k] -= 1e-6;
            let fd = (brute_force(&fp, &d) - brute_force(&fm, &d)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-8, "component {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn extreme_scores_stay_finite() {
        let d = data(&[(0.1, 0.2, false), (0.2, 0.5, false), (0.3, 0.8, false)]);
        let f = [-800.0, 700.0, -750.0];
        let (v, g) = RiskSets::new(&d).evaluate(&f, true).unwrap();
        assert!(v.is_finite());
        assert!(g.unwrap().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_non_finite_scores() {
        let d = data(&[(0.1, 0.2, false)]);
        assert!(neg_log_partial_likelihood(&[f64::NAN], &d).is_err());
        assert!(neg_log_partial_likelihood(&[1.0, 2.0], &d).is_err());
    }

    #[test]
    fn basis_examples() {
        let g = Kernel::new(KernelConfig::gaussian(vec![1.0], 1.0)).unwrap();
        let k = g.gram(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(build_representer_basis(k.matrix(), 1.0).unwrap(), vec![0, 1]);
        let k = g.gram(&[vec![0.3], vec![0.3]]).unwrap();
        assert_eq!(build_representer_basis(k.matrix(), 1.0).unwrap(), vec![0]);
        let p = Kernel::new(KernelConfig::polynomial(1, 1.0)).unwrap();
        let k = p.gram(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(build_representer_basis(k.matrix(), 1.0).unwrap(), vec![0]);
        assert!(build_representer_basis(k.matrix(), 0.0).is_err());
    }

    #[test]
    fn penalty_and_gradient_on_all_censored_data() {
        let d = data(&[(0.1, 0.5, true), (0.7, 0.3, true), (0.4, 0.9, true)]);
        let ctx = RepresenterContext::new(&d, Kernel::new(KernelConfig::sobolev1(1.0)).unwrap()).unwrap();
        let beta = [0.4, -1.0, 2.5];
        let gamma = 0.3;
        let v = penalized_objective(&beta, &ctx, gamma).unwrap();
        assert!((v - gamma * ctx.penalty(&beta)).abs() < 1e-14);
        let g = penalized_gradient(&beta, &ctx, gamma).unwrap();
        let kb = ctx.penalty_matrix().mul_vec(&beta);
        for (a, b) in g.iter().zip(kb) {
            assert_eq!(*a, 2.0 * gamma * b);
        }
        assert!(penalized_objective(&beta, &ctx, 0.0).is_err());
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let d = data(&[
            (0.1, 0.5, false),
            (0.4, 0.5, false),
            (0.7, 0.2, true),
            (0.2, 0.9, false),
            (0.9, 0.3, false),
            (0.5, 0.5, true),
        ]);
        let risk = RiskSets::new(&d);
        let design = Matrix::from_fn(6, 3, |i, j| libm::sin((i * 3 + j) as f64));
        let beta = [0.3, -0.7, 1.1];
        let grad = |b: &[f64]| {
            let f = design.mul_vec(b);
            design.transpose_mul_vec(&risk.evaluate(&f, true).unwrap().1.unwrap())
        };
        let h = risk.hessian(&design.mul_vec(&beta), &design).unwrap();
        let eps = 1e-6;
        for c in 0..3 {
            let (mut up, mut dn) = (beta.to_vec(), beta.to_vec());
            up[c] += eps;
            dn[c] -= eps;
            let (gu, gd) = (grad(&up), grad(&dn));
            for r in 0..3 {
                let fd = (gu[r] - gd[r]) / (2.0 * eps);
                assert!((fd - h[(r, c)]).abs() < 1e-7, "{r},{c}: {fd} vs {}", h[(r, c)]);
            }
        }
    }
}
