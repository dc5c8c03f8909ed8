//! Positive-definite kernels on covariate vectors.
//!
//! A [`KernelConfig`] is the declarative (serializable) description; a
//! [`Kernel`] is the validated form used for evaluation. Every variant carries
//! an explicit non-negative shift `a`, and the constant function belongs to
//! the induced Hilbert space exactly when that shift is positive.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Default cap on the number of polynomial features.
pub const DEFAULT_FEATURE_LIMIT: usize = 10_000;

/// Eigenvalues below this fraction of the largest are treated as zero when
/// forming a pseudo-inverse.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-10;

/// Relative size (per `√n`) of the null-space component of `1_n` above which
/// [`kappa_matrix`] reports zero.
pub const NULL_SPACE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    /// `a + exp(-(x-y)ᵀ Σ⁻¹ (x-y))`, with `Σ = diag(lengthscales²)` or a full
    /// covariance matrix `sigma`. Exactly one of the two must be present.
    #[serde(alias = "shifted_gaussian")]
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lengthscales: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<Vec<f64>>>,
        shift: f64,
    },
    /// `(xᵀy + a)^p`
    Polynomial { degree: u32, shift: f64 },
    /// `a + min(x, y)` on `[0, 1]`
    Sobolev1 { shift: f64 },
    /// `a + ∫_0^{min(x,y)} (x - z)(y - z) dz` on `[0, 1]`
    Sobolev2 { shift: f64 },
    /// Sum of one-dimensional kernels, each applied to one coordinate.
    Additive { summands: Vec<AdditiveTerm> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdditiveTerm {
    pub coord: usize,
    pub kernel: KernelConfig,
}

impl KernelConfig {
    pub fn gaussian(lengthscales: Vec<f64>, shift: f64) -> Self {
        KernelConfig::Gaussian {
            lengthscales: Some(lengthscales),
            sigma: None,
            shift,
        }
    }

    pub fn polynomial(degree: u32, shift: f64) -> Self {
        KernelConfig::Polynomial { degree, shift }
    }

    pub fn sobolev1(shift: f64) -> Self {
        KernelConfig::Sobolev1 { shift }
    }

    pub fn sobolev2(shift: f64) -> Self {
        KernelConfig::Sobolev2 { shift }
    }

    /// Additive first-order Sobolev kernel `a + Σ_j min(x_j, y_j)` over `d`
    /// coordinates, with the whole shift carried by the first summand.
    pub fn additive_sobolev1(d: usize, shift: f64) -> Self {
        KernelConfig::Additive {
            summands: (0..d)
                .map(|coord| AdditiveTerm {
                    coord,
                    kernel: KernelConfig::sobolev1(if coord == 0 { shift } else { 0.0 }),
                })
                .collect(),
        }
    }

    /// Total shift `a`; for additive kernels the sum over summands.
    pub fn shift(&self) -> f64 {
        match self {
            KernelConfig::Gaussian { shift, .. }
            | KernelConfig::Polynomial { shift, .. }
            | KernelConfig::Sobolev1 { shift }
            | KernelConfig::Sobolev2 { shift } => *shift,
            KernelConfig::Additive { summands } => summands.iter().map(|t| t.kernel.shift()).sum(),
        }
    }

    /// Same kernel with every shift set to zero.
    pub fn unshifted(&self) -> Self {
        let mut c = self.clone();
        match &mut c {
            KernelConfig::Gaussian { shift, .. }
            | KernelConfig::Polynomial { shift, .. }
            | KernelConfig::Sobolev1 { shift }
            | KernelConfig::Sobolev2 { shift } => *shift = 0.0,
            KernelConfig::Additive { summands } => {
                for t in summands {
                    t.kernel = t.kernel.unshifted();
                }
            }
        }
        c
    }
}

/// Validated kernel ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    config: KernelConfig,
    form: Form,
}

#[derive(Debug, Clone, PartialEq)]
enum Form {
    Gaussian { precision: Matrix, shift: f64 },
    Polynomial { degree: u32, shift: f64 },
    Sobolev1 { shift: f64 },
    Sobolev2 { shift: f64 },
    Additive { terms: Vec<(usize, Kernel)> },
}

fn check_shift(shift: f64) -> Result<()> {
    if shift.is_finite() && shift >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!(
            "shift must be finite and non-negative, got {shift}"
        )))
    }
}

impl Kernel {
    pub fn new(config: KernelConfig) -> Result<Self> {
        let form = match &config {
            KernelConfig::Gaussian {
                lengthscales,
                sigma,
                shift,
            } => {
                check_shift(*shift)?;
                let precision = match (lengthscales, sigma) {
                    (Some(ls), None) => {
                        if ls.is_empty() || ls.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                            return Err(Error::InvalidKernel(
                                "lengthscales must be a non-empty list of positive values".into(),
                            ));
                        }
                        let mut p = Matrix::zeros(ls.len(), ls.len());
                        for (i, l) in ls.iter().enumerate() {
                            p[(i, i)] = 1.0 / (l * l);
                        }
                        p
                    }
                    (None, Some(rows)) => {
                        let d = rows.len();
                        if d == 0 || rows.iter().any(|r| r.len() != d) {
                            return Err(Error::InvalidKernel("sigma must be a square matrix".into()));
                        }
                        let s = Matrix::from_rows(rows);
                        if s.asymmetry() > 1e-12 * s.max_abs().max(1.0) {
                            return Err(Error::InvalidKernel("sigma must be symmetric".into()));
                        }
                        let (vals, _) = s.symmetric_eigen();
                        if !(vals[0] > 0.0) {
                            return Err(Error::InvalidKernel(
                                "sigma must be positive definite".into(),
                            ));
                        }
                        s.spd_inverse().ok_or_else(|| {
                            Error::InvalidKernel("sigma must be positive definite".into())
                        })?
                    }
                    _ => {
                        return Err(Error::InvalidKernel(
                            "gaussian kernel needs exactly one of lengthscales or sigma".into(),
                        ))
                    }
                };
                Form::Gaussian {
                    precision,
                    shift: *shift,
                }
            }
            KernelConfig::Polynomial { degree, shift } => {
                check_shift(*shift)?;
                if *degree < 1 {
                    return Err(Error::InvalidKernel("polynomial degree must be >= 1".into()));
                }
                Form::Polynomial {
                    degree: *degree,
                    shift: *shift,
                }
            }
            KernelConfig::Sobolev1 { shift } => {
                check_shift(*shift)?;
                Form::Sobolev1 { shift: *shift }
            }
            KernelConfig::Sobolev2 { shift } => {
                check_shift(*shift)?;
                Form::Sobolev2 { shift: *shift }
            }
            KernelConfig::Additive { summands } => {
                if summands.is_empty() {
                    return Err(Error::InvalidKernel("additive kernel needs a summand".into()));
                }
                let mut terms = Vec::with_capacity(summands.len());
                for t in summands {
                    if terms.iter().any(|(c, _)| *c == t.coord) {
                        return Err(Error::InvalidKernel(format!(
                            "coordinate {} appears twice in additive kernel",
                            t.coord
                        )));
                    }
                    let inner = Kernel::new(t.kernel.clone())?;
                    if matches!(inner.form, Form::Additive { .. })
                        || inner.input_dim().is_some_and(|d| d != 1)
                    {
                        return Err(Error::InvalidKernel(
                            "additive summands must be one-dimensional kernels".into(),
                        ));
                    }
                    terms.push((t.coord, inner));
                }
                Form::Additive { terms }
            }
        };
        Ok(Self { config, form })
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn shift(&self) -> f64 {
        self.config.shift()
    }

    /// Fixed input dimension, if the variant has one.
    fn input_dim(&self) -> Option<usize> {
        match &self.form {
            Form::Gaussian { precision, .. } => Some(precision.rows()),
            Form::Polynomial { .. } => None,
            Form::Sobolev1 { .. } | Form::Sobolev2 { .. } => Some(1),
            Form::Additive { .. } => None,
        }
    }

    /// Checks that a covariate vector is admissible for this kernel.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if let Some(d) = self.input_dim() {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: x.len(),
                });
            }
        }
        match &self.form {
            Form::Sobolev1 { .. } | Form::Sobolev2 { .. } => {
                if !(0.0..=1.0).contains(&x[0]) {
                    return Err(Error::OutsideUnitInterval { value: x[0] });
                }
            }
            Form::Additive { terms } => {
                for (coord, k) in terms {
                    let Some(v) = x.get(*coord) else {
                        return Err(Error::DimensionMismatch {
                            expected: coord + 1,
                            found: x.len(),
                        });
                    };
                    k.check_point(core::slice::from_ref(v))?;
                }
            }
            _ => {}
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates"));
        }
        Ok(())
    }

    /// `k(x, y)` after validating both arguments.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// `k(x, y)` without validation; callers must have run [`check_point`].
    ///
    /// [`check_point`]: Kernel::check_point
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.form {
            Form::Gaussian { precision, shift } => {
                let d = x.len();
                let mut q = 0.0;
                for i in 0..d {
                    let di = x[i] - y[i];
                    let row = precision.row(i);
                    let mut s = row[i] * di;
                    for j in 0..d {
                        if j != i {
                            s += row[j] * (x[j] - y[j]);
                        }
                    }
                    q += di * s;
                }
                shift + libm::exp(-q)
            }
            Form::Polynomial { degree, shift } => powi(dot(x, y) + shift, *degree),
            Form::Sobolev1 { shift } => shift + x[0].min(y[0]),
            Form::Sobolev2 { shift } => {
                let (u, v) = (x[0], y[0]);
                let m = u.min(v);
                shift + m * u * v - 0.5 * m * m * (u + v) + m * m * m / 3.0
            }
            Form::Additive { terms } => terms
                .iter()
                .map(|(c, k)| {
                    k.eval_unchecked(core::slice::from_ref(&x[*c]), core::slice::from_ref(&y[*c]))
                })
                .sum(),
        }
    }

    /// Squared Hilbert norm of the constant function; see
    /// [`constant_norm_squared`].
    pub fn constant_norm_squared(&self) -> Result<f64> {
        let a = self.shift();
        if a <= 0.0 {
            return Err(Error::NotInSpace);
        }
        Ok(match &self.form {
            Form::Polynomial { degree, .. } => 1.0 / powi(a, *degree),
            _ => 1.0 / a,
        })
    }

    /// Gram matrix over `points`.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<GramMatrix> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = points[0].len();
        for p in points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.len(),
                });
            }
            self.check_point(p)?;
        }
        let n = points.len();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval_unchecked(&points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(GramMatrix(k))
    }

    /// `K_ij = k(xs_i, ys_j)` for two point lists.
    pub fn cross_gram(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<Matrix> {
        for p in xs.iter().chain(ys) {
            self.check_point(p)?;
        }
        if let (Some(a), Some(b)) = (xs.first(), ys.first()) {
            if xs.iter().chain(ys).any(|p| p.len() != a.len()) {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    found: b.len(),
                });
            }
        }
        Ok(Matrix::from_fn(xs.len(), ys.len(), |i, j| {
            self.eval_unchecked(&xs[i], &ys[j])
        }))
    }
}

fn powi(base: f64, exp: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// `k(x, y)` for a kernel description.
pub fn eval_kernel(config: &KernelConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    Kernel::new(config.clone())?.eval(x, y)
}

/// Symmetric matrix of pairwise kernel values `K_ij = k(X_i, X_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(Matrix);

impl GramMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

pub fn gram_matrix(config: &KernelConfig, points: &[Vec<f64>]) -> Result<GramMatrix> {
    Kernel::new(config.clone())?.gram(points)
}

/// `lim_{δ↘0} 1 / (1ᵀ(A + δI)⁻¹1)` for a symmetric positive semi-definite `A`.
///
/// Zero when `1_n` has a non-negligible component in the numerical null space
/// of `A` (some `v` with `Av = 0` and `1ᵀv = 1`); otherwise `1 / (1ᵀA⁺1)`.
pub fn kappa_matrix(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let scale = a.max_abs();
    let asym = a.asymmetry();
    if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let (values, vectors) = a.symmetric_eigen();
    let largest = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if values[0] < -1e-8 * largest {
        return Err(Error::NotPositiveSemidefinite {
            eigenvalue: values[0],
        });
    }
    let cutoff = PSEUDO_INVERSE_CUTOFF * largest;
    let mut null_sq = 0.0;
    let mut quad = 0.0;
    for (k, &lambda) in values.iter().enumerate() {
        let c: f64 = (0..n).map(|i| vectors[(i, k)]).sum();
        if lambda <= cutoff {
            null_sq += c * c;
        } else {
            quad += c * c / lambda;
        }
    }
    if libm::sqrt(null_sq) > NULL_SPACE_TOLERANCE * libm::sqrt(n as f64) {
        return Ok(0.0);
    }
    Ok(1.0 / quad)
}

/// `‖1_X‖²_H` in closed form: `1/a` for the Gaussian and Sobolev kernels,
/// `1/a^p` for the polynomial kernel and `1/(Σ a_j)` for additive kernels.
pub fn constant_norm_squared(config: &KernelConfig) -> Result<f64> {
    Kernel::new(config.clone())?.constant_norm_squared()
}

/// Exponent vectors of all monomials of degree `1..=degree` in `d`
/// variables, graded and lexicographically descending within each degree.
pub fn monomial_exponents(d: usize, degree: u32) -> Vec<Vec<u32>> {
    fn fill(rest: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = rest;
            out.push(cur.clone());
            return;
        }
        for e in (0..=rest).rev() {
            cur[pos] = e;
            fill(rest - e, pos + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    let mut cur = vec![0; d];
    for s in 1..=degree {
        fill(s, 0, &mut cur, &mut out);
    }
    out
}

/// `C(d + p, p)`, or `None` on overflow.
pub fn polynomial_feature_count(d: usize, degree: u32) -> Option<usize> {
    let mut c: u128 = 1;
    for i in 1..=degree as u128 {
        c = c.checked_mul(d as u128 + i)? / i;
        if c > usize::MAX as u128 {
            return None;
        }
    }
    Some(c as usize)
}

/// Explicit feature map of the polynomial kernel.
///
/// Coordinates are the monomials of degree `1..=p` (graded lexicographic)
/// scaled by `√(p!/((p-s)! α!) · a^{p-s})`, followed by the constant
/// coordinate `a^{p/2}`, so that `φ(x)ᵀφ(y) = (xᵀy + a)^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFeatures {
    dim: usize,
    exponents: Vec<Vec<u32>>,
    weights: Vec<f64>,
    constant: f64,
}

impl PolynomialFeatures {
    pub fn new(config: &KernelConfig, dim: usize, limit: usize) -> Result<Self> {
        let KernelConfig::Polynomial { degree, shift } = *config else {
            return Err(Error::InvalidKernel(
                "feature maps exist only for polynomial kernels".into(),
            ));
        };
        Kernel::new(config.clone())?;
        if shift <= 0.0 {
            return Err(Error::NotInSpace);
        }
        let count = polynomial_feature_count(dim, degree).unwrap_or(usize::MAX);
        if count > limit {
            return Err(Error::FeatureCountOverflow { count, limit });
        }
        let exponents = monomial_exponents(dim, degree);
        let weights = exponents
            .iter()
            .map(|alpha| {
                let s: u32 = alpha.iter().sum();
                // p! / ((p-s)! Π α_i!) built as a product of binomials
                let mut coef = binomial(degree, s);
                let mut left = s;
                for &e in alpha {
                    coef *= binomial(left, e);
                    left -= e;
                }
                libm::sqrt(coef * libm::pow(shift, f64::from(degree - s)))
            })
            .collect();
        Ok(Self {
            dim,
            exponents,
            weights,
            constant: libm::pow(shift, f64::from(degree) / 2.0),
        })
    }

    /// Number of non-constant features `q`.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Value `c` of the constant coordinate.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Non-constant coordinates `φ_1..φ_q`.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self
            .exponents
            .iter()
            .zip(&self.weights)
            .map(|(alpha, w)| {
                w * alpha
                    .iter()
                    .zip(x)
                    .map(|(&e, &v)| powi(v, e))
                    .product::<f64>()
            })
            .collect())
    }

    /// Full map `φ(x)` of length `q + 1`, constant last.
    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut f = self.features(x)?;
        f.push(self.constant);
        Ok(f)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    libm::round(c)
}

/// `φ(x)` for a polynomial kernel, constant coordinate last.
pub fn feature_map(config: &KernelConfig, x: &[f64]) -> Result<Vec<f64>> {
    PolynomialFeatures::new(config, x.len(), DEFAULT_FEATURE_LIMIT)?.map(x)
}

/// Short human-readable label, used in reports.
pub fn describe(config: &KernelConfig) -> String {
    match config {
        KernelConfig::Gaussian { shift, .. } => format!("gaussian(a={shift})"),
        KernelConfig::Polynomial { degree, shift } => format!("polynomial(p={degree},a={shift})"),
        KernelConfig::Sobolev1 { shift } => format!("sobolev1(a={shift})"),
        KernelConfig::Sobolev2 { shift } => format!("sobolev2(a={shift})"),
        KernelConfig::Additive { summands } => format!("additive({} terms)", summands.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn documented_values() {
        assert!(close(eval_kernel(&KernelConfig::sobolev1(1.0), &[0.3], &[0.5]).unwrap(), 1.3, 1e-15));
        assert_eq!(
            eval_kernel(&KernelConfig::polynomial(2, 1.0), &[1.0, 2.0], &[2.0, 1.0]).unwrap(),
            25.0
        );
        let g = KernelConfig::gaussian(vec![1.0, 1.0], 0.0);
        assert_eq!(eval_kernel(&g, &[0.7, -0.2], &[0.7, -0.2]).unwrap(), 1.0);
    }

    #[test]
    fn sobolev2_matches_quadrature() {
        let k = Kernel::new(KernelConfig::sobolev2(0.0)).unwrap();
        for &(x, y) in &[(0.3, 0.8), (0.9, 0.1), (0.5, 0.5), (1.0, 0.0), (1.0, 1.0)] {
            let m: f64 = if x < y { x } else { y };
            let steps = 20_000;
            let h = m / steps as f64;
            // composite Simpson
            let f = |z: f64| (x - z) * (y - z);
            let mut s = f(0.0) + f(m);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(i as f64 * h);
            }
            let quad = s * h / 3.0;
            assert!((k.eval(&[x], &[y]).unwrap() - quad).abs() < 1e-13);
        }
    }

    #[test]
    fn gaussian_full_covariance_matches_lengthscales() {
        let diag = KernelConfig::gaussian(vec![0.5, 2.0], 0.3);
        let full = KernelConfig::Gaussian {
            lengthscales: None,
            sigma: Some(vec![vec![0.25, 0.0], vec![0.0, 4.0]]),
            shift: 0.3,
        };
        let (x, y) = ([0.1, -0.4], [0.7, 1.3]);
        let a = eval_kernel(&diag, &x, &y).unwrap();
        let b = eval_kernel(&full, &x, &y).unwrap();
        assert!(close(a, b, 1e-14));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            eval_kernel(&KernelConfig::sobolev1(1.0), &[1.2], &[0.5]),
            Err(Error::OutsideUnitInterval { .. })
        ));
        assert!(matches!(
            eval_kernel(&KernelConfig::polynomial(2, 1.0), &[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Kernel::new(KernelConfig::polynomial(0, 1.0)).is_err());
        assert!(Kernel::new(KernelConfig::sobolev1(-1.0)).is_err());
        assert!(Kernel::new(KernelConfig::Additive { summands: vec![] }).is_err());
        let dup = KernelConfig::Additive {
            summands: vec![
                AdditiveTerm { coord: 0, kernel: KernelConfig::sobolev1(1.0) },
                AdditiveTerm { coord: 0, kernel: KernelConfig::sobolev1(0.0) },
            ],
        };
        assert!(Kernel::new(dup).is_err());
        let sigma_not_pd = KernelConfig::Gaussian {
            lengthscales: None,
            sigma: Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
            shift: 0.0,
        };
        assert!(Kernel::new(sigma_not_pd).is_err());
    }

    #[test]
    fn gram_examples() {
        let k = gram_matrix(&KernelConfig::sobolev1(0.0), &[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(k.matrix().to_rows(), vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
        let k = gram_matrix(&KernelConfig::polynomial(1, 1.0), &[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(k.matrix().to_rows(), vec![vec![2.0, 3.0], vec![3.0, 5.0]]);
        let k = gram_matrix(&KernelConfig::sobolev2(0.5), &[vec![0.4]]).unwrap();
        assert_eq!(k.len(), 1);
        assert_eq!(k.matrix()[(0, 0)], eval_kernel(&KernelConfig::sobolev2(0.5), &[0.4], &[0.4]).unwrap());
        assert!(gram_matrix(&KernelConfig::polynomial(1, 1.0), &[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert!(close(kappa_matrix(&Matrix::identity(2)).unwrap(), 0.5, 1e-14));
        let ones = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        // limit form at a small δ
        let delta = 1e-9;
        let limit = 1.0 / (2.0 / (2.0 + delta));
        assert!(close(kappa_matrix(&ones).unwrap(), limit, 1e-8));
        assert_eq!(kappa_matrix(&Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]])).unwrap(), 0.0);
        assert!(matches!(
            kappa_matrix(&Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]])),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            kappa_matrix(&Matrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]])),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn constant_norms() {
        assert_eq!(constant_norm_squared(&KernelConfig::gaussian(vec![1.0], 1.0)).unwrap(), 1.0);
        assert_eq!(constant_norm_squared(&KernelConfig::polynomial(3, 2.0)).unwrap(), 0.125);
        assert_eq!(constant_norm_squared(&KernelConfig::sobolev1(0.0)), Err(Error::NotInSpace));
        assert_eq!(constant_norm_squared(&KernelConfig::sobolev2(4.0)).unwrap(), 0.25);
        assert_eq!(constant_norm_squared(&KernelConfig::additive_sobolev1(10, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn feature_map_examples() {
        let phi = feature_map(&KernelConfig::polynomial(1, 1.0), &[3.0]).unwrap();
        assert_eq!(phi, vec![3.0, 1.0]);
        let phi = feature_map(&KernelConfig::polynomial(2, 1.0), &[2.0]).unwrap();
        assert!(close(dot(&phi, &phi), 25.0, 1e-15));
        assert_eq!(feature_map(&KernelConfig::polynomial(2, 0.0), &[2.0]), Err(Error::NotInSpace));
        assert!(matches!(
            PolynomialFeatures::new(&KernelConfig::polynomial(10, 1.0), 30, 1000),
            Err(Error::FeatureCountOverflow { .. })
        ));
        assert!(feature_map(&KernelConfig::sobolev1(1.0), &[0.2]).is_err());
    }

    #[test]
    fn monomial_order_is_graded_lex() {
        let e = monomial_exponents(2, 2);
        assert_eq!(e, vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(polynomial_feature_count(2, 2), Some(6));
        assert_eq!(monomial_exponents(3, 3).len() + 1, polynomial_feature_count(3, 3).unwrap());
    }

    #[test]
    fn additive_is_sum_of_summands() {
        let cfg = KernelConfig::additive_sobolev1(3, 1.0);
        let x = [0.2, 0.9, 0.4];
        let y = [0.5, 0.3, 0.4];
        let v = eval_kernel(&cfg, &x, &y).unwrap();
        assert!(close(v, 1.0 + 0.2 + 0.3 + 0.4, 1e-15));
        assert!(eval_kernel(&cfg, &[0.1, 0.2], &[0.1, 0.2]).is_err());
    }
}
