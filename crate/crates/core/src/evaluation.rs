//! Breslow survival curves, concordance and Monte Carlo `L₂` error.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{CounterRng, STREAM_MONTE_CARLO};
use crate::simulation::DgpConfig;
use crate::survival_data::SurvivalDataset;

/// Right-continuous step function equal to 1 before the first jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvival {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl StepSurvival {
    /// Jump times must increase strictly; values must be nonincreasing in
    /// `[0, 1]`.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                found: values.len(),
            });
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("survival curve"));
        }
        let increasing = times.windows(2).all(|w| w[0] < w[1]);
        let monotone = values.windows(2).all(|w| w[1] <= w[0]);
        if !increasing || !monotone || values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidOptions("not a survival step function".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        // number of jumps at or before t
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

/// `P̂(t) = exp(-Σ_{event times s ≤ t} 1/R(s))` with `R(s) = #{j : T_j ≥ s}`.
/// Tied events each contribute `1/R(s)` with the same risk-set size.
pub fn breslow_survival(data: &SurvivalDataset) -> StepSurvival {
    let order = data.event_order();
    let times = data.times();
    let n = order.len();
    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut cumulative = 0.0;
    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let mut end = start;
        let mut events = 0usize;
        while end < n && times[order[end]] == t {
            if !data.censored()[order[end]] {
                events += 1;
            }
            end += 1;
        }
        if events > 0 {
            cumulative += events as f64 / (n - start) as f64;
            jump_times.push(t);
            values.push(libm::exp(-cumulative));
        }
        start = end;
    }
    StepSurvival {
        times: jump_times,
        values,
    }
}

fn check_lengths(predictions: &[f64], data: &SurvivalDataset) -> Result<()> {
    if predictions.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            found: predictions.len(),
        });
    }
    if predictions.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("predictions"));
    }
    Ok(())
}

/// `Σ 1{f_i < f_j} 1{T_i > T_j} (1 - I_j) / Σ 1{T_i > T_j} (1 - I_j)`.
///
/// Pairs tied in prediction earn no credit. Runs in `O(n log n)`.
pub fn concordance_index(predictions: &[f64], data: &SurvivalDataset) -> Result<f64> {
    check_lengths(predictions, data)?;
    let n = data.len();
    let times = data.times();
    let censored = data.censored();

    // prediction ranks, ties sharing a rank
    let mut by_pred: Vec<usize> = (0..n).collect();
    by_pred.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
    let mut rank = vec![0usize; n];
    let mut r = 0;
    for k in 0..n {
        if k > 0 && predictions[by_pred[k]] != predictions[by_pred[k - 1]] {
            r += 1;
        }
        rank[by_pred[k]] = r;
    }
    let ranks = r + 1;

    // Sweep in decreasing time; the tree holds ranks of records with strictly
    // larger time than the current tie group.
    let order = data.event_order();
    let mut tree = Fenwick::new(ranks);
    let mut inserted = 0u64;
    let mut numerator = 0u64;
    let mut denominator = 0u64;
    let mut end = n;
    while end > 0 {
        let t = times[order[end - 1]];
        let mut start = end;
        while start > 0 && times[order[start - 1]] == t {
            start -= 1;
        }
        for &j in &order[start..end] {
            if !censored[j] {
                denominator += inserted;
                numerator += tree.prefix(rank[j]);
            }
        }
        for &j in &order[start..end] {
            tree.add(rank[j]);
            inserted += 1;
        }
        end = start;
    }
    if denominator == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Direct double sum over ordered pairs; `O(n²)`.
pub fn concordance_index_reference(predictions: &[f64], data: &SurvivalDataset) -> Result<f64> {
    check_lengths(predictions, data)?;
    let t = data.times();
    let c = data.censored();
    let mut numerator = 0u64;
    let mut denominator = 0u64;
    for i in 0..t.len() {
        for j in 0..t.len() {
            if t[i] > t[j] && !c[j] {
                denominator += 1;
                if predictions[i] < predictions[j] {
                    numerator += 1;
                }
            }
        }
    }
    if denominator == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Counts over `0..len`; `prefix(r)` counts entries `< r`.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(len: usize) -> Self {
        Fenwick(vec![0; len + 1])
    }

    fn add(&mut self, r: usize) {
        let mut i = r + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    fn prefix(&self, r: usize) -> u64 {
        let mut i = r;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Source of covariate draws for Monte Carlo integration.
pub trait CovariateSampler {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut CounterRng) -> Vec<f64>;
}

/// Uniform distribution on `[0,1]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformCube(pub usize);

impl CovariateSampler for UniformCube {
    fn dim(&self) -> usize {
        self.0
    }

    fn sample(&self, rng: &mut CounterRng) -> Vec<f64> {
        (0..self.0).map(|_| rng.uniform()).collect()
    }
}

impl CovariateSampler for DgpConfig {
    fn dim(&self) -> usize {
        DgpConfig::dim(self)
    }

    fn sample(&self, rng: &mut CounterRng) -> Vec<f64> {
        self.sample_covariates(rng)
    }
}

/// Draws the `n_mc` integration points used by [`l2_error_mc`].
pub fn monte_carlo_points(sampler: &impl CovariateSampler, n_mc: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n_mc as u64)
        .map(|i| sampler.sample(&mut CounterRng::new(seed, STREAM_MONTE_CARLO, i)))
        .collect()
}

/// `L₂` distance from precomputed values at shared integration points.
pub fn l2_distance(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = 0.0;
    for (p, t) in predicted.iter().zip(truth) {
        if !(p.is_finite() && t.is_finite()) {
            return Err(Error::NonFinite("function values"));
        }
        sum += (p - t) * (p - t);
    }
    Ok(libm::sqrt(sum / predicted.len() as f64))
}

/// `sqrt(mean (predict(x) - truth(x))²)` over `n_mc` draws from `sampler`.
pub fn l2_error_mc<P, T>(
    predict: P,
    truth: T,
    sampler: &impl CovariateSampler,
    n_mc: usize,
    seed: u64,
) -> Result<f64>
where
    P: Fn(&[f64]) -> Result<f64>,
    T: Fn(&[f64]) -> Result<f64>,
{
    if n_mc == 0 {
        return Err(Error::InvalidOptions("n_mc must be positive".into()));
    }
    let points = monte_carlo_points(sampler, n_mc, seed);
    let p = points.iter().map(|x| predict(x)).collect::<Result<Vec<_>>>()?;
    let t = points.iter().map(|x| truth(x)).collect::<Result<Vec<_>>>()?;
    l2_distance(&p, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival_data::SurvivalRecord;

    fn data(times: &[f64], censored: &[bool]) -> SurvivalDataset {
        SurvivalDataset::new(
            times
                .iter()
                .zip(censored)
                .map(|(&t, &c)| SurvivalRecord::new(vec![0.5], t, c))
                .collect(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn breslow_two_events() {
        let d = data(&[0.3, 0.7], &[false, false]);
        let s = breslow_survival(&d);
        assert_eq!(s.eval(0.1), 1.0);
        assert!((s.eval(0.3) - libm::exp(-0.5)).abs() < 1e-15);
        assert!((s.eval(0.5) - libm::exp(-0.5)).abs() < 1e-15);
        assert!((s.eval(0.7) - libm::exp(-1.5)).abs() < 1e-15);
        assert!((s.eval(1.0) - libm::exp(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn breslow_ties_and_censoring() {
        let d = data(&[0.4, 0.4, 0.4, 0.9], &[false, false, true, false]);
        let s = breslow_survival(&d);
        assert_eq!(s.len(), 2);
        assert!((s.eval(0.4) - libm::exp(-0.5)).abs() < 1e-15);
        assert!((s.eval(0.95) - libm::exp(-1.5)).abs() < 1e-15);
        let all = data(&[0.2, 0.5], &[true, true]);
        assert!(breslow_survival(&all).is_empty());
        assert_eq!(breslow_survival(&all).eval(0.9), 1.0);
    }

    #[test]
    fn concordance_examples() {
        let d = data(&[0.2, 0.5, 0.9], &[false, true, false]);
        let p = [3.0, 1.0, 2.0];
        assert_eq!(concordance_index(&p, &d).unwrap(), 1.0);
        assert_eq!(concordance_index_reference(&p, &d).unwrap(), 1.0);
        assert_eq!(concordance_index(&[1.0; 3], &d).unwrap(), 0.0);

        let d = data(&[0.1, 0.3, 0.6, 0.8], &[false; 4]);
        let neg: Vec<f64> = d.times().iter().map(|t| -t).collect();
        assert_eq!(concordance_index(&neg, &d).unwrap(), 1.0);

        let d = data(&[0.1, 0.3], &[true, true]);
        assert_eq!(concordance_index(&[0.0, 1.0], &d).unwrap_err(), Error::NoComparablePairs);
        assert!(concordance_index(&[0.0], &d).is_err());
    }

    #[test]
    fn concordance_fast_matches_reference_with_ties() {
        let mut rng = CounterRng::new(9, 7, 0);
        for _ in 0..50 {
            let n = 2 + rng.below(30);
            let times: Vec<f64> = (0..n).map(|_| (1 + rng.below(6)) as f64 / 6.0).collect();
            let cens: Vec<bool> = (0..n).map(|_| rng.below(3) == 0).collect();
            let preds: Vec<f64> = (0..n).map(|_| rng.below(4) as f64).collect();
            let d = data(&times, &cens);
            assert_eq!(
                concordance_index(&preds, &d),
                concordance_index_reference(&preds, &d)
            );
        }
    }

    #[test]
    fn l2_examples() {
        let s = UniformCube(1);
        assert_eq!(l2_error_mc(|x| Ok(x[0]), |x| Ok(x[0]), &s, 100, 1).unwrap(), 0.0);
        let e = l2_error_mc(|x| Ok(x[0] + 0.25), |x| Ok(x[0]), &s, 100, 1).unwrap();
        assert!((e - 0.25).abs() < 1e-15);
        assert!(l2_error_mc(|_| Ok(f64::NAN), |_| Ok(0.0), &s, 10, 1).is_err());
        assert!(l2_error_mc(|_| Ok(0.0), |_| Ok(0.0), &s, 0, 1).is_err());
    }
}
