//! Censored survival samples on the unit time horizon.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{CounterRng, STREAM_SPLIT};

/// One individual: covariates, observed time and censoring indicator.
///
/// `censored == true` means the censoring time came first (the event was not
/// observed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub covariates: Vec<f64>,
    pub time: f64,
    pub censored: bool,
}

impl SurvivalRecord {
    pub fn new(covariates: Vec<f64>, time: f64, censored: bool) -> Self {
        Self {
            covariates,
            time,
            censored,
        }
    }

    /// At-risk indicator `1{T ≥ t}`.
    pub fn at_risk(&self, t: f64) -> bool {
        self.time >= t
    }

    /// Counting process `1{T ≤ t, event observed}`.
    pub fn counting(&self, t: f64) -> bool {
        !self.censored && self.time <= t
    }
}

/// Immutable sample with times normalized into `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    covariates: Vec<Vec<f64>>,
    times: Vec<f64>,
    censored: Vec<bool>,
    time_scale: f64,
    event_order: Vec<usize>,
}

impl SurvivalDataset {
    /// Builds a dataset from records whose times already lie in `(0, 1]`.
    pub fn new(records: Vec<SurvivalRecord>, time_scale: f64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(time_scale.is_finite() && time_scale > 0.0) {
            return Err(Error::NonFinite("time scale"));
        }
        let d = records[0].covariates.len();
        let mut covariates = Vec::with_capacity(records.len());
        let mut times = Vec::with_capacity(records.len());
        let mut censored = Vec::with_capacity(records.len());
        for (index, r) in records.into_iter().enumerate() {
            if r.covariates.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.covariates.len(),
                });
            }
            if r.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("covariates"));
            }
            if !r.time.is_finite() {
                return Err(Error::NonFinite("times"));
            }
            if !(r.time > 0.0 && r.time <= 1.0) {
                return Err(Error::NonPositiveTime {
                    index,
                    time: r.time,
                });
            }
            covariates.push(r.covariates);
            times.push(r.time);
            censored.push(r.censored);
        }
        let mut event_order: Vec<usize> = (0..times.len()).collect();
        event_order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
        Ok(Self {
            covariates,
            times,
            censored,
            time_scale,
            event_order,
        })
    }

    /// Divides raw positive times by their maximum; `time_scale` records the
    /// divisor.
    pub fn from_raw_times(records: Vec<SurvivalRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (index, r) in records.iter().enumerate() {
            if !r.time.is_finite() {
                return Err(Error::NonFinite("times"));
            }
            if r.time <= 0.0 {
                return Err(Error::NonPositiveTime {
                    index,
                    time: r.time,
                });
            }
        }
        let scale = records.iter().fold(0.0f64, |m, r| m.max(r.time));
        let records = records
            .into_iter()
            .map(|mut r| {
                r.time = if scale == 1.0 { r.time } else { r.time / scale };
                r
            })
            .collect();
        Self::new(records, scale)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates[0].len()
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn censored(&self) -> &[bool] {
        &self.censored
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    /// Record indices sorted by time, ties by original position.
    pub fn event_order(&self) -> &[usize] {
        &self.event_order
    }

    pub fn event_count(&self) -> usize {
        self.censored.iter().filter(|c| !**c).count()
    }

    pub fn record(&self, i: usize) -> SurvivalRecord {
        SurvivalRecord::new(self.covariates[i].clone(), self.times[i], self.censored[i])
    }

    pub fn records(&self) -> impl Iterator<Item = SurvivalRecord> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    /// Sub-sample in the given order, keeping the parent time scale.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.record(i)).collect(), self.time_scale)
    }
}

/// Shuffles deterministically by `seed` and cuts into training and validation
/// halves; the training half receives the extra record when the size is odd.
pub fn split_train_validation(
    data: &SurvivalDataset,
    seed: u64,
) -> Result<(SurvivalDataset, SurvivalDataset)> {
    let n = data.len();
    if n < 2 {
        return Err(Error::TooFewRecords { needed: 2, found: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    CounterRng::new(seed, STREAM_SPLIT, 0).shuffle(&mut idx);
    let cut = n.div_ceil(2);
    Ok((data.subset(&idx[..cut])?, data.subset(&idx[cut..])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn raw(times: &[f64], observed: &[bool]) -> Vec<SurvivalRecord> {
        times
            .iter()
            .zip(observed)
            .enumerate()
            .map(|(i, (&t, &o))| SurvivalRecord::new(vec![i as f64], t, !o))
            .collect()
    }

    #[test]
    fn normalizes_by_max_time() {
        let d = SurvivalDataset::from_raw_times(raw(&[2.0, 4.0, 8.0], &[true, false, true])).unwrap();
        assert_eq!(d.times(), &[0.25, 0.5, 1.0]);
        assert_eq!(d.censored(), &[false, true, false]);
        assert_eq!(d.time_scale(), 8.0);
    }

    #[test]
    fn unit_scale_is_exact() {
        let t = [0.1, 0.3333333333333333, 1.0];
        let d = SurvivalDataset::from_raw_times(raw(&t, &[true; 3])).unwrap();
        assert_eq!(d.times(), &t);
        assert_eq!(d.time_scale(), 1.0);
    }

    #[test]
    fn rejects_bad_times() {
        assert!(matches!(
            SurvivalDataset::from_raw_times(raw(&[1.0, 0.0], &[true, true])),
            Err(Error::NonPositiveTime { index: 1, .. })
        ));
        assert!(SurvivalDataset::new(raw(&[1.5], &[true]), 1.0).is_err());
        assert_eq!(SurvivalDataset::new(vec![], 1.0), Err(Error::EmptyDataset));
    }

    #[test]
    fn event_order_breaks_ties_by_index() {
        let d = SurvivalDataset::new(raw(&[0.5, 0.2, 0.5, 0.1], &[true; 4]), 1.0).unwrap();
        assert_eq!(d.event_order(), &[3, 1, 0, 2]);
    }

    #[test]
    fn split_partitions_deterministically() {
        let d = SurvivalDataset::new(raw(&[0.1, 0.2, 0.3, 0.4], &[true; 4]), 2.0).unwrap();
        let (a, b) = split_train_validation(&d, 11).unwrap();
        assert_eq!((a.len(), b.len()), (2, 2));
        let mut all: Vec<f64> = a.times().iter().chain(b.times()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(a.time_scale(), 2.0);
        let (a2, b2) = split_train_validation(&d, 11).unwrap();
        assert_eq!((a, b), (a2, b2));

        let d5 = SurvivalDataset::new(raw(&[0.1, 0.2, 0.3, 0.4, 0.5], &[true; 5]), 1.0).unwrap();
        let (a, b) = split_train_validation(&d5, 3).unwrap();
        assert_eq!((a.len(), b.len()), (3, 2));
        let one = SurvivalDataset::new(raw(&[0.1], &[true]), 1.0).unwrap();
        assert!(matches!(split_train_validation(&one, 0), Err(Error::TooFewRecords { .. })));
    }

    #[test]
    fn record_processes() {
        let r = SurvivalRecord::new(vec![], 0.4, false);
        assert!(r.at_risk(0.4) && !r.at_risk(0.5));
        assert!(r.counting(0.4) && !r.counting(0.3));
        assert!(!SurvivalRecord::new(vec![], 0.4, true).counting(1.0));
    }
}
