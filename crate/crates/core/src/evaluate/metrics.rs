//! Ranking and thresholded metrics for a single label column.
//!
//! AUROC gives ties half credit (Mann-Whitney). AUPRC ranks by descending
//! score with ties kept in input order.

use std::cmp::Ordering;

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

fn count_positives(y: &[u8]) -> usize {
    y.iter().filter(|&&v| v == 1).count()
}

fn check_len(scores: &[f64], y: &[u8]) -> Result<()> {
    if scores.len() != y.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), y.len())));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative.
///
/// Computed from midranks in O(n log n).
pub fn auroc(scores: &[f64], y: &[u8]) -> Result<f64> {
    check_len(scores, y)?;
    let pos = count_positives(y);
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels(format!(
            "auroc needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // twice the rank sum keeps midranks integral
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, midrank (i + j + 2) / 2
        let mid2 = (i + j + 2) as u64;
        let tied_pos = order[i..=j].iter().filter(|&&k| y[k] == 1).count() as u64;
        rank_sum2 += mid2 * tied_pos;
        i = j + 1;
    }
    let (p, n) = (pos as u64, neg as u64);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// Step-wise average precision: mean over positives of the precision at
/// each positive's rank.
pub fn auprc(scores: &[f64], y: &[u8]) -> Result<f64> {
    check_len(scores, y)?;
    let pos = count_positives(y);
    if pos == 0 {
        return Err(Error::DegenerateLabels("auprc needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| desc(scores[a], scores[b]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if y[k] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Confusion counts for `score >= threshold` as the positive prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn from_scores(scores: &[f64], y: &[u8], threshold: f64) -> Result<Self> {
        check_len(scores, y)?;
        let mut c = Confusion::default();
        for (&s, &t) in scores.iter().zip(y) {
            c.add(s >= threshold, t == 1);
        }
        Ok(c)
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// 0 when precision and recall are both 0.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

pub fn accuracy(scores: &[f64], y: &[u8], threshold: f64) -> Result<f64> {
    Ok(Confusion::from_scores(scores, y, threshold)?.accuracy())
}

pub fn precision(scores: &[f64], y: &[u8], threshold: f64) -> Result<f64> {
    Ok(Confusion::from_scores(scores, y, threshold)?.precision())
}

pub fn recall(scores: &[f64], y: &[u8], threshold: f64) -> Result<f64> {
    Ok(Confusion::from_scores(scores, y, threshold)?.recall())
}

pub fn f1(scores: &[f64], y: &[u8], threshold: f64) -> Result<f64> {
    Ok(Confusion::from_scores(scores, y, threshold)?.f1())
}

/// Index of the first maximum.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise(scores: &[f64], y: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 4], &[0, 1, 1, 0]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.4, 0.8, 0.2, 0.3], &[0, 1, 1, 0]).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn auprc_examples() {
        assert_eq!(auprc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(auprc(&[0.9, 0.1], &[0, 1]).unwrap(), 0.5);
        assert_eq!(auprc(&[0.2, 0.7, 0.1], &[1, 1, 1]).unwrap(), 1.0);
        assert!(matches!(auprc(&[0.1], &[0]), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn auprc_ties_keep_input_order() {
        // tied pair: the negative comes first, so the positive is at rank 2
        assert_eq!(auprc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert_eq!(auprc(&[0.5, 0.5], &[1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn thresholded_examples() {
        let c = Confusion::from_scores(&[0.9, 0.1, 0.9, 0.1], &[1, 1, 0, 0], 0.5).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 1));
        assert_eq!([c.accuracy(), c.precision(), c.recall(), c.f1()], [0.5; 4]);
        let perfect = Confusion::from_scores(&[1.0, 0.0, 1.0], &[1, 0, 1], 0.5).unwrap();
        assert_eq!(
            [perfect.accuracy(), perfect.precision(), perfect.recall(), perfect.f1()],
            [1.0; 4]
        );
        let none = Confusion::from_scores(&[0.1, 0.2], &[1, 0], 0.5).unwrap();
        assert_eq!(none.precision(), 0.0);
        assert_eq!(none.f1(), 0.0);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..6, n).prop_map(|v| v.into_iter().map(|k| k as f64 / 5.0).collect()),
                prop::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn auroc_matches_pairwise((scores, y) in instance()) {
            let pos = y.iter().filter(|&&v| v == 1).count();
            prop_assume!(pos > 0 && pos < y.len());
            prop_assert!((auroc(&scores, &y).unwrap() - pairwise(&scores, &y)).abs() <= 1e-12);
        }

        #[test]
        fn auroc_monotone_invariant((scores, y) in instance(), a in 0.1f64..3.0, b in -1.0f64..1.0) {
            let pos = y.iter().filter(|&&v| v == 1).count();
            prop_assume!(pos > 0 && pos < y.len());
            let t: Vec<f64> = scores.iter().map(|s| a * s * s * s + b).collect();
            prop_assert_eq!(auroc(&scores, &y).unwrap(), auroc(&t, &y).unwrap());
        }
    }
}
