use serde::{Deserialize, Serialize};

use super::patients::Visit;
use super::vocab::Vocabulary;

/// Multi-hot visit encodings, `max_visits × vocab_size`, row-major.
///
/// Real visits fill a prefix of rows and `mask`; padding rows are all zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeTensor {
    max_visits: usize,
    vocab_size: usize,
    features: Vec<u8>,
    mask: Vec<u8>,
}

impl EpisodeTensor {
    /// Builds a tensor from rows of 0/1 values; `None` if shapes or values
    /// are inconsistent or the mask is not a prefix of ones with zero padding.
    pub fn from_rows(rows: &[Vec<u8>], mask: &[u8]) -> Option<Self> {
        let max_visits = rows.len();
        let vocab_size = rows.first()?.len();
        if max_visits == 0 || vocab_size == 0 || mask.len() != max_visits {
            return None;
        }
        if rows.iter().any(|r| r.len() != vocab_size) {
            return None;
        }
        if rows.iter().flatten().chain(mask).any(|&b| b > 1) {
            return None;
        }
        let len = mask.iter().take_while(|&&m| m == 1).count();
        if mask[len..].iter().any(|&m| m != 0) || rows[len..].iter().flatten().any(|&b| b != 0) {
            return None;
        }
        Some(Self {
            max_visits,
            vocab_size,
            features: rows.concat(),
            mask: mask.to_vec(),
        })
    }

    pub fn max_visits(&self) -> usize {
        self.max_visits
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Number of real (unmasked) visits.
    pub fn len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub fn row(&self, t: usize) -> &[u8] {
        &self.features[t * self.vocab_size..(t + 1) * self.vocab_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.features.chunks(self.vocab_size)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.rows().map(<[u8]>::to_vec).collect()
    }
}

/// Encodes the most recent `max_visits` visits as multi-hot rows over
/// `vocab` (unknown codes hit `<UNK>`), zero-padding at the tail.
pub fn tensorize(visits: &[Visit], vocab: &Vocabulary, max_visits: usize) -> EpisodeTensor {
    assert!(max_visits >= 1, "tensorize: max_visits must be at least 1");
    let v = vocab.len();
    let kept = &visits[visits.len().saturating_sub(max_visits)..];
    let mut features = vec![0u8; max_visits * v];
    let mut mask = vec![0u8; max_visits];
    for (t, visit) in kept.iter().enumerate() {
        mask[t] = 1;
        let row = &mut features[t * v..(t + 1) * v];
        for code in visit.codes() {
            row[vocab.index_of(code)] = 1;
        }
    }
    EpisodeTensor {
        max_visits,
        vocab_size: v,
        features,
        mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::events::RawEvent;
    use chrono::{Duration, TimeZone, Utc};
    use proptest::prelude::*;

    pub(crate) fn visits(spec: &[&[&str]]) -> Vec<Visit> {
        let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        spec.iter()
            .enumerate()
            .map(|(i, codes)| {
                let start = t0 + Duration::days(i as i64 * 10);
                Visit {
                    start,
                    events: codes
                        .iter()
                        .map(|c| RawEvent {
                            patient_id: "p".into(),
                            timestamp: start,
                            event_type: "dx".into(),
                            code: c.to_string(),
                            value: None,
                        })
                        .collect(),
                }
            })
            .collect()
    }

    fn vocab_ab() -> Vocabulary {
        Vocabulary::from_codes(["A", "B"]).unwrap()
    }

    #[test]
    fn direct_encoding() {
        let x = tensorize(&visits(&[&["A"], &["A", "B"]]), &vocab_ab(), 2);
        assert_eq!(x.to_rows(), vec![vec![1, 0, 0], vec![1, 1, 0]]);
        assert_eq!(x.mask(), [1, 1]);
    }

    #[test]
    fn tail_padding() {
        let x = tensorize(&visits(&[&["A"], &["A", "B"]]), &vocab_ab(), 3);
        assert_eq!(x.row(2), [0, 0, 0]);
        assert_eq!(x.mask(), [1, 1, 0]);
        assert_eq!(x.len(), 2);
    }

    #[test]
    fn truncates_oldest() {
        let x = tensorize(&visits(&[&["A"], &["B"], &["A"]]), &vocab_ab(), 2);
        assert_eq!(x.to_rows(), vec![vec![0, 1, 0], vec![1, 0, 0]]);
    }

    #[test]
    fn unknown_code_hits_unk() {
        let x = tensorize(&visits(&[&["Q"]]), &vocab_ab(), 1);
        assert_eq!(x.row(0), [0, 0, 1]);
    }

    #[test]
    fn from_rows_rejects_interior_zero_mask() {
        assert!(EpisodeTensor::from_rows(&[vec![1], vec![0]], &[0, 1]).is_none());
        assert!(EpisodeTensor::from_rows(&[vec![1], vec![1]], &[1, 0]).is_none());
        assert!(EpisodeTensor::from_rows(&[vec![1], vec![0]], &[1, 0]).is_some());
    }

    proptest! {
        #[test]
        fn mask_is_prefix_and_padding_zero(n_visits in 1usize..12, t in 1usize..10, seed in 0u64..1000) {
            let mut rng = crate::SplitMix64::new(seed);
            let codes = ["A", "B", "C"];
            let spec: Vec<Vec<&str>> = (0..n_visits)
                .map(|_| (0..=rng.below(3)).map(|_| codes[rng.below(3) as usize]).collect())
                .collect();
            let refs: Vec<&[&str]> = spec.iter().map(|v| v.as_slice()).collect();
            let x = tensorize(&visits(&refs), &vocab_ab(), t);
            let ones = n_visits.min(t);
            prop_assert_eq!(x.len(), ones);
            prop_assert!(x.mask()[..ones].iter().all(|&m| m == 1));
            prop_assert!(x.mask()[ones..].iter().all(|&m| m == 0));
            for r in ones..t {
                prop_assert!(x.row(r).iter().all(|&b| b == 0));
            }
            prop_assert!(EpisodeTensor::from_rows(&x.to_rows(), x.mask()).is_some());
        }
    }
}
