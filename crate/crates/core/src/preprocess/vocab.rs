use std::collections::{BTreeMap, HashMap};

use super::patients::PatientRecord;
use crate::common::ValidationError;

pub const UNK: &str = "<UNK>";

/// Dense code index. Known codes occupy `0..V-1`; `<UNK>` is always `V-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    codes: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from known codes in index order; `<UNK>` is appended.
    pub fn from_codes<I, S>(codes: I) -> Result<Self, ValidationError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list: Vec<String> = Vec::new();
        let mut index = HashMap::new();
        for code in codes {
            let code = code.into();
            if code == UNK {
                return Err(ValidationError::schema(
                    "vocab",
                    "reserved code <UNK> listed as a known code",
                    code,
                ));
            }
            if index.insert(code.clone(), list.len()).is_some() {
                return Err(ValidationError::schema(
                    "vocab",
                    format!("duplicate code {code:?}"),
                    code,
                ));
            }
            list.push(code);
        }
        index.insert(UNK.to_string(), list.len());
        list.push(UNK.to_string());
        Ok(Self { codes: list, index })
    }

    /// V, including `<UNK>`.
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn unk_index(&self) -> usize {
        self.codes.len() - 1
    }

    /// Index of `code`, or the `<UNK>` index for unseen codes.
    pub fn index_of(&self, code: &str) -> usize {
        self.index.get(code).copied().unwrap_or(self.unk_index())
    }

    pub fn get(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    /// Codes in ascending index order, `<UNK>` last.
    pub fn codes(&self) -> &[String] {
        &self.codes
    }
}

/// Assigns indices to codes seen at least `min_count` times, most frequent
/// first with lexicographic tie-break; everything else maps to `<UNK>`.
pub fn build_vocabulary(patients: &[PatientRecord], min_count: usize) -> Result<Vocabulary, ValidationError> {
    if patients.is_empty() {
        return Err(ValidationError::empty(
            "patients",
            "cannot build a vocabulary from zero patients",
        ));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in patients.iter().flat_map(|p| &p.visits) {
        for code in v.codes() {
            *counts.entry(code).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(code, n)| n >= min_count && code != UNK)
        .collect();
    if kept.is_empty() {
        return Err(ValidationError::empty(
            "min_count",
            format!("no event code occurs at least {min_count} time(s); only <UNK> would remain"),
        ));
    }
    // BTreeMap iteration is lexicographic; a stable sort keeps it for ties
    kept.sort_by_key(|k| std::cmp::Reverse(k.1));
    Vocabulary::from_codes(kept.into_iter().map(|(c, _)| c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::events::RawEvent;
    use crate::preprocess::patients::Visit;
    use chrono::{TimeZone, Utc};

    fn patient(codes: &[&str]) -> PatientRecord {
        let t = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        PatientRecord {
            patient_id: "p".into(),
            visits: vec![Visit {
                start: t,
                events: codes
                    .iter()
                    .map(|c| RawEvent {
                        patient_id: "p".into(),
                        timestamp: t,
                        event_type: "dx".into(),
                        code: c.to_string(),
                        value: None,
                    })
                    .collect(),
            }],
            deceased_at: None,
        }
    }

    #[test]
    fn frequency_order() {
        let v = build_vocabulary(&[patient(&["B", "A", "A", "A"])], 1).unwrap();
        assert_eq!(v.codes(), ["A", "B", UNK]);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn threshold_drops_rare_codes() {
        let v = build_vocabulary(&[patient(&["A", "A", "A", "B"])], 2).unwrap();
        assert_eq!(v.codes(), ["A", UNK]);
        assert_eq!(v.index_of("B"), 1);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn lexicographic_tie_break() {
        let v = build_vocabulary(&[patient(&["B", "A", "B", "A"])], 1).unwrap();
        assert_eq!(v.codes(), ["A", "B", UNK]);
    }

    #[test]
    fn nothing_survives() {
        let err = build_vocabulary(&[patient(&["A"])], 5).unwrap_err();
        assert_eq!(err.code, crate::ErrorCode::EmptyInput);
        assert!(build_vocabulary(&[], 1).is_err());
    }

    #[test]
    fn bijection() {
        let v = build_vocabulary(&[patient(&["x", "y", "z", "y"])], 1).unwrap();
        for (i, c) in v.codes().iter().enumerate() {
            assert_eq!(v.index_of(c), i);
        }
        assert_eq!(v.index_of("never-seen"), v.unk_index());
    }
}
