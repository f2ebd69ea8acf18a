use std::collections::HashSet;

use chrono::Duration;

use super::patients::PatientRecord;
use super::tensorize::{tensorize, EpisodeTensor};
use super::vocab::Vocabulary;
use crate::common::{TaskKind, ValidationError};

/// Task names accepted by the dataset generator.
pub const TASK_NAMES: [&str; 2] = ["mortality", "phenotyping"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub patient_id: String,
    pub x: EpisodeTensor,
    /// 0/1 entries: length 1 for binary, C for multilabel / one-hot multiclass.
    pub y: Vec<u8>,
}

/// A labeling rule applied to each patient.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    /// Death within `horizon` of the last visit start (inclusive).
    Mortality { horizon: Duration },
    /// One label per code set: does the final visit contain any of its codes.
    Phenotyping { phenotypes: Vec<Vec<String>> },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Mortality { .. } => "mortality",
            TaskSpec::Phenotyping { .. } => "phenotyping",
        }
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::Mortality { .. } => TaskKind::BinaryClassification,
            TaskSpec::Phenotyping { .. } => TaskKind::MultiLabel,
        }
    }

    pub fn label_dim(&self) -> usize {
        match self {
            TaskSpec::Mortality { .. } => 1,
            TaskSpec::Phenotyping { phenotypes } => phenotypes.len(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        match self {
            TaskSpec::Mortality { horizon } => {
                if *horizon <= Duration::zero() {
                    return Err(ValidationError::range("horizon", "must be positive", horizon));
                }
            }
            TaskSpec::Phenotyping { phenotypes } => {
                if phenotypes.len() < 2 {
                    return Err(ValidationError::range(
                        "phenotypes",
                        format!("need at least 2 phenotype code sets, got {}", phenotypes.len()),
                        phenotypes.len(),
                    ));
                }
                if let Some(i) = phenotypes.iter().position(Vec::is_empty) {
                    return Err(ValidationError::empty("phenotypes", format!("code set {i} is empty")));
                }
            }
        }
        Ok(())
    }

    /// Labels one patient, or `None` when the rule skips it.
    pub fn label(&self, patient: &PatientRecord, vocab: &Vocabulary, max_visits: usize) -> Option<LabeledExample> {
        match self {
            TaskSpec::Mortality { horizon } => mortality_example(patient, vocab, max_visits, *horizon),
            TaskSpec::Phenotyping { phenotypes } => phenotype_example(patient, vocab, max_visits, phenotypes),
        }
    }
}

/// Patients with no visits (e.g. only a death record) are skipped.
pub fn mortality_example(
    patient: &PatientRecord,
    vocab: &Vocabulary,
    max_visits: usize,
    horizon: Duration,
) -> Option<LabeledExample> {
    let last = patient.last_visit_start()?;
    let died = patient.deceased_at.is_some_and(|d| d - last <= horizon);
    Some(LabeledExample {
        patient_id: patient.patient_id.clone(),
        x: tensorize(&patient.visits, vocab, max_visits),
        y: vec![u8::from(died)],
    })
}

/// Labels come from the final visit and features from the visits before it,
/// so patients with fewer than two visits are skipped.
pub fn phenotype_example(
    patient: &PatientRecord,
    vocab: &Vocabulary,
    max_visits: usize,
    phenotypes: &[Vec<String>],
) -> Option<LabeledExample> {
    let (last, history) = patient.visits.split_last()?;
    if history.is_empty() {
        return None;
    }
    let final_codes: HashSet<&str> = last.codes().collect();
    let y = phenotypes
        .iter()
        .map(|set| u8::from(set.iter().any(|c| final_codes.contains(c.as_str()))))
        .collect();
    Some(LabeledExample {
        patient_id: patient.patient_id.clone(),
        x: tensorize(history, vocab, max_visits),
        y,
    })
}

fn check_max_visits(max_visits: usize) -> Result<(), ValidationError> {
    if max_visits < 1 {
        return Err(ValidationError::range("max_visits", "must be at least 1", max_visits));
    }
    Ok(())
}

pub fn make_mortality_task(
    patients: &[PatientRecord],
    vocab: &Vocabulary,
    max_visits: usize,
    horizon: Duration,
) -> Result<Vec<LabeledExample>, ValidationError> {
    make_task(patients, vocab, max_visits, &TaskSpec::Mortality { horizon })
}

pub fn make_phenotyping_task(
    patients: &[PatientRecord],
    vocab: &Vocabulary,
    max_visits: usize,
    phenotypes: &[Vec<String>],
) -> Result<Vec<LabeledExample>, ValidationError> {
    make_task(
        patients,
        vocab,
        max_visits,
        &TaskSpec::Phenotyping {
            phenotypes: phenotypes.to_vec(),
        },
    )
}

pub fn make_task(
    patients: &[PatientRecord],
    vocab: &Vocabulary,
    max_visits: usize,
    task: &TaskSpec,
) -> Result<Vec<LabeledExample>, ValidationError> {
    check_max_visits(max_visits)?;
    task.validate()?;
    if patients.is_empty() {
        return Err(ValidationError::empty("patients", "no patients to label"));
    }
    let examples: Vec<_> = patients
        .iter()
        .filter_map(|p| task.label(p, vocab, max_visits))
        .collect();
    if examples.is_empty() {
        return Err(ValidationError::empty(
            "patients",
            format!("every patient was skipped by the {} task", task.name()),
        ));
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::events::RawEvent;
    use crate::preprocess::patients::Visit;
    use chrono::{DateTime, TimeZone, Utc};

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
    }

    fn record(visit_codes: &[&[&str]], deceased_after_last_days: Option<i64>) -> PatientRecord {
        let visits: Vec<Visit> = visit_codes
            .iter()
            .enumerate()
            .map(|(i, codes)| {
                let start = t0() + Duration::days(i as i64 * 5);
                Visit {
                    start,
                    events: codes
                        .iter()
                        .map(|c| RawEvent {
                            patient_id: "p1".into(),
                            timestamp: start,
                            event_type: "dx".into(),
                            code: c.to_string(),
                            value: None,
                        })
                        .collect(),
                }
            })
            .collect();
        let last = visits.last().unwrap().start;
        PatientRecord {
            patient_id: "p1".into(),
            visits,
            deceased_at: deceased_after_last_days.map(|d| last + Duration::days(d)),
        }
    }

    fn vocab() -> Vocabulary {
        Vocabulary::from_codes(["A", "B", "C"]).unwrap()
    }

    #[test]
    fn mortality_within_horizon() {
        let ex = mortality_example(&record(&[&["A"]], Some(2)), &vocab(), 4, Duration::days(30)).unwrap();
        assert_eq!(ex.y, [1]);
    }

    #[test]
    fn mortality_alive() {
        let ex = mortality_example(&record(&[&["A"]], None), &vocab(), 4, Duration::days(30)).unwrap();
        assert_eq!(ex.y, [0]);
    }

    #[test]
    fn mortality_boundary() {
        let h = Duration::days(30);
        assert_eq!(
            mortality_example(&record(&[&["A"]], Some(31)), &vocab(), 4, h)
                .unwrap()
                .y,
            [0]
        );
        assert_eq!(
            mortality_example(&record(&[&["A"]], Some(30)), &vocab(), 4, h)
                .unwrap()
                .y,
            [1]
        );
    }

    fn pheno(sets: &[&[&str]]) -> Vec<Vec<String>> {
        sets.iter().map(|s| s.iter().map(|c| c.to_string()).collect()).collect()
    }

    #[test]
    fn phenotype_from_final_visit() {
        let p = pheno(&[&["B"], &["C"]]);
        let ex = phenotype_example(&record(&[&["A"], &["B"]], None), &vocab(), 2, &p).unwrap();
        assert_eq!(ex.y, [1, 0]);
        assert_eq!(ex.x.to_rows(), vec![vec![1, 0, 0, 0], vec![0, 0, 0, 0]]);
        let ex = phenotype_example(&record(&[&["A"], &["B", "C"]], None), &vocab(), 2, &p).unwrap();
        assert_eq!(ex.y, [1, 1]);
    }

    #[test]
    fn phenotype_skips_single_visit() {
        let p = pheno(&[&["B"], &["C"]]);
        assert!(phenotype_example(&record(&[&["B"]], None), &vocab(), 2, &p).is_none());
        let err = make_phenotyping_task(&[record(&[&["B"]], None)], &vocab(), 2, &p).unwrap_err();
        assert_eq!(err.code, crate::ErrorCode::EmptyInput);
    }

    #[test]
    fn phenotype_features_ignore_final_visit() {
        let p = pheno(&[&["B"], &["C"]]);
        let a = phenotype_example(&record(&[&["A"], &["C"], &["B", "C"]], None), &vocab(), 3, &p).unwrap();
        let b = phenotype_example(&record(&[&["A"], &["C"], &[]], None), &vocab(), 3, &p).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn task_validation() {
        assert!(TaskSpec::Phenotyping {
            phenotypes: pheno(&[&["B"]])
        }
        .validate()
        .is_err());
        assert!(TaskSpec::Phenotyping {
            phenotypes: pheno(&[&["B"], &[]])
        }
        .validate()
        .is_err());
        assert!(TaskSpec::Mortality {
            horizon: Duration::zero()
        }
        .validate()
        .is_err());
        assert!(make_mortality_task(&[], &vocab(), 2, Duration::days(1)).is_err());
        assert!(make_mortality_task(&[record(&[&["A"]], None)], &vocab(), 0, Duration::days(1)).is_err());
    }
}
