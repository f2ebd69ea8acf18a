use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};

use super::events::RawEvent;
use crate::common::ValidationError;

#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub start: DateTime<Utc>,
    pub events: Vec<RawEvent>,
}

impl Visit {
    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.code.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    /// Strictly increasing by `start`.
    pub visits: Vec<Visit>,
    pub deceased_at: Option<DateTime<Utc>>,
}

impl PatientRecord {
    pub fn last_visit_start(&self) -> Option<DateTime<Utc>> {
        self.visits.last().map(|v| v.start)
    }
}

/// Groups events into per-patient visit sequences.
///
/// Events are sorted per patient by timestamp (stable, so ties keep input
/// order); consecutive events at most `visit_gap` apart share a visit. A
/// `death` event sets `deceased_at` (earliest one wins) and never enters a
/// visit. Patients come out in ascending `patient_id` order. A death that
/// precedes the start of the patient's last visit is a `SchemaViolation`.
pub fn build_patients(events: &[RawEvent], visit_gap: Duration) -> Result<Vec<PatientRecord>, ValidationError> {
    if events.is_empty() {
        return Err(ValidationError::empty("events", "no events to group into patients"));
    }
    let mut by_patient: BTreeMap<&str, Vec<&RawEvent>> = BTreeMap::new();
    for e in events {
        by_patient.entry(e.patient_id.as_str()).or_default().push(e);
    }

    let mut patients = Vec::with_capacity(by_patient.len());
    for (patient_id, mut evs) in by_patient {
        evs.sort_by_key(|e| e.timestamp);
        let mut deceased_at: Option<DateTime<Utc>> = None;
        let mut visits: Vec<Visit> = Vec::new();
        let mut last_ts: Option<DateTime<Utc>> = None;
        for e in evs {
            if e.is_death() {
                deceased_at = Some(deceased_at.map_or(e.timestamp, |d| d.min(e.timestamp)));
                continue;
            }
            match (visits.last_mut(), last_ts) {
                (Some(v), Some(prev)) if e.timestamp - prev <= visit_gap => v.events.push(e.clone()),
                _ => visits.push(Visit {
                    start: e.timestamp,
                    events: vec![e.clone()],
                }),
            }
            last_ts = Some(e.timestamp);
        }
        if let (Some(d), Some(last)) = (deceased_at, visits.last().map(|v| v.start)) {
            if d < last {
                return Err(ValidationError::schema(
                    "deceased_at",
                    format!("patient {patient_id} has a death event at {d} before its last visit at {last}"),
                    patient_id,
                ));
            }
        }
        patients.push(PatientRecord {
            patient_id: patient_id.to_string(),
            visits,
            deceased_at,
        });
    }
    Ok(patients)
}
