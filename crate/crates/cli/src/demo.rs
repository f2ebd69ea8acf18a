//! Synthetic event streams for demos and tests.
//!
//! Each patient has 1-6 visits of background diagnosis, medication and lab
//! events. The clean label is whether the sentinel code appears in the last
//! visit; some negatives carry it in an earlier visit instead. With
//! probability `noise_rate` the label is replaced by a fair coin. Patients
//! labeled 1 die 1-20 days after their last visit (inside the default 30-day
//! horizon); some patients labeled 0 die 60-200 days after it.

use chrono::{DateTime, Duration, TimeZone, Utc};

use healthpipe::preprocess::{DEATH_EVENT, EVENT_HEADER};
use healthpipe::{check_count, check_parameter, Bound, Result, SplitMix64};

pub const SENTINEL_CODE: &str = "D900";

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSpec {
    pub patients: usize,
    pub seed: u64,
    pub noise_rate: f64,
    /// Probability that the clean label is 1.
    pub prevalence: f64,
    /// Probability that a negative patient with 2+ visits has the sentinel
    /// in an earlier visit.
    pub decoy_rate: f64,
}

impl DemoSpec {
    pub fn new(patients: usize, seed: u64) -> Self {
        Self {
            patients,
            seed,
            noise_rate: 0.05,
            prevalence: 0.4,
            decoy_rate: 0.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_count(self.patients, 1, 10_000_000, "patients")?;
        for (name, v) in [
            ("noise_rate", self.noise_rate),
            ("prevalence", self.prevalence),
            ("decoy_rate", self.decoy_rate),
        ] {
            check_parameter(v, 0.0, 1.0, name, Bound::Inclusive, Bound::Inclusive)?;
        }
        Ok(())
    }
}

/// `(event_type, code, value)`
type Event = (&'static str, String, Option<f64>);

/// One generated patient, before serialization.
struct Patient {
    id: String,
    visits: Vec<(DateTime<Utc>, Vec<Event>)>,
    death: Option<DateTime<Utc>>,
}

fn background(rng: &mut SplitMix64) -> Event {
    match rng.below(10) {
        0..=5 => ("diagnosis", format!("D{:03}", 1 + rng.below(60)), None),
        6..=8 => ("medication", format!("M{:03}", 1 + rng.below(30)), None),
        _ => {
            let value = (rng.uniform(1.0, 200.0) * 10.0).round() / 10.0;
            ("lab", format!("L{:03}", 1 + rng.below(10)), Some(value))
        }
    }
}

fn patient(i: usize, spec: &DemoSpec, rng: &mut SplitMix64) -> (Patient, u8) {
    let epoch = Utc.with_ymd_and_hms(2020, 1, 1, 8, 0, 0).unwrap();
    let n_visits = 1 + rng.below(6) as usize;
    let mut start = epoch + Duration::days(rng.below(365) as i64);
    let mut visits = Vec::with_capacity(n_visits);
    for v in 0..n_visits {
        if v > 0 {
            start += Duration::days(3 + rng.below(58) as i64);
        }
        let n_events = 2 + rng.below(4) as usize;
        visits.push((start, (0..n_events).map(|_| background(rng)).collect::<Vec<_>>()));
    }
    let clean = rng.bernoulli(spec.prevalence);
    if clean {
        visits[n_visits - 1]
            .1
            .push(("diagnosis", SENTINEL_CODE.to_string(), None));
    } else if n_visits > 1 && rng.bernoulli(spec.decoy_rate) {
        let v = rng.below(n_visits as u64 - 1) as usize;
        visits[v].1.push(("diagnosis", SENTINEL_CODE.to_string(), None));
    }
    // the sentinel should not sit at a fixed position inside the visit
    for (_, events) in &mut visits {
        rng.shuffle(events);
    }
    let label = if rng.bernoulli(spec.noise_rate) {
        rng.bernoulli(0.5)
    } else {
        clean
    };
    let last = visits[n_visits - 1].0;
    let death = if label {
        Some(last + Duration::days(1 + rng.below(20) as i64))
    } else if rng.bernoulli(0.2) {
        Some(last + Duration::days(60 + rng.below(141) as i64))
    } else {
        None
    };
    (
        Patient {
            id: format!("P{i:06}"),
            visits,
            death,
        },
        label as u8,
    )
}

/// `(patient_id, label)` pairs.
pub type DemoLabels = Vec<(String, u8)>;

/// Event CSV plus the intended label of every patient, in id order.
pub fn generate(spec: &DemoSpec) -> Result<(Vec<u8>, DemoLabels)> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| healthpipe::Error::io("<demo csv>", e.into());
    writer.write_record(EVENT_HEADER).map_err(io)?;
    let mut labels = Vec::with_capacity(spec.patients);
    for i in 0..spec.patients {
        let (p, label) = patient(i, spec, &mut rng);
        for (start, events) in &p.visits {
            for (k, (kind, code, value)) in events.iter().enumerate() {
                // events inside a visit are 30 minutes apart
                let ts = *start + Duration::minutes(30 * k as i64);
                let value = value.map(|v| v.to_string()).unwrap_or_default();
                writer
                    .write_record([p.id.as_str(), &rfc3339(ts), kind, code, &value])
                    .map_err(io)?;
            }
        }
        if let Some(d) = p.death {
            writer
                .write_record([p.id.as_str(), &rfc3339(d), DEATH_EVENT, DEATH_EVENT, ""])
                .map_err(io)?;
        }
        labels.push((p.id, label));
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| healthpipe::Error::io("<demo csv>", e.into_error()))?;
    Ok((bytes, labels))
}

fn rfc3339(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use healthpipe::preprocess::{generate_dataset_from_bytes, PreprocessConfig};

    #[test]
    fn deterministic() {
        let spec = DemoSpec::new(50, 3);
        assert_eq!(generate(&spec).unwrap().0, generate(&spec).unwrap().0);
        assert_ne!(generate(&spec).unwrap().0, generate(&DemoSpec::new(50, 4)).unwrap().0);
    }

    #[test]
    fn mortality_labels_match_the_intended_labels() {
        let (csv, labels) = generate(&DemoSpec::new(300, 9)).unwrap();
        let ds = generate_dataset_from_bytes("t", &csv, "mortality", &PreprocessConfig::default(), 1).unwrap();
        let mut got: Vec<(String, u8)> = ds.examples().map(|e| (e.patient_id.clone(), e.y[0])).collect();
        got.sort();
        assert_eq!(got, labels);
        let positives = labels.iter().filter(|(_, y)| *y == 1).count();
        assert!((80..160).contains(&positives), "{positives}");
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(generate(&DemoSpec::new(0, 1)).is_err());
        let mut s = DemoSpec::new(5, 1);
        s.noise_rate = 1.5;
        assert!(generate(&s).is_err());
    }
}
