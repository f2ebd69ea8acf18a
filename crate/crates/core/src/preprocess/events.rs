use std::io::Read;

use chrono::{DateTime, Utc};

use crate::common::{ErrorCode, ValidationError};

pub const EVENT_HEADER: [&str; 5] = ["patient_id", "timestamp", "event_type", "code", "value"];

/// Event type that marks a patient's death rather than a clinical observation.
pub const DEATH_EVENT: &str = "death";

#[derive(Debug, Clone, PartialEq)]
pub struct RawEvent {
    pub patient_id: String,
    pub timestamp: DateTime<Utc>,
    pub event_type: String,
    pub code: String,
    pub value: Option<f64>,
}

impl RawEvent {
    pub fn is_death(&self) -> bool {
        self.event_type == DEATH_EVENT
    }
}

/// Parses the event CSV (`patient_id,timestamp,event_type,code,value`).
///
/// Row order is preserved. Errors carry the 1-based line number of the
/// offending row in both the message and the context.
pub fn parse_events<R: Read>(input: R) -> Result<Vec<RawEvent>, ValidationError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(input);

    let header = reader.headers().map_err(|e| csv_error("header", 1, &e))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got.is_empty() || (got.len() == 1 && got[0].is_empty()) {
        return Err(ValidationError::new(
            ErrorCode::SchemaViolation,
            format!(
                "header: missing header row at line 1, expected {}",
                EVENT_HEADER.join(",")
            ),
            "line 1",
        ));
    }
    if got != EVENT_HEADER {
        let missing: Vec<&str> = EVENT_HEADER.iter().copied().filter(|c| !got.contains(c)).collect();
        let detail = if missing.is_empty() {
            "columns out of order or unexpected columns".to_string()
        } else {
            format!("missing column(s) {}", missing.join(","))
        };
        return Err(ValidationError::new(
            ErrorCode::SchemaViolation,
            format!(
                "header: bad header at line 1 ({detail}); expected {}, got {}",
                EVENT_HEADER.join(","),
                got.join(",")
            ),
            "line 1",
        ));
    }

    let mut events = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(csv_error("row", line, &e));
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != EVENT_HEADER.len() {
            return Err(ValidationError::new(
                ErrorCode::SchemaViolation,
                format!(
                    "row: line {line} has {} fields, expected {}",
                    record.len(),
                    EVENT_HEADER.len()
                ),
                format!("line {line}"),
            ));
        }
        events.push(parse_row(&record, line)?);
    }
    if events.is_empty() {
        return Err(ValidationError::empty("events", "input has a header but no data rows"));
    }
    Ok(events)
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<RawEvent, ValidationError> {
    let field = |i: usize| record.get(i).unwrap_or("");
    for (i, name) in [(0, "patient_id"), (2, "event_type"), (3, "code")] {
        if field(i).is_empty() {
            return Err(ValidationError::new(
                ErrorCode::SchemaViolation,
                format!("{name}: empty at line {line}"),
                format!("line {line}"),
            ));
        }
    }
    let raw_ts = field(1);
    let timestamp = DateTime::parse_from_rfc3339(raw_ts)
        .map_err(|e| {
            ValidationError::new(
                ErrorCode::TypeMismatch,
                format!("timestamp: cannot parse {raw_ts:?} as RFC 3339 at line {line}: {e}"),
                format!("line {line}"),
            )
        })?
        .with_timezone(&Utc);
    let raw_value = field(4);
    let value = if raw_value.is_empty() {
        None
    } else {
        match raw_value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                return Err(ValidationError::new(
                    ErrorCode::TypeMismatch,
                    format!("value: {raw_value:?} is not a finite number at line {line}"),
                    format!("line {line}"),
                ))
            }
        }
    };
    Ok(RawEvent {
        patient_id: field(0).to_string(),
        timestamp,
        event_type: field(2).to_string(),
        code: field(3).to_string(),
        value,
    })
}

fn csv_error(name: &str, line: u64, e: &csv::Error) -> ValidationError {
    let code = match e.kind() {
        csv::ErrorKind::Utf8 { .. } => ErrorCode::TypeMismatch,
        _ => ErrorCode::SchemaViolation,
    };
    ValidationError::new(
        code,
        format!("{name}: unreadable CSV at line {line}: {e}"),
        format!("line {line}"),
    )
}
