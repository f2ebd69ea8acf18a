use crate::common::{TaskKind, ValidationError};
use crate::error::Result;

/// `[n × d]` matrix of exact 0/1 labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    n: usize,
    d: usize,
    data: Vec<u8>,
}

/// `[n × d]` matrix of scores in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

fn check_rect<T>(name: &str, rows: &[Vec<T>]) -> Result<usize, ValidationError> {
    let d = match rows.first() {
        None => return Err(ValidationError::empty(name, "matrix has no rows")),
        Some(r) => r.len(),
    };
    if d == 0 {
        return Err(ValidationError::empty(name, "matrix has no columns"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(ValidationError::schema(
            name,
            format!("row {i} has {} columns, expected {d}", rows[i].len()),
            format!("row={i}"),
        ));
    }
    Ok(d)
}

impl LabelMatrix {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, ValidationError> {
        let d = check_rect("y", rows)?;
        for (i, row) in rows.iter().enumerate() {
            if let Some(&v) = row.iter().find(|&&v| v > 1) {
                return Err(ValidationError::range(
                    "y",
                    format!("label {v} is not 0 or 1"),
                    format!("row={i}"),
                ));
            }
        }
        Ok(Self {
            n: rows.len(),
            d,
            data: rows.concat(),
        })
    }

    /// Accepts real-valued rows whose entries are exactly 0.0 or 1.0.
    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self, ValidationError> {
        check_rect("y", rows)?;
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for &v in row {
                if v == 0.0 {
                    r.push(0);
                } else if v == 1.0 {
                    r.push(1);
                } else {
                    return Err(ValidationError::range(
                        "y",
                        format!("label {v} is not 0 or 1"),
                        format!("row={i}"),
                    ));
                }
            }
            out.push(r);
        }
        Self::from_rows(&out)
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.d + j]
    }

    pub fn column(&self, j: usize) -> Vec<u8> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

impl ScoreMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ValidationError> {
        let d = check_rect("hat_y", rows)?;
        for (i, row) in rows.iter().enumerate() {
            for &v in row {
                if !v.is_finite() {
                    return Err(ValidationError::type_mismatch(
                        "hat_y",
                        format!("score {v} is not finite"),
                        format!("row={i}"),
                    ));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(ValidationError::range(
                        "hat_y",
                        format!("score {v} is outside [0, 1]"),
                        format!("row={i}"),
                    ));
                }
            }
        }
        Ok(Self {
            n: rows.len(),
            d,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }
}

/// Infers the task kind from the labels alone.
///
/// One column is binary. With two or more columns, rows that all sum to
/// exactly one are multiclass; anything else is multilabel.
pub fn label_check(y: &LabelMatrix) -> TaskKind {
    if y.cols() == 1 {
        TaskKind::BinaryClassification
    } else if (0..y.rows()).all(|i| y.row(i).iter().map(|&v| v as usize).sum::<usize>() == 1) {
        TaskKind::MultiClass
    } else {
        TaskKind::MultiLabel
    }
}

/// [`label_check`] over real-valued rows (entries must be exactly 0 or 1).
pub fn label_check_rows(y: &[Vec<f64>]) -> Result<TaskKind, ValidationError> {
    Ok(label_check(&LabelMatrix::from_f64_rows(y)?))
}
