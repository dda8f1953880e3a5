//! CSV ingestion and export.
//!
//! Canonical layout: `id,t,avail,trt,prob_0..prob_K,outcome,<features>`,
//! header required, `t` 1-based. Any column not claimed by the schema is a
//! feature.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{validate, DecisionRecord, MrtDataset, SubjectTrajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ProbabilitySource {
    /// Use the `prob_0, prob_1, ...` columns present in the header.
    Auto,
    /// Named columns for arms `0..=K`.
    Columns(Vec<String>),
    /// Constant randomization vector `(p(0), ..., p(K))` for every record.
    Constant(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub id: String,
    pub t: String,
    pub availability: String,
    pub treatment: String,
    pub outcome: String,
    pub probabilities: ProbabilitySource,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            t: "t".into(),
            availability: "avail".into(),
            treatment: "trt".into(),
            outcome: "outcome".into(),
            probabilities: ProbabilitySource::Auto,
        }
    }
}

impl CsvSchema {
    fn probability_columns(&self, headers: &[String]) -> Result<Option<Vec<String>>> {
        match &self.probabilities {
            ProbabilitySource::Constant(_) => Ok(None),
            ProbabilitySource::Columns(cols) => Ok(Some(cols.clone())),
            ProbabilitySource::Auto => {
                let mut cols = Vec::new();
                while headers.contains(&format!("prob_{}", cols.len())) {
                    cols.push(format!("prob_{}", cols.len()));
                }
                if cols.len() < 2 {
                    return Err(Error::MissingColumn("prob_0, prob_1, ...".into()));
                }
                Ok(Some(cols))
            }
        }
    }
}

/// Reads and validates a dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<MrtDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

/// Reads and validates a dataset from any CSV source.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<MrtDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let id_col = find(&schema.id)?;
    let t_col = find(&schema.t)?;
    let avail_col = find(&schema.availability)?;
    let trt_col = find(&schema.treatment)?;
    let out_col = find(&schema.outcome)?;
    let prob_names = schema.probability_columns(&headers)?;
    let prob_cols = match &prob_names {
        Some(names) => Some(names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let k_arms = match (&prob_cols, &schema.probabilities) {
        (Some(cols), _) => cols.len() - 1,
        (None, ProbabilitySource::Constant(p)) => p.len().saturating_sub(1),
        _ => unreachable!(),
    };
    if k_arms == 0 {
        return Err(Error::Invalid("need probabilities for at least two arms".into()));
    }

    let mut claimed = vec![id_col, t_col, avail_col, trt_col, out_col];
    claimed.extend(prob_cols.iter().flatten().copied());
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|c| !claimed.contains(c)).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| headers[c].clone()).collect();

    let mut order: Vec<String> = Vec::new();
    let mut by_subject: HashMap<String, Vec<(i64, DecisionRecord)>> = HashMap::new();
    for (row_idx, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = row_idx + 1;
        let cell = |c: usize| row.get(c).unwrap_or("");
        let number = |c: usize| -> Result<f64> {
            let raw = cell(c);
            if raw.is_empty() {
                return Err(Error::MissingValue { row: row_no, column: headers[c].clone() });
            }
            raw.parse::<f64>().map_err(|_| Error::NonNumeric {
                row: row_no,
                column: headers[c].clone(),
                value: raw.to_owned(),
            })
        };
        let integer = |c: usize| -> Result<i64> {
            let v = number(c)?;
            if v.fract() != 0.0 || !v.is_finite() {
                return Err(Error::NonNumeric {
                    row: row_no,
                    column: headers[c].clone(),
                    value: cell(c).to_owned(),
                });
            }
            Ok(v as i64)
        };

        let id = cell(id_col).to_owned();
        if id.is_empty() {
            return Err(Error::MissingValue { row: row_no, column: headers[id_col].clone() });
        }
        let t = integer(t_col)?;
        if t < 1 {
            return Err(Error::Invalid(format!("row {row_no}: t must be >= 1 (got {t})")));
        }
        let available = match integer(avail_col)? {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Invalid(format!(
                    "row {row_no}: availability must be 0 or 1 (got {other})"
                )))
            }
        };
        let treatment = integer(trt_col)?;
        if treatment < 0 {
            return Err(Error::Invalid(format!("row {row_no}: negative treatment {treatment}")));
        }
        let rand_probs = match (&prob_cols, &schema.probabilities) {
            (Some(cols), _) => cols.iter().map(|&c| number(c)).collect::<Result<Vec<_>>>()?,
            (None, ProbabilitySource::Constant(p)) => p.clone(),
            _ => unreachable!(),
        };
        let outcome = number(out_col)?;
        let features = feature_cols.iter().map(|&c| number(c)).collect::<Result<Vec<_>>>()?;

        if !by_subject.contains_key(&id) {
            order.push(id.clone());
        }
        by_subject.entry(id).or_default().push((
            t,
            DecisionRecord {
                t: 0,
                available,
                treatment: treatment as usize,
                rand_probs,
                outcome,
                features,
            },
        ));
    }

    let mut subjects = Vec::with_capacity(order.len());
    let mut expected_t: Option<usize> = None;
    for id in order {
        let mut rows = by_subject.remove(&id).unwrap_or_default();
        rows.sort_by_key(|(t, _)| *t);
        for pair in rows.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateRecord { subject: id, t: pair[0].0 });
            }
        }
        let expected = *expected_t.get_or_insert(rows.len());
        if rows.len() != expected {
            return Err(Error::RaggedPanel { subject: id, found: rows.len(), expected });
        }
        let mut records = Vec::with_capacity(rows.len());
        for (idx, (t, mut rec)) in rows.into_iter().enumerate() {
            if t as usize != idx + 1 {
                return Err(Error::Invalid(format!(
                    "subject `{id}`: decision points must be 1..={expected} without gaps (missing t = {})",
                    idx + 1
                )));
            }
            rec.t = idx;
            records.push(rec);
        }
        subjects.push(SubjectTrajectory { subject_id: id, records });
    }

    let data = MrtDataset::new(subjects, k_arms, feature_names)?;
    validate(&data).into_result()?;
    Ok(data)
}

/// Writes the canonical layout. Floats use the shortest representation that
/// parses back to the same bits.
pub fn write_csv<W: Write>(data: &MrtDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["id", "t", "avail", "trt"].iter().map(|s| s.to_string()).collect();
    header.extend((0..=data.k_arms()).map(|k| format!("prob_{k}")));
    header.push("outcome".into());
    header.extend(data.feature_names().iter().cloned());
    w.write_record(&header)?;
    for s in data.subjects() {
        for r in &s.records {
            let mut row = vec![
                s.subject_id.clone(),
                (r.t + 1).to_string(),
                u8::from(r.available).to_string(),
                r.treatment.to_string(),
            ];
            row.extend(r.rand_probs.iter().map(f64::to_string));
            row.push(r.outcome.to_string());
            row.extend(r.features.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
