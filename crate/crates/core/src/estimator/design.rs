use super::{FeatureSet, ModelSpec};
use crate::data::{DecisionRecord, MrtDataset, NumeratorTable};
use crate::error::{Error, Result};

/// One `(subject, t)` term of the estimating equation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub subject: usize,
    /// 0-based decision point.
    pub t: usize,
    pub available: bool,
    /// `I_t J_t`: zero when unavailable or when the excursion is broken.
    pub weight: f64,
    /// `(g_t; C_1(A_t) f_t; ...; C_K(A_t) f_t)`.
    pub d_full: Vec<f64>,
    pub outcome: f64,
    pub treatment: usize,
}

impl DesignRow {
    /// The treatment block `D_t`, given the control dimension `q`.
    pub fn d_beta(&self, q: usize) -> &[f64] {
        &self.d_full[q..]
    }
}

/// All design rows, grouped by subject with a fixed number of rows each.
#[derive(Debug, Clone)]
pub struct DesignRows {
    pub rows: Vec<DesignRow>,
    pub n_subjects: usize,
    pub rows_per_subject: usize,
    pub q: usize,
    pub p: usize,
    pub k_arms: usize,
}

impl DesignRows {
    pub fn subject(&self, i: usize) -> &[DesignRow] {
        &self.rows[i * self.rows_per_subject..(i + 1) * self.rows_per_subject]
    }

    pub fn dim(&self) -> usize {
        self.q + self.k_arms * self.p
    }
}

/// Resolves one feature column. `t` and `t2` fall back to the 1-based
/// decision index and its square when the data has no column of that name.
#[derive(Debug, Clone, Copy)]
enum Column {
    Intercept,
    Feature(usize),
    Index,
    IndexSquared,
}

impl Column {
    fn value(self, record: &DecisionRecord) -> f64 {
        match self {
            Column::Intercept => 1.0,
            Column::Feature(i) => record.features[i],
            Column::Index => (record.t + 1) as f64,
            Column::IndexSquared => ((record.t + 1) as f64).powi(2),
        }
    }
}

fn resolve(data: &MrtDataset, set: &FeatureSet, role: &str) -> Result<Vec<Column>> {
    let mut cols = Vec::new();
    if set.intercept {
        cols.push(Column::Intercept);
    }
    for name in &set.columns {
        let col = match (data.feature_index(name), name.as_str()) {
            (Some(i), _) => Column::Feature(i),
            (None, "t") => Column::Index,
            (None, "t2") => Column::IndexSquared,
            (None, _) => return Err(Error::MissingColumn(format!("{name} (in {role})"))),
        };
        cols.push(col);
    }
    if cols.is_empty() {
        return Err(Error::Invalid(format!("{role} must have at least one column")));
    }
    Ok(cols)
}

/// Builds the weighted, centered design for every subject and every `t`
/// with `t + Δ - 1 <= T`.
pub fn build_design_rows(
    data: &MrtDataset,
    spec: &ModelSpec,
    numerator: &NumeratorTable,
) -> Result<DesignRows> {
    let delta = spec.delta;
    if delta == 0 {
        return Err(Error::Invalid("excursion length delta must be >= 1".into()));
    }
    let t_points = data.t_points();
    if delta > t_points {
        return Err(Error::Invalid(format!(
            "excursion length {delta} exceeds the {t_points} decision points"
        )));
    }
    let f_cols = resolve(data, &spec.f, "f")?;
    let g_cols = resolve(data, &spec.g, "g")?;
    let (p, q, k_arms) = (f_cols.len(), g_cols.len(), data.k_arms());
    let rows_per_subject = t_points - delta + 1;

    let mut rows = Vec::with_capacity(data.n() * rows_per_subject);
    for (i, subject) in data.subjects().iter().enumerate() {
        let recs = &subject.records;
        for t in 0..rows_per_subject {
            let r = &recs[t];
            let weight = if r.available {
                excursion_weight(&subject.subject_id, recs, t, delta, numerator)?
            } else {
                0.0
            };
            let mut d_full = Vec::with_capacity(q + k_arms * p);
            d_full.extend(g_cols.iter().map(|c| c.value(r)));
            let f: Vec<f64> = f_cols.iter().map(|c| c.value(r)).collect();
            for k in 1..=k_arms {
                let centered = f64::from(u8::from(r.treatment == k)) - numerator.prob(t, k);
                d_full.extend(f.iter().map(|v| centered * v));
            }
            rows.push(DesignRow {
                subject: i,
                t,
                available: r.available,
                weight,
                d_full,
                outcome: r.outcome,
                treatment: r.treatment,
            });
        }
    }
    Ok(DesignRows {
        rows,
        n_subjects: data.n(),
        rows_per_subject,
        q,
        p,
        k_arms,
    })
}

/// `J_t = p̃_t(A_t)/p_t(A_t | H_t) · Π_{j=t+1}^{t+Δ-1} 1(A_j = 0)/p_j(0 | H_j)`
/// with 0/0 = 0. Unavailable `j` have `p_j(0 | H_j) = 1`.
fn excursion_weight(
    subject: &str,
    recs: &[DecisionRecord],
    t: usize,
    delta: usize,
    numerator: &NumeratorTable,
) -> Result<f64> {
    let r = &recs[t];
    let denom = r.rand_probs[r.treatment];
    if !(denom > 0.0) {
        return Err(Error::Positivity(format!(
            "subject `{subject}`, t = {}: realized arm {} has randomization probability 0",
            t + 1,
            r.treatment
        )));
    }
    let mut w = numerator.prob(t, r.treatment) / denom;
    for next in &recs[t + 1..t + delta] {
        if next.treatment != 0 {
            return Ok(0.0);
        }
        if next.available {
            let p0 = next.rand_probs[0];
            if !(p0 > 0.0) {
                return Err(Error::Positivity(format!(
                    "subject `{subject}`, t = {}: reference arm has probability 0",
                    next.t + 1
                )));
            }
            w /= p0;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::test_support::panel;
    use crate::data::{fit_numerator_probs, NumeratorPolicy};

    fn spec(delta: usize) -> ModelSpec {
        ModelSpec { delta, ..ModelSpec::default() }
    }

    fn rows_for(d: &MrtDataset, s: &ModelSpec) -> DesignRows {
        let table = fit_numerator_probs(d, &s.numerator).unwrap();
        build_design_rows(d, s, &table).unwrap()
    }

    #[test]
    fn unit_weights_when_numerator_matches() {
        let d = panel(&[vec![0, 1, 2]], &[vec![0.0; 3]], &[0.4, 0.3, 0.3]);
        let rows = rows_for(&d, &spec(1));
        assert!(rows.rows.iter().all(|r| (r.weight - 1.0).abs() < 1e-15));
        // C_k = 1(A = k) - p̃(k)
        let r = &rows.rows[1];
        assert!((r.d_full[1] - 0.7).abs() < 1e-15 && (r.d_full[2] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn treated_follow_up_zeroes_weight() {
        let d = panel(&[vec![0, 1, 0]], &[vec![0.0; 3]], &[0.4, 0.3, 0.3]);
        let rows = rows_for(&d, &spec(2));
        assert_eq!(rows.rows_per_subject, 2);
        assert_eq!(rows.rows[0].weight, 0.0);
    }

    #[test]
    fn untreated_follow_up_divides_by_reference_probability() {
        let d = panel(&[vec![1, 0, 0]], &[vec![0.0; 3]], &[0.4, 0.3, 0.3]);
        let rows = rows_for(&d, &spec(2));
        assert!((rows.rows[0].weight - 2.5).abs() < 1e-12);
    }

    #[test]
    fn unavailable_rows_kept_with_zero_weight() {
        let mut d = panel(&[vec![0, 1]], &[vec![0.0; 2]], &[0.5, 0.5]);
        d = {
            let mut s = d.subjects().to_vec();
            s[0].records[0].available = false;
            MrtDataset::new(s, 1, vec![]).unwrap()
        };
        let rows = rows_for(&d, &ModelSpec::default());
        assert_eq!(rows.rows.len(), 2);
        assert_eq!(rows.rows[0].weight, 0.0);
        assert_eq!(rows.rows[1].weight, 1.0);
    }

    #[test]
    fn index_columns_resolve() {
        let d = panel(&[vec![0, 1, 0]], &[vec![0.0; 3]], &[0.5, 0.5]);
        let s = ModelSpec {
            g: FeatureSet::with_intercept(&["t", "t2"]),
            ..ModelSpec::default()
        };
        let rows = rows_for(&d, &s);
        assert_eq!(&rows.rows[2].d_full[..3], &[1.0, 3.0, 9.0]);
        let s = ModelSpec { g: FeatureSet::with_intercept(&["nope"]), ..ModelSpec::default() };
        let table = fit_numerator_probs(&d, &NumeratorPolicy::MatchRandomization).unwrap();
        assert!(matches!(build_design_rows(&d, &s, &table), Err(Error::MissingColumn(_))));
    }
}
