//! Propensity-score matching imputation.
//!
//! A logistic model of "target is missing" on the covariates gives each
//! node a propensity score; every missing cell copies the value of the
//! observed node with the closest score (smallest index on ties).

use crate::attributes::{AttributeTable, ColumnData};
use crate::fit::logistic::{self, dot, IrlsOptions, LogisticData, LogisticError};

use super::{Donor, ImputationDiagnostics, ImputationMethod, ImputationResult, ImputeError};

/// Intercept plus dummy columns (levels after the first observed one) and
/// standardised continuous covariates. Returns column names and rows.
fn propensity_design(
    attrs: &AttributeTable,
    covariates: &[&str],
) -> Result<(Vec<String>, Vec<Vec<f64>>), ImputeError> {
    let n = attrs.row_count();
    let mut names = vec!["(intercept)".to_string()];
    let mut rows = vec![vec![1.0]; n];
    for &name in covariates {
        let col = attrs.column(name)?;
        if let Some(row) = (0..n).find(|&r| col.data.is_missing(r)) {
            return Err(ImputeError::CovariateMissing {
                column: name.to_string(),
                row,
            });
        }
        match &col.data {
            ColumnData::Categorical { levels, values } => {
                let present: Vec<usize> = (0..levels.len())
                    .filter(|&l| values.iter().any(|v| *v == Some(l as u32)))
                    .collect();
                for &l in present.iter().skip(1) {
                    names.push(format!("{name}.{}", levels[l]));
                    for (row, v) in rows.iter_mut().zip(values) {
                        row.push((*v == Some(l as u32)) as u8 as f64);
                    }
                }
            }
            ColumnData::Continuous { values, .. } => {
                let xs: Vec<f64> = values.iter().map(|v| v.unwrap_or(0.0)).collect();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                if sd > 0.0 {
                    names.push(format!("{name} (standardised)"));
                    for (row, x) in rows.iter_mut().zip(&xs) {
                        row.push((x - mean) / sd);
                    }
                }
            }
        }
    }
    Ok((names, rows))
}

pub fn impute_psm(
    attrs: &AttributeTable,
    target: &str,
    covariates: &[&str],
    // matching is deterministic; the seed is recorded for interface symmetry
    _seed: u64,
) -> Result<ImputationResult, ImputeError> {
    let n = attrs.row_count();
    let col = attrs.column(target)?;
    let missing: Vec<bool> = (0..n).map(|r| col.data.is_missing(r)).collect();
    let n_missing = missing.iter().filter(|&&m| m).count();
    if n_missing == 0 {
        return Ok(ImputationResult::new(
            attrs,
            attrs.clone(),
            &[target],
            ImputationMethod::Psm,
            ImputationDiagnostics::default(),
        ));
    }
    if n_missing == n {
        return Err(ImputeError::AllMissing(target.to_string()));
    }
    let (names, rows) = propensity_design(attrs, covariates)?;
    let mut data = LogisticData::new(names.len());
    for (row, &m) in rows.iter().zip(&missing) {
        data.push(row, m as u8 as f64, 1.0);
    }
    let fit = logistic::fit(&data, IrlsOptions::default()).map_err(|e| {
        ImputeError::PropensityDegenerate(match e {
            LogisticError::Separation { column, .. } => {
                format!("`{}` perfectly predicts missingness", names[column])
            }
            LogisticError::RankDeficient { column, .. } => {
                format!("`{}` is collinear with other covariates", names[column])
            }
            LogisticError::NoData => "no rows".into(),
        })
    })?;
    let scores: Vec<f64> = rows.iter().map(|r| logistic::logistic(dot(r, &fit.coef))).collect();

    let mut completed = attrs.clone();
    let mut donors = Vec::with_capacity(n_missing);
    let observed: Vec<usize> = (0..n).filter(|&r| !missing[r]).collect();
    for recipient in (0..n).filter(|&r| missing[r]) {
        let mut donor = observed[0];
        for &cand in &observed[1..] {
            if (scores[cand] - scores[recipient]).abs() < (scores[donor] - scores[recipient]).abs() {
                donor = cand;
            }
        }
        donors.push(Donor {
            column: target.to_string(),
            recipient,
            donor,
            recipient_score: scores[recipient],
            donor_score: scores[donor],
        });
    }
    match &mut completed.column_mut(target)?.data {
        ColumnData::Categorical { values, .. } => {
            for d in &donors {
                values[d.recipient] = values[d.donor];
            }
        }
        ColumnData::Continuous { values, .. } => {
            for d in &donors {
                values[d.recipient] = values[d.donor];
            }
        }
    }
    let diagnostics = ImputationDiagnostics {
        propensity_coefficients: names.into_iter().zip(fit.coef).collect(),
        donors,
        ..Default::default()
    };
    Ok(ImputationResult::new(
        attrs,
        completed,
        &[target],
        ImputationMethod::Psm,
        diagnostics,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::Column;

    fn table(living: &[Option<&str>]) -> AttributeTable {
        let n = living.len();
        let sex: Vec<Option<&str>> = (0..n).map(|i| Some(if i % 3 == 0 { "f" } else { "m" })).collect();
        let age: Vec<Option<f64>> = (0..n).map(|i| Some(20.0 + (i * 7 % 13) as f64)).collect();
        AttributeTable::with_columns(
            n,
            vec![
                Column::from_labels("sex", &["m", "f"], &sex).unwrap(),
                Column::continuous("age", Some("years".into()), age),
                Column::from_labels("living", &["own", "other", "homeless"], living).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn nothing_missing_is_identity() {
        let t = table(&[Some("own"), Some("other"), Some("homeless"), Some("own")]);
        let r = impute_psm(&t, "living", &["sex", "age"], 0).unwrap();
        assert_eq!(r.completed, t);
        assert_eq!(r.provenance.count(), 0);
    }

    #[test]
    fn all_missing_fails() {
        let t = table(&[None, None, None]);
        assert_eq!(
            impute_psm(&t, "living", &["sex"], 0).unwrap_err(),
            ImputeError::AllMissing("living".into())
        );
    }

    #[test]
    fn covariate_missing_fails() {
        let mut t = table(&[Some("own"), None, Some("own")]);
        t.push(Column::continuous("x", None, vec![Some(1.0), None, Some(2.0)])).unwrap();
        assert!(matches!(
            impute_psm(&t, "living", &["x"], 0),
            Err(ImputeError::CovariateMissing { row: 1, .. })
        ));
    }

    #[test]
    fn donors_are_observed_rows() {
        let labels = ["own", "other", "homeless"];
        let living: Vec<Option<&str>> =
            (0..40).map(|i| if i % 7 == 4 { None } else { Some(labels[i % 3]) }).collect();
        let t = table(&living);
        let r = impute_psm(&t, "living", &["sex", "age"], 0).unwrap();
        assert_eq!(r.diagnostics.donors.len(), r.provenance.count());
        for d in &r.diagnostics.donors {
            assert!(living[d.donor].is_some());
            assert_eq!(
                r.completed.label("living", d.recipient).unwrap(),
                living[d.donor]
            );
        }
    }
}
