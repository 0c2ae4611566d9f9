//! Iterative random-forest imputation.
//!
//! Missing cells start at the column mode or mean. Each pass visits the
//! target columns in increasing order of missingness, trains a forest on
//! the rows where the column is observed (features: every other column at
//! its current values) and overwrites only the missing cells. Passes stop
//! once the change between successive imputations stops shrinking, and the
//! previous pass is returned.

use std::collections::BTreeMap;

use crate::attributes::{AttributeTable, ColumnData};
use crate::rng;

use super::forest::{fit_random_forest, ForestConfig, Labels, Prediction};
use super::{impute_mode_mean, ImputationDiagnostics, ImputationMethod, ImputationResult, ImputeError};

pub const MAX_MISSFOREST_ITERATIONS: usize = 10;

fn feature_value(data: &ColumnData, row: usize) -> f64 {
    match data {
        ColumnData::Categorical { values, .. } => values[row].map(|v| v as f64).unwrap_or(0.0),
        ColumnData::Continuous { values, .. } => values[row].unwrap_or(0.0),
    }
}

/// Change between two imputations: (categorical share of changed imputed
/// cells, continuous normalised squared difference); `None` where the
/// targets have no column of that type.
fn convergence(
    new: &AttributeTable,
    old: &AttributeTable,
    targets: &[&str],
    missing: &BTreeMap<&str, Vec<usize>>,
) -> (Option<f64>, Option<f64>) {
    let (mut changed, mut cat_missing, mut has_cat) = (0.0, 0.0, false);
    let (mut num, mut den, mut has_cont) = (0.0, 0.0, false);
    for &t in targets {
        match (&new.column(t).unwrap().data, &old.column(t).unwrap().data) {
            (ColumnData::Categorical { values: a, .. }, ColumnData::Categorical { values: b, .. }) => {
                has_cat = true;
                for &r in &missing[t] {
                    cat_missing += 1.0;
                    changed += (a[r] != b[r]) as u8 as f64;
                }
            }
            (ColumnData::Continuous { values: a, .. }, ColumnData::Continuous { values: b, .. }) => {
                has_cont = true;
                for (x, y) in a.iter().zip(b) {
                    let (x, y) = (x.unwrap_or(0.0), y.unwrap_or(0.0));
                    num += (x - y).powi(2);
                    den += x * x;
                }
            }
            _ => unreachable!("column types do not change"),
        }
    }
    let cat = has_cat.then(|| if cat_missing > 0.0 { changed / cat_missing } else { 0.0 });
    let cont = has_cont.then(|| if den > 0.0 { num / den } else { 0.0 });
    (cat, cont)
}

/// Whether another pass should run: some criterion still decreased.
fn improving(new: (Option<f64>, Option<f64>), old: (Option<f64>, Option<f64>)) -> bool {
    let lt = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => a < b,
        _ => false,
    };
    lt(new.0, old.0) || lt(new.1, old.1)
}

pub fn impute_missforest(
    attrs: &AttributeTable,
    targets: &[&str],
    covariates: &[&str],
    forest: &ForestConfig,
    seed: u64,
) -> Result<ImputationResult, ImputeError> {
    if forest.trees < 1 {
        return Err(ImputeError::ConfigInvalid("trees must be at least 1".into()));
    }
    if forest.min_leaf < 1 {
        return Err(ImputeError::ConfigInvalid("min_leaf must be at least 1".into()));
    }
    let n = attrs.row_count();
    let mut missing: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &t in targets {
        let col = attrs.column(t)?;
        let rows: Vec<usize> = (0..n).filter(|&r| col.data.is_missing(r)).collect();
        if rows.len() == n {
            return Err(ImputeError::AllMissing(t.to_string()));
        }
        missing.insert(t, rows);
    }
    for &c in covariates {
        attrs.column(c)?;
    }
    let total_missing: usize = missing.values().map(Vec::len).sum();
    if total_missing == 0 {
        return Ok(ImputationResult::new(
            attrs,
            attrs.clone(),
            targets,
            ImputationMethod::MissForest,
            ImputationDiagnostics::default(),
        ));
    }
    // visiting order: fewest missing first, ties in input order
    let mut order: Vec<&str> = targets.to_vec();
    order.sort_by_key(|t| missing[t].len());

    let mut all_columns: Vec<&str> = targets.to_vec();
    for &c in covariates {
        if !all_columns.contains(&c) {
            all_columns.push(c);
        }
    }
    // covariates with gaps are filled once and used only as features
    let mut current = impute_mode_mean(attrs, &all_columns)?;

    let mut oob: BTreeMap<String, Option<f64>> = BTreeMap::new();
    let mut conv_old = (Some(f64::INFINITY), Some(f64::INFINITY));
    let mut iterations = 0;
    let (previous, previous_oob) = loop {
        let before = current.clone();
        let before_oob = oob.clone();
        for (k, &target) in order.iter().enumerate() {
            if missing[target].is_empty() {
                continue;
            }
            let feature_cols: Vec<&ColumnData> = all_columns
                .iter()
                .filter(|&&c| c != target)
                .map(|&c| &current.column(c).unwrap().data)
                .collect();
            let row_features =
                |r: usize| -> Vec<f64> { feature_cols.iter().map(|d| feature_value(d, r)).collect() };
            let observed: Vec<usize> = (0..n).filter(|&r| !attrs.column(target).unwrap().data.is_missing(r)).collect();
            let x: Vec<Vec<f64>> = observed.iter().map(|&r| row_features(r)).collect();
            let queries: Vec<Vec<f64>> = missing[target].iter().map(|&r| row_features(r)).collect();
            let labels = match &current.column(target).unwrap().data {
                ColumnData::Categorical { levels, values } => Labels::Class {
                    values: observed.iter().map(|&r| values[r].unwrap()).collect(),
                    classes: levels.len(),
                },
                ColumnData::Continuous { values, .. } => {
                    Labels::Real(observed.iter().map(|&r| values[r].unwrap()).collect())
                }
            };
            let predictions: Vec<Prediction> = if observed.len() < 2 {
                // a single observed value is the only possible prediction
                let only = match &labels {
                    Labels::Class { values, .. } => Prediction::Class(values[0]),
                    Labels::Real(v) => Prediction::Real(v[0]),
                };
                vec![only; queries.len()]
            } else {
                let mut cfg = *forest;
                let p = feature_cols.len().max(1);
                cfg.mtry = Some(cfg.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize).clamp(1, p));
                let tree_seed = rng::derive_seed(seed, (iterations * order.len() + k) as u64);
                let f = fit_random_forest(&x, &labels, &cfg, tree_seed)?;
                oob.insert(target.to_string(), f.oob_error);
                queries.iter().map(|q| f.predict(q)).collect()
            };
            let rows = &missing[target];
            match &mut current.column_mut(target)?.data {
                ColumnData::Categorical { values, .. } => {
                    for (&r, p) in rows.iter().zip(&predictions) {
                        if let Prediction::Class(c) = p {
                            values[r] = Some(*c);
                        }
                    }
                }
                ColumnData::Continuous { values, .. } => {
                    for (&r, p) in rows.iter().zip(&predictions) {
                        if let Prediction::Real(v) = p {
                            values[r] = Some(*v);
                        }
                    }
                }
            }
        }
        iterations += 1;
        let conv_new = convergence(&current, &before, targets, &missing);
        if iterations >= MAX_MISSFOREST_ITERATIONS || !improving(conv_new, conv_old) {
            break (before, before_oob);
        }
        conv_old = conv_new;
    };
    let (result, result_oob) = if iterations >= MAX_MISSFOREST_ITERATIONS {
        (current, oob)
    } else {
        (previous, previous_oob)
    };
    // restore untouched covariate gaps
    let mut completed = result;
    for &c in covariates {
        if !targets.contains(&c) {
            let original = attrs.column(c)?.clone();
            *completed.column_mut(c)? = original;
        }
    }
    let diagnostics = ImputationDiagnostics {
        iterations,
        oob_errors: result_oob,
        ..Default::default()
    };
    Ok(ImputationResult::new(
        attrs,
        completed,
        targets,
        ImputationMethod::MissForest,
        diagnostics,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::Column;

    fn table(n: usize, miss_every: usize) -> AttributeTable {
        let x: Vec<Option<&str>> = (0..n).map(|i| Some(["a", "b", "c", "d"][i % 4])).collect();
        let y: Vec<Option<&str>> = (0..n)
            .map(|i| {
                if miss_every > 0 && i % miss_every == 1 {
                    None
                } else {
                    Some(if i % 4 < 2 { "lo" } else { "hi" })
                }
            })
            .collect();
        let z: Vec<Option<f64>> = (0..n)
            .map(|i| if miss_every > 0 && i % miss_every == 2 { None } else { Some((i % 4) as f64 * 2.0) })
            .collect();
        AttributeTable::with_columns(
            n,
            vec![
                Column::from_labels("x", &["a", "b", "c", "d"], &x).unwrap(),
                Column::from_labels("y", &["lo", "hi"], &y).unwrap(),
                Column::continuous("z", None, z),
            ],
        )
        .unwrap()
    }

    #[test]
    fn complete_table_is_untouched() {
        let t = table(20, 0);
        let r = impute_missforest(&t, &["y", "z"], &["x"], &ForestConfig::default(), 1).unwrap();
        assert_eq!(r.completed, t);
        assert_eq!(r.diagnostics.iterations, 0);
    }

    #[test]
    fn learns_deterministic_targets() {
        let t = table(80, 5);
        let cfg = ForestConfig { trees: 30, ..Default::default() };
        let r = impute_missforest(&t, &["y", "z"], &["x"], &cfg, 7).unwrap();
        for i in 0..80 {
            let truth = if i % 4 < 2 { "lo" } else { "hi" };
            assert_eq!(r.completed.label("y", i).unwrap(), Some(truth));
            let z = r.completed.continuous("z").unwrap()[i].unwrap();
            assert!((z - (i % 4) as f64 * 2.0).abs() < 0.5, "row {i}: {z}");
        }
        assert!(r.diagnostics.iterations >= 1);
    }

    #[test]
    fn zero_trees_rejected() {
        let t = table(10, 3);
        let cfg = ForestConfig { trees: 0, ..Default::default() };
        assert!(matches!(
            impute_missforest(&t, &["y"], &["x"], &cfg, 0),
            Err(ImputeError::ConfigInvalid(_))
        ));
    }
}
