//! Per-column descriptive tables for the attribute data.

use serde::{Deserialize, Serialize};

use crate::attributes::{AttributeTable, ColumnData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    /// Level label, or `Missing`.
    pub label: String,
    pub count: usize,
    /// Share of all rows, in percent.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    /// Level counts (categorical) followed by a `Missing` row when any cell
    /// is missing; continuous columns list only the missing row.
    pub counts: Vec<LevelCount>,
    /// Mean and sample SD of observed values (continuous columns).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

pub const MISSING_LABEL: &str = "Missing";

pub fn summarize_attributes(attrs: &AttributeTable) -> Vec<ColumnSummary> {
    let n = attrs.row_count();
    let percent = |c: usize| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 };
    attrs
        .columns()
        .iter()
        .map(|col| {
            let missing = col.data.missing_count();
            let mut counts = Vec::new();
            let (mut mean, mut sd) = (None, None);
            match &col.data {
                ColumnData::Categorical { levels, values } => {
                    for (k, level) in levels.iter().enumerate() {
                        let c = values.iter().filter(|v| **v == Some(k as u32)).count();
                        counts.push(LevelCount { label: level.clone(), count: c, percent: percent(c) });
                    }
                }
                ColumnData::Continuous { values, .. } => {
                    let obs: Vec<f64> = values.iter().flatten().copied().collect();
                    if !obs.is_empty() {
                        let m = obs.iter().sum::<f64>() / obs.len() as f64;
                        mean = Some(m);
                        if obs.len() > 1 {
                            let ss: f64 = obs.iter().map(|x| (x - m).powi(2)).sum();
                            sd = Some((ss / (obs.len() - 1) as f64).sqrt());
                        }
                    }
                }
            }
            if missing > 0 {
                counts.push(LevelCount {
                    label: MISSING_LABEL.into(),
                    count: missing,
                    percent: percent(missing),
                });
            }
            ColumnSummary { column: col.name.clone(), counts, mean, sd }
        })
        .collect()
}

pub const SUMMARY_CSV_HEADER: [&str; 4] = ["column", "level", "n", "percent"];

/// Rows as printed in a descriptive table: whole-number percentages and a
/// `mean (SD)` row for continuous columns.
pub fn summary_csv_rows(summaries: &[ColumnSummary]) -> Vec<[String; 4]> {
    let mut rows = Vec::new();
    for s in summaries {
        if let Some(m) = s.mean {
            let sd = s.sd.map(|v| format!("{v:.2}")).unwrap_or_else(|| "NA".into());
            rows.push([s.column.clone(), "mean (SD)".into(), format!("{m:.2}"), sd]);
        }
        for c in &s.counts {
            rows.push([s.column.clone(), c.label.clone(), c.count.to_string(), format!("{:.0}", c.percent)]);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::Column;

    #[test]
    fn sfhr_sex_row() {
        let labels: Vec<Option<&str>> = (0..767)
            .map(|i| match i {
                0..541 => Some("Male"),
                541..751 => Some("Female"),
                _ => None,
            })
            .collect();
        let t = AttributeTable::with_columns(767, vec![Column::from_labels("sex", &["Male", "Female"], &labels).unwrap()])
            .unwrap();
        let s = summarize_attributes(&t);
        let rows = summary_csv_rows(&s);
        assert_eq!(rows[0], ["sex", "Male", "541", "71"].map(String::from));
        assert_eq!(rows[2], ["sex", "Missing", "16", "2"].map(String::from));
        let total: f64 = s[0].counts.iter().map(|c| c.percent).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn all_missing_and_continuous() {
        let t = AttributeTable::with_columns(
            3,
            vec![
                Column::from_labels::<&str>("c", &["a"], &[None, None, None]).unwrap(),
                Column::continuous("age", None, vec![Some(30.0), Some(40.0), None]),
            ],
        )
        .unwrap();
        let s = summarize_attributes(&t);
        assert_eq!(s[0].counts.last().unwrap().percent, 100.0);
        assert_eq!(s[1].mean, Some(35.0));
        assert!((s[1].sd.unwrap() - 50f64.sqrt()).abs() < 1e-12);
    }
}
