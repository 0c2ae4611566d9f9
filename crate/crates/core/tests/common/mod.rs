#![allow(dead_code)]

use std::path::Path;

use ergm::pipeline::{write_dataset, Candidate, Family, RunConfig};
use ergm::synth::{generate, Mechanism, MissingSpec, SynthColumn, SynthColumnKind, SynthOutput, SynthSpec};
use ergm::{ModelSpec, TermSpec};

pub fn categorical(name: &str, levels: &[&str], probabilities: &[f64]) -> SynthColumn {
    SynthColumn {
        name: name.into(),
        kind: SynthColumnKind::Categorical {
            levels: levels.iter().map(|s| s.to_string()).collect(),
            probabilities: probabilities.to_vec(),
        },
    }
}

/// Two categorical attributes with homophily on `sex` and an age column;
/// `missing` is the MCAR rate injected into `living`.
pub fn study(n: usize, seed: u64, missing: f64) -> SynthOutput {
    let spec = SynthSpec {
        n,
        columns: vec![
            categorical("sex", &["Male", "Female"], &[0.7, 0.3]),
            categorical("living", &["Own", "Other", "Homeless"], &[0.5, 0.3, 0.2]),
            SynthColumn {
                name: "age".into(),
                kind: SynthColumnKind::Continuous { mean: 35.0, sd: 7.0 },
            },
        ],
        model: ModelSpec::edges().with(TermSpec::NodeMatch { attr: "sex".into(), differential: false }),
        theta: vec![-2.0, 1.0],
        missingness: if missing > 0.0 {
            vec![MissingSpec { column: "living".into(), rate: missing, mechanism: Mechanism::Mcar }]
        } else {
            vec![]
        },
        seed,
        burn_in: None,
    };
    generate(&spec).unwrap()
}

/// Writes `data` under `dir/input` and returns an MPLE-only config writing
/// to `dir/out`.
pub fn config(dir: &Path, data: &SynthOutput) -> RunConfig {
    let paths = write_dataset(&dir.join("input"), &data.graph, &data.observed).unwrap();
    RunConfig {
        edges: paths.edges,
        attributes: paths.attributes,
        schema: paths.schema,
        scope: Default::default(),
        missing_policy: Default::default(),
        families: Family::ALL.to_vec(),
        candidates: ["sex", "living"]
            .iter()
            .map(|a| Candidate { attribute: a.to_string(), reference: None, mix_reference: None })
            .collect(),
        gwdegree: None,
        fit: Default::default(),
        gof: ergm::pipeline::GofSettings { simulations: 20, ..Default::default() },
        imputation: ergm::pipeline::ImputeSettings { trees: 20, ..Default::default() },
        out: dir.join("out"),
        seed: 11,
    }
}

/// Every file of a directory with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// A table whose `target` is a deterministic function of the categorical
/// `x` (levels a, b → lo; c, d → hi), with a noise column and age; `rate`
/// of the target cells are missing completely at random.
pub fn learnable(n: usize, seed: u64, rate: f64) -> (ergm::AttributeTable, ergm::AttributeTable) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
    let noise: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let age: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(18.0..60.0))).collect();
    let target: Vec<Option<&str>> = xs.iter().map(|&x| Some(if x < 2 { "lo" } else { "hi" })).collect();
    let x_labels: Vec<Option<&str>> = xs.iter().map(|&x| Some(["a", "b", "c", "d"][x])).collect();
    let noise_labels: Vec<Option<&str>> = noise.iter().map(|&k| Some(["p", "q", "r"][k])).collect();
    let build = |target: &[Option<&str>]| {
        ergm::AttributeTable::with_columns(
            n,
            vec![
                ergm::Column::from_labels("x", &["a", "b", "c", "d"], &x_labels).unwrap(),
                ergm::Column::from_labels("noise", &["p", "q", "r"], &noise_labels).unwrap(),
                ergm::Column::continuous("age", None, age.clone()),
                ergm::Column::from_labels("target", &["lo", "hi"], target).unwrap(),
            ],
        )
        .unwrap()
    };
    let complete = build(&target);
    let observed: Vec<Option<&str>> =
        target.iter().map(|t| if rng.random::<f64>() < rate { None } else { *t }).collect();
    (complete, build(&observed))
}

/// Share of `rows` where `column` agrees between two tables.
pub fn accuracy(a: &ergm::AttributeTable, b: &ergm::AttributeTable, column: &str, rows: &[usize]) -> f64 {
    let hits = rows.iter().filter(|&&r| a.label(column, r).unwrap() == b.label(column, r).unwrap()).count();
    hits as f64 / rows.len() as f64
}

/// Every observed cell of `before` is bit-identical in `after`.
pub fn observed_cells_unchanged(before: &ergm::AttributeTable, after: &ergm::AttributeTable) -> bool {
    use ergm::ColumnData;
    before.columns().iter().all(|c| {
        let other = &after.column(&c.name).unwrap().data;
        match (&c.data, other) {
            (ColumnData::Categorical { values: a, levels: la }, ColumnData::Categorical { values: b, levels: lb }) => {
                la == lb && a.iter().zip(b).all(|(x, y)| x.is_none() || x == y)
            }
            (ColumnData::Continuous { values: a, .. }, ColumnData::Continuous { values: b, .. }) => a
                .iter()
                .zip(b)
                .all(|(x, y)| x.is_none() || x.map(f64::to_bits) == y.map(f64::to_bits)),
            _ => false,
        }
    })
}
