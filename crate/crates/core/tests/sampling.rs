use ergm::oracle::exact_expected_stats;
use ergm::sampler::{sample, sample_chains, sample_stats, SamplerError};
use ergm::synth::{generate, Mechanism, MissingSpec, SynthColumn, SynthColumnKind, SynthSpec};
use ergm::{AttributeTable, Column, Graph, Model, ModelSpec, SamplerConfig, TermSpec};

fn pairs(n: usize) -> AttributeTable {
    let labels: Vec<Option<&str>> = (0..n).map(|i| Some(if i < n / 2 { "x" } else { "y" })).collect();
    AttributeTable::with_columns(n, vec![Column::from_labels("k", &["x", "y"], &labels).unwrap()]).unwrap()
}

#[test]
fn single_proposal() {
    let model = Model::new(&ModelSpec::edges(), &pairs(6)).unwrap();
    let g0 = Graph::from_edges(6, [(0, 1), (2, 3)]).unwrap();
    for seed in 0..20 {
        let cfg = SamplerConfig { burn_in: 0, thin: 1, sample_count: 1, seed };
        let run = sample(&g0, &[0.0], &model, &cfg).unwrap();
        let g1 = &run.graphs[0];
        let changed = (0..6)
            .flat_map(|i| (i + 1..6).map(move |j| (i, j)))
            .filter(|&(i, j)| g0.has_edge(i, j) != g1.has_edge(i, j))
            .count();
        // at θ = 0 every toggle is accepted
        assert_eq!(changed, 1);
    }
}

#[test]
fn zero_theta_density_is_half() {
    let model = Model::new(&ModelSpec::edges(), &pairs(20)).unwrap();
    let run = sample_stats(&Graph::empty(20), &[0.0], &model, &SamplerConfig::for_nodes(20, 500, 4)).unwrap();
    let mean = run.stats.iter().map(|s| s[0]).sum::<f64>() / 500.0 / 190.0;
    // binomial SD of the density is sqrt(0.25 / 190) ≈ 0.036 per draw
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
}

#[test]
fn incremental_statistics_do_not_drift() {
    let spec = ModelSpec::edges()
        .with(TermSpec::node_match("k"))
        .with(TermSpec::GwDegree { decay: 0.4 });
    let model = Model::new(&spec, &pairs(15)).unwrap();
    let run = sample(&Graph::empty(15), &[-1.0, 0.5, 0.5, 0.3], &model, &SamplerConfig::for_nodes(15, 50, 1)).unwrap();
    assert!(run.max_drift < 1e-9);
    for (g, s) in run.graphs.iter().zip(&run.stats) {
        let full = model.statistics(g);
        for (a, b) in s.iter().zip(&full) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn chains_are_reproducible_and_distinct() {
    let model = Model::new(&ModelSpec::edges(), &pairs(10)).unwrap();
    let cfg = SamplerConfig::for_nodes(10, 50, 7);
    let a = sample_chains(&Graph::empty(10), &[-0.5], &model, &cfg, 3).unwrap();
    let b = sample_chains(&Graph::empty(10), &[-0.5], &model, &cfg, 3).unwrap();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.stats, y.stats);
    }
    assert_ne!(a[0].stats, a[1].stats);
}

#[test]
fn invalid_sampler_configs() {
    let model = Model::new(&ModelSpec::edges(), &pairs(4)).unwrap();
    let g = Graph::empty(4);
    let thin0 = SamplerConfig { burn_in: 0, thin: 0, sample_count: 1, seed: 0 };
    assert_eq!(sample(&g, &[0.0], &model, &thin0).unwrap_err(), SamplerError::ZeroThin);
    let none = SamplerConfig { burn_in: 0, thin: 1, sample_count: 0, seed: 0 };
    assert_eq!(sample(&g, &[0.0], &model, &none).unwrap_err(), SamplerError::ZeroSamples);
    assert!(matches!(sample(&g, &[0.0, 1.0], &model, &SamplerConfig::for_nodes(4, 1, 0)), Err(SamplerError::DimensionMismatch { .. })));
}

#[test]
fn matches_exact_expectation_with_gwdegree() {
    let spec = ModelSpec::edges().with(TermSpec::GwDegree { decay: 0.5 });
    let attrs = pairs(5);
    let theta = [-0.4, 0.6];
    let exact = exact_expected_stats(5, &attrs, &spec, &theta).unwrap();
    let model = Model::new(&spec, &attrs).unwrap();
    let runs = sample_chains(&Graph::empty(5), &theta, &model, &SamplerConfig { burn_in: 500, thin: 20, sample_count: 5000, seed: 3 }, 4).unwrap();
    let stats: Vec<&Vec<f64>> = runs.iter().flat_map(|r| &r.stats).collect();
    let m = stats.len() as f64;
    for k in 0..2 {
        let mean = stats.iter().map(|s| s[k]).sum::<f64>() / m;
        let var = stats.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let se = (var / m).sqrt();
        assert!((mean - exact[k]).abs() < 4.0 * se, "stat {k}: {mean} vs {}", exact[k]);
    }
}

fn sex_spec(n: usize, seed: u64, rate: f64) -> SynthSpec {
    SynthSpec {
        n,
        columns: vec![
            SynthColumn {
                name: "sex".into(),
                kind: SynthColumnKind::Categorical {
                    levels: vec!["Male".into(), "Female".into()],
                    probabilities: vec![0.79, 0.21],
                },
            },
            SynthColumn { name: "age".into(), kind: SynthColumnKind::Continuous { mean: 35.0, sd: 7.0 } },
        ],
        model: ModelSpec::edges(),
        theta: vec![-3.0],
        missingness: vec![MissingSpec { column: "sex".into(), rate, mechanism: Mechanism::Mcar }],
        seed,
        burn_in: Some(1000),
    }
}

#[test]
fn synthetic_marginal_matches_target() {
    let n = 356;
    let out = generate(&sex_spec(n, 21, 0.0)).unwrap();
    let (_, values) = out.complete.categorical("sex").unwrap();
    let male = values.iter().filter(|v| **v == Some(0)).count() as f64 / n as f64;
    let se = (0.79 * 0.21 / n as f64).sqrt();
    assert!((male - 0.79).abs() < 3.0 * se, "{male}");
}

#[test]
fn mcar_missingness_is_independent_of_value() {
    // 2x2 chi-square of (sex, missing) per seed at α = 0.01
    let critical = 6.634897;
    let mut rejections = 0;
    for seed in 0..100 {
        let out = generate(&sex_spec(300, seed, 0.2)).unwrap();
        let (_, truth) = out.complete.categorical("sex").unwrap();
        let mut table = [[0.0f64; 2]; 2];
        for (r, v) in truth.iter().enumerate() {
            table[v.unwrap() as usize][out.mask.is_missing("sex", r) as usize] += 1.0;
        }
        let total: f64 = table.iter().flatten().sum();
        let mut chi = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let e = (table[a][0] + table[a][1]) * (table[0][b] + table[1][b]) / total;
                chi += (table[a][b] - e).powi(2) / e;
            }
        }
        rejections += (chi > critical) as usize;
    }
    // 1% false rejections expected; 6 or more has probability below 0.001
    assert!(rejections <= 5, "{rejections} rejections");
}

#[test]
fn mar_missingness_follows_covariate() {
    let mut spec = sex_spec(2000, 4, 0.2);
    spec.missingness[0].mechanism = Mechanism::Mar { covariate: "age".into(), slope: 2.0 };
    let out = generate(&spec).unwrap();
    let ages = out.complete.continuous("age").unwrap();
    let (mut miss, mut obs) = (Vec::new(), Vec::new());
    for (r, a) in ages.iter().enumerate() {
        if out.mask.is_missing("sex", r) { miss.push(a.unwrap()) } else { obs.push(a.unwrap()) }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&miss) > mean(&obs) + 3.0);
}
