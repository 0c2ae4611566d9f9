//! Self-checks against exact enumeration on bundled tiny graphs.

use ergm::fit::{fit_mcmle, fit_mple, McmleConfig};
use ergm::oracle::{exact_expected_stats, exact_mle, graph_from_mask, Enumeration};
use ergm::sampler::sample_stats;
use ergm::{AttributeTable, Column, Graph, Model, ModelSpec, SamplerConfig, TermSpec};

fn attrs(n: usize) -> AttributeTable {
    let labels: Vec<Option<&str>> = (0..n).map(|i| Some(["a", "b", "c"][i % 3])).collect();
    AttributeTable::with_columns(n, vec![Column::from_labels("group", &["a", "b", "c"], &labels).unwrap()]).unwrap()
}

fn every_term() -> ModelSpec {
    ModelSpec::edges()
        .with(TermSpec::node_match("group"))
        .with(TermSpec::node_factor("group", "a"))
        .with(TermSpec::node_mix("group", "a", "b"))
        .with(TermSpec::GwDegree { decay: 0.5 })
}

fn match_model() -> ModelSpec {
    ModelSpec::edges().with(TermSpec::NodeMatch { attr: "group".into(), differential: false })
}

/// Fixture graph on five nodes: a triangle with a pendant path.
fn fixture() -> Graph {
    Graph::from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (1, 4)]).unwrap()
}

fn change_statistics() -> Result<String, String> {
    let n = 4;
    let model = Model::new(&every_term(), &attrs(n)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for mask in 0..1u64 << 6 {
        let g = graph_from_mask(n, mask);
        let base = model.statistics(&g);
        for i in 0..n {
            for j in i + 1..n {
                let mut h = g.clone();
                h.toggle(i, j);
                let sign = if g.has_edge(i, j) { -1.0 } else { 1.0 };
                let delta = model.change_stats(&g, i, j);
                for ((a, b), d) in model.statistics(&h).iter().zip(&base).zip(&delta) {
                    worst = worst.max((a - b - sign * d).abs());
                }
            }
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max deviation {worst:.1e} over 64 graphs"))
    } else {
        Err(format!("max deviation {worst:.3e}"))
    }
}

fn gradient() -> Result<String, String> {
    let n = 4;
    let e = Enumeration::new(n, &attrs(n), &match_model()).map_err(|e| e.to_string())?;
    let observed = e.stats[0b101101].clone();
    let theta = [-0.3, 0.4];
    let (_, grad, _) = e.log_likelihood(&observed, &theta).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let (mut up, mut down) = (theta, theta);
        up[k] += h;
        down[k] -= h;
        let fd = (e.log_likelihood(&observed, &up).unwrap().0 - e.log_likelihood(&observed, &down).unwrap().0) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / grad[k].abs().max(1e-8));
    }
    if worst <= 1e-6 {
        Ok(format!("relative error {worst:.1e}"))
    } else {
        Err(format!("relative error {worst:.3e}"))
    }
}

fn mple_density() -> Result<String, String> {
    let g = fixture();
    let fit = fit_mple(&g, &attrs(5), &ModelSpec::edges()).map_err(|e| e.to_string())?;
    let d = g.edge_count() as f64 / g.dyad_count() as f64;
    let err = (fit.theta[0] - (d / (1.0 - d)).ln()).abs();
    if err <= 1e-10 {
        Ok(format!("|θ - logit(density)| = {err:.1e}"))
    } else {
        Err(format!("|θ - logit(density)| = {err:.3e}"))
    }
}

fn sampler_moments() -> Result<String, String> {
    let theta = [-0.5, 0.8];
    let a = attrs(5);
    let exact = exact_expected_stats(5, &a, &match_model(), &theta).map_err(|e| e.to_string())?;
    let model = Model::new(&match_model(), &a).map_err(|e| e.to_string())?;
    let cfg = SamplerConfig { burn_in: 1000, thin: 10, sample_count: 20_000, seed: 1 };
    let run = sample_stats(&Graph::empty(5), &theta, &model, &cfg).map_err(|e| e.to_string())?;
    let m = run.stats.len() as f64;
    let mut worst: f64 = 0.0;
    for (k, e) in exact.iter().enumerate() {
        let xs: Vec<f64> = run.stats.iter().map(|s| s[k]).collect();
        let mean = xs.iter().sum::<f64>() / m;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        // thinned draws are close to independent; allow for residual correlation
        let se = (var / m).sqrt() * 2.0;
        worst = worst.max((mean - e).abs() / se);
    }
    if worst <= 3.0 {
        Ok(format!("largest deviation {worst:.2} SE"))
    } else {
        Err(format!("largest deviation {worst:.2} SE"))
    }
}

fn mcmle_exact() -> Result<String, String> {
    let g = fixture();
    let a = attrs(5);
    let exact = exact_mle(&g, &a, &match_model()).map_err(|e| e.to_string())?;
    let cfg = McmleConfig::new(SamplerConfig { burn_in: 1000, thin: 25, sample_count: 25_000, seed: 2 });
    let fit = fit_mcmle(&g, &a, &match_model(), &cfg, None).map_err(|e| e.to_string())?;
    let err = fit.theta.iter().zip(&exact).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if err <= 1e-2 {
        Ok(format!("max |θ̂ - θ*| = {err:.1e}"))
    } else {
        Err(format!("max |θ̂ - θ*| = {err:.3e}"))
    }
}

/// Runs every check, printing one line each; true when all pass.
pub fn run() -> bool {
    let checks: [(&str, fn() -> Result<String, String>); 5] = [
        ("change statistics, n = 4, every term", change_statistics),
        ("log-likelihood gradient vs finite differences", gradient),
        ("edges-only MPLE equals logit(density)", mple_density),
        ("sampler means vs exact expectations, n = 5", sampler_moments),
        ("MC-MLE vs exact MLE, n = 5", mcmle_exact),
    ];
    let mut ok = true;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                ok = false;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    ok
}
