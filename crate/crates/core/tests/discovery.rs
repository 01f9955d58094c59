//! LiNGAM on the benchmark model with uniform noise.

use causalbench::discovery::{compare_graphs, lingam_fit, var_lingam_fit, LingamConfig};
use causalbench::graph::WeightedDag;
use causalbench::scm::{model_a, sample, NoiseDist};
use causalbench::PanelDataset;

fn uniform_a() -> causalbench::scm::ScmSpec {
    model_a(NoiseDist::uniform(-1.0, 1.0)).unwrap()
}

#[test]
fn recovers_model_a_graph() {
    let spec = uniform_a();
    let truth = WeightedDag::from_scm(&spec).unwrap();
    let data = sample(&spec, 10_000, 1).unwrap();
    let r = lingam_fit(&data, LingamConfig::default()).unwrap();
    let c = compare_graphs(&r.pruned_graph, &truth).unwrap();
    assert!(c.is_exact(), "\n{}", c.to_text());
    for e in &c.true_edges {
        assert!((e.found_weight - e.true_weight).abs() < 0.1, "\n{}", c.to_text());
    }
    let order = r.causal_order_names();
    assert_eq!(order[4], "y");
}

#[test]
fn ordered_b_matrix_is_strictly_lower_triangular() {
    let data = sample(&uniform_a(), 10_000, 2).unwrap();
    let cfg = LingamConfig::default();
    let r = lingam_fit(&data, cfg).unwrap();
    let o = &r.causal_order;
    for a in 0..o.len() {
        for b in a..o.len() {
            assert!(r.b_matrix[[o[a], o[b]]].abs() < cfg.prune_threshold);
        }
    }
    assert!(r.pruned_graph.topological_order().is_ok());
}

#[test]
fn structural_equation_reconstructs_data() {
    let data = sample(&uniform_a(), 5000, 3).unwrap();
    let r = lingam_fit(&data, LingamConfig::default()).unwrap();
    let recon = data.rows().dot(&r.b_matrix.t()) + &r.residuals;
    for (a, b) in recon.iter().zip(data.rows().iter()) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn column_scaling_keeps_edge_set() {
    let data = sample(&uniform_a(), 10_000, 4).unwrap();
    let base = lingam_fit(&data, LingamConfig::default()).unwrap();
    let scales = [1.0, 1.0, 1.0, 3.0, 1.0];
    let mut rows = data.rows().clone();
    for (j, s) in scales.iter().enumerate() {
        rows.column_mut(j).mapv_inplace(|v| v * s);
    }
    let scaled = PanelDataset::new(data.columns().to_vec(), rows, true).unwrap();
    let r = lingam_fit(&scaled, LingamConfig::default()).unwrap();
    let edges = |g: &WeightedDag| {
        let mut e: Vec<(String, String)> = g.edges().iter().map(|e| (e.from.clone(), e.to.clone())).collect();
        e.sort();
        e
    };
    assert_eq!(edges(&base.pruned_graph), edges(&r.pruned_graph));
    // z1 scaled by 3 divides its effect on x1 by 3
    let w0 = base.pruned_graph.weight("z1", "x1").unwrap();
    let w1 = r.pruned_graph.weight("z1", "x1").unwrap();
    assert!((w1 * 3.0 - w0).abs() < 1e-6);
}

#[test]
fn var_lingam_finds_contemporaneous_and_lagged_structure() {
    let spec = uniform_a();
    let truth = WeightedDag::from_scm(&spec).unwrap();
    let data = sample(&spec, 10_000, 5).unwrap();
    let r = var_lingam_fit(&data, LingamConfig::default()).unwrap();
    let c = compare_graphs(&r.contemporaneous.pruned_graph, &truth).unwrap();
    assert!(c.is_exact(), "\n{}", c.to_text());
    assert_eq!(r.lagged_edges.len(), 1, "{:?}", r.lagged_edges);
    let e = &r.lagged_edges[0];
    assert_eq!((e.from.as_str(), e.to.as_str()), ("y", "y"));
    assert!((e.weight - 0.5).abs() < 0.05, "{}", e.weight);
}

#[test]
fn deterministic_per_seed() {
    let data = sample(&uniform_a(), 3000, 6).unwrap();
    let a = lingam_fit(&data, LingamConfig::default()).unwrap();
    let b = lingam_fit(&data, LingamConfig::default()).unwrap();
    assert_eq!(a.b_matrix, b.b_matrix);
    assert_eq!(a.causal_order, b.causal_order);
}
