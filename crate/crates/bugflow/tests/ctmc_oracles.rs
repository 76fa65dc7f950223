//! Cross-checks of the analytic chain against independent routes: an
//! element-wise generator recomputation, the Monte Carlo simulator, and
//! quadrature of the CDF tail.

use std::collections::BTreeMap;

use bugflow::ctmc::{
    build_dual_model, build_generator, cdf_mean, monte_carlo_cdf, resolution_cdf,
};
use bugflow::ingest::WorkflowSpec;
use bugflow::stats::DurationStat;

/// The ONAP priority-1 transition statistics used throughout: (from, to,
/// mean sojourn hours, count).
pub const ONAP_P1_STATS: [(&str, &str, f64, usize); 14] = [
    ("Open", "Closed", 472.91, 143),
    ("Open", "In Progress", 159.01, 545),
    ("Open", "Delivered", 361.15, 85),
    ("Delivered", "Closed", 73.98, 618),
    ("Delivered", "Reopened", 77.86, 48),
    ("Reopened", "Delivered", 64.99, 8),
    ("Reopened", "In Progress", 27.82, 24),
    ("Reopened", "Closed", 30.65, 6),
    ("In Progress", "Submitted", 111.48, 311),
    ("In Progress", "Open", 342.76, 21),
    ("In Progress", "Closed", 261.46, 143),
    ("In Progress", "Delivered", 37.31, 31),
    ("Submitted", "Delivered", 80.93, 278),
    ("Submitted", "In Progress", 170.23, 26),
];

fn onap_stats() -> BTreeMap<(String, String), DurationStat> {
    ONAP_P1_STATS
        .iter()
        .map(|&(from, to, mean, count)| {
            (
                (from.to_string(), to.to_string()),
                DurationStat {
                    mean_hours: mean,
                    median_hours: mean / 2.0,
                    count,
                },
            )
        })
        .collect()
}

#[test]
fn fourteen_nodes_with_count_weighted_entry() {
    let spec = WorkflowSpec::builtin("onap").unwrap();
    let model = build_dual_model(&onap_stats(), &spec).unwrap();
    assert_eq!(model.nodes.len(), 14);
    let entry = model.entry_distribution();
    let mut by_target: BTreeMap<&str, f64> = BTreeMap::new();
    for (node, &p) in model.nodes.iter().zip(entry) {
        if p > 0.0 {
            assert_eq!(node.from_state, "Open");
            by_target.insert(node.to_state.as_str(), p);
        }
    }
    let total = 143.0 + 545.0 + 85.0;
    assert!((by_target["Closed"] - 143.0 / total).abs() < 1e-12);
    assert!((by_target["In Progress"] - 545.0 / total).abs() < 1e-12);
    assert!((by_target["Delivered"] - 85.0 / total).abs() < 1e-12);
    let rate = model
        .nodes
        .iter()
        .find(|n| n.from_state == "Open" && n.to_state == "In Progress")
        .unwrap()
        .rate_per_hour;
    assert!((rate - 1.0 / 159.01).abs() < 1e-15);
}

#[test]
fn generator_entries_match_elementwise_recomputation() {
    let spec = WorkflowSpec::builtin("onap").unwrap();
    let stats = onap_stats();
    let model = build_dual_model(&stats, &spec).unwrap();
    let q = build_generator(&model).unwrap();
    let dst = model.dst_index();

    // Independent recomputation of every off-diagonal entry from the raw
    // counts and means.
    let out_count = |state: &str| -> f64 {
        ONAP_P1_STATS
            .iter()
            .filter(|(from, ..)| *from == state)
            .map(|&(_, _, _, n)| n as f64)
            .sum()
    };
    for (i, node_i) in model.nodes.iter().enumerate() {
        for j in 0..=dst {
            if i == j {
                continue;
            }
            let expected = if j == dst {
                if node_i.to_state == "Closed" {
                    1.0 / node_i.rate_per_hour.recip()
                } else {
                    0.0
                }
            } else {
                let node_j = &model.nodes[j];
                if node_j.from_state == node_i.to_state && node_i.to_state != "Closed" {
                    let n_jk = ONAP_P1_STATS
                        .iter()
                        .find(|(from, to, ..)| {
                            *from == node_j.from_state && *to == node_j.to_state
                        })
                        .map(|&(_, _, _, n)| n as f64)
                        .unwrap();
                    (1.0 / node_i.rate_per_hour.recip()) * n_jk / out_count(&node_i.to_state)
                } else {
                    0.0
                }
            };
            assert!(
                (q.row(i)[j] - expected).abs() < 1e-12,
                "Q[{i}][{j}] = {} expected {expected}",
                q.row(i)[j]
            );
        }
    }
}

#[test]
fn analytic_cdf_tracks_monte_carlo() {
    let spec = WorkflowSpec::builtin("onap").unwrap();
    let model = build_dual_model(&onap_stats(), &spec).unwrap();
    let grid: Vec<f64> = (0..=60).map(|k| k as f64 * 50.0).collect();
    let analytic = resolution_cdf(&model, &grid).unwrap();
    let empirical = monte_carlo_cdf(&model, 20_000, 424_242, &grid);
    let sup: f64 = analytic
        .iter()
        .zip(&empirical)
        .map(|(&(_, a), &(_, e))| (a - e).abs())
        .fold(0.0, f64::max);
    assert!(sup <= 0.02, "sup-norm {sup}");
    assert_eq!(analytic[0].1, 0.0);
    let last = analytic.last().unwrap().1;
    assert!(last > 0.9 && last <= 1.0 + 1e-12);
    assert!(analytic.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-12));
}

#[test]
fn quadrature_mean_tracks_monte_carlo_mean() {
    let spec = WorkflowSpec::builtin("onap").unwrap();
    let model = build_dual_model(&onap_stats(), &spec).unwrap();
    let grid: Vec<f64> = (0..=6_000).map(|k| k as f64 * 5.0).collect();
    let analytic_mean = cdf_mean(&resolution_cdf(&model, &grid).unwrap());

    let n = 20_000;
    let empirical = monte_carlo_cdf(&model, n, 7, &grid);
    // Sample mean from the empirical CDF increments over the same support.
    let mut sample_mean = 0.0;
    for pair in empirical.windows(2) {
        let (t0, f0) = pair[0];
        let (t1, f1) = pair[1];
        sample_mean += (f1 - f0) * (t0 + t1) / 2.0;
    }
    let rel = (analytic_mean - sample_mean).abs() / analytic_mean;
    assert!(rel < 0.02, "analytic {analytic_mean}, sampled {sample_mean}");
}
