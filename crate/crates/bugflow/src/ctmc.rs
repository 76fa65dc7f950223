//! The dual-model continuous-time Markov chain for resolution times.
//!
//! Each observed workflow transition (from, to) becomes a chain node with an
//! exponential sojourn whose rate is the reciprocal of the observed mean
//! sojourn. A node (i, j) routes to node (j, k) with the empirical branching
//! probability n_jk / sum_x n_jx; nodes entering the terminal state route to
//! an absorbing destination. The bug's lifecycle starts according to the
//! empirical distribution over the nodes leaving the initial state, so no
//! zero-sojourn source state is needed. The transient distribution of the
//! chain is solved by uniformization, and the probability mass in the
//! destination at time t is the resolution-time CDF.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::WorkflowSpec;
use crate::stats::DurationStat;

/// One chain node: a workflow transition with its exponential service rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNode {
    pub from_state: String,
    pub to_state: String,
    pub rate_per_hour: f64,
}

/// The assembled chain. `routing[i]` lists (target, probability) pairs where
/// a target equal to `dst_index()` is the absorbing destination.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcModel {
    pub nodes: Vec<DualNode>,
    routing: Vec<Vec<(usize, f64)>>,
    entry: Vec<f64>,
}

/// Dense generator matrix over the chain nodes plus the absorbing
/// destination (the last row, identically zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub dim: usize,
    rows: Vec<Vec<f64>>,
}

/// State probabilities on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientSolution {
    pub grid_hours: Vec<f64>,
    /// One stochastic vector of length `Generator::dim` per grid point.
    pub probabilities: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no transition statistics supplied")]
    EmptyStats,
    #[error("transition {from:?} -> {to:?} has invalid mean sojourn {mean}")]
    InvalidMeanSojourn { from: String, to: String, mean: f64 },
    #[error("transition {from:?} -> {to:?} leaves the workflow state set")]
    UnknownState { from: String, to: String },
    #[error("no transitions leave the initial state {initial:?}")]
    NoEntryNodes { initial: String },
    #[error("destination is unreachable from node {node:?}")]
    DstUnreachable { node: String },
    #[error("node {node:?} is unreachable from the source")]
    UnreachableFromSource { node: String },
    #[error("routing row of node {node:?} sums to {sum}, expected 1")]
    RoutingRowSum { node: String, sum: f64 },
    #[error("generator row {row} sums to {sum}, expected 0")]
    GeneratorRowSum { row: usize, sum: f64 },
    #[error("initial probability vector sums to {sum}, expected 1")]
    InitSum { sum: f64 },
    #[error("initial vector has length {got}, generator dimension is {want}")]
    InitLength { got: usize, want: usize },
    #[error("time grid must be ascending and non-negative")]
    BadGrid,
    #[error("cannot parse model file: {0}")]
    Parse(String),
}

const ROUTING_TOL: f64 = 1e-12;

impl CtmcModel {
    /// Index of the absorbing destination in routing targets and generator
    /// rows.
    pub fn dst_index(&self) -> usize {
        self.nodes.len()
    }

    /// Entry distribution over nodes leaving the initial state.
    pub fn entry_distribution(&self) -> &[f64] {
        &self.entry
    }

    /// Routing probability from node `i` to node (or destination) `j`.
    pub fn routing_prob(&self, i: usize, j: usize) -> f64 {
        self.routing[i]
            .iter()
            .find(|(target, _)| *target == j)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    fn node_label(&self, i: usize) -> String {
        let node = &self.nodes[i];
        format!("{} -> {}", node.from_state, node.to_state)
    }

    /// Checks row sums, the entry distribution, and both reachability
    /// directions (source to every node, every node to the destination).
    pub fn validate(&self) -> Result<(), ModelError> {
        let m = self.nodes.len();
        if m == 0 {
            return Err(ModelError::EmptyStats);
        }
        for (i, row) in self.routing.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > ROUTING_TOL {
                return Err(ModelError::RoutingRowSum {
                    node: self.node_label(i),
                    sum,
                });
            }
            if row.iter().any(|&(_, p)| !(0.0..=1.0 + ROUTING_TOL).contains(&p)) {
                return Err(ModelError::RoutingRowSum {
                    node: self.node_label(i),
                    sum,
                });
            }
        }
        let entry_sum: f64 = self.entry.iter().sum();
        if (entry_sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::InitSum { sum: entry_sum });
        }
        // Forward reachability from the entry distribution.
        let mut seen = vec![false; m];
        let mut stack: Vec<usize> = (0..m).filter(|&i| self.entry[i] > 0.0).collect();
        for &i in &stack {
            seen[i] = true;
        }
        while let Some(i) = stack.pop() {
            for &(j, p) in &self.routing[i] {
                if p > 0.0 && j < m && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(ModelError::UnreachableFromSource {
                node: self.node_label(i),
            });
        }
        // Backward reachability of the destination.
        let mut reaches = vec![false; m];
        let mut frontier: Vec<usize> = (0..m)
            .filter(|&i| self.routing[i].iter().any(|&(j, p)| j == m && p > 0.0))
            .collect();
        for &i in &frontier {
            reaches[i] = true;
        }
        while let Some(j) = frontier.pop() {
            for i in 0..m {
                if !reaches[i]
                    && self.routing[i].iter().any(|&(k, p)| k == j && p > 0.0)
                {
                    reaches[i] = true;
                    frontier.push(i);
                }
            }
        }
        if let Some(i) = reaches.iter().position(|&r| !r) {
            return Err(ModelError::DstUnreachable {
                node: self.node_label(i),
            });
        }
        Ok(())
    }
}

/// Builds the dual model from per-transition statistics.
///
/// Rates are 1 / mean sojourn; routing and entry probabilities are the
/// transition counts normalised per source state.
pub fn build_dual_model(
    stats: &BTreeMap<(String, String), DurationStat>,
    spec: &WorkflowSpec,
) -> Result<CtmcModel, ModelError> {
    if stats.is_empty() {
        return Err(ModelError::EmptyStats);
    }
    let mut nodes = Vec::with_capacity(stats.len());
    let mut index: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for ((from, to), stat) in stats {
        if !spec.contains_state(from) || !spec.contains_state(to) {
            return Err(ModelError::UnknownState {
                from: from.clone(),
                to: to.clone(),
            });
        }
        if !stat.mean_hours.is_finite() || stat.mean_hours <= 0.0 {
            return Err(ModelError::InvalidMeanSojourn {
                from: from.clone(),
                to: to.clone(),
                mean: stat.mean_hours,
            });
        }
        index.insert((from.as_str(), to.as_str()), nodes.len());
        nodes.push(DualNode {
            from_state: from.clone(),
            to_state: to.clone(),
            rate_per_hour: 1.0 / stat.mean_hours,
        });
    }
    // Outgoing counts per state, for routing and entry normalisation.
    let mut out_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for ((from, _), stat) in stats {
        *out_counts.entry(from.as_str()).or_default() += stat.count;
    }
    let dst = nodes.len();
    let mut routing = Vec::with_capacity(nodes.len());
    for node in &nodes {
        if node.to_state == spec.terminal {
            routing.push(vec![(dst, 1.0)]);
            continue;
        }
        let total = out_counts.get(node.to_state.as_str()).copied().unwrap_or(0);
        if total == 0 {
            return Err(ModelError::DstUnreachable {
                node: format!("{} -> {}", node.from_state, node.to_state),
            });
        }
        let row: Vec<(usize, f64)> = stats
            .iter()
            .filter(|((from, _), _)| *from == node.to_state)
            .map(|((from, to), stat)| {
                (
                    index[&(from.as_str(), to.as_str())],
                    stat.count as f64 / total as f64,
                )
            })
            .collect();
        routing.push(row);
    }
    let entry_total: usize = stats
        .iter()
        .filter(|((from, _), _)| *from == spec.initial)
        .map(|(_, stat)| stat.count)
        .sum();
    if entry_total == 0 {
        return Err(ModelError::NoEntryNodes {
            initial: spec.initial.clone(),
        });
    }
    let mut entry = vec![0.0; nodes.len()];
    for ((from, to), stat) in stats {
        if *from == spec.initial {
            entry[index[&(from.as_str(), to.as_str())]] = stat.count as f64 / entry_total as f64;
        }
    }
    let model = CtmcModel {
        nodes,
        routing,
        entry,
    };
    model.validate()?;
    Ok(model)
}

/// Assembles the generator: off-diagonal `Q[i][j] = rate_i * r_ij`, diagonal
/// the negated row sum, destination row identically zero.
pub fn build_generator(model: &CtmcModel) -> Result<Generator, ModelError> {
    let m = model.nodes.len();
    let dim = m + 1;
    let mut rows = vec![vec![0.0; dim]; dim];
    for (i, node) in model.nodes.iter().enumerate() {
        let mut off_sum = 0.0;
        for &(j, p) in &model.routing[i] {
            let q = node.rate_per_hour * p;
            rows[i][j] += q;
            off_sum += q;
        }
        rows[i][i] = -off_sum;
    }
    for (i, row) in rows.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        let scale = row.iter().map(|q| q.abs()).fold(1.0, f64::max);
        if sum.abs() > 1e-12 * scale {
            return Err(ModelError::GeneratorRowSum { row: i, sum });
        }
    }
    Ok(Generator { dim, rows })
}

impl Generator {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Uniformization rate: 1.1 times the largest diagonal magnitude.
    fn uniformization_rate(&self) -> f64 {
        1.1 * self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| row[i].abs())
            .fold(0.0, f64::max)
    }

    fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (j, out_j) in out.iter_mut().enumerate() {
                *out_j += vi * self.rows[i][j];
            }
        }
        out
    }
}

/// Truncation tolerance of the uniformization series: iteration stops once
/// the remaining Poisson tail mass is below this.
const POISSON_TAIL: f64 = 1e-12;
/// Per-step cap on the Poisson mean; longer horizons are split so the weight
/// recursion never underflows.
const MAX_POISSON_MEAN: f64 = 600.0;

fn uniformized_step(q: &Generator, v: &[f64], lambda: f64, dt_hours: f64) -> Vec<f64> {
    let mean = lambda * dt_hours;
    let mut weight = (-mean).exp();
    let mut cumulative = weight;
    let mut term: Vec<f64> = v.to_vec();
    let mut out: Vec<f64> = term.iter().map(|x| x * weight).collect();
    let mut k = 1.0f64;
    while 1.0 - cumulative > POISSON_TAIL {
        // term <- term * M where M = I + Q / lambda.
        let qv = q.vec_mul(&term);
        for (t, dq) in term.iter_mut().zip(qv) {
            *t += dq / lambda;
        }
        weight *= mean / k;
        cumulative += weight;
        for (o, t) in out.iter_mut().zip(&term) {
            *o += weight * t;
        }
        k += 1.0;
    }
    out
}

/// Transient solution of `dP/dt = P * Q` by uniformization with certified
/// series truncation.
pub fn transient_solve(
    q: &Generator,
    init: &[f64],
    grid_hours: &[f64],
) -> Result<TransientSolution, ModelError> {
    if init.len() != q.dim {
        return Err(ModelError::InitLength {
            got: init.len(),
            want: q.dim,
        });
    }
    let init_sum: f64 = init.iter().sum();
    if (init_sum - 1.0).abs() > 1e-9 {
        return Err(ModelError::InitSum { sum: init_sum });
    }
    if grid_hours.iter().any(|t| !t.is_finite() || *t < 0.0)
        || grid_hours.windows(2).any(|w| w[0] > w[1])
    {
        return Err(ModelError::BadGrid);
    }
    let lambda = q.uniformization_rate();
    let mut probabilities = Vec::with_capacity(grid_hours.len());
    if lambda == 0.0 {
        for _ in grid_hours {
            probabilities.push(init.to_vec());
        }
        return Ok(TransientSolution {
            grid_hours: grid_hours.to_vec(),
            probabilities,
        });
    }
    for &t in grid_hours {
        let splits = (lambda * t / MAX_POISSON_MEAN).ceil().max(1.0);
        let dt = t / splits;
        let mut v = init.to_vec();
        for _ in 0..splits as usize {
            v = uniformized_step(q, &v, lambda, dt);
        }
        probabilities.push(v);
    }
    Ok(TransientSolution {
        grid_hours: grid_hours.to_vec(),
        probabilities,
    })
}

/// Analytic resolution-time CDF: destination-state probability over the grid
/// when the chain starts from the entry distribution.
pub fn resolution_cdf(
    model: &CtmcModel,
    grid_hours: &[f64],
) -> Result<Vec<(f64, f64)>, ModelError> {
    let q = build_generator(model)?;
    let mut init = model.entry.clone();
    init.push(0.0);
    let solution = transient_solve(&q, &init, grid_hours)?;
    let dst = model.dst_index();
    Ok(solution
        .grid_hours
        .iter()
        .zip(&solution.probabilities)
        .map(|(&t, p)| (t, p[dst]))
        .collect())
}

/// Mean of the distribution by trapezoidal quadrature of `1 - F` over the
/// CDF's own grid.
pub fn cdf_mean(cdf: &[(f64, f64)]) -> f64 {
    let mut mean = 0.0;
    for pair in cdf.windows(2) {
        let (t0, f0) = pair[0];
        let (t1, f1) = pair[1];
        mean += (t1 - t0) * ((1.0 - f0) + (1.0 - f1)) / 2.0;
    }
    mean
}

fn sample_categorical<R: Rng>(rng: &mut R, weights: &[(usize, f64)]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(target, p) in weights {
        acc += p;
        if u < acc {
            return target;
        }
    }
    weights.last().map(|&(target, _)| target).unwrap()
}

fn sample_entry<R: Rng>(rng: &mut R, entry: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in entry.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    entry.len() - 1
}

/// Empirical resolution-time CDF from simulated lifecycles. Each sample draws
/// an entry node, exponential sojourns, and routing choices until absorption.
/// Sample `i` uses stream `i` of the seeded generator, so the result is
/// deterministic for a fixed seed regardless of evaluation order.
pub fn monte_carlo_cdf(
    model: &CtmcModel,
    n_samples: usize,
    seed: u64,
    grid_hours: &[f64],
) -> Vec<(f64, f64)> {
    let dst = model.dst_index();
    let mut times = Vec::with_capacity(n_samples);
    for sample in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample as u64);
        let mut node = sample_entry(&mut rng, &model.entry);
        let mut t = 0.0f64;
        loop {
            let rate = model.nodes[node].rate_per_hour;
            let exp = rand_distr::Exp::new(rate).expect("positive rate");
            t += rng.sample(exp);
            let next = sample_categorical(&mut rng, &model.routing[node]);
            if next == dst {
                break;
            }
            node = next;
        }
        times.push(t);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid_hours
        .iter()
        .map(|&t| {
            let below = times.partition_point(|&x| x <= t);
            (t, below as f64 / n_samples as f64)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    nodes: Vec<DualNode>,
    routing: Vec<(usize, usize, f64)>,
    entry: Vec<f64>,
}

/// Serialises the model (nodes with rates, routing triplets, entry
/// distribution) so CDFs can be recomputed without the corpus.
pub fn model_to_json(model: &CtmcModel) -> String {
    let mut triplets = Vec::new();
    for (i, row) in model.routing.iter().enumerate() {
        for &(j, p) in row {
            triplets.push((i, j, p));
        }
    }
    serde_json::to_string_pretty(&ModelFile {
        version: 1,
        nodes: model.nodes.clone(),
        routing: triplets,
        entry: model.entry.clone(),
    })
    .expect("model serialises")
}

pub fn model_from_json(text: &str) -> Result<CtmcModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    if file.version != 1 {
        return Err(ModelError::Parse(format!(
            "unsupported model version {}",
            file.version
        )));
    }
    let m = file.nodes.len();
    let mut routing = vec![Vec::new(); m];
    for (i, j, p) in file.routing {
        if i >= m || j > m {
            return Err(ModelError::Parse(format!(
                "routing entry ({i}, {j}) out of range for {m} nodes"
            )));
        }
        routing[i].push((j, p));
    }
    if file.entry.len() != m {
        return Err(ModelError::Parse(format!(
            "entry distribution has {} entries for {m} nodes",
            file.entry.len()
        )));
    }
    let model = CtmcModel {
        nodes: file.nodes,
        routing,
        entry: file.entry,
    };
    model.validate()?;
    Ok(model)
}
