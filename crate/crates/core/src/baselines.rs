//! Classical baselines: Goemans-Williamson and thin wrappers around the
//! exhaustive oracle and the Random* sampler.
//!
//! The MaxCut SDP `max sum w_jk (1 - X_jk)/2, X psd, diag(X) = 1` is solved in
//! factorized form `X = V V^T` with unit rows of width `k`, by projected
//! gradient ascent on the product of spheres. Rounding draws Gaussian
//! hyperplanes and colors each node by the side its vector falls on.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{self, cut_value, Color, Graph, Partition};
use crate::parallel::par_map;
use crate::seeds::{self, tag};

/// GW worst-case approximation ratio.
pub const GW_RATIO: f64 = 0.87856;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// `ceil(sqrt(2N)) + 1`.
pub fn default_rank(num_nodes: usize) -> usize {
    (2.0 * num_nodes as f64).sqrt().ceil() as usize + 1
}

/// Unit-norm row vectors, one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    dim: usize,
    data: Vec<f64>,
}

impl Embedding {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding rows must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::SizeMismatch { expected: dim, actual: r.len() });
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidConfig(format!("row {i} has norm {norm}, expected 1")));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn num_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn random(num_rows: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seeds::rng(seed);
        let mut data: Vec<f64> = (0..num_rows * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for row in data.chunks_mut(dim) {
            normalize(row);
        }
        Self { dim, data }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    } else {
        v[0] = 1.0;
    }
}

/// `sum w_jk (1 - <v_j, v_k>) / 2`.
pub fn relaxation_objective(graph: &Graph, embedding: &Embedding) -> f64 {
    graph
        .edges()
        .iter()
        .map(|e| e.w * (1.0 - dot(embedding.row(e.u), embedding.row(e.v))) / 2.0)
        .sum()
}

/// Riemannian gradient of the objective, row-major like the embedding.
fn riemannian_gradient(graph: &Graph, embedding: &Embedding) -> Vec<f64> {
    let k = embedding.dim;
    let mut grad = vec![0.0; embedding.data.len()];
    for e in graph.edges() {
        for c in 0..k {
            grad[e.u * k + c] -= 0.5 * e.w * embedding.data[e.v * k + c];
            grad[e.v * k + c] -= 0.5 * e.w * embedding.data[e.u * k + c];
        }
    }
    for (g, v) in grad.chunks_mut(k).zip(embedding.data.chunks(k)) {
        let radial = dot(g, v);
        g.iter_mut().zip(v).for_each(|(gi, vi)| *gi -= radial * vi);
    }
    grad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwSolution {
    pub embedding: Embedding,
    pub relaxation_value: f64,
    /// `false` when the iteration budget ran out before the gradient norm
    /// fell below the tolerance; the last iterate is still returned.
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Factorized SDP ascent from a random unit embedding of width `rank`.
///
/// Each step moves along the projected gradient and renormalizes the rows;
/// the step length starts at 1 and halves until the Armijo condition holds,
/// so the objective never decreases.
pub fn gw_solve(graph: &Graph, rank: usize, max_iterations: usize, tolerance: f64, seed: u64) -> Result<GwSolution> {
    if rank < 2 {
        return Err(Error::InvalidConfig(format!("rank must be at least 2, got {rank}")));
    }
    let mut embedding = Embedding::random(graph.num_nodes(), rank, seed);
    let mut value = relaxation_objective(graph, &embedding);
    let mut iterations = 0;
    let mut gradient_norm = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iterations {
        let grad = riemannian_gradient(graph, &embedding);
        let sq_norm = dot(&grad, &grad);
        gradient_norm = sq_norm.sqrt();
        if gradient_norm < tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut candidate = embedding.clone();
            candidate.data.iter_mut().zip(&grad).for_each(|(x, g)| *x += step * g);
            for row in candidate.data.chunks_mut(rank) {
                normalize(row);
            }
            let candidate_value = relaxation_objective(graph, &candidate);
            if candidate_value >= value + ARMIJO * step * sq_norm {
                accepted = Some((candidate, candidate_value));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((next, next_value)) => {
                embedding = next;
                value = next_value;
            }
            // no representable ascent step left: stationary to rounding error
            None => {
                converged = gradient_norm < tolerance.max(1e-6);
                break;
            }
        }
    }
    if iterations == max_iterations && !converged {
        let grad = riemannian_gradient(graph, &embedding);
        gradient_norm = dot(&grad, &grad).sqrt();
        converged = gradient_norm < tolerance;
    }
    Ok(GwSolution { embedding, relaxation_value: value, converged, iterations, gradient_norm })
}

/// Partition by the sign of `<v_i, r>`; zero goes white.
pub fn hyperplane_partition(embedding: &Embedding, normal: &[f64]) -> Partition {
    Partition::new(
        (0..embedding.num_rows())
            .map(|i| if dot(embedding.row(i), normal) > 0.0 { Color::Blue } else { Color::White })
            .collect(),
    )
}

/// Best of `num_hyperplanes` random-hyperplane roundings. Ties keep the
/// earlier hyperplane.
pub fn gw_round(embedding: &Embedding, graph: &Graph, num_hyperplanes: usize, seed: u64) -> Result<(f64, Partition)> {
    if num_hyperplanes == 0 {
        return Err(Error::InvalidConfig("at least one hyperplane required".into()));
    }
    if embedding.num_rows() != graph.num_nodes() {
        return Err(Error::SizeMismatch { expected: graph.num_nodes(), actual: embedding.num_rows() });
    }
    let mut rng = seeds::rng(seed);
    let mut best: Option<(f64, Partition)> = None;
    for _ in 0..num_hyperplanes {
        let normal: Vec<f64> = (0..embedding.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let partition = hyperplane_partition(embedding, &normal);
        let cut = cut_value(graph, &partition)?;
        if best.as_ref().is_none_or(|(b, _)| cut > *b) {
            best = Some((cut, partition));
        }
    }
    Ok(best.expect("at least one hyperplane"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwOptions {
    /// Factor width; `None` picks [`default_rank`].
    pub rank: Option<usize>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub hyperplanes: usize,
}

impl Default for GwOptions {
    fn default() -> Self {
        Self { rank: None, max_iterations: 10_000, tolerance: 1e-4, hyperplanes: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwTrial {
    pub cut: f64,
    pub partition: Partition,
    pub relaxation_value: f64,
    pub converged: bool,
}

/// One solve-and-round trial. The solver is seeded with
/// `derive(trial_seed, [GW_SOLVE])` and the rounding with
/// `derive(trial_seed, [GW_ROUND])`.
pub fn gw_trial(graph: &Graph, options: &GwOptions, trial_seed: u64) -> Result<GwTrial> {
    let rank = options.rank.unwrap_or_else(|| default_rank(graph.num_nodes()));
    let solution = gw_solve(
        graph,
        rank,
        options.max_iterations,
        options.tolerance,
        seeds::derive(trial_seed, &[tag::GW_SOLVE]),
    )?;
    let (cut, partition) = gw_round(
        &solution.embedding,
        graph,
        options.hyperplanes,
        seeds::derive(trial_seed, &[tag::GW_ROUND]),
    )?;
    Ok(GwTrial { cut, partition, relaxation_value: solution.relaxation_value, converged: solution.converged })
}

/// `trials` independent GW runs; trial `t` uses `derive(seed, [GW_TRIAL, t])`.
pub fn gw_trials(graph: &Graph, options: &GwOptions, trials: usize, seed: u64) -> Result<Vec<GwTrial>> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one GW trial required".into()));
    }
    let ids: Vec<u64> = (0..trials as u64).collect();
    par_map(&ids, |&t| gw_trial(graph, options, seeds::derive(seed, &[tag::GW_TRIAL, t]))).into_iter().collect()
}

/// Per-trial best cuts with default options.
pub fn gw(graph: &Graph, trials: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(gw_trials(graph, &GwOptions::default(), trials, seed)?.into_iter().map(|t| t.cut).collect())
}

/// Best-so-far cut of `samples` Random* partitions with `blue_count` blue nodes.
pub fn random_star_curve(graph: &Graph, blue_count: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seeds::rng(seeds::derive(seed, &[tag::RANDOM_STAR]));
    let mut best = f64::NEG_INFINITY;
    (0..samples)
        .map(|_| {
            let p = graphs::random_star_with(graph.num_nodes(), blue_count, &mut rng)?;
            best = best.max(cut_value(graph, &p)?);
            Ok(best)
        })
        .collect()
}

/// Optimal cut value by exhaustive search.
pub fn optimal_cut(graph: &Graph) -> Result<f64> {
    Ok(graphs::exhaustive_maxcut(graph)?.0)
}
