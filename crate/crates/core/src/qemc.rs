//! Probability-threshold encoding, the edge cost, and the training loop.
//!
//! Node `k` is blue when `p(k) > 1/(2B)` and white otherwise. The cost
//!
//! ```text
//! C(p) = sum_{(j,k) in E} w_jk [ (|p_j - p_k| - 1/B)^2 + (p_j + p_k - 1/B)^2 ]
//! ```
//!
//! vanishes exactly when every edge has one endpoint at probability 0 and the
//! other at `1/B`. Edge weights multiply their term; with unit weights this
//! is the plain unweighted cost.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{cut_value, Color, Graph, Partition};
use crate::optim::{Adam, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
use crate::parallel::par_map;
use crate::seeds::{self, tag};
use crate::simulator::{
    num_qubits_for, AnsatzConfig, ExecutionCounters, GradientMode, ParameterVector, ProbabilityHistogram,
    ShiftSampling, Shots, Simulator,
};

/// Blue-set size `B` and the derived threshold `1/(2B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    blue_count: usize,
    num_nodes: usize,
    threshold: f64,
}

impl EncodingConfig {
    /// `1 <= blue_count <= floor(N/2)`: the blue set is the smaller side.
    pub fn new(num_nodes: usize, blue_count: usize) -> Result<Self> {
        let max = num_nodes / 2;
        if blue_count == 0 || blue_count > max {
            return Err(Error::InvalidBlueCount { blue_count, num_nodes, max });
        }
        Ok(Self { blue_count, num_nodes, threshold: 1.0 / (2.0 * blue_count as f64) })
    }

    /// `B = floor(N/2)`, the balanced default used for regular graphs.
    pub fn balanced(num_nodes: usize) -> Result<Self> {
        Self::new(num_nodes, num_nodes / 2)
    }

    pub fn blue_count(&self) -> usize {
        self.blue_count
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn target(&self) -> f64 {
        1.0 / self.blue_count as f64
    }
}

fn check_cover(histogram: &ProbabilityHistogram, num_nodes: usize) -> Result<()> {
    if histogram.len() < num_nodes {
        return Err(Error::HistogramTooShort { len: histogram.len(), needed: num_nodes });
    }
    Ok(())
}

fn check_graph(graph: &Graph, encoding: &EncodingConfig) -> Result<()> {
    if graph.num_nodes() != encoding.num_nodes {
        return Err(Error::SizeMismatch { expected: graph.num_nodes(), actual: encoding.num_nodes });
    }
    Ok(())
}

/// Thresholds the first `N` histogram entries; padded entries are ignored.
pub fn decode(histogram: &ProbabilityHistogram, encoding: &EncodingConfig) -> Result<Partition> {
    check_cover(histogram, encoding.num_nodes)?;
    let colors = histogram.probs[..encoding.num_nodes]
        .iter()
        .map(|&p| if p <= encoding.threshold { Color::White } else { Color::Blue })
        .collect();
    Ok(Partition::new(colors))
}

pub fn cost(histogram: &ProbabilityHistogram, graph: &Graph, encoding: &EncodingConfig) -> Result<f64> {
    check_graph(graph, encoding)?;
    check_cover(histogram, graph.num_nodes())?;
    let target = encoding.target();
    let p = &histogram.probs;
    Ok(graph
        .edges()
        .iter()
        .map(|e| {
            let d = (p[e.u] - p[e.v]).abs() - target;
            let s = p[e.u] + p[e.v] - target;
            e.w * (d * d + s * s)
        })
        .sum())
}

/// `dC/dp(j)` for every histogram entry, zero on padding.
///
/// The `|p_j - p_k|` kink uses `sgn(0) = 0`.
pub fn cost_gradient_wrt_probs(
    histogram: &ProbabilityHistogram,
    graph: &Graph,
    encoding: &EncodingConfig,
) -> Result<Vec<f64>> {
    check_graph(graph, encoding)?;
    check_cover(histogram, graph.num_nodes())?;
    let target = encoding.target();
    let p = &histogram.probs;
    let mut grad = vec![0.0; p.len()];
    for e in graph.edges() {
        let diff = p[e.u] - p[e.v];
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        let d_term = 2.0 * (diff.abs() - target) * sign;
        let s_term = 2.0 * (p[e.u] + p[e.v] - target);
        grad[e.u] += e.w * (d_term + s_term);
        grad[e.v] += e.w * (-d_term + s_term);
    }
    Ok(grad)
}

pub fn cut_ratio(cut: f64, cut_star: f64) -> Result<f64> {
    if cut_star <= 0.0 {
        return Err(Error::DegenerateDenominator("cut ratio (optimal cut must be positive)"));
    }
    Ok(cut / cut_star)
}

/// `(M - 2 cut) / (M - 2 cut*)`, the cut ratio on the Ising-energy scale.
pub fn rescaled_ratio(cut: f64, cut_star: f64, num_edges: f64) -> Result<f64> {
    if cut_star <= 0.0 {
        return Err(Error::DegenerateDenominator("rescaled ratio (optimal cut must be positive)"));
    }
    let denom = num_edges - 2.0 * cut_star;
    if denom == 0.0 {
        return Err(Error::DegenerateDenominator("rescaled ratio (M - 2 cut* is zero)"));
    }
    Ok((num_edges - 2.0 * cut) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub shots: Shots,
    pub gradient_mode: GradientMode,
    pub seed: u64,
    /// Also decode the initial parameters before the first step.
    #[serde(default)]
    pub record_initial_cut: bool,
}

impl OptimizerConfig {
    /// Exact probabilities, analytic gradients, default Adam moments.
    pub fn new(step_size: f64, max_iterations: usize, seed: u64) -> Self {
        Self {
            step_size,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            max_iterations,
            shots: Shots::Exact,
            gradient_mode: GradientMode::Analytic,
            seed,
            record_initial_cut: false,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("Adam moment decay rates must lie in [0, 1)".into()));
        }
        if self.shots == Shots::Finite(0) {
            return Err(Error::InvalidConfig("shots must be positive".into()));
        }
        Ok(())
    }
}

/// `S = 3 N^2`, the default shot budget per cost evaluation.
pub fn default_shots(num_nodes: usize) -> u64 {
    3 * (num_nodes as u64).pow(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub cost: f64,
    pub cut: f64,
    pub best_cut: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetHit {
    pub target: f64,
    pub iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub ansatz: AnsatzConfig,
    pub encoding: EncodingConfig,
    pub optimizer: OptimizerConfig,
}

/// Everything one training run produced. Iteration `i` (1-based) holds the
/// evaluation at the parameters before Adam step `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub seed: u64,
    pub iterations: Vec<IterationRecord>,
    pub iterations_executed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_cut: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_partition: Option<Partition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations_to_target: Vec<TargetHit>,
    pub final_params: Vec<f64>,
    pub counters: ExecutionCounters,
}

impl RunRecord {
    pub fn costs(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.cost).collect()
    }

    pub fn cuts(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.cut).collect()
    }

    pub fn best_cuts(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.best_cut).collect()
    }

    /// Final best-so-far cut, or the initial cut if no iteration ran.
    pub fn best_cut(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.best_cut).or(self.initial_cut)
    }

    /// First 1-based iteration whose best-so-far cut reaches `target`.
    pub fn iterations_to(&self, target: f64) -> Option<usize> {
        self.iterations.iter().position(|r| r.best_cut >= target).map(|i| i + 1)
    }

    /// Records the iteration count for `target` in the serialized record.
    pub fn add_target(&mut self, target: f64) {
        let iteration = self.iterations_to(target);
        self.iterations_to_target.push(TargetHit { target, iteration });
    }
}

fn random_parameters(config: &AnsatzConfig, seed: u64) -> ParameterVector {
    let mut rng = seeds::rng(seeds::derive(seed, &[tag::INIT]));
    ParameterVector::new((0..config.num_params()).map(|_| rng.gen_range(0.0..TAU)).collect())
}

/// Trains one randomly initialized ansatz with Adam for a fixed budget.
///
/// Angles start uniform in `[0, 2pi)`. Each iteration evaluates the histogram
/// (exact or sampled), records cost, decoded cut and best-so-far cut, then
/// takes one Adam step along `dC/dtheta = (dC/dp)(dp/dtheta)`.
pub fn train(
    graph: &Graph,
    ansatz: &AnsatzConfig,
    encoding: &EncodingConfig,
    optimizer: &OptimizerConfig,
) -> Result<RunRecord> {
    optimizer.validate()?;
    check_graph(graph, encoding)?;
    if graph.num_nodes() < 2 {
        return Err(Error::InvalidConfig("graph needs at least 2 nodes".into()));
    }
    let needed = num_qubits_for(graph.num_nodes());
    if ansatz.num_qubits() != needed {
        return Err(Error::ShapeMismatch(format!(
            "{} nodes need {needed} qubits, ansatz has {}",
            graph.num_nodes(),
            ansatz.num_qubits()
        )));
    }

    let seed = optimizer.seed;
    let mut params = random_parameters(ansatz, seed);
    let mut sim = Simulator::new(ansatz.clone());
    let mut adam = Adam::new(
        optimizer.step_size,
        optimizer.beta1,
        optimizer.beta2,
        optimizer.epsilon,
        ansatz.num_params(),
    );

    let mut best = f64::NEG_INFINITY;
    let mut best_partition = None;
    let mut consider = |partition: Partition, cut: f64| {
        if cut > best {
            best = cut;
            best_partition = Some(partition);
        }
        best
    };

    let mut initial_cut = None;
    if optimizer.record_initial_cut {
        let shot_seed = seeds::derive(seed, &[tag::SHOTS, u64::MAX]);
        let hist = sim.histogram(&params, optimizer.shots, shot_seed)?;
        let partition = decode(&hist, encoding)?;
        let cut = cut_value(graph, &partition)?;
        consider(partition, cut);
        initial_cut = Some(cut);
    }

    let mut iterations = Vec::with_capacity(optimizer.max_iterations);
    for it in 0..optimizer.max_iterations as u64 {
        let shot_seed = seeds::derive(seed, &[tag::SHOTS, it]);
        let (hist, grad) = match optimizer.gradient_mode {
            GradientMode::Analytic => sim.evaluate_with_vjp(&params, optimizer.shots, shot_seed, |h| {
                cost_gradient_wrt_probs(h, graph, encoding)
            })?,
            GradientMode::ParameterShift => {
                let hist = sim.histogram(&params, optimizer.shots, shot_seed)?;
                let weights = cost_gradient_wrt_probs(&hist, graph, encoding)?;
                let sampling = match optimizer.shots {
                    Shots::Exact => None,
                    Shots::Finite(s) => Some(ShiftSampling { shots: s, seed: seeds::derive(seed, &[tag::SHIFT, it]) }),
                };
                let mut grad = vec![0.0; ansatz.num_params()];
                for (i, g) in grad.iter_mut().enumerate() {
                    let (plus, minus) = sim.shifted_pair(&params, i, sampling)?;
                    *g = 0.5
                        * weights
                            .iter()
                            .zip(plus.probs.iter().zip(&minus.probs))
                            .map(|(w, (a, b))| w * (a - b))
                            .sum::<f64>();
                }
                (hist, grad)
            }
        };
        let c = cost(&hist, graph, encoding)?;
        let partition = decode(&hist, encoding)?;
        let cut = cut_value(graph, &partition)?;
        let best_cut = consider(partition, cut);
        iterations.push(IterationRecord { cost: c, cut, best_cut });
        adam.step(params.as_mut_slice(), &grad);
    }

    Ok(RunRecord {
        config: RunConfig {
            num_nodes: graph.num_nodes(),
            num_edges: graph.num_edges(),
            ansatz: ansatz.clone(),
            encoding: *encoding,
            optimizer: optimizer.clone(),
        },
        seed,
        iterations_executed: iterations.len(),
        iterations,
        initial_cut,
        best_partition,
        iterations_to_target: Vec::new(),
        final_params: params.into_inner(),
        counters: sim.counters(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlueScan {
    pub best_blue_count: usize,
    pub best: RunRecord,
    /// `(B, best cut over the trials at that B)`.
    pub per_blue_count: Vec<(usize, f64)>,
}

/// Trains for every `B = 1..=floor(N/2)` and keeps the best record.
///
/// Trial `t` at blue count `B` uses seed `derive(optimizer.seed, [scan, B, t])`.
/// Ties go to the smaller `B` (larger threshold), then the earlier trial.
pub fn scan_blue_sizes(
    graph: &Graph,
    ansatz: &AnsatzConfig,
    optimizer: &OptimizerConfig,
    trials_per_blue_count: usize,
) -> Result<BlueScan> {
    if trials_per_blue_count == 0 {
        return Err(Error::InvalidConfig("at least one trial per blue count".into()));
    }
    let max_b = graph.num_nodes() / 2;
    if max_b == 0 {
        return Err(Error::InvalidBlueCount { blue_count: 0, num_nodes: graph.num_nodes(), max: 0 });
    }
    let jobs: Vec<(usize, usize)> =
        (1..=max_b).flat_map(|b| (0..trials_per_blue_count).map(move |t| (b, t))).collect();
    let records = par_map(&jobs, |&(b, t)| {
        let encoding = EncodingConfig::new(graph.num_nodes(), b)?;
        let seed = seeds::derive(optimizer.seed, &[tag::BLUE_SCAN, b as u64, t as u64]);
        train(graph, ansatz, &encoding, &optimizer.with_seed(seed))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let score = |r: &RunRecord| r.best_cut().unwrap_or(f64::NEG_INFINITY);
    let mut per_blue_count: Vec<(usize, f64)> = Vec::with_capacity(max_b);
    for (&(b, _), rec) in jobs.iter().zip(&records) {
        match per_blue_count.last_mut() {
            Some(last) if last.0 == b => last.1 = last.1.max(score(rec)),
            _ => per_blue_count.push((b, score(rec))),
        }
    }
    let best_index = records
        .iter()
        .enumerate()
        .fold(0, |acc, (i, r)| if score(r) > score(&records[acc]) { i } else { acc });
    Ok(BlueScan {
        best_blue_count: jobs[best_index].0,
        best: records[best_index].clone(),
        per_blue_count,
    })
}
