//! Experiment orchestration: hyperparameter grids, resource scaling,
//! multi-instance studies and their CSV/JSON exports.
//!
//! Every study takes one master seed. Child seeds are derived per
//! experiment, instance and trial (see [`crate::seeds`]), so results do not
//! depend on thread count or scheduling.

use serde::{Deserialize, Serialize};

use crate::baselines::{self, GwOptions};
use crate::error::{Error, Result};
use crate::graphs::{generate_regular, Graph};
use crate::parallel::par_map;
use crate::qemc::{self, EncodingConfig, OptimizerConfig, RunRecord};
use crate::seeds::{self, tag};
use crate::simulator::{AnsatzConfig, GradientMode, Shots};

const TIE: f64 = 1e-9;

/// Crate version stamped into every exported file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub layer_values: Vec<usize>,
    pub step_values: Vec<f64>,
    pub trials_per_cell: usize,
    pub iteration_budget: usize,
}

impl GridSpec {
    pub fn new(layer_values: Vec<usize>, step_values: Vec<f64>, trials_per_cell: usize, iteration_budget: usize) -> Result<Self> {
        let spec = Self { layer_values, step_values, trials_per_cell, iteration_budget };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_values.is_empty() || self.step_values.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one layer count and one step size".into()));
        }
        if self.layer_values.contains(&0) {
            return Err(Error::InvalidConfig("layer counts must be positive".into()));
        }
        if self.trials_per_cell == 0 {
            return Err(Error::InvalidConfig("trials per cell must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub layers: usize,
    pub step_size: f64,
    /// Final best-so-far cut of each trial, in trial order.
    pub trial_cuts: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub grid: GridSpec,
    pub seed: u64,
    pub cells: Vec<GridCell>,
    /// Index of the selected cell: fewest layers attaining the largest mean,
    /// then the largest step size among the tied cells at that depth.
    pub best: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Fewest layers for which some step size reaches `target` on average.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_layers_to_target: Option<usize>,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }

    pub fn cell(&self, layers: usize, step_size: f64) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.layers == layers && c.step_size == step_size)
    }

    /// Step size with the best mean at a fixed depth, larger on ties.
    pub fn argmax_step(&self, layers: usize) -> Option<f64> {
        pick_best(self.cells.iter().filter(|c| c.layers == layers)).map(|c| c.step_size)
    }

    /// Columns `layers,step_size,trial,final_best_cut`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["layers", "step_size", "trial", "final_best_cut"])?;
        for c in &self.cells {
            for (t, cut) in c.trial_cuts.iter().enumerate() {
                w.write_record([c.layers.to_string(), c.step_size.to_string(), t.to_string(), cut.to_string()])?;
            }
        }
        finish_csv(w)
    }
}

fn pick_best<'a>(cells: impl Iterator<Item = &'a GridCell> + Clone) -> Option<&'a GridCell> {
    let top = cells.clone().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
    cells
        .filter(|c| c.mean >= top - TIE)
        .min_by(|a, b| a.layers.cmp(&b.layers).then(b.step_size.total_cmp(&a.step_size)))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Seed of grid trial `t`; every cell reuses the same trial seeds.
pub fn grid_trial_seed(seed: u64, trial: usize) -> u64 {
    seeds::derive(seed, &[tag::GRID, trial as u64])
}

/// Trains `trials_per_cell` runs for every `(L, alpha)` cell.
///
/// `base` supplies everything but the step size, budget and seed.
pub fn grid_search(
    graph: &Graph,
    grid: &GridSpec,
    encoding: &EncodingConfig,
    base: &OptimizerConfig,
    target: Option<f64>,
) -> Result<GridResult> {
    grid.validate()?;
    let cells: Vec<(usize, f64)> = grid
        .layer_values
        .iter()
        .flat_map(|&l| grid.step_values.iter().map(move |&a| (l, a)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.trials_per_cell).map(move |t| (c, t)))
        .collect();
    let cuts = par_map(&jobs, |&(c, t)| {
        let (layers, step_size) = cells[c];
        let ansatz = AnsatzConfig::for_graph(graph.num_nodes(), layers)?;
        let opt = OptimizerConfig {
            step_size,
            max_iterations: grid.iteration_budget,
            seed: grid_trial_seed(base.seed, t),
            ..base.clone()
        };
        final_cut(&qemc::train(graph, &ansatz, encoding, &opt)?)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let cells: Vec<GridCell> = cells
        .iter()
        .zip(cuts.chunks(grid.trials_per_cell))
        .map(|(&(layers, step_size), trial_cuts)| GridCell {
            layers,
            step_size,
            trial_cuts: trial_cuts.to_vec(),
            mean: mean(trial_cuts),
        })
        .collect();
    let best_cell = pick_best(cells.iter()).expect("grid is non-empty");
    let best = cells.iter().position(|c| std::ptr::eq(c, best_cell)).expect("cell from the grid");
    let min_layers_to_target =
        target.and_then(|t| cells.iter().filter(|c| c.mean >= t).map(|c| c.layers).min());
    Ok(GridResult { grid: grid.clone(), seed: base.seed, cells, best, target, min_layers_to_target })
}

fn final_cut(record: &RunRecord) -> Result<f64> {
    record
        .best_cut()
        .ok_or_else(|| Error::InvalidConfig("run executed no iterations".into()))
}

/// First 1-based iteration whose best-so-far cut reaches `target_cut`.
pub fn iterations_to_target(record: &RunRecord, target_cut: f64) -> Option<usize> {
    record.iterations_to(target_cut)
}

/// Circuit executions `train` performs: one forward pass per iteration, plus
/// `2P` shifted circuits per iteration under the parameter-shift rule.
pub fn expected_circuit_executions(mode: GradientMode, num_params: usize, iterations: usize) -> u64 {
    let per_iteration = match mode {
        GradientMode::Analytic => 1,
        GradientMode::ParameterShift => 1 + 2 * num_params as u64,
    };
    per_iteration * iterations as u64
}

/// Resource accounting for one run, in the `(T_C + T_Q) P I` time-to-solution
/// decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub num_params: usize,
    pub iterations: usize,
    pub shots: Shots,
    pub layers: usize,
    pub gate_count: usize,
    pub circuit_executions: u64,
    /// Classical work per evaluation: one pass over the edges.
    pub classical_proxy: f64,
    /// Quantum work per evaluation: gates times shots, or gates times the
    /// state dimension for exact simulation.
    pub quantum_proxy: f64,
}

impl ResourceEstimate {
    pub fn from_record(record: &RunRecord) -> Self {
        let ansatz = &record.config.ansatz;
        let shots = record.config.optimizer.shots;
        let gate_count = ansatz.gate_count();
        let per_eval = match shots {
            Shots::Exact => ansatz.dim() as f64,
            Shots::Finite(s) => s as f64,
        };
        Self {
            num_params: ansatz.num_params(),
            iterations: record.iterations_executed,
            shots,
            layers: ansatz.num_layers(),
            gate_count,
            circuit_executions: record.counters.circuit_executions,
            classical_proxy: record.config.num_edges as f64,
            quantum_proxy: gate_count as f64 * per_eval,
        }
    }

    /// `(T_C + T_Q) P I`.
    pub fn tts_proxy(&self) -> f64 {
        (self.classical_proxy + self.quantum_proxy) * self.num_params as f64 * self.iterations as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceAxis {
    Layers,
    Shots,
    Iterations,
}

impl ResourceAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Layers => "layers",
            Self::Shots => "shots",
            Self::Iterations => "iterations",
        }
    }
}

/// `N, N^1.5, N^2, 2N^2, 3N^2`, rounded to the nearest integer.
pub fn default_shot_candidates(num_nodes: usize) -> Vec<u64> {
    let n = num_nodes as f64;
    [n, n.powf(1.5), n * n, 2.0 * n * n, 3.0 * n * n].iter().map(|s| s.round() as u64).collect()
}

/// Hyperparameters held fixed while one axis is scanned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub layers: usize,
    pub step_size: f64,
    pub iterations: usize,
    pub shots: Shots,
    pub trials: usize,
    /// Scanned in ascending order on the layers axis.
    pub layer_candidates: Vec<usize>,
    /// Scanned on the shots axis; `None` uses [`default_shot_candidates`].
    #[serde(default)]
    pub shot_candidates: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub num_nodes: usize,
    pub axis: ResourceAxis,
    pub target: f64,
    /// Smallest scanned value whose average best cut reaches the target.
    pub minimal_value: Option<u64>,
    pub reached: bool,
}

pub fn scaling_csv(rows: &[ScalingRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["num_nodes", "axis", "minimal_value", "reached"])?;
    for r in rows {
        w.write_record([
            r.num_nodes.to_string(),
            r.axis.name().to_string(),
            r.minimal_value.map_or(String::new(), |v| v.to_string()),
            r.reached.to_string(),
        ])?;
    }
    finish_csv(w)
}

/// For each graph, the smallest resource value on `axis` at which the mean
/// best cut over `config.trials` runs reaches that graph's target.
///
/// Trial `t` on graph `g` uses seed `derive(seed, [SCALING, g, t])` at every
/// scanned value. An unreached target yields a row with `reached = false`.
pub fn scaling_study(
    graphs: &[Graph],
    targets: &[f64],
    axis: ResourceAxis,
    config: &ScalingConfig,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if graphs.len() != targets.len() {
        return Err(Error::SizeMismatch { expected: graphs.len(), actual: targets.len() });
    }
    if config.trials == 0 {
        return Err(Error::InvalidConfig("scaling study needs at least one trial".into()));
    }
    graphs
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(gi, (graph, &target))| {
            let encoding = EncodingConfig::balanced(graph.num_nodes())?;
            let trial_seeds: Vec<u64> =
                (0..config.trials as u64).map(|t| seeds::derive(seed, &[tag::SCALING, gi as u64, t])).collect();
            let run = |layers: usize, shots: Shots| -> Result<Vec<RunRecord>> {
                let ansatz = AnsatzConfig::for_graph(graph.num_nodes(), layers)?;
                par_map(&trial_seeds, |&s| {
                    let mut opt = OptimizerConfig::new(config.step_size, config.iterations, s);
                    opt.shots = shots;
                    qemc::train(graph, &ansatz, &encoding, &opt)
                })
                .into_iter()
                .collect()
            };
            let mean_final = |records: &[RunRecord]| -> Result<f64> {
                let finals = records.iter().map(final_cut).collect::<Result<Vec<_>>>()?;
                Ok(mean(&finals))
            };
            let minimal_value = match axis {
                ResourceAxis::Layers => {
                    let mut candidates = config.layer_candidates.clone();
                    candidates.sort_unstable();
                    let mut found = None;
                    for l in candidates {
                        if mean_final(&run(l, config.shots)?)? >= target {
                            found = Some(l as u64);
                            break;
                        }
                    }
                    found
                }
                ResourceAxis::Shots => {
                    let mut candidates =
                        config.shot_candidates.clone().unwrap_or_else(|| default_shot_candidates(graph.num_nodes()));
                    candidates.sort_unstable();
                    let mut found = None;
                    for s in candidates {
                        if mean_final(&run(config.layers, Shots::Finite(s))?)? >= target {
                            found = Some(s);
                            break;
                        }
                    }
                    found
                }
                ResourceAxis::Iterations => {
                    let records = run(config.layers, config.shots)?;
                    let curve = mean_curve(records.iter().map(|r| r.best_cuts()));
                    curve.iter().position(|&c| c >= target).map(|i| i as u64 + 1)
                }
            };
            Ok(ScalingRow { num_nodes: graph.num_nodes(), axis, target, minimal_value, reached: minimal_value.is_some() })
        })
        .collect()
}

fn mean_curve(curves: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let curves: Vec<Vec<f64>> = curves.collect();
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len).map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64).collect()
}

fn max_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len).map(|i| curves.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub num_instances: usize,
    pub num_nodes: usize,
    pub degree: usize,
    pub layers: usize,
    pub step_size: f64,
    pub iterations: usize,
    pub shots: Shots,
    pub qemc_trials: usize,
    pub gw_trials: usize,
    pub gw: GwOptions,
}

impl StudyConfig {
    /// Exact shots, 10 QEMC trials and 10 GW trials per instance.
    pub fn new(num_instances: usize, num_nodes: usize, degree: usize, layers: usize, step_size: f64, iterations: usize) -> Self {
        Self {
            num_instances,
            num_nodes,
            degree,
            layers,
            step_size,
            iterations,
            shots: Shots::Exact,
            qemc_trials: 10,
            gw_trials: 10,
            gw: GwOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub graph_seed: u64,
    pub num_edges: usize,
    /// Best-so-far curve of every QEMC trial.
    pub qemc_curves: Vec<Vec<f64>>,
    pub gw_cuts: Vec<f64>,
}

impl InstanceResult {
    pub fn qemc_finals(&self) -> Vec<f64> {
        self.qemc_curves.iter().filter_map(|c| c.last().copied()).collect()
    }
}

/// The four study statistics; QEMC ones per iteration, GW ones constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCurves {
    /// Mean over instances of the per-instance max best-so-far cut.
    pub max_qemc: Vec<f64>,
    /// Grand mean of best-so-far cuts over all trials.
    pub avg_qemc: Vec<f64>,
    pub max_gw: f64,
    pub avg_gw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub config: StudyConfig,
    pub seed: u64,
    pub instances: Vec<InstanceResult>,
    pub curves: StudyCurves,
}

impl StudySummary {
    /// Columns `iteration,stat_name,value`, iterations 1-based.
    pub fn curves_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "stat_name", "value"])?;
        let c = &self.curves;
        for i in 0..c.avg_qemc.len() {
            for (name, v) in [("max_qemc", c.max_qemc[i]), ("avg_qemc", c.avg_qemc[i]), ("max_gw", c.max_gw), ("avg_gw", c.avg_gw)] {
                w.write_record([(i + 1).to_string(), name.to_string(), v.to_string()])?;
            }
        }
        finish_csv(w)
    }
}

/// Random `degree`-regular instances, each solved by QEMC and GW.
///
/// Instance `i` is generated from `derive(seed, [STUDY_GRAPH, i])`, its QEMC
/// trial `t` seeded with `derive(seed, [STUDY_QEMC, i, t])` and its GW trials
/// with `derive(seed, [STUDY_GW, i])`. The encoding is balanced, `B = N/2`.
pub fn multi_instance_study(config: &StudyConfig, seed: u64) -> Result<StudySummary> {
    if config.num_instances == 0 || config.qemc_trials == 0 || config.gw_trials == 0 || config.iterations == 0 {
        return Err(Error::InvalidConfig("study counts must be positive".into()));
    }
    let ansatz = AnsatzConfig::for_graph(config.num_nodes, config.layers)?;
    let encoding = EncodingConfig::balanced(config.num_nodes)?;
    let graphs = (0..config.num_instances as u64)
        .map(|i| {
            let graph_seed = seeds::derive(seed, &[tag::STUDY_GRAPH, i]);
            Ok((graph_seed, generate_regular(config.num_nodes, config.degree, graph_seed)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..config.num_instances)
        .flat_map(|i| (0..config.qemc_trials).map(move |t| (i, t)))
        .collect();
    let curves = par_map(&jobs, |&(i, t)| {
        let mut opt =
            OptimizerConfig::new(config.step_size, config.iterations, seeds::derive(seed, &[tag::STUDY_QEMC, i as u64, t as u64]));
        opt.shots = config.shots;
        Ok(qemc::train(&graphs[i].1, &ansatz, &encoding, &opt)?.best_cuts())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut instances = Vec::with_capacity(config.num_instances);
    for (i, ((graph_seed, graph), qemc_curves)) in graphs.iter().zip(curves.chunks(config.qemc_trials)).enumerate() {
        let gw_cuts: Vec<f64> =
            baselines::gw_trials(graph, &config.gw, config.gw_trials, seeds::derive(seed, &[tag::STUDY_GW, i as u64]))?
                .into_iter()
                .map(|t| t.cut)
                .collect();
        instances.push(InstanceResult {
            graph_seed: *graph_seed,
            num_edges: graph.num_edges(),
            qemc_curves: qemc_curves.to_vec(),
            gw_cuts,
        });
    }

    let per_instance_max: Vec<Vec<f64>> = instances.iter().map(|r| max_curve(&r.qemc_curves)).collect();
    let curves = StudyCurves {
        max_qemc: mean_curve(per_instance_max.into_iter()),
        avg_qemc: mean_curve(instances.iter().flat_map(|r| r.qemc_curves.iter().cloned())),
        max_gw: mean(&instances.iter().map(|r| r.gw_cuts.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect::<Vec<_>>()),
        avg_gw: mean(&instances.iter().flat_map(|r| r.gw_cuts.iter().copied()).collect::<Vec<_>>()),
    };
    Ok(StudySummary { config: config.clone(), seed, instances, curves })
}

/// Wraps a result in the export envelope shared by all JSON outputs.
pub fn envelope<C: Serialize, R: Serialize>(kind: &str, config: &C, result: &R) -> Result<serde_json::Value> {
    let to_value = |v: serde_json::Result<serde_json::Value>| v.map_err(|e| Error::Io(e.to_string()));
    Ok(serde_json::json!({
        "tool": "qemc",
        "version": VERSION,
        "experiments": [{
            "kind": kind,
            "config": to_value(serde_json::to_value(config))?,
            "result": to_value(serde_json::to_value(result))?,
        }],
    }))
}

/// Minimal SVG line chart, one polyline per named series.
pub fn svg_line_chart(title: &str, series: &[(&str, &[f64])], width: u32, height: u32) -> String {
    const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
    let (w, h) = (width as f64, height as f64);
    let (left, right, top, bottom) = (60.0, 140.0, 30.0, 40.0);
    let values = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) } } else { (0.0, 1.0) };
    let len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let x = |i: usize| left + (w - left - right) * i as f64 / (len - 1) as f64;
    let y = |v: f64| top + (h - top - bottom) * (hi - v) / (hi - lo);

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{left}\" y=\"18\" font-size=\"14\">{}</text>\n\
         <rect x=\"{left}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{hi:.1}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{lo:.1}</text>\n\
         <text x=\"{left}\" y=\"{}\">1</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{len}</text>\n",
        escape(title),
        w - left - right,
        h - top - bottom,
        left - 4.0,
        top + 4.0,
        left - 4.0,
        h - bottom,
        h - bottom + 16.0,
        w - right,
        h - bottom + 16.0,
    );
    for (k, (name, values)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        out += &format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n", points.join(" "));
        let ly = top + 16.0 * (k as f64 + 1.0);
        out += &format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{}</text>\n",
            w - right + 10.0,
            w - right + 30.0,
            w - right + 34.0,
            ly + 4.0,
            escape(name)
        );
    }
    out + "</svg>\n"
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
