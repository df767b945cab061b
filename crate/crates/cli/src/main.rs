use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qemc_core::baselines::{gw_trials, GwOptions};
use qemc_core::graphs::{exhaustive_maxcut, generate_regular, parse_edge_list, write_edge_list, Graph};
use qemc_core::harness::{
    envelope, grid_search, multi_instance_study, scaling_csv, scaling_study, svg_line_chart, GridSpec,
    ResourceAxis, ResourceEstimate, ScalingConfig, StudyConfig, VERSION,
};
use qemc_core::qemc::{default_shots, scan_blue_sizes, train, EncodingConfig, OptimizerConfig};
use qemc_core::seeds::{self, tag};
use qemc_core::simulator::{AnsatzConfig, GradientMode, Shots};
use serde_json::json;

#[derive(Parser)]
#[command(name = "qemc", version, about = "QEMC MaxCut workbench")]
struct Cli {
    /// Worker threads for trials and grid cells (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random connected d-regular graph.
    Generate(GenerateArgs),
    /// Train the variational solver on one graph.
    Solve(SolveArgs),
    /// Goemans-Williamson trials.
    Gw(GwArgs),
    /// Exact MaxCut by exhaustive search.
    Exhaustive(ExhaustiveArgs),
    /// (layers, step size) grid search.
    Grid(GridArgs),
    /// Minimal layers, shots or iterations to reach a target cut.
    Scaling(ScalingArgs),
    /// QEMC vs GW over random regular instances.
    Study(StudyArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Master seed.
    #[arg(long, env = "QEMC_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    degree: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ShotsArg {
    Exact,
    ThreeNSquared,
    Count(u64),
}

impl FromStr for ShotsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Self::Exact),
            "3n2" => Ok(Self::ThreeNSquared),
            _ => match s.parse::<u64>() {
                Ok(0) => Err("shots must be positive".into()),
                Ok(n) => Ok(Self::Count(n)),
                Err(_) => Err(format!("expected `exact`, `3n2` or a shot count, got {s:?}")),
            },
        }
    }
}

impl ShotsArg {
    fn resolve(self, num_nodes: usize) -> Shots {
        match self {
            Self::Exact => Shots::Exact,
            Self::ThreeNSquared => Shots::Finite(default_shots(num_nodes)),
            Self::Count(n) => Shots::Finite(n),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GradArg {
    Analytic,
    Shift,
}

impl From<GradArg> for GradientMode {
    fn from(g: GradArg) -> Self {
        match g {
            GradArg::Analytic => GradientMode::Analytic,
            GradArg::Shift => GradientMode::ParameterShift,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    layers: usize,
    #[arg(long)]
    step_size: f64,
    #[arg(long)]
    iters: usize,
    /// `exact`, `3n2` or a shot count per evaluation.
    #[arg(long, default_value = "exact")]
    shots: ShotsArg,
    #[arg(long, value_enum, default_value = "analytic")]
    grad: GradArg,
}

#[derive(Args)]
struct SolveArgs {
    /// Edge-list file or builtin (`k4`, `c8`, `k3_3`).
    #[arg(long)]
    graph: String,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Blue-set size B (default N/2).
    #[arg(long, conflicts_with = "scan_blue")]
    blue: Option<usize>,
    /// Train every B in 1..=N/2 and keep the best.
    #[arg(long)]
    scan_blue: bool,
    #[arg(long, default_value_t = 1, requires = "scan_blue")]
    trials_per_blue: usize,
    /// Report the iteration at which the best cut first reaches this value.
    #[arg(long)]
    target: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG chart of the cut curves.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct GwArgs {
    #[arg(long)]
    graph: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 100)]
    hyperplanes: usize,
    /// Embedding width (default ceil(sqrt(2N)) + 1).
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[command(flatten)]
    seed: SeedArg,
    /// CSV output (`trial,cut,relaxation_value,converged`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExhaustiveArgs {
    #[arg(long)]
    graph: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    graph: String,
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    steps: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value = "exact")]
    shots: ShotsArg,
    #[arg(long)]
    blue: Option<usize>,
    /// Report the fewest layers reaching this mean cut.
    #[arg(long)]
    target: Option<f64>,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Layers,
    Shots,
    Iterations,
}

impl From<AxisArg> for ResourceAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Layers => ResourceAxis::Layers,
            AxisArg::Shots => ResourceAxis::Shots,
            AxisArg::Iterations => ResourceAxis::Iterations,
        }
    }
}

#[derive(Args)]
struct ScalingArgs {
    /// Graphs to study; alternatively generate them with --nodes/--degree.
    #[arg(long, value_delimiter = ',')]
    graph: Vec<String>,
    #[arg(long, value_delimiter = ',', conflicts_with = "graph")]
    nodes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// One target per graph (default: GW mean over 10 trials).
    #[arg(long, value_delimiter = ',')]
    targets: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 0.5)]
    step_size: f64,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value = "exact")]
    shots: ShotsArg,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,8,10,12,16,20")]
    layer_candidates: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    shot_candidates: Vec<u64>,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, default_value_t = 5)]
    instances: usize,
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    degree: usize,
    #[arg(long)]
    layers: usize,
    #[arg(long)]
    step_size: f64,
    #[arg(long)]
    iters: usize,
    #[arg(long, default_value = "exact")]
    shots: ShotsArg,
    #[arg(long, default_value_t = 10)]
    qemc_trials: usize,
    #[arg(long, default_value_t = 10)]
    gw_trials: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Curves CSV (`iteration,stat_name,value`).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

/// Errors caused by the invocation rather than by the run itself.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use qemc_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_) | E::GenerationFailed { .. } => 2,
                _ => 1,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Gw(a) => gw(a),
        Command::Exhaustive(a) => exhaustive(a),
        Command::Grid(a) => grid(a),
        Command::Scaling(a) => scaling(a),
        Command::Study(a) => study(a),
    }
}

fn builtin(name: &str) -> Option<anyhow::Result<Graph>> {
    let num = |s: &str| s.parse::<usize>().ok();
    let graph = if let Some((a, b)) = name.strip_prefix('k').and_then(|r| r.split_once('_')) {
        Graph::complete_bipartite(num(a)?, num(b)?)
    } else if let Some(n) = name.strip_prefix('k').and_then(num) {
        Graph::complete(n)
    } else {
        let n = name.strip_prefix('c').and_then(num)?;
        Graph::cycle(n)
    };
    Some(graph.map_err(Into::into))
}

fn load_graph(source: &str) -> anyhow::Result<Graph> {
    let path = Path::new(source);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {source}"))?;
        return parse_edge_list(&text).with_context(|| format!("parsing {source}"));
    }
    builtin(source).unwrap_or_else(|| Err(usage(format!("{source:?} is neither a file nor a builtin graph (k4, c8, k3_3)"))))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).map_err(|e| anyhow!(qemc_core::Error::Io(format!("writing {}: {e}", path.display()))))
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// `#`-prefixed provenance header for text outputs.
fn comment_header(kind: &str, config: &serde_json::Value) -> String {
    format!("# qemc {VERSION} {kind}\n# config {config}\n")
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    let graph = generate_regular(a.nodes, a.degree, a.seed.seed)?;
    let config = json!({"nodes": a.nodes, "degree": a.degree, "seed": a.seed.seed});
    write_file(&a.out, &(comment_header("generate", &config) + &write_edge_list(&graph)))?;
    println!("N = {}, M = {}", graph.num_nodes(), graph.num_edges());
    Ok(())
}

fn optimizer_from(t: &TrainArgs, num_nodes: usize, seed: u64) -> OptimizerConfig {
    let mut opt = OptimizerConfig::new(t.step_size, t.iters, seed);
    opt.shots = t.shots.resolve(num_nodes);
    opt.gradient_mode = t.grad.into();
    opt
}

fn solve(a: SolveArgs) -> anyhow::Result<()> {
    let graph = load_graph(&a.graph)?;
    let n = graph.num_nodes();
    let ansatz = AnsatzConfig::for_graph(n, a.train.layers)?;
    let optimizer = optimizer_from(&a.train, n, a.seed.seed);
    let (mut record, scan) = if a.scan_blue {
        let scan = scan_blue_sizes(&graph, &ansatz, &optimizer, a.trials_per_blue)?;
        (scan.best.clone(), Some(scan.per_blue_count))
    } else {
        let encoding = match a.blue {
            Some(b) => EncodingConfig::new(n, b)?,
            None => EncodingConfig::balanced(n)?,
        };
        (train(&graph, &ansatz, &encoding, &optimizer)?, None)
    };
    for &t in &a.target {
        record.add_target(t);
    }
    let resources = ResourceEstimate::from_record(&record);
    let config = json!({
        "graph": a.graph,
        "num_nodes": n,
        "num_edges": graph.num_edges(),
        "scan_blue": a.scan_blue,
        "trials_per_blue": a.trials_per_blue,
        "blue_count": record.config.encoding.blue_count(),
        "ansatz": record.config.ansatz,
        "optimizer": record.config.optimizer,
        "targets": a.target,
    });
    let mut result = json!({"record": record, "resources": resources});
    if let Some(per_b) = &scan {
        result["per_blue_count"] = json!(per_b);
    }
    write_json(&a.out, &envelope("solve", &config, &result)?)?;
    if let Some(plot) = &a.plot {
        let (best, cuts) = (record.best_cuts(), record.cuts());
        write_file(plot, &svg_line_chart("QEMC cut per iteration", &[("best so far", &best), ("cut", &cuts)], 800, 480))?;
    }

    match record.best_cut() {
        Some(best) => println!("final best cut {best}"),
        None => println!("no iterations run"),
    }
    if scan.is_some() {
        println!("best blue count {}", record.config.encoding.blue_count());
    }
    for hit in &record.iterations_to_target {
        match hit.iteration {
            Some(i) => println!("iterations to {}: {i}", hit.target),
            None => println!("iterations to {}: not reached", hit.target),
        }
    }
    Ok(())
}

fn gw(a: GwArgs) -> anyhow::Result<()> {
    let graph = load_graph(&a.graph)?;
    let options = GwOptions { rank: a.rank, max_iterations: a.max_iterations, tolerance: a.tolerance, hyperplanes: a.hyperplanes };
    let trials = gw_trials(&graph, &options, a.trials, a.seed.seed)?;
    let cuts: Vec<f64> = trials.iter().map(|t| t.cut).collect();
    if let Some(out) = &a.out {
        let config = json!({"graph": a.graph, "trials": a.trials, "seed": a.seed.seed, "options": options});
        let mut csv = comment_header("gw", &config) + "trial,cut,relaxation_value,converged\n";
        for (i, t) in trials.iter().enumerate() {
            writeln!(csv, "{i},{},{},{}", t.cut, t.relaxation_value, t.converged)?;
        }
        write_file(out, &csv)?;
    }
    let mean = cuts.iter().sum::<f64>() / cuts.len() as f64;
    let max = cuts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("GW over {} trials: max {max}, mean {mean}", cuts.len());
    if trials.iter().any(|t| !t.converged) {
        println!("note: {} trial(s) hit the iteration budget before converging", trials.iter().filter(|t| !t.converged).count());
    }
    Ok(())
}

fn exhaustive(a: ExhaustiveArgs) -> anyhow::Result<()> {
    let graph = load_graph(&a.graph)?;
    let (cut, partition) = exhaustive_maxcut(&graph)?;
    if let Some(out) = &a.out {
        let config = json!({"graph": a.graph, "num_nodes": graph.num_nodes()});
        write_json(out, &envelope("exhaustive", &config, &json!({"cut": cut, "partition": partition}))?)?;
    }
    println!("{cut}");
    println!("witness {partition}");
    Ok(())
}

fn grid(a: GridArgs) -> anyhow::Result<()> {
    let graph = load_graph(&a.graph)?;
    let n = graph.num_nodes();
    let spec = GridSpec::new(a.layers, a.steps, a.trials, a.iters)?;
    let encoding = match a.blue {
        Some(b) => EncodingConfig::new(n, b)?,
        None => EncodingConfig::balanced(n)?,
    };
    let mut base = OptimizerConfig::new(1.0, a.iters, a.seed.seed);
    base.shots = a.shots.resolve(n);
    let result = grid_search(&graph, &spec, &encoding, &base, a.target)?;
    let config = json!({"graph": a.graph, "grid": spec, "encoding": encoding, "optimizer": base, "target": a.target});
    write_file(&a.out, &(comment_header("grid", &config) + &result.to_csv()?))?;
    if let Some(path) = &a.json {
        write_json(path, &envelope("grid", &config, &result)?)?;
    }
    for c in &result.cells {
        println!("L={} alpha={}: mean {:.3}", c.layers, c.step_size, c.mean);
    }
    let best = result.best_cell();
    println!("best cell L={} alpha={} mean {:.3}", best.layers, best.step_size, best.mean);
    if let Some(t) = a.target {
        match result.min_layers_to_target {
            Some(l) => println!("fewest layers reaching {t}: {l}"),
            None => println!("no cell reached {t}"),
        }
    }
    Ok(())
}

fn scaling(a: ScalingArgs) -> anyhow::Result<()> {
    let graphs: Vec<Graph> = if !a.graph.is_empty() {
        a.graph.iter().map(|g| load_graph(g)).collect::<anyhow::Result<_>>()?
    } else if !a.nodes.is_empty() {
        a.nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| Ok(generate_regular(n, a.degree, seeds::derive(a.seed.seed, &[tag::STUDY_GRAPH, i as u64]))?))
            .collect::<anyhow::Result<_>>()?
    } else {
        return Err(usage("give --graph or --nodes"));
    };
    let targets = if a.targets.is_empty() {
        graphs
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let t = gw_trials(g, &GwOptions::default(), 10, seeds::derive(a.seed.seed, &[tag::STUDY_GW, i as u64]))?;
                Ok(t.iter().map(|t| t.cut).sum::<f64>() / t.len() as f64)
            })
            .collect::<anyhow::Result<Vec<_>>>()?
    } else if a.targets.len() == graphs.len() {
        a.targets.clone()
    } else {
        return Err(usage(format!("{} targets for {} graphs", a.targets.len(), graphs.len())));
    };
    let shots = match a.shots {
        ShotsArg::ThreeNSquared if graphs.len() > 1 => return Err(usage("--shots 3n2 needs a single graph size; use a count")),
        s => s.resolve(graphs[0].num_nodes()),
    };
    let config = ScalingConfig {
        layers: a.layers,
        step_size: a.step_size,
        iterations: a.iters,
        shots,
        trials: a.trials,
        layer_candidates: a.layer_candidates,
        shot_candidates: (!a.shot_candidates.is_empty()).then_some(a.shot_candidates),
    };
    let axis: ResourceAxis = a.axis.into();
    let rows = scaling_study(&graphs, &targets, axis, &config, a.seed.seed)?;
    let resolved = json!({"graph": a.graph, "nodes": a.nodes, "degree": a.degree, "axis": axis, "targets": targets, "config": config, "seed": a.seed.seed});
    write_file(&a.out, &(comment_header("scaling", &resolved) + &scaling_csv(&rows)?))?;
    for r in &rows {
        match r.minimal_value {
            Some(v) => println!("N={}: minimal {} = {v} (target {:.2})", r.num_nodes, axis.name(), r.target),
            None => println!("N={}: target {:.2} not reached", r.num_nodes, r.target),
        }
    }
    Ok(())
}

fn study(a: StudyArgs) -> anyhow::Result<()> {
    let mut config = StudyConfig::new(a.instances, a.nodes, a.degree, a.layers, a.step_size, a.iters);
    config.shots = a.shots.resolve(a.nodes);
    config.qemc_trials = a.qemc_trials;
    config.gw_trials = a.gw_trials;
    let summary = multi_instance_study(&config, a.seed.seed)?;
    let resolved = json!({"study": config, "seed": a.seed.seed});
    write_file(&a.out, &(comment_header("study", &resolved) + &summary.curves_csv()?))?;
    if let Some(path) = &a.json {
        write_json(path, &envelope("study", &resolved, &summary)?)?;
    }
    let c = &summary.curves;
    if let Some(plot) = &a.plot {
        let len = c.avg_qemc.len();
        let (max_gw, avg_gw) = (vec![c.max_gw; len], vec![c.avg_gw; len]);
        let series = [("Max QEMC", &c.max_qemc[..]), ("Avg QEMC", &c.avg_qemc[..]), ("Max GW", &max_gw[..]), ("Avg GW", &avg_gw[..])];
        write_file(plot, &svg_line_chart(&format!("{} instances, N = {}", a.instances, a.nodes), &series, 800, 480))?;
    }
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    println!("max QEMC {:.2}  avg QEMC {:.2}", last(&c.max_qemc), last(&c.avg_qemc));
    println!("max GW   {:.2}  avg GW   {:.2}", c.max_gw, c.avg_gw);
    println!("avg ratio QEMC/GW {:.4}", last(&c.avg_qemc) / c.avg_gw);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shots_tokens() {
        assert_eq!("exact".parse::<ShotsArg>(), Ok(ShotsArg::Exact));
        assert_eq!("3n2".parse::<ShotsArg>().unwrap().resolve(16), Shots::Finite(768));
        assert_eq!("500".parse::<ShotsArg>(), Ok(ShotsArg::Count(500)));
        assert!("0".parse::<ShotsArg>().is_err());
        assert!("lots".parse::<ShotsArg>().is_err());
    }

    #[test]
    fn builtins() {
        assert_eq!(builtin("k4").unwrap().unwrap().num_edges(), 6);
        assert_eq!(builtin("k3_3").unwrap().unwrap().num_edges(), 9);
        assert_eq!(builtin("c5").unwrap().unwrap().num_edges(), 5);
        assert!(builtin("graph.txt").is_none());
    }
}
