//! Browser bindings for the workbench demo page.
//!
//! Graphs cross the boundary as edge-list text and results as JSON strings,
//! so the page needs no generated TypeScript types. The `*_json` functions
//! hold the logic and are what the native tests exercise.

use qemc_core::baselines::gw;
use qemc_core::graphs::{cut_value, exhaustive_maxcut, generate_regular, parse_edge_list, write_edge_list, Graph};
use qemc_core::qemc::{decode, train, EncodingConfig, OptimizerConfig};
use qemc_core::simulator::{probabilities, AnsatzConfig, ParameterVector, ProbabilityHistogram};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Exhaustive optimum is reported up to this size.
const OPTIMUM_CAP: usize = 20;
const GW_TRIALS: usize = 10;

#[derive(Serialize)]
struct GraphView {
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    edge_list: String,
    optimum: Option<f64>,
    gw_mean: f64,
}

#[derive(Serialize)]
struct TrainView {
    best_cuts: Vec<f64>,
    cuts: Vec<f64>,
    costs: Vec<f64>,
    best_cut: f64,
    best_partition: String,
    probabilities: Vec<f64>,
    blue_count: usize,
}

#[derive(Serialize)]
struct DecodeView {
    partition: String,
    cut: f64,
    threshold: f64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn graph_from(edge_list: &str) -> Result<Graph, String> {
    parse_edge_list(edge_list).map_err(|e| e.to_string())
}

pub fn generate_json(num_nodes: usize, degree: usize, seed: u64) -> Result<String, String> {
    let graph = generate_regular(num_nodes, degree, seed).map_err(|e| e.to_string())?;
    let optimum = if num_nodes <= OPTIMUM_CAP {
        Some(exhaustive_maxcut(&graph).map_err(|e| e.to_string())?.0)
    } else {
        None
    };
    let gw_cuts = gw(&graph, GW_TRIALS, seed).map_err(|e| e.to_string())?;
    to_json(&GraphView {
        num_nodes,
        edges: graph.edges().iter().map(|e| [e.u, e.v]).collect(),
        edge_list: write_edge_list(&graph),
        optimum,
        gw_mean: gw_cuts.iter().sum::<f64>() / gw_cuts.len() as f64,
    })
}

pub fn train_json(edge_list: &str, layers: usize, step_size: f64, iterations: usize, seed: u64) -> Result<String, String> {
    let graph = graph_from(edge_list)?;
    let n = graph.num_nodes();
    let ansatz = AnsatzConfig::for_graph(n, layers).map_err(|e| e.to_string())?;
    let encoding = EncodingConfig::balanced(n).map_err(|e| e.to_string())?;
    let record = train(&graph, &ansatz, &encoding, &OptimizerConfig::new(step_size, iterations, seed)).map_err(|e| e.to_string())?;
    let hist = probabilities(&ansatz, &ParameterVector::new(record.final_params.clone())).map_err(|e| e.to_string())?;
    to_json(&TrainView {
        best_cuts: record.best_cuts(),
        cuts: record.cuts(),
        costs: record.costs(),
        best_cut: record.best_cut().unwrap_or(0.0),
        best_partition: record.best_partition.as_ref().map(ToString::to_string).unwrap_or_default(),
        probabilities: hist.probs,
        blue_count: encoding.blue_count(),
    })
}

/// Re-decodes a probability vector with a different blue count.
pub fn decode_json(edge_list: &str, probabilities: &[f64], blue_count: usize) -> Result<String, String> {
    let graph = graph_from(edge_list)?;
    let encoding = EncodingConfig::new(graph.num_nodes(), blue_count).map_err(|e| e.to_string())?;
    let partition = decode(&ProbabilityHistogram::exact(probabilities.to_vec()), &encoding).map_err(|e| e.to_string())?;
    let cut = cut_value(&graph, &partition).map_err(|e| e.to_string())?;
    to_json(&DecodeView { partition: partition.to_string(), cut, threshold: encoding.threshold() })
}

#[wasm_bindgen]
pub fn generate_graph(num_nodes: usize, degree: usize, seed: u32) -> Result<String, JsValue> {
    generate_json(num_nodes, degree, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn train_qemc(edge_list: &str, layers: usize, step_size: f64, iterations: usize, seed: u32) -> Result<String, JsValue> {
    train_json(edge_list, layers, step_size, iterations, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn decode_partition(edge_list: &str, probabilities: &[f64], blue_count: usize) -> Result<String, JsValue> {
    decode_json(edge_list, probabilities, blue_count).map_err(|e| JsValue::from_str(&e))
}
