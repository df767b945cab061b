//! Graphs, partitions and cut evaluation.
//!
//! Besides the basic containers this module holds the classical pieces every
//! experiment leans on: the random regular-graph generator, the edge-list
//! file format, the exhaustive MaxCut oracle and the Random* sampler (uniform
//! partitions with a fixed number of blue nodes).

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seeds;

/// Default node cap for [`exhaustive_maxcut`].
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 28;

const GENERATION_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Undirected weighted graph with 0-based nodes.
///
/// Edges are stored canonically: `u < v`, no self-loops, no duplicates,
/// sorted by `(u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidConfig("a graph needs at least one node".into()));
        }
        let mut seen = HashSet::new();
        let mut stored = Vec::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::SelfLoop { node: a });
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if v >= num_nodes {
                return Err(Error::NodeOutOfRange { index: v, num_nodes });
            }
            if !w.is_finite() {
                return Err(Error::InvalidConfig(format!("non-finite weight on edge ({u}, {v})")));
            }
            if !seen.insert((u, v)) {
                return Err(Error::DuplicateEdge { u, v });
            }
            stored.push(Edge { u, v, w });
        }
        stored.sort_by_key(|e| (e.u, e.v));
        Ok(Self { num_nodes, edges: stored })
    }

    /// Unit-weight graph from an edge list.
    pub fn unweighted(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(num_nodes, edges.iter().map(|&(u, v)| (u, v, 1.0)))
    }

    pub fn complete(num_nodes: usize) -> Result<Self> {
        let edges = (0..num_nodes).flat_map(|u| (u + 1..num_nodes).map(move |v| (u, v, 1.0)));
        Self::new(num_nodes, edges)
    }

    /// Complete bipartite graph with sides `0..left` and `left..left+right`.
    pub fn complete_bipartite(left: usize, right: usize) -> Result<Self> {
        let edges = (0..left).flat_map(|u| (left..left + right).map(move |v| (u, v, 1.0)));
        Self::new(left + right, edges)
    }

    pub fn cycle(num_nodes: usize) -> Result<Self> {
        let edges = (0..num_nodes).map(|u| (u, (u + 1) % num_nodes, 1.0));
        Self::new(num_nodes, edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    pub fn is_unweighted(&self) -> bool {
        self.edges.iter().all(|e| e.w == 1.0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// Weighted adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for e in &self.edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.num_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.num_nodes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Blue,
}

impl Color {
    pub fn flipped(self) -> Self {
        match self {
            Color::White => Color::Blue,
            Color::Blue => Color::White,
        }
    }
}

/// Two-coloring of the nodes. Serialized as a string of `0` (white) and
/// `1` (blue), node 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    colors: Vec<Color>,
}

impl Partition {
    pub fn new(colors: Vec<Color>) -> Self {
        Self { colors }
    }

    pub fn all_white(num_nodes: usize) -> Self {
        Self { colors: vec![Color::White; num_nodes] }
    }

    pub fn from_blue_set(num_nodes: usize, blue: &[usize]) -> Result<Self> {
        let mut p = Self::all_white(num_nodes);
        for &b in blue {
            if b >= num_nodes {
                return Err(Error::NodeOutOfRange { index: b, num_nodes });
            }
            p.colors[b] = Color::Blue;
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn color(&self, node: usize) -> Color {
        self.colors[node]
    }

    pub fn is_blue(&self, node: usize) -> bool {
        self.colors[node] == Color::Blue
    }

    pub fn blue_count(&self) -> usize {
        self.colors.iter().filter(|&&c| c == Color::Blue).count()
    }

    pub fn blue_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_blue(i)).collect()
    }

    /// Global color flip; the cut is unchanged.
    pub fn flipped(&self) -> Self {
        Self { colors: self.colors.iter().map(|c| c.flipped()).collect() }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.colors {
            f.write_str(if *c == Color::Blue { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|ch| match ch {
                '0' => Ok(Color::White),
                '1' => Ok(Color::Blue),
                other => Err(serde::de::Error::custom(format!("invalid partition symbol {other:?}"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Partition::new)
    }
}

/// Total weight of the edges whose endpoints have different colors.
pub fn cut_value(graph: &Graph, partition: &Partition) -> Result<f64> {
    if partition.len() != graph.num_nodes() {
        return Err(Error::SizeMismatch { expected: graph.num_nodes(), actual: partition.len() });
    }
    Ok(graph
        .edges()
        .iter()
        .filter(|e| partition.color(e.u) != partition.color(e.v))
        .map(|e| e.w)
        .sum())
}

/// Globally optimal cut by enumeration, with the default node cap.
pub fn exhaustive_maxcut(graph: &Graph) -> Result<(f64, Partition)> {
    exhaustive_maxcut_capped(graph, DEFAULT_EXHAUSTIVE_CAP)
}

/// Enumerates the `2^(N-1)` partitions with node 0 white.
///
/// The free nodes are split into a high block, fixed per chunk, and a low
/// block walked in Gray-code order so each step flips one node and updates
/// the cut in `O(degree)`. Chunks may run in parallel; the lowest-index chunk
/// wins ties so the witness is deterministic too.
pub fn exhaustive_maxcut_capped(graph: &Graph, cap: usize) -> Result<(f64, Partition)> {
    let n = graph.num_nodes();
    if n > cap {
        return Err(Error::TooLarge { num_nodes: n, cap });
    }
    if n == 1 {
        return Ok((0.0, Partition::all_white(1)));
    }
    let adj = graph.adjacency();
    let free = n - 1;
    let high_bits = free.min(8);
    let low_bits = free - high_bits;
    let chunks: Vec<u64> = (0..1u64 << high_bits).collect();

    let search_chunk = |chunk: u64| -> (f64, u64, u64) {
        let mut colors = vec![false; n];
        for b in 0..high_bits {
            colors[1 + low_bits + b] = (chunk >> b) & 1 == 1;
        }
        let mut cut: f64 = graph
            .edges()
            .iter()
            .filter(|e| colors[e.u] != colors[e.v])
            .map(|e| e.w)
            .sum();
        let mut best = (cut, 0u64);
        for step in 1..1u64 << low_bits {
            let node = 1 + step.trailing_zeros() as usize;
            let delta: f64 = adj[node]
                .iter()
                .map(|&(u, w)| if colors[u] == colors[node] { w } else { -w })
                .sum();
            cut += delta;
            colors[node] = !colors[node];
            if cut > best.0 {
                best = (cut, step ^ (step >> 1));
            }
        }
        (best.0, chunk, best.1)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<(f64, u64, u64)> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|&c| search_chunk(c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(f64, u64, u64)> = chunks.iter().map(|&c| search_chunk(c)).collect();

    let (_, chunk, gray) = results
        .into_iter()
        .fold((f64::NEG_INFINITY, 0, 0), |acc, r| if r.0 > acc.0 { r } else { acc });
    let mut colors = vec![Color::White; n];
    for b in 0..low_bits {
        if (gray >> b) & 1 == 1 {
            colors[1 + b] = Color::Blue;
        }
    }
    for b in 0..high_bits {
        if (chunk >> b) & 1 == 1 {
            colors[1 + low_bits + b] = Color::Blue;
        }
    }
    let partition = Partition::new(colors);
    let cut = cut_value(graph, &partition)?;
    Ok((cut, partition))
}

/// Random simple connected `degree`-regular graph, deterministic per seed.
///
/// Stubs are paired at random; pairs that would create a self-loop or a
/// repeated edge are set aside and re-paired among themselves, and an attempt
/// that can no longer make progress is discarded. Disconnected results are
/// rejected as well.
pub fn generate_regular(num_nodes: usize, degree: usize, seed: u64) -> Result<Graph> {
    if degree >= num_nodes {
        return Err(Error::InvalidDegree { num_nodes, degree, reason: "degree must be below the node count" });
    }
    if !(num_nodes * degree).is_multiple_of(2) {
        return Err(Error::InvalidDegree { num_nodes, degree, reason: "nodes * degree must be even" });
    }
    if degree == 0 {
        return Err(Error::InvalidDegree { num_nodes, degree, reason: "degree must be positive" });
    }
    let mut rng = seeds::rng(seed);
    for _ in 0..GENERATION_ATTEMPTS {
        if let Some(edges) = try_pairing(num_nodes, degree, &mut rng) {
            let graph = Graph::new(num_nodes, edges.into_iter().map(|(u, v)| (u, v, 1.0)))?;
            if graph.is_connected() {
                return Ok(graph);
            }
        }
    }
    Err(Error::GenerationFailed { num_nodes, degree, attempts: GENERATION_ATTEMPTS })
}

fn try_pairing(num_nodes: usize, degree: usize, rng: &mut impl Rng) -> Option<Vec<(usize, usize)>> {
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut stubs: Vec<usize> = (0..num_nodes).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    while !stubs.is_empty() {
        stubs.shuffle(rng);
        let mut leftover = Vec::new();
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u != v && !edges.contains(&(u, v)) {
                edges.insert((u, v));
                order.push((u, v));
            } else {
                leftover.push(pair[0]);
                leftover.push(pair[1]);
            }
        }
        if leftover.is_empty() {
            break;
        }
        let mut distinct: Vec<usize> = leftover.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let progress_possible = distinct.iter().enumerate().any(|(i, &a)| {
            distinct[i + 1..].iter().any(|&b| !edges.contains(&(a.min(b), a.max(b))))
        });
        if !progress_possible {
            return None;
        }
        stubs = leftover;
    }
    Some(order)
}

/// Uniform partition with exactly `blue_count` blue nodes (the Random* baseline).
pub fn random_star_partition(num_nodes: usize, blue_count: usize, seed: u64) -> Result<Partition> {
    let mut rng = seeds::rng(seed);
    random_star_with(num_nodes, blue_count, &mut rng)
}

pub(crate) fn random_star_with(num_nodes: usize, blue_count: usize, rng: &mut impl Rng) -> Result<Partition> {
    if blue_count == 0 || blue_count > num_nodes {
        return Err(Error::InvalidBlueCount { blue_count, num_nodes, max: num_nodes });
    }
    let blue = rand::seq::index::sample(rng, num_nodes, blue_count).into_vec();
    Partition::from_blue_set(num_nodes, &blue)
}

/// Parses the edge-list text format.
///
/// One edge per line as `u v` or `u v w`; `#` starts a comment line; the
/// first non-comment line may be `N <num_nodes>`, otherwise the node count is
/// the largest index plus one.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut seen_content = false;
    let mut seen = HashSet::new();
    let mut max_index: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        if tokens[0] == "N" {
            if seen_content {
                return Err(parse_err("node-count declaration must come first".into()));
            }
            if tokens.len() != 2 {
                return Err(parse_err("expected `N <num_nodes>`".into()));
            }
            let n = tokens[1]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad node count {:?}: {e}", tokens[1])))?;
            if n == 0 {
                return Err(parse_err("node count must be positive".into()));
            }
            declared = Some(n);
            seen_content = true;
            continue;
        }
        seen_content = true;
        if tokens.len() != 2 && tokens.len() != 3 {
            return Err(parse_err(format!("expected `u v` or `u v w`, got {} fields", tokens.len())));
        }
        let node = |t: &str| t.parse::<usize>().map_err(|e| parse_err(format!("bad node index {t:?}: {e}")));
        let u = node(tokens[0])?;
        let v = node(tokens[1])?;
        let w = match tokens.get(2) {
            Some(t) => t.parse::<f64>().map_err(|e| parse_err(format!("bad weight {t:?}: {e}")))?,
            None => 1.0,
        };
        if !w.is_finite() {
            return Err(parse_err(format!("non-finite weight {w}")));
        }
        if u == v {
            return Err(Error::SelfLoop { node: u });
        }
        let key = (u.min(v), u.max(v));
        if !seen.insert(key) {
            return Err(Error::DuplicateEdge { u: key.0, v: key.1 });
        }
        if let Some(n) = declared {
            if key.1 >= n {
                return Err(parse_err(format!("node {} exceeds declared count {n}", key.1)));
            }
        }
        max_index = Some(max_index.map_or(key.1, |m: usize| m.max(key.1)));
        edges.push((u, v, w));
    }

    let num_nodes = match (declared, max_index) {
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => {
            return Err(Error::Parse { line: 0, message: "no edges and no node-count declaration".into() })
        }
    };
    Graph::new(num_nodes, edges)
}

/// Writes the edge-list format. The `N` header is emitted only when trailing
/// isolated nodes would otherwise be lost; unit weights are omitted.
pub fn write_edge_list(graph: &Graph) -> String {
    let mut out = String::new();
    let implied = graph.edges().iter().map(|e| e.v + 1).max().unwrap_or(0);
    if implied != graph.num_nodes() {
        out.push_str(&format!("N {}\n", graph.num_nodes()));
    }
    for e in graph.edges() {
        if e.w == 1.0 {
            out.push_str(&format!("{} {}\n", e.u, e.v));
        } else {
            out.push_str(&format!("{} {} {}\n", e.u, e.v, e.w));
        }
    }
    out
}
