//! Statevector simulation of the strongly-entangling-layers ansatz.
//!
//! Qubit `q` of an `n`-qubit register is bit `n - 1 - q` of a basis index, so
//! qubit 0 is the most significant bit and node `k` maps to basis state `|k>`
//! by the usual binary expansion.
//!
//! Circuit shape, starting from `|0...0>`:
//!
//! 1. a Hadamard on every qubit (not counted as a layer);
//! 2. per layer `l`: `Rot(phi, theta, omega) = RZ(omega) RY(theta) RZ(phi)`
//!    on every qubit, then `CNOT(q, (q + r_l) mod n)` for `q = 0..n`.
//!
//! Angles are laid out as `[layer][qubit][phi, theta, omega]`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seeds;

/// `ceil(log2(num_nodes))`, the register width needed to index every node.
pub fn num_qubits_for(num_nodes: usize) -> usize {
    assert!(num_nodes >= 2, "need at least two nodes, got {num_nodes}");
    (usize::BITS - (num_nodes - 1).leading_zeros()) as usize
}

/// Entangler strides `r_l = ((l - 1) mod (n - 1)) + 1` for 1-indexed layers.
pub fn default_strides(num_qubits: usize, num_layers: usize) -> Vec<usize> {
    if num_qubits < 2 {
        return Vec::new();
    }
    (0..num_layers).map(|l| l % (num_qubits - 1) + 1).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotSlot {
    Phi,
    Theta,
    Omega,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    num_qubits: usize,
    num_layers: usize,
    strides: Vec<usize>,
}

impl AnsatzConfig {
    /// Ansatz with the default entangler strides.
    pub fn new(num_qubits: usize, num_layers: usize) -> Result<Self> {
        Self::with_strides(num_qubits, num_layers, default_strides(num_qubits, num_layers))
    }

    /// Ansatz sized for a graph: `ceil(log2 N)` qubits.
    pub fn for_graph(num_nodes: usize, num_layers: usize) -> Result<Self> {
        if num_nodes < 2 {
            return Err(Error::InvalidConfig(format!("graph needs at least 2 nodes, got {num_nodes}")));
        }
        Self::new(num_qubits_for(num_nodes), num_layers)
    }

    pub fn with_strides(num_qubits: usize, num_layers: usize, strides: Vec<usize>) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidConfig("at least one qubit required".into()));
        }
        if num_qubits > 24 {
            return Err(Error::InvalidConfig(format!("{num_qubits} qubits is beyond this simulator")));
        }
        if num_qubits == 1 {
            if !strides.is_empty() {
                return Err(Error::InvalidConfig("a single qubit has no entanglers".into()));
            }
        } else {
            if strides.len() != num_layers {
                return Err(Error::InvalidConfig(format!(
                    "{} strides for {num_layers} layers",
                    strides.len()
                )));
            }
            if let Some(&bad) = strides.iter().find(|&&r| r == 0 || r >= num_qubits) {
                return Err(Error::InvalidConfig(format!(
                    "stride {bad} outside 1..={}",
                    num_qubits - 1
                )));
            }
        }
        Ok(Self { num_qubits, num_layers, strides })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    /// `3 n L`.
    pub fn num_params(&self) -> usize {
        3 * self.num_qubits * self.num_layers
    }

    pub fn cnots_per_layer(&self) -> usize {
        if self.num_qubits >= 2 {
            self.num_qubits
        } else {
            0
        }
    }

    /// Gates in one execution: the Hadamard layer plus `3n` rotations and
    /// the CNOT ring per layer.
    pub fn gate_count(&self) -> usize {
        self.num_qubits + self.num_layers * (3 * self.num_qubits + self.cnots_per_layer())
    }

    pub fn param_index(&self, layer: usize, qubit: usize, slot: RotSlot) -> usize {
        let s = match slot {
            RotSlot::Phi => 0,
            RotSlot::Theta => 1,
            RotSlot::Omega => 2,
        };
        (layer * self.num_qubits + qubit) * 3 + s
    }

    fn check(&self, params: &ParameterVector) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} angles for an ansatz with {} parameters",
                params.len(),
                self.num_params()
            )));
        }
        Ok(())
    }
}

/// Rotation angles in radians, `3 n L` of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(angles: Vec<f64>) -> Self {
        Self(angles)
    }

    pub fn zeros(config: &AnsatzConfig) -> Self {
        Self(vec![0.0; config.num_params()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    fn shifted(&self, index: usize, delta: f64) -> Self {
        let mut v = self.0.clone();
        v[index] += delta;
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zero_state(num_qubits: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn num_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    fn apply_1q(&mut self, qubit: usize, m: &Gate2) {
        let mask = 1usize << (self.num_qubits() - 1 - qubit);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a, b) = (self.amplitudes[i], self.amplitudes[j]);
                self.amplitudes[i] = m[0][0] * a + m[0][1] * b;
                self.amplitudes[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let n = self.num_qubits();
        let cmask = 1usize << (n - 1 - control);
        let tmask = 1usize << (n - 1 - target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    /// `<self| P_q |other>` for `P` = Z or Y on `qubit`.
    fn pauli_overlap(&self, other: &StateVector, qubit: usize, pauli: Pauli) -> Complex64 {
        let mask = 1usize << (self.num_qubits() - 1 - qubit);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let (oi, oj) = (other.amplitudes[i], other.amplitudes[j]);
            let (pi, pj) = match pauli {
                Pauli::Z => (oi, -oj),
                Pauli::Y => (Complex64::new(0.0, -1.0) * oj, Complex64::new(0.0, 1.0) * oi),
            };
            acc += self.amplitudes[i].conj() * pi + self.amplitudes[j].conj() * pj;
        }
        acc
    }
}

#[derive(Clone, Copy)]
enum Pauli {
    Z,
    Y,
}

type Gate2 = [[Complex64; 2]; 2];

fn hadamard() -> Gate2 {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

fn rz(angle: f64) -> Gate2 {
    let zero = Complex64::new(0.0, 0.0);
    [[Complex64::from_polar(1.0, -angle / 2.0), zero], [zero, Complex64::from_polar(1.0, angle / 2.0)]]
}

fn ry(angle: f64) -> Gate2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [[Complex64::new(c, 0.0), Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), Complex64::new(c, 0.0)]]
}

fn matmul(a: &Gate2, b: &Gate2) -> Gate2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `RZ(omega) RY(theta) RZ(phi)`.
fn rot(phi: f64, theta: f64, omega: f64) -> Gate2 {
    matmul(&rz(omega), &matmul(&ry(theta), &rz(phi)))
}

/// Shot budget of a histogram: exact probabilities or `S` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Finite(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("shot count must be positive")),
            Raw::Count(n) => Ok(Shots::Finite(n)),
            Raw::Word(w) if w == "exact" => Ok(Shots::Exact),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("unknown shots value {w:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityHistogram {
    pub probs: Vec<f64>,
    pub shots: Shots,
}

impl ProbabilityHistogram {
    pub fn exact(probs: Vec<f64>) -> Self {
        Self { probs, shots: Shots::Exact }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Total-variation distance `0.5 * sum |p - q|`.
    pub fn total_variation(&self, other: &ProbabilityHistogram) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Reverse sweep through the statevector.
    Analytic,
    /// `dp/dtheta = [p(theta + pi/2) - p(theta - pi/2)] / 2` per angle.
    ParameterShift,
}

/// Dense `2^n x P` matrix of `dp(k)/dtheta_i`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Jacobian {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.cols == 0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// `weights^T J`, the chain rule through the probabilities.
    pub fn left_multiply(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &w) in weights.iter().enumerate().take(self.rows) {
            if w == 0.0 {
                continue;
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o += w * self.get(r, c);
            }
        }
        out
    }
}

/// Shot budget for the shifted evaluations of the parameter-shift rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftSampling {
    pub shots: u64,
    pub seed: u64,
}

/// Work done by a [`Simulator`].
///
/// `gate_applications` counts every logical gate applied to any vector,
/// including the uncompute steps of the reverse sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionCounters {
    pub circuit_executions: u64,
    pub shots_total: u64,
    pub gate_applications: u64,
}

/// Runs one ansatz and tallies the work. All numerical results are pure
/// functions of the inputs; only the counters mutate.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: AnsatzConfig,
    counters: ExecutionCounters,
}

impl Simulator {
    pub fn new(config: AnsatzConfig) -> Self {
        Self { config, counters: ExecutionCounters::default() }
    }

    pub fn config(&self) -> &AnsatzConfig {
        &self.config
    }

    pub fn counters(&self) -> ExecutionCounters {
        self.counters
    }

    pub fn run(&mut self, params: &ParameterVector) -> Result<StateVector> {
        self.config.check(params)?;
        self.counters.circuit_executions += 1;
        self.counters.gate_applications += self.config.gate_count() as u64;
        Ok(forward(&self.config, params))
    }

    pub fn probabilities(&mut self, params: &ParameterVector) -> Result<ProbabilityHistogram> {
        Ok(ProbabilityHistogram::exact(self.run(params)?.probabilities()))
    }

    /// `shots` samples from the exact distribution, as frequencies.
    pub fn sample(&mut self, params: &ParameterVector, shots: u64, seed: u64) -> Result<ProbabilityHistogram> {
        if shots == 0 {
            return Err(Error::InvalidConfig("shots must be positive".into()));
        }
        let exact = self.run(params)?.probabilities();
        self.counters.shots_total += shots;
        Ok(draw_histogram(&exact, shots, seed))
    }

    /// Histogram at the requested shot budget.
    pub fn histogram(&mut self, params: &ParameterVector, shots: Shots, seed: u64) -> Result<ProbabilityHistogram> {
        match shots {
            Shots::Exact => self.probabilities(params),
            Shots::Finite(s) => self.sample(params, s, seed),
        }
    }

    /// Exact probabilities and `sum_k weights[k] * dp(k)/dtheta_i` for every
    /// angle, from one forward pass and one reverse sweep.
    pub fn probability_vjp(
        &mut self,
        params: &ParameterVector,
        weights: &[f64],
    ) -> Result<(ProbabilityHistogram, Vec<f64>)> {
        let owned = weights.to_vec();
        self.evaluate_with_vjp(params, Shots::Exact, 0, |_| Ok(owned))
    }

    /// One circuit execution that yields a histogram at the requested shot
    /// budget and the vector-Jacobian product for cotangent weights computed
    /// from that histogram by `weights_for`.
    ///
    /// With `p_k = |psi_k|^2` the cotangent on the state is `lambda = w * psi`;
    /// each rotation `exp(-i a P / 2)` contributes `Im <lambda|P|psi>` at the
    /// point right after it, and both vectors are then uncomputed through it.
    /// The sweep always differentiates the exact state.
    pub fn evaluate_with_vjp<F>(
        &mut self,
        params: &ParameterVector,
        shots: Shots,
        seed: u64,
        weights_for: F,
    ) -> Result<(ProbabilityHistogram, Vec<f64>)>
    where
        F: FnOnce(&ProbabilityHistogram) -> Result<Vec<f64>>,
    {
        let mut psi = self.run(params)?;
        let exact = psi.probabilities();
        let histogram = match shots {
            Shots::Exact => ProbabilityHistogram::exact(exact),
            Shots::Finite(0) => return Err(Error::InvalidConfig("shots must be positive".into())),
            Shots::Finite(s) => {
                self.counters.shots_total += s;
                draw_histogram(&exact, s, seed)
            }
        };
        let weights = weights_for(&histogram)?;
        if weights.len() != psi.amplitudes.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for a {}-entry distribution",
                weights.len(),
                psi.amplitudes.len()
            )));
        }
        let mut lambda = StateVector {
            amplitudes: psi.amplitudes.iter().zip(&weights).map(|(a, &w)| a * w).collect(),
        };
        let grad = reverse_sweep(&self.config, params, &mut psi, &mut lambda);
        let uncomputed = (self.config.gate_count() - self.config.num_qubits) as u64;
        self.counters.gate_applications += 2 * uncomputed;
        Ok((histogram, grad))
    }

    /// Full `2^n x 3nL` matrix of probability derivatives.
    ///
    /// Analytic mode runs one reverse sweep per basis state. Parameter-shift
    /// mode evaluates each angle at `+-pi/2`; with `sampling` the shifted
    /// distributions are `shots`-sample histograms.
    pub fn jacobian(
        &mut self,
        params: &ParameterVector,
        mode: GradientMode,
        sampling: Option<ShiftSampling>,
    ) -> Result<Jacobian> {
        self.config.check(params)?;
        let dim = self.config.dim();
        let p = self.config.num_params();
        let mut jac = Jacobian::zeros(dim, p);
        if p == 0 {
            return Ok(jac);
        }
        match mode {
            GradientMode::Analytic => {
                let mut unit = vec![0.0; dim];
                for k in 0..dim {
                    unit[k] = 1.0;
                    let (_, row) = self.probability_vjp(params, &unit)?;
                    unit[k] = 0.0;
                    for (i, v) in row.into_iter().enumerate() {
                        jac.set(k, i, v);
                    }
                }
            }
            GradientMode::ParameterShift => {
                for i in 0..p {
                    let (plus, minus) = self.shifted_pair(params, i, sampling)?;
                    for k in 0..dim {
                        jac.set(k, i, 0.5 * (plus.probs[k] - minus.probs[k]));
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Histograms at `theta_i + pi/2` and `theta_i - pi/2`.
    pub fn shifted_pair(
        &mut self,
        params: &ParameterVector,
        index: usize,
        sampling: Option<ShiftSampling>,
    ) -> Result<(ProbabilityHistogram, ProbabilityHistogram)> {
        let plus = params.shifted(index, FRAC_PI_2);
        let minus = params.shifted(index, -FRAC_PI_2);
        match sampling {
            None => Ok((self.probabilities(&plus)?, self.probabilities(&minus)?)),
            Some(s) => {
                let i = index as u64;
                Ok((
                    self.sample(&plus, s.shots, seeds::derive(s.seed, &[seeds::tag::SHIFT, i, 0]))?,
                    self.sample(&minus, s.shots, seeds::derive(s.seed, &[seeds::tag::SHIFT, i, 1]))?,
                ))
            }
        }
    }
}

fn forward(config: &AnsatzConfig, params: &ParameterVector) -> StateVector {
    let n = config.num_qubits;
    let mut psi = StateVector::zero_state(n);
    let h = hadamard();
    for q in 0..n {
        psi.apply_1q(q, &h);
    }
    let angles = params.as_slice();
    for layer in 0..config.num_layers {
        for q in 0..n {
            let base = config.param_index(layer, q, RotSlot::Phi);
            psi.apply_1q(q, &rot(angles[base], angles[base + 1], angles[base + 2]));
        }
        if n >= 2 {
            let r = config.strides[layer];
            for q in 0..n {
                psi.apply_cnot(q, (q + r) % n);
            }
        }
    }
    psi
}

fn reverse_sweep(
    config: &AnsatzConfig,
    params: &ParameterVector,
    psi: &mut StateVector,
    lambda: &mut StateVector,
) -> Vec<f64> {
    let n = config.num_qubits;
    let angles = params.as_slice();
    let mut grad = vec![0.0; config.num_params()];
    for layer in (0..config.num_layers).rev() {
        if n >= 2 {
            let r = config.strides[layer];
            for q in (0..n).rev() {
                psi.apply_cnot(q, (q + r) % n);
                lambda.apply_cnot(q, (q + r) % n);
            }
        }
        for q in (0..n).rev() {
            let base = config.param_index(layer, q, RotSlot::Phi);
            let steps = [(base + 2, Pauli::Z), (base + 1, Pauli::Y), (base, Pauli::Z)];
            for (idx, pauli) in steps {
                grad[idx] = lambda.pauli_overlap(psi, q, pauli).im;
                let inverse = match pauli {
                    Pauli::Z => rz(-angles[idx]),
                    Pauli::Y => ry(-angles[idx]),
                };
                psi.apply_1q(q, &inverse);
                lambda.apply_1q(q, &inverse);
            }
        }
    }
    grad
}

/// Multinomial draw of `shots` samples, via sequential conditional binomials.
fn draw_histogram(probs: &[f64], shots: u64, seed: u64) -> ProbabilityHistogram {
    let mut rng = seeds::rng(seed);
    let mut remaining = shots;
    let mut mass_left: f64 = probs.iter().sum();
    let mut counts = vec![0u64; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 0.0 };
        let c = Binomial::new(remaining, q).expect("probability clamped to [0, 1]").sample(&mut rng);
        counts[k] = c;
        remaining -= c;
        mass_left -= p;
    }
    let s = shots as f64;
    ProbabilityHistogram {
        probs: counts.into_iter().map(|c| c as f64 / s).collect(),
        shots: Shots::Finite(shots),
    }
}

pub fn run_circuit(config: &AnsatzConfig, params: &ParameterVector) -> Result<StateVector> {
    Simulator::new(config.clone()).run(params)
}

pub fn probabilities(config: &AnsatzConfig, params: &ParameterVector) -> Result<ProbabilityHistogram> {
    Simulator::new(config.clone()).probabilities(params)
}

pub fn sample_histogram(
    config: &AnsatzConfig,
    params: &ParameterVector,
    shots: u64,
    seed: u64,
) -> Result<ProbabilityHistogram> {
    Simulator::new(config.clone()).sample(params, shots, seed)
}

pub fn probability_jacobian(
    config: &AnsatzConfig,
    params: &ParameterVector,
    mode: GradientMode,
    sampling: Option<ShiftSampling>,
) -> Result<Jacobian> {
    Simulator::new(config.clone()).jacobian(params, mode, sampling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::Rng;

    fn random_params(config: &AnsatzConfig, seed: u64) -> ParameterVector {
        let mut rng = seeds::rng(seed);
        ParameterVector::new((0..config.num_params()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect())
    }

    /// Reference simulator: builds every gate as a dense `2^n x 2^n` matrix
    /// by Kronecker products and multiplies them out.
    mod dense {
        use super::*;

        pub type Mat = Vec<Vec<Complex64>>;

        fn identity(d: usize) -> Mat {
            (0..d).map(|i| (0..d).map(|j| Complex64::new((i == j) as u8 as f64, 0.0)).collect()).collect()
        }

        fn kron(a: &Mat, b: &Mat) -> Mat {
            let (ra, rb) = (a.len(), b.len());
            let mut out = vec![vec![Complex64::new(0.0, 0.0); ra * rb]; ra * rb];
            for i in 0..ra {
                for j in 0..ra {
                    for k in 0..rb {
                        for l in 0..rb {
                            out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                        }
                    }
                }
            }
            out
        }

        /// Single-qubit gate on `qubit`, qubit 0 leftmost in the Kronecker product.
        pub fn embed(n: usize, qubit: usize, g: &Gate2) -> Mat {
            let g: Mat = g.iter().map(|r| r.to_vec()).collect();
            (0..n).fold(vec![vec![Complex64::new(1.0, 0.0)]], |acc, q| {
                kron(&acc, &if q == qubit { g.clone() } else { identity(2) })
            })
        }

        pub fn cnot(n: usize, control: usize, target: usize) -> Mat {
            let d = 1 << n;
            let mut m = vec![vec![Complex64::new(0.0, 0.0); d]; d];
            for i in 0..d {
                let cbit = (i >> (n - 1 - control)) & 1;
                let j = if cbit == 1 { i ^ (1 << (n - 1 - target)) } else { i };
                m[j][i] = Complex64::new(1.0, 0.0);
            }
            m
        }

        pub fn apply(m: &Mat, v: &[Complex64]) -> Vec<Complex64> {
            m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
        }

        pub fn run(n: usize, layers: usize, strides: &[usize], angles: &[f64]) -> Vec<Complex64> {
            let mut v = vec![Complex64::new(0.0, 0.0); 1 << n];
            v[0] = Complex64::new(1.0, 0.0);
            let h = hadamard();
            for q in 0..n {
                v = apply(&embed(n, q, &h), &v);
            }
            for l in 0..layers {
                for q in 0..n {
                    let b = (l * n + q) * 3;
                    v = apply(&embed(n, q, &rz(angles[b])), &v);
                    v = apply(&embed(n, q, &ry(angles[b + 1])), &v);
                    v = apply(&embed(n, q, &rz(angles[b + 2])), &v);
                }
                if n >= 2 {
                    for q in 0..n {
                        v = apply(&cnot(n, q, (q + strides[l]) % n), &v);
                    }
                }
            }
            v
        }
    }

    #[test]
    fn qubit_counts() {
        assert_eq!(num_qubits_for(8), 3);
        assert_eq!(num_qubits_for(2048), 11);
        assert_eq!(num_qubits_for(6), 3);
        assert_eq!(num_qubits_for(2), 1);
        assert_eq!(num_qubits_for(9), 4);
        assert_eq!(num_qubits_for(256), 8);
    }

    #[test]
    fn stride_cycle() {
        assert_eq!(default_strides(3, 2), vec![1, 2]);
        assert_eq!(default_strides(2, 3), vec![1, 1, 1]);
        assert_eq!(default_strides(1, 4), Vec::<usize>::new());
        assert_eq!(default_strides(4, 5), vec![1, 2, 3, 1, 2]);
    }

    #[test]
    fn layer_two_entangles_at_distance_two() {
        // n = 3, L = 2: the dense reference with explicit strides [1, 2]
        // reproduces the simulator, while stride [1, 1] does not.
        let config = AnsatzConfig::new(3, 2).unwrap();
        let params = random_params(&config, 4);
        let state = run_circuit(&config, &params).unwrap();
        let reference = dense::run(3, 2, &[1, 2], params.as_slice());
        let other = dense::run(3, 2, &[1, 1], params.as_slice());
        let dist = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(dist(state.amplitudes(), &reference) < 1e-12);
        assert!(dist(state.amplitudes(), &other) > 1e-3);
    }

    #[test]
    fn matches_dense_reference() {
        for (n, l) in [(1, 2), (2, 3), (3, 3), (4, 2)] {
            let config = AnsatzConfig::new(n, l).unwrap();
            let params = random_params(&config, (n * 10 + l) as u64);
            let state = run_circuit(&config, &params).unwrap();
            let reference = dense::run(n, l, config.strides(), params.as_slice());
            for (a, b) in state.amplitudes().iter().zip(&reference) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hadamard_layer_only() {
        let s = run_circuit(&AnsatzConfig::new(1, 0).unwrap(), &ParameterVector::new(vec![])).unwrap();
        for a in s.amplitudes() {
            assert!((a - Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        }
        let s = run_circuit(&AnsatzConfig::new(2, 0).unwrap(), &ParameterVector::new(vec![])).unwrap();
        for a in s.amplitudes() {
            assert!((a - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_angles_keep_uniform_distribution() {
        for (n, l) in [(2, 1), (3, 4), (5, 3)] {
            let config = AnsatzConfig::new(n, l).unwrap();
            let h = probabilities(&config, &ParameterVector::zeros(&config)).unwrap();
            let u = 1.0 / config.dim() as f64;
            assert!(h.probs.iter().all(|p| (p - u).abs() < 1e-12));
        }
    }

    #[test]
    fn probability_examples() {
        let h = probabilities(&AnsatzConfig::new(1, 0).unwrap(), &ParameterVector::new(vec![])).unwrap();
        assert!(h.probs.iter().all(|p| (p - 0.5).abs() < 1e-15));
        assert_eq!(h.shots, Shots::Exact);
        let h = probabilities(&AnsatzConfig::new(3, 0).unwrap(), &ParameterVector::new(vec![])).unwrap();
        assert_eq!(h.len(), 8);
        assert!(h.probs.iter().all(|p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn shape_is_checked() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        assert!(matches!(run_circuit(&config, &ParameterVector::new(vec![0.0; 11])), Err(Error::ShapeMismatch(_))));
        assert!(AnsatzConfig::with_strides(3, 2, vec![1, 3]).is_err());
        assert!(AnsatzConfig::with_strides(3, 2, vec![1]).is_err());
        assert!(AnsatzConfig::with_strides(1, 1, vec![1]).is_err());
    }

    #[test]
    fn rotation_inverse_restores_state() {
        let config = AnsatzConfig::new(3, 2).unwrap();
        let mut rng = seeds::rng(3);
        for _ in 0..50 {
            let mut psi = run_circuit(&config, &random_params(&config, rng.gen())).unwrap();
            let before = psi.clone();
            let (a, b, c): (f64, f64, f64) = (rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0));
            let q = rng.gen_range(0..3);
            psi.apply_1q(q, &rot(a, b, c));
            psi.apply_1q(q, &rot(-c, -b, -a));
            for (x, y) in psi.amplitudes().iter().zip(before.amplitudes()) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn unitarity_over_random_draws() {
        let mut rng = seeds::rng(8);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=5);
            let l = rng.gen_range(0..=4);
            let config = AnsatzConfig::new(n, l).unwrap();
            let s = run_circuit(&config, &random_params(&config, rng.gen())).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_examples() {
        let config = AnsatzConfig::new(1, 0).unwrap();
        let empty = ParameterVector::new(vec![]);
        let h = sample_histogram(&config, &empty, 1_000_000, 5).unwrap();
        assert!(h.probs.iter().all(|p| (p - 0.5).abs() < 0.005));
        assert_eq!(h.shots, Shots::Finite(1_000_000));

        let config = AnsatzConfig::new(3, 2).unwrap();
        let params = random_params(&config, 1);
        let one = sample_histogram(&config, &params, 1, 9).unwrap();
        assert_eq!(one.probs.iter().filter(|&&p| p == 1.0).count(), 1);
        assert_eq!(one.probs.iter().filter(|&&p| p == 0.0).count(), 7);

        assert_eq!(
            sample_histogram(&config, &params, 500, 42).unwrap(),
            sample_histogram(&config, &params, 500, 42).unwrap()
        );
        assert!(sample_histogram(&config, &params, 0, 42).is_err());
    }

    #[test]
    fn sampled_counts_sum_to_shots() {
        let config = AnsatzConfig::new(4, 3).unwrap();
        let params = random_params(&config, 77);
        for shots in [1, 7, 100, 12345] {
            let h = sample_histogram(&config, &params, shots, shots).unwrap();
            let total: u64 = h.probs.iter().map(|p| (p * shots as f64).round() as u64).sum();
            assert_eq!(total, shots);
        }
    }

    /// Central finite differences of the probabilities, h = 1e-5.
    fn finite_difference_jacobian(config: &AnsatzConfig, params: &ParameterVector) -> Vec<Vec<f64>> {
        let h = 1e-5;
        (0..config.num_params())
            .map(|i| {
                let plus = probabilities(config, &params.shifted(i, h)).unwrap().probs;
                let minus = probabilities(config, &params.shifted(i, -h)).unwrap().probs;
                plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            })
            .collect()
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for seed in 0..5 {
            let config = AnsatzConfig::new(3, 2).unwrap();
            let params = random_params(&config, seed);
            let fd = finite_difference_jacobian(&config, &params);
            for mode in [GradientMode::Analytic, GradientMode::ParameterShift] {
                let jac = probability_jacobian(&config, &params, mode, None).unwrap();
                assert_eq!((jac.rows(), jac.cols()), (8, 18));
                for (i, col) in fd.iter().enumerate() {
                    for (k, &expected) in col.iter().enumerate() {
                        let got = jac.get(k, i);
                        let err = (got - expected).abs();
                        assert!(err <= 1e-8 || err / expected.abs() < 1e-4, "{mode:?} k={k} i={i}: {got} vs {expected}");
                    }
                }
            }
        }
    }

    #[test]
    fn jacobian_modes_agree_and_columns_sum_to_zero() {
        let config = AnsatzConfig::new(4, 3).unwrap();
        let params = random_params(&config, 21);
        let a = probability_jacobian(&config, &params, GradientMode::Analytic, None).unwrap();
        let s = probability_jacobian(&config, &params, GradientMode::ParameterShift, None).unwrap();
        for i in 0..a.cols() {
            assert!(a.column(i).iter().sum::<f64>().abs() < 1e-9);
            for k in 0..a.rows() {
                assert!((a.get(k, i) - s.get(k, i)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_jacobian_without_layers() {
        let config = AnsatzConfig::new(2, 0).unwrap();
        let jac = probability_jacobian(&config, &ParameterVector::new(vec![]), GradientMode::Analytic, None).unwrap();
        assert!(jac.is_empty());
        assert_eq!(jac.rows(), 4);
    }

    #[test]
    fn sampled_shift_jacobian_is_close() {
        let config = AnsatzConfig::new(2, 1).unwrap();
        let params = random_params(&config, 2);
        let exact = probability_jacobian(&config, &params, GradientMode::Analytic, None).unwrap();
        let sampled = probability_jacobian(
            &config,
            &params,
            GradientMode::ParameterShift,
            Some(ShiftSampling { shots: 400_000, seed: 1 }),
        )
        .unwrap();
        for i in 0..exact.cols() {
            for k in 0..exact.rows() {
                assert!((exact.get(k, i) - sampled.get(k, i)).abs() < 0.01);
            }
        }
    }

    #[test]
    fn counters_track_work() {
        let config = AnsatzConfig::new(3, 2).unwrap();
        let params = random_params(&config, 2);
        let mut sim = Simulator::new(config.clone());
        sim.probabilities(&params).unwrap();
        sim.sample(&params, 100, 1).unwrap();
        let c = sim.counters();
        assert_eq!(c.circuit_executions, 2);
        assert_eq!(c.shots_total, 100);
        assert_eq!(c.gate_applications, 2 * config.gate_count() as u64);
        assert_eq!(config.gate_count(), 3 + 2 * (9 + 3));
    }

    #[test]
    fn shots_serde() {
        assert_eq!(serde_json::to_string(&Shots::Exact).unwrap(), "\"exact\"");
        assert_eq!(serde_json::to_string(&Shots::Finite(768)).unwrap(), "768");
        assert_eq!(serde_json::from_str::<Shots>("768").unwrap(), Shots::Finite(768));
        assert_eq!(serde_json::from_str::<Shots>("\"exact\"").unwrap(), Shots::Exact);
        assert!(serde_json::from_str::<Shots>("0").is_err());
    }

    proptest! {
        #[test]
        fn vjp_equals_weighted_jacobian(seed in any::<u64>(), n in 1usize..4, l in 0usize..3) {
            let config = AnsatzConfig::new(n, l).unwrap();
            let params = random_params(&config, seed);
            let mut rng = seeds::rng(seed ^ 1);
            let weights: Vec<f64> = (0..config.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let jac = probability_jacobian(&config, &params, GradientMode::ParameterShift, None).unwrap();
            let (_, vjp) = Simulator::new(config.clone()).probability_vjp(&params, &weights).unwrap();
            for (a, b) in vjp.iter().zip(jac.left_multiply(&weights)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
