//! Quantum fidelity kernel and the classical dot-product baseline.
//!
//! The feature map is one `RotX`/`RotY` pair per qubit (feature `2q` on X,
//! feature `2q + 1` on Y), optionally preceded by a Hadamard layer, and a
//! linear CNOT chain `q -> q + 1`. The kernel value is the probability of reading |0…0⟩ after
//! running `U(x)` followed by `U(y)†`.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{run_circuit, Gate, QuantumCircuit, StateVector};
use crate::seed::pair_seed;

/// PCA scores of standardized data spread well past ±1 on the leading
/// components; at unit scale they clip and alias near ±π.
pub const DEFAULT_ANGLE_SCALE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub n_qubits: usize,
    /// Encoded angles are clipped to `[-angle_clip, angle_clip]`.
    pub angle_clip: f64,
    /// Multiplier applied to each feature before clipping.
    pub angle_scale: f64,
    #[serde(default)]
    pub layout: MapLayout,
}

/// Gate order of the encoding layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MapLayout {
    /// RotX then RotY on each qubit straight from |0⟩.
    #[default]
    Rotations,
    /// A Hadamard layer before the rotations. RotX then acts on an X
    /// eigenstate, so the even-indexed features only add a global phase.
    HadamardFirst,
}

impl Default for FeatureMapSpec {
    fn default() -> Self {
        FeatureMapSpec {
            n_qubits: 6,
            angle_clip: PI,
            angle_scale: DEFAULT_ANGLE_SCALE,
            layout: MapLayout::default(),
        }
    }
}

impl FeatureMapSpec {
    pub fn new(n_qubits: usize) -> Self {
        FeatureMapSpec {
            n_qubits,
            ..Default::default()
        }
    }

    pub fn n_features(&self) -> usize {
        2 * self.n_qubits
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::qsim::MAX_QUBITS {
            return Err(Error::Config(format!(
                "feature map qubit count {} out of range",
                self.n_qubits
            )));
        }
        if !(self.angle_clip > 0.0) || !self.angle_clip.is_finite() {
            return Err(Error::Config(format!(
                "angle clip must be positive, got {}",
                self.angle_clip
            )));
        }
        if !self.angle_scale.is_finite() || self.angle_scale == 0.0 {
            return Err(Error::Config(format!(
                "angle scale must be finite and nonzero, got {}",
                self.angle_scale
            )));
        }
        Ok(())
    }

    fn angle(&self, value: f64) -> f64 {
        (value * self.angle_scale).clamp(-self.angle_clip, self.angle_clip)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::Encoding(format!(
                "feature vector has {} entries, map expects {}",
                x.len(),
                self.n_features()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Encoding(format!("feature {i} is not finite")));
        }
        Ok(())
    }
}

/// How a fidelity is read out of the final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Estimator {
    #[default]
    Exact,
    Shots { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    QuantumFidelity,
    DotProduct,
}

impl KernelKind {
    pub fn label(&self) -> &'static str {
        match self {
            KernelKind::QuantumFidelity => "quantum",
            KernelKind::DotProduct => "classical",
        }
    }
}

/// Builds the encoding circuit `U(x)`.
pub fn feature_map_circuit(x: &[f64], spec: &FeatureMapSpec) -> Result<QuantumCircuit> {
    spec.validate()?;
    spec.check_input(x)?;
    let n = spec.n_qubits;
    let mut circuit = QuantumCircuit::new(n)?;
    if spec.layout == MapLayout::HadamardFirst {
        for q in 0..n {
            circuit.push(Gate::h(q))?;
        }
    }
    for q in 0..n {
        circuit.push(Gate::rx(spec.angle(x[2 * q]), q))?;
        circuit.push(Gate::ry(spec.angle(x[2 * q + 1]), q))?;
    }
    for q in 0..n.saturating_sub(1) {
        circuit.push(Gate::cnot(q, q + 1))?;
    }
    Ok(circuit)
}

/// `U(x)|0…0⟩`.
pub fn feature_state(x: &[f64], spec: &FeatureMapSpec) -> Result<StateVector> {
    let circuit = feature_map_circuit(x, spec)?;
    run_circuit(&circuit, &StateVector::zero_state(spec.n_qubits)?)
}

/// |⟨0…0| U†(y) U(x) |0…0⟩|², evaluated by running both circuits.
pub fn fidelity(x: &[f64], y: &[f64], spec: &FeatureMapSpec, estimator: Estimator) -> Result<f64> {
    let forward = feature_state(x, spec)?;
    fidelity_from_state(&forward, y, spec, estimator)
}

fn fidelity_from_state(
    forward: &StateVector,
    y: &[f64],
    spec: &FeatureMapSpec,
    estimator: Estimator,
) -> Result<f64> {
    let back = feature_map_circuit(y, spec)?.adjoint();
    let out = run_circuit(&back, forward)?;
    match estimator {
        Estimator::Exact => Ok(out.zero_probability()),
        Estimator::Shots { count, seed } => {
            Ok(out.sample_zero_probability(count, seed)?.clamp(0.0, 1.0))
        }
    }
}

pub fn dot_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Encoding(format!(
            "dot product of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub values: Array2<f64>,
    pub kind: KernelKind,
    pub symmetric: bool,
}

impl KernelMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Row-major CSV with a `k_0,…,k_{M-1}` header.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.ncols()).map(|j| format!("k_{j}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.values.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// A kernel choice with everything needed to evaluate it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Kernel {
    DotProduct,
    QuantumFidelity {
        map: FeatureMapSpec,
        estimator: Estimator,
    },
}

impl Kernel {
    pub fn quantum(map: FeatureMapSpec) -> Self {
        Kernel::QuantumFidelity {
            map,
            estimator: Estimator::Exact,
        }
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            Kernel::DotProduct => KernelKind::DotProduct,
            Kernel::QuantumFidelity { .. } => KernelKind::QuantumFidelity,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Kernel::DotProduct => dot_kernel(x, y),
            Kernel::QuantumFidelity { map, estimator } => fidelity(x, y, map, *estimator),
        }
    }

    /// Gram matrix between the rows of `x` and the rows of `y`
    /// (`None` means `y = x`; only the upper triangle is evaluated).
    pub fn matrix(&self, x: ArrayView2<f64>, y: Option<ArrayView2<f64>>) -> Result<KernelMatrix> {
        kernel_matrix(x, y, self)
    }

    /// Kernel values between one query and each row of `refs`.
    pub fn row(&self, query: ArrayView1<f64>, refs: ArrayView2<f64>) -> Result<Vec<f64>> {
        let q = query.to_vec();
        refs.rows()
            .into_iter()
            .map(|r| self.eval(&q, &r.to_vec()))
            .collect()
    }
}

pub fn kernel_matrix(
    x: ArrayView2<f64>,
    y: Option<ArrayView2<f64>>,
    kernel: &Kernel,
) -> Result<KernelMatrix> {
    if x.nrows() == 0 {
        return Err(Error::Config("kernel matrix of an empty set".into()));
    }
    let symmetric = y.is_none();
    let y = y.unwrap_or(x);
    if y.nrows() == 0 {
        return Err(Error::Config("kernel matrix against an empty set".into()));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::Encoding(format!(
            "row dimensions differ: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    let xs: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let ys: Vec<Vec<f64>> = y.rows().into_iter().map(|r| r.to_vec()).collect();
    let (n, m) = (xs.len(), ys.len());

    let entry: Box<dyn Fn(usize, usize) -> Result<f64> + Sync> = match kernel {
        Kernel::DotProduct => Box::new(|i, j| dot_kernel(&xs[i], &ys[j])),
        Kernel::QuantumFidelity {
            map,
            estimator: Estimator::Exact,
        } => {
            // U(y)†U(x) overlap equals ⟨ψ(y)|ψ(x)⟩, so each state is simulated once.
            let sx = states(&xs, map)?;
            let sy = if symmetric { sx.clone() } else { states(&ys, map)? };
            Box::new(move |i, j| Ok(sy[j].inner(&sx[i]).norm_sqr()))
        }
        Kernel::QuantumFidelity {
            map,
            estimator: Estimator::Shots { count, seed },
        } => {
            let sx = states(&xs, map)?;
            let (map, count, seed) = (*map, *count, *seed);
            Box::new(move |i, j| {
                let est = Estimator::Shots {
                    count,
                    seed: pair_seed(seed, i, j),
                };
                fidelity_from_state(&sx[i], &ys[j], &map, est)
            })
        }
    };

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = if symmetric { i } else { 0 };
            (start..m).map(|j| entry(i, j)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut values = Array2::<f64>::zeros((n, m));
    for (i, row) in rows.into_iter().enumerate() {
        let start = if symmetric { i } else { 0 };
        for (off, v) in row.into_iter().enumerate() {
            let j = start + off;
            values[[i, j]] = v;
            if symmetric {
                values[[j, i]] = v;
            }
        }
    }
    Ok(KernelMatrix {
        values,
        kind: kernel.kind(),
        symmetric,
    })
}

fn states(rows: &[Vec<f64>], map: &FeatureMapSpec) -> Result<Vec<StateVector>> {
    rows.par_iter().map(|r| feature_state(r, map)).collect()
}

/// Adds `jitter` to the diagonal.
pub fn regularize_psd(k: &KernelMatrix, jitter: f64) -> Result<KernelMatrix> {
    if !(jitter >= 0.0) {
        return Err(Error::Config(format!("jitter must be >= 0, got {jitter}")));
    }
    if k.nrows() != k.ncols() {
        return Err(Error::Config("regularizing a non-square kernel matrix".into()));
    }
    let mut out = k.clone();
    for i in 0..out.nrows() {
        out.values[[i, i]] += jitter;
    }
    Ok(out)
}
