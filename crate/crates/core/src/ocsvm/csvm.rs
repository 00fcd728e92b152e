//! Soft-margin binary C-SVM (and one-vs-rest wrapper) used as the baseline
//! classifier when measuring how much an attack degrades accuracy.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qkernel::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvmOptions {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CsvmOptions {
    fn default() -> Self {
        CsvmOptions {
            c: 1.0,
            tolerance: 1e-4,
            max_iterations: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvmModel {
    /// αᵢ·yᵢ for each support vector.
    pub coefficients: Vec<f64>,
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub converged: bool,
}

impl CsvmModel {
    /// Σ αᵢyᵢ k_row[i] + b, `k_row` against the support vectors.
    pub fn decision(&self, k_row: &[f64]) -> Result<f64> {
        if k_row.len() != self.coefficients.len() {
            return Err(Error::Inference(format!(
                "kernel row has {} entries, model has {} support vectors",
                k_row.len(),
                self.coefficients.len()
            )));
        }
        Ok(self.coefficients.iter().zip(k_row).map(|(a, k)| a * k).sum::<f64>() + self.bias)
    }
}

/// ±1 prediction; a zero score maps to +1.
pub fn csvm_predict(model: &CsvmModel, k_row: &[f64]) -> Result<i8> {
    Ok(if model.decision(k_row)? >= 0.0 { 1 } else { -1 })
}

/// Solves `min ½ Σ αᵢαⱼyᵢyⱼKᵢⱼ − Σαᵢ` with `0 ≤ α ≤ C`, `Σ yᵢαᵢ = 0`.
pub fn train_binary_csvm(k: ArrayView2<f64>, labels: &[i8], opts: &CsvmOptions) -> Result<CsvmModel> {
    let n = labels.len();
    if k.dim() != (n, n) {
        return Err(Error::Training(format!("kernel is {:?}, expected {n}x{n}", k.dim())));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::Training("labels must be +1 or -1".into()));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::Training("both classes must be present".into()));
    }
    if !(opts.c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {}", opts.c)));
    }
    let c = opts.c;
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective: Qα − 1
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut converged = false;
    let mut iter = 0;
    while iter < opts.max_iterations {
        let (mut i, mut m_up) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut m_low) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m_up {
                m_up = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < m_low {
                m_low = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || m_up - m_low <= opts.tolerance {
            converged = true;
            break;
        }
        // α_i += y_i t, α_j -= y_j t keeps Σ yα fixed
        let curvature = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(1e-12);
        let room_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let t = ((m_up - m_low) / curvature).min(room_i).min(room_j);
        alpha[i] = if t == room_i {
            if y[i] > 0.0 { c } else { 0.0 }
        } else {
            alpha[i] + y[i] * t
        };
        alpha[j] = if t == room_j {
            if y[j] > 0.0 { 0.0 } else { c }
        } else {
            alpha[j] - y[j] * t
        };
        for s in 0..n {
            grad[s] += t * y[s] * (k[[s, i]] - k[[s, j]]);
        }
        iter += 1;
    }

    // offset from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { (ub + lb) / 2.0 };

    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(CsvmModel {
        coefficients: support_indices.iter().map(|&t| alpha[t] * y[t]).collect(),
        support_indices,
        bias: -rho,
        converged,
    })
}

/// Kernel classifier over class ids: a single C-SVM for two classes,
/// one-vs-rest with argmax scores otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelClassifier {
    pub kernel: Kernel,
    pub classes: Vec<usize>,
    pub models: Vec<CsvmModel>,
    pub train_rows: Vec<Vec<f64>>,
}

impl KernelClassifier {
    pub fn fit(x: ArrayView2<f64>, labels: &[usize], kernel: &Kernel, opts: &CsvmOptions) -> Result<Self> {
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::Training("classifier needs at least two classes".into()));
        }
        let gram = kernel.matrix(x, None)?;
        let targets: Vec<usize> = if classes.len() == 2 { vec![classes[1]] } else { classes.clone() };
        let models = targets
            .iter()
            .map(|&cls| {
                let y: Vec<i8> = labels.iter().map(|&l| if l == cls { 1 } else { -1 }).collect();
                train_binary_csvm(gram.values.view(), &y, opts)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelClassifier {
            kernel: *kernel,
            classes,
            models,
            train_rows: x.rows().into_iter().map(|r| r.to_vec()).collect(),
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let d = self.train_rows[0].len();
        let refs = Array2::from_shape_fn((self.train_rows.len(), d), |(i, j)| self.train_rows[i][j]);
        let k = self.kernel.matrix(x, Some(refs.view()))?;
        let mut out = Vec::with_capacity(x.nrows());
        for row in k.values.rows() {
            let scores = self
                .models
                .iter()
                .map(|m| {
                    let kr: Vec<f64> = m.support_indices.iter().map(|&s| row[s]).collect();
                    m.decision(&kr)
                })
                .collect::<Result<Vec<f64>>>()?;
            let label = if self.models.len() == 1 {
                if scores[0] >= 0.0 { self.classes[1] } else { self.classes[0] }
            } else {
                let best = scores
                    .iter()
                    .enumerate()
                    .fold(0, |b, (i, s)| if *s > scores[b] { i } else { b });
                self.classes[best]
            };
            out.push(label);
        }
        Ok(out)
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}
