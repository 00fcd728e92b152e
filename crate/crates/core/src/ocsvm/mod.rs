//! ν-one-class SVM over a precomputed kernel matrix.
//!
//! The dual is
//!
//! ```text
//! minimize ½ αᵀKα   subject to 0 ≤ αᵢ ≤ 1/(νN),  Σαᵢ = 1
//! ```
//!
//! solved by pairwise (SMO) updates on the maximal violating pair. The
//! decision score of a query `x` is `Σᵢ αᵢ k(xᵢ, x) − ρ`; positive means
//! inlier. The solver only reads kernel entries, so the quantum and dot
//! kernels share every code path.

pub mod csvm;
pub mod oracle;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::qkernel::{regularize_psd, Estimator, Kernel, KernelKind, KernelMatrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Slack below the box bound that still counts as "at the bound" when
/// picking margin support vectors for ρ.
const BOUND_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct DualProblem<'a> {
    pub kernel: ArrayView2<'a, f64>,
    pub nu: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl<'a> DualProblem<'a> {
    pub fn new(kernel: ArrayView2<'a, f64>, nu: f64) -> Self {
        DualProblem {
            kernel,
            nu,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    /// Upper box bound 1/(νN).
    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.kernel.nrows() as f64)
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = self.kernel.dim();
        if n == 0 || n != m {
            return Err(Error::Config(format!("kernel matrix must be square and nonempty, got {n}x{m}")));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1], got {}", self.nu)));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config("tolerance and max_iterations must be positive".into()));
        }
        if self.nu * (n as f64) < 1.0 - 1e-12 {
            return Err(Error::Infeasible(format!(
                "{n} samples cannot satisfy nu = {} (need at least {})",
                self.nu,
                (1.0 / self.nu).ceil()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.kernel[[i, j]] != self.kernel[[j, i]] {
                    return Err(Error::Config(format!("kernel matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub rho: f64,
    /// ½ αᵀKα at the returned point.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DualSolution {
    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.alphas.len()).filter(|&i| self.alphas[i] > 0.0).collect()
    }
}

pub fn dual_objective(k: ArrayView2<f64>, alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut total = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += k[[i, j]] * alphas[j];
        }
        total += alphas[i] * row;
    }
    0.5 * total
}

/// Runs SMO to the requested KKT tolerance.
pub fn train(problem: &DualProblem) -> Result<DualSolution> {
    problem.validate()?;
    let k = problem.kernel;
    let n = k.nrows();
    let c = problem.upper_bound();

    let first = k[[0, 0]];
    if k.iter().all(|&v| v == first) {
        let alphas = vec![1.0 / n as f64; n];
        return Ok(finish(k, alphas, c, 0, true));
    }

    // ⌊νN⌋ variables at the bound, the remainder of the unit mass on the next one
    let mut alphas = vec![0.0; n];
    let mut left: f64 = 1.0;
    for a in alphas.iter_mut() {
        if left <= 0.0 {
            break;
        }
        let take = left.min(c);
        *a = take;
        left -= take;
    }

    let mut grad: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[[i, j]] * alphas[j]).sum())
        .collect();
    #[cfg(debug_assertions)]
    let mut objective = dual_objective(k, &alphas);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < problem.max_iterations {
        // i: raise (α < C) with smallest gradient; j: lower (α > 0) with largest
        let mut i = usize::MAX;
        let mut g_min = f64::INFINITY;
        let mut j = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if alphas[t] < c && grad[t] < g_min {
                g_min = grad[t];
                i = t;
            }
            if alphas[t] > 0.0 && grad[t] > g_max {
                g_max = grad[t];
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min <= problem.tolerance {
            converged = true;
            break;
        }
        let curvature = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
        let room_i = c - alphas[i];
        let room_j = alphas[j];
        let step = ((g_max - g_min) / curvature.max(1e-12)).min(room_i).min(room_j);
        // land exactly on the box when clipped
        alphas[i] = if step == room_i { c } else { alphas[i] + step };
        alphas[j] = if step == room_j { 0.0 } else { alphas[j] - step };
        for t in 0..n {
            grad[t] += step * (k[[t, i]] - k[[t, j]]);
        }
        #[cfg(debug_assertions)]
        {
            let next = objective + step * (g_min - g_max) + 0.5 * step * step * curvature;
            debug_assert!(
                next <= objective + 1e-12 * (1.0 + objective.abs()),
                "dual objective increased: {objective} -> {next}"
            );
            objective = next;
        }
        iterations += 1;
    }
    Ok(finish(k, alphas, c, iterations, converged))
}

fn finish(k: ArrayView2<f64>, alphas: Vec<f64>, c: f64, iterations: usize, converged: bool) -> DualSolution {
    let n = alphas.len();
    let grad: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[[i, j]] * alphas[j]).sum())
        .collect();
    let margin: Vec<usize> = (0..n)
        .filter(|&i| alphas[i] > 0.0 && alphas[i] < c - BOUND_EPS)
        .collect();
    let pool: Vec<usize> = if margin.is_empty() {
        (0..n).filter(|&i| alphas[i] > 0.0).collect()
    } else {
        margin
    };
    let rho = pool.iter().map(|&i| grad[i]).sum::<f64>() / pool.len() as f64;
    let objective = 0.5 * alphas.iter().zip(&grad).map(|(a, g)| a * g).sum::<f64>();
    DualSolution {
        alphas,
        rho,
        objective,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Inlier,
    Outlier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub nu: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            nu: 0.1,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// A trained one-class model. `training_refs` holds the support vectors in
/// the order of `support_indices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcsvmModel {
    pub alphas: Vec<f64>,
    pub support_indices: Vec<usize>,
    pub rho: f64,
    pub nu: f64,
    pub kernel_kind: KernelKind,
    pub kernel: Kernel,
    pub training_refs: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

impl OcsvmModel {
    /// Builds the Gram matrix of `x` under `kernel` and trains on it.
    /// Shot-estimated Gram matrices are shifted to be PSD first.
    pub fn fit(x: ArrayView2<f64>, kernel: &Kernel, opts: &SolverOptions) -> Result<Self> {
        let mut gram = kernel.matrix(x, None)?;
        if let Kernel::QuantumFidelity {
            estimator: Estimator::Shots { .. },
            ..
        } = kernel
        {
            let lo = min_eigenvalue(gram.values.view());
            if lo < -1e-8 {
                gram = regularize_psd(&gram, -2.0 * lo)?;
            }
        }
        Self::from_gram(x, &gram, kernel, opts)
    }

    pub fn from_gram(
        x: ArrayView2<f64>,
        gram: &KernelMatrix,
        kernel: &Kernel,
        opts: &SolverOptions,
    ) -> Result<Self> {
        if gram.nrows() != x.nrows() {
            return Err(Error::Config("Gram matrix does not match training rows".into()));
        }
        let problem = DualProblem {
            kernel: gram.values.view(),
            nu: opts.nu,
            tolerance: opts.tolerance,
            max_iterations: opts.max_iterations,
        };
        let sol = train(&problem)?;
        let support_indices = sol.support_indices();
        let training_refs = support_indices.iter().map(|&i| x.row(i).to_vec()).collect();
        Ok(OcsvmModel {
            alphas: sol.alphas,
            support_indices,
            rho: sol.rho,
            nu: opts.nu,
            kernel_kind: kernel.kind(),
            kernel: *kernel,
            training_refs,
            converged: sol.converged,
            iterations: sol.iterations,
            objective: sol.objective,
        })
    }

    /// Σ αᵢ k_row[i] − ρ, with `k_row` taken against the support vectors.
    pub fn decision(&self, k_row: &[f64]) -> Result<f64> {
        if k_row.len() != self.support_indices.len() {
            return Err(Error::Inference(format!(
                "kernel row has {} entries, model has {} support vectors",
                k_row.len(),
                self.support_indices.len()
            )));
        }
        let s: f64 = self
            .support_indices
            .iter()
            .zip(k_row)
            .map(|(&i, k)| self.alphas[i] * k)
            .sum();
        Ok(s - self.rho)
    }

    pub fn predict(&self, k_row: &[f64]) -> Result<Prediction> {
        Ok(classify(self.decision(k_row)?))
    }

    fn refs(&self) -> Array2<f64> {
        let d = self.training_refs.first().map_or(0, Vec::len);
        Array2::from_shape_fn((self.training_refs.len(), d), |(i, j)| self.training_refs[i][j])
    }

    /// Decision scores for each row of `x`.
    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let refs = self.refs();
        let k = self.kernel.matrix(x, Some(refs.view()))?;
        k.values
            .rows()
            .into_iter()
            .map(|r| self.decision(r.as_slice().expect("standard layout")))
            .collect()
    }

    pub fn score_one(&self, x: &[f64]) -> Result<f64> {
        let refs = self.refs();
        let row = self.kernel.row(ndarray::ArrayView1::from(x), refs.view())?;
        self.decision(&row)
    }
}

/// Sign rule with ties going to the inlier side.
pub fn classify(score: f64) -> Prediction {
    if score >= 0.0 {
        Prediction::Inlier
    } else {
        Prediction::Outlier
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn single_point_forces_alpha() {
        let k = array![[1.0]];
        let sol = train(&DualProblem::new(k.view(), 1.0)).unwrap();
        assert_eq!(sol.alphas, vec![1.0]);
        assert_eq!(sol.rho, 1.0);
        assert!(sol.converged);
    }

    #[test]
    fn identical_pair_splits_evenly() {
        let k = array![[1.0, 1.0], [1.0, 1.0]];
        let sol = train(&DualProblem::new(k.view(), 1.0)).unwrap();
        assert_eq!(sol.alphas, vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_rows_give_uniform_point() {
        let k = Array2::from_elem((5, 5), 0.3);
        let sol = train(&DualProblem::new(k.view(), 0.5)).unwrap();
        assert!(sol.alphas.iter().all(|&a| (a - 0.2).abs() < 1e-15));
    }

    #[test]
    fn infeasible_nu_rejected() {
        let k = Array2::<f64>::eye(3);
        assert!(matches!(
            train(&DualProblem::new(k.view(), 0.2)),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            train(&DualProblem::new(k.view(), 0.0)),
            Err(Error::Config(_))
        ));
        let asym = array![[1.0, 0.2], [0.1, 1.0]];
        assert!(matches!(
            train(&DualProblem::new(asym.view(), 1.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identity_kernel_optimum() {
        let k = Array2::<f64>::eye(4);
        let sol = train(&DualProblem::new(k.view(), 1.0)).unwrap();
        for a in &sol.alphas {
            assert!((a - 0.25).abs() < 1e-9);
        }
        assert!((sol.objective - 0.125).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0);
        let k = Kernel::DotProduct.matrix(x.view(), None).unwrap();
        let mut p = DualProblem::new(k.values.view(), 0.2);
        p.max_iterations = 1;
        p.tolerance = 1e-14;
        let sol = train(&p).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn prediction_tie_rule() {
        assert_eq!(classify(0.3), Prediction::Inlier);
        assert_eq!(classify(-0.3), Prediction::Outlier);
        assert_eq!(classify(0.0), Prediction::Inlier);
    }

    #[test]
    fn single_point_model_scores_zero_on_itself() {
        let x = array![[0.4, -0.2]];
        let kernel = Kernel::quantum(crate::qkernel::FeatureMapSpec::new(1));
        let opts = SolverOptions {
            nu: 1.0,
            ..Default::default()
        };
        let m = OcsvmModel::fit(x.view(), &kernel, &opts).unwrap();
        let s = m.score_one(&[0.4, -0.2]).unwrap();
        assert!(s.abs() < 1e-12);
        assert!(matches!(m.decision(&[1.0, 1.0]), Err(Error::Inference(_))));
    }

    #[test]
    fn model_json_round_trip() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]];
        let m = OcsvmModel::fit(
            x.view(),
            &Kernel::DotProduct,
            &SolverOptions {
                nu: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: OcsvmModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
