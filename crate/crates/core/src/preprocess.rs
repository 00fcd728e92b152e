//! Downsampling, categorical histogram encoding, z-scoring and PCA.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean of each non-overlapping window of `w` samples. A trailing partial
/// window is dropped.
pub fn moving_average_downsample(series: &[f64], w: usize) -> Result<Vec<f64>> {
    if w == 0 {
        return Err(Error::Preprocess("window length must be positive".into()));
    }
    if series.len() < w {
        return Err(Error::Preprocess(format!(
            "series of length {} is shorter than window {w}",
            series.len()
        )));
    }
    Ok(series
        .chunks_exact(w)
        .map(|c| c.iter().sum::<f64>() / w as f64)
        .collect())
}

/// Replaces each category by its relative frequency in the column.
pub fn histogram_encode<T: Eq + Hash>(column: &[T]) -> Vec<f64> {
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for v in column {
        *counts.entry(v).or_default() += 1;
    }
    let n = column.len() as f64;
    column.iter().map(|v| counts[v] as f64 / n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerModel {
    pub means: Vec<f64>,
    /// Population standard deviations; 0 marks a constant column.
    pub stds: Vec<f64>,
}

impl StandardizerModel {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::Preprocess(format!(
                "standardizer needs at least 2 rows, got {n}"
            )));
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            // rounding residue on a constant column
            let std = if std <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { std };
            means.push(mean);
            stds.push(std);
        }
        Ok(StandardizerModel { means, stds })
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::Preprocess(format!(
                "standardizer fit on {} features, got {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| if s == 0.0 { 0.0 } else { (v - m) / s });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub center: Vec<f64>,
    /// k rows of length d, orthonormal, largest-magnitude entry positive.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalues of the kept components, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn fit(x: ArrayView2<f64>, k: usize) -> Result<Self> {
        let (n, d) = x.dim();
        if k == 0 || n < 2 || k > d || k > n - 1 {
            return Err(Error::Preprocess(format!(
                "cannot keep {k} components from {n} rows of dimension {d}"
            )));
        }
        let center: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.sum() / n as f64).collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for row in x.rows() {
            for a in 0..d {
                let da = row[a] - center[a];
                for b in a..d {
                    cov[(a, b)] += da * (row[b] - center[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / (n - 1) as f64;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

        let mut components = Vec::with_capacity(k);
        let mut explained_variance = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |best, e| if e.abs() > best.abs() { e } else { best });
            if pivot < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            components.push(v);
            explained_variance.push(eig.eigenvalues[idx].max(0.0));
        }
        Ok(PcaModel {
            center,
            components,
            explained_variance,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// `(x - center) · componentsᵀ`.
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let d = self.center.len();
        if x.ncols() != d {
            return Err(Error::Preprocess(format!(
                "PCA fit on {d} features, got {}",
                x.ncols()
            )));
        }
        let k = self.components.len();
        let mut out = Array2::zeros((x.nrows(), k));
        for (i, row) in x.rows().into_iter().enumerate() {
            for (c, comp) in self.components.iter().enumerate() {
                out[[i, c]] = comp
                    .iter()
                    .zip(row.iter().zip(&self.center))
                    .map(|(w, (v, m))| w * (v - m))
                    .sum();
            }
        }
        Ok(out)
    }
}

/// Standardizer followed by optional PCA, fit together on one training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub standardizer: StandardizerModel,
    pub pca: Option<PcaModel>,
}

impl Preprocessor {
    pub fn fit(x: ArrayView2<f64>, pca_k: Option<usize>) -> Result<Self> {
        let standardizer = StandardizerModel::fit(x)?;
        let pca = match pca_k {
            Some(k) => {
                let z = standardizer.apply(x)?;
                Some(PcaModel::fit(z.view(), k)?)
            }
            None => None,
        };
        Ok(Preprocessor { standardizer, pca })
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.standardizer.apply(x)?;
        match &self.pca {
            Some(p) => p.apply(z.view()),
            None => Ok(z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn downsample_examples() {
        assert_eq!(
            moving_average_downsample(&[1., 2., 3., 4., 5., 6.], 3).unwrap(),
            vec![2., 5.]
        );
        let s = [0.3, -1.0, 2.5, 7.0];
        assert_eq!(moving_average_downsample(&s, 1).unwrap(), s.to_vec());
        let c = vec![4.25; 185];
        let out = moving_average_downsample(&c, 60).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|&v| (v - 4.25).abs() < 1e-12));
        assert!(matches!(
            moving_average_downsample(&[1.0, 2.0], 3),
            Err(Error::Preprocess(_))
        ));
    }

    #[test]
    fn standardize_examples() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let m = StandardizerModel::fit(x.view()).unwrap();
        let z = m.apply(x.view()).unwrap();
        let expect = [-1.224744871391589, 0.0, 1.224744871391589];
        for i in 0..3 {
            assert!((z[[i, 0]] - expect[i]).abs() < 1e-6);
            assert_eq!(z[[i, 1]], 0.0);
        }
        let refit = StandardizerModel::fit(z.view()).unwrap();
        assert!(refit.means[0].abs() < 1e-12);
        assert!((refit.stds[0] - 1.0).abs() < 1e-12);

        assert!(matches!(
            StandardizerModel::fit(array![[1.0, 2.0]].view()),
            Err(Error::Preprocess(_))
        ));
    }

    #[test]
    fn constant_column_with_rounding_residue_is_zeroed() {
        let x = array![[0.1], [0.1], [0.1], [0.1], [0.1], [0.1], [0.1]];
        let m = StandardizerModel::fit(x.view()).unwrap();
        assert_eq!(m.stds[0], 0.0);
        assert!(m.apply(x.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(histogram_encode(&["A", "A", "B", "B"]), vec![0.5; 4]);
        assert_eq!(
            histogram_encode(&["A", "A", "A", "B"]),
            vec![0.75, 0.75, 0.75, 0.25]
        );
        assert_eq!(histogram_encode(&[7, 7, 7]), vec![1.0; 3]);
    }

    #[test]
    fn pca_on_a_line() {
        let x = Array2::from_shape_fn((9, 2), |(i, _)| i as f64 - 4.0);
        let p = PcaModel::fit(x.view(), 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.components[0][0] - h).abs() < 1e-12);
        assert!((p.components[0][1] - h).abs() < 1e-12);
    }

    #[test]
    fn pca_rejects_too_many_components() {
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i * j) as f64);
        assert!(matches!(PcaModel::fit(x.view(), 4), Err(Error::Preprocess(_))));
        assert!(matches!(PcaModel::fit(x.view(), 0), Err(Error::Preprocess(_))));
    }

    #[test]
    fn model_json_shapes() {
        let m = StandardizerModel {
            means: vec![1.0],
            stds: vec![2.0],
        };
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"means":[1.0],"stds":[2.0]}"#
        );
        let x = array![[1.0, 0.0], [0.0, 1.0], [2.0, 2.5]];
        let p = PcaModel::fit(x.view(), 1).unwrap();
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert!(v["components"][0].is_array());
        assert_eq!(v["center"].as_array().unwrap().len(), 2);
    }
}
