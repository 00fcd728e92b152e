//! Library routines checked against the independent references in
//! `common`.

mod common;

use ndarray::{Array2, Axis};
use qtamper::linalg::symmetric_eigenvalues;
use qtamper::preprocess::{moving_average_downsample, PcaModel};
use qtamper::qkernel::{fidelity, Estimator, FeatureMapSpec, Kernel, MapLayout};

use common::*;

fn covariance(x: &Array2<f64>) -> Vec<Vec<f64>> {
    let (n, d) = x.dim();
    let mean = x.mean_axis(Axis(0)).unwrap();
    let mut c = vec![vec![0.0; d]; d];
    for row in x.rows() {
        for a in 0..d {
            for b in 0..d {
                c[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    c.iter_mut().flatten().for_each(|v| *v /= (n - 1) as f64);
    c
}

#[test]
fn pca_variances_match_jacobi() {
    let mut r = rng(1);
    let mut x = gaussian_rows(&mut r, 80, 7, 1.0);
    // give the columns distinct spreads and some correlation
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v * (1.0 + j as f64));
    }
    let shared = x.column(0).to_owned();
    x.column_mut(3).scaled_add(0.5, &shared);

    let pca = PcaModel::fit(x.view(), 4).unwrap();
    let reference = jacobi_eigenvalues(&covariance(&x));
    for (got, want) in pca.explained_variance.iter().zip(&reference) {
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }
    for a in 0..4 {
        for b in 0..4 {
            let dot: f64 = pca.components[a].iter().zip(&pca.components[b]).map(|(p, q)| p * q).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-10);
        }
    }
}

#[test]
fn eigenvalues_match_jacobi() {
    for seed in 0..10 {
        let mut r = rng(50 + seed);
        let b = gaussian_rows(&mut r, 9, 9, 1.0);
        let sym = &b + &b.t();
        let rows: Vec<Vec<f64>> = sym.rows().into_iter().map(|r| r.to_vec()).collect();
        let want = jacobi_eigenvalues(&rows);
        let got = symmetric_eigenvalues(sym.view());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
    }
}

#[test]
fn gram_matrices_match_dense_fidelity() {
    for layout in [MapLayout::Rotations, MapLayout::HadamardFirst] {
        let spec = FeatureMapSpec {
            layout,
            ..FeatureMapSpec::new(3)
        };
        let kernel = Kernel::quantum(spec);
        let mut r = rng(9);
        let x = gaussian_rows(&mut r, 6, 6, 2.0);
        let y = gaussian_rows(&mut r, 4, 6, 2.0);
        let kxx = kernel.matrix(x.view(), None).unwrap();
        let kxy = kernel.matrix(x.view(), Some(y.view())).unwrap();
        for i in 0..6 {
            let xi = x.row(i).to_vec();
            for j in 0..6 {
                let want = dense_fidelity(&xi, &x.row(j).to_vec(), &spec);
                assert!((kxx.get(i, j) - want).abs() < 1e-12);
            }
            for j in 0..4 {
                let yj = y.row(j).to_vec();
                let want = dense_fidelity(&xi, &yj, &spec);
                assert!((kxy.get(i, j) - want).abs() < 1e-12);
                let single = fidelity(&xi, &yj, &spec, Estimator::Exact).unwrap();
                assert!((single - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn hadamard_first_example_against_dense() {
    let spec = FeatureMapSpec {
        layout: MapLayout::HadamardFirst,
        angle_scale: 1.0,
        ..FeatureMapSpec::new(2)
    };
    let pi = std::f64::consts::PI;
    let got = fidelity(&[0.0; 4], &[pi; 4], &spec, Estimator::Exact).unwrap();
    assert!(got.abs() < 1e-12);
    assert!(dense_fidelity(&[0.0; 4], &[pi; 4], &spec).abs() < 1e-12);
}

#[test]
fn downsample_matches_naive_means() {
    let mut r = rng(3);
    let series = uniform_vec(&mut r, 103, -5.0, 5.0);
    for w in [1, 2, 7, 10] {
        let got = moving_average_downsample(&series, w).unwrap();
        let want: Vec<f64> = series.chunks_exact(w).map(|c| c.iter().sum::<f64>() / w as f64).collect();
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}
