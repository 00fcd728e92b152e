//! Reference implementations shared by the integration tests. None of them
//! call into the simulator, the kernel module or nalgebra.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use qtamper::qkernel::{FeatureMapSpec, MapLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<C>>;

pub fn identity(dim: usize) -> Dense {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) }).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![C::new(0.0, 0.0); m]; n];
    for i in 0..n {
        for t in 0..k {
            let av = a[i][t];
            if av == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..m {
                out[i][j] += av * b[t][j];
            }
        }
    }
    out
}

pub fn dagger(a: &Dense) -> Dense {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i].conj()).collect()).collect()
}

fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![C::new(0.0, 0.0); ra * rb]; ra * rb];
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

pub fn hadamard2() -> Dense {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![C::new(s, 0.0), C::new(s, 0.0)], vec![C::new(s, 0.0), C::new(-s, 0.0)]]
}

pub fn rx2(theta: f64) -> Dense {
    let (s, c) = (theta / 2.0).sin_cos();
    vec![vec![C::new(c, 0.0), C::new(0.0, -s)], vec![C::new(0.0, -s), C::new(c, 0.0)]]
}

pub fn ry2(theta: f64) -> Dense {
    let (s, c) = (theta / 2.0).sin_cos();
    vec![vec![C::new(c, 0.0), C::new(-s, 0.0)], vec![C::new(s, 0.0), C::new(c, 0.0)]]
}

/// A single-qubit gate on `target` in an `n`-qubit register, qubit 0 being
/// the least significant bit of the basis index.
pub fn embed(gate: &Dense, target: usize, n: usize) -> Dense {
    let mut full = identity(1);
    for q in (0..n).rev() {
        let m = if q == target { gate.clone() } else { identity(2) };
        full = kron(&full, &m);
    }
    full
}

pub fn cnot_full(control: usize, target: usize, n: usize) -> Dense {
    let dim = 1 << n;
    let mut out = vec![vec![C::new(0.0, 0.0); dim]; dim];
    for b in 0..dim {
        let to = if b >> control & 1 == 1 { b ^ (1 << target) } else { b };
        out[to][b] = C::new(1.0, 0.0);
    }
    out
}

/// Dense unitary of the feature map, built gate by gate from the encoding
/// description.
pub fn feature_unitary(x: &[f64], spec: &FeatureMapSpec) -> Dense {
    let n = spec.n_qubits;
    let angle = |v: f64| (v * spec.angle_scale).clamp(-spec.angle_clip, spec.angle_clip);
    let mut u = identity(1 << n);
    let mut apply = |g: Dense| u = matmul(&g, &u);
    if spec.layout == MapLayout::HadamardFirst {
        for q in 0..n {
            apply(embed(&hadamard2(), q, n));
        }
    }
    for q in 0..n {
        apply(embed(&rx2(angle(x[2 * q])), q, n));
        apply(embed(&ry2(angle(x[2 * q + 1])), q, n));
    }
    for q in 0..n.saturating_sub(1) {
        apply(cnot_full(q, q + 1, n));
    }
    u
}

/// |(U(y)† U(x))₀₀|² from dense matrices.
pub fn dense_fidelity(x: &[f64], y: &[f64], spec: &FeatureMapSpec) -> f64 {
    let ux = feature_unitary(x, spec);
    let uy = feature_unitary(y, spec);
    // only column 0 of U(x) matters
    let col: Vec<C> = ux.iter().map(|r| r[0]).collect();
    let amp: C = uy.iter().zip(&col).map(|(r, c)| r[0].conj() * c).sum();
    amp.norm_sqr()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// non-increasing.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> ndarray::Array2<f64> {
    use rand_distr::{Distribution, StandardNormal};
    ndarray::Array2::from_shape_fn((n, d), |_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
