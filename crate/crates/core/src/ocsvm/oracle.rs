//! Brute-force reference for the one-class dual, used to cross-check the
//! SMO solver on small problems. It shares no code with [`super::train`]:
//! the feasible set is enumerated on a simplex grid and the best grid point
//! is polished by projected gradient descent.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub const MAX_ORACLE_SIZE: usize = 8;

fn objective(k: ArrayView2<f64>, a: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i] * k[[i, j]] * a[j];
        }
    }
    0.5 * s
}

/// Euclidean projection onto `{a : Σa = 1, 0 ≤ aᵢ ≤ upper}` by bisection
/// on the shift τ in `aᵢ = clip(vᵢ − τ, 0, upper)`.
fn project(v: &[f64], upper: f64) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, upper)).sum::<f64>();
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min) - upper - 1.0;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).clamp(0.0, upper)).collect()
}

fn grid_points(n: usize, steps: usize, cap: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let used: usize = prefix.iter().sum();
    let left = steps - used;
    if prefix.len() == n - 1 {
        if left <= cap {
            let mut p = prefix.clone();
            p.push(left);
            out.push(p);
        }
        return;
    }
    for c in 0..=left.min(cap) {
        prefix.push(c);
        grid_points(n, steps, cap, prefix, out);
        prefix.pop();
    }
}

/// Minimum of ½αᵀKα over the one-class feasible set.
pub fn brute_force_dual(k: ArrayView2<f64>, nu: f64, grid_steps: usize) -> Result<f64> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(Error::Oracle("kernel must be square and nonempty".into()));
    }
    if n > MAX_ORACLE_SIZE {
        return Err(Error::Oracle(format!("oracle limited to N <= {MAX_ORACLE_SIZE}, got {n}")));
    }
    if !(nu > 0.0 && nu <= 1.0) || nu * (n as f64) < 1.0 - 1e-12 {
        return Err(Error::Oracle(format!("nu = {nu} infeasible for N = {n}")));
    }
    let upper = 1.0 / (nu * n as f64);
    let steps = grid_steps.max(1);

    let mut best = vec![1.0 / n as f64; n];
    let mut best_obj = objective(k, &best);
    let cap = ((upper * steps as f64) + 1e-9).floor() as usize;
    let mut points = Vec::new();
    grid_points(n, steps, cap, &mut Vec::new(), &mut points);
    for p in points {
        let a: Vec<f64> = p.iter().map(|&c| c as f64 / steps as f64).collect();
        let obj = objective(k, &a);
        if obj < best_obj {
            best_obj = obj;
            best = a;
        }
    }

    // Gershgorin bound on the largest eigenvalue gives a safe step size
    let lipschitz = (0..n)
        .map(|i| (0..n).map(|j| k[[i, j]].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let step = 1.0 / lipschitz;
    let mut a = best;
    for _ in 0..20_000 {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[[i, j]] * a[j]).sum()).collect();
        let moved: Vec<f64> = a.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
        let next = project(&moved, upper);
        let delta = next.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        a = next;
        if delta < 1e-14 {
            break;
        }
    }
    Ok(objective(k, &a).min(best_obj))
}
