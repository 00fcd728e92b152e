//! White-box tampering attacks: label flipping, targeted poisoning,
//! anomaly injection for single-class data, and FGSM perturbation.
//!
//! Every attack returns the altered dataset together with a mask of the rows
//! it touched. All randomness comes from the seed carried by the attack.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureDataset, TamperedDataset};
use crate::error::{Error, Result};

pub const DEFAULT_FLIP_RATE: f64 = 0.3;
pub const DEFAULT_TARGETED_RATE: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_ANOMALY_MAGNITUDE: f64 = 3.0;

/// Central-difference step for one-class score gradients.
pub const SCORE_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    LabelFlip,
    TargetedPoison,
    AdvPerturb,
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::LabelFlip => "label_flip",
            AttackKind::TargetedPoison => "targeted_poison",
            AttackKind::AdvPerturb => "adv_perturb",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            AttackKind::LabelFlip => "Label Flipping",
            AttackKind::TargetedPoison => "Targeted Poisoning",
            AttackKind::AdvPerturb => "Adv Perturbation",
        }
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label_flip" => Ok(AttackKind::LabelFlip),
            "targeted_poison" => Ok(AttackKind::TargetedPoison),
            "adv_perturb" => Ok(AttackKind::AdvPerturb),
            other => Err(Error::Usage(format!(
                "unknown attack '{other}' (expected label_flip, targeted_poison or adv_perturb)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Fraction of samples (label_flip) or of the source class (targeted_poison).
    pub rate: Option<f64>,
    /// L∞ budget for adv_perturb.
    pub epsilon: f64,
    pub source_class: usize,
    pub target_class: usize,
    /// Displacement scale, in per-feature standard deviations, when a
    /// label flip on single-class data becomes anomaly injection.
    pub magnitude: f64,
    pub seed: u64,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            kind: AttackKind::LabelFlip,
            rate: None,
            epsilon: DEFAULT_EPSILON,
            source_class: 0,
            target_class: 1,
            magnitude: DEFAULT_ANOMALY_MAGNITUDE,
            seed: 0,
        }
    }
}

impl AttackSpec {
    pub fn label_flip(rate: f64, seed: u64) -> Self {
        AttackSpec {
            kind: AttackKind::LabelFlip,
            rate: Some(rate),
            seed,
            ..Default::default()
        }
    }

    pub fn targeted(source_class: usize, target_class: usize, rate: f64, seed: u64) -> Self {
        AttackSpec {
            kind: AttackKind::TargetedPoison,
            rate: Some(rate),
            source_class,
            target_class,
            seed,
            ..Default::default()
        }
    }

    pub fn adv_perturb(epsilon: f64, seed: u64) -> Self {
        AttackSpec {
            kind: AttackKind::AdvPerturb,
            epsilon,
            seed,
            ..Default::default()
        }
    }

    pub fn effective_rate(&self) -> f64 {
        self.rate.unwrap_or(match self.kind {
            AttackKind::TargetedPoison => DEFAULT_TARGETED_RATE,
            _ => DEFAULT_FLIP_RATE,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AttackKind::LabelFlip | AttackKind::TargetedPoison => check_rate(self.effective_rate())?,
            AttackKind::AdvPerturb => check_epsilon(self.epsilon)?,
        }
        if self.kind == AttackKind::TargetedPoison && self.source_class == self.target_class {
            return Err(Error::Config("source and target class must differ".into()));
        }
        if self.kind == AttackKind::LabelFlip && !(self.magnitude > 0.0 && self.magnitude.is_finite()) {
            return Err(Error::Config(format!("anomaly magnitude must be positive, got {}", self.magnitude)));
        }
        Ok(())
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config(format!("attack rate must lie in (0, 1], got {rate}")));
    }
    Ok(())
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

/// ⌊rate·n⌋, robust to products like 0.29 × 100 landing just below an integer.
pub fn attack_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64) + 1e-9).floor() as usize
}

/// Relabels ⌊rate·N⌋ uniformly chosen samples to a different class, chosen
/// uniformly among the other classes.
pub fn flip_labels(clean: &FeatureDataset, rate: f64, seed: u64) -> Result<TamperedDataset> {
    check_rate(rate)?;
    if clean.class_count < 2 || clean.distinct_classes() < 2 {
        return Err(Error::Usage(
            "label flipping needs at least two classes; use inject_anomalies for single-class data".into(),
        ));
    }
    let n = clean.len();
    let count = attack_count(rate, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TamperedDataset::untouched(clean);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    for i in picked {
        let old = clean.labels[i];
        let mut new = rng.random_range(0..clean.class_count - 1);
        if new >= old {
            new += 1;
        }
        out.data.labels[i] = new;
        out.tamper_mask[i] = true;
    }
    Ok(out)
}

/// Relabels ⌊rate·count(source)⌋ samples of `source_class` as `target_class`.
pub fn targeted_poison(
    clean: &FeatureDataset,
    source_class: usize,
    target_class: usize,
    rate: f64,
    seed: u64,
) -> Result<TamperedDataset> {
    check_rate(rate)?;
    if source_class == target_class {
        return Err(Error::Config("source and target class must differ".into()));
    }
    let counts = clean.class_counts();
    for cls in [source_class, target_class] {
        if counts.get(cls).copied().unwrap_or(0) == 0 {
            return Err(Error::Attack(format!("class {cls} not present in dataset")));
        }
    }
    let members: Vec<usize> = (0..clean.len()).filter(|&i| clean.labels[i] == source_class).collect();
    let count = attack_count(rate, members.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TamperedDataset::untouched(clean);
    for k in sample(&mut rng, members.len(), count) {
        let i = members[k];
        out.data.labels[i] = target_class;
        out.tamper_mask[i] = true;
    }
    Ok(out)
}

fn column_stds(x: ArrayView2<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.axis_iter(Axis(1))
        .map(|c| {
            let m = c.sum() / n;
            (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Displaces ⌊rate·N⌋ samples along seeded random unit directions scaled
/// componentwise by `magnitude × σ_feature`. Labels are unchanged.
pub fn inject_anomalies(clean: &FeatureDataset, rate: f64, magnitude: f64, seed: u64) -> Result<TamperedDataset> {
    check_rate(rate)?;
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::Config(format!("anomaly magnitude must be positive, got {magnitude}")));
    }
    let n = clean.len();
    let d = clean.dim();
    let stds: Vec<f64> = column_stds(clean.features.view())
        .into_iter()
        .map(|s| if s > 0.0 { s } else { 1.0 })
        .collect();
    let count = attack_count(rate, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TamperedDataset::untouched(clean);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    for i in picked {
        let dir: Vec<f64> = loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        };
        for j in 0..d {
            out.data.features[[i, j]] += magnitude * dir[j] * stds[j];
        }
        out.tamper_mask[i] = true;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateOptions {
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        SurrogateOptions {
            l2: 1e-3,
            max_iterations: 2000,
            tolerance: 1e-6,
        }
    }
}

/// Multinomial logistic regression on internally z-scored inputs. Exposes
/// the cross-entropy gradient with respect to the raw input features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    /// classes × d weights in standardized coordinates
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub train_accuracy: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn softmax(logits: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    logits.iter_mut().for_each(|v| *v /= s);
}

struct Objective<'a> {
    z: &'a Array2<f64>,
    labels: &'a [usize],
    l2: f64,
}

impl Objective<'_> {
    /// Mean cross-entropy plus ½λ‖W‖², and its gradient.
    fn eval(&self, w: &Array2<f64>, b: &Array1<f64>) -> (f64, Array2<f64>, Array1<f64>) {
        let n = self.z.nrows() as f64;
        let mut gw = Array2::zeros(w.dim());
        let mut gb = Array1::zeros(b.len());
        let mut loss = 0.0;
        for (row, &y) in self.z.rows().into_iter().zip(self.labels) {
            let mut p: Vec<f64> = (0..w.nrows()).map(|k| w.row(k).dot(&row) + b[k]).collect();
            let m = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + p.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - p[y];
            softmax(&mut p);
            for k in 0..w.nrows() {
                let r = p[k] - if k == y { 1.0 } else { 0.0 };
                gw.row_mut(k).scaled_add(r / n, &row);
                gb[k] += r / n;
            }
        }
        loss = loss / n + 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        gw.scaled_add(self.l2, w);
        (loss, gw, gb)
    }
}

impl SurrogateModel {
    /// Full-batch gradient descent with Armijo backtracking. A model that
    /// hits the iteration cap is still returned, with `converged = false`.
    pub fn train(clean: &FeatureDataset, opts: &SurrogateOptions) -> Result<Self> {
        let counts = clean.class_counts();
        let present = counts.iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(Error::Training("surrogate needs at least two classes".into()));
        }
        if let Some((cls, c)) = counts.iter().enumerate().find(|(_, &c)| c > 0 && c < 10) {
            return Err(Error::Training(format!("class {cls} has {c} samples, surrogate needs 10")));
        }
        let x = clean.features.view();
        let means: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.sum() / x.nrows() as f64).collect();
        let scales: Vec<f64> = column_stds(x).into_iter().map(|s| if s > 0.0 { s } else { 1.0 }).collect();
        let z = Array2::from_shape_fn(x.dim(), |(i, j)| (x[[i, j]] - means[j]) / scales[j]);
        let k = clean.class_count;
        let obj = Objective {
            z: &z,
            labels: &clean.labels,
            l2: opts.l2,
        };

        let mut w = Array2::<f64>::zeros((k, x.ncols()));
        let mut b = Array1::<f64>::zeros(k);
        let (mut loss, mut gw, mut gb) = obj.eval(&w, &b);
        let mut lr = 1.0;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iterations {
            let gnorm2 = gw.iter().chain(gb.iter()).map(|v| v * v).sum::<f64>();
            if gnorm2.sqrt() < opts.tolerance {
                converged = true;
                break;
            }
            loop {
                let w_new = &w - &(&gw * lr);
                let b_new = &b - &(&gb * lr);
                let (l_new, gw_new, gb_new) = obj.eval(&w_new, &b_new);
                if l_new <= loss - 0.5 * lr * gnorm2 || lr < 1e-12 {
                    w = w_new;
                    b = b_new;
                    loss = l_new;
                    gw = gw_new;
                    gb = gb_new;
                    break;
                }
                lr *= 0.5;
            }
            lr = (lr * 2.0).min(16.0);
            iterations += 1;
        }

        let mut model = SurrogateModel {
            weights: w,
            bias: b,
            means,
            scales,
            train_accuracy: 0.0,
            converged,
            iterations,
        };
        let hits = (0..clean.len())
            .filter(|&i| model.predict(clean.features.row(i)) == clean.labels[i])
            .count();
        model.train_accuracy = hits as f64 / clean.len() as f64;
        Ok(model)
    }

    fn logits(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let z: Vec<f64> = x
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        (0..self.weights.nrows())
            .map(|k| self.weights.row(k).iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.bias[k])
            .collect()
    }

    pub fn probabilities(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let mut p = self.logits(x);
        softmax(&mut p);
        p
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        let l = self.logits(x);
        (0..l.len()).fold(0, |best, k| if l[k] > l[best] { k } else { best })
    }

    /// Cross-entropy of label `y` at `x`.
    pub fn loss(&self, x: ArrayView1<f64>, y: usize) -> f64 {
        let l = self.logits(x);
        let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + l.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - l[y]
    }

    /// ∂loss/∂x in raw feature units: Σ_{k≠y} p_k (w_k − w_y) / σ.
    pub fn input_gradient(&self, x: ArrayView1<f64>, y: usize) -> Vec<f64> {
        let p = self.probabilities(x);
        let d = self.means.len();
        let mut g = vec![0.0; d];
        for (k, &pk) in p.iter().enumerate() {
            if k == y {
                continue;
            }
            for j in 0..d {
                g[j] += pk * (self.weights[[k, j]] - self.weights[[y, j]]);
            }
        }
        g.iter_mut().zip(&self.scales).for_each(|(v, s)| *v /= s);
        g
    }
}

/// Where FGSM takes its gradient from.
pub enum GradientSource<'a> {
    /// Logistic surrogate trained on labeled data.
    Surrogate(&'a SurrogateModel),
    /// One-class decision score; FGSM ascends the negated score.
    Score(&'a (dyn Fn(&[f64]) -> Result<f64> + Sync)),
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_difference_gradient(f: &dyn Fn(&[f64]) -> Result<f64>, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        probe[j] = x[j] + step;
        let up = f(&probe)?;
        probe[j] = x[j] - step;
        let down = f(&probe)?;
        probe[j] = x[j];
        g.push((up - down) / (2.0 * step));
    }
    Ok(g)
}

/// `xᵢ + ε·sign(∇ₓ loss)` for every sample. Coordinates with zero gradient
/// are left alone, and a row is masked when any coordinate moved.
pub fn fgsm_perturb(clean: &FeatureDataset, epsilon: f64, source: &GradientSource) -> Result<TamperedDataset> {
    check_epsilon(epsilon)?;
    let mut out = TamperedDataset::untouched(clean);
    for i in 0..clean.len() {
        let row = clean.features.row(i);
        let grad = match source {
            GradientSource::Surrogate(m) => m.input_gradient(row, clean.labels[i]),
            GradientSource::Score(f) => {
                let neg = |v: &[f64]| f(v).map(|s| -s);
                finite_difference_gradient(&neg, &row.to_vec(), SCORE_FD_STEP)?
            }
        };
        let mut moved = false;
        for (j, g) in grad.into_iter().enumerate() {
            let s = sign(g);
            if s != 0.0 {
                out.data.features[[i, j]] += epsilon * s;
                moved = true;
            }
        }
        out.tamper_mask[i] = moved;
    }
    Ok(out)
}

/// Dispatches an [`AttackSpec`]. Label flips on single-class data become
/// anomaly injection; adversarial perturbation requires a gradient source.
pub fn apply_attack(
    clean: &FeatureDataset,
    spec: &AttackSpec,
    source: Option<&GradientSource>,
) -> Result<TamperedDataset> {
    spec.validate()?;
    match spec.kind {
        AttackKind::LabelFlip if clean.distinct_classes() < 2 => {
            inject_anomalies(clean, spec.effective_rate(), spec.magnitude, spec.seed)
        }
        AttackKind::LabelFlip => flip_labels(clean, spec.effective_rate(), spec.seed),
        AttackKind::TargetedPoison => targeted_poison(
            clean,
            spec.source_class,
            spec.target_class,
            spec.effective_rate(),
            spec.seed,
        ),
        AttackKind::AdvPerturb => {
            let source = source.ok_or_else(|| {
                Error::Attack("adversarial perturbation needs a surrogate or a score function".into())
            })?;
            fgsm_perturb(clean, spec.epsilon, source)
        }
    }
}
