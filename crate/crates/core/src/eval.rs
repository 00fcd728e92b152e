//! Cross-validated experiment protocol: fold plans, attack impact on a
//! baseline classifier, and tampering detection with per-class one-class
//! models.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{apply_attack, AttackSpec, GradientSource};
use crate::data::{FeatureDataset, TamperedDataset};
use crate::error::{Error, Result};
use crate::ocsvm::csvm::{accuracy, CsvmOptions, KernelClassifier};
use crate::ocsvm::{classify, OcsvmModel, Prediction, SolverOptions};
use crate::preprocess::Preprocessor;
use crate::qkernel::{Kernel, KernelKind};

/// Smallest clean per-class training set a detector is trained on.
pub const MIN_CLASS_TRAIN: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub stratified: bool,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Seeded k-fold assignment. Stratified plans shuffle within each class and
/// deal members round-robin, continuing the deal across classes so overall
/// fold sizes also stay within one of each other.
pub fn kfold_split(labels: &[usize], k: usize, stratified: bool, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::Evaluation(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::Evaluation(format!("{n} samples cannot fill {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; n];
    let groups: Vec<Vec<usize>> = if stratified {
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        (0..classes)
            .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    let mut deal = 0;
    for mut members in groups {
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = deal % k;
            deal += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        stratified,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackImpact {
    pub clean_accuracy: f64,
    pub attacked_accuracy: f64,
    pub per_fold_clean: Vec<f64>,
    pub per_fold_attacked: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Accuracy of the baseline classifier trained on clean versus attacked
/// training folds, always scored against the clean validation fold. For
/// single-class data the score is the validation inlier rate of a one-class
/// model instead.
pub fn attack_impact(
    clean: &FeatureDataset,
    attacked: &TamperedDataset,
    kernel: &Kernel,
    plan: &FoldPlan,
    opts: &CsvmOptions,
    nu: f64,
) -> Result<AttackImpact> {
    if attacked.data.len() != clean.len() || attacked.data.dim() != clean.dim() {
        return Err(Error::Evaluation("attacked dataset does not match the clean one".into()));
    }
    if plan.assignments.len() != clean.len() {
        return Err(Error::Evaluation("fold plan does not match dataset".into()));
    }
    let one_class = clean.distinct_classes() < 2;
    let folds: Vec<(f64, f64)> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let train = plan.train_indices(f);
            let test = plan.test_indices(f);
            let run = |source: &FeatureDataset| -> Result<f64> {
                let tr = source.select(&train);
                let prep = Preprocessor::fit(tr.features.view(), None)?;
                let xtr = prep.apply(tr.features.view())?;
                let va = clean.select(&test);
                let xva = prep.apply(va.features.view())?;
                if one_class {
                    let model = OcsvmModel::fit(
                        xtr.view(),
                        kernel,
                        &SolverOptions {
                            nu,
                            ..Default::default()
                        },
                    )?;
                    let scores = model.scores(xva.view())?;
                    Ok(scores.iter().filter(|&&s| classify(s) == Prediction::Inlier).count() as f64
                        / scores.len() as f64)
                } else {
                    let clf = KernelClassifier::fit(xtr.view(), &tr.labels, kernel, opts)?;
                    Ok(accuracy(&clf.predict(xva.view())?, &va.labels))
                }
            };
            Ok((run(clean)?, run(&attacked.data)?))
        })
        .collect::<Result<_>>()?;
    let per_fold_clean: Vec<f64> = folds.iter().map(|p| p.0).collect();
    let per_fold_attacked: Vec<f64> = folds.iter().map(|p| p.1).collect();
    Ok(AttackImpact {
        clean_accuracy: mean(&per_fold_clean),
        attacked_accuracy: mean(&per_fold_attacked),
        per_fold_clean,
        per_fold_attacked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub kernel: Kernel,
    pub solver: SolverOptions,
    /// PCA dimension after z-scoring; `None` keeps the standardized features.
    pub pca_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub detection_accuracy: f64,
    pub true_positive_rate: Option<f64>,
    pub true_negative_rate: Option<f64>,
    pub n_test: usize,
    pub n_tampered: usize,
    /// Accuracy per claimed label, keyed by class id.
    pub class_accuracy: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kernel_kind: KernelKind,
    pub per_fold: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub config_echo: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
}

impl EvalReport {
    pub fn recomputed_mean(&self) -> f64 {
        mean(&self.per_fold.iter().map(|f| f.detection_accuracy).collect::<Vec<_>>())
    }
}

/// Scores the suspect set with one-class models trained on the clean
/// reference, fold by fold. Each suspect sample is judged by the model of
/// the label it currently carries; a sample flagged as outlier counts as
/// predicted-tampered. Multi-class accuracy is the unweighted mean of the
/// per-label accuracies.
pub fn detect_tampering(
    clean_reference: &FeatureDataset,
    suspect: &TamperedDataset,
    config: &DetectionConfig,
    plan: &FoldPlan,
) -> Result<EvalReport> {
    if suspect.data.is_empty() {
        return Err(Error::Evaluation("suspect dataset is empty".into()));
    }
    if suspect.data.len() != clean_reference.len() || suspect.tamper_mask.len() != suspect.data.len() {
        return Err(Error::Evaluation(format!(
            "suspect has {} rows, clean reference has {}",
            suspect.data.len(),
            clean_reference.len()
        )));
    }
    if suspect.data.dim() != clean_reference.dim() {
        return Err(Error::Evaluation("suspect and reference feature dimensions differ".into()));
    }
    if plan.assignments.len() != clean_reference.len() {
        return Err(Error::Evaluation("fold plan does not match dataset".into()));
    }
    let single_class = clean_reference.distinct_classes() < 2;

    let per_fold: Vec<FoldResult> = (0..plan.k)
        .into_par_iter()
        .map(|f| detect_fold(clean_reference, suspect, config, plan, f, single_class))
        .collect::<Result<_>>()?;
    let mean_accuracy = mean(&per_fold.iter().map(|r| r.detection_accuracy).collect::<Vec<_>>());
    let mut seeds = BTreeMap::new();
    seeds.insert("folds".to_string(), plan.seed);
    Ok(EvalReport {
        kernel_kind: config.kernel.kind(),
        per_fold,
        mean_accuracy,
        config_echo: serde_json::to_value(config)?,
        seeds,
    })
}

fn detect_fold(
    clean: &FeatureDataset,
    suspect: &TamperedDataset,
    config: &DetectionConfig,
    plan: &FoldPlan,
    fold: usize,
    single_class: bool,
) -> Result<FoldResult> {
    let train = plan.train_indices(fold);
    let test = plan.test_indices(fold);
    let tr = clean.select(&train);
    let prep = Preprocessor::fit(tr.features.view(), config.pca_k)?;
    let xtr = prep.apply(tr.features.view())?;

    let mut models: BTreeMap<usize, OcsvmModel> = BTreeMap::new();
    for cls in 0..clean.class_count {
        let rows: Vec<usize> = (0..tr.len()).filter(|&i| tr.labels[i] == cls).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < MIN_CLASS_TRAIN {
            return Err(Error::Evaluation(format!(
                "class {cls} has {} clean training samples in fold {fold}, need {MIN_CLASS_TRAIN}",
                rows.len()
            )));
        }
        let x = xtr.select(ndarray::Axis(0), &rows);
        models.insert(cls, OcsvmModel::fit(x.view(), &config.kernel, &config.solver)?);
    }

    let sus = suspect.data.select(&test);
    let xte = prep.apply(sus.features.view())?;
    let mut scores = vec![0.0; test.len()];
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, &i) in test.iter().enumerate() {
        by_label.entry(suspect.data.labels[i]).or_default().push(r);
    }
    for (label, rows) in &by_label {
        let model = models.get(label).ok_or_else(|| {
            Error::Evaluation(format!("no clean training samples for claimed class {label} in fold {fold}"))
        })?;
        let x = xte.select(ndarray::Axis(0), rows);
        for (&r, s) in rows.iter().zip(model.scores(x.view())?) {
            scores[r] = s;
        }
    }

    let mut per_label: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let (mut tp, mut fn_, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (r, &i) in test.iter().enumerate() {
        let flagged = classify(scores[r]) == Prediction::Outlier;
        let tampered = suspect.tamper_mask[i];
        match (tampered, flagged) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
        let e = per_label.entry(suspect.data.labels[i]).or_default();
        e.0 += usize::from(flagged == tampered);
        e.1 += 1;
    }
    let class_accuracy: BTreeMap<usize, f64> =
        per_label.iter().map(|(&c, &(ok, tot))| (c, ok as f64 / tot as f64)).collect();
    let detection_accuracy = if single_class {
        (tp + tn) as f64 / test.len() as f64
    } else {
        mean(&class_accuracy.values().copied().collect::<Vec<_>>())
    };
    let rate = |a: usize, b: usize| if a + b == 0 { None } else { Some(a as f64 / (a + b) as f64) };
    Ok(FoldResult {
        fold,
        detection_accuracy,
        true_positive_rate: rate(tp, fn_),
        true_negative_rate: rate(tn, fp),
        n_test: test.len(),
        n_tampered: tp + fn_,
        class_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub classical: EvalReport,
    pub quantum: EvalReport,
    /// quantum − classical mean detection accuracy.
    pub delta: f64,
}

/// Runs detection twice on identical inputs, differing only in kernel.
pub fn compare_methods(
    clean: &FeatureDataset,
    suspect: &TamperedDataset,
    plan: &FoldPlan,
    classical: &DetectionConfig,
    quantum: &DetectionConfig,
) -> Result<Comparison> {
    let (c, q) = rayon::join(
        || detect_tampering(clean, suspect, classical, plan),
        || detect_tampering(clean, suspect, quantum, plan),
    );
    let (classical, quantum) = (c?, q?);
    let delta = quantum.mean_accuracy - classical.mean_accuracy;
    Ok(Comparison {
        classical,
        quantum,
        delta,
    })
}

/// Convenience wrapper: attack `clean` and run the paired comparison.
pub fn attack_and_compare(
    clean: &FeatureDataset,
    attack: &AttackSpec,
    source: Option<&GradientSource>,
    plan: &FoldPlan,
    classical: &DetectionConfig,
    quantum: &DetectionConfig,
) -> Result<(TamperedDataset, Comparison)> {
    let suspect = apply_attack(clean, attack, source)?;
    let cmp = compare_methods(clean, &suspect, plan, classical, quantum)?;
    Ok((suspect, cmp))
}
