//! Declarative experiments: a TOML config, the end-to-end run that turns
//! it into a paired classical/quantum report, and the flat results table.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{apply_attack, AttackKind, AttackSpec, GradientSource, SurrogateModel, SurrogateOptions};
use crate::data::{
    features_csv_string, load_features_csv, synth_generate, windowed_features, FeatureDataset, Profile,
    TamperedDataset, TimeSeries,
};
use crate::error::{Error, Result};
use crate::eval::{attack_impact, compare_methods, kfold_split, AttackImpact, DetectionConfig, EvalReport};
use crate::ocsvm::csvm::CsvmOptions;
use crate::ocsvm::{OcsvmModel, SolverOptions, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::preprocess::{moving_average_downsample, StandardizerModel};
use crate::qkernel::{Estimator, FeatureMapSpec, Kernel, MapLayout, DEFAULT_ANGLE_SCALE};
use crate::qsim::MAX_QUBITS;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Synthetic profile, used when `csv` is absent.
    pub profile: Profile,
    /// Feature CSV to load instead of generating data.
    pub csv: Option<PathBuf>,
    pub n_per_class: usize,
    /// Feature dimension; defaults to the profile's.
    pub dim: Option<usize>,
    pub separation: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            profile: Profile::TwoClass,
            csv: None,
            n_per_class: 100,
            dim: None,
            separation: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessingConfig {
    /// Moving-average window for raw time series.
    pub window: usize,
    /// PCA dimension; the quantum map uses `pca_k / 2` qubits.
    pub pca_k: usize,
}

impl Default for PreprocessingConfig {
    fn default() -> Self {
        PreprocessingConfig { window: 60, pca_k: 12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub rate: Option<f64>,
    pub epsilon: f64,
    pub source_class: usize,
    pub target_class: usize,
    pub magnitude: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        let spec = AttackSpec::default();
        AttackConfig {
            kind: spec.kind,
            rate: spec.rate,
            epsilon: spec.epsilon,
            source_class: spec.source_class,
            target_class: spec.target_class,
            magnitude: spec.magnitude,
        }
    }
}

impl AttackConfig {
    pub fn spec(&self, seed: u64) -> AttackSpec {
        AttackSpec {
            kind: self.kind,
            rate: self.rate,
            epsilon: self.epsilon,
            source_class: self.source_class,
            target_class: self.target_class,
            magnitude: self.magnitude,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Exact,
    Shots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub estimator: EstimatorKind,
    pub shots: usize,
    pub angle_clip: f64,
    pub angle_scale: f64,
    pub layout: MapLayout,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            estimator: EstimatorKind::Exact,
            shots: 10_000,
            angle_clip: PI,
            angle_scale: DEFAULT_ANGLE_SCALE,
            layout: MapLayout::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub nu: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Box constraint of the baseline C-SVM.
    pub c: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            nu: 0.1,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub stratified: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub preprocessing: PreprocessingConfig,
    pub attack: AttackConfig,
    pub kernel: KernelConfig,
    pub svm: SvmConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            dataset: DatasetConfig::default(),
            preprocessing: PreprocessingConfig::default(),
            attack: AttackConfig::default(),
            kernel: KernelConfig::default(),
            svm: SvmConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.span().map_or(0, |s| line_of(text, s.start) as u64),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn n_qubits(&self) -> usize {
        self.preprocessing.pca_k / 2
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        let k = self.preprocessing.pca_k;
        if k == 0 || k % 2 != 0 {
            return Err(Error::Config(format!(
                "pca_k must be a positive even number (two features per qubit), got {k}"
            )));
        }
        if k / 2 > MAX_QUBITS {
            return Err(Error::Config(format!("pca_k = {k} needs more than {MAX_QUBITS} qubits")));
        }
        if self.preprocessing.window == 0 {
            return Err(Error::Config("moving-average window must be positive".into()));
        }
        if let Some(p) = &self.dataset.csv {
            if !p.exists() {
                return Err(Error::Config(format!("dataset file {} does not exist", p.display())));
            }
        }
        if let Some(d) = self.dataset.dim {
            if d < k {
                return Err(Error::Config(format!("dataset dim {d} is smaller than pca_k {k}")));
            }
        }
        if !(self.svm.nu > 0.0 && self.svm.nu <= 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1], got {}", self.svm.nu)));
        }
        if !(self.svm.tolerance > 0.0) || self.svm.max_iterations == 0 {
            return Err(Error::Config("solver tolerance and iteration cap must be positive".into()));
        }
        if !(self.svm.c > 0.0) {
            return Err(Error::Config(format!("C must be positive, got {}", self.svm.c)));
        }
        if self.eval.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.eval.folds)));
        }
        if self.kernel.estimator == EstimatorKind::Shots && self.kernel.shots == 0 {
            return Err(Error::Config("shot count must be positive".into()));
        }
        self.feature_map().validate()?;
        self.attack.spec(0).validate()
    }

    pub fn feature_map(&self) -> FeatureMapSpec {
        FeatureMapSpec {
            n_qubits: self.n_qubits(),
            angle_clip: self.kernel.angle_clip,
            angle_scale: self.kernel.angle_scale,
            layout: self.kernel.layout,
        }
    }

    pub fn seeds(&self) -> BTreeMap<String, u64> {
        ["generator", "attack", "folds", "kernel_shots"]
            .iter()
            .map(|l| (l.to_string(), derive_seed(self.master_seed, l)))
            .collect()
    }
}

/// Moving-average downsampling of every channel followed by
/// non-overlapping segments of `segment_len` samples, 12 statistics each.
pub fn ingest_timeseries(ts: &TimeSeries, window: usize, segment_len: usize, label: usize) -> Result<FeatureDataset> {
    let channels = ts
        .channels
        .iter()
        .map(|c| moving_average_downsample(c, window))
        .collect::<Result<Vec<_>>>()?;
    let reduced = TimeSeries {
        channel_names: ts.channel_names.clone(),
        channels,
        sampling_rate_hz: ts.sampling_rate_hz / window as f64,
        subject_id: ts.subject_id.clone(),
    };
    windowed_features(&reduced, segment_len, segment_len, label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub class_count: usize,
    pub n_samples: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checksums {
    pub clean_dataset: String,
    pub tampered_dataset: String,
    pub fold_plan: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub attack: AttackSpec,
    pub n_tampered: usize,
    pub seeds: BTreeMap<String, u64>,
    pub checksums: Checksums,
    /// Baseline dot-kernel classifier, clean versus attacked training.
    pub impact: AttackImpact,
    pub classical: EvalReport,
    pub quantum: EvalReport,
    /// quantum − classical mean detection accuracy.
    pub delta: f64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<(FeatureDataset, String)> {
    match &cfg.dataset.csv {
        Some(path) => {
            let ds = load_features_csv(path)?;
            let name = path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
            Ok((ds, name))
        }
        None => {
            let p = cfg.dataset.profile;
            let d = cfg.dataset.dim.unwrap_or(p.default_dim());
            let ds = synth_generate(p, cfg.dataset.n_per_class, d, cfg.dataset.separation, seed)?;
            Ok((ds, p.name().to_string()))
        }
    }
}

/// Attacks `clean` as configured. Adversarial perturbation takes its
/// gradient from a logistic surrogate on labeled data, or from a dot-kernel
/// one-class score on z-scored features for single-class data.
pub fn run_attack(clean: &FeatureDataset, spec: &AttackSpec, svm: &SvmConfig) -> Result<TamperedDataset> {
    if spec.kind != AttackKind::AdvPerturb {
        return apply_attack(clean, spec, None);
    }
    if clean.distinct_classes() >= 2 {
        let surrogate = SurrogateModel::train(clean, &SurrogateOptions::default())?;
        return apply_attack(clean, spec, Some(&GradientSource::Surrogate(&surrogate)));
    }
    let scaler = StandardizerModel::fit(clean.features.view())?;
    let z = scaler.apply(clean.features.view())?;
    let solver = SolverOptions {
        nu: svm.nu,
        tolerance: svm.tolerance,
        max_iterations: svm.max_iterations,
    };
    let model = OcsvmModel::fit(z.view(), &Kernel::DotProduct, &solver)?;
    let d = clean.dim();
    let score = move |x: &[f64]| -> Result<f64> {
        let row = Array2::from_shape_vec((1, d), x.to_vec())
            .map_err(|e| Error::Attack(format!("bad probe shape: {e}")))?;
        let zr = scaler.apply(row.view())?;
        model.score_one(zr.row(0).as_slice().expect("row is contiguous"))
    };
    apply_attack(clean, spec, Some(&GradientSource::Score(&score)))
}

/// Generate or load, attack, split, then compare both kernels on identical
/// folds and record the baseline attack impact.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentReport, TamperedDataset)> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let (clean, name) = load_dataset(cfg, seeds["generator"])?;
    let k = cfg.preprocessing.pca_k;
    if clean.dim() < k {
        return Err(Error::Config(format!(
            "dataset has {} features, fewer than pca_k = {k}",
            clean.dim()
        )));
    }
    let spec = cfg.attack.spec(seeds["attack"]);
    let suspect = run_attack(&clean, &spec, &cfg.svm)?;
    let plan = kfold_split(&clean.labels, cfg.eval.folds, cfg.eval.stratified, seeds["folds"])?;

    let solver = SolverOptions {
        nu: cfg.svm.nu,
        tolerance: cfg.svm.tolerance,
        max_iterations: cfg.svm.max_iterations,
    };
    let estimator = match cfg.kernel.estimator {
        EstimatorKind::Exact => Estimator::Exact,
        EstimatorKind::Shots => Estimator::Shots {
            count: cfg.kernel.shots,
            seed: seeds["kernel_shots"],
        },
    };
    let classical = DetectionConfig {
        kernel: Kernel::DotProduct,
        solver,
        pca_k: Some(k),
    };
    let quantum = DetectionConfig {
        kernel: Kernel::QuantumFidelity {
            map: cfg.feature_map(),
            estimator,
        },
        solver,
        pca_k: Some(k),
    };
    let mut cmp = compare_methods(&clean, &suspect, &plan, &classical, &quantum)?;
    for arm in [&mut cmp.classical, &mut cmp.quantum] {
        arm.seeds.extend(seeds.iter().map(|(l, s)| (l.clone(), *s)));
        arm.seeds.insert("master".into(), cfg.master_seed);
    }
    let csvm = CsvmOptions {
        c: cfg.svm.c,
        ..Default::default()
    };
    let impact = attack_impact(&clean, &suspect, &Kernel::DotProduct, &plan, &csvm, cfg.svm.nu)?;

    let checksums = Checksums {
        clean_dataset: sha256_hex(features_csv_string(&clean, None).as_bytes()),
        tampered_dataset: sha256_hex(features_csv_string(&suspect.data, Some(&suspect.tamper_mask)).as_bytes()),
        fold_plan: sha256_hex(serde_json::to_string(&plan)?.as_bytes()),
    };
    let mut all_seeds = seeds;
    all_seeds.insert("master".into(), cfg.master_seed);
    let report = ExperimentReport {
        config: cfg.clone(),
        dataset: DatasetSummary {
            name,
            class_count: clean.class_count,
            n_samples: clean.len(),
            n_features: clean.dim(),
        },
        attack: spec,
        n_tampered: suspect.tampered_count(),
        seeds: all_seeds,
        checksums,
        impact,
        delta: cmp.delta,
        classical: cmp.classical,
        quantum: cmp.quantum,
    };
    Ok((report, suspect))
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line() as u64,
            message: format!("{e}"),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// Writes `report.json`, `results.csv` and `tampered.csv` under the
/// configured output directory and returns their paths.
pub fn write_outputs(report: &ExperimentReport, suspect: &TamperedDataset) -> Result<Vec<PathBuf>> {
    let dir = &report.config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        (dir.join("report.json"), report.to_json()?),
        (dir.join("results.csv"), table_csv(&results_table(report)?)),
        (
            dir.join("tampered.csv"),
            features_csv_string(&suspect.data, Some(&suspect.tamper_mask)),
        ),
    ];
    let mut written = Vec::new();
    for (path, body) in files {
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub dataset: String,
    pub class_count: usize,
    pub features: usize,
    pub attack: String,
    /// Mean detection accuracy in percent.
    pub detection: f64,
}

/// One row per method for the report's attack.
pub fn results_table(report: &ExperimentReport) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (method, arm) in [("Classical", &report.classical), ("Quantum", &report.quantum)] {
        if arm.per_fold.is_empty() {
            return Err(Error::Evaluation(format!("no folds in the {} report", method.to_lowercase())));
        }
        rows.push(TableRow {
            method: method.into(),
            dataset: report.dataset.name.clone(),
            class_count: report.dataset.class_count,
            features: report.dataset.n_features,
            attack: report.attack.kind.title().into(),
            detection: 100.0 * arm.recomputed_mean(),
        });
    }
    Ok(rows)
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("method,dataset,class_count,features,attack,detection_pct\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.3}\n",
            r.method, r.dataset, r.class_count, r.features, r.attack, r.detection
        ));
    }
    out
}

pub fn table_markdown(rows: &[TableRow]) -> String {
    let mut out = String::from(
        "| Method | Dataset | Classes | Features | Attack Type | Detection (%) |\n|---|---|---|---|---|---|\n",
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {:.3} |\n",
            r.method, r.dataset, r.class_count, r.features, r.attack, r.detection
        ));
    }
    out
}
