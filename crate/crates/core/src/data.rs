//! Feature datasets: statistical feature extraction, synthetic generators
//! and CSV ingestion.
//!
//! Feature CSV schema is `f_0,…,f_{d-1},label`; tampered files add a trailing
//! `tampered` column of 0/1. Time-series CSV is `t,<channel…>` with strictly
//! increasing `t`.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of statistics computed per channel window.
pub const FEATURES_PER_CHANNEL: usize = 12;

/// Names of the per-window statistics, in output order.
pub const FEATURE_NAMES: [&str; FEATURES_PER_CHANNEL] = [
    "mean", "std", "min", "max", "median", "iqr", "skewness", "kurtosis", "rms", "zcr", "ptp",
    "mad",
];

/// Upper bound on accepted class ids when reading CSVs.
pub const MAX_CLASSES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum Provenance {
    Synthetic { seed: u64 },
    Ingested { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
}

impl FeatureDataset {
    /// Checks shape agreement, label range and finiteness.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
        feature_names: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        let ds = FeatureDataset {
            features,
            labels,
            class_count,
            feature_names,
            provenance,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.features.dim();
        if d == 0 {
            return Err(Error::Config("dataset has no features".into()));
        }
        if self.labels.len() != n {
            return Err(Error::Config(format!(
                "{} labels for {n} rows",
                self.labels.len()
            )));
        }
        if self.feature_names.len() != d {
            return Err(Error::Config(format!(
                "{} feature names for {d} columns",
                self.feature_names.len()
            )));
        }
        if self.class_count == 0 {
            return Err(Error::Config("class count must be positive".into()));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= self.class_count) {
            return Err(Error::Config(format!(
                "label {l} out of range for {} classes",
                self.class_count
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("dataset contains non-finite features".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Count of samples per class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn distinct_classes(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Rows `idx` as a new dataset (same class count and names).
    pub fn select(&self, idx: &[usize]) -> FeatureDataset {
        let d = self.dim();
        let mut features = Array2::zeros((idx.len(), d));
        for (r, &i) in idx.iter().enumerate() {
            features.row_mut(r).assign(&self.features.row(i));
        }
        FeatureDataset {
            features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// A dataset after an attack, with the ground-truth record of altered rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TamperedDataset {
    pub data: FeatureDataset,
    pub tamper_mask: Vec<bool>,
}

impl TamperedDataset {
    pub fn untouched(clean: &FeatureDataset) -> Self {
        TamperedDataset {
            data: clean.clone(),
            tamper_mask: vec![false; clean.len()],
        }
    }

    pub fn tampered_count(&self) -> usize {
        self.tamper_mask.iter().filter(|&&t| t).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub channel_names: Vec<String>,
    pub channels: Vec<Vec<f64>>,
    pub sampling_rate_hz: f64,
    pub subject_id: String,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// The 12 window statistics: mean, std, min, max, median, interquartile
/// range, skewness, excess kurtosis, RMS, zero-crossing rate, peak-to-peak
/// and mean absolute deviation.
///
/// Spread statistics use the population (1/n) normalization. Skewness and
/// kurtosis are 0 for a constant window. Quantiles interpolate linearly.
pub fn extract_features(window: &[f64]) -> Result<[f64; FEATURES_PER_CHANNEL]> {
    let n = window.len();
    if n < 4 {
        return Err(Error::Extraction(format!(
            "window of {n} samples, need at least 4"
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::Extraction("window contains non-finite samples".into()));
    }
    let nf = n as f64;
    let mean = window.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4, mut abs_dev, mut sq) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &v in window {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        abs_dev += d.abs();
        sq += v * v;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let std = m2.sqrt();
    let flat = std <= 1e-12 * mean.abs().max(1.0);
    let (skew, kurt) = if flat {
        (0.0, 0.0)
    } else {
        (m3 / std.powi(3), m4 / (m2 * m2) - 3.0)
    };

    let mut sorted = window.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[n - 1];
    let median = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);

    let crossings = window.windows(2).filter(|p| p[0] * p[1] < 0.0).count();
    let zcr = crossings as f64 / (n - 1) as f64;

    Ok([
        mean,
        if flat { 0.0 } else { std },
        min,
        max,
        median,
        iqr,
        skew,
        kurt,
        (sq / nf).sqrt(),
        zcr,
        max - min,
        abs_dev / nf,
    ])
}

/// Slides a window over every channel and concatenates the per-channel
/// statistics in channel order, giving `12 × channels` features per row.
pub fn windowed_features(
    ts: &TimeSeries,
    window_len: usize,
    stride: usize,
    label: usize,
) -> Result<FeatureDataset> {
    if window_len == 0 || stride == 0 {
        return Err(Error::Extraction("window length and stride must be positive".into()));
    }
    if window_len > ts.len() {
        return Err(Error::Extraction(format!(
            "window of {window_len} samples exceeds series length {}",
            ts.len()
        )));
    }
    let starts: Vec<usize> = (0..=ts.len() - window_len).step_by(stride).collect();
    let d = FEATURES_PER_CHANNEL * ts.channels.len();
    let mut features = Array2::zeros((starts.len(), d));
    for (r, &s) in starts.iter().enumerate() {
        for (c, ch) in ts.channels.iter().enumerate() {
            let f = extract_features(&ch[s..s + window_len])?;
            for (k, v) in f.into_iter().enumerate() {
                features[[r, c * FEATURES_PER_CHANNEL + k]] = v;
            }
        }
    }
    let feature_names = ts
        .channel_names
        .iter()
        .flat_map(|ch| FEATURE_NAMES.iter().map(move |s| format!("{ch}_{s}")))
        .collect();
    FeatureDataset::new(
        features,
        vec![label; starts.len()],
        label + 1,
        feature_names,
        Provenance::Ingested {
            path: PathBuf::from(&ts.subject_id),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    OneClass,
    TwoClass,
    ThreeClass,
}

impl Profile {
    pub fn class_count(&self) -> usize {
        match self {
            Profile::OneClass => 1,
            Profile::TwoClass => 2,
            Profile::ThreeClass => 3,
        }
    }

    /// Feature count mirroring the real datasets each profile stands in for.
    pub fn default_dim(&self) -> usize {
        match self {
            Profile::OneClass => 12,
            Profile::TwoClass => 24,
            Profile::ThreeClass => 60,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::OneClass => "one_class",
            Profile::TwoClass => "two_class",
            Profile::ThreeClass => "three_class",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_class" => Ok(Profile::OneClass),
            "two_class" => Ok(Profile::TwoClass),
            "three_class" => Ok(Profile::ThreeClass),
            other => Err(Error::Usage(format!(
                "unknown profile '{other}' (expected one_class, two_class or three_class)"
            ))),
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Gaussian class clusters. Class means sit on a regular simplex with edge
/// `separation`, oriented along seeded random directions; every class shares
/// a per-feature noise scale drawn from [0.8, 1.25].
pub fn synth_generate(
    profile: Profile,
    n_per_class: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<FeatureDataset> {
    if n_per_class < 10 {
        return Err(Error::Config(format!(
            "need at least 10 samples per class, got {n_per_class}"
        )));
    }
    if d < 2 {
        return Err(Error::Config(format!("need at least 2 features, got {d}")));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::Config(format!("invalid separation {separation}")));
    }
    let classes = profile.class_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let u = random_unit(&mut rng, d);
    let v = {
        // Gram-Schmidt against u for the second in-plane direction
        let mut w = random_unit(&mut rng, d);
        let proj: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
        w.iter_mut().zip(&u).for_each(|(a, b)| *a -= proj * b);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let means: Vec<Vec<f64>> = match classes {
        1 => vec![vec![0.0; d]],
        2 => [-0.5, 0.5]
            .iter()
            .map(|s| u.iter().map(|x| s * separation * x).collect())
            .collect(),
        _ => {
            let r = separation / 3f64.sqrt();
            (0..3)
                .map(|c| {
                    let theta = PI / 2.0 + 2.0 * PI * c as f64 / 3.0;
                    let (s, co) = theta.sin_cos();
                    u.iter()
                        .zip(&v)
                        .map(|(a, b)| r * (co * a + s * b))
                        .collect()
                })
                .collect()
        }
    };
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.8..1.25)).collect();

    let n = n_per_class * classes;
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in means.iter().enumerate() {
        for i in 0..n_per_class {
            let row = c * n_per_class + i;
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                features[[row, j]] = mean[j] + scales[j] * z;
            }
            labels.push(c);
        }
    }
    FeatureDataset::new(
        features,
        labels,
        classes,
        (0..d).map(|j| format!("f_{j}")).collect(),
        Provenance::Synthetic { seed },
    )
}

fn fmt_row(row: ArrayView1<f64>) -> Vec<String> {
    // `{}` on f64 prints the shortest string that parses back to the same bits
    row.iter().map(|v| format!("{v}")).collect()
}

/// The feature CSV text, with a trailing `tampered` column when `mask` is given.
pub fn features_csv_string(data: &FeatureDataset, mask: Option<&[bool]>) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f_{j}")).collect();
    header.push("label".into());
    if mask.is_some() {
        header.push("tampered".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in data.features.rows().into_iter().enumerate() {
        let mut cells = fmt_row(row);
        cells.push(data.labels[i].to_string());
        if let Some(m) = mask {
            cells.push(if m[i] { "1" } else { "0" }.into());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn write_feature_csv(data: &FeatureDataset, mask: Option<&[bool]>, path: &Path) -> Result<()> {
    std::fs::write(path, features_csv_string(data, mask)).map_err(|e| Error::io(path, e))
}

pub fn save_features_csv(data: &FeatureDataset, path: &Path) -> Result<()> {
    write_feature_csv(data, None, path)
}

pub fn save_tampered_csv(data: &TamperedDataset, path: &Path) -> Result<()> {
    write_feature_csv(&data.data, Some(&data.tamper_mask), path)
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_feature_csv(path: &Path, want_mask: bool) -> Result<(FeatureDataset, Option<Vec<bool>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let label_col = cols
        .iter()
        .position(|&c| c == "label")
        .ok_or_else(|| parse_err(path, 1, "missing 'label' column"))?;
    let mask_col = cols.iter().position(|&c| c == "tampered");
    if want_mask && mask_col.is_none() {
        return Err(parse_err(path, 1, "missing 'tampered' column"));
    }
    let d = label_col;
    if d == 0 {
        return Err(parse_err(path, 1, "no feature columns before 'label'"));
    }
    for (j, name) in cols.iter().take(d).enumerate() {
        if *name != format!("f_{j}") {
            return Err(parse_err(path, 1, format!("expected column 'f_{j}', found '{name}'")));
        }
    }
    let expected_width = d + 1 + usize::from(mask_col.is_some());
    if cols.len() != expected_width {
        return Err(parse_err(path, 1, format!("unexpected columns: {}", header.as_slice())));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut mask = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, format!("malformed row: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != expected_width {
            return Err(parse_err(
                path,
                line,
                format!("expected {expected_width} fields, found {}", rec.len()),
            ));
        }
        for j in 0..d {
            let cell = &rec[j];
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("non-numeric value '{cell}' in f_{j}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("non-finite value in f_{j}")));
            }
            values.push(v);
        }
        let raw = rec[label_col].trim();
        let label: usize = raw
            .parse()
            .ok()
            .filter(|&l: &usize| l < MAX_CLASSES)
            .ok_or_else(|| parse_err(path, line, format!("label '{raw}' out of range")))?;
        labels.push(label);
        if let Some(mc) = mask_col {
            match rec[mc].trim() {
                "0" => mask.push(false),
                "1" => mask.push(true),
                other => {
                    return Err(parse_err(path, line, format!("tampered flag '{other}' is not 0/1")))
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_path_buf(),
        });
    }
    let n = labels.len();
    let class_count = labels.iter().max().map_or(1, |m| m + 1);
    let features = Array2::from_shape_vec((n, d), values).expect("row width checked");
    let ds = FeatureDataset::new(
        features,
        labels,
        class_count,
        (0..d).map(|j| format!("f_{j}")).collect(),
        Provenance::Ingested {
            path: path.to_path_buf(),
        },
    )?;
    Ok((ds, mask_col.map(|_| mask)))
}

pub fn load_features_csv(path: &Path) -> Result<FeatureDataset> {
    read_feature_csv(path, false).map(|(d, _)| d)
}

pub fn load_tampered_csv(path: &Path) -> Result<TamperedDataset> {
    let (data, mask) = read_feature_csv(path, true)?;
    Ok(TamperedDataset {
        data,
        tamper_mask: mask.expect("mask column required"),
    })
}

pub fn load_timeseries_csv(path: &Path) -> Result<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if header.get(0) != Some("t") {
        return Err(parse_err(path, 1, "first column must be 't'"));
    }
    let channel_names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if channel_names.is_empty() {
        return Err(parse_err(path, 1, "no channel columns"));
    }
    let mut times = Vec::new();
    let mut channels = vec![Vec::new(); channel_names.len()];
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, format!("malformed row: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != channel_names.len() + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", channel_names.len() + 1, rec.len()),
            ));
        }
        let mut parsed = Vec::with_capacity(rec.len());
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("non-numeric value '{cell}' in column {j}")))?;
            parsed.push(v);
        }
        if let Some(&prev) = times.last() {
            if parsed[0] <= prev {
                return Err(parse_err(path, line, "time column is not strictly increasing"));
            }
        }
        times.push(parsed[0]);
        for (c, v) in parsed.into_iter().skip(1).enumerate() {
            channels[c].push(v);
        }
    }
    if times.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_path_buf(),
        });
    }
    let sampling_rate_hz = if times.len() > 1 {
        (times.len() - 1) as f64 / (times[times.len() - 1] - times[0])
    } else {
        1.0
    };
    let subject_id = path
        .file_stem()
        .map_or_else(|| "subject".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(TimeSeries {
        channel_names,
        channels,
        sampling_rate_hz,
        subject_id,
    })
}
