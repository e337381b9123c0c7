//! Tabular ingestion and estimation of the finite joint distribution over
//! (group, label, features).
//!
//! The pipeline is load -> quantize -> (optionally inject missing values
//! and impute) -> estimate. Group and label values are mapped to dense
//! indices in first-appearance order. Numeric features are quantized into
//! left-closed, right-open intervals whose boundaries come from the
//! schema; the last interval is unbounded above. The joined feature tuple
//! becomes one categorical variable whose support is the set of tuples
//! actually observed, so unseen combinations carry zero mass.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Thresholds;

/// Per-feature declaration: a bare name for categorical passthrough, or
/// interval boundaries for a numeric column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    /// Strictly increasing interval boundaries. Interval `i` is
    /// `[bins[i], bins[i+1])`; the last is `[bins[last], +inf)`. Values
    /// below `bins[0]` are a range error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<Vec<f64>>,
}

/// Column roles and quantization recipe for a CSV file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub group_column: String,
    pub label_column: String,
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub missing_token: String,
}

impl SchemaSpec {
    pub fn from_json(text: &str) -> Result<Self, DistError> {
        let schema: SchemaSpec =
            serde_json::from_str(text).map_err(|e| DistError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), DistError> {
        if self.group_column == self.label_column {
            return Err(DistError::Schema(
                "group and label columns must be distinct".into(),
            ));
        }
        for f in &self.features {
            if f.name == self.group_column || f.name == self.label_column {
                return Err(DistError::Schema(format!(
                    "feature '{}' overlaps the group or label column",
                    f.name
                )));
            }
            if let Some(bins) = &f.bins {
                if bins.is_empty() {
                    return Err(DistError::Schema(format!(
                        "feature '{}' declares an empty bin list",
                        f.name
                    )));
                }
                if !bins.windows(2).all(|w| w[0] < w[1]) {
                    return Err(DistError::Schema(format!(
                        "bins for feature '{}' must be strictly increasing",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One table cell: a category index, a raw numeric value awaiting
/// quantization, or the missing marker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Cat(usize),
    Num(f64),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub group: usize,
    pub label: usize,
    pub features: Vec<Cell>,
}

/// Parsed table with dense group/label indices and the value dictionaries
/// needed to report results in the original vocabulary.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub groups: Vec<String>,
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
    /// Category count per feature: interval count for binned columns,
    /// distinct-value count for categorical ones.
    pub feature_arity: Vec<usize>,
    pub rows: Vec<Row>,
}

impl Dataset {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Error)]
pub enum DistError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("row {row}: cannot parse '{value}' in column '{column}' as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: column '{column}' is missing a group or label value")]
    MissingKey { row: usize, column: String },
    #[error("row {row}: value {value} in column '{column}' is below the first bin boundary")]
    QuantizeRange {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("feature '{column}' still holds raw numeric values; quantize the dataset first")]
    Unquantized { column: String },
    #[error("row {row}: feature '{column}' is missing; impute or drop before estimation")]
    MissingValue { row: usize, column: String },
    #[error("no observations for group '{group}', label '{label}'; the joint distribution is degenerate")]
    DegenerateCell { group: String, label: String },
    #[error("feature '{column}' has no observed values to impute from")]
    Imputation { column: String },
    #[error("dataset has no rows")]
    Empty,
    #[error("erase probability {value} for group {group} is outside [0, 1]")]
    BadProbability { group: usize, value: f64 },
    #[error("probability list has {got} entries, dataset has {expected} groups")]
    ProbabilityCount { got: usize, expected: usize },
}

/// Read a CSV with a header row, mapping group and label values to dense
/// indices in first-appearance order. Features with bins parse as
/// numbers; the rest are dictionary-encoded categories.
pub fn load_dataset(csv_path: &Path, schema: &SchemaSpec) -> Result<Dataset, DistError> {
    schema.validate()?;
    let file = std::fs::File::open(csv_path).map_err(|source| DistError::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| DistError::Csv(e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize, DistError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DistError::Schema(format!("column '{}' not found in header", name)))
    };
    let group_col = col(&schema.group_column)?;
    let label_col = col(&schema.label_column)?;
    let feature_cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| col(&f.name))
        .collect::<Result<_, _>>()?;

    let mut groups: Vec<String> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut group_index: HashMap<String, usize> = HashMap::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut cat_dicts: Vec<HashMap<String, usize>> =
        schema.features.iter().map(|_| HashMap::new()).collect();
    let mut feature_arity: Vec<usize> = schema
        .features
        .iter()
        .map(|f| f.bins.as_ref().map_or(0, |b| b.len()))
        .collect();
    let mut rows = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DistError::Csv(e.to_string()))?;
        let line = i + 2; // header is line 1
        let raw_group = record.get(group_col).unwrap_or("");
        if raw_group == schema.missing_token {
            return Err(DistError::MissingKey {
                row: line,
                column: schema.group_column.clone(),
            });
        }
        let group = *group_index.entry(raw_group.to_string()).or_insert_with(|| {
            groups.push(raw_group.to_string());
            groups.len() - 1
        });
        let raw_label = record.get(label_col).unwrap_or("");
        if raw_label == schema.missing_token {
            return Err(DistError::MissingKey {
                row: line,
                column: schema.label_column.clone(),
            });
        }
        let label = *label_index.entry(raw_label.to_string()).or_insert_with(|| {
            labels.push(raw_label.to_string());
            labels.len() - 1
        });

        let mut features = Vec::with_capacity(schema.features.len());
        for (j, spec) in schema.features.iter().enumerate() {
            let raw = record.get(feature_cols[j]).unwrap_or("").trim();
            if raw == schema.missing_token {
                features.push(Cell::Missing);
            } else if spec.bins.is_some() {
                let value: f64 = raw.parse().map_err(|_| DistError::Parse {
                    row: line,
                    column: spec.name.clone(),
                    value: raw.to_string(),
                })?;
                features.push(Cell::Num(value));
            } else {
                let dict = &mut cat_dicts[j];
                let next = dict.len();
                let idx = *dict.entry(raw.to_string()).or_insert(next);
                feature_arity[j] = feature_arity[j].max(idx + 1);
                features.push(Cell::Cat(idx));
            }
        }
        rows.push(Row {
            group,
            label,
            features,
        });
    }

    Ok(Dataset {
        groups,
        labels,
        feature_names: schema.features.iter().map(|f| f.name.clone()).collect(),
        feature_arity,
        rows,
    })
}

/// Map every numeric cell to the index of its containing interval.
/// Intervals are left-closed and right-open; the last one extends to
/// infinity. Missing markers pass through untouched.
pub fn quantize_dataset(dataset: &Dataset, schema: &SchemaSpec) -> Result<Dataset, DistError> {
    let mut out = dataset.clone();
    for row_idx in 0..out.rows.len() {
        for (j, spec) in schema.features.iter().enumerate() {
            let cell = out.rows[row_idx].features[j];
            if let Cell::Num(value) = cell {
                let Some(bins) = &spec.bins else {
                    continue;
                };
                if value < bins[0] {
                    return Err(DistError::QuantizeRange {
                        row: row_idx + 2,
                        column: spec.name.clone(),
                        value,
                    });
                }
                // partition_point returns the count of boundaries <= value,
                // so subtracting one lands in the half-open interval.
                let idx = bins.partition_point(|b| *b <= value) - 1;
                out.rows[row_idx].features[j] = Cell::Cat(idx);
            }
        }
    }
    Ok(out)
}

/// Empirical joint distribution of (group, label, joined feature tuple).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointModel {
    pub format_version: u32,
    /// Number of groups (A).
    pub num_groups: usize,
    /// Number of labels (C).
    pub num_labels: usize,
    /// Support size of the joined feature variable (D).
    pub support_size: usize,
    pub groups: Vec<String>,
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
    /// Observed feature tuples in first-appearance order, one per support
    /// point.
    pub support: Vec<Vec<usize>>,
    /// Joint masses mu[(s*C)+y], summing to one.
    pub mu: Vec<f64>,
    /// Group marginals, length A.
    pub mu_group: Vec<f64>,
    /// Conditional feature distribution, `A*C` rows by `D` columns.
    pub phi: Vec<Vec<f64>>,
    /// Feature marginal, length D.
    pub px: Vec<f64>,
    /// Total observation count.
    pub row_count: usize,
    /// Observation count per (group, label) cell; exposes support sparsity.
    pub cell_counts: Vec<usize>,
    /// Observation count per support point.
    pub support_counts: Vec<usize>,
}

impl JointModel {
    pub fn num_cells(&self) -> usize {
        self.num_groups * self.num_labels
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("joint model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DistError> {
        let jm: JointModel =
            serde_json::from_str(text).map_err(|e| DistError::Schema(e.to_string()))?;
        jm.check_invariants().map_err(DistError::Schema)?;
        Ok(jm)
    }

    /// Validate normalization and consistency to 1e-12.
    pub fn check_invariants(&self) -> Result<(), String> {
        let a = self.num_groups;
        let c = self.num_labels;
        let d = self.support_size;
        if self.mu.len() != a * c || self.phi.len() != a * c || self.px.len() != d {
            return Err("dimension mismatch".into());
        }
        let mu_sum: f64 = self.mu.iter().sum();
        if (mu_sum - 1.0).abs() > 1e-12 {
            return Err(format!("mu sums to {}", mu_sum));
        }
        for (r, row) in self.phi.iter().enumerate() {
            if row.len() != d {
                return Err(format!("phi row {} has wrong length", r));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(format!("phi row {} sums to {}", r, sum));
            }
        }
        for s in 0..a {
            let m: f64 = (0..c).map(|y| self.mu[s * c + y]).sum();
            if (self.mu_group[s] - m).abs() > 1e-12 || m <= 0.0 {
                return Err(format!("group marginal {} inconsistent", s));
            }
        }
        for x in 0..d {
            let mixed: f64 = (0..a * c).map(|r| self.mu[r] * self.phi[r][x]).sum();
            if (mixed - self.px[x]).abs() > 1e-12 {
                return Err(format!("px[{}] inconsistent with mu and phi", x));
            }
        }
        Ok(())
    }

    /// Label marginal `Pr(Y = y)`.
    pub fn label_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_labels];
        for s in 0..self.num_groups {
            let cells = &self.mu[s * self.num_labels..(s + 1) * self.num_labels];
            for (o, &m) in out.iter_mut().zip(cells) {
                *o += m;
            }
        }
        out
    }
}

/// Posterior of (group, label) given each support point; row `x` of the
/// table is a distribution over the `A*C` cells.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorTable {
    pub rows: Vec<Vec<f64>>,
}

/// Count observations into the empirical joint model. Fails if any
/// missing markers remain, any raw numeric cells remain, or any
/// (group, label) cell is empty.
pub fn estimate_joint(dataset: &Dataset) -> Result<JointModel, DistError> {
    if dataset.rows.is_empty() {
        return Err(DistError::Empty);
    }
    let a = dataset.num_groups();
    let c = dataset.num_labels();

    let mut support: Vec<Vec<usize>> = Vec::new();
    let mut support_index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut cell_counts = vec![0usize; a * c];
    let mut joint_counts: Vec<Vec<usize>> = vec![Vec::new(); a * c];

    for (i, row) in dataset.rows.iter().enumerate() {
        let mut tuple = Vec::with_capacity(row.features.len());
        for (j, cell) in row.features.iter().enumerate() {
            match cell {
                Cell::Cat(v) => tuple.push(*v),
                Cell::Missing => {
                    return Err(DistError::MissingValue {
                        row: i + 2,
                        column: dataset.feature_names[j].clone(),
                    })
                }
                Cell::Num(_) => {
                    return Err(DistError::Unquantized {
                        column: dataset.feature_names[j].clone(),
                    })
                }
            }
        }
        let next = support.len();
        let x = *support_index.entry(tuple.clone()).or_insert_with(|| {
            support.push(tuple);
            next
        });
        let cell = row.group * c + row.label;
        cell_counts[cell] += 1;
        if joint_counts[cell].len() < support.len() {
            joint_counts[cell].resize(support.len(), 0);
        }
        joint_counts[cell][x] += 1;
    }

    for s in 0..a {
        for y in 0..c {
            if cell_counts[s * c + y] == 0 {
                return Err(DistError::DegenerateCell {
                    group: dataset.groups[s].clone(),
                    label: dataset.labels[y].clone(),
                });
            }
        }
    }

    let d = support.len();
    let n = dataset.rows.len() as f64;
    let mu: Vec<f64> = cell_counts.iter().map(|&k| k as f64 / n).collect();
    let mut mu_group = vec![0.0; a];
    for s in 0..a {
        for y in 0..c {
            mu_group[s] += mu[s * c + y];
        }
    }
    let mut phi = Vec::with_capacity(a * c);
    let mut support_counts = vec![0usize; d];
    for cell in 0..a * c {
        let total = cell_counts[cell] as f64;
        let mut row = vec![0.0; d];
        for (x, &k) in joint_counts[cell].iter().enumerate() {
            row[x] = k as f64 / total;
            support_counts[x] += k;
        }
        phi.push(row);
    }
    let px: Vec<f64> = support_counts.iter().map(|&k| k as f64 / n).collect();

    Ok(JointModel {
        format_version: 1,
        num_groups: a,
        num_labels: c,
        support_size: d,
        groups: dataset.groups.clone(),
        labels: dataset.labels.clone(),
        feature_names: dataset.feature_names.clone(),
        support,
        mu,
        mu_group,
        phi,
        px,
        row_count: dataset.rows.len(),
        cell_counts,
        support_counts,
    })
}

/// Bayes posterior `g(x)[(s,y)] = mu[(s,y)] * phi[(s,y)][x] / px[x]`.
/// Zero-mass support points (impossible for empirical models) fall back
/// to the prior so the table stays aligned with `px`.
pub fn posterior_g(jm: &JointModel) -> PosteriorTable {
    let cells = jm.num_cells();
    let mut rows = Vec::with_capacity(jm.support_size);
    for x in 0..jm.support_size {
        if jm.px[x] > 0.0 {
            let mut row = Vec::with_capacity(cells);
            for r in 0..cells {
                row.push(jm.mu[r] * jm.phi[r][x] / jm.px[x]);
            }
            rows.push(row);
        } else {
            rows.push(jm.mu.clone());
        }
    }
    PosteriorTable { rows }
}

/// Independently erase each feature cell of each group-`s` row with
/// probability `probs[s]`.
///
/// Randomness comes from a ChaCha8 stream seeded with `seed`; exactly one
/// uniform draw is consumed per feature cell in row-major order, whether
/// or not the cell changes, so output is reproducible across platforms
/// and insensitive to prior missingness.
pub fn inject_missing(dataset: &Dataset, probs: &[f64], seed: u64) -> Result<Dataset, DistError> {
    if probs.len() != dataset.num_groups() {
        return Err(DistError::ProbabilityCount {
            got: probs.len(),
            expected: dataset.num_groups(),
        });
    }
    for (group, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistError::BadProbability { group, value: p });
        }
    }
    let mut out = dataset.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in &mut out.rows {
        let p = probs[row.group];
        for cell in &mut row.features {
            let u: f64 = rng.random();
            if u < p {
                *cell = Cell::Missing;
            }
        }
    }
    Ok(out)
}

/// Replace every missing cell with the most frequent observed category of
/// its column; ties break to the smallest category index.
pub fn impute_mode(dataset: &Dataset) -> Result<Dataset, DistError> {
    let n_features = dataset.feature_names.len();
    let mut modes: Vec<Option<usize>> = vec![None; n_features];
    for (j, mode_slot) in modes.iter_mut().enumerate() {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        let mut any_missing = false;
        for row in &dataset.rows {
            match row.features[j] {
                Cell::Cat(v) => *counts.entry(v).or_insert(0) += 1,
                Cell::Missing => any_missing = true,
                Cell::Num(_) => {
                    return Err(DistError::Unquantized {
                        column: dataset.feature_names[j].clone(),
                    })
                }
            }
        }
        if !any_missing {
            continue;
        }
        let mode = counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(v, _)| v)
            .ok_or_else(|| DistError::Imputation {
                column: dataset.feature_names[j].clone(),
            })?;
        *mode_slot = Some(mode);
    }
    let mut out = dataset.clone();
    for row in &mut out.rows {
        for (j, cell) in row.features.iter_mut().enumerate() {
            if cell.is_missing() {
                if let Some(mode) = modes[j] {
                    *cell = Cell::Cat(mode);
                }
            }
        }
    }
    Ok(out)
}

/// Convenience wrapper: load, quantize, impute remaining missing cells if
/// requested, and estimate.
pub fn model_from_csv(
    csv_path: &Path,
    schema: &SchemaSpec,
    impute: bool,
) -> Result<JointModel, DistError> {
    let dataset = load_dataset(csv_path, schema)?;
    let mut dataset = quantize_dataset(&dataset, schema)?;
    if impute {
        dataset = impute_mode(&dataset)?;
    }
    estimate_joint(&dataset)
}

/// Thresholds echo for serialized outputs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThresholdsEcho {
    pub sp: f64,
    pub eo: f64,
    pub oae: f64,
}

impl From<&Thresholds> for ThresholdsEcho {
    fn from(t: &Thresholds) -> Self {
        ThresholdsEcho {
            sp: t.sp,
            eo: t.eo,
            oae: t.oae,
        }
    }
}

impl fmt::Display for ThresholdsEcho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sp={} eo={} oae={}", self.sp, self.eo, self.oae)
    }
}
