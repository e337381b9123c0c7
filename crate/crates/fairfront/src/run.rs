//! Experiment harness shared by the CLI binary: run manifests, seed
//! derivation, atomic output files, and the serialized report formats
//! (JSON, CSV, SVG).
//!
//! Reproducibility contract: identical inputs and seed produce
//! byte-identical output files. Wall-clock time is quarantined in the
//! manifest, which also records a SHA-256 hash of every input and output
//! file. All randomness flows from one base seed fanned out through
//! [`derive_seed`] with fixed scope strings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dist::{estimate_joint, impute_mode, inject_missing, Dataset, DistError, JointModel};
use crate::frontier::{
    sweep, FrontierConfig, FrontierError, FrontierPoint, MetricAxis, SweepResult,
};
use crate::metrics::Thresholds;
use crate::oracle::OracleResult;

pub const FORMAT_VERSION: u32 = 1;

/// Deterministic subseed: FNV-1a over the scope string folded into the
/// base seed, finished with a splitmix64 avalanche. Fixed across
/// platforms and releases.
pub fn derive_seed(base: u64, scope: &str) -> u64 {
    let mut h = base ^ 0xcbf2_9ce4_8422_2325;
    for byte in scope.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Written alongside every run's outputs as `manifest.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Resolved configuration echo.
    pub config: serde_json::Value,
    /// SHA-256 of each input file, keyed by role.
    pub input_hashes: BTreeMap<String, String>,
    /// SHA-256 of each output file written by the run.
    pub outputs: BTreeMap<String, String>,
    /// Timing lives here so the data files stay byte-stable.
    pub wall_clock_ms: u128,
}

/// Collects outputs for one run directory. Every file is written to a
/// temporary sibling and renamed into place; hashes are recorded for the
/// manifest.
pub struct OutputWriter {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl OutputWriter {
    pub fn create(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, &path)?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    /// Write `manifest.json` recording the run; consumes the writer.
    pub fn finish(
        self,
        command: &str,
        seed: u64,
        config: serde_json::Value,
        input_hashes: BTreeMap<String, String>,
        wall_clock_ms: u128,
    ) -> io::Result<RunManifest> {
        let manifest = RunManifest {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            input_hashes,
            outputs: self.outputs.clone(),
            wall_clock_ms,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let tmp = self.dir.join(".manifest.json.tmp");
        std::fs::write(&tmp, text.as_bytes())?;
        std::fs::rename(tmp, self.dir.join("manifest.json"))?;
        Ok(manifest)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Frontier evaluation report written by `fairfront frontier`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrontierReport {
    pub format_version: u32,
    pub model_hash: String,
    pub bayes_accuracy: f64,
    pub point: FrontierPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
}

impl FrontierReport {
    pub fn new(jm: &JointModel, point: FrontierPoint, oracle: Option<&OracleResult>) -> Self {
        FrontierReport {
            format_version: FORMAT_VERSION,
            model_hash: sha256_hex(jm.to_json().as_bytes()),
            bayes_accuracy: crate::oracle::bayes_accuracy(jm),
            exact_value: oracle.map(|o| o.value),
            gap: oracle.map(|o| point.value - o.value),
            point,
        }
    }

    pub fn summary(&self) -> String {
        let p = &self.point;
        let mut out = String::new();
        let _ = writeln!(out, "frontier upper bound: {:.6}", p.value);
        let _ = writeln!(
            out,
            "thresholds: sp={} eo={} oae={}",
            p.thresholds.sp, p.thresholds.eo, p.thresholds.oae
        );
        let _ = writeln!(
            out,
            "iterations: {} ({})",
            p.iterations,
            match p.terminated_by {
                crate::frontier::TerminationReason::NoViolation => "converged",
                crate::frontier::TerminationReason::IterationCap => "iteration cap",
            }
        );
        let _ = writeln!(out, "cuts in pool: {}", p.pool_size);
        let _ = writeln!(
            out,
            "max equalized-odds gap of returned channel: {:.6}",
            p.max_eo
        );
        let _ = writeln!(
            out,
            "bayes accuracy (unconstrained): {:.6}",
            self.bayes_accuracy
        );
        if let (Some(exact), Some(gap)) = (self.exact_value, self.gap) {
            let _ = writeln!(out, "exact frontier: {:.6} (gap {:.2e})", exact, gap);
        }
        out
    }
}

fn csv_float(v: f64) -> String {
    // Shortest round-trip formatting, deterministic across runs.
    format!("{v}")
}

/// Render a sweep as CSV. Columns are fixed; oracle columns appear only
/// when any point carries an exact value.
pub fn sweep_to_csv(result: &SweepResult, exact: Option<&[Option<f64>]>) -> String {
    let mut out = String::new();
    let with_oracle = exact.is_some();
    out.push_str("format_version,metric,alpha,value,iterations,terminated_by,max_eo_of_p");
    if with_oracle {
        out.push_str(",exact_value,gap");
    }
    out.push('\n');
    for (i, sp) in result.points.iter().enumerate() {
        match &sp.point {
            Some(p) => {
                let _ = write!(
                    out,
                    "{},{},{},{},{},{},{}",
                    result.format_version,
                    result.metric.name(),
                    csv_float(sp.alpha),
                    csv_float(p.value),
                    p.iterations,
                    match p.terminated_by {
                        crate::frontier::TerminationReason::NoViolation => "no_violation",
                        crate::frontier::TerminationReason::IterationCap => "iteration_cap",
                    },
                    csv_float(p.max_eo),
                );
                if let Some(exact) = exact {
                    match exact[i] {
                        Some(e) => {
                            let _ = write!(out, ",{},{}", csv_float(e), csv_float(p.value - e));
                        }
                        None => out.push_str(",,"),
                    }
                }
                out.push('\n');
            }
            None => {
                let _ = write!(
                    out,
                    "{},{},{},,,failed,",
                    result.format_version,
                    result.metric.name(),
                    csv_float(sp.alpha),
                );
                if with_oracle {
                    out.push_str(",,");
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Static SVG line chart of a sweep (threshold on x, value on y).
pub fn sweep_to_svg(result: &SweepResult) -> String {
    let pts: Vec<(f64, f64)> = result
        .points
        .iter()
        .filter_map(|sp| sp.point.as_ref().map(|p| (sp.alpha, p.value)))
        .collect();
    let (w, h, ml, mb, mt, mr) = (640.0, 420.0, 70.0, 50.0, 20.0, 20.0);
    let (x0, x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let (mut y0, mut y1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
            (lo.min(y), hi.max(y))
        });
    if !pts.is_empty() && (y1 - y0) < 1e-9 {
        y0 -= 0.01;
        y1 += 0.01;
    }
    let sx = |x: f64| {
        if x1 > x0 {
            ml + (x - x0) / (x1 - x0) * (w - ml - mr)
        } else {
            (ml + w - mr) / 2.0
        }
    };
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mb - mt);
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    let _ = write!(
        svg,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    if !pts.is_empty() {
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{:.3}</text>",
                sx(fx),
                h - mb + 16.0,
                fx
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>",
                ml - 6.0,
                sy(fy) + 4.0,
                fy
            );
        }
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"{}\"/>",
            path.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f6fb2\"/>",
                sx(x),
                sy(y)
            );
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">alpha ({})</text>",
        (ml + w - mr) / 2.0,
        h - 12.0,
        result.metric.name()
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {})\">frontier upper bound</text>",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Report written by `fairfront oracle`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub format_version: u32,
    pub model_hash: String,
    pub thresholds: Thresholds,
    pub bayes_accuracy: f64,
    pub value: f64,
    /// Achieving randomized classifier over support points.
    pub classifier: Vec<Vec<f64>>,
    pub p: crate::metrics::TransitionMatrix,
}

impl OracleReport {
    pub fn new(jm: &JointModel, thresholds: &Thresholds, result: OracleResult) -> Self {
        OracleReport {
            format_version: FORMAT_VERSION,
            model_hash: sha256_hex(jm.to_json().as_bytes()),
            thresholds: *thresholds,
            bayes_accuracy: crate::oracle::bayes_accuracy(jm),
            value: result.value,
            classifier: result.classifier,
            p: result.p,
        }
    }
}

/// Auditable dump of the compiled constraint sets behind
/// `--dump-constraints`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintDump {
    pub format_version: u32,
    pub thresholds: Thresholds,
    pub simplex: Vec<crate::metrics::LinearConstraint>,
    pub fairness: Vec<crate::metrics::LinearConstraint>,
}

impl ConstraintDump {
    pub fn new(
        jm: &JointModel,
        thresholds: &Thresholds,
    ) -> Result<Self, crate::metrics::MetricsError> {
        Ok(ConstraintDump {
            format_version: FORMAT_VERSION,
            thresholds: *thresholds,
            simplex: crate::metrics::simplex_constraints(jm.num_groups, jm.num_labels),
            fairness: crate::metrics::fairness_constraints(&jm.mu, &jm.mu_group, thresholds)?,
        })
    }
}

/// Missing-data study: for each erase probability of group 0, rerun
/// inject -> impute -> estimate -> sweep on the same quantized dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MissingStudyConfig {
    pub p0_grid: Vec<f64>,
    pub p1: f64,
    pub metric: MetricAxis,
    pub grid: Vec<f64>,
    pub base_thresholds: Thresholds,
    pub frontier: FrontierConfig,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MissingBranch {
    pub p0: f64,
    pub p1: f64,
    pub inject_seed: u64,
    pub sweep: SweepResult,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MissingStudyResult {
    pub format_version: u32,
    pub branches: Vec<MissingBranch>,
}

/// Run the study on an already quantized dataset. Group 0 cells erase
/// with the branch's probability; every other group uses `p1`. Each
/// branch derives its own inject seed from the base seed and the branch
/// probability, and branches run in parallel.
pub fn missing_study(
    dataset: &Dataset,
    cfg: &MissingStudyConfig,
) -> Result<MissingStudyResult, RunError> {
    let branches: Vec<Result<MissingBranch, RunError>> = cfg
        .p0_grid
        .par_iter()
        .map(|&p0| {
            let mut probs = vec![cfg.p1; dataset.num_groups()];
            if !probs.is_empty() {
                probs[0] = p0;
            }
            let inject_seed = derive_seed(cfg.seed, &format!("missing-study/p0={p0}"));
            let injected = inject_missing(dataset, &probs, inject_seed)?;
            let imputed = impute_mode(&injected)?;
            let jm = estimate_joint(&imputed)?;
            let mut frontier_cfg = cfg.frontier.clone();
            frontier_cfg.search.seed = derive_seed(cfg.seed, "missing-study/search");
            let sweep_result = sweep(
                &jm,
                cfg.metric,
                &cfg.grid,
                &cfg.base_thresholds,
                &frontier_cfg,
            )?;
            Ok(MissingBranch {
                p0,
                p1: cfg.p1,
                inject_seed,
                sweep: sweep_result,
            })
        })
        .collect();
    let mut out = Vec::with_capacity(branches.len());
    for branch in branches {
        out.push(branch?);
    }
    Ok(MissingStudyResult {
        format_version: FORMAT_VERSION,
        branches: out,
    })
}

/// Combined comparison CSV across branches: one row per (p0, alpha).
pub fn missing_study_to_csv(result: &MissingStudyResult) -> String {
    let mut out = String::new();
    out.push_str("format_version,p0,p1,metric,alpha,value,iterations,terminated_by,max_eo_of_p\n");
    for branch in &result.branches {
        for sp in &branch.sweep.points {
            match &sp.point {
                Some(p) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        result.format_version,
                        csv_float(branch.p0),
                        csv_float(branch.p1),
                        branch.sweep.metric.name(),
                        csv_float(sp.alpha),
                        csv_float(p.value),
                        p.iterations,
                        match p.terminated_by {
                            crate::frontier::TerminationReason::NoViolation => "no_violation",
                            crate::frontier::TerminationReason::IterationCap => "iteration_cap",
                        },
                        csv_float(p.max_eo),
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},,,failed,",
                        result.format_version,
                        csv_float(branch.p0),
                        csv_float(branch.p1),
                        branch.sweep.metric.name(),
                        csv_float(sp.alpha),
                    );
                }
            }
        }
    }
    out
}
