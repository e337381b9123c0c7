//! Outer loop: alternate master solves with cut searches until no
//! violated cut remains or the iteration cap is reached, and sweep a
//! threshold grid to trace out the frontier curve.
//!
//! Every master value is an upper bound on the true frontier, and values
//! only tighten as the pool grows, so the per-iteration trace is
//! non-increasing. Sweep points are independent by default (fresh cut
//! pool per threshold, parallelizable); cuts describe the feasible set
//! only, never the thresholds, so pool reuse across a sweep is sound and
//! available as an opt-in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cutgen::{find_violated_cut, CutSearchConfig, CutSearchError};
use crate::dist::{posterior_g, JointModel};
use crate::master::{cut_rhs, solve_master, Cut, CutPool, MasterError};
use crate::metrics::{self, Thresholds, TransitionMatrix};

/// Outer-loop settings wrapping the cut-search configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrontierConfig {
    pub search: CutSearchConfig,
    /// Outer iteration cap (master solves).
    pub max_iterations: usize,
    /// Keep per-restart search traces in the result.
    pub record_trace: bool,
    /// Share one cut pool across a sweep instead of starting fresh per
    /// threshold.
    pub reuse_cuts: bool,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        FrontierConfig {
            search: CutSearchConfig::default(),
            max_iterations: 20,
            record_trace: false,
            reuse_cuts: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    NoViolation,
    IterationCap,
}

/// One frontier evaluation: the final upper bound, its channel, and the
/// per-iteration history.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub thresholds: Thresholds,
    pub value: f64,
    pub p: TransitionMatrix,
    pub pool_size: usize,
    pub iterations: usize,
    pub terminated_by: TerminationReason,
    /// Master value per iteration; non-increasing, last entry is `value`.
    pub trace: Vec<f64>,
    /// Largest equalized-odds gap of the returned channel.
    pub max_eo: f64,
    /// Per-iteration, per-restart search objectives when tracing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_traces: Option<Vec<Vec<Vec<f64>>>>,
}

impl FrontierPoint {
    pub fn trace_is_monotone(&self, tol: f64) -> bool {
        self.trace.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

#[derive(Debug, Error)]
pub enum FrontierError {
    #[error("master solve failed at iteration {iteration}: {source}")]
    Master {
        iteration: usize,
        #[source]
        source: MasterError,
    },
    #[error("cut search failed at iteration {iteration}: {source}")]
    CutSearch {
        iteration: usize,
        #[source]
        source: CutSearchError,
    },
    #[error("sweep grid must be non-empty and sorted ascending")]
    BadGrid,
}

/// Mix the outer iteration into the search seed so restarts explore
/// different starts each round while staying reproducible.
fn iteration_seed(base: u64, iteration: usize) -> u64 {
    let mut z = base ^ (iteration as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run the master/search alternation with a fresh cut pool.
pub fn approximate_frontier(
    jm: &JointModel,
    thresholds: &Thresholds,
    cfg: &FrontierConfig,
) -> Result<FrontierPoint, FrontierError> {
    let mut pool = CutPool::new();
    approximate_frontier_with_pool(jm, thresholds, cfg, &mut pool)
}

/// Same loop against a caller-owned pool; used by sweeps with cut reuse.
/// The pool is only ever appended to.
pub fn approximate_frontier_with_pool(
    jm: &JointModel,
    thresholds: &Thresholds,
    cfg: &FrontierConfig,
    pool: &mut CutPool,
) -> Result<FrontierPoint, FrontierError> {
    let g = posterior_g(jm);
    let mut trace = Vec::new();
    let mut search_traces = cfg.record_trace.then(Vec::new);

    for iteration in 1..=cfg.max_iterations.max(1) {
        let master = solve_master(jm, thresholds, pool)
            .map_err(|source| FrontierError::Master { iteration, source })?;
        trace.push(master.value);

        let mut search_cfg = cfg.search.clone();
        search_cfg.seed = iteration_seed(cfg.search.seed, iteration);
        let search = find_violated_cut(&master.p, &g, &jm.px, &jm.mu, &search_cfg)
            .map_err(|source| FrontierError::CutSearch { iteration, source })?;
        if let Some(traces) = search_traces.as_mut() {
            traces.push(search.restart_traces.clone());
        }

        let fresh = if search.violated {
            let rhs = cut_rhs(&search.vectors, &g, &jm.px);
            pool.add(Cut::new(search.vectors, rhs), iteration)
        } else {
            false
        };

        // Stop on convergence, on a duplicate cut (the master already
        // satisfies it, so nothing new can be learned), or at the cap.
        let converged = !search.violated || !fresh;
        if converged || iteration == cfg.max_iterations {
            let max_eo = metrics::max_eo_violation(&master.p);
            return Ok(FrontierPoint {
                thresholds: *thresholds,
                value: master.value,
                p: master.p,
                pool_size: pool.len(),
                iterations: iteration,
                terminated_by: if converged {
                    TerminationReason::NoViolation
                } else {
                    TerminationReason::IterationCap
                },
                trace,
                max_eo,
                search_traces,
            });
        }
    }
    unreachable!("loop always returns at the iteration cap");
}

/// Which threshold the sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricAxis {
    Sp,
    Eo,
    Oae,
}

impl MetricAxis {
    pub fn apply(&self, base: &Thresholds, alpha: f64) -> Thresholds {
        let mut t = *base;
        match self {
            MetricAxis::Sp => t.sp = alpha,
            MetricAxis::Eo => t.eo = alpha,
            MetricAxis::Oae => t.oae = alpha,
        }
        t
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricAxis::Sp => "sp",
            MetricAxis::Eo => "eo",
            MetricAxis::Oae => "oae",
        }
    }
}

/// One sweep entry; failed points carry the error text instead of a
/// frontier point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<FrontierPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub format_version: u32,
    pub metric: MetricAxis,
    pub base_thresholds: Thresholds,
    pub grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// SHA-256 of the joint model's JSON form.
    pub model_hash: String,
    pub config: FrontierConfig,
    /// Post-hoc monotonicity findings; informational, not fatal.
    pub warnings: Vec<String>,
}

/// Evaluate the frontier on an ascending threshold grid. Points run in
/// parallel with fresh pools unless `cfg.reuse_cuts` is set, in which
/// case they run sequentially against one shared pool. Per-point
/// failures are recorded and the sweep continues.
pub fn sweep(
    jm: &JointModel,
    metric: MetricAxis,
    grid: &[f64],
    base_thresholds: &Thresholds,
    cfg: &FrontierConfig,
) -> Result<SweepResult, FrontierError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(FrontierError::BadGrid);
    }
    let run_point = |&alpha: &f64, pool: Option<&mut CutPool>| -> SweepPoint {
        let thresholds = metric.apply(base_thresholds, alpha);
        let outcome = match pool {
            Some(pool) => approximate_frontier_with_pool(jm, &thresholds, cfg, pool),
            None => approximate_frontier(jm, &thresholds, cfg),
        };
        match outcome {
            Ok(point) => SweepPoint {
                alpha,
                point: Some(point),
                error: None,
            },
            Err(err) => SweepPoint {
                alpha,
                point: None,
                error: Some(err.to_string()),
            },
        }
    };

    let points: Vec<SweepPoint> = if cfg.reuse_cuts {
        let mut pool = CutPool::new();
        grid.iter()
            .map(|alpha| run_point(alpha, Some(&mut pool)))
            .collect()
    } else {
        grid.par_iter()
            .map(|alpha| run_point(alpha, None))
            .collect()
    };

    let mut warnings = Vec::new();
    for w in points.windows(2) {
        if let (Some(a), Some(b)) = (&w[0].point, &w[1].point) {
            if b.value < a.value - 1e-6 {
                let msg = format!(
                    "frontier value dips from {} at alpha={} to {} at alpha={}",
                    a.value, w[0].alpha, b.value, w[1].alpha
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let mut hasher = Sha256::new();
    hasher.update(jm.to_json().as_bytes());
    let model_hash: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();

    Ok(SweepResult {
        format_version: 1,
        metric,
        base_thresholds: *base_thresholds,
        grid: grid.to_vec(),
        points,
        model_hash,
        config: cfg.clone(),
        warnings,
    })
}
