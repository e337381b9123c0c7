//! Search for the most violated informativeness cut at a master solution.
//!
//! The search objective is a difference of convex functions of the piece
//! vectors: the posterior-side expectation of the pointwise maximum minus
//! the channel-side sum of per-column maxima. A negative value certifies
//! a violated cut. Minimization runs as a convex-concave procedure: the
//! subtracted convex term is replaced by its supporting linearization at
//! the current point (the active piece per column, ties to the smallest
//! piece index), leaving an LP with one epigraph variable per support
//! point. Each majorize-minimize step can only decrease the true
//! objective, so per-restart traces are non-increasing.
//!
//! The procedure finds stationary points, not global optima; a
//! deterministic heuristic start plus seeded uniform restarts is the
//! mitigation. Restart randomness comes from per-restart ChaCha8 streams
//! of a single seed, so results are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::PosteriorTable;
use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation, Sense};
use crate::master::{channel_side, cut_rhs};
use crate::metrics::TransitionMatrix;

/// Cut-search settings. `pieces` is the number of linear pieces per cut;
/// the default is 6 pieces with 16 restarts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutSearchConfig {
    pub pieces: usize,
    pub restarts: usize,
    pub max_inner_iterations: usize,
    /// Stop a restart when one step improves the objective by less.
    pub descent_tol: f64,
    /// Declare violation when the best objective is below `-stop_tol`.
    pub stop_tol: f64,
    pub seed: u64,
}

impl Default for CutSearchConfig {
    fn default() -> Self {
        CutSearchConfig {
            pieces: 6,
            restarts: 16,
            max_inner_iterations: 100,
            descent_tol: 1e-9,
            stop_tol: 1e-7,
            seed: 0,
        }
    }
}

impl CutSearchConfig {
    fn validate(&self) -> Result<(), CutSearchError> {
        if self.pieces == 0 || self.restarts == 0 {
            return Err(CutSearchError::BadConfig(
                "pieces and restarts must be positive",
            ));
        }
        let bad = |v: f64| v.is_nan() || v <= 0.0;
        if bad(self.descent_tol) || bad(self.stop_tol) {
            return Err(CutSearchError::BadConfig("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one multi-start search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutSearchResult {
    /// Best (smallest) objective over restarts, re-evaluated exactly at
    /// the returned vectors.
    pub objective: f64,
    pub vectors: Vec<Vec<f64>>,
    pub violated: bool,
    /// Objective trace per restart; failed restarts keep their partial
    /// trace.
    pub restart_traces: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum CutSearchError {
    #[error("invalid cut-search configuration: {0}")]
    BadConfig(&'static str),
    #[error("all {restarts} restarts failed; last error: {last}")]
    AllRestartsFailed { restarts: usize, last: LpError },
}

/// The difference-of-convex search objective: posterior-side expectation
/// minus channel-side sum of maxima. Negative iff the vectors define a
/// violated cut at `p`.
pub fn dc_objective(
    vectors: &[Vec<f64>],
    g: &PosteriorTable,
    px: &[f64],
    mu: &[f64],
    p: &TransitionMatrix,
) -> f64 {
    cut_rhs(vectors, g, px) - channel_side(vectors, p, mu)
}

/// Active piece per channel column: the argmax of `a_i . diag(mu) p_col`,
/// ties to the smallest index.
fn active_pieces(vectors: &[Vec<f64>], p: &TransitionMatrix, mu: &[f64]) -> Vec<usize> {
    let c = p.labels;
    let rows = p.num_rows();
    (0..c)
        .map(|yhat| {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, a) in vectors.iter().enumerate() {
                let v: f64 = (0..rows)
                    .map(|r| a[r] * mu[r] * p.entries[r * c + yhat])
                    .sum();
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            arg
        })
        .collect()
}

/// Descent outcome: final objective, final vectors, and per-iteration
/// objective trace (starting with the objective at the initial point).
pub type Descent = (f64, Vec<Vec<f64>>, Vec<f64>);

/// One convex-concave descent from `init`.
pub fn ccp_descend(
    init: Vec<Vec<f64>>,
    g: &PosteriorTable,
    px: &[f64],
    mu: &[f64],
    p: &TransitionMatrix,
    max_inner_iterations: usize,
    descent_tol: f64,
) -> Result<Descent, LpError> {
    let pieces = init.len();
    let cells = p.num_rows();
    let mut current = init;
    let mut objective = dc_objective(&current, g, px, mu, p);
    let mut trace = vec![objective];

    for _ in 0..max_inner_iterations {
        let active = active_pieces(&current, p, mu);
        let prog = ccp_subproblem(pieces, &active, g, px, mu, p);
        let solution = lp::solve_lp(&prog)?;
        if solution.status != LpStatus::Optimal {
            // The box-bounded subproblem is always feasible and bounded.
            return Err(LpError::NumericalBreakdown { residual: f64::NAN });
        }
        let next: Vec<Vec<f64>> = (0..pieces)
            .map(|i| solution.point[i * cells..(i + 1) * cells].to_vec())
            .collect();
        let next_objective = dc_objective(&next, g, px, mu, p);
        trace.push(next_objective);
        if next_objective < objective {
            current = next;
        }
        let improvement = objective - next_objective;
        objective = objective.min(next_objective);
        if improvement < descent_tol {
            break;
        }
    }
    Ok((objective, current, trace))
}

/// Linearized subproblem at the given active pieces: minimize the
/// epigraph of the posterior side minus the supporting hyperplane of the
/// channel side, over piece vectors in the unit box.
///
/// Variables: `pieces * cells` coefficients followed by one epigraph
/// variable per support point. Epigraph variables only need a lower
/// bound: every piece value lies in [-1, 1] because posterior rows are
/// distributions.
fn ccp_subproblem(
    pieces: usize,
    active: &[usize],
    g: &PosteriorTable,
    px: &[f64],
    mu: &[f64],
    p: &TransitionMatrix,
) -> LinearProgram {
    let cells = p.num_rows();
    let c = p.labels;
    let d = g.rows.len();
    let n_a = pieces * cells;
    let n_vars = n_a + d;

    let mut objective = vec![0.0; n_vars];
    for (x, &w) in px.iter().enumerate() {
        objective[n_a + x] = w;
    }
    for (yhat, &i) in active.iter().enumerate() {
        for r in 0..cells {
            objective[i * cells + r] -= mu[r] * p.entries[r * c + yhat];
        }
    }
    let mut prog = LinearProgram::new(Sense::Minimize, objective);
    for v in 0..n_a {
        prog.set_bounds(v, -1.0, 1.0);
    }
    for x in 0..d {
        prog.set_bounds(n_a + x, -1.0, f64::INFINITY);
    }
    for (x, row) in g.rows.iter().enumerate() {
        for i in 0..pieces {
            let mut coeffs = vec![0.0; n_vars];
            for r in 0..cells {
                coeffs[i * cells + r] = row[r];
            }
            coeffs[n_a + x] = -1.0;
            prog.push_row(coeffs, Relation::Le, 0.0);
        }
    }
    prog
}

/// Deterministic start: signed indicator patterns of the channel columns,
/// thresholded at each column's mean; piece `i` reads column `i mod C`.
fn heuristic_init(pieces: usize, p: &TransitionMatrix, mu: &[f64]) -> Vec<Vec<f64>> {
    let cells = p.num_rows();
    let c = p.labels;
    (0..pieces)
        .map(|i| {
            let yhat = i % c;
            let col: Vec<f64> = (0..cells)
                .map(|r| mu[r] * p.entries[r * c + yhat])
                .collect();
            let mean = col.iter().sum::<f64>() / cells as f64;
            col.iter()
                .map(|&v| if v >= mean { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

/// Multi-start search for a violated cut at `p`. Restart 0 uses the
/// deterministic heuristic start; the rest initialize uniformly in the
/// unit box from per-restart streams of `cfg.seed`. The best restart by
/// objective wins, ties to the earliest restart.
pub fn find_violated_cut(
    p: &TransitionMatrix,
    g: &PosteriorTable,
    px: &[f64],
    mu: &[f64],
    cfg: &CutSearchConfig,
) -> Result<CutSearchResult, CutSearchError> {
    cfg.validate()?;
    let cells = p.num_rows();
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut traces = Vec::with_capacity(cfg.restarts);
    let mut last_error: Option<LpError> = None;

    for restart in 0..cfg.restarts {
        let init = if restart == 0 {
            heuristic_init(cfg.pieces, p, mu)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(restart as u64);
            (0..cfg.pieces)
                .map(|_| (0..cells).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect()
        };
        match ccp_descend(
            init,
            g,
            px,
            mu,
            p,
            cfg.max_inner_iterations,
            cfg.descent_tol,
        ) {
            Ok((objective, vectors, trace)) => {
                traces.push(trace);
                let better = match &best {
                    None => true,
                    Some((b, _)) => objective < *b,
                };
                if better {
                    best = Some((objective, vectors));
                }
            }
            Err(err) => {
                log::warn!("cut-search restart {restart} failed: {err}");
                traces.push(Vec::new());
                last_error = Some(err);
            }
        }
    }

    match best {
        Some((objective, vectors)) => Ok(CutSearchResult {
            objective,
            violated: objective < -cfg.stop_tol,
            vectors,
            restart_traces: traces,
        }),
        None => Err(CutSearchError::AllRestartsFailed {
            restarts: cfg.restarts,
            last: last_error.expect("no best implies at least one error"),
        }),
    }
}
