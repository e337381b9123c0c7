//! Exact fairness Pareto frontier for finite feature supports, plus the
//! brute-force references the test suites use as ground truth.
//!
//! A channel is feasible exactly when it factors through the features:
//! `P = phi * M` for some row-stochastic classifier `M` mapping support
//! points to predicted labels. Keeping both `M` and `P` as LP variables
//! with equality coupling reuses the fairness compilation unchanged and
//! makes the optimum a certificate: the returned `M` is an achieving
//! classifier, so the value is simultaneously an upper and lower bound.
//! This breaks down for continuous features, where no finite `phi`
//! exists, and for very large supports, which the variable cap guards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{posterior_g, JointModel};
use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation, Sense};
use crate::metrics::{self, MetricsError, Thresholds, TransitionMatrix};

/// Default cap on LP variables (`D*C + A*C*C`).
pub const DEFAULT_VAR_CAP: usize = 20_000;
/// Cap on deterministic enumeration size (`C^D`).
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// Exact frontier value with its achieving randomized classifier.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    /// Row-stochastic `D x C` classifier over support points.
    pub classifier: Vec<Vec<f64>>,
    /// Induced channel `phi * classifier`.
    pub p: TransitionMatrix,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("problem needs {needed} LP variables, above the cap {cap}")]
    CapExceeded { needed: usize, cap: usize },
    #[error("enumeration needs {needed} classifiers, above the cap {cap}")]
    EnumerationCap { needed: u128, cap: u128 },
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("metric compilation failed: {0}")]
    Metrics(#[from] MetricsError),
    #[error("oracle program reported {status:?}, but constant classifiers are always feasible")]
    UnexpectedStatus { status: LpStatus },
    #[error("classifier shape mismatch: {0}")]
    Shape(String),
}

/// Induce the channel `P = phi * M` from a classifier over support points.
pub fn classifier_to_transition(
    classifier: &[Vec<f64>],
    phi: &[Vec<f64>],
    labels: usize,
) -> Result<TransitionMatrix, OracleError> {
    let cells = phi.len();
    if !cells.is_multiple_of(labels) {
        return Err(OracleError::Shape(format!(
            "phi has {cells} rows, not a multiple of {labels} labels"
        )));
    }
    let groups = cells / labels;
    let d = classifier.len();
    let mut entries = Vec::with_capacity(cells * labels);
    for row in phi {
        if row.len() != d {
            return Err(OracleError::Shape(format!(
                "phi row has {} columns, classifier has {} rows",
                row.len(),
                d
            )));
        }
        for yhat in 0..labels {
            let mut v = 0.0;
            for (x, m_row) in classifier.iter().enumerate() {
                if m_row.len() != labels {
                    return Err(OracleError::Shape(format!(
                        "classifier row {x} has {} entries, expected {labels}",
                        m_row.len()
                    )));
                }
                v += row[x] * m_row[yhat];
            }
            entries.push(v);
        }
    }
    Ok(TransitionMatrix {
        groups,
        labels,
        entries,
    })
}

/// Exact frontier with the default variable cap.
pub fn exact_frontier(
    jm: &JointModel,
    thresholds: &Thresholds,
) -> Result<OracleResult, OracleError> {
    exact_frontier_capped(jm, thresholds, DEFAULT_VAR_CAP)
}

/// Solve the coupled LP over the classifier and its induced channel.
pub fn exact_frontier_capped(
    jm: &JointModel,
    thresholds: &Thresholds,
    var_cap: usize,
) -> Result<OracleResult, OracleError> {
    let a = jm.num_groups;
    let c = jm.num_labels;
    let d = jm.support_size;
    let n_m = d * c;
    let n_p = a * c * c;
    let n_vars = n_m + n_p;
    if n_vars > var_cap {
        return Err(OracleError::CapExceeded {
            needed: n_vars,
            cap: var_cap,
        });
    }

    // Accuracy objective on the channel block.
    let mut objective = vec![0.0; n_vars];
    for r in 0..a * c {
        objective[n_m + r * c + r % c] = jm.mu[r];
    }
    let mut prog = LinearProgram::new(Sense::Maximize, objective);

    // Classifier rows are distributions.
    for x in 0..d {
        let mut coeffs = vec![0.0; n_vars];
        for yhat in 0..c {
            coeffs[x * c + yhat] = 1.0;
        }
        prog.push_row(coeffs, Relation::Eq, 1.0);
    }
    // Coupling: P[r, yhat] = sum_x phi[r][x] M[x, yhat].
    for r in 0..a * c {
        for yhat in 0..c {
            let mut coeffs = vec![0.0; n_vars];
            coeffs[n_m + r * c + yhat] = 1.0;
            for x in 0..d {
                coeffs[x * c + yhat] -= jm.phi[r][x];
            }
            prog.push_row(coeffs, Relation::Eq, 0.0);
        }
    }
    // Fairness over the channel block.
    for constraint in metrics::fairness_constraints(&jm.mu, &jm.mu_group, thresholds)? {
        let mut coeffs = vec![0.0; n_vars];
        coeffs[n_m..].copy_from_slice(&constraint.coeffs);
        let relation = match constraint.relation {
            metrics::ConstraintRelation::Le => Relation::Le,
            metrics::ConstraintRelation::Eq => Relation::Eq,
        };
        prog.push_row(coeffs, relation, constraint.rhs);
    }

    let solution = lp::solve_lp(&prog)?;
    if solution.status != LpStatus::Optimal {
        return Err(OracleError::UnexpectedStatus {
            status: solution.status,
        });
    }
    let classifier: Vec<Vec<f64>> = (0..d)
        .map(|x| solution.point[x * c..(x + 1) * c].to_vec())
        .collect();
    // Recompute the channel from the classifier rather than trusting the
    // LP's P block, so the certificate identity P = phi*M holds to
    // multiplication accuracy.
    let p = classifier_to_transition(&classifier, &jm.phi, c)?;
    Ok(OracleResult {
        value: solution.objective,
        classifier,
        p,
    })
}

/// Accuracy of the unconstrained Bayes-optimal classifier:
/// the support-weighted maxima of the label posterior.
pub fn bayes_accuracy(jm: &JointModel) -> f64 {
    let g = posterior_g(jm);
    let c = jm.num_labels;
    jm.px
        .iter()
        .zip(&g.rows)
        .map(|(&w, row)| {
            let best = (0..c)
                .map(|yhat| (0..jm.num_groups).map(|s| row[s * c + yhat]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            w * best
        })
        .sum()
}

/// Best accuracy over all deterministic maps from support points to
/// labels whose induced channel satisfies the thresholds. A lower bound
/// on the exact frontier: randomization can strictly help under
/// constraints.
pub fn brute_force_deterministic(
    jm: &JointModel,
    thresholds: &Thresholds,
) -> Result<f64, OracleError> {
    let c = jm.num_labels;
    let d = jm.support_size;
    let total = (c as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if total > ENUMERATION_CAP {
        return Err(OracleError::EnumerationCap {
            needed: total,
            cap: ENUMERATION_CAP,
        });
    }
    let mut best: Option<f64> = None;
    let mut assignment = vec![0usize; d];
    loop {
        let p = deterministic_channel(jm, &assignment);
        if feasible(jm, thresholds, &p) {
            let acc = metrics::accuracy(&jm.mu, &p)?;
            if best.is_none_or(|b| acc > b) {
                best = Some(acc);
            }
        }
        // Odometer increment over label assignments.
        let mut pos = 0;
        loop {
            if pos == d {
                // All assignments visited; constant maps guarantee `best`.
                return Ok(best.expect("constant classifiers are always feasible"));
            }
            assignment[pos] += 1;
            if assignment[pos] < c {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

fn deterministic_channel(jm: &JointModel, assignment: &[usize]) -> TransitionMatrix {
    let c = jm.num_labels;
    let cells = jm.num_cells();
    let mut entries = vec![0.0; cells * c];
    for r in 0..cells {
        for (x, &yhat) in assignment.iter().enumerate() {
            entries[r * c + yhat] += jm.phi[r][x];
        }
    }
    TransitionMatrix {
        groups: jm.num_groups,
        labels: c,
        entries,
    }
}

fn feasible(jm: &JointModel, thresholds: &Thresholds, p: &TransitionMatrix) -> bool {
    let tol = 1e-9;
    (thresholds.sp >= 1.0 || metrics::sp_gap(&jm.mu, &jm.mu_group, p) <= thresholds.sp + tol)
        && (thresholds.eo >= 1.0 || metrics::max_eo_violation(p) <= thresholds.eo + tol)
        && (thresholds.oae >= 1.0
            || metrics::oae_gap(&jm.mu, &jm.mu_group, p) <= thresholds.oae + tol)
}
