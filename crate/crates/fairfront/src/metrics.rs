//! Group fairness metrics as linear constraints on the prediction channel.
//!
//! The decision variable throughout is the transition matrix `P` with
//! `A*C` rows (one per (group, label) pair, row index `s*C + y`) and `C`
//! columns; entry `(s*C+y, yhat)` is `Pr(prediction = yhat | group s,
//! label y)`. Statistical parity, equalized odds, and overall accuracy
//! equality are all affine in `P`, so each compiles to a set of paired
//! one-sided inequalities over the flattened entries of `P` (index
//! `(s*C+y)*C + yhat`). Constraints are generated for unordered group
//! pairs only; thresholds at or above one compile to no constraints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row-stochastic matrix of prediction probabilities conditioned on
/// (group, label); rows indexed `s*C + y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub groups: usize,
    pub labels: usize,
    /// Row-major `A*C x C`.
    pub entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(groups: usize, labels: usize, entries: Vec<f64>) -> Result<Self, MetricsError> {
        if entries.len() != groups * labels * labels {
            return Err(MetricsError::Dimension {
                got: entries.len(),
                expected: groups * labels * labels,
            });
        }
        Ok(TransitionMatrix {
            groups,
            labels,
            entries,
        })
    }

    /// The deterministic channel that repeats the true label.
    pub fn identity_pattern(groups: usize, labels: usize) -> Self {
        let mut entries = vec![0.0; groups * labels * labels];
        for s in 0..groups {
            for y in 0..labels {
                entries[(s * labels + y) * labels + y] = 1.0;
            }
        }
        TransitionMatrix {
            groups,
            labels,
            entries,
        }
    }

    /// Every row equal to `dist` (a constant classifier's channel).
    pub fn constant_rows(groups: usize, labels: usize, dist: &[f64]) -> Self {
        let mut entries = Vec::with_capacity(groups * labels * labels);
        for _ in 0..groups * labels {
            entries.extend_from_slice(dist);
        }
        TransitionMatrix {
            groups,
            labels,
            entries,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.groups * self.labels
    }

    #[inline]
    pub fn get(&self, s: usize, y: usize, yhat: usize) -> f64 {
        self.entries[(s * self.labels + y) * self.labels + yhat]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.labels..(r + 1) * self.labels]
    }

    /// Worst deviation of any row sum from one, or of any entry from [0,1].
    pub fn stochasticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.num_rows() {
            let row = self.row(r);
            let sum: f64 = row.iter().sum();
            worst = worst.max((sum - 1.0).abs());
            for &v in row {
                worst = worst.max(-v).max(v - 1.0);
            }
        }
        worst
    }
}

/// Fairness thresholds; values at or above one deactivate the metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub sp: f64,
    pub eo: f64,
    pub oae: f64,
}

impl Thresholds {
    pub fn new(sp: f64, eo: f64, oae: f64) -> Result<Self, MetricsError> {
        for (name, v) in [("sp", sp), ("eo", eo), ("oae", oae)] {
            if v.is_nan() || v < 0.0 {
                return Err(MetricsError::NegativeThreshold { name, value: v });
            }
        }
        Ok(Thresholds { sp, eo, oae })
    }

    /// All metrics deactivated.
    pub fn unconstrained() -> Self {
        Thresholds {
            sp: 1.0,
            eo: 1.0,
            oae: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Sp,
    Eo,
    Oae,
    Simplex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintRelation {
    Le,
    Eq,
}

/// One affine constraint over the flattened entries of `P`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub relation: ConstraintRelation,
    pub rhs: f64,
    pub provenance: Provenance,
}

impl LinearConstraint {
    pub fn satisfied_at(&self, flat_p: &[f64], tol: f64) -> bool {
        let lhs: f64 = self.coeffs.iter().zip(flat_p).map(|(a, x)| a * x).sum();
        match self.relation {
            ConstraintRelation::Le => lhs <= self.rhs + tol,
            ConstraintRelation::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

pub fn all_satisfied(constraints: &[LinearConstraint], flat_p: &[f64], tol: f64) -> bool {
    constraints.iter().all(|c| c.satisfied_at(flat_p, tol))
}

/// Flat index of `P[(s*C+y), yhat]` in the constraint coefficient vectors.
#[inline]
pub fn entry_index(labels: usize, row: usize, yhat: usize) -> usize {
    row * labels + yhat
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: got {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("threshold {name} must be nonnegative, got {value}")]
    NegativeThreshold { name: &'static str, value: f64 },
    #[error("confusion-matrix mapping requires binary labels, got C={labels}")]
    NotBinary { labels: usize },
    #[error("group {group} has a zero {kind} count")]
    ZeroMarginal { group: usize, kind: &'static str },
}

/// Expected accuracy `sum_{s,y} mu[s*C+y] * P[(s,y), y]`.
pub fn accuracy(mu: &[f64], p: &TransitionMatrix) -> Result<f64, MetricsError> {
    if mu.len() != p.num_rows() {
        return Err(MetricsError::Dimension {
            got: mu.len(),
            expected: p.num_rows(),
        });
    }
    let c = p.labels;
    Ok(mu
        .iter()
        .enumerate()
        .map(|(r, &m)| m * p.entries[r * c + r % c])
        .sum())
}

fn pairs(groups: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..groups).flat_map(move |s| (s + 1..groups).map(move |t| (s, t)))
}

/// Emit `expr <= rhs` and `-expr <= rhs`.
fn push_abs_pair(
    out: &mut Vec<LinearConstraint>,
    coeffs: Vec<f64>,
    rhs: f64,
    provenance: Provenance,
) {
    let negated = coeffs.iter().map(|v| -v).collect();
    out.push(LinearConstraint {
        coeffs,
        relation: ConstraintRelation::Le,
        rhs,
        provenance,
    });
    out.push(LinearConstraint {
        coeffs: negated,
        relation: ConstraintRelation::Le,
        rhs,
        provenance,
    });
}

/// Statistical parity: for every predicted label and unordered group pair,
/// `|Pr(Yhat=yhat|S=s) - Pr(Yhat=yhat|S=s')| <= alpha`.
pub fn sp_constraints(
    mu: &[f64],
    mu_group: &[f64],
    alpha: f64,
) -> Result<Vec<LinearConstraint>, MetricsError> {
    let a = mu_group.len();
    let c = mu.len() / a.max(1);
    if a * c != mu.len() {
        return Err(MetricsError::Dimension {
            got: mu.len(),
            expected: a * c,
        });
    }
    for (s, &m) in mu_group.iter().enumerate() {
        if m <= 0.0 {
            return Err(MetricsError::ZeroMarginal {
                group: s,
                kind: "group",
            });
        }
    }
    let mut out = Vec::new();
    if alpha >= 1.0 {
        return Ok(out);
    }
    let nvars = a * c * c;
    for yhat in 0..c {
        for (s, t) in pairs(a) {
            let mut coeffs = vec![0.0; nvars];
            for y in 0..c {
                coeffs[entry_index(c, s * c + y, yhat)] += mu[s * c + y] / mu_group[s];
                coeffs[entry_index(c, t * c + y, yhat)] -= mu[t * c + y] / mu_group[t];
            }
            push_abs_pair(&mut out, coeffs, alpha, Provenance::Sp);
        }
    }
    Ok(out)
}

/// Equalized odds: entry-wise gaps `|P[(s,y),yhat] - P[(s',y),yhat]| <= alpha`.
pub fn eo_constraints(alpha: f64, groups: usize, labels: usize) -> Vec<LinearConstraint> {
    let mut out = Vec::new();
    if alpha >= 1.0 {
        return out;
    }
    let nvars = groups * labels * labels;
    for y in 0..labels {
        for yhat in 0..labels {
            for (s, t) in pairs(groups) {
                let mut coeffs = vec![0.0; nvars];
                coeffs[entry_index(labels, s * labels + y, yhat)] += 1.0;
                coeffs[entry_index(labels, t * labels + y, yhat)] -= 1.0;
                push_abs_pair(&mut out, coeffs, alpha, Provenance::Eo);
            }
        }
    }
    out
}

/// Overall accuracy equality: per-group accuracy gaps
/// `|Pr(Yhat=Y|S=s) - Pr(Yhat=Y|S=s')| <= alpha`.
pub fn oae_constraints(
    mu: &[f64],
    mu_group: &[f64],
    alpha: f64,
) -> Result<Vec<LinearConstraint>, MetricsError> {
    let a = mu_group.len();
    let c = mu.len() / a.max(1);
    if a * c != mu.len() {
        return Err(MetricsError::Dimension {
            got: mu.len(),
            expected: a * c,
        });
    }
    for (s, &m) in mu_group.iter().enumerate() {
        if m <= 0.0 {
            return Err(MetricsError::ZeroMarginal {
                group: s,
                kind: "group",
            });
        }
    }
    let mut out = Vec::new();
    if alpha >= 1.0 {
        return Ok(out);
    }
    let nvars = a * c * c;
    for (s, t) in pairs(a) {
        let mut coeffs = vec![0.0; nvars];
        for y in 0..c {
            coeffs[entry_index(c, s * c + y, y)] += mu[s * c + y] / mu_group[s];
            coeffs[entry_index(c, t * c + y, y)] -= mu[t * c + y] / mu_group[t];
        }
        push_abs_pair(&mut out, coeffs, alpha, Provenance::Oae);
    }
    Ok(out)
}

/// Row-stochasticity equalities `sum_yhat P[r, yhat] = 1` for every row.
pub fn simplex_constraints(groups: usize, labels: usize) -> Vec<LinearConstraint> {
    let nvars = groups * labels * labels;
    (0..groups * labels)
        .map(|r| {
            let mut coeffs = vec![0.0; nvars];
            for yhat in 0..labels {
                coeffs[entry_index(labels, r, yhat)] = 1.0;
            }
            LinearConstraint {
                coeffs,
                relation: ConstraintRelation::Eq,
                rhs: 1.0,
                provenance: Provenance::Simplex,
            }
        })
        .collect()
}

/// All three metric families compiled at the given thresholds.
pub fn fairness_constraints(
    mu: &[f64],
    mu_group: &[f64],
    thresholds: &Thresholds,
) -> Result<Vec<LinearConstraint>, MetricsError> {
    let a = mu_group.len();
    let c = mu.len() / a.max(1);
    let mut out = sp_constraints(mu, mu_group, thresholds.sp)?;
    out.extend(eo_constraints(thresholds.eo, a, c));
    out.extend(oae_constraints(mu, mu_group, thresholds.oae)?);
    Ok(out)
}

/// Largest statistical parity gap of `P` under `mu`.
pub fn sp_gap(mu: &[f64], mu_group: &[f64], p: &TransitionMatrix) -> f64 {
    let c = p.labels;
    let mut worst = 0.0f64;
    for yhat in 0..c {
        for (s, t) in pairs(p.groups) {
            let mut gap = 0.0;
            for y in 0..c {
                gap += mu[s * c + y] / mu_group[s] * p.get(s, y, yhat)
                    - mu[t * c + y] / mu_group[t] * p.get(t, y, yhat);
            }
            worst = worst.max(gap.abs());
        }
    }
    worst
}

/// Largest equalized-odds gap; the "max equalized odds" of `P`.
pub fn max_eo_violation(p: &TransitionMatrix) -> f64 {
    let mut worst = 0.0f64;
    for y in 0..p.labels {
        for yhat in 0..p.labels {
            for (s, t) in pairs(p.groups) {
                worst = worst.max((p.get(s, y, yhat) - p.get(t, y, yhat)).abs());
            }
        }
    }
    worst
}

/// Largest overall-accuracy gap of `P` under `mu`.
pub fn oae_gap(mu: &[f64], mu_group: &[f64], p: &TransitionMatrix) -> f64 {
    let c = p.labels;
    let mut worst = 0.0f64;
    for (s, t) in pairs(p.groups) {
        let mut gap = 0.0;
        for y in 0..c {
            gap += mu[s * c + y] / mu_group[s] * p.get(s, y, y)
                - mu[t * c + y] / mu_group[t] * p.get(t, y, y);
        }
        worst = worst.max(gap.abs());
    }
    worst
}

/// Per-group confusion counts for binary classification. Label index 1 is
/// the positive class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSet {
    pub true_pos: Vec<f64>,
    pub false_pos: Vec<f64>,
    pub false_neg: Vec<f64>,
    pub true_neg: Vec<f64>,
    pub n_plus: Vec<f64>,
    pub n_minus: Vec<f64>,
}

/// Scale the binary transition matrix into per-group confusion counts:
/// `TP_s = n_s^+ P[(s,1),1]`, `FP_s = n_s^- P[(s,0),1]`, and so on.
pub fn confusion_from_transition(
    p: &TransitionMatrix,
    n_plus: &[f64],
    n_minus: &[f64],
) -> Result<ConfusionSet, MetricsError> {
    if p.labels != 2 {
        return Err(MetricsError::NotBinary { labels: p.labels });
    }
    if n_plus.len() != p.groups || n_minus.len() != p.groups {
        return Err(MetricsError::Dimension {
            got: n_plus.len(),
            expected: p.groups,
        });
    }
    let mut cs = ConfusionSet {
        true_pos: Vec::new(),
        false_pos: Vec::new(),
        false_neg: Vec::new(),
        true_neg: Vec::new(),
        n_plus: n_plus.to_vec(),
        n_minus: n_minus.to_vec(),
    };
    for s in 0..p.groups {
        cs.true_pos.push(n_plus[s] * p.get(s, 1, 1));
        cs.false_neg.push(n_plus[s] * p.get(s, 1, 0));
        cs.false_pos.push(n_minus[s] * p.get(s, 0, 1));
        cs.true_neg.push(n_minus[s] * p.get(s, 0, 0));
    }
    Ok(cs)
}

/// Inverse of [`confusion_from_transition`].
pub fn transition_from_confusion(cs: &ConfusionSet) -> Result<TransitionMatrix, MetricsError> {
    let groups = cs.n_plus.len();
    let mut entries = vec![0.0; groups * 4];
    for s in 0..groups {
        if cs.n_plus[s] <= 0.0 {
            return Err(MetricsError::ZeroMarginal {
                group: s,
                kind: "positive",
            });
        }
        if cs.n_minus[s] <= 0.0 {
            return Err(MetricsError::ZeroMarginal {
                group: s,
                kind: "negative",
            });
        }
        // Row (s, y=0): negatives; row (s, y=1): positives.
        entries[(s * 2) * 2] = cs.true_neg[s] / cs.n_minus[s];
        entries[(s * 2) * 2 + 1] = cs.false_pos[s] / cs.n_minus[s];
        entries[(s * 2 + 1) * 2] = cs.false_neg[s] / cs.n_plus[s];
        entries[(s * 2 + 1) * 2 + 1] = cs.true_pos[s] / cs.n_plus[s];
    }
    TransitionMatrix::new(groups, 2, entries)
}
