//! Master program of the cutting-plane loop: maximize expected accuracy
//! over the prediction channel subject to the fairness constraints and
//! the informativeness cuts accumulated so far.
//!
//! A cut is a family of k vectors in `[-1,1]^{A*C}`. It asserts that the
//! per-column maxima of the mass-weighted channel, summed over predicted
//! labels, stay below the same functional evaluated on the posterior
//! table (a fixed number precomputed as the cut's right-hand side).
//! Summing maxima is piecewise linear, so each cut enters the LP through
//! C epigraph variables: one lower-bound row per (piece, column) and a
//! single budget row tying the epigraph sum to the right-hand side. The
//! relaxation is exact because the cut only ever upper-bounds that sum.
//! The mass weights are folded into the row coefficients at build time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{JointModel, PosteriorTable};
use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation, Sense};
use crate::metrics::{self, MetricsError, Thresholds, TransitionMatrix};

/// One informativeness constraint: piece vectors plus the precomputed
/// posterior-side expectation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    /// k vectors, each of length `A*C`, entries in `[-1, 1]`.
    pub vectors: Vec<Vec<f64>>,
    /// `E[max_i vectors[i] . g(X)]` over the empirical support.
    pub rhs: f64,
}

impl Cut {
    pub fn new(vectors: Vec<Vec<f64>>, rhs: f64) -> Self {
        Cut { vectors, rhs }
    }

    pub fn pieces(&self) -> usize {
        self.vectors.len()
    }
}

/// Right-hand side of a cut: the support-weighted expectation of the
/// pointwise maximum over pieces applied to the posterior.
pub fn cut_rhs(vectors: &[Vec<f64>], g: &PosteriorTable, px: &[f64]) -> f64 {
    px.iter()
        .zip(&g.rows)
        .map(|(&w, row)| {
            let best = vectors
                .iter()
                .map(|a| dot(a, row))
                .fold(f64::NEG_INFINITY, f64::max);
            w * best
        })
        .sum()
}

/// Signed violation of `cut` at channel `p` under masses `mu`: the
/// channel-side sum of maxima minus the cut's right-hand side. Positive
/// means the cut separates `p` from the feasible set.
pub fn cut_violation(p: &TransitionMatrix, cut: &Cut, mu: &[f64]) -> f64 {
    channel_side(&cut.vectors, p, mu) - cut.rhs
}

/// `sum_yhat max_i vectors[i]^T diag(mu) p_col(yhat)`.
pub fn channel_side(vectors: &[Vec<f64>], p: &TransitionMatrix, mu: &[f64]) -> f64 {
    let c = p.labels;
    let rows = p.num_rows();
    (0..c)
        .map(|yhat| {
            vectors
                .iter()
                .map(|a| {
                    (0..rows)
                        .map(|r| a[r] * mu[r] * p.entries[r * c + yhat])
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ordered cut collection; exact duplicates (bitwise-equal vectors) are
/// rejected so the master LP never carries the same rows twice.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CutPool {
    entries: Vec<PoolEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoolEntry {
    pub cut: Cut,
    /// Outer iteration at which the cut was found.
    pub iteration: usize,
}

impl CutPool {
    pub fn new() -> Self {
        CutPool::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cuts(&self) -> impl Iterator<Item = &Cut> {
        self.entries.iter().map(|e| &e.cut)
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    /// Returns false and leaves the pool unchanged if an identical cut is
    /// already present.
    pub fn add(&mut self, cut: Cut, iteration: usize) -> bool {
        if self.entries.iter().any(|e| e.cut.vectors == cut.vectors) {
            return false;
        }
        self.entries.push(PoolEntry { cut, iteration });
        true
    }
}

/// Master solve output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MasterResult {
    pub value: f64,
    pub p: TransitionMatrix,
    pub lp_rows: usize,
    pub lp_vars: usize,
    pub lp_iterations: usize,
}

#[derive(Debug, Error)]
pub enum MasterError {
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("metric compilation failed: {0}")]
    Metrics(#[from] MetricsError),
    #[error("master program reported {status:?}, but constant classifiers are always feasible")]
    UnexpectedStatus { status: LpStatus },
}

/// Assemble the master LP: channel entries first, then C epigraph
/// variables per pooled cut.
pub fn build_master(
    jm: &JointModel,
    thresholds: &Thresholds,
    pool: &CutPool,
) -> Result<LinearProgram, MasterError> {
    let a = jm.num_groups;
    let c = jm.num_labels;
    let n_p = a * c * c;
    let n_vars = n_p + pool.len() * c;

    let mut objective = vec![0.0; n_vars];
    for r in 0..a * c {
        objective[r * c + r % c] = jm.mu[r];
    }
    let mut prog = LinearProgram::new(Sense::Maximize, objective);
    // Channel entries live in [0,1]; the upper bound is implied by the
    // row-sum equalities. Epigraph variables are bounded below by -1
    // since every piece functional is within [-1, 1].
    for t in 0..pool.len() * c {
        prog.set_bounds(n_p + t, -1.0, f64::INFINITY);
    }

    for constraint in metrics::simplex_constraints(a, c) {
        let mut coeffs = constraint.coeffs;
        coeffs.resize(n_vars, 0.0);
        prog.push_row(coeffs, Relation::Eq, constraint.rhs);
    }
    for constraint in metrics::fairness_constraints(&jm.mu, &jm.mu_group, thresholds)? {
        let mut coeffs = constraint.coeffs;
        coeffs.resize(n_vars, 0.0);
        let relation = match constraint.relation {
            metrics::ConstraintRelation::Le => Relation::Le,
            metrics::ConstraintRelation::Eq => Relation::Eq,
        };
        prog.push_row(coeffs, relation, constraint.rhs);
    }

    for (ci, entry) in pool.entries().iter().enumerate() {
        let t_base = n_p + ci * c;
        for yhat in 0..c {
            for piece in &entry.cut.vectors {
                // piece^T diag(mu) p_yhat - t_{ci,yhat} <= 0
                let mut coeffs = vec![0.0; n_vars];
                for r in 0..a * c {
                    coeffs[r * c + yhat] = piece[r] * jm.mu[r];
                }
                coeffs[t_base + yhat] = -1.0;
                prog.push_row(coeffs, Relation::Le, 0.0);
            }
        }
        let mut coeffs = vec![0.0; n_vars];
        for yhat in 0..c {
            coeffs[t_base + yhat] = 1.0;
        }
        prog.push_row(coeffs, Relation::Le, entry.cut.rhs);
    }
    Ok(prog)
}

/// Solve the master program. Infeasibility is flagged as an internal
/// error: for any nonnegative thresholds every constant classifier is
/// feasible, so a failed solve indicates a construction bug or numerical
/// collapse rather than a legitimate empty region.
pub fn solve_master(
    jm: &JointModel,
    thresholds: &Thresholds,
    pool: &CutPool,
) -> Result<MasterResult, MasterError> {
    let prog = build_master(jm, thresholds, pool)?;
    let n_p = jm.num_groups * jm.num_labels * jm.num_labels;
    let solution = lp::solve_lp(&prog)?;
    if solution.status != LpStatus::Optimal {
        return Err(MasterError::UnexpectedStatus {
            status: solution.status,
        });
    }
    let p = TransitionMatrix::new(jm.num_groups, jm.num_labels, solution.point[..n_p].to_vec())?;
    Ok(MasterResult {
        value: solution.objective,
        p,
        lp_rows: prog.rows.len(),
        lp_vars: prog.num_vars(),
        lp_iterations: solution.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::posterior_g;
    use crate::testkit::informative_model;

    #[test]
    fn cut_rhs_zero_and_simplex_normalization() {
        let jm = informative_model();
        let g = posterior_g(&jm);
        let zero = vec![vec![0.0; 4]];
        assert_eq!(cut_rhs(&zero, &g, &jm.px), 0.0);
        let ones = vec![vec![1.0; 4]];
        // Posterior rows are distributions, so the expectation of their
        // total mass is one.
        assert!((cut_rhs(&ones, &g, &jm.px) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cut_rhs_two_point_hand_value() {
        // D = 2 with px = (0.4, 0.6); pieces pick different maxima.
        let g = PosteriorTable {
            rows: vec![vec![0.7, 0.1, 0.1, 0.1], vec![0.1, 0.1, 0.1, 0.7]],
        };
        let px = vec![0.4, 0.6];
        let a1 = vec![1.0, 0.0, 0.0, -1.0];
        let a2 = vec![-1.0, 0.0, 0.0, 1.0];
        // x=0: max(0.7-0.1, 0.1-0.7) = 0.6; x=1: max(0.1-0.7, 0.7-0.1) = 0.6.
        let got = cut_rhs(&[a1, a2], &g, &px);
        assert!((got - 0.6).abs() < 1e-12);
    }

    #[test]
    fn zero_cut_never_violated() {
        let jm = informative_model();
        let p = TransitionMatrix::identity_pattern(2, 2);
        let cut = Cut::new(vec![vec![0.0; 4]], 0.0);
        assert_eq!(cut_violation(&p, &cut, &jm.mu), 0.0);
    }

    #[test]
    fn pool_rejects_exact_duplicates() {
        let mut pool = CutPool::new();
        let cut = Cut::new(vec![vec![0.5, -0.5, 0.25, 1.0]], 0.3);
        assert!(pool.add(cut.clone(), 1));
        assert!(!pool.add(cut.clone(), 2));
        let mut other = cut;
        other.vectors[0][0] += 1e-9;
        assert!(pool.add(other, 2));
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn empty_pool_unconstrained_master_reaches_one() {
        let jm = informative_model();
        let result = solve_master(&jm, &Thresholds::unconstrained(), &CutPool::new()).unwrap();
        assert!((result.value - 1.0).abs() < 1e-9);
        assert!(result.p.stochasticity_residual() < 1e-8);
        // Binary/binary: the uncut program has exactly the 8 channel
        // variables.
        assert_eq!(result.lp_vars, 8);
    }

    #[test]
    fn identity_channel_feasible_under_eo_zero() {
        let jm = informative_model();
        let th = Thresholds {
            sp: 1.0,
            eo: 0.0,
            oae: 1.0,
        };
        let result = solve_master(&jm, &th, &CutPool::new()).unwrap();
        // Identity rows agree across groups, so EO=0 still allows value 1.
        assert!((result.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_cut_adds_epigraph_variables_and_rows() {
        let jm = informative_model();
        let mut pool = CutPool::new();
        let g = posterior_g(&jm);
        let vectors = vec![vec![1.0, -1.0, 0.5, -0.5], vec![-1.0, 1.0, -0.5, 0.5]];
        let rhs = cut_rhs(&vectors, &g, &jm.px);
        pool.add(Cut::new(vectors, rhs), 1);
        let prog = build_master(&jm, &Thresholds::unconstrained(), &pool).unwrap();
        assert_eq!(prog.num_vars(), 8 + 2);
        // 4 simplex equalities + 2 pieces x 2 columns + 1 budget row.
        assert_eq!(prog.rows.len(), 4 + 4 + 1);
    }

    #[test]
    fn master_solution_respects_pooled_cuts() {
        let jm = informative_model();
        let g = posterior_g(&jm);
        let mut pool = CutPool::new();
        // The label-indicator cut certifies the Bayes bound.
        let mut vectors = Vec::new();
        for yhat in 0..2 {
            let mut v = vec![-1.0; 4];
            for s in 0..2 {
                v[s * 2 + yhat] = 1.0;
            }
            vectors.push(v);
        }
        let rhs = cut_rhs(&vectors, &g, &jm.px);
        pool.add(Cut::new(vectors, rhs), 1);
        let result = solve_master(&jm, &Thresholds::unconstrained(), &pool).unwrap();
        for cut in pool.cuts() {
            assert!(cut_violation(&result.p, cut, &jm.mu) <= 1e-8);
        }
        // The cut is active here, so the epigraph relaxation is tight.
        let channel = channel_side(&pool.cuts().next().unwrap().vectors, &result.p, &jm.mu);
        let rhs = pool.cuts().next().unwrap().rhs;
        assert!(channel <= rhs + 1e-8);
        assert!(result.value < 1.0 - 1e-6);
        assert!((metrics::accuracy(&jm.mu, &result.p).unwrap() - result.value).abs() < 1e-9);
    }

    #[test]
    fn master_value_stays_between_constant_classifier_and_one() {
        // A constant-row channel satisfies every valid cut, statistical
        // parity, and equalized odds at any threshold, so with accuracy
        // equality deactivated the best label marginal lower-bounds the
        // master value. (Not so under an active accuracy-equality
        // threshold: predicting the majority label yields per-group
        // accuracies Pr(Y=y*|S=s), which differ across groups; only the
        // uniform constant channel is feasible for all three metrics,
        // giving the weaker floor 1/C.)
        for seed in [1u64, 2, 3, 4, 5] {
            let jm = crate::testkit::random_model(seed, 4);
            let g = posterior_g(&jm);
            let best_label = jm
                .label_marginal()
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            let mut pool = CutPool::new();
            for i in 0..3 {
                let th = Thresholds {
                    sp: 0.1,
                    eo: 0.05,
                    oae: 1.0,
                };
                let result = solve_master(&jm, &th, &pool).unwrap();
                assert!(
                    result.value >= best_label - 1e-9 && result.value <= 1.0 + 1e-9,
                    "seed {seed}: value {} outside [{best_label}, 1]",
                    result.value
                );
                let tight = Thresholds {
                    sp: 0.1,
                    eo: 0.05,
                    oae: 0.1,
                };
                let constrained = solve_master(&jm, &tight, &pool).unwrap();
                assert!(constrained.value >= 0.5 - 1e-9 && constrained.value <= 1.0 + 1e-9);
                // Grow the pool with an arbitrary valid cut and recheck.
                let vectors = vec![
                    vec![1.0, -1.0, 0.5, -(i as f64) / 3.0],
                    vec![-0.5, 1.0, -1.0, 0.5],
                ];
                let rhs = cut_rhs(&vectors, &g, &jm.px);
                pool.add(Cut::new(vectors, rhs), i + 1);
            }
        }
    }

    #[test]
    fn epigraph_master_dominates_sampled_feasible_channels() {
        // The epigraph rows represent the sum-of-maxima constraint
        // exactly, so no channel satisfying the cut directly may beat
        // the LP optimum.
        let jm = informative_model();
        let g = posterior_g(&jm);
        let mut pool = CutPool::new();
        let vectors = vec![vec![1.0, -1.0, 1.0, -1.0], vec![-1.0, 1.0, -1.0, 1.0]];
        let rhs = cut_rhs(&vectors, &g, &jm.px);
        pool.add(Cut::new(vectors, rhs), 1);
        let th = Thresholds {
            sp: 1.0,
            eo: 0.2,
            oae: 1.0,
        };
        let result = solve_master(&jm, &th, &pool).unwrap();
        let cut = pool.cuts().next().unwrap();
        assert!(cut_violation(&result.p, cut, &jm.mu) <= 1e-8);

        let mut state = 0xabcdefu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        while checked < 300 {
            let mut entries = Vec::with_capacity(8);
            for _ in 0..4 {
                let u = next();
                entries.extend_from_slice(&[u, 1.0 - u]);
            }
            let p = TransitionMatrix::new(2, 2, entries).unwrap();
            let flat = p.entries.clone();
            let fair = metrics::all_satisfied(&metrics::eo_constraints(th.eo, 2, 2), &flat, 1e-12);
            if fair && cut_violation(&p, cut, &jm.mu) <= 0.0 {
                let acc = metrics::accuracy(&jm.mu, &p).unwrap();
                assert!(acc <= result.value + 1e-8);
                checked += 1;
            } else {
                checked += 1;
            }
        }
    }

    #[test]
    fn monotone_tightening_as_pool_grows() {
        let jm = informative_model();
        let g = posterior_g(&jm);
        let th = Thresholds {
            sp: 1.0,
            eo: 0.1,
            oae: 1.0,
        };
        let mut pool = CutPool::new();
        let mut last = solve_master(&jm, &th, &pool).unwrap().value;
        let candidates = [
            vec![vec![1.0, -1.0, 1.0, -1.0], vec![-1.0, 1.0, -1.0, 1.0]],
            vec![vec![1.0, 0.0, -1.0, 0.0], vec![0.0, 1.0, 0.0, -1.0]],
            vec![vec![1.0, 1.0, -1.0, -1.0], vec![-1.0, -1.0, 1.0, 1.0]],
        ];
        for (i, vectors) in candidates.into_iter().enumerate() {
            let rhs = cut_rhs(&vectors, &g, &jm.px);
            pool.add(Cut::new(vectors, rhs), i + 1);
            let value = solve_master(&jm, &th, &pool).unwrap().value;
            assert!(value <= last + 1e-9);
            last = value;
        }
    }

    #[test]
    fn random_feasible_channels_never_violate_valid_cuts() {
        // Channels factored through the feature variable are in the
        // feasible set, so any cut with an honestly computed rhs must
        // pass them.
        let jm = informative_model();
        let g = posterior_g(&jm);
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let vectors: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| next() * 2.0 - 1.0).collect())
                .collect();
            let cut = Cut::new(vectors.clone(), cut_rhs(&vectors, &g, &jm.px));
            for _ in 0..20 {
                // Random row-stochastic classifier M, channel = phi * M.
                let mut m = vec![[0.0f64; 2]; jm.support_size];
                for row in &mut m {
                    let u = next();
                    row[0] = u;
                    row[1] = 1.0 - u;
                }
                let mut entries = Vec::with_capacity(8);
                for row in &jm.phi {
                    for yhat in 0..2 {
                        let v: f64 = row.iter().zip(&m).map(|(&w, m_row)| w * m_row[yhat]).sum();
                        entries.push(v);
                    }
                }
                let p = TransitionMatrix::new(2, 2, entries).unwrap();
                assert!(cut_violation(&p, &cut, &jm.mu) <= 1e-9);
            }
        }
    }
}
