//! Shared helpers for the integration suites: seeded instance
//! generators, a synthetic dataset writer, and an LP vertex-enumeration
//! oracle kept independent of the solver under test.

#![allow(dead_code)]

use fairfront::dist::JointModel;
use fairfront::lp::{check_feasible, LinearProgram, Relation, Sense};

pub fn binary_path() -> &'static str {
    env!("CARGO_BIN_EXE_fairfront")
}

/// xorshift64* stream; self-contained so the suites do not share RNG
/// machinery with the crate under test.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9e3779b97f4a7c15) | 1)
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_f64() * n as f64) as usize % n
    }
}

/// Hand-assembled joint model with consistent marginals.
pub fn model_from_parts(phi: Vec<Vec<f64>>, mu: Vec<f64>, a: usize, c: usize) -> JointModel {
    let d = phi[0].len();
    let px: Vec<f64> = (0..d)
        .map(|x| phi.iter().zip(&mu).map(|(row, m)| m * row[x]).sum())
        .collect();
    let mut mu_group = vec![0.0; a];
    for s in 0..a {
        for y in 0..c {
            mu_group[s] += mu[s * c + y];
        }
    }
    JointModel {
        format_version: 1,
        num_groups: a,
        num_labels: c,
        support_size: d,
        groups: (0..a).map(|s| format!("g{s}")).collect(),
        labels: (0..c).map(|y| format!("l{y}")).collect(),
        feature_names: vec!["x".into()],
        support: (0..d).map(|x| vec![x]).collect(),
        mu,
        mu_group,
        phi,
        px,
        row_count: 0,
        cell_counts: vec![1; a * c],
        support_counts: vec![1; d],
    }
}

/// Random binary-group, binary-label instance with `d` support points.
pub fn random_instance(seed: u64, d: usize) -> JointModel {
    let mut rng = TestRng::new(seed);
    let raw: Vec<f64> = (0..4).map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = raw.iter().sum();
    let mu: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let phi: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let row: Vec<f64> = (0..d).map(|_| 0.05 + rng.next_f64()).collect();
            let sum: f64 = row.iter().sum();
            row.iter().map(|v| v / sum).collect()
        })
        .collect();
    model_from_parts(phi, mu, 2, 2)
}

/// Instance whose features carry no information: identical conditional
/// rows, random label skew.
pub fn independent_instance(seed: u64, d: usize) -> JointModel {
    let mut rng = TestRng::new(seed);
    let row: Vec<f64> = {
        let raw: Vec<f64> = (0..d).map(|_| 0.05 + rng.next_f64()).collect();
        let sum: f64 = raw.iter().sum();
        raw.iter().map(|v| v / sum).collect()
    };
    let raw_mu: Vec<f64> = (0..4).map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = raw_mu.iter().sum();
    let mu: Vec<f64> = raw_mu.iter().map(|v| v / total).collect();
    model_from_parts(vec![row; 4], mu, 2, 2)
}

/// Two-group synthetic CSV with informative binary features: each
/// feature equals the label with probability `signal`, and the label is
/// biased so mode imputation stays stable. Returns the file contents.
pub fn synthetic_csv(rows: usize, seed: u64, signal: f64) -> String {
    let mut rng = TestRng::new(seed);
    let mut out = String::from("grp,outcome,f1,f2\n");
    for _ in 0..rows {
        let s = if rng.next_f64() < 0.5 { "a" } else { "b" };
        let y = rng.next_f64() < 0.6;
        let feature = |rng: &mut TestRng| {
            let faithful = rng.next_f64() < signal;
            let shown = if faithful { y } else { !y };
            if shown {
                "1"
            } else {
                "0"
            }
        };
        let f1 = feature(&mut rng);
        let f2 = feature(&mut rng);
        out.push_str(&format!(
            "{s},{},{f1},{f2}\n",
            if y { "pos" } else { "neg" }
        ));
    }
    out
}

pub const SYNTHETIC_SCHEMA: &str = r#"{
  "group_column": "grp",
  "label_column": "outcome",
  "features": [{"name": "f1"}, {"name": "f2"}],
  "missing_token": ""
}"#;

/// Random bounded LP over at most six variables; always has finite box
/// bounds, so a nonempty feasible region has an optimal vertex.
pub fn random_bounded_lp(seed: u64) -> LinearProgram {
    let mut rng = TestRng::new(seed ^ 0x5bd1e995);
    let n = 2 + rng.below(5); // 2..=6
    let m = 1 + rng.below(6);
    let objective: Vec<f64> = (0..n).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    for j in 0..n {
        lp.set_bounds(j, 0.0, 0.4 + rng.next_f64() * 2.4);
    }
    for _ in 0..m {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
        let rhs = rng.next_f64() * 3.0 - 0.5;
        lp.push_row(coeffs, Relation::Le, rhs);
    }
    lp
}

fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, pivot);
        let pivot_row: Vec<f64> = m[col][col..=n].to_vec();
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for (c, &v) in (col..=n).zip(&pivot_row) {
                        m[r][c] -= f * v;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Independent LP reference: enumerate all n-subsets of candidate active
/// planes (constraint boundaries plus bound faces), solve each square
/// system, and keep the best feasible vertex value. `None` means no
/// feasible vertex, i.e. infeasible for a bounded program.
pub fn best_vertex_value(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        planes.push((row.coeffs.clone(), row.rhs));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lo));
        planes.push((e, hi));
    }
    let k = planes.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut best: Option<f64> = None;
    loop {
        let a: Vec<Vec<f64>> = indices.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = indices.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(&a, &b) {
            if let Ok((true, _)) = check_feasible(lp, &x, 1e-7) {
                let value: f64 = x.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
                let better = match (lp.sense, best) {
                    (_, None) => true,
                    (Sense::Maximize, Some(b)) => value > b,
                    (Sense::Minimize, Some(b)) => value < b,
                };
                if better {
                    best = Some(value);
                }
            }
        }
        // Next lexicographic combination of size n from 0..k.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if indices[i] != i + k - n {
                indices[i] += 1;
                for j in i + 1..n {
                    indices[j] = indices[j - 1] + 1;
                }
                break;
            }
        }
    }
}
