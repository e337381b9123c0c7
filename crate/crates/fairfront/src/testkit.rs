//! Shared fixtures for unit tests.

use crate::dist::JointModel;

/// Joint model with hand-picked conditional rows and masses; marginals
/// are derived so the invariants hold.
pub(crate) fn hand_model(phi_rows: Vec<Vec<f64>>, mu: Vec<f64>, a: usize, c: usize) -> JointModel {
    let d = phi_rows[0].len();
    let px: Vec<f64> = (0..d)
        .map(|x| phi_rows.iter().zip(&mu).map(|(row, m)| m * row[x]).sum())
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
        phi: phi_rows,
        px,
        row_count: 0,
        cell_counts: vec![1; a * c],
        support_counts: vec![1; d],
    }
}

/// The informative 2x2 example used across module tests.
pub(crate) fn informative_model() -> JointModel {
    hand_model(
        vec![
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.2, 0.2, 0.6],
            vec![0.1, 0.3, 0.6],
        ],
        vec![0.3, 0.2, 0.3, 0.2],
        2,
        2,
    )
}

/// Features carrying no information: every conditional row identical.
pub(crate) fn independent_model() -> JointModel {
    hand_model(
        vec![
            vec![0.5, 0.3, 0.2],
            vec![0.5, 0.3, 0.2],
            vec![0.5, 0.3, 0.2],
            vec![0.5, 0.3, 0.2],
        ],
        vec![0.25; 4],
        2,
        2,
    )
}

/// Seeded random binary/binary instance with `d` support points.
pub(crate) fn random_model(seed: u64, d: usize) -> JointModel {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let raw_mu: Vec<f64> = (0..4).map(|_| 0.05 + next()).collect();
    let total: f64 = raw_mu.iter().sum();
    let mu: Vec<f64> = raw_mu.iter().map(|v| v / total).collect();
    let phi: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| 0.05 + next()).collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|v| v / sum).collect()
        })
        .collect();
    hand_model(phi, mu, 2, 2)
}
