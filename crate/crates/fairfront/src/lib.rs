//! Tools for computing the fairness Pareto frontier of a finite data
//! distribution: the best classification accuracy achievable under group
//! fairness constraints (statistical parity, equalized odds, overall
//! accuracy equality).
//!
//! The crate estimates a joint distribution over (group, label, features)
//! from tabular data, then bounds the frontier from above with a cutting
//! plane loop: a master linear program over the prediction channel
//! P(predicted | group, label) alternates with a multi-start
//! convex-concave search for the most violated informativeness cut. For
//! discrete feature supports an exact single-LP oracle computes the true
//! frontier together with an achieving randomized classifier, which the
//! test suites use as ground truth.
//!
//! Modules mirror the pipeline: [`dist`] (data ingestion and estimation),
//! [`metrics`] (fairness constraint compilation), [`lp`] (dense simplex
//! solver), [`master`] (master program and cut pool), [`cutgen`] (cut
//! search), [`frontier`] (outer loop and threshold sweeps), [`oracle`]
//! (exact frontier and brute-force references), and [`run`] (experiment
//! harness shared with the CLI).

pub mod cutgen;
pub mod dist;
pub mod frontier;
pub mod lp;
pub mod master;
pub mod metrics;
pub mod oracle;
pub mod run;
#[cfg(test)]
pub(crate) mod testkit;
