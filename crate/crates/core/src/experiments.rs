//! Replicated Monte-Carlo evaluation of the interpolating estimator over a
//! grid of curve misspecification, logging randomization and window size.
//!
//! Replication `r` of every cell draws its dataset from seed
//! `base_seed + r`, so cells that share a stay probability see the same
//! datasets. The grid runner exploits this by simulating each
//! `(stay_prob, replication)` dataset once and scoring every
//! `(exponent, window)` pair on it. Work is spread with rayon, but results
//! are assembled by index and reduced in a fixed order, so the output does
//! not depend on the number of worker threads.
//!
//! Variances use the population `1/R` convention, so
//! `mse == bias^2 + variance` holds as an algebraic identity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clicks::{power_curve, Scenario, BENCH_EXPONENTS, BENCH_STAY_PROBS, TOY_QUERIES};
use crate::error::{config_err, Result};
use crate::estimator::{interpol_weight, ClickCounts, EstimatorConfig, WeightTable};
use crate::types::PositionBiasCurve;

pub const DEFAULT_REPLICATIONS: usize = 500;

/// Largest list length the exhaustive oracle accepts.
pub const ORACLE_MAX_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub exponents: Vec<f64>,
    pub stay_probs: Vec<f64>,
    pub windows: Vec<usize>,
    /// Queries per replication.
    pub n: usize,
    pub replications: usize,
    pub base_seed: u64,
}

impl ExperimentGrid {
    /// The full benchmark grid for a list of length `k`: every benchmark exponent
    /// and stay probability, windows `0..=k`.
    pub fn benchmark(k: usize, base_seed: u64) -> Self {
        Self {
            exponents: BENCH_EXPONENTS.to_vec(),
            stay_probs: BENCH_STAY_PROBS.to_vec(),
            windows: (0..=k).collect(),
            n: TOY_QUERIES,
            replications: DEFAULT_REPLICATIONS,
            base_seed,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.exponents.len() * self.stay_probs.len() * self.windows.len()
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.replications < 2 {
            return Err(config_err!(
                "replications must be at least 2, got {}",
                self.replications
            ));
        }
        if self.n == 0 {
            return Err(config_err!("queries per replication must be at least 1"));
        }
        if let Some(w) = self.windows.iter().find(|w| **w > k) {
            return Err(config_err!("window {w} exceeds list length {k}"));
        }
        if let Some(x) = self.exponents.iter().find(|x| x.is_nan() || **x <= 0.0) {
            return Err(config_err!("exponent must be positive, got {x}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub exponent: f64,
    pub stay_prob: f64,
    pub window: usize,
    pub n: usize,
    pub replications: usize,
    pub mean_estimate: f64,
    pub true_value: f64,
    pub bias: f64,
    /// Population variance of the replicated estimates.
    pub variance: f64,
    pub mse: f64,
}

impl CellResult {
    /// Summarizes replicated estimates against the known truth.
    pub fn from_estimates(
        exponent: f64,
        stay_prob: f64,
        window: usize,
        n: usize,
        estimates: &[f64],
        true_value: f64,
    ) -> Self {
        let r = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / r;
        let variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / r;
        let mse = estimates
            .iter()
            .map(|e| (e - true_value).powi(2))
            .sum::<f64>()
            / r;
        Self {
            exponent,
            stay_prob,
            window,
            n,
            replications: estimates.len(),
            mean_estimate: mean,
            true_value,
            bias: mean - true_value,
            variance,
            mse,
        }
    }

    /// Standard error of `mean_estimate`, from the unbiased sample variance.
    pub fn std_error(&self) -> f64 {
        (self.variance / (self.replications as f64 - 1.0)).sqrt()
    }

    /// `mean_estimate +- 1.96 * sd / sqrt(R)`.
    pub fn confidence_interval_95(&self) -> (f64, f64) {
        let half = 1.96 * (self.variance / self.replications as f64).sqrt();
        (self.mean_estimate - half, self.mean_estimate + half)
    }
}

/// Click totals of one simulated dataset.
pub fn simulate_counts(scenario: &Scenario, n: usize, seed: u64) -> ClickCounts {
    let mut counts = ClickCounts::new(scenario.k());
    let mut sim = scenario.simulator(seed);
    for _ in 0..n {
        let (ranking, clicks) = sim.next_query();
        counts.add(&ranking, &clicks);
    }
    counts
}

/// One cell: `R` replications of the interpolating estimator with the true
/// curve raised to `exponent`.
pub fn run_cell(
    scenario: &Scenario,
    exponent: f64,
    stay_prob: f64,
    window: usize,
    n: usize,
    replications: usize,
    base_seed: u64,
) -> Result<CellResult> {
    let grid = ExperimentGrid {
        exponents: vec![exponent],
        stay_probs: vec![stay_prob],
        windows: vec![window],
        n,
        replications,
        base_seed,
    };
    Ok(run_grid(scenario, &grid)?.remove(0))
}

/// Every `(exponent, stay_prob, window)` cell, exponent-major in grid order.
pub fn run_grid(scenario: &Scenario, grid: &ExperimentGrid) -> Result<Vec<CellResult>> {
    let k = scenario.k();
    grid.validate(k)?;
    let truth = scenario.true_value();
    let curves = grid
        .exponents
        .iter()
        .map(|&x| power_curve(scenario.user.true_curve(), x))
        .collect::<Result<Vec<_>>>()?;

    // One weight table per (stay_prob, exponent, window).
    let scenarios = grid
        .stay_probs
        .iter()
        .map(|&q| scenario.with_stay_prob(q))
        .collect::<Result<Vec<_>>>()?;
    let tables = scenarios
        .iter()
        .map(|s| {
            let props = s.logging.propensity_matrix();
            curves
                .iter()
                .flat_map(|c| grid.windows.iter().map(move |&w| (c, w)))
                .map(|(c, w)| {
                    WeightTable::new(
                        &s.target,
                        &EstimatorConfig::interpol(w, c.clone()),
                        Some(&props),
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|q| (0..grid.replications).map(move |r| (q, r)))
        .collect();
    // estimates[task][exponent * windows + window]
    let estimates = tasks
        .par_iter()
        .map(|&(q, rep)| {
            let counts = simulate_counts(
                &scenarios[q],
                grid.n,
                grid.base_seed.wrapping_add(rep as u64),
            );
            tables[q]
                .iter()
                .map(|t| t.apply(&counts))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let n_windows = grid.windows.len();
    let mut cells = Vec::with_capacity(grid.cell_count());
    for (xi, &exponent) in grid.exponents.iter().enumerate() {
        for (qi, &stay_prob) in grid.stay_probs.iter().enumerate() {
            let reps = &estimates[qi * grid.replications..(qi + 1) * grid.replications];
            for (wi, &window) in grid.windows.iter().enumerate() {
                let column: Vec<f64> = reps.iter().map(|e| e[xi * n_windows + wi]).collect();
                cells.push(CellResult::from_estimates(
                    exponent, stay_prob, window, grid.n, &column, truth,
                ));
            }
        }
    }
    Ok(cells)
}

/// Exact expected value of the interpolating estimator (per query) on a
/// small scenario.
///
/// Enumerates every ranking the logging policy can show and replaces each
/// click by its expectation `relevance * true_curve[logged rank]`, which is
/// exact because the estimator is linear in clicks and clicks are
/// independent across positions.
pub fn exhaustive_oracle(
    scenario: &Scenario,
    window: usize,
    estimator_curve: &PositionBiasCurve,
) -> Result<f64> {
    let k = scenario.k();
    if k > ORACLE_MAX_K {
        return Err(config_err!(
            "exhaustive oracle supports K <= {ORACLE_MAX_K}, scenario has K = {k}"
        ));
    }
    if estimator_curve.len() != k {
        return Err(config_err!(
            "estimator curve has {} entries for K = {k}",
            estimator_curve.len()
        ));
    }
    let props = scenario.logging.propensity_matrix();
    let mut expectation = 0.0;
    for (logged, prob) in scenario.logging.joint_distribution()? {
        let mut per_query = 0.0;
        for (logged_rank, &item) in logged.items().iter().enumerate() {
            let expected_click = scenario.user.click_prob(item, logged_rank);
            if expected_click == 0.0 {
                continue;
            }
            let w = interpol_weight(
                item,
                scenario.target.rank_of(item),
                logged_rank,
                window,
                estimator_curve,
                &props,
            )?;
            per_query += w * expected_click;
        }
        expectation += prob * per_query;
    }
    Ok(expectation)
}
