//! Importance weights for the position-based (PBM), item-position (IPM) and
//! interpolating estimators, and the generic IPS point estimate
//!
//! ```text
//! estimate = 1/n * sum_i sum_{y in Y0_i} w(y) * c(y | Y0_i)
//! ```
//!
//! The interpolating weight accepts a logged rank that lies at most `T`
//! positions from the target rank, divides by the probability of that window
//! event under the logging policy, and corrects the remaining displacement
//! with the PBM visibility ratio. `T = 0` is exactly the IPM weight and a
//! window covering the whole list is exactly the PBM weight.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, data_err, Error, Result};
use crate::types::{ClickRecord, PositionBiasCurve, RankPropensities, Ranking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pbm,
    Ipm,
    Interpol,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbm" => Ok(Family::Pbm),
            "ipm" => Ok(Family::Ipm),
            "interpol" => Ok(Family::Interpol),
            other => Err(config_err!(
                "unknown estimator family {other:?}; expected pbm, ipm or interpol"
            )),
        }
    }
}

/// Which weight to apply. `window` is only read by [`Family::Interpol`] and
/// `curve` is unused by [`Family::Ipm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub family: Family,
    pub window: usize,
    pub curve: Option<PositionBiasCurve>,
}

impl EstimatorConfig {
    pub fn pbm(curve: PositionBiasCurve) -> Self {
        Self {
            family: Family::Pbm,
            window: 0,
            curve: Some(curve),
        }
    }

    pub fn ipm() -> Self {
        Self {
            family: Family::Ipm,
            window: 0,
            curve: None,
        }
    }

    pub fn interpol(window: usize, curve: PositionBiasCurve) -> Self {
        Self {
            family: Family::Interpol,
            window,
            curve: Some(curve),
        }
    }

    /// Checks the config against a list length and whether propensities are
    /// available.
    fn validate(&self, k: usize, has_propensities: bool) -> Result<()> {
        if self.family != Family::Ipm {
            match &self.curve {
                None => return Err(config_err!("{:?} estimator requires a curve", self.family)),
                Some(c) if c.len() != k => {
                    return Err(config_err!(
                        "curve has {} entries but rankings have length {k}",
                        c.len()
                    ))
                }
                _ => {}
            }
        }
        if self.family == Family::Interpol && self.window > k {
            return Err(config_err!(
                "window {} exceeds list length {k}",
                self.window
            ));
        }
        if self.family != Family::Pbm && !has_propensities {
            return Err(config_err!(
                "{:?} estimator requires logging propensities",
                self.family
            ));
        }
        Ok(())
    }

    /// Weight of one click on `item`, displayed at `logged_rank` and placed
    /// at `target_rank` by the target policy.
    pub fn weight(
        &self,
        item: usize,
        target_rank: usize,
        logged_rank: usize,
        propensities: Option<&RankPropensities>,
    ) -> Result<f64> {
        let need_props = || {
            propensities.ok_or_else(|| {
                config_err!("{:?} estimator requires logging propensities", self.family)
            })
        };
        let need_curve = || {
            self.curve
                .as_ref()
                .ok_or_else(|| config_err!("{:?} estimator requires a curve", self.family))
        };
        match self.family {
            Family::Pbm => pbm_weight(target_rank, logged_rank, need_curve()?),
            Family::Ipm => ip_weight(item, target_rank, logged_rank, need_props()?),
            Family::Interpol => interpol_weight(
                item,
                target_rank,
                logged_rank,
                self.window,
                need_curve()?,
                need_props()?,
            ),
        }
    }
}

fn check_rank(rank: usize, k: usize, what: &str) -> Result<()> {
    if rank >= k {
        return Err(Error::InputDomain(format!(
            "{what} {rank} outside list of length {k}"
        )));
    }
    Ok(())
}

/// Visibility ratio `curve[target_rank] / curve[logged_rank]`.
pub fn pbm_weight(
    target_rank: usize,
    logged_rank: usize,
    curve: &PositionBiasCurve,
) -> Result<f64> {
    check_rank(target_rank, curve.len(), "target rank")?;
    check_rank(logged_rank, curve.len(), "logged rank")?;
    Ok(curve.at(target_rank) / curve.at(logged_rank))
}

/// `1 / P(rank(item|Y0) = target_rank)` when the ranks agree, else 0.
pub fn ip_weight(
    item: usize,
    target_rank: usize,
    logged_rank: usize,
    propensities: &RankPropensities,
) -> Result<f64> {
    let k = propensities.len();
    check_rank(item, k, "item")?;
    check_rank(target_rank, k, "target rank")?;
    check_rank(logged_rank, k, "logged rank")?;
    if logged_rank != target_rank {
        return Ok(0.0);
    }
    let p = propensities.get(item, target_rank);
    if p <= 0.0 {
        return Err(Error::SupportViolation(format!(
            "item {item} has zero propensity at rank {target_rank}"
        )));
    }
    Ok(1.0 / p)
}

/// Ranks `j` with `|j - target_rank| <= window`, clipped to the list.
pub fn window_ranks(
    target_rank: usize,
    window: usize,
    k: usize,
) -> std::ops::RangeInclusive<usize> {
    target_rank.saturating_sub(window)..=target_rank.saturating_add(window).min(k - 1)
}

/// Probability under the logging policy that `item` lands within `window`
/// ranks of `target_rank`. Exactly 1 when the window spans the whole list.
pub fn window_probability(
    item: usize,
    target_rank: usize,
    window: usize,
    propensities: &RankPropensities,
) -> Result<f64> {
    let k = propensities.len();
    check_rank(item, k, "item")?;
    check_rank(target_rank, k, "target rank")?;
    let ranks = window_ranks(target_rank, window, k);
    // Rows are validated to sum to one; returning the literal keeps the
    // full-window weight bit-identical to the PBM weight.
    if *ranks.start() == 0 && *ranks.end() == k - 1 {
        return Ok(1.0);
    }
    let row = propensities.row(item);
    let p: f64 = row[ranks].iter().sum();
    if p <= 0.0 {
        return Err(Error::SupportViolation(format!(
            "item {item} has zero probability of landing within {window} of rank {target_rank}"
        )));
    }
    Ok(p)
}

pub fn interpol_weight(
    item: usize,
    target_rank: usize,
    logged_rank: usize,
    window: usize,
    curve: &PositionBiasCurve,
    propensities: &RankPropensities,
) -> Result<f64> {
    check_rank(logged_rank, propensities.len(), "logged rank")?;
    if curve.len() != propensities.len() {
        return Err(Error::InputDomain(format!(
            "curve length {} does not match propensity matrix size {}",
            curve.len(),
            propensities.len()
        )));
    }
    if logged_rank.abs_diff(target_rank) > window {
        // still validate the ranks so out-of-range input is reported
        check_rank(target_rank, propensities.len(), "target rank")?;
        check_rank(item, propensities.len(), "item")?;
        return Ok(0.0);
    }
    let in_window = window_probability(item, target_rank, window, propensities)?;
    Ok((1.0 / in_window) * pbm_weight(target_rank, logged_rank, curve)?)
}

/// A deterministic target policy: one ranking per query.
pub trait TargetPolicy {
    fn ranking_for(&self, query_id: &str) -> Option<&Ranking>;
}

/// Shows the same ranking for every query.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedTarget(pub Ranking);

impl TargetPolicy for FixedTarget {
    fn ranking_for(&self, _query_id: &str) -> Option<&Ranking> {
        Some(&self.0)
    }
}

impl TargetPolicy for HashMap<String, Ranking> {
    fn ranking_for(&self, query_id: &str) -> Option<&Ranking> {
        self.get(query_id)
    }
}

impl TargetPolicy for BTreeMap<String, Ranking> {
    fn ranking_for(&self, query_id: &str) -> Option<&Ranking> {
        self.get(query_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Estimated expected clicks per query under the target policy.
    pub point_estimate: f64,
    /// Sample standard deviation of the per-query sums over `sqrt(n)`; 0 when `n = 1`.
    pub std_error: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_query_sums: Option<Vec<f64>>,
}

impl EstimateReport {
    /// Normal-approximation confidence interval at the given z-score.
    pub fn confidence_interval(&self, z: f64) -> (f64, f64) {
        (
            self.point_estimate - z * self.std_error,
            self.point_estimate + z * self.std_error,
        )
    }

    fn from_sums(sums: Vec<f64>, keep: bool) -> Self {
        let n = sums.len();
        let mean = sums.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = sums.iter().map(|s| (s - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            point_estimate: mean,
            std_error,
            n,
            per_query_sums: keep.then_some(sums),
        }
    }
}

/// Per-query weighted click sum. Unclicked items contribute nothing and are
/// skipped.
pub fn query_sum(record: &ClickRecord, target: &Ranking, config: &EstimatorConfig) -> Result<f64> {
    if target.len() != record.ranking.len() {
        return Err(data_err!(
            "query {}: target ranking has {} items, logged ranking {}",
            record.query_id,
            target.len(),
            record.ranking.len()
        ));
    }
    let props = record.propensities.as_deref();
    record.clicked().try_fold(0.0, |acc, (item, logged_rank)| {
        Ok(acc + config.weight(item, target.rank_of(item), logged_rank, props)?)
    })
}

/// IPS estimate of the target policy's expected clicks per query.
pub fn estimate(
    records: &[ClickRecord],
    target: &impl TargetPolicy,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    estimate_with(records, target, config, false)
}

/// Like [`estimate`], keeping every per-query sum in the report.
pub fn estimate_per_query(
    records: &[ClickRecord],
    target: &impl TargetPolicy,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    estimate_with(records, target, config, true)
}

fn estimate_with(
    records: &[ClickRecord],
    target: &impl TargetPolicy,
    config: &EstimatorConfig,
    keep_sums: bool,
) -> Result<EstimateReport> {
    if records.is_empty() {
        return Err(data_err!("no records to evaluate"));
    }
    let sums = records
        .iter()
        .map(|rec| {
            config.validate(rec.ranking.len(), rec.propensities.is_some())?;
            let ranking = target.ranking_for(&rec.query_id).ok_or_else(|| {
                data_err!("target policy has no ranking for query {}", rec.query_id)
            })?;
            query_sum(rec, ranking, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport::from_sums(sums, keep_sums))
}

/// Weights for every `(item, logged rank)` pair under one target ranking and
/// one set of propensities.
///
/// Entries whose denominator is zero are kept as `None` and only raise a
/// support violation if a click actually lands on them.
#[derive(Debug, Clone)]
pub struct WeightTable {
    k: usize,
    weights: Vec<Option<f64>>,
}

impl WeightTable {
    pub fn new(
        target: &Ranking,
        config: &EstimatorConfig,
        propensities: Option<&RankPropensities>,
    ) -> Result<Self> {
        let k = target.len();
        config.validate(k, propensities.is_some())?;
        let mut weights = Vec::with_capacity(k * k);
        for item in 0..k {
            for logged_rank in 0..k {
                match config.weight(item, target.rank_of(item), logged_rank, propensities) {
                    Ok(w) => weights.push(Some(w)),
                    Err(Error::SupportViolation(_)) => weights.push(None),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(Self { k, weights })
    }

    pub fn get(&self, item: usize, logged_rank: usize) -> Result<f64> {
        self.weights[item * self.k + logged_rank].ok_or_else(|| {
            Error::SupportViolation(format!(
                "click on item {item} at rank {logged_rank} has an undefined weight"
            ))
        })
    }

    /// Estimate from aggregated click counts.
    pub fn apply(&self, counts: &ClickCounts) -> Result<f64> {
        assert_eq!(self.k, counts.k, "weight table and counts disagree on K");
        let mut total = 0.0;
        for (idx, &c) in counts.counts.iter().enumerate() {
            if c > 0 {
                total += c as f64 * self.get(idx / self.k, idx % self.k)?;
            }
        }
        Ok(total / counts.queries as f64)
    }
}

/// Click totals per `(item, logged rank)`.
///
/// When every query shares one target ranking and one propensity matrix,
/// this is a sufficient statistic for the point estimate of every weight
/// family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickCounts {
    k: usize,
    counts: Vec<u64>,
    queries: u64,
}

impl ClickCounts {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
            queries: 0,
        }
    }

    pub fn add(&mut self, ranking: &Ranking, clicks: &[u8]) {
        debug_assert_eq!(ranking.len(), self.k);
        for (rank, &c) in clicks.iter().enumerate() {
            self.counts[ranking.item_at(rank) * self.k + rank] += u64::from(c);
        }
        self.queries += 1;
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn get(&self, item: usize, logged_rank: usize) -> u64 {
        self.counts[item * self.k + logged_rank]
    }

    pub fn total_clicks(&self) -> u64 {
        self.counts.iter().sum()
    }
}
