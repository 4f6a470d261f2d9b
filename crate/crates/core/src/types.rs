//! Rankings, examination curves, rank propensities and logged click records.
//!
//! Items are identified by `0..K` for a list of length `K`, and ranks are
//! 0-based with rank 0 the most visible position. Every type validates its
//! invariants on construction (including deserialization) and is immutable
//! afterwards.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

/// Row and column sums of a propensity matrix must be within this of 1.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// A display order over the items `0..K`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ranking {
    items: Vec<usize>,
    ranks: Vec<usize>,
}

impl Ranking {
    pub fn new(items: Vec<usize>) -> Result<Self> {
        let k = items.len();
        let mut ranks = vec![usize::MAX; k];
        for (rank, &item) in items.iter().enumerate() {
            if item >= k {
                return Err(data_err!(
                    "ranking of length {k} contains item {item}; items must be 0..{k}"
                ));
            }
            if ranks[item] != usize::MAX {
                return Err(data_err!("item {item} appears more than once in ranking"));
            }
            ranks[item] = rank;
        }
        Ok(Self { items, ranks })
    }

    /// The ranking `[0, 1, .., k-1]`.
    pub fn identity(k: usize) -> Self {
        Self {
            items: (0..k).collect(),
            ranks: (0..k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items in display order.
    pub fn items(&self) -> &[usize] {
        &self.items
    }

    /// Item shown at `rank`.
    pub fn item_at(&self, rank: usize) -> usize {
        self.items[rank]
    }

    /// Rank of `item`. Panics if `item` is not in `0..K`.
    pub fn rank_of(&self, item: usize) -> usize {
        self.ranks[item]
    }

    /// Per-item ranks, indexed by item id.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }
}

impl TryFrom<Vec<usize>> for Ranking {
    type Error = Error;

    fn try_from(items: Vec<usize>) -> Result<Self> {
        Ranking::new(items)
    }
}

impl From<Ranking> for Vec<usize> {
    fn from(r: Ranking) -> Self {
        r.items
    }
}

impl fmt::Debug for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ranking{:?}", self.items)
    }
}

/// Examination probability per rank, every entry in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PositionBiasCurve {
    probs: Vec<f64>,
}

impl PositionBiasCurve {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidCurve("curve has no entries".into()));
        }
        if let Some((rank, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p > 0.0 && **p <= 1.0))
        {
            return Err(Error::InvalidCurve(format!(
                "entry at rank {rank} is {p}; examination probabilities must lie in (0, 1]"
            )));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn at(&self, rank: usize) -> f64 {
        self.probs[rank]
    }
}

impl TryFrom<Vec<f64>> for PositionBiasCurve {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        PositionBiasCurve::new(probs)
    }
}

impl From<PositionBiasCurve> for Vec<f64> {
    fn from(c: PositionBiasCurve) -> Self {
        c.probs
    }
}

/// Probability that the logging policy displays each item at each rank.
///
/// Stored as a `K x K` row-major matrix with rows indexed by item and
/// columns by rank. The matrix is the marginal of a distribution over
/// permutations, so it must be doubly stochastic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RankPropensities {
    k: usize,
    data: Vec<f64>,
}

impl RankPropensities {
    /// Builds from a flat row-major `k x k` buffer.
    pub fn from_row_major(k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * k {
            return Err(data_err!(
                "propensity matrix has {} entries, expected {k}x{k}",
                data.len()
            ));
        }
        if let Some(bad) = data.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(data_err!("propensity {bad} outside [0, 1]"));
        }
        for item in 0..k {
            let s: f64 = data[item * k..(item + 1) * k].iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(data_err!("propensities of item {item} sum to {s}, not 1"));
            }
        }
        for rank in 0..k {
            let s: f64 = (0..k).map(|item| data[item * k + rank]).sum();
            if (s - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(data_err!("propensities at rank {rank} sum to {s}, not 1"));
            }
        }
        Ok(Self { k, data })
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// `P(rank(item | Y0) = rank)`.
    pub fn get(&self, item: usize, rank: usize) -> f64 {
        self.data[item * self.k + rank]
    }

    /// Rank distribution of one item.
    pub fn row(&self, item: usize) -> &[f64] {
        &self.data[item * self.k..(item + 1) * self.k]
    }
}

impl TryFrom<Vec<Vec<f64>>> for RankPropensities {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if let Some(row) = rows.iter().find(|r| r.len() != k) {
            return Err(data_err!(
                "propensity matrix is not square: row of length {} in {k} rows",
                row.len()
            ));
        }
        Self::from_row_major(k, rows.into_iter().flatten().collect())
    }
}

impl From<RankPropensities> for Vec<Vec<f64>> {
    fn from(p: RankPropensities) -> Self {
        p.data.chunks(p.k.max(1)).map(<[f64]>::to_vec).collect()
    }
}

/// One logged query: the ranking shown, which positions were clicked and,
/// optionally, the logging policy's rank propensities for that query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClickRecord")]
pub struct ClickRecord {
    pub query_id: String,
    pub ranking: Ranking,
    /// Click indicator per display position, aligned with `ranking`.
    clicks: Vec<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propensities: Option<Arc<RankPropensities>>,
}

impl ClickRecord {
    pub fn new(
        query_id: impl Into<String>,
        ranking: Ranking,
        clicks: Vec<u8>,
        propensities: Option<Arc<RankPropensities>>,
    ) -> Result<Self> {
        let query_id = query_id.into();
        if clicks.len() != ranking.len() {
            return Err(data_err!(
                "query {query_id}: {} clicks for a ranking of length {}",
                clicks.len(),
                ranking.len()
            ));
        }
        if let Some(c) = clicks.iter().find(|c| **c > 1) {
            return Err(data_err!(
                "query {query_id}: click indicator {c} is not 0 or 1"
            ));
        }
        if let Some(p) = &propensities {
            if p.len() != ranking.len() {
                return Err(data_err!(
                    "query {query_id}: {}x{0} propensity matrix for a ranking of length {}",
                    p.len(),
                    ranking.len()
                ));
            }
        }
        Ok(Self {
            query_id,
            ranking,
            clicks,
            propensities,
        })
    }

    pub fn clicks(&self) -> &[u8] {
        &self.clicks
    }

    /// `(item, logged rank)` for every clicked position.
    pub fn clicked(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.clicks
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == 1)
            .map(|(rank, _)| (self.ranking.item_at(rank), rank))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClickRecord {
    query_id: String,
    ranking: Ranking,
    clicks: Vec<u8>,
    #[serde(default)]
    propensities: Option<RankPropensities>,
}

impl TryFrom<RawClickRecord> for ClickRecord {
    type Error = Error;

    fn try_from(raw: RawClickRecord) -> Result<Self> {
        ClickRecord::new(
            raw.query_id,
            raw.ranking,
            raw.clicks,
            raw.propensities.map(Arc::new),
        )
    }
}
