//! Position-based click simulation and the synthetic evaluation scenario.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, Result};
use crate::logging::{Sampler, SwapPolicy};
use crate::types::{ClickRecord, PositionBiasCurve, Ranking};

pub const TOY_K: usize = 10;
pub const TOY_CURVE: [f64; TOY_K] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
pub const TOY_RELEVANT: [usize; 4] = [1, 2, 4, 7];
/// Items 8 and 9 have no prescribed place and fill ranks 5-6 in ascending order.
pub const TOY_LOGGING_BASE: [usize; TOY_K] = [6, 0, 3, 1, 4, 8, 9, 7, 5, 2];
/// Items 5, 6, 8, 9 have no prescribed place and fill ranks 4-7 in ascending order.
pub const TOY_TARGET: [usize; TOY_K] = [7, 0, 3, 1, 5, 6, 8, 9, 2, 4];
pub const TOY_STAY_PROB: f64 = 0.95;
pub const TOY_QUERIES: usize = 5_000;

pub const BENCH_EXPONENTS: [f64; 9] = [0.2, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
pub const BENCH_STAY_PROBS: [f64; 8] = [0.5, 0.55, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];

pub fn toy_curve() -> PositionBiasCurve {
    PositionBiasCurve::new(TOY_CURVE.to_vec()).expect("toy curve is valid")
}

/// Click behaviour: `P(click on y at rank k) = relevance[y] * curve[k]`,
/// independently across positions.
#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    relevance: Vec<f64>,
    true_curve: PositionBiasCurve,
}

impl UserModel {
    pub fn new(relevance: Vec<f64>, true_curve: PositionBiasCurve) -> Result<Self> {
        if relevance.len() != true_curve.len() {
            return Err(config_err!(
                "{} relevance values for a curve of length {}",
                relevance.len(),
                true_curve.len()
            ));
        }
        if let Some(r) = relevance.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(config_err!("relevance {r} outside [0, 1]"));
        }
        Ok(Self {
            relevance,
            true_curve,
        })
    }

    /// Binary relevance: 1 for the listed items, 0 for the rest.
    pub fn binary(k: usize, relevant: &[usize], true_curve: PositionBiasCurve) -> Result<Self> {
        let mut relevance = vec![0.0; k];
        for &item in relevant {
            *relevance
                .get_mut(item)
                .ok_or_else(|| config_err!("relevant item {item} outside 0..{k}"))? = 1.0;
        }
        Self::new(relevance, true_curve)
    }

    pub fn relevance(&self) -> &[f64] {
        &self.relevance
    }

    pub fn true_curve(&self) -> &PositionBiasCurve {
        &self.true_curve
    }

    pub fn k(&self) -> usize {
        self.relevance.len()
    }

    /// Click probability of `item` shown at `rank`.
    pub fn click_prob(&self, item: usize, rank: usize) -> f64 {
        self.relevance[item] * self.true_curve.at(rank)
    }
}

/// Draws one click indicator per display position.
///
/// Consumes exactly one uniform draw per position, so the random stream
/// does not depend on relevance values.
pub fn simulate_clicks<R: Rng + ?Sized>(
    ranking: &Ranking,
    user: &UserModel,
    rng: &mut R,
) -> Vec<u8> {
    assert_eq!(
        ranking.len(),
        user.k(),
        "ranking and user model disagree on K"
    );
    ranking
        .items()
        .iter()
        .enumerate()
        .map(|(rank, &item)| {
            let u: f64 = rng.random();
            u8::from(u < user.click_prob(item, rank))
        })
        .collect()
}

/// Expected clicks per query when `target` is shown to `user`.
pub fn true_value(target: &Ranking, user: &UserModel) -> f64 {
    target
        .items()
        .iter()
        .enumerate()
        .map(|(rank, &item)| user.click_prob(item, rank))
        .sum()
}

/// Raises every curve entry to `exponent`.
pub fn power_curve(curve: &PositionBiasCurve, exponent: f64) -> Result<PositionBiasCurve> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(config_err!(
            "curve exponent must be positive, got {exponent}"
        ));
    }
    Ok(
        PositionBiasCurve::new(curve.probs().iter().map(|p| p.powf(exponent)).collect())
            .expect("positive powers of (0, 1] stay in (0, 1]"),
    )
}

/// A user, a logging policy and a target ranking over the same `K` items.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub user: UserModel,
    pub logging: SwapPolicy,
    pub target: Ranking,
}

impl Scenario {
    pub fn new(user: UserModel, logging: SwapPolicy, target: Ranking) -> Result<Self> {
        let k = user.k();
        if logging.k() != k || target.len() != k {
            return Err(config_err!(
                "scenario lengths disagree: user {k}, logging {}, target {}",
                logging.k(),
                target.len()
            ));
        }
        Ok(Self {
            user,
            logging,
            target,
        })
    }

    /// The ten-item benchmark: relevant items 1, 2, 4, 7 under a linear
    /// examination curve, with a target policy worth exactly 2 clicks.
    pub fn toy(stay_prob: f64, sampler: Sampler) -> Result<Self> {
        let user = UserModel::binary(TOY_K, &TOY_RELEVANT, toy_curve())?;
        let base = Ranking::new(TOY_LOGGING_BASE.to_vec())?;
        let logging = SwapPolicy::new(base, stay_prob, sampler)?;
        Self::new(user, logging, Ranking::new(TOY_TARGET.to_vec())?)
    }

    pub fn k(&self) -> usize {
        self.user.k()
    }

    /// Same scenario with a different logging stay probability.
    pub fn with_stay_prob(&self, stay_prob: f64) -> Result<Self> {
        let logging = SwapPolicy::new(
            self.logging.base().clone(),
            stay_prob,
            self.logging.sampler(),
        )?;
        Ok(Self {
            logging,
            ..self.clone()
        })
    }

    pub fn true_value(&self) -> f64 {
        true_value(&self.target, &self.user)
    }

    /// Streams queries from a seeded random source. Query `i` is named `q{i}`.
    pub fn simulator(&self, seed: u64) -> Simulator<'_> {
        Simulator {
            scenario: self,
            propensities: Arc::new(self.logging.propensity_matrix()),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 0,
        }
    }
}

pub struct Simulator<'a> {
    scenario: &'a Scenario,
    propensities: Arc<crate::types::RankPropensities>,
    rng: ChaCha8Rng,
    next: usize,
}

impl Simulator<'_> {
    /// Logged ranking and clicks of the next query.
    pub fn next_query(&mut self) -> (Ranking, Vec<u8>) {
        let ranking = self.scenario.logging.sample(&mut self.rng);
        let clicks = simulate_clicks(&ranking, &self.scenario.user, &mut self.rng);
        self.next += 1;
        (ranking, clicks)
    }
}

impl Iterator for Simulator<'_> {
    type Item = ClickRecord;

    fn next(&mut self) -> Option<ClickRecord> {
        let id = format!("q{}", self.next);
        let (ranking, clicks) = self.next_query();
        Some(
            ClickRecord::new(id, ranking, clicks, Some(self.propensities.clone()))
                .expect("simulated record is consistent"),
        )
    }
}

/// `n` logged queries with exact propensities attached.
pub fn generate_dataset(scenario: &Scenario, n: usize, seed: u64) -> Result<Vec<ClickRecord>> {
    if n == 0 {
        return Err(config_err!("dataset size n must be at least 1"));
    }
    Ok(scenario.simulator(seed).take(n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn toy_target_is_worth_two_clicks() {
        let s = Scenario::toy(0.95, Sampler::IdentityOrUniform).unwrap();
        assert_eq!(s.true_value(), 2.0);
    }

    #[test]
    fn logging_base_value() {
        let s = Scenario::toy(0.95, Sampler::IdentityOrUniform).unwrap();
        // relevant items 1, 4, 7, 2 sit at ranks 3, 4, 7, 9
        assert_relative_eq!(
            true_value(s.logging.base(), &s.user),
            0.7 + 0.6 + 0.3 + 0.1,
            max_relative = 1e-15
        );
    }

    #[test]
    fn zero_relevance_is_worth_nothing() {
        let user = UserModel::new(vec![0.0; 10], toy_curve()).unwrap();
        assert_eq!(true_value(&Ranking::identity(10), &user), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(simulate_clicks(&Ranking::identity(10), &user, &mut rng)
                .iter()
                .all(|c| *c == 0));
        }
    }

    #[test]
    fn fully_relevant_top_item_always_clicks() {
        let user = UserModel::binary(10, &[4], toy_curve()).unwrap();
        let r = Ranking::new(vec![4, 0, 1, 2, 3, 5, 6, 7, 8, 9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            assert_eq!(simulate_clicks(&r, &user, &mut rng)[0], 1);
        }
    }

    #[test]
    fn power_curve_examples() {
        let p = toy_curve();
        assert_eq!(power_curve(&p, 1.0).unwrap(), p);
        let sq = power_curve(&p, 2.0).unwrap();
        let expect = [1.0, 0.81, 0.64, 0.49, 0.36, 0.25, 0.16, 0.09, 0.04, 0.01];
        for (a, b) in sq.probs().iter().zip(expect) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
        let flat = power_curve(&p, 0.2).unwrap();
        assert_relative_eq!(flat.at(9), 0.6309573444801932, max_relative = 1e-14);
        assert!(power_curve(&p, 0.0).is_err());
        assert!(power_curve(&p, -1.0).is_err());
    }

    #[test]
    fn user_model_validation() {
        assert!(UserModel::new(
            vec![0.5, 1.2],
            PositionBiasCurve::new(vec![1.0, 0.5]).unwrap()
        )
        .is_err());
        assert!(
            UserModel::new(vec![0.5], PositionBiasCurve::new(vec![1.0, 0.5]).unwrap()).is_err()
        );
        assert!(UserModel::binary(3, &[3], PositionBiasCurve::new(vec![1.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn single_deterministic_query_shows_base() {
        let s = Scenario::toy(1.0, Sampler::IdentityOrUniform).unwrap();
        let d = generate_dataset(&s, 1, 7).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].ranking.items(), &TOY_LOGGING_BASE);
        assert_eq!(d[0].query_id, "q0");
        assert!(generate_dataset(&s, 0, 7).is_err());
    }

    #[test]
    fn same_seed_same_dataset() {
        let s = Scenario::toy(0.8, Sampler::IdentityOrUniform).unwrap();
        let a = generate_dataset(&s, 200, 11).unwrap();
        let b = generate_dataset(&s, 200, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(&s, 200, 12).unwrap());
    }

    #[test]
    fn scenario_lengths_must_agree() {
        let s = Scenario::toy(0.9, Sampler::CyclicShift).unwrap();
        assert!(Scenario::new(s.user.clone(), s.logging.clone(), Ranking::identity(9)).is_err());
    }
}
