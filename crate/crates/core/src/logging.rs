//! Randomized logging policy with a stay probability.
//!
//! Every item stays at its base rank with probability `q` and appears at each
//! other rank with probability `(1 - q) / (K - 1)`. Those marginals do not pin
//! down a joint distribution over permutations, so two samplers with the
//! same marginals are offered:
//!
//! * [`Sampler::IdentityOrUniform`] keeps the base ranking with probability
//!   `(qK - 1) / (K - 1)` and otherwise shows a uniformly random permutation.
//!   Requires `q >= 1/K`.
//! * [`Sampler::CyclicShift`] rotates the whole list by `s` positions, with
//!   `s = 0` drawn with probability `q`. Valid for any `q`.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::types::{RankPropensities, Ranking};

/// Largest list length for which [`SwapPolicy::joint_distribution`] will
/// enumerate permutations.
pub const MAX_ENUMERABLE_K: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    #[default]
    IdentityOrUniform,
    CyclicShift,
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity-or-uniform" => Ok(Sampler::IdentityOrUniform),
            "cyclic-shift" => Ok(Sampler::CyclicShift),
            other => Err(config_err!(
                "unknown sampler {other:?}; expected identity-or-uniform or cyclic-shift"
            )),
        }
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::IdentityOrUniform => "identity-or-uniform",
            Sampler::CyclicShift => "cyclic-shift",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapPolicy {
    base: Ranking,
    stay_prob: f64,
    sampler: Sampler,
    /// Probability of returning `base` untouched (identity-or-uniform only).
    keep_prob: f64,
}

impl SwapPolicy {
    pub fn new(base: Ranking, stay_prob: f64, sampler: Sampler) -> Result<Self> {
        let k = base.len();
        if k == 0 {
            return Err(config_err!("logging ranking is empty"));
        }
        if !(0.0..=1.0).contains(&stay_prob) {
            return Err(config_err!("stay_prob {stay_prob} outside [0, 1]"));
        }
        let keep_prob = if k == 1 {
            1.0
        } else {
            (stay_prob * k as f64 - 1.0) / (k - 1) as f64
        };
        if sampler == Sampler::IdentityOrUniform && keep_prob < -1e-12 {
            return Err(config_err!(
                "stay_prob {stay_prob} is below 1/K = {} required by the identity-or-uniform sampler",
                1.0 / k as f64
            ));
        }
        Ok(Self {
            base,
            stay_prob,
            sampler,
            keep_prob: keep_prob.clamp(0.0, 1.0),
        })
    }

    pub fn base(&self) -> &Ranking {
        &self.base
    }

    pub fn stay_prob(&self) -> f64 {
        self.stay_prob
    }

    pub fn sampler(&self) -> Sampler {
        self.sampler
    }

    pub fn k(&self) -> usize {
        self.base.len()
    }

    fn move_prob(&self) -> f64 {
        if self.k() == 1 {
            0.0
        } else {
            (1.0 - self.stay_prob) / (self.k() - 1) as f64
        }
    }

    /// Draws one logged ranking.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Ranking {
        let u: f64 = rng.random();
        match self.sampler {
            Sampler::IdentityOrUniform => {
                if u < self.keep_prob {
                    self.base.clone()
                } else {
                    let mut items = self.base.items().to_vec();
                    items.shuffle(rng);
                    Ranking::new(items).expect("shuffle preserves a permutation")
                }
            }
            Sampler::CyclicShift => {
                let shift = if u < self.stay_prob || self.k() == 1 {
                    0
                } else {
                    rng.random_range(1..self.k())
                };
                self.shifted(shift)
            }
        }
    }

    /// The base ranking with every item moved `shift` ranks down, wrapping.
    fn shifted(&self, shift: usize) -> Ranking {
        let mut items = self.base.items().to_vec();
        items.rotate_right(shift);
        Ranking::new(items).expect("rotation preserves a permutation")
    }

    /// Closed-form rank marginals; identical for both samplers.
    pub fn propensity_matrix(&self) -> RankPropensities {
        let k = self.k();
        let mut data = vec![self.move_prob(); k * k];
        for item in 0..k {
            data[item * k + self.base.rank_of(item)] = self.stay_prob;
        }
        RankPropensities::from_row_major(k, data)
            .expect("stay-probability marginals are doubly stochastic")
    }

    /// Every ranking the policy can show, with its probability.
    ///
    /// Outcomes are distinct; zero-probability outcomes are dropped.
    pub fn joint_distribution(&self) -> Result<Vec<(Ranking, f64)>> {
        let k = self.k();
        if k > MAX_ENUMERABLE_K {
            return Err(config_err!(
                "cannot enumerate permutations of {k} items (limit {MAX_ENUMERABLE_K})"
            ));
        }
        let mut out = match self.sampler {
            Sampler::CyclicShift => (0..k)
                .map(|s| {
                    let p = if s == 0 {
                        self.stay_prob
                    } else {
                        self.move_prob()
                    };
                    (self.shifted(s), p)
                })
                .collect::<Vec<_>>(),
            Sampler::IdentityOrUniform => {
                let each = (1.0 - self.keep_prob) / (1..=k).product::<usize>() as f64;
                self.base
                    .items()
                    .iter()
                    .copied()
                    .permutations(k)
                    .map(|items| {
                        let r = Ranking::new(items).expect("permutation");
                        let p = if r == self.base {
                            self.keep_prob + each
                        } else {
                            each
                        };
                        (r, p)
                    })
                    .collect()
            }
        };
        out.retain(|(_, p)| *p > 0.0);
        Ok(out)
    }
}
