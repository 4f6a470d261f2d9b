//! Run configuration, read from TOML.
//!
//! Every key is optional. An empty document describes the ten-item benchmark
//! with the full default grid. For `k != 10` the scenario vectors
//! (`relevance`, `true_curve`, `logging_ranking`, `target_ranking`) must be
//! given explicitly.
//!
//! ```toml
//! mode = "grid"
//! seed = 7
//!
//! [scenario]
//! stay_prob = 0.95
//! sampler = "identity-or-uniform"
//!
//! [estimator]
//! family = "interpol"
//! window = 3
//! exponent = 1.8
//!
//! [grid]
//! windows = [0, 5, 10]
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::clicks::{
    power_curve, Scenario, UserModel, BENCH_EXPONENTS, BENCH_STAY_PROBS, TOY_CURVE, TOY_K,
    TOY_LOGGING_BASE, TOY_QUERIES, TOY_RELEVANT, TOY_STAY_PROB, TOY_TARGET,
};
use crate::error::{config_err, Error, Result};
use crate::estimator::{EstimatorConfig, Family};
use crate::experiments::{ExperimentGrid, DEFAULT_REPLICATIONS};
use crate::logging::{Sampler, SwapPolicy};
use crate::types::{PositionBiasCurve, Ranking};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Evaluate,
    #[default]
    Grid,
    Oracle,
    Plot,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub scenario: ScenarioConfig,
    pub estimator: EstimatorSection,
    pub grid: GridSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub k: usize,
    pub stay_prob: f64,
    /// Queries per dataset.
    pub n: usize,
    pub sampler: Sampler,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relevance: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_curve: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logging_ranking: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_ranking: Option<Vec<usize>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            k: TOY_K,
            stay_prob: TOY_STAY_PROB,
            n: TOY_QUERIES,
            sampler: Sampler::default(),
            relevance: None,
            true_curve: None,
            logging_ranking: None,
            target_ranking: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub family: Family,
    pub window: i64,
    /// Misspecification power applied to the true curve when `curve` is absent.
    pub exponent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<f64>>,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            family: Family::Interpol,
            window: 0,
            exponent: 1.0,
            curve: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub exponents: Vec<f64>,
    pub stay_probs: Vec<f64>,
    /// Defaults to `0..=k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<i64>>,
    pub replications: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            exponents: BENCH_EXPONENTS.to_vec(),
            stay_probs: BENCH_STAY_PROBS.to_vec(),
            windows: None,
            replications: DEFAULT_REPLICATIONS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
}

/// Parses and validates a TOML document, filling every default.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    cfg.finalize()?;
    Ok(cfg)
}

fn check_stay_prob(key: &str, q: f64, k: usize, sampler: Sampler) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(config_err!("{key}: stay probability {q} outside [0, 1]"));
    }
    if sampler == Sampler::IdentityOrUniform && q * (k as f64) < 1.0 - 1e-12 {
        return Err(config_err!(
            "{key}: stay probability {q} must satisfy q >= 1/K = {} for the {sampler} sampler",
            1.0 / k as f64
        ));
    }
    Ok(())
}

fn check_window(key: &str, w: i64, k: usize) -> Result<usize> {
    if w < 0 {
        return Err(config_err!("{key}: window {w} must be non-negative"));
    }
    if w as u64 > k as u64 {
        return Err(config_err!("{key}: window {w} exceeds list length {k}"));
    }
    Ok(w as usize)
}

fn check_exponent(key: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(config_err!("{key}: exponent {x} must be positive"));
    }
    Ok(())
}

fn keyed<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| config_err!("{key}: {e}"))
}

impl RunConfig {
    /// Fills derived defaults and validates every field. Idempotent.
    pub fn finalize(&mut self) -> Result<()> {
        let s = &self.scenario;
        let k = s.k;
        if k == 0 {
            return Err(config_err!("scenario.k: list length must be at least 1"));
        }
        if s.n == 0 {
            return Err(config_err!("scenario.n: query count must be at least 1"));
        }
        check_stay_prob("scenario.stay_prob", s.stay_prob, k, s.sampler)?;
        check_window("estimator.window", self.estimator.window, k)?;
        check_exponent("estimator.exponent", self.estimator.exponent)?;
        for &x in &self.grid.exponents {
            check_exponent("grid.exponents", x)?;
        }
        for &q in &self.grid.stay_probs {
            check_stay_prob("grid.stay_probs", q, k, s.sampler)?;
        }
        let windows = self
            .grid
            .windows
            .get_or_insert_with(|| (0..=k as i64).collect());
        for &w in windows.iter() {
            check_window("grid.windows", w, k)?;
        }
        if self.grid.replications < 2 {
            return Err(config_err!(
                "grid.replications: need at least 2 replications, got {}",
                self.grid.replications
            ));
        }
        if self.workers == Some(0) {
            return Err(config_err!("workers: must be at least 1"));
        }
        self.scenario()?;
        self.estimator_config()?;
        Ok(())
    }

    /// Serializes back to TOML; `parse_config` of the output yields `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let s = &self.scenario;
        let k = s.k;
        let toy = k == TOY_K;
        fn pick<T: Clone>(
            given: &Option<Vec<T>>,
            toy: Option<Vec<T>>,
            key: &str,
            k: usize,
        ) -> Result<Vec<T>> {
            given.clone().or(toy).ok_or_else(|| {
                config_err!("{key}: required when scenario.k = {k} (only k = 10 has defaults)")
            })
        }
        let toy_relevance = toy.then(|| {
            let mut r = vec![0.0; TOY_K];
            TOY_RELEVANT.iter().for_each(|&i| r[i] = 1.0);
            r
        });
        let relevance = pick(&s.relevance, toy_relevance, "scenario.relevance", k)?;
        let curve = pick(
            &s.true_curve,
            toy.then(|| TOY_CURVE.to_vec()),
            "scenario.true_curve",
            k,
        )?;
        let base = pick(
            &s.logging_ranking,
            toy.then(|| TOY_LOGGING_BASE.to_vec()),
            "scenario.logging_ranking",
            k,
        )?;
        let target = pick(
            &s.target_ranking,
            toy.then(|| TOY_TARGET.to_vec()),
            "scenario.target_ranking",
            k,
        )?;
        for (key, len) in [
            ("scenario.relevance", relevance.len()),
            ("scenario.true_curve", curve.len()),
            ("scenario.logging_ranking", base.len()),
            ("scenario.target_ranking", target.len()),
        ] {
            if len != k {
                return Err(config_err!("{key}: has {len} entries, scenario.k is {k}"));
            }
        }
        let curve = keyed("scenario.true_curve", PositionBiasCurve::new(curve))?;
        let user = keyed("scenario.relevance", UserModel::new(relevance, curve))?;
        let base = keyed("scenario.logging_ranking", Ranking::new(base))?;
        let target = keyed("scenario.target_ranking", Ranking::new(target))?;
        let logging = keyed(
            "scenario.stay_prob",
            SwapPolicy::new(base, s.stay_prob, s.sampler),
        )?;
        Scenario::new(user, logging, target)
    }

    /// The curve the estimator uses: `estimator.curve` if given, otherwise
    /// the true curve raised to `estimator.exponent`.
    pub fn estimator_curve(&self) -> Result<PositionBiasCurve> {
        match &self.estimator.curve {
            Some(c) => {
                if c.len() != self.scenario.k {
                    return Err(config_err!(
                        "estimator.curve: has {} entries, scenario.k is {}",
                        c.len(),
                        self.scenario.k
                    ));
                }
                keyed("estimator.curve", PositionBiasCurve::new(c.clone()))
            }
            None => {
                let scenario = self.scenario()?;
                keyed(
                    "estimator.exponent",
                    power_curve(scenario.user.true_curve(), self.estimator.exponent),
                )
            }
        }
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig> {
        let window = check_window("estimator.window", self.estimator.window, self.scenario.k)?;
        Ok(match self.estimator.family {
            Family::Pbm => EstimatorConfig::pbm(self.estimator_curve()?),
            Family::Ipm => EstimatorConfig::ipm(),
            Family::Interpol => EstimatorConfig::interpol(window, self.estimator_curve()?),
        })
    }

    pub fn windows(&self) -> Vec<usize> {
        match &self.grid.windows {
            Some(w) => w.iter().map(|&w| w.max(0) as usize).collect(),
            None => (0..=self.scenario.k).collect(),
        }
    }

    pub fn experiment_grid(&self, base_seed: u64) -> ExperimentGrid {
        ExperimentGrid {
            exponents: self.grid.exponents.clone(),
            stay_probs: self.grid.stay_probs.clone(),
            windows: self.windows(),
            n: self.scenario.n,
            replications: self.grid.replications,
            base_seed,
        }
    }
}
