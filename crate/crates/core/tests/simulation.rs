//! Monte-Carlo checks of the logging samplers and click simulation against
//! their closed-form distributions.

use interpol::clicks::{toy_curve, TOY_LOGGING_BASE};
use interpol::{
    generate_dataset, simulate_clicks, Ranking, Sampler, Scenario, SwapPolicy, UserModel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DRAWS: usize = 1_000_000;

fn toy_policy(q: f64, sampler: Sampler) -> SwapPolicy {
    SwapPolicy::new(Ranking::new(TOY_LOGGING_BASE.to_vec()).unwrap(), q, sampler).unwrap()
}

/// Empirical rank histogram per item: `counts[item][rank]`.
fn rank_histogram(policy: &SwapPolicy, draws: usize, seed: u64) -> Vec<Vec<u64>> {
    let k = policy.k();
    let mut counts = vec![vec![0u64; k]; k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        let r = policy.sample(&mut rng);
        for (rank, &item) in r.items().iter().enumerate() {
            counts[item][rank] += 1;
        }
    }
    counts
}

fn within_3_sigma(hits: u64, draws: usize, p: f64) -> bool {
    let sd = (p * (1.0 - p) / draws as f64).sqrt();
    (hits as f64 / draws as f64 - p).abs() <= 3.0 * sd
}

#[test]
fn sampled_ranks_match_propensities_chi_squared() {
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(0.999);
    for (sampler, seed) in [(Sampler::IdentityOrUniform, 10), (Sampler::CyclicShift, 20)] {
        for q in [0.5, 0.95] {
            let policy = toy_policy(q, sampler);
            let expected = policy.propensity_matrix();
            let counts = rank_histogram(&policy, DRAWS, seed);
            for item in 0..10 {
                let stat: f64 = (0..10)
                    .map(|rank| {
                        let e = expected.get(item, rank) * DRAWS as f64;
                        (counts[item][rank] as f64 - e).powi(2) / e
                    })
                    .sum();
                assert!(
                    stat < critical,
                    "{sampler} q={q} item {item}: chi2 {stat:.2} >= {critical:.2}"
                );
            }
        }
    }
}

#[test]
fn stay_and_move_frequencies() {
    // item 6 has base rank 0
    let counts = rank_histogram(&toy_policy(0.95, Sampler::IdentityOrUniform), DRAWS, 1);
    assert!(
        within_3_sigma(counts[6][0], DRAWS, 0.95),
        "{}",
        counts[6][0]
    );

    let counts = rank_histogram(&toy_policy(0.5, Sampler::IdentityOrUniform), DRAWS, 2);
    for rank in 1..10 {
        assert!(
            within_3_sigma(counts[6][rank], DRAWS, 0.5 / 9.0),
            "rank {rank}"
        );
    }
}

#[test]
fn click_rate_at_rank_five() {
    let user = UserModel::binary(10, &[3], toy_curve()).unwrap();
    let ranking = Ranking::new(vec![0, 1, 2, 4, 5, 3, 6, 7, 8, 9]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 100_000;
    let hits: u64 = (0..draws)
        .map(|_| u64::from(simulate_clicks(&ranking, &user, &mut rng)[5]))
        .sum();
    assert!(within_3_sigma(hits, draws, 0.5), "{hits}");
}

/// Expected clicks per query for each item: rel(y) * sum_k P(rank = k) p_k.
fn analytic_click_rates(s: &Scenario) -> Vec<f64> {
    let props = s.logging.propensity_matrix();
    (0..s.k())
        .map(|item| {
            s.user.relevance()[item]
                * (0..s.k())
                    .map(|rank| props.get(item, rank) * s.user.true_curve().at(rank))
                    .sum::<f64>()
        })
        .collect()
}

#[test]
fn total_clicks_match_expectation() {
    let s = Scenario::toy(0.95, Sampler::IdentityOrUniform).unwrap();
    let n = 5_000;
    let data = generate_dataset(&s, n, 77).unwrap();
    let total: u64 = data
        .iter()
        .flat_map(|r| r.clicks())
        .map(|&c| u64::from(c))
        .sum();
    // Var(S) = E[Var(S|Y)] + Var(E[S|Y]). The first term is at most the sum of
    // Bernoulli variances at the mean rates (concavity); E[S|Y] is a sum of
    // four distinct curve entries, in [1.0, 3.4], so its variance is <= 1.44.
    let rates = analytic_click_rates(&s);
    let mean: f64 = rates.iter().sum::<f64>() * n as f64;
    let var_bound: f64 = n as f64 * (rates.iter().map(|r| r * (1.0 - r)).sum::<f64>() + 1.44);
    assert!(
        (total as f64 - mean).abs() <= 3.0 * var_bound.sqrt(),
        "total {total}, expected {mean:.1}"
    );
}

#[test]
fn per_item_click_marginals() {
    let s = Scenario::toy(0.8, Sampler::IdentityOrUniform).unwrap();
    let n = 100_000;
    let data = generate_dataset(&s, n, 78).unwrap();
    let mut hits = [0u64; 10];
    for rec in &data {
        for (item, _) in rec.clicked() {
            hits[item] += 1;
        }
    }
    for (item, rate) in analytic_click_rates(&s).into_iter().enumerate() {
        if rate == 0.0 {
            assert_eq!(hits[item], 0);
        } else {
            assert!(
                within_3_sigma(hits[item], n, rate),
                "item {item}: {} vs {rate}",
                hits[item]
            );
        }
    }
}
