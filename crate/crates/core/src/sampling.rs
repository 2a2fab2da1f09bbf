//! Meta-path sampling strategies over the importance vector.
//!
//! Five strategies: uniform random, multinomial on the weights, decayed
//! epsilon-greedy (with the ordinary variant as its beta = 1 degenerate
//! case), multinomial epsilon-greedy, and multinomial encouraged
//! epsilon-greedy, which explores proportionally to the complementary
//! weights. All randomness comes from a seeded ChaCha stream owned by the
//! state, so equal states produce equal draw sequences on every platform.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerStrategy {
    Random,
    Multinomial,
    OrdinaryEpsilonGreedy,
    DecayedEpsilonGreedy,
    MultinomialEpsilonGreedy,
    MultinomialEncouragedEpsilonGreedy,
}

impl SamplerStrategy {
    pub const ALL: [SamplerStrategy; 6] = [
        SamplerStrategy::Random,
        SamplerStrategy::Multinomial,
        SamplerStrategy::OrdinaryEpsilonGreedy,
        SamplerStrategy::DecayedEpsilonGreedy,
        SamplerStrategy::MultinomialEpsilonGreedy,
        SamplerStrategy::MultinomialEncouragedEpsilonGreedy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerStrategy::Random => "random",
            SamplerStrategy::Multinomial => "mds",
            SamplerStrategy::OrdinaryEpsilonGreedy => "o-eps",
            SamplerStrategy::DecayedEpsilonGreedy => "d-eps",
            SamplerStrategy::MultinomialEpsilonGreedy => "m-eps",
            SamplerStrategy::MultinomialEncouragedEpsilonGreedy => "me-eps",
        }
    }
}

impl fmt::Display for SamplerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SamplerStrategy::Random),
            "mds" => Ok(SamplerStrategy::Multinomial),
            "o-eps" => Ok(SamplerStrategy::OrdinaryEpsilonGreedy),
            "d-eps" => Ok(SamplerStrategy::DecayedEpsilonGreedy),
            "m-eps" => Ok(SamplerStrategy::MultinomialEpsilonGreedy),
            "me-eps" => Ok(SamplerStrategy::MultinomialEncouragedEpsilonGreedy),
            other => Err(Error::Config(format!(
                "unknown sampling strategy {other:?} (expected one of \
                 random, mds, o-eps, d-eps, m-eps, me-eps)"
            ))),
        }
    }
}

/// Mutable sampler state: strategy, decay schedule, iteration counter, and
/// the reproducible generator. Single-owner; sampling never mutates the
/// weights it is given.
#[derive(Clone, Debug)]
pub struct SamplerState {
    pub strategy: SamplerStrategy,
    pub epsilon0: f64,
    pub beta: f64,
    pub t: u64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl SamplerState {
    /// The ordinary epsilon-greedy strategy pins beta to 1 (no decay).
    pub fn new(strategy: SamplerStrategy, epsilon0: f64, beta: f64, seed: u64) -> Self {
        let beta = match strategy {
            SamplerStrategy::OrdinaryEpsilonGreedy => 1.0,
            _ => beta,
        };
        Self {
            strategy,
            epsilon0,
            beta,
            t: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// epsilon_t = epsilon_0 * beta^t.
    pub fn epsilon(&self) -> f64 {
        self.epsilon0 * self.beta.powf(self.t as f64)
    }

    /// Advance the iteration counter (once per outer training iteration).
    pub fn advance(&mut self) {
        self.t += 1;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator position, for checkpointing.
    pub fn rng_word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Restore a checkpointed state.
    pub fn restore(
        strategy: SamplerStrategy,
        epsilon0: f64,
        beta: f64,
        t: u64,
        seed: u64,
        word_pos: u128,
    ) -> Self {
        let mut state = Self::new(strategy, epsilon0, beta, seed);
        state.t = t;
        state.rng.set_word_pos(word_pos);
        state
    }

    /// Draw one path index from {0..M-1} under the configured strategy.
    pub fn sample_one(&mut self, weights: &[f64]) -> Result<usize> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        let active: Vec<usize> = (0..weights.len()).collect();
        Ok(self.sample_one_restricted(weights, &active))
    }

    /// Draw `k` distinct indices: repeated single draws with already-chosen
    /// indices excluded and the weights renormalized over the remainder.
    /// Returns the chosen set in ascending order.
    pub fn sample_k(&mut self, weights: &[f64], k: usize) -> Result<Vec<usize>> {
        let m = weights.len();
        if k == 0 || k > m {
            return Err(Error::InvalidArgument(format!(
                "k must be in 1..={m}, got {k}"
            )));
        }
        if k == m {
            return Ok((0..m).collect());
        }
        let mut active: Vec<usize> = (0..m).collect();
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k {
            let pick = self.sample_one_restricted(weights, &active);
            chosen.push(pick);
            active.retain(|&j| j != pick);
        }
        chosen.sort_unstable();
        Ok(chosen)
    }

    /// One draw over the `active` index subset. Multinomial branches fall
    /// back to uniform when every active weight is zero.
    fn sample_one_restricted(&mut self, weights: &[f64], active: &[usize]) -> usize {
        debug_assert!(!active.is_empty());
        match self.strategy {
            SamplerStrategy::Random => self.uniform(active),
            SamplerStrategy::Multinomial => self.multinomial(weights, active),
            SamplerStrategy::OrdinaryEpsilonGreedy | SamplerStrategy::DecayedEpsilonGreedy => {
                let alpha: f64 = self.rng.random();
                if alpha < self.epsilon() {
                    self.uniform(active)
                } else {
                    argmax(weights, active)
                }
            }
            SamplerStrategy::MultinomialEpsilonGreedy => {
                let alpha: f64 = self.rng.random();
                if alpha < self.epsilon() {
                    self.uniform(active)
                } else {
                    self.multinomial(weights, active)
                }
            }
            SamplerStrategy::MultinomialEncouragedEpsilonGreedy => {
                let alpha: f64 = self.rng.random();
                if alpha < self.epsilon() {
                    // Complementary weights, clamped at zero and renormalized.
                    let complement: Vec<f64> =
                        weights.iter().map(|&w| (1.0 - w).max(0.0)).collect();
                    self.multinomial(&complement, active)
                } else {
                    self.multinomial(weights, active)
                }
            }
        }
    }

    fn uniform(&mut self, active: &[usize]) -> usize {
        active[self.rng.random_range(0..active.len())]
    }

    fn multinomial(&mut self, weights: &[f64], active: &[usize]) -> usize {
        let total: f64 = active.iter().map(|&j| weights[j].max(0.0)).sum();
        if total <= 0.0 {
            return self.uniform(active);
        }
        let mut u = self.rng.random::<f64>() * total;
        for &j in active {
            u -= weights[j].max(0.0);
            if u < 0.0 {
                return j;
            }
        }
        // Rounding at the boundary: last active index.
        *active.last().unwrap()
    }
}

/// Index of the largest weight among `active`, lowest index on ties.
fn argmax(weights: &[f64], active: &[usize]) -> usize {
    let mut best = active[0];
    for &j in &active[1..] {
        if weights[j] > weights[best] {
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_gof;

    fn counts(state: &mut SamplerState, weights: &[f64], draws: usize) -> Vec<f64> {
        let mut n = vec![0.0; weights.len()];
        for _ in 0..draws {
            n[state.sample_one(weights).unwrap()] += 1.0;
        }
        n
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in SamplerStrategy::ALL {
            assert_eq!(s.as_str().parse::<SamplerStrategy>().unwrap(), s);
        }
        assert!("bogus".parse::<SamplerStrategy>().is_err());
    }

    #[test]
    fn epsilon_decay_schedule() {
        let s = SamplerState::new(SamplerStrategy::DecayedEpsilonGreedy, 0.5, 0.99, 1);
        assert_eq!(s.epsilon(), 0.5);

        let mut s = s;
        for _ in 0..100 {
            s.advance();
        }
        let want = 0.5 * 0.99f64.powi(100);
        assert!((s.epsilon() - want).abs() < 1e-15);

        let mut constant = SamplerState::new(SamplerStrategy::OrdinaryEpsilonGreedy, 0.5, 0.3, 2);
        for _ in 0..17 {
            constant.advance();
        }
        // Ordinary variant pins beta to 1: epsilon never decays.
        assert_eq!(constant.epsilon(), 0.5);
    }

    #[test]
    fn epsilon_monotone_nonincreasing() {
        let mut s = SamplerState::new(SamplerStrategy::DecayedEpsilonGreedy, 0.7, 0.95, 3);
        let mut prev = s.epsilon();
        for _ in 0..50 {
            s.advance();
            assert!(s.epsilon() <= prev);
            prev = s.epsilon();
        }
    }

    #[test]
    fn degenerate_multinomial_is_deterministic() {
        let mut s = SamplerState::new(SamplerStrategy::Multinomial, 0.5, 0.99, 4);
        for _ in 0..100 {
            assert_eq!(s.sample_one(&[1.0, 0.0, 0.0]).unwrap(), 0);
        }
    }

    #[test]
    fn equal_states_equal_sequences() {
        let weights = [0.1, 0.2, 0.3, 0.4];
        let mut a = SamplerState::new(SamplerStrategy::MultinomialEpsilonGreedy, 0.5, 0.99, 7);
        let mut b = SamplerState::new(SamplerStrategy::MultinomialEpsilonGreedy, 0.5, 0.99, 7);
        for _ in 0..200 {
            assert_eq!(
                a.sample_one(&weights).unwrap(),
                b.sample_one(&weights).unwrap()
            );
        }
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let mut s = SamplerState::new(SamplerStrategy::Multinomial, 0.5, 0.99, 8);
        let n = counts(&mut s, &[0.0, 0.0, 0.0, 0.0], 40_000);
        let expected = vec![10_000.0; 4];
        let (_, p) = chi_square_gof(&n, &expected);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn uniform_weights_uniform_frequencies() {
        // Holds for the symmetric strategies. The pure greedy strategies are
        // deliberately not symmetric under ties: the deterministic
        // lowest-index tie-break concentrates their exploit branch on path 0.
        let weights = [0.25, 0.25, 0.25, 0.25];
        for strategy in [
            SamplerStrategy::Random,
            SamplerStrategy::Multinomial,
            SamplerStrategy::MultinomialEpsilonGreedy,
            SamplerStrategy::MultinomialEncouragedEpsilonGreedy,
        ] {
            let mut s = SamplerState::new(strategy, 0.5, 0.99, 9);
            let n = counts(&mut s, &weights, 100_000);
            let expected = vec![25_000.0; 4];
            let (_, p) = chi_square_gof(&n, &expected);
            assert!(p > 0.001, "{strategy}: p = {p}");
        }
    }

    #[test]
    fn greedy_tie_concentrates_on_lowest_index() {
        let weights = [0.25, 0.25, 0.25, 0.25];
        let draws = 100_000;
        for strategy in [
            SamplerStrategy::OrdinaryEpsilonGreedy,
            SamplerStrategy::DecayedEpsilonGreedy,
        ] {
            let mut s = SamplerState::new(strategy, 0.5, 0.99, 9);
            let n = counts(&mut s, &weights, draws);
            // epsilon stays 0.5 at t = 0: path 0 gets 0.5 + 0.5 / 4.
            let expected = vec![62_500.0, 12_500.0, 12_500.0, 12_500.0];
            let (_, p) = chi_square_gof(&n, &expected);
            assert!(p > 0.001, "{strategy}: p = {p}");
        }
    }

    #[test]
    fn single_draw_distributions_match_analytic() {
        let weights = [0.1, 0.5, 0.15, 0.25];
        let draws = 100_000usize;
        let eps = 0.5; // t stays 0 in this test
        let uniform = 1.0 / weights.len() as f64;

        let analytic: Vec<(SamplerStrategy, Vec<f64>)> = vec![
            (SamplerStrategy::Random, vec![uniform; 4]),
            (SamplerStrategy::Multinomial, weights.to_vec()),
            (
                SamplerStrategy::DecayedEpsilonGreedy,
                (0..4)
                    .map(|j| eps * uniform + if j == 1 { 1.0 - eps } else { 0.0 })
                    .collect(),
            ),
            (
                SamplerStrategy::MultinomialEpsilonGreedy,
                weights
                    .iter()
                    .map(|w| eps * uniform + (1.0 - eps) * w)
                    .collect(),
            ),
            (
                SamplerStrategy::MultinomialEncouragedEpsilonGreedy,
                weights
                    .iter()
                    .map(|w| {
                        let comp_total: f64 = weights.iter().map(|x| 1.0 - x).sum();
                        eps * (1.0 - w) / comp_total + (1.0 - eps) * w
                    })
                    .collect(),
            ),
        ];

        for (strategy, probs) in analytic {
            let mut s = SamplerState::new(strategy, eps, 0.99, 10);
            let n = counts(&mut s, &weights, draws);
            let expected: Vec<f64> = probs.iter().map(|p| p * draws as f64).collect();
            let (stat, p) = chi_square_gof(&n, &expected);
            assert!(p > 0.001, "{strategy}: chi2 = {stat}, p = {p}");
        }
    }

    #[test]
    fn sample_k_exhaustive_and_degenerate() {
        let weights = [0.2, 0.5, 0.3];
        for strategy in SamplerStrategy::ALL {
            let mut s = SamplerState::new(strategy, 0.5, 0.99, 11);
            assert_eq!(s.sample_k(&weights, 3).unwrap(), vec![0, 1, 2]);
        }

        let mut s = SamplerState::new(SamplerStrategy::Multinomial, 0.5, 0.99, 12);
        assert_eq!(s.sample_k(&[1.0, 0.0, 0.0], 1).unwrap(), vec![0]);

        // Without-replacement outcome tree: {0,1} is the only possible pair.
        for seed in 0..50 {
            let mut s = SamplerState::new(SamplerStrategy::Multinomial, 0.5, 0.99, seed);
            assert_eq!(s.sample_k(&[0.5, 0.5, 0.0], 2).unwrap(), vec![0, 1]);
        }
    }

    #[test]
    fn sample_k_rejects_bad_k() {
        let mut s = SamplerState::new(SamplerStrategy::Random, 0.5, 0.99, 13);
        assert!(s.sample_k(&[0.5, 0.5], 3).is_err());
        assert!(s.sample_k(&[0.5, 0.5], 0).is_err());
    }

    #[test]
    fn greedy_tie_break_is_lowest_index() {
        // epsilon 0: pure exploitation; ties resolve to the lowest index.
        let mut s = SamplerState::new(SamplerStrategy::DecayedEpsilonGreedy, 0.0, 0.99, 14);
        assert_eq!(s.sample_one(&[0.4, 0.4, 0.2]).unwrap(), 0);
    }

    #[test]
    fn comonotone_weighting_dominates_uniform() {
        // For sorted-together accuracies and weights, the weighted mean is at
        // least the plain mean; spot-check over seeded random pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..1000 {
            let m = 10;
            let mut acc: Vec<f64> = (0..m).map(|_| rng.random()).collect();
            let mut w: Vec<f64> = (0..m).map(|_| -(rng.random::<f64>().ln())).collect();
            let total: f64 = w.iter().sum();
            for v in &mut w {
                *v /= total;
            }
            acc.sort_by(f64::total_cmp);
            w.sort_by(f64::total_cmp);
            let weighted: f64 = acc.iter().zip(&w).map(|(a, b)| a * b).sum();
            let mean: f64 = acc.iter().sum::<f64>() / m as f64;
            assert!(weighted >= mean - 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sample_k_yields_k_distinct_in_range(
                weights in proptest::collection::vec(0.0f64..5.0, 1..12),
                k_frac in 0.0f64..1.0,
                strategy_idx in 0usize..6,
                seed in 0u64..1000,
            ) {
                let m = weights.len();
                let k = 1 + (k_frac * (m - 1) as f64) as usize;
                let strategy = SamplerStrategy::ALL[strategy_idx];
                let mut a = SamplerState::new(strategy, 0.5, 0.99, seed);
                let mut b = SamplerState::new(strategy, 0.5, 0.99, seed);
                let picked = a.sample_k(&weights, k).unwrap();
                prop_assert_eq!(picked.len(), k);
                prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(picked.iter().all(|&j| j < m));
                // Equal states replay the same set.
                prop_assert_eq!(picked, b.sample_k(&weights, k).unwrap());
            }
        }
    }

    #[test]
    fn restore_resumes_stream() {
        let weights = [0.3, 0.7];
        let mut a = SamplerState::new(SamplerStrategy::MultinomialEpsilonGreedy, 0.5, 0.99, 16);
        for _ in 0..37 {
            a.sample_one(&weights).unwrap();
        }
        a.advance();
        let mut b = SamplerState::restore(
            a.strategy,
            a.epsilon0,
            a.beta,
            a.t,
            a.seed(),
            a.rng_word_pos(),
        );
        for _ in 0..50 {
            assert_eq!(
                a.sample_one(&weights).unwrap(),
                b.sample_one(&weights).unwrap()
            );
        }
    }
}
