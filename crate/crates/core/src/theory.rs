//! Empirical verification of the two sampling guarantees.
//!
//! The first: with weights and accuracies sorted together (comonotone) and
//! weights summing to one, the weighted expectation dominates the uniform
//! one. The second: under multinomial epsilon-greedy with decaying epsilon,
//! per-arm draw proportions converge to the weights; the decayed exploration
//! term vanishes, so the limit is the weight itself. Both are checked by
//! direct computation and seeded simulation with configurable trial counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::{SamplerState, SamplerStrategy};
use crate::seeding::derive_seed_indexed;

/// Proportion-deviation tolerance at 1e5 draws: roughly six standard
/// deviations of a multinomial proportion at that horizon.
pub const PROPORTION_TOLERANCE: f64 = 0.01;

/// Result of the weighted-vs-uniform expectation check.
#[derive(Clone, Debug)]
pub struct Theorem1Report {
    pub trials: usize,
    pub violations: usize,
    /// Smallest observed margin E_weighted - E_uniform.
    pub min_margin: f64,
}

impl Theorem1Report {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

fn sorted_unit_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    // Symmetric Dirichlet via normalized exponentials, then sorted.
    let mut w: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w.sort_by(f64::total_cmp);
    w
}

/// Draw `trials` comonotone (accuracy, weight) pairs and check that the
/// weighted expectation is never below the uniform expectation.
pub fn verify_theorem1(trials: usize, m: usize, seed: u64) -> Result<Theorem1Report> {
    if trials == 0 || m == 0 {
        return Err(Error::InvalidArgument("trials and m must be >= 1".into()));
    }
    let results: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(seed, "t1", trial));
            let mut acc: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            acc.sort_by(f64::total_cmp);
            let weights = sorted_unit_weights(&mut rng, m);
            let weighted: f64 = acc.iter().zip(&weights).map(|(a, w)| a * w).sum();
            let uniform: f64 = acc.iter().sum::<f64>() / m as f64;
            weighted - uniform
        })
        .collect();
    let violations = results.iter().filter(|&&margin| margin < -1e-12).count();
    let min_margin = results.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Theorem1Report {
        trials,
        violations,
        min_margin,
    })
}

/// The comonotone premise is necessary: sort accuracies ascending but
/// weights descending and the inequality flips. Returns the (negative)
/// margin of a deliberately anti-comonotone pair.
pub fn theorem1_anti_comonotone_margin(m: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Strictly increasing accuracies, strictly decreasing weights.
    let acc: Vec<f64> = (0..m).map(|j| (j as f64 + 1.0) / (m as f64 + 1.0)).collect();
    let mut weights = sorted_unit_weights(&mut rng, m);
    // Force strict decrease by spreading, then reverse the sorted order.
    weights.reverse();
    let weighted: f64 = acc.iter().zip(&weights).map(|(a, w)| a * w).sum();
    let uniform: f64 = acc.iter().sum::<f64>() / m as f64;
    weighted - uniform
}

/// Simulation report for the proportion-convergence check.
#[derive(Clone, Debug)]
pub struct McReport {
    pub draws: u64,
    pub frequencies: Vec<f64>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl McReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arm,frequency\n");
        for (arm, freq) in self.frequencies.iter().enumerate() {
            out.push_str(&format!("{arm},{freq:.6}\n"));
        }
        out.push_str(&format!("max_deviation,{:.6}\n", self.max_deviation));
        out.push_str(&format!("tolerance,{:.6}\n", self.tolerance));
        out.push_str(&format!("pass,{}\n", self.pass));
        out
    }
}

/// Simulate multinomial epsilon-greedy single draws with the epsilon counter
/// advancing per draw, and report per-arm frequencies and their maximum
/// deviation from the weights.
pub fn verify_theorem2(
    weights: &[f64],
    epsilon0: f64,
    beta: f64,
    draws: u64,
    seed: u64,
) -> Result<McReport> {
    if weights.is_empty() || draws == 0 {
        return Err(Error::InvalidArgument("need weights and draws".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument(
            "weights must be nonnegative and sum to 1".into(),
        ));
    }
    let counts = simulate_counts(weights, epsilon0, beta, draws, seed);
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    let max_deviation = frequencies
        .iter()
        .zip(weights)
        .map(|(f, w)| (f - w).abs())
        .fold(0.0, f64::max);
    Ok(McReport {
        draws,
        frequencies,
        max_deviation,
        tolerance: PROPORTION_TOLERANCE,
        pass: max_deviation < PROPORTION_TOLERANCE,
    })
}

fn simulate_counts(weights: &[f64], epsilon0: f64, beta: f64, draws: u64, seed: u64) -> Vec<u64> {
    let mut state = SamplerState::new(
        SamplerStrategy::MultinomialEpsilonGreedy,
        epsilon0,
        beta,
        seed,
    );
    let mut counts = vec![0u64; weights.len()];
    for _ in 0..draws {
        let pick = state.sample_one(weights).expect("non-empty weights");
        counts[pick] += 1;
        state.advance();
    }
    counts
}

/// Fraction of seeded trials in which the deviation at `t_large` is no
/// larger than the deviation at `t_small` along the same draw sequence.
pub fn theorem2_convergence_fraction(
    weights: &[f64],
    epsilon0: f64,
    beta: f64,
    t_small: u64,
    t_large: u64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if t_small == 0 || t_small >= t_large || trials == 0 {
        return Err(Error::InvalidArgument(
            "need 0 < t_small < t_large and trials >= 1".into(),
        ));
    }
    let improved: usize = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut state = SamplerState::new(
                SamplerStrategy::MultinomialEpsilonGreedy,
                epsilon0,
                beta,
                derive_seed_indexed(seed, "t2", trial),
            );
            let mut counts = vec![0u64; weights.len()];
            let deviation = |counts: &[u64], t: u64| -> f64 {
                counts
                    .iter()
                    .zip(weights)
                    .map(|(&c, w)| (c as f64 / t as f64 - w).abs())
                    .fold(0.0, f64::max)
            };
            let mut dev_small = 0.0;
            for draw in 0..t_large {
                let pick = state.sample_one(weights).expect("non-empty");
                counts[pick] += 1;
                state.advance();
                if draw + 1 == t_small {
                    dev_small = deviation(&counts, t_small);
                }
            }
            usize::from(deviation(&counts, t_large) <= dev_small)
        })
        .sum();
    Ok(improved as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_arm_instance() {
        // Acc = [0.5, 0.9], weights = [0.25, 0.75]: weighted 0.8 vs uniform 0.7.
        let weighted: f64 = 0.25 * 0.5 + 0.75 * 0.9;
        let uniform: f64 = (0.5 + 0.9) / 2.0;
        assert!((weighted - 0.8).abs() < 1e-15);
        assert!((uniform - 0.7).abs() < 1e-15);
        assert!(weighted >= uniform);
    }

    #[test]
    fn comonotone_trials_never_violate() {
        let report = verify_theorem1(1000, 10, 99).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.min_margin >= -1e-12);
    }

    #[test]
    fn uniform_weights_give_equality() {
        let acc = [0.2, 0.4, 0.9];
        let weighted: f64 = acc.iter().map(|a| a / 3.0).sum();
        let uniform: f64 = acc.iter().sum::<f64>() / 3.0;
        assert!((weighted - uniform).abs() < 1e-15);
    }

    #[test]
    fn anti_comonotone_violates() {
        let margin = theorem1_anti_comonotone_margin(10, 7);
        assert!(margin < 0.0, "margin {margin}");
    }

    #[test]
    fn single_arm_has_zero_deviation() {
        let report = verify_theorem2(&[1.0], 0.5, 0.99, 10_000, 3).unwrap();
        assert_eq!(report.max_deviation, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn decayed_proportions_converge() {
        let report = verify_theorem2(&[0.7, 0.3], 0.5, 0.99, 100_000, 11).unwrap();
        assert!(report.pass, "max deviation {}", report.max_deviation);
        let sum: f64 = report.frequencies.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn undecayed_epsilon_keeps_exploration_floor() {
        // beta = 1, weights [1, 0]: exploitation always picks arm 0, the
        // permanent exploration picks it half the time, so the frequency
        // settles near 0.75 instead of converging to the weight.
        let report = verify_theorem2(&[1.0, 0.0], 0.5, 1.0, 100_000, 13).unwrap();
        assert!((report.frequencies[0] - 0.75).abs() < 0.01);
        assert!(!report.pass);
    }

    #[test]
    fn deviation_shrinks_with_horizon() {
        let fraction =
            theorem2_convergence_fraction(&[0.7, 0.3], 0.5, 0.99, 1_000, 100_000, 50, 9).unwrap();
        assert!(fraction >= 0.95, "fraction {fraction}");
    }

    #[test]
    fn input_validation() {
        assert!(verify_theorem2(&[0.5, 0.6], 0.5, 0.99, 100, 1).is_err());
        assert!(verify_theorem2(&[], 0.5, 0.99, 100, 1).is_err());
        assert!(verify_theorem1(0, 5, 1).is_err());
        assert!(theorem2_convergence_fraction(&[1.0], 0.5, 0.99, 10, 10, 5, 1).is_err());
    }
}
