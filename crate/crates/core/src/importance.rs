//! Non-parametric meta-path importance: initialization, per-path accuracy
//! evaluation, discounted accumulation, and normalization.
//!
//! The vector is maintained outside the gradient path entirely: each sampled
//! path is scored by validation accuracy with only that path active, the
//! scores are folded in with a discount on the history, and the vector is
//! renormalized so it stays a bounded distribution over paths.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::backbone::BackboneModel;
use crate::error::{Error, Result};
use crate::metapath::MetaPathFeatureSet;

/// How the importance vector is renormalized after an update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormMode {
    Softmax,
    /// Divide by the vector p-norm; p = 1 gives the plain sum-to-one scaling.
    PNorm(f64),
}

impl NormMode {
    pub const L1: NormMode = NormMode::PNorm(1.0);
    pub const L2: NormMode = NormMode::PNorm(2.0);
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormMode::Softmax => f.write_str("softmax"),
            NormMode::PNorm(p) if *p == 1.0 => f.write_str("l1"),
            NormMode::PNorm(p) if *p == 2.0 => f.write_str("l2"),
            NormMode::PNorm(p) => write!(f, "p{p}"),
        }
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(NormMode::Softmax),
            "l1" => Ok(NormMode::L1),
            "l2" => Ok(NormMode::L2),
            other => Err(Error::Config(format!(
                "unknown norm mode {other:?} (expected softmax, l1, or l2)"
            ))),
        }
    }
}

/// Length-M nonnegative weight vector over the meta-path catalog, with its
/// update parameters and epoch counter.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceVector {
    mu: Vec<f64>,
    pub gamma: f64,
    pub norm_mode: NormMode,
    pub t: u64,
}

impl ImportanceVector {
    /// Uniform initialization: every entry 1/M, summing to one.
    pub fn init(m: usize, gamma: f64, norm_mode: NormMode) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "importance vector needs at least one path".into(),
            ));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be in [0, 1], got {gamma}"
            )));
        }
        Ok(Self {
            mu: vec![1.0 / m as f64; m],
            gamma,
            norm_mode,
            t: 0,
        })
    }

    /// Rebuild from raw parts (checkpoint restore).
    pub fn from_parts(mu: Vec<f64>, gamma: f64, norm_mode: NormMode, t: u64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidArgument("empty importance vector".into()));
        }
        Ok(Self {
            mu,
            gamma,
            norm_mode,
            t,
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.mu
    }

    pub fn get(&self, index: usize) -> f64 {
        self.mu[index]
    }

    /// Discounted accumulation: every entry decays by gamma, entries present
    /// in `immediate` then receive their fresh score (absent entries receive
    /// nothing). Advances the epoch counter.
    pub fn update(&mut self, immediate: &BTreeMap<usize, f64>) -> Result<()> {
        for (&index, &value) in immediate {
            if index >= self.mu.len() {
                return Err(Error::InvalidArgument(format!(
                    "immediate index {index} out of range for M = {}",
                    self.mu.len()
                )));
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidArgument(format!(
                    "immediate value for path {index} must be in [0, 1], got {value}"
                )));
            }
        }
        for v in &mut self.mu {
            *v *= self.gamma;
        }
        for (&index, &value) in immediate {
            self.mu[index] += value;
        }
        self.t += 1;
        Ok(())
    }

    /// Renormalize in place. Softmax is computed with max subtraction; the
    /// p-norm mode divides by the vector p-norm. A zero denominator (possible
    /// only when every entry is zero) resets to uniform so the vector always
    /// remains a usable distribution.
    pub fn normalize(&mut self) {
        match self.norm_mode {
            NormMode::Softmax => {
                let max = self.mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in &mut self.mu {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in &mut self.mu {
                    *v /= sum;
                }
            }
            NormMode::PNorm(p) => {
                let norm = self
                    .mu
                    .iter()
                    .map(|v| v.abs().powf(p))
                    .sum::<f64>()
                    .powf(1.0 / p);
                if norm == 0.0 {
                    let uniform = 1.0 / self.mu.len() as f64;
                    self.mu.fill(uniform);
                } else {
                    for v in &mut self.mu {
                        *v /= norm;
                    }
                }
            }
        }
    }

    /// Indices of the K largest entries, descending, lowest index on ties.
    pub fn top_k(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.mu.len() {
            return Err(Error::InvalidArgument(format!(
                "top_k must be in 1..={}, got {k}",
                self.mu.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.mu.len()).collect();
        order.sort_by(|&a, &b| {
            self.mu[b]
                .partial_cmp(&self.mu[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order.truncate(k);
        Ok(order)
    }
}

/// Validation accuracy of one path in isolation: the frozen model runs with
/// only this path's feature active (every other path contribution zeroed)
/// and predictions are compared to the validation labels.
pub fn evaluate_path(
    importance: &ImportanceVector,
    model: &BackboneModel,
    features: &MetaPathFeatureSet,
    path_index: usize,
    val_indices: &[usize],
    labels: &[u32],
) -> Result<f64> {
    if val_indices.is_empty() {
        return Err(Error::InvalidArgument("empty validation set".into()));
    }
    if path_index >= features.len() {
        return Err(Error::InvalidArgument(format!(
            "path index {path_index} out of range"
        )));
    }
    let predictions = model.predict(features, importance.weights(), &[path_index], val_indices)?;
    let matches = predictions
        .iter()
        .zip(val_indices)
        .filter(|(pred, &i)| **pred == labels[i])
        .count();
    Ok(matches as f64 / val_indices.len() as f64)
}
