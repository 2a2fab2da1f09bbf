//! Micro and macro F1 for single-label multiclass prediction.

use crate::error::{Error, Result};

fn check_inputs(pred: &[u32], gold: &[u32]) -> Result<()> {
    if pred.is_empty() || gold.is_empty() {
        return Err(Error::InvalidArgument("empty prediction or label set".into()));
    }
    if pred.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "prediction/label length mismatch: {} vs {}",
            pred.len(),
            gold.len()
        )));
    }
    Ok(())
}

pub fn accuracy(pred: &[u32], gold: &[u32]) -> Result<f64> {
    check_inputs(pred, gold)?;
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Micro-averaged F1 from globally pooled counts. For single-label
/// multiclass every false positive is another class's false negative, so
/// this equals accuracy; it is still computed from the pooled counts.
pub fn micro_f1(pred: &[u32], gold: &[u32]) -> Result<f64> {
    check_inputs(pred, gold)?;
    let classes = class_universe(pred, gold);
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for c in 0..classes {
        let c = c as u32;
        for (&p, &g) in pred.iter().zip(gold) {
            match (p == c, g == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                (false, false) => {}
            }
        }
    }
    if tp == 0.0 {
        return Ok(0.0);
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Macro-averaged F1 over `num_classes` classes: unweighted mean of the
/// per-class F1 scores. Classes absent from both predictions and labels
/// contribute zero.
pub fn macro_f1(pred: &[u32], gold: &[u32], num_classes: usize) -> Result<f64> {
    check_inputs(pred, gold)?;
    if num_classes == 0 {
        return Err(Error::InvalidArgument("num_classes must be > 0".into()));
    }
    let mut total = 0.0;
    for c in 0..num_classes {
        let c = c as u32;
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (&p, &g) in pred.iter().zip(gold) {
            match (p == c, g == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                (false, false) => {}
            }
        }
        if tp > 0.0 {
            let precision = tp / (tp + fp);
            let recall = tp / (tp + fn_);
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(total / num_classes as f64)
}

fn class_universe(pred: &[u32], gold: &[u32]) -> usize {
    pred.iter()
        .chain(gold)
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = vec![0, 1, 2, 1];
        assert_eq!(micro_f1(&y, &y).unwrap(), 1.0);
        assert_eq!(macro_f1(&y, &y, 3).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_example() {
        let gold = vec![0, 0, 1, 1];
        let pred = vec![0, 1, 1, 1];
        assert!((micro_f1(&pred, &gold).unwrap() - 0.75).abs() < 1e-12);
        // Class 0: P 1, R 1/2 -> F1 2/3. Class 1: P 2/3, R 1 -> F1 4/5.
        let want = (2.0 / 3.0 + 4.0 / 5.0) / 2.0;
        assert!((macro_f1(&pred, &gold, 2).unwrap() - want).abs() < 1e-12);
        assert!((want - 11.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn all_one_class_on_balanced_set() {
        let gold = vec![0, 0, 1, 1];
        let pred = vec![0, 0, 0, 0];
        let micro = micro_f1(&pred, &gold).unwrap();
        let macro_ = macro_f1(&pred, &gold, 2).unwrap();
        // micro = accuracy = 0.5; macro = (F1_0=2/3 + F1_1=0)/2 = 1/3.
        assert!((micro - 0.5).abs() < 1e-12);
        assert!((macro_ - 1.0 / 3.0).abs() < 1e-12);
        assert!(macro_ < micro);
    }

    #[test]
    fn micro_equals_accuracy_single_label() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let classes = rng.random_range(2..6);
            let gold: Vec<u32> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            let pred: Vec<u32> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            let micro = micro_f1(&pred, &gold).unwrap();
            let acc = accuracy(&pred, &gold).unwrap();
            assert!((micro - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_class_contributes_zero_to_macro() {
        let gold = vec![0, 0];
        let pred = vec![0, 0];
        // Three-class universe, class 1 and 2 absent everywhere.
        assert!((macro_f1(&pred, &gold, 3).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_error() {
        assert!(micro_f1(&[], &[]).is_err());
        assert!(macro_f1(&[1], &[], 2).is_err());
    }
}
