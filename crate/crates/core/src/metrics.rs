//! Per-state accuracy, macro-averaged global accuracy and confusion matrices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ReadoutError, Result};

fn check_pairs(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(ReadoutError::DimensionMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    Ok(())
}

/// Fraction of correctly classified samples for each state `0..n_states`.
/// Every state must occur in `labels`.
pub fn per_state_accuracy(preds: &[usize], labels: &[usize], n_states: usize) -> Result<Vec<f64>> {
    check_pairs(preds, labels)?;
    let mut hits = vec![0usize; n_states];
    let mut totals = vec![0usize; n_states];
    for (&p, &l) in preds.iter().zip(labels) {
        if l >= n_states {
            return Err(ReadoutError::InvalidArgument(format!("label {l} out of range")));
        }
        totals[l] += 1;
        if p == l {
            hits[l] += 1;
        }
    }
    if let Some(s) = totals.iter().position(|&t| t == 0) {
        return Err(ReadoutError::MissingState(s));
    }
    Ok(hits.iter().zip(&totals).map(|(&h, &t)| h as f64 / t as f64).collect())
}

/// Unweighted mean over states.
pub fn global_accuracy(per_state: &[f64]) -> Result<f64> {
    if per_state.is_empty() {
        return Err(ReadoutError::InvalidArgument("no states to average".into()));
    }
    Ok(per_state.iter().sum::<f64>() / per_state.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `rows[prepared][predicted]`, each nonempty row normalized to 1.
    pub rows: Vec<Vec<f64>>,
    /// Prepared states with no samples; their rows are all zero.
    pub empty_rows: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn diagonal(&self) -> Vec<f64> {
        self.rows.iter().enumerate().map(|(i, r)| r[i]).collect()
    }
}

pub fn confusion_matrix(preds: &[usize], labels: &[usize], n_states: usize) -> Result<ConfusionMatrix> {
    check_pairs(preds, labels)?;
    let mut counts = vec![vec![0usize; n_states]; n_states];
    for (&p, &l) in preds.iter().zip(labels) {
        if l >= n_states || p >= n_states {
            return Err(ReadoutError::InvalidArgument(format!(
                "label pair ({l}, {p}) out of range for {n_states} states"
            )));
        }
        counts[l][p] += 1;
    }
    let mut empty_rows = Vec::new();
    let rows = counts
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                empty_rows.push(s);
                vec![0.0; n_states]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    Ok(ConfusionMatrix { rows, empty_rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub tm_ns: f64,
    pub repeat: usize,
    pub seed: u64,
    pub per_state_accuracy: Vec<f64>,
    pub global_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub n_test: usize,
    /// Seconds per phase, e.g. `train`, `inference_batch_1`.
    pub timing: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn from_predictions(
        method: &str,
        tm_ns: f64,
        repeat: usize,
        seed: u64,
        preds: &[usize],
        labels: &[usize],
        n_states: usize,
    ) -> Result<Self> {
        let per_state = per_state_accuracy(preds, labels, n_states)?;
        Ok(EvalReport {
            method: method.to_string(),
            tm_ns,
            repeat,
            seed,
            global_accuracy: global_accuracy(&per_state)?,
            per_state_accuracy: per_state,
            confusion: confusion_matrix(preds, labels, n_states)?,
            n_test: labels.len(),
            timing: BTreeMap::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_state_examples() {
        assert_eq!(per_state_accuracy(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), vec![1.0; 3]);
        assert_eq!(per_state_accuracy(&[0, 0, 0, 0], &[0, 1, 0, 1], 2).unwrap(), vec![1.0, 0.0]);
        assert_eq!(per_state_accuracy(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap(), vec![0.5, 1.0]);
        assert!(matches!(
            per_state_accuracy(&[0, 0], &[0, 0], 2),
            Err(ReadoutError::MissingState(1))
        ));
    }

    #[test]
    fn global_examples() {
        assert_eq!(global_accuracy(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(global_accuracy(&[0.5, 1.0]).unwrap(), 0.75);
        assert!((global_accuracy(&[0.9, 0.8, 0.7]).unwrap() - 0.8).abs() < 1e-15);
        assert!(global_accuracy(&[]).is_err());
    }

    #[test]
    fn global_is_macro_not_weighted() {
        // 9 of 10 state-0 correct, 0 of 1 state-1 correct
        let labels = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let preds = [0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0];
        let ps = per_state_accuracy(&preds, &labels, 2).unwrap();
        assert_eq!(global_accuracy(&ps).unwrap(), 0.45);
    }

    #[test]
    fn confusion_examples() {
        let c = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(c.rows, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let c = confusion_matrix(&[1, 0], &[0, 1], 2).unwrap();
        assert_eq!(c.rows, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let c = confusion_matrix(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(c.rows, vec![vec![0.5, 0.5], vec![0.0, 1.0]]);
        assert!(confusion_matrix(&[0], &[3], 2).is_err());
    }

    #[test]
    fn empty_rows_are_flagged() {
        let c = confusion_matrix(&[0, 0], &[0, 0], 3).unwrap();
        assert_eq!(c.empty_rows, vec![1, 2]);
        assert_eq!(c.rows[2], vec![0.0; 3]);
    }

    #[test]
    fn report_diagonal_matches_per_state() {
        let labels = [0, 0, 1, 1, 2, 2, 2];
        let preds = [0, 2, 1, 1, 0, 2, 1];
        let r = EvalReport::from_predictions("gmm", 800.0, 0, 1, &preds, &labels, 3).unwrap();
        assert_eq!(r.confusion.diagonal(), r.per_state_accuracy);
        let json = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
