use serde::{Deserialize, Serialize};

use crate::error::{ReadoutError, Result};

/// Probabilities are floored here before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    /// Cross-entropy on a softmax output layer.
    CrossEntropy,
}

/// Mean squared error `(1/d) Σ (x - x_hat)²`.
pub fn mse_loss(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(ReadoutError::DimensionMismatch {
            expected: x.len(),
            got: x_hat.len(),
        });
    }
    if x.is_empty() {
        return Err(ReadoutError::InvalidArgument("mse of empty vectors".into()));
    }
    Ok(mse_unchecked(x, x_hat))
}

pub(crate) fn mse_unchecked(x: &[f64], x_hat: &[f64]) -> f64 {
    x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

/// `-Σ y_c ln(max(y_hat_c, 1e-12))` for a one-hot `y`.
pub fn cross_entropy_loss(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(ReadoutError::DimensionMismatch {
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    let hot = y.iter().filter(|&&v| v == 1.0).count();
    if hot != 1 || y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(ReadoutError::InvalidArgument("target is not one-hot".into()));
    }
    if y_hat.iter().any(|p| !(0.0..=1.0).contains(p)) || (y_hat.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(ReadoutError::InvalidArgument("prediction is not a probability vector".into()));
    }
    let class = y.iter().position(|&v| v == 1.0).unwrap_or(0);
    Ok(class_cross_entropy(y_hat, class))
}

pub(crate) fn class_cross_entropy(y_hat: &[f64], class: usize) -> f64 {
    -y_hat[class].max(PROB_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[1.0, 2.0, 3.0], &[1.0, 2.0, 0.0]).unwrap(), 3.0);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy_loss(&[0.0, 1.0], &[0.0, 1.0]).unwrap() <= 1e-11);
        let l = cross_entropy_loss(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let third = 1.0 / 3.0;
        let l = cross_entropy_loss(&[0.0, 1.0, 0.0], &[third, third, third]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_floors_zero_probability() {
        let l = cross_entropy_loss(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((l - (-(1e-12f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_rejects_bad_inputs() {
        assert!(cross_entropy_loss(&[1.0, 1.0], &[0.5, 0.5]).is_err());
        assert!(cross_entropy_loss(&[1.0, 0.0], &[0.7, 0.7]).is_err());
        assert!(cross_entropy_loss(&[1.0, 0.0], &[1.2, -0.2]).is_err());
    }
}
