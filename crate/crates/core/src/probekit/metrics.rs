// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!("{} targets vs {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("targets"));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    r2_against(y_true, y_pred, mean)
}

/// R² with an explicit reference mean for the total sum of squares.
pub(crate) fn r2_against(y_true: &[f64], y_pred: &[f64], reference: f64) -> Result<f64> {
    let ss_tot: f64 = y_true.iter().map(|y| (y - reference) * (y - reference)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::DegenerateTarget);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_mean_and_reversed() {
        let y = [0.0, 1.0, 2.0];
        assert_eq!(r2_score(&y, &y).unwrap(), 1.0);
        assert_eq!(r2_score(&y, &[1.0; 3]).unwrap(), 0.0);
        assert_eq!(r2_score(&y, &[2.0, 1.0, 0.0]).unwrap(), -3.0);
    }

    #[test]
    fn degenerate_target() {
        assert_eq!(r2_score(&[4.0; 3], &[4.0; 3]).unwrap_err().to_string(), "degenerate target");
        assert!(r2_score(&[1.0], &[1.0, 2.0]).is_err());
    }
}
