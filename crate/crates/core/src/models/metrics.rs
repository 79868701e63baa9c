//! Regression scores.

use crate::{Error, Result};

fn check(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() || y.len() != y_hat.len() {
        return Err(Error::InvalidParameter(format!(
            "metric inputs must be equal non-zero lengths, got {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    Ok(())
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let ss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Coefficient of determination. A constant `y` has no variance to explain
/// and yields [`Error::Undefined`].
pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Undefined("r2 of a constant target".into()));
    }
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
