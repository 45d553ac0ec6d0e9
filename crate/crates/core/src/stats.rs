//! Expectation, standard deviation and combined ratio of a series.

use crate::error::{Error, Result};

/// Below this standard deviation the combined ratio is reported as 0.
pub const SIGMA_GUARD: f64 = 1e-9;

/// `(mean, std, mean / std)` of one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesStats {
    pub mean: f64,
    pub std: f64,
    pub combo: f64,
}

fn non_empty(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        Err(Error::Empty("series"))
    } else {
        Ok(())
    }
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0].to_bits() == w[1].to_bits())
}

fn mean_unchecked(values: &[f64]) -> f64 {
    if is_constant(values) {
        return values[0];
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_unchecked(values: &[f64]) -> f64 {
    if is_constant(values) {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mean_sq = values.iter().map(|v| v * v).sum::<f64>() / n;
    libm::sqrt((mean_sq - mean * mean).max(0.0))
}

fn ratio(mean: f64, std: f64) -> f64 {
    if std < SIGMA_GUARD {
        0.0
    } else {
        mean / std
    }
}

/// Arithmetic mean.
pub fn expectation(values: &[f64]) -> Result<f64> {
    non_empty(values)?;
    Ok(mean_unchecked(values))
}

/// Population standard deviation in moment form, `sqrt(E[x²] − E[x]²)`,
/// with the radicand clamped at zero. A series of bit-identical values has
/// deviation exactly 0.
pub fn std_dev(values: &[f64]) -> Result<f64> {
    non_empty(values)?;
    Ok(std_unchecked(values))
}

/// `expectation / std_dev`, or 0 when the deviation is below [`SIGMA_GUARD`].
pub fn combo(values: &[f64]) -> Result<f64> {
    non_empty(values)?;
    Ok(ratio(mean_unchecked(values), std_unchecked(values)))
}

/// Statistics over a set of per-sample values (needs at least two).
pub fn sample_stats(values: &[f64]) -> Result<SeriesStats> {
    if values.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: values.len(),
        });
    }
    let mean = mean_unchecked(values);
    let std = std_unchecked(values);
    Ok(SeriesStats {
        mean,
        std,
        combo: ratio(mean, std),
    })
}
