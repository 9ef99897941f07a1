//! Median absolute deviation and the 3-MAD outlier rule.

use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::stats::{median, median_sorted};

/// Scale that makes the MAD a consistent estimator of the standard deviation
/// for normal data: `-1 / (sqrt(2) * erfcinv(3/2))`, about 1.4826.
pub fn mad_scale() -> f64 {
    -1.0 / (std::f64::consts::SQRT_2 * erfc_inv(1.5))
}

/// Scaled median absolute deviation.
pub fn mad(values: &[f64]) -> Result<f64> {
    let med = median(values)?;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    Ok(mad_scale() * median_sorted(&dev))
}

/// Flags values with `|v - median| > 3 * MAD`. When the MAD is zero every
/// value that differs from the median is flagged.
pub fn flag_outliers(values: &[f64]) -> Result<Vec<bool>> {
    let med = median(values)?;
    let threshold = 3.0 * mad(values)?;
    Ok(values.iter().map(|v| (v - med).abs() > threshold).collect())
}

/// Replaces flagged values above the median with the largest kept value and
/// flagged values below it with the smallest kept value.
pub fn replace_outliers(values: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.len() != mask.len() {
        return Err(Error::Table(format!(
            "mask length {} does not match {} values",
            mask.len(),
            values.len()
        )));
    }
    let kept = values.iter().zip(mask).filter(|(_, &m)| !m).map(|(v, _)| *v);
    let (lo, hi) = kept.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo > hi {
        return Err(Error::AllOutliers);
    }
    let med = median(values)?;
    Ok(values
        .iter()
        .zip(mask)
        .map(|(&v, &flagged)| match (flagged, v > med, v < med) {
            (true, true, _) => hi,
            (true, _, true) => lo,
            _ => v,
        })
        .collect())
}
