use crate::error::{Error, Result};

/// Relative half-width of the engineering tolerance band.
pub const DEFAULT_BAND: f64 = 0.10;

fn check_pair(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions",
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    if let Some(i) = truth.iter().position(|&t| t == 0.0) {
        return Err(Error::InvalidArgument(format!("MAPE undefined: truth[{i}] is zero")));
    }
    let sum: f64 = truth.iter().zip(pred).map(|(t, p)| ((t - p) / t).abs()).sum();
    Ok(100.0 * sum / truth.len() as f64)
}

/// Fraction of predictions with `|pred - truth| <= band * |truth|`.
pub fn tolerance_band_fraction(truth: &[f64], pred: &[f64], band: f64) -> Result<f64> {
    check_pair(truth, pred)?;
    if !(band >= 0.0) {
        return Err(Error::InvalidArgument(format!("band must be >= 0, got {band}")));
    }
    let inside = truth
        .iter()
        .zip(pred)
        .filter(|(t, p)| (*p - *t).abs() <= band * t.abs())
        .count();
    Ok(inside as f64 / truth.len() as f64)
}

/// Coefficient of determination. A constant truth vector scores 1 when
/// matched exactly and 0 otherwise.
pub fn r_squared(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(match (ss_tot == 0.0, ss_res == 0.0) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        _ => 1.0 - ss_res / ss_tot,
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
