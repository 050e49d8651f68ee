//! Summary numbers reported next to the hit rates.

use nalgebra::DVector;

/// Relative gain of `x` over `y` in percent; `None` when `y` is zero.
pub fn gain(x: f64, y: f64) -> Option<f64> {
    (y != 0.0).then(|| (x - y) / y * 100.0)
}

/// Hit rate of most-popular caching for independent requests, in percent:
/// the popularity mass of the cached items (cost 0). `None` unless costs are
/// binary.
pub fn mph(p0: &DVector<f64>, costs: &DVector<f64>) -> Option<f64> {
    if costs.iter().any(|&c| c != 0.0 && c != 1.0) {
        return None;
    }
    Some(p0.iter().zip(costs.iter()).filter(|(_, &c)| c == 0.0).map(|(p, _)| p).sum::<f64>() * 100.0)
}

/// Formats an optional number for tables, `NA` when missing.
pub fn or_na(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}
