//! Locale-free number formatting for output files.

/// 17 significant digits in scientific notation; round-trips every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
