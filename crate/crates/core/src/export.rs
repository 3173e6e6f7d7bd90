//! Plain-text number formatting shared by the CSV writers.

/// Full-precision scientific notation, independent of locale.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Joins values with commas using [`fmt`].
pub fn row(values: &[f64]) -> String {
    values.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")
}
