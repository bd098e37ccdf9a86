//! Number formatting shared by the CLI and HTTP outputs.

/// Shortest decimal text that parses back to exactly `x`.
pub fn decimal(x: f64) -> String {
    format!("{x}")
}

/// Scientific notation with 17 significant digits.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}
