//! Decimal formatting used by every CSV the crate writes.

/// Formats `x` as a plain decimal with at most nine significant digits.
///
/// The output is the shortest decimal that parses back to the nine-digit
/// rounding of `x`, so formatting a value that was itself read from such a
/// string reproduces the same bytes.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("scientific literal");
    let s = format!("{rounded}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_to_nine_digits() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(-0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(740.0), "740");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456789.4), "123456789");
        assert_eq!(fmt_sig9(-2.5e-7), "-0.00000025");
    }

    #[test]
    fn idempotent_through_parse() {
        for &x in &[0.1, 1.878048780487805, 3.04159265358979, 1e-12, 98765.4321] {
            let s = fmt_sig9(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(fmt_sig9(back), s);
        }
    }
}
