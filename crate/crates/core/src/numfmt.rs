//! Shortest-form decimal formatting for CSV export.
//!
//! CSV artifacts use C's `%.12g` convention: up to 12 significant digits,
//! fixed-point notation where compact, scientific otherwise, trailing zeros
//! stripped. [`format_g12`] reproduces that convention so exported files are
//! stable across runs and easy to diff.

/// Formats `x` like C's `printf("%.*g", sig, x)`.
pub fn format_g(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }

    // Round to `sig` significant digits first; the decimal exponent of the
    // rounded value decides between fixed and scientific notation.
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp_str) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp_str.parse().expect("exponent digits");

    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mantissa, sign, exp.unsigned_abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_fraction(&fixed).to_string()
    }
}

/// Formats with 12 significant digits (`%.12g`), the convention for all CSV
/// output in this crate.
pub fn format_g12(x: f64) -> String {
    format_g(x, 12)
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
