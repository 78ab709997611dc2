//! Float text format shared by every CSV the tool writes.

/// Significant digits of every emitted float.
pub const SIG_DIGITS: usize = 9;

/// Formats `x` with 9 significant digits, `%g` style: fixed notation for
/// decimal exponents in `[-5, 9)`, scientific otherwise, trailing zeros
/// trimmed.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        // Round through the scientific form so both notations agree on digits.
        let rounded: f64 = sci.parse().expect("round trip");
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{rounded:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// `fmt_float`, or an empty field for a missing value.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// The value a float takes after a write/read cycle.
pub fn quantize(x: f64) -> f64 {
    fmt_float(x).parse().expect("formatted floats parse")
}

pub fn parse_float(field: &str) -> Result<f64, String> {
    field.trim().parse().map_err(|_| format!("not a number: {field:?}"))
}

pub fn parse_opt(field: &str) -> Result<Option<f64>, String> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_float(field).map(Some)
    }
}
