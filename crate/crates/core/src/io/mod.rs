//! Text file formats. All files are UTF-8 with LF line endings and `.` as the
//! decimal separator.

pub mod dataset;
pub mod embeddings;
pub mod eraser;
pub mod pairs;

/// Formats `v` with `digits` significant digits, `%g` style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Joins values with single spaces at the given precision.
pub(crate) fn join_values<'a>(
    values: impl IntoIterator<Item = &'a f64>,
    digits: usize,
    sep: &str,
) -> String {
    values
        .into_iter()
        .map(|v| format_sig(*v, digits))
        .collect::<Vec<_>>()
        .join(sep)
}

/// Splits raw bytes into numbered UTF-8 lines (1-based), failing on invalid UTF-8.
pub(crate) fn utf8_lines(bytes: &[u8]) -> crate::error::Result<Vec<(usize, &str)>> {
    let mut out = Vec::new();
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    if body.is_empty() {
        return Ok(out);
    }
    for (i, raw) in body.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw)
            .map_err(|_| crate::error::SalError::parse(i + 1, "invalid UTF-8"))?;
        out.push((i + 1, line));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(1.5, 9), "1.5");
        assert_eq!(format_sig(-0.000123456789, 9), "-0.000123456789");
        assert_eq!(format_sig(123456789012.0, 9), "1.23456789e11");
        assert_eq!(format_sig(1e-7, 9), "1e-7");
        assert_eq!(format_sig(100.0, 3), "100");
        let x = 0.1f64 + 0.2;
        assert_eq!(format_sig(x, 17).parse::<f64>().unwrap(), x);
    }
}
