//! Hexadecimal floating-point text, as in C's `%a`.
//!
//! Normal numbers are written `[-]0x1.hhhp±e`, subnormals `[-]0x0.hhhp-1022`,
//! zeros `[-]0x0p+0`. Trailing zero hex digits are dropped. The parser accepts
//! exactly this canonical form (plus `inf`, `-inf`, `nan`), so every finite
//! double round-trips bit for bit.

const MANT_BITS: u32 = 52;
const MANT_MASK: u64 = (1 << MANT_BITS) - 1;
const BIAS: i64 = 1023;

pub fn format_hex(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    let sign = if v.is_sign_negative() { "-" } else { "" };
    if v.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = v.to_bits();
    let biased = ((bits >> MANT_BITS) & 0x7ff) as i64;
    let mant = bits & MANT_MASK;
    if biased == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 {
        (0, 1 - BIAS)
    } else {
        (1, biased - BIAS)
    };
    let digits = format!("{mant:013x}");
    let digits = digits.trim_end_matches('0');
    let frac = if digits.is_empty() {
        String::new()
    } else {
        format!(".{digits}")
    };
    format!("{sign}0x{lead}{frac}p{exp:+}")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid hex float {0:?}")]
pub struct ParseHexError(pub String);

pub fn parse_hex(s: &str) -> Result<f64, ParseHexError> {
    let err = || ParseHexError(s.to_string());
    let t = s.trim();
    let (negative, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let signed = |v: f64| if negative { -v } else { v };
    match body {
        "inf" => return Ok(signed(f64::INFINITY)),
        "nan" if !negative => return Ok(f64::NAN),
        _ => {}
    }
    let body = body
        .strip_prefix("0x")
        .or_else(|| body.strip_prefix("0X"))
        .ok_or_else(err)?;
    let (mantissa, exp) = body.split_once(['p', 'P']).ok_or_else(err)?;
    let exp: i64 = exp.parse().map_err(|_| err())?;
    let (lead, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if frac.len() > 13 || !frac.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(err());
    }
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).map_err(|_| err())? << (4 * (13 - frac.len()))
    };
    let bits = match lead {
        "1" if (1 - BIAS..=BIAS).contains(&exp) => (((exp + BIAS) as u64) << MANT_BITS) | frac_bits,
        "0" if frac_bits == 0 => 0,
        "0" if exp == 1 - BIAS => frac_bits,
        _ => return Err(err()),
    };
    Ok(signed(f64::from_bits(bits)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(format_hex(1.0), "0x1p+0");
        assert_eq!(format_hex(0.5), "0x1p-1");
        assert_eq!(format_hex(-3.0), "-0x1.8p+1");
        assert_eq!(format_hex(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_hex(0.0), "0x0p+0");
        assert_eq!(format_hex(-0.0), "-0x0p+0");
        assert_eq!(format_hex(f64::MIN_POSITIVE / 2.0), "0x0.8p-1022");
        assert_eq!(format_hex(f64::from_bits(1)), "0x0.0000000000001p-1022");
        assert_eq!(format_hex(f64::MAX), "0x1.fffffffffffffp+1023");
        assert_eq!(format_hex(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn rejects_non_canonical() {
        for s in [
            "",
            "1.0",
            "0x2p+0",
            "0x1p+1024",
            "0x0.8p+0",
            "0x1.00000000000000p+0",
            "0x1.gp+0",
            "-nan",
        ] {
            assert!(parse_hex(s).is_err(), "{s}");
        }
    }

    #[test]
    fn special_values() {
        assert!(parse_hex("nan").unwrap().is_nan());
        assert_eq!(parse_hex("-inf").unwrap(), f64::NEG_INFINITY);
        assert!(parse_hex("-0x0p+0").unwrap().is_sign_negative());
    }

    proptest! {
        #[test]
        fn round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back = parse_hex(&format_hex(v)).unwrap();
            if v.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), bits);
            }
        }
    }
}
