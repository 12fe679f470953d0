//! Text format for derivative tensors.
//!
//! ```text
//! # fstress derivative tensors
//! encoding decimal
//! m 4
//! max_order 2
//! stress 5e-1
//! constant 2e0
//! rho 2e0
//! eta 5e-1
//! order 1 shape 4 strides 1
//! <4 entries, one per line>
//! order 2 shape 4 4 strides 4 1
//! <16 entries, row-major>
//! ```
//!
//! Entry `(i1, ..., ir)` (0-based) of the order-`r` block is at line offset
//! `Σ ik * stride_k`, the last index running fastest. Numbers are written in
//! the shortest decimal form that reads back to the same double, or in hex
//! float form with `encoding hex`.

use std::fmt::Write as _;

use fstress::{DerivTensors, LossReport};

use crate::hexfloat::{format_hex, parse_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Decimal,
    Hex,
}

impl Encoding {
    pub fn format(self, v: f64) -> String {
        match self {
            Encoding::Decimal => format!("{v:e}"),
            Encoding::Hex => format_hex(v),
        }
    }

    pub fn parse(self, s: &str) -> Result<f64, String> {
        match self {
            Encoding::Decimal => s.parse().map_err(|_| format!("bad number {s:?}")),
            Encoding::Hex => parse_hex(s).map_err(|e| e.to_string()),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Encoding::Decimal => "decimal",
            Encoding::Hex => "hex",
        }
    }
}

/// Scalars carried in the header next to the tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub stress: f64,
    pub constant: f64,
    pub rho: f64,
    pub eta: f64,
    pub tensors: DerivTensors,
}

impl From<LossReport> for TensorFile {
    fn from(r: LossReport) -> Self {
        TensorFile {
            stress: r.stress,
            constant: r.constant,
            rho: r.rho,
            eta: r.eta,
            tensors: r.tensors,
        }
    }
}

fn join(v: impl IntoIterator<Item = usize>) -> String {
    v.into_iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_tensors(file: &TensorFile, enc: Encoding) -> String {
    let t = &file.tensors;
    let m = t.dim();
    let mut out = String::new();
    let _ = writeln!(out, "# fstress derivative tensors");
    let _ = writeln!(out, "encoding {}", enc.tag());
    let _ = writeln!(out, "m {m}");
    let _ = writeln!(out, "max_order {}", t.max_order());
    for (key, v) in [
        ("stress", file.stress),
        ("constant", file.constant),
        ("rho", file.rho),
        ("eta", file.eta),
    ] {
        let _ = writeln!(out, "{key} {}", enc.format(v));
    }
    for r in 1..=t.max_order() {
        let shape = join(std::iter::repeat_n(m, r));
        let strides = join((0..r).rev().map(|k| m.pow(k as u32)));
        let _ = writeln!(out, "order {r} shape {shape} strides {strides}");
        for &v in t.order(r).unwrap() {
            out.push_str(&enc.format(v));
            out.push('\n');
        }
    }
    out
}

struct Lines<'a> {
    inner: Box<dyn Iterator<Item = &'a str> + 'a>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, String> {
        self.inner.next().ok_or_else(|| format!("missing {what}"))
    }

    fn header(&mut self, key: &str) -> Result<&'a str, String> {
        let line = self.next(key)?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| format!("expected `{key} ...`, found {line:?}"))
    }
}

pub fn read_tensors(text: &str) -> Result<TensorFile, String> {
    let mut lines = Lines {
        inner: Box::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ),
    };
    let enc = match lines.header("encoding")? {
        "decimal" => Encoding::Decimal,
        "hex" => Encoding::Hex,
        other => return Err(format!("unknown encoding {other:?}")),
    };
    let int = |s: &str| s.parse::<usize>().map_err(|_| format!("bad integer {s:?}"));
    let m = int(lines.header("m")?)?;
    let max_order = int(lines.header("max_order")?)?;
    if max_order > 4 {
        return Err(format!("max_order {max_order} is above 4"));
    }
    let stress = enc.parse(lines.header("stress")?)?;
    let constant = enc.parse(lines.header("constant")?)?;
    let rho = enc.parse(lines.header("rho")?)?;
    let eta = enc.parse(lines.header("eta")?)?;
    let mut orders = Vec::new();
    for r in 1..=max_order {
        let expect = format!(
            "{r} shape {} strides {}",
            join(std::iter::repeat_n(m, r)),
            join((0..r).rev().map(|k| m.pow(k as u32)))
        );
        let got = lines.header("order")?;
        if got != expect {
            return Err(format!("expected `order {expect}`, found `order {got}`"));
        }
        let entries = (0..m.pow(r as u32))
            .map(|_| lines.next("tensor entry").and_then(|s| enc.parse(s)))
            .collect::<Result<Vec<_>, _>>()?;
        orders.push(entries);
    }
    if let Some(extra) = lines.inner.next() {
        return Err(format!("unexpected trailing line {extra:?}"));
    }
    let tensors = DerivTensors::from_parts(m, stress, orders).map_err(|e| e.to_string())?;
    Ok(TensorFile {
        stress,
        constant,
        rho,
        eta,
        tensors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorFile {
        let m: usize = 2;
        let orders = (1..=3)
            .map(|r| (0..m.pow(r)).map(|k| 0.1 * k as f64 - 1.0 / 3.0).collect())
            .collect();
        TensorFile {
            stress: 0.1 + 0.2,
            constant: 1e300,
            rho: f64::MIN_POSITIVE / 3.0,
            eta: -0.0,
            tensors: DerivTensors::from_parts(m, 0.1 + 0.2, orders).unwrap(),
        }
    }

    #[test]
    fn round_trips_in_both_encodings() {
        for enc in [Encoding::Decimal, Encoding::Hex] {
            let f = sample();
            let back = read_tensors(&write_tensors(&f, enc)).unwrap();
            assert_eq!(back, f);
            assert!(back.eta.is_sign_negative());
        }
    }

    #[test]
    fn header_shape_and_strides() {
        let text = write_tensors(&sample(), Encoding::Decimal);
        assert!(text.contains("order 3 shape 2 2 2 strides 4 2 1\n"));
        assert!(text.contains("stress 3.0000000000000004e-1\n"));
    }

    #[test]
    fn rejects_truncated_and_padded_files() {
        let text = write_tensors(&sample(), Encoding::Decimal);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        assert!(read_tensors(&lines.join("\n")).is_err());
        assert!(read_tensors(&format!("{text}1e0\n")).is_err());
        assert!(read_tensors(&text.replace("strides 4 2 1", "strides 1 2 4")).is_err());
    }
}
