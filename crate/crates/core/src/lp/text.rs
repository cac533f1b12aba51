//! Plain-text LP exchange format:
//!
//! ```text
//! LP <rows> <cols>
//! MAX
//! <u_1> ... <u_n>
//! <a_11> ... <a_1n> <b_1>
//! ...
//! <a_m1> ... <a_mn> <b_m>
//! ```
//!
//! Values are whitespace separated and written in shortest round-trip form.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write;

use super::StandardFormLP;
use crate::error::{Error, Result};

fn push_values(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").expect("write to string");
    }
    out.push('\n');
}

pub fn export_lp(lp: &StandardFormLP) -> String {
    let mut out = format!("LP {} {}\nMAX\n", lp.num_rows, lp.num_cols);
    push_values(&mut out, &lp.u);
    let mut row = Vec::with_capacity(lp.num_cols + 1);
    for i in 0..lp.num_rows {
        row.clear();
        row.extend_from_slice(lp.row(i));
        row.push(lp.b[i]);
        push_values(&mut out, &row);
    }
    out
}

fn parse_numbers(line: &str, lineno: usize, expect: usize) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("line {lineno}: {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expect {
        return Err(Error::Parse(format!("line {lineno}: {} values, expected {expect}", vals.len())));
    }
    Ok(vals)
}

pub fn parse_lp(text: &str) -> Result<StandardFormLP> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
    let (n1, header) = next("header")?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (m, n) = match parts.as_slice() {
        ["LP", m, n] => (
            m.parse::<usize>().map_err(|e| Error::Parse(format!("line {n1}: {e}")))?,
            n.parse::<usize>().map_err(|e| Error::Parse(format!("line {n1}: {e}")))?,
        ),
        _ => return Err(Error::Parse(format!("line {n1}: expected `LP <rows> <cols>`"))),
    };
    let (n2, sense) = next("sense")?;
    if sense != "MAX" {
        return Err(Error::Parse(format!("line {n2}: only MAX is supported, got {sense:?}")));
    }
    let (n3, obj) = next("objective")?;
    let u = parse_numbers(obj, n3, n)?;
    let mut a = Vec::with_capacity(m * n);
    let mut b = Vec::with_capacity(m);
    for i in 0..m {
        let (ln, row) = next(&format!("constraint row {i}"))?;
        let mut vals = parse_numbers(row, ln, n + 1)?;
        b.push(vals.pop().expect("n + 1 values"));
        a.extend(vals);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse(format!("line {ln}: trailing content")));
    }
    StandardFormLP::new(m, n, a, b, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bitwise(m in 1usize..5, n in 1usize..6, seed in proptest::collection::vec(-1e6f64..1e6, 64)) {
            let pick = |i: usize| seed[i % seed.len()] * (1.0 + i as f64).sqrt() / 7.0;
            let lp = StandardFormLP::new(
                m, n,
                (0..m * n).map(pick).collect(),
                (0..m).map(|i| pick(i + 17)).collect(),
                (0..n).map(|i| pick(i + 31)).collect(),
            ).unwrap();
            let back = parse_lp(&export_lp(&lp)).unwrap();
            prop_assert_eq!(back, lp);
        }
    }

    #[test]
    fn extreme_values_round_trip() {
        let lp = StandardFormLP::new(1, 2, vec![1e-300, -3.5e250], vec![0.1], vec![f64::MIN_POSITIVE, 2.0]).unwrap();
        assert_eq!(parse_lp(&export_lp(&lp)).unwrap(), lp);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_lp("LP 1 2\nMAX\n1 2\n1 x 3\n").unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        assert!(parse_lp("LP 1 2\nMIN\n1 2\n1 2 3\n").is_err());
    }
}
