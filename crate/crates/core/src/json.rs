//! Wire format for complex matrices: row-major nested arrays, each entry a
//! two-element `[re, im]` array.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(name: &str, rows: &MatrixJson) -> Result<CMat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != nc) {
        return Err(Error::InvalidInput(format!(
            "{name}: row {i} has {} entries, expected {nc}",
            r.len()
        )));
    }
    if rows.iter().flatten().any(|z| !z[0].is_finite() || !z[1].is_finite()) {
        return Err(Error::InvalidInput(format!("{name}: non-finite entry")));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn complex_list_to_json(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn complex_list_from_json(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|z| C64::new(z[0], z[1])).collect()
}

/// `x` with 12 significant digits, in the style of C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').expect("exponent format");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}

/// Round to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Round every float in a JSON tree to 12 significant digits.
pub fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x))) {
                *n = x;
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(4.0 / 3.0), "1.33333333333");
        assert_eq!(fmt_sig(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.5e-9), "1.5e-9");
        assert_eq!(fmt_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_sig(-0.000123), "-0.000123");
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        let mut v = serde_json::json!({"a": [1.0 / 3.0, 2], "b": {"c": 2.0 / 3.0}});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[0.333333333333,2],"b":{"c":0.666666666667}}"#);
    }
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matrix_json_round_trip(
            r in 1usize..4,
            c in 1usize..4,
            vals in proptest::collection::vec(-1e6f64..1e6, 32),
        ) {
            let m = CMat::from_fn(r, c, |i, j| C64::new(vals[i * 4 + j], vals[16 + i * 4 + j]));
            let text = serde_json::to_string(&matrix_to_json(&m)).unwrap();
            let back: MatrixJson = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(matrix_from_json("m", &back).unwrap(), m);
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let rows: MatrixJson = vec![vec![[1.0, 0.0]], vec![[1.0, 0.0], [2.0, 0.0]]];
        assert!(matrix_from_json("A", &rows).is_err());
    }
}
