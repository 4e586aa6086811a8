//! Problem files: a realization plus the ladder polynomial, ladder indices,
//! tolerances and optional output paths.
//!
//! ```json
//! {
//!   "realization": {"A": [[[0.5, 0]]], "B": [[[1, 0]]], "C": [[[1, 0]]]},
//!   "q_roots": [[0.9, 0]],
//!   "k": 2,
//!   "k_max": 25,
//!   "grid": 4096,
//!   "outputs": {"grid_csv": "phi.csv"}
//! }
//! ```
//!
//! A bare realization object (`{"A": …, "B": …, "C": …}`) is accepted as well.

use std::fmt;
use std::path::PathBuf;

use nehari_core::analysis::{DEFAULT_FLOOR, DEFAULT_GRID, DEFAULT_MARGIN};
use nehari_core::hankel::GAP_RTOL;
use nehari_core::json::{complex_list_from_json, MatrixJson};
use nehari_core::{Realization, C64};
use serde::Deserialize;

/// Default certificate tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub field: String,
    pub message: String,
}

impl SpecError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        SpecError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for SpecError {}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub solution_json: Option<PathBuf>,
    pub grid_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub sweep_csv: Option<PathBuf>,
    pub sweep_json: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRealization {
    #[serde(rename = "A")]
    a: MatrixJson,
    #[serde(rename = "B")]
    b: MatrixJson,
    #[serde(rename = "C")]
    c: MatrixJson,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    realization: RawRealization,
    #[serde(default)]
    q_roots: Vec<[f64; 2]>,
    k: Option<usize>,
    k_max: Option<usize>,
    grid: Option<usize>,
    tol: Option<f64>,
    gap_rtol: Option<f64>,
    floor: Option<f64>,
    margin: Option<f64>,
    #[serde(default)]
    outputs: Outputs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub grid: usize,
    pub tol: f64,
    pub gap_rtol: f64,
    pub floor: f64,
    pub margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            grid: DEFAULT_GRID,
            tol: DEFAULT_TOL,
            gap_rtol: GAP_RTOL,
            floor: DEFAULT_FLOOR,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub realization: Realization,
    pub q_roots: Vec<C64>,
    pub k: Option<usize>,
    pub k_max: Option<usize>,
    pub tolerances: Tolerances,
    pub outputs: Outputs,
}

fn realization_from(raw: RawRealization) -> Result<Realization, SpecError> {
    let mats = [("A", &raw.a), ("B", &raw.b), ("C", &raw.c)];
    let mut parsed = Vec::with_capacity(3);
    for (name, m) in mats {
        parsed.push(
            nehari_core::json::matrix_from_json(name, m)
                .map_err(|e| SpecError::new(format!("realization.{name}"), e.to_string()))?,
        );
    }
    let c = parsed.pop().expect("three matrices");
    let b = parsed.pop().expect("three matrices");
    let a = parsed.pop().expect("three matrices");
    Realization::new(a, b, c).map_err(|e| SpecError::new("realization", e.to_string()))
}

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<ProblemSpec, SpecError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SpecError::new("<input>", format!("malformed JSON: {e}")))?;
        let bare = value.get("A").is_some();
        let raw: RawSpec = if bare {
            let r: RawRealization =
                serde_json::from_value(value).map_err(|e| SpecError::new("realization", e.to_string()))?;
            RawSpec {
                realization: r,
                q_roots: vec![],
                k: None,
                k_max: None,
                grid: None,
                tol: None,
                gap_rtol: None,
                floor: None,
                margin: None,
                outputs: Outputs::default(),
            }
        } else {
            serde_json::from_value(value).map_err(|e| SpecError::new("<spec>", e.to_string()))?
        };
        let realization = realization_from(raw.realization)?;

        for (i, z) in raw.q_roots.iter().enumerate() {
            let r = z[0].hypot(z[1]);
            if !(r < 1.0) {
                return Err(SpecError::new(
                    format!("q_roots[{i}]"),
                    format!("root ({}, {}) must lie in the open unit disk", z[0], z[1]),
                ));
            }
        }
        if raw.k == Some(0) {
            return Err(SpecError::new("k", "must be at least 1"));
        }
        if raw.k_max == Some(0) {
            return Err(SpecError::new("k_max", "must be at least 1"));
        }
        let defaults = Tolerances::default();
        let tolerances = Tolerances {
            grid: raw.grid.unwrap_or(defaults.grid),
            tol: raw.tol.unwrap_or(defaults.tol),
            gap_rtol: raw.gap_rtol.unwrap_or(defaults.gap_rtol),
            floor: raw.floor.unwrap_or(defaults.floor),
            margin: raw.margin.unwrap_or(defaults.margin),
        };
        validate_tolerances(&tolerances)?;
        Ok(ProblemSpec {
            realization,
            q_roots: complex_list_from_json(&raw.q_roots),
            k: raw.k,
            k_max: raw.k_max,
            tolerances,
            outputs: raw.outputs,
        })
    }
}

pub fn validate_tolerances(t: &Tolerances) -> Result<(), SpecError> {
    if t.grid < 8 {
        return Err(SpecError::new("grid", format!("{} is below the minimum of 8 points", t.grid)));
    }
    let positive = |name: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(SpecError::new(name, format!("{v} must be a positive finite number")))
        }
    };
    positive("tol", t.tol)?;
    positive("floor", t.floor)?;
    positive("margin", t.margin)?;
    positive("gap_rtol", t.gap_rtol)?;
    if t.gap_rtol >= 1.0 {
        return Err(SpecError::new("gap_rtol", format!("{} must be below 1", t.gap_rtol)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{"A": [[[0.5, 0]]], "B": [[[1, 0]]], "C": [[[1, 0]]]}"#;

    #[test]
    fn bare_realization() {
        let s = ProblemSpec::parse(SCALAR).unwrap();
        assert_eq!(s.realization.states(), 1);
        assert!(s.q_roots.is_empty());
        assert_eq!(s.tolerances, Tolerances::default());
    }

    #[test]
    fn full_spec() {
        let text = format!(
            r#"{{"realization": {SCALAR}, "q_roots": [[0.3, -0.1]], "k": 3, "grid": 512,
                "outputs": {{"grid_csv": "phi.csv"}}}}"#
        );
        let s = ProblemSpec::parse(&text).unwrap();
        assert_eq!(s.k, Some(3));
        assert_eq!(s.q_roots, vec![C64::new(0.3, -0.1)]);
        assert_eq!(s.tolerances.grid, 512);
        assert_eq!(s.outputs.grid_csv, Some(PathBuf::from("phi.csv")));
    }

    #[test]
    fn field_level_diagnostics() {
        let field = |text: String| ProblemSpec::parse(&text).unwrap_err().field;
        assert_eq!(field(format!(r#"{{"realization": {SCALAR}, "q_roots": [[0, 0], [1, 0]]}}"#)), "q_roots[1]");
        assert_eq!(field(format!(r#"{{"realization": {SCALAR}, "k": 0}}"#)), "k");
        assert_eq!(field(format!(r#"{{"realization": {SCALAR}, "grid": 4}}"#)), "grid");
        assert_eq!(field(format!(r#"{{"realization": {SCALAR}, "tol": -1}}"#)), "tol");
        assert_eq!(field(format!(r#"{{"realization": {SCALAR}, "bogus": 1}}"#)), "<spec>");
        assert_eq!(field("{".to_string()), "<input>");
        let unstable = r#"{"A": [[[1.5, 0]]], "B": [[[1, 0]]], "C": [[[1, 0]]]}"#;
        assert_eq!(field(unstable.to_string()), "realization");
        let ragged = r#"{"A": [[[0.5, 0]], [[0, 0], [0, 0]]], "B": [[[1, 0]]], "C": [[[1, 0]]]}"#;
        assert_eq!(field(ragged.to_string()), "realization.A");
    }
}
