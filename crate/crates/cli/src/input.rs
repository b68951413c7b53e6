//! Input parsing and value rendering shared by the subcommands.
//!
//! Matrices arrive as JSON `[[a, b], [c, d]]` where each entry is either a
//! JSON number or a decimal string like "0.3333333333333333"; strings let
//! callers pin exact decimal literals without worrying about how their JSON
//! writer prints floats. Exponents that come out infinite (p = 2K/(K-1) at
//! K = 1) render as the string "inf" because JSON has no float infinity.

use beltramikit::{fieldlab::Geometry, Mat2};
use serde_json::{json, Map, Value};
use std::fs;
use std::path::Path;

use crate::CliError;

/// Reads a whole file, mapping I/O problems to the input exit code.
pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Parses the file as JSON with a path-tagged error.
pub fn parse_json_file(path: &Path) -> Result<Value, CliError> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{} is not valid JSON: {e}", path.display())))
}

/// One matrix entry: number, or decimal string.
fn entry_to_f64(v: &Value, at: &str) -> Result<f64, CliError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| CliError::input(format!("{at}: number out of f64 range"))),
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| CliError::input(format!("{at}: string {s:?} is not a decimal number"))),
        other => Err(CliError::input(format!(
            "{at}: expected a number or decimal string, got {other}"
        ))),
    }
}

/// `[[a, b], [c, d]]` with number-or-string entries.
pub fn value_to_mat(v: &Value, name: &str) -> Result<Mat2, CliError> {
    let rows = v
        .as_array()
        .filter(|r| r.len() == 2)
        .ok_or_else(|| CliError::input(format!("{name}: expected a 2x2 array of arrays")))?;
    let mut e = [[0.0f64; 2]; 2];
    for (i, row) in rows.iter().enumerate() {
        let cols = row.as_array().filter(|c| c.len() == 2).ok_or_else(|| {
            CliError::input(format!("{name}: row {i} is not an array of two entries"))
        })?;
        for (j, cell) in cols.iter().enumerate() {
            e[i][j] = entry_to_f64(cell, &format!("{name}[{i}][{j}]"))?;
        }
    }
    let m = Mat2::new(e[0][0], e[0][1], e[1][0], e[1][1]);
    if !m.a11.is_finite() || !m.a12.is_finite() || !m.a21.is_finite() || !m.a22.is_finite() {
        return Err(CliError::input(format!("{name}: entries must be finite")));
    }
    Ok(m)
}

/// Parses an inline matrix argument, which is the same JSON fragment.
pub fn inline_mat(text: &str, name: &str) -> Result<Mat2, CliError> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("{name}: not valid JSON: {e}")))?;
    value_to_mat(&v, name)
}

/// Pulls `sigma1`/`sigma2` out of a JSON object.
pub fn pair_from_value(v: &Value) -> Result<(Mat2, Mat2), CliError> {
    let obj = v
        .as_object()
        .ok_or_else(|| CliError::input("expected a JSON object with sigma1 and sigma2".into()))?;
    let s1 = obj
        .get("sigma1")
        .ok_or_else(|| CliError::input("missing field sigma1".into()))?;
    let s2 = obj
        .get("sigma2")
        .ok_or_else(|| CliError::input("missing field sigma2".into()))?;
    Ok((value_to_mat(s1, "sigma1")?, value_to_mat(s2, "sigma2")?))
}

/// Everything `solve` needs, parsed from its JSON config.
pub struct SolveConfig {
    pub sigma1: Mat2,
    pub sigma2: Mat2,
    pub geometry: Geometry,
    pub v: [f64; 2],
    pub sizes: Vec<usize>,
    pub exponents: Vec<f64>,
    pub dump_fields: bool,
}

pub fn parse_solve_config(v: &Value) -> Result<SolveConfig, CliError> {
    let (sigma1, sigma2) = pair_from_value(v)?;
    let obj = v.as_object().expect("checked by pair_from_value");
    let geometry: Geometry = serde_json::from_value(
        obj.get("geometry")
            .ok_or_else(|| CliError::input("missing field geometry".into()))?
            .clone(),
    )
    .map_err(|e| CliError::input(format!("geometry: {e}")))?;
    let vraw = obj
        .get("v")
        .ok_or_else(|| CliError::input("missing field v (boundary direction)".into()))?;
    let varr = vraw
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| CliError::input("v must be an array of two numbers".into()))?;
    let v = [
        entry_to_f64(&varr[0], "v[0]")?,
        entry_to_f64(&varr[1], "v[1]")?,
    ];
    let sizes = match obj.get("sizes") {
        Some(Value::Array(a)) if !a.is_empty() => a
            .iter()
            .map(|x| {
                x.as_u64()
                    .map(|n| n as usize)
                    .ok_or_else(|| CliError::input("sizes entries must be positive integers".into()))
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(CliError::input("sizes must be a non-empty array".into())),
        None => vec![64],
    };
    let exponents = match obj.get("exponents") {
        Some(Value::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, x)| entry_to_f64(x, &format!("exponents[{i}]")))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(CliError::input("exponents must be an array".into())),
        None => vec![2.0, 4.0],
    };
    if exponents.iter().any(|p| !p.is_finite() || *p < 1.0) {
        return Err(CliError::input("exponents must be finite and >= 1".into()));
    }
    let dump_fields = match obj.get("dump_fields") {
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(CliError::input("dump_fields must be a boolean".into())),
        None => true,
    };
    Ok(SolveConfig {
        sigma1,
        sigma2,
        geometry,
        v,
        sizes,
        exponents,
        dump_fields,
    })
}

// Value rendering --------------------------------------------------------

/// Matrix as a JSON array of rows.
pub fn mat_json(m: &Mat2) -> Value {
    json!([[m.a11, m.a12], [m.a21, m.a22]])
}

/// Finite exponents stay numbers; infinity becomes the string "inf".
pub fn exponent_json(p: f64) -> Value {
    if p.is_finite() {
        json!(p)
    } else {
        Value::String("inf".into())
    }
}

/// 17 significant digits: enough to reconstruct any f64 exactly.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "inf".into()
    }
}

/// Quotes a CSV cell if it contains a comma, quote, or newline.
pub fn csv_escape(cell: &str) -> String {
    if cell.contains(',') || cell.contains('"') || cell.contains('\n') {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Flattens a JSON tree into (dotted.path, scalar-as-text) rows for the
/// key/value CSV rendering of a report.
pub fn flatten_json(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&path, child, rows);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten_json(&format!("{prefix}[{i}]"), child, rows);
            }
        }
        Value::Null => rows.push((prefix.to_string(), "null".into())),
        Value::Bool(b) => rows.push((prefix.to_string(), b.to_string())),
        Value::Number(n) => rows.push((prefix.to_string(), n.to_string())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
    }
}

/// Ordered JSON object builder: serde_json's default map sorts keys, which
/// is deterministic, and that is all the manifest needs. This helper just
/// trims the call-site noise.
pub fn obj(pairs: Vec<(&str, Value)>) -> Value {
    let mut map = Map::new();
    for (k, v) in pairs {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}
