//! The JSON scheme exchange file.
//!
//! ```text
//! {
//!   "format": [n, m, p],
//!   "ring": {"kind": "Z2" | "Zp" | "Z2k" | "Q", "p": 3, "k": 20},
//!   "orientation": "brent",
//!   "rank": r,
//!   "triples": [
//!     {"u": [[..]], "v": [[..]], "w": [[..]]},
//!     ...
//!   ]
//! }
//! ```
//!
//! Modular entries are canonical integers, rational entries are strings
//! `"a/b"` (or `"a"` for integers). `w` is `p x n`. A file may declare
//! `"orientation": "standard"`, in which case `w` is read as the `n x p`
//! coefficient matrix of the output and transposed on input. Output is
//! always written in Brent orientation with one triple per line.

use std::path::Path;

use serde_json::{json, Value};

use super::{Format, Scheme, Slot, Triple};
use crate::algebra::{parse_rational, Elem, Mat, Ring};
use crate::error::{Error, Result};

fn ring_json(r: Ring) -> Value {
    match r {
        Ring::Z2 => json!({"kind": "Z2"}),
        Ring::Zp(p) => json!({"kind": "Zp", "p": p}),
        Ring::Z2k(k) => json!({"kind": "Z2k", "k": k}),
        Ring::Q => json!({"kind": "Q"}),
    }
}

pub(crate) fn triple_line(t: &Triple) -> String {
    format!(
        "{{\"u\": {}, \"v\": {}, \"w\": {}}}",
        t.u().to_json_value(),
        t.v().to_json_value(),
        t.w().to_json_value()
    )
}

/// Serializes a scheme in the exchange format. The output is a pure function
/// of the scheme, so equal schemes produce identical bytes.
pub fn scheme_to_json(s: &Scheme) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"format\": {},\n", json!(s.format().dims())));
    out.push_str(&format!("  \"ring\": {},\n", ring_json(s.ring())));
    out.push_str("  \"orientation\": \"brent\",\n");
    out.push_str(&format!("  \"rank\": {},\n", s.rank()));
    out.push_str("  \"triples\": [");
    for (l, t) in s.triples().iter().enumerate() {
        out.push_str(if l == 0 { "\n    " } else { ",\n    " });
        out.push_str(&triple_line(t));
    }
    if s.rank() > 0 {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

pub fn write_scheme(s: &Scheme, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scheme_to_json(s)).map_err(|e| Error::io(path, e))
}

pub fn read_scheme(path: impl AsRef<Path>) -> Result<Scheme> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scheme_from_json(&text)
}

/// Line numbers (1-based) at which each element of the top-level
/// `"triples"` array starts, found by a bracket-depth scan of the text.
fn triple_lines(text: &str) -> Vec<usize> {
    let Some(start) = text.find("\"triples\"") else {
        return Vec::new();
    };
    let mut line = 1 + text[..start].matches('\n').count();
    let mut lines = Vec::new();
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escaped = false;
    for ch in text[start..].chars() {
        if ch == '\n' {
            line += 1;
        }
        if in_str {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_str = false;
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            '[' | '{' => {
                if depth == 1 && ch == '{' {
                    lines.push(line);
                }
                depth += 1;
            }
            ']' | '}' => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            _ => {}
        }
    }
    lines
}

fn parse_ring(v: &Value, line: usize) -> Result<Ring> {
    let err = |msg: &str| Error::Parse {
        line,
        field: "ring".into(),
        message: msg.into(),
    };
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| err("missing string field 'kind'"))?;
    let int = |key: &str| -> Result<u64> {
        v.get(key)
            .and_then(Value::as_u64)
            .ok_or_else(|| err(&format!("ring kind {kind} needs integer field '{key}'")))
    };
    match kind {
        "Z2" => Ok(Ring::Z2),
        "Zp" => {
            let p = int("p")?;
            if p == 2 {
                return Ok(Ring::Z2);
            }
            Ring::zp(p)
        }
        "Z2k" => Ring::z2k(int("k")?.min(u32::MAX as u64) as u32),
        "Q" => Ok(Ring::Q),
        other => Err(Error::UnsupportedRing(other.to_string())),
    }
}

fn parse_entry(ring: Ring, v: &Value) -> std::result::Result<Elem, String> {
    match ring {
        Ring::Q => {
            let q = match v {
                Value::String(s) => parse_rational(s),
                Value::Number(n) => n.as_i64().and_then(|x| parse_rational(&x.to_string())),
                _ => None,
            };
            q.map(Elem::Rat)
                .ok_or_else(|| format!("expected a rational like \"-1/2\", got {v}"))
        }
        _ => {
            let x = v
                .as_u64()
                .ok_or_else(|| format!("expected a non-negative integer, got {v}"))?;
            if (x as u128) >= ring.modulus().unwrap() {
                return Err(format!("{x} is not a canonical residue of {ring}"));
            }
            Ok(Elem::Int(x))
        }
    }
}

fn parse_matrix(
    ring: Ring,
    v: &Value,
    shape: (usize, usize),
    field: &str,
    line: usize,
) -> Result<Mat> {
    let err = |f: String, msg: String| Error::Parse {
        line,
        field: f,
        message: msg,
    };
    let rows = v
        .as_array()
        .ok_or_else(|| err(field.into(), "expected an array of rows".into()))?;
    if rows.len() != shape.0 {
        return Err(err(
            field.into(),
            format!("expected {} rows, found {}", shape.0, rows.len()),
        ));
    }
    let mut m = Mat::zeros(ring, shape.0, shape.1);
    for (r, row) in rows.iter().enumerate() {
        let cells = row
            .as_array()
            .ok_or_else(|| err(format!("{field}[{r}]"), "expected an array".into()))?;
        if cells.len() != shape.1 {
            return Err(err(
                format!("{field}[{r}]"),
                format!("expected {} columns, found {}", shape.1, cells.len()),
            ));
        }
        for (c, cell) in cells.iter().enumerate() {
            let e = parse_entry(ring, cell).map_err(|msg| err(format!("{field}[{r}][{c}]"), msg))?;
            m.set(r, c, &e);
        }
    }
    Ok(m)
}

/// Parses the exchange format. Reading does not verify the scheme.
pub fn scheme_from_json(text: &str) -> Result<Scheme> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        field: "<json>".into(),
        message: e.to_string(),
    })?;
    let top = |field: &str, msg: String| Error::Parse {
        line: 1,
        field: field.into(),
        message: msg,
    };
    let dims = root
        .get("format")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 3)
        .ok_or_else(|| top("format", "expected [n, m, p]".into()))?;
    let mut d = [0usize; 3];
    for (i, x) in dims.iter().enumerate() {
        d[i] = x
            .as_u64()
            .filter(|&x| x >= 1)
            .ok_or_else(|| top("format", format!("dimension {x} is not a positive integer")))?
            as usize;
    }
    let format = Format::from_dims(d)?;
    let ring = parse_ring(
        root.get("ring").ok_or_else(|| top("ring", "missing".into()))?,
        1,
    )?;
    let transposed_w = match root.get("orientation").map(|v| v.as_str()) {
        None | Some(Some("brent")) => false,
        Some(Some("standard")) => true,
        Some(other) => {
            return Err(top(
                "orientation",
                format!("expected \"brent\" or \"standard\", got {other:?}"),
            ))
        }
    };
    let triples_v = root
        .get("triples")
        .and_then(Value::as_array)
        .ok_or_else(|| top("triples", "expected an array".into()))?;
    let lines = triple_lines(text);
    let mut triples = Vec::with_capacity(triples_v.len());
    for (l, t) in triples_v.iter().enumerate() {
        let line = lines.get(l).copied().unwrap_or(0);
        let mut slots = Vec::with_capacity(3);
        for (s, key) in Slot::ALL.into_iter().zip(["u", "v", "w"]) {
            let field = format!("triples[{l}].{key}");
            let v = t.get(key).ok_or_else(|| Error::Parse {
                line,
                field: field.clone(),
                message: "missing".into(),
            })?;
            let mut shape = format.slot_shape(s);
            if s == Slot::W && transposed_w {
                shape = (shape.1, shape.0);
            }
            let mut m = parse_matrix(ring, v, shape, &field, line)?;
            if s == Slot::W && transposed_w {
                m = m.transpose();
            }
            slots.push(m);
        }
        let w = slots.pop().unwrap();
        let v = slots.pop().unwrap();
        let u = slots.pop().unwrap();
        triples.push(Triple::new(u, v, w));
    }
    let rank = root
        .get("rank")
        .and_then(Value::as_u64)
        .ok_or_else(|| top("rank", "expected an integer".into()))?;
    if rank as usize != triples.len() {
        return Err(top(
            "rank",
            format!("declared rank {rank} but {} triples present", triples.len()),
        ));
    }
    Scheme::new(format, ring, triples)
}
