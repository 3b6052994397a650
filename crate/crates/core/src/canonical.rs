//! Canonical JSON: sorted object keys, floats in C `%.12e` form, integers
//! verbatim, non-finite floats as `null`.

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// `%.12e` with a signed, at-least-two-digit exponent (`1.000000000000e+00`).
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                match n.as_f64() {
                    Some(f) if f.is_finite() => out.push_str(&format_float(f)),
                    _ => out.push_str("null"),
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
    }
}

/// Canonical text of a JSON value.
pub fn to_canonical_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

/// Serializes any value canonically.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(to_canonical_string(&serde_json::to_value(value)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn float_format() {
        assert_eq!(format_float(1.0), "1.000000000000e+00");
        assert_eq!(format_float(-0.00125), "-1.250000000000e-03");
        assert_eq!(format_float(6.02e123), "6.020000000000e+123");
        assert_eq!(format_float(0.0), "0.000000000000e+00");
    }

    #[test]
    fn sorted_and_typed() {
        let v = json!({"b": 1, "a": [0.5, null, true], "c": {"z": "q\"", "y": f64::NAN}});
        assert_eq!(to_canonical_string(&v), r#"{"a":[5.000000000000e-01,null,true],"b":1,"c":{"y":null,"z":"q\""}}"#);
    }

    #[test]
    fn nan_serializes_as_null() {
        #[derive(Serialize)]
        struct S {
            v: f64,
        }
        assert_eq!(canonical_json(&S { v: f64::NAN }).unwrap(), r#"{"v":null}"#);
    }
}
