//! Fixed significant-figure number formatting for diff-stable reports.

/// Significant figures used in every emitted report number.
pub const REPORT_SIG_FIGS: usize = 6;

/// Rounds `x` to `REPORT_SIG_FIGS` significant figures.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", REPORT_SIG_FIGS - 1, x).parse().unwrap_or(x)
}

/// Formats `x` with `REPORT_SIG_FIGS` significant figures in scientific notation.
pub fn sig(x: f64) -> String {
    format!("{:.*e}", REPORT_SIG_FIGS - 1, x)
}

/// Rounds every floating-point number inside a JSON tree.
pub fn round_json(value: &mut serde_json::Value) {
    use serde_json::Value;
    match value {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_figures() {
        assert_eq!(sig(0.044_652_377), "4.46524e-2");
        assert_eq!(round_sig(61.423_717_99), 61.4237);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn json_numbers_are_rounded() {
        let mut v = serde_json::json!({"a": [1.234567891, 7], "b": {"c": 2.0e-9 / 3.0}});
        round_json(&mut v);
        assert_eq!(v["a"][0], 1.23457);
        assert_eq!(v["a"][1], 7);
        assert_eq!(v["b"]["c"], 6.66667e-10);
    }
}
