//! Canonical JSON, flattened CSV and plain-text renderings of run reports.

use std::fmt::Write as _;

use serde_json::{Number, Value};
use sha2::{Digest, Sha256};

use super::run::{CheckStatus, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Significant digits kept by the canonical float format.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `printf("%.12g", x)` for finite `x`.
pub fn format_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds every float to the canonical precision. Integral values become
/// JSON integers so that a parse of the emitted text reproduces the value
/// exactly.
pub fn quantize(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let rounded: f64 = format_g12(x).parse().expect("canonical float parses");
            if rounded.fract() == 0.0 && rounded.abs() < 9.0e15 {
                Value::Number(Number::from(rounded as i64))
            } else {
                Number::from_f64(rounded).map(Value::Number).unwrap_or(Value::Null)
            }
        }
        Value::Array(items) => Value::Array(items.into_iter().map(quantize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, quantize(v))).collect()),
        other => other,
    }
}

/// Writes `value` with sorted keys, two-space indentation and `%.12g` floats.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => write!(out, "{i}").unwrap(),
            (None, Some(u)) => write!(out, "{u}").unwrap(),
            _ => out.push_str(&format_g12(n.as_f64().expect("float"))),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string escapes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                indent(out, depth + 1);
                out.push_str(&serde_json::to_string(key).expect("string escapes"));
                out.push_str(": ");
                write_value(out, &map[key], depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push('}');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

pub fn emit_json(reports: &[RunReport]) -> String {
    canonical_json(&serde_json::to_value(reports).expect("reports serialize"))
}

/// Canonical JSON with every timestamp zeroed; the basis of determinism
/// comparisons.
pub fn emit_json_without_timestamps(reports: &[RunReport]) -> String {
    let stripped: Vec<RunReport> = reports.iter().cloned().map(|r| RunReport { timestamp: 0, ..r }).collect();
    emit_json(&stripped)
}

/// SHA-256 of the timestamp-free canonical JSON, in hex.
pub fn fingerprint(reports: &[RunReport]) -> String {
    let digest = Sha256::digest(emit_json_without_timestamps(reports).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses canonical JSON back into reports.
pub fn parse_json(text: &str) -> serde_json::Result<Vec<RunReport>> {
    serde_json::from_str(text)
}

fn cell(value: Option<&Value>) -> String {
    match value {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => match n.as_i64() {
            Some(i) => i.to_string(),
            None => format_g12(n.as_f64().unwrap_or(f64::NAN)),
        },
        Some(Value::Array(items)) => {
            format!("({})", items.iter().map(|v| cell(Some(v))).collect::<Vec<_>>().join(","))
        }
        Some(other) => other.to_string(),
    }
}

/// Table layout per scenario kind: certificate key holding the rows, then
/// the columns after `scenario_id`.
fn table_layout(kind: &str) -> (&'static str, &'static [&'static str]) {
    match kind {
        "hap" => ("table", &["y", "K_radius", "L_radius", "error"]),
        "comparison" => (
            "cells",
            &["y", "K_radius", "L_radius", "trace_T", "rank_P", "card_X", "card_Y", "lhs", "B_used", "chain_ok", "final_ok"],
        ),
        "density" => ("rows", &["y", "K_radius", "count", "measure", "ratio"]),
        "sampling_bound" => ("trials", &["trial", "K_radius", "U_radius", "lhs", "rhs", "C", "C0", "holds"]),
        _ => ("bounds", &["A", "B", "dual_error", "bessel_B_dual", "tight"]),
    }
}

/// One CSV section per scenario kind present, separated by a blank line.
pub fn emit_csv(reports: &[RunReport]) -> String {
    let mut kinds: Vec<&str> = reports.iter().map(|r| r.kind.as_str()).collect();
    kinds.dedup();
    kinds.sort();
    kinds.dedup();
    let mut sections = Vec::new();
    for kind in kinds {
        let (rows_key, columns) = table_layout(kind);
        let mut writer = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("scenario_id").chain(columns.iter().copied()).collect();
        writer.write_record(&header).expect("in-memory write");
        for report in reports.iter().filter(|r| r.kind.as_str() == kind) {
            let rows: Vec<&Value> = match report.certificate.get(rows_key) {
                Some(Value::Array(rows)) => rows.iter().collect(),
                Some(row @ Value::Object(_)) => vec![row],
                _ => Vec::new(),
            };
            for row in rows {
                let record: Vec<String> = std::iter::once(report.scenario_id.clone())
                    .chain(columns.iter().map(|c| cell(row.get(*c))))
                    .collect();
                writer.write_record(&record).expect("in-memory write");
            }
        }
        sections.push(String::from_utf8(writer.into_inner().expect("flush")).expect("utf8"));
    }
    sections.join("\n")
}

pub fn emit_text(reports: &[RunReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let verdict = match (&r.error, r.summary.fail_total) {
            (Some(_), _) => "ERROR",
            (None, 0) => "PASS",
            (None, _) => "FAIL",
        };
        writeln!(
            out,
            "{verdict:5} {} [{}] pass {} fail {} boundary {} of {}",
            r.scenario_id,
            r.kind.as_str(),
            r.summary.pass_total,
            r.summary.fail_total,
            r.summary.boundary_total,
            r.summary.cell_count
        )
        .unwrap();
        if let Some(e) = &r.error {
            writeln!(out, "      error: {e}").unwrap();
        }
        for line in headline(r) {
            writeln!(out, "      {line}").unwrap();
        }
        for check in r.checks.iter().filter(|c| c.status == CheckStatus::Fail).take(5) {
            writeln!(out, "      failed {}: {}", check.name, check.detail.as_deref().unwrap_or("")).unwrap();
        }
    }
    writeln!(out, "fingerprint {}", fingerprint(reports)).unwrap();
    out
}

/// Key numbers worth a glance, per kind.
fn headline(r: &RunReport) -> Vec<String> {
    let c = &r.certificate;
    let num = |k: &str| cell(c.get(k));
    match r.kind.as_str() {
        "hap" => vec![format!(
            "chosen L radius {}, worst error {}, epsilon {}, bound {}",
            num("chosen_L_radius"),
            num("worst_error"),
            num("epsilon"),
            num("theoretical_bound")
        )],
        "comparison" => {
            let hap = c.get("hap").map(|h| cell(h.get("chosen_L_radius"))).unwrap_or_default();
            vec![format!("L radius {hap}, {} certificates", c.get("cells").and_then(Value::as_array).map_or(0, Vec::len))]
        }
        "frame_analysis" => match c.get("bounds") {
            Some(b) => vec![format!("A {}, B {}, dual error {}", cell(b.get("A")), cell(b.get("B")), cell(b.get("dual_error")))],
            None => Vec::new(),
        },
        "density" => c
            .get("summary")
            .and_then(Value::as_array)
            .map(|rows| {
                rows.iter()
                    .map(|s| {
                        format!("K radius {}: ratio in [{}, {}]", cell(s.get("K_radius")), cell(s.get("min_ratio")), cell(s.get("max_ratio")))
                    })
                    .collect()
            })
            .unwrap_or_default(),
        _ => Vec::new(),
    }
}

pub fn emit(reports: &[RunReport], format: Format) -> String {
    match format {
        Format::Json => emit_json(reports),
        Format::Csv => emit_csv(reports),
        Format::Text => emit_text(reports),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn g12_formatting() {
        assert_eq!(format_g12(0.5), "0.5");
        assert_eq!(format_g12(2.0), "2");
        assert_eq!(format_g12(-0.0), "0");
        assert_eq!(format_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g12(1e-5), "1e-05");
        assert_eq!(format_g12(123456.0), "123456");
        assert_eq!(format_g12(1e12), "1e+12");
        assert_eq!(format_g12(999999999999.5), "1e+12");
        assert_eq!(format_g12(0.0001), "0.0001");
        assert_eq!(format_g12(-2.5e-300), "-2.5e-300");
        assert_eq!(format_g12(6.02214076e23), "6.02214076e+23");
    }

    #[test]
    fn g12_matches_c_on_samples() {
        // Spot checks against values produced by C printf("%.12g").
        let cases = [
            (std::f64::consts::PI, "3.14159265359"),
            (1.0e-4 / 3.0, "3.33333333333e-05"),
            (16.000000000000004, "16"),
            (1234567890123.0, "1.23456789012e+12"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g12(x), want);
        }
    }

    #[test]
    fn empty_list_is_brackets() {
        assert_eq!(emit_json(&[]).trim(), "[]");
    }

    #[test]
    fn canonical_sorts_keys() {
        let v = json!({"b": 1, "a": [0.5, {"d": true, "c": null}], "e": {}});
        let text = canonical_json(&v);
        let a = text.find("\"a\"").unwrap();
        let b = text.find("\"b\"").unwrap();
        let c = text.find("\"c\"").unwrap();
        let d = text.find("\"d\"").unwrap();
        assert!(a < b && c < d);
        assert!(text.contains("0.5"));
        assert!(text.contains("\"e\": {}"));
    }

    #[test]
    fn quantize_is_idempotent_and_stable() {
        let v = json!({"x": 0.1 + 0.2, "y": 4.000000000000001, "z": [1e-20, 12.5]});
        let q = quantize(v);
        assert_eq!(q["x"], json!(0.3));
        assert_eq!(q["y"], json!(4));
        assert_eq!(quantize(q.clone()), q);
        let back: Value = serde_json::from_str(&canonical_json(&q)).unwrap();
        assert_eq!(back, q);
    }
}
