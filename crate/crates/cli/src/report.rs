//! Comparison tables over report records.

use std::fmt::Write as _;

use crate::files::ReportRecord;

fn sorted(records: &[ReportRecord]) -> Vec<&ReportRecord> {
    let mut v: Vec<_> = records.iter().collect();
    v.sort_by(|a, b| a.prototype.cmp(&b.prototype));
    v
}

fn cells(r: &ReportRecord) -> [String; 4] {
    [
        r.prototype.clone(),
        format!("{:.3}", r.predicted_dynamic),
        r.measured_dynamic
            .map(|m| format!("{m:.3}"))
            .unwrap_or_default(),
        r.rel_error
            .map(|e| format!("{:.3}", e * 100.0))
            .unwrap_or_default(),
    ]
}

const HEADER: [&str; 4] = ["Prototype", "Predicted", "Measured", "Error%"];

/// Fixed-width text table sorted by prototype name.
pub fn table(records: &[ReportRecord]) -> String {
    let rows: Vec<[String; 4]> = sorted(records).into_iter().map(cells).collect();
    let mut widths = HEADER.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: [&str; 4]| {
        let mut s = format!("{:<w$}", cols[0], w = widths[0]);
        for (c, w) in cols[1..].iter().zip(&widths[1..]) {
            let _ = write!(s, " | {c:>w$}", w = *w);
        }
        s.trim_end_matches([' ', '|']).to_string() + "\n"
    };
    let mut out = line(HEADER);
    out.push_str(
        &widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("-+-"),
    );
    out.push('\n');
    for r in &rows {
        out.push_str(&line([&r[0], &r[1], &r[2], &r[3]]));
    }
    out
}

/// Same rows as [`table`], as CSV.
pub fn csv(records: &[ReportRecord]) -> String {
    let mut out = String::from("prototype,predicted,measured,error_pct\n");
    for r in sorted(records) {
        let [p, pred, meas, err] = cells(r);
        let _ = writeln!(out, "{p},{pred},{meas},{err}");
    }
    out
}

/// Human-readable summary of one record.
pub fn describe(r: &ReportRecord) -> String {
    let mut s = format!(
        "{}: predicted dynamic {:.4} W (std {})",
        r.prototype, r.predicted_dynamic, r.predicted_std
    );
    if let Some(st) = r.predicted_static {
        let _ = write!(s, ", static {st:.4} W");
    }
    if let (Some(m), Some(e)) = (r.measured_dynamic, r.rel_error) {
        let _ = write!(s, "; measured {m} W, error {:.3}%", e * 100.0);
    }
    if let Some(x) = r.sample {
        let _ = write!(s, "; sample {x:.4} W");
    }
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn rec(name: &str, pred: f64, meas: Option<f64>) -> ReportRecord {
        ReportRecord {
            schema: 1,
            prototype: name.into(),
            predicted_dynamic: pred,
            predicted_std: 0.0,
            breakdown: BTreeMap::new(),
            predicted_static: None,
            measured_dynamic: meas,
            abs_error: meas.map(|m| (pred - m).abs()),
            rel_error: meas.map(|m| (pred - m).abs() / m),
            sample: None,
        }
    }

    #[test]
    fn sorted_table_with_blank_cells() {
        let t = table(&[rec("zeta", 1.0, None), rec("alpha", 7.4978, Some(7.505))]);
        let lines: Vec<_> = t.lines().collect();
        assert!(lines[0].starts_with("Prototype"));
        assert!(lines[2].starts_with("alpha"));
        assert!(lines[2].contains("7.498"));
        assert!(lines[3].starts_with("zeta "));
        assert!(lines[3].ends_with("1.000"));
        assert_eq!(
            csv(&[rec("z", 1.0, None)]),
            "prototype,predicted,measured,error_pct\nz,1.000,,\n"
        );
    }
}
