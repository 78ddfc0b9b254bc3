//! Per-n convergence records shared by every experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u32,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub summary: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub fingerprint: String,
    pub params: BTreeMap<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub verdict: Verdict,
}

impl ConvergenceReport {
    pub fn new(experiment: &str, fingerprint: &str, columns: &[&str]) -> Self {
        ConvergenceReport {
            experiment: experiment.to_string(),
            fingerprint: fingerprint.to_string(),
            params: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            verdict: Verdict {
                passed: true,
                summary: String::new(),
            },
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Appends a row; `values` must have one entry per column.
    pub fn push(&mut self, n: u32, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(ReportRow { n, values });
    }

    pub fn set_verdict(&mut self, passed: bool, summary: impl Into<String>) {
        self.verdict = Verdict {
            passed,
            summary: summary.into(),
        };
    }

    /// Values of one named column, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[idx]).collect())
    }

    pub fn ns(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite-or-null numbers")
    }

    /// CSV with a header row, `.` decimals in 17 significant digits and `\n` endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{}", row.n);
            for v in &row.values {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Slope of `log |values|` against `n` over the trailing half of the rows (at least 3).
pub fn trailing_log_slope(ns: &[u32], values: &[f64]) -> f64 {
    let take = (ns.len() / 2).max(3).min(ns.len());
    let start = ns.len() - take;
    let xs: Vec<f64> = ns[start..].iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = values[start..]
        .iter()
        .map(|v| v.abs().max(1e-300).ln())
        .collect();
    ls_slope(&xs, &ys)
}

/// Slope of `values` against `n` over the trailing half of the rows (at least 3).
pub fn trailing_slope(ns: &[u32], values: &[f64]) -> f64 {
    let take = (ns.len() / 2).max(3).min(ns.len());
    let start = ns.len() - take;
    let xs: Vec<f64> = ns[start..].iter().map(|&n| n as f64).collect();
    ls_slope(&xs, &values[start..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut r = ConvergenceReport::new("demo", "fp", &["value", "error"]);
        r.push(4, vec![0.5, 0.25]);
        r.push(5, vec![1.0, 0.0]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,value,error");
        assert_eq!(lines[1], "4,5.0000000000000000e-1,2.5000000000000000e-1");
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }

    #[test]
    fn json_round_trip() {
        let mut r = ConvergenceReport::new("demo", "fp", &["value"]).param("rho", 1.0);
        r.push(4, vec![0.1]);
        r.set_verdict(false, "nope");
        let back: ConvergenceReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.column("value"), Some(vec![0.1]));
        assert_eq!(back.column("missing"), None);
    }

    #[test]
    fn slopes() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        assert!((ls_slope(&xs, &ys) - 2.0).abs() < 1e-14);
        let ns = [1, 2, 3, 4, 5, 6];
        let vals: Vec<f64> = ns.iter().map(|&n| (0.3 * n as f64).exp()).collect();
        assert!((trailing_log_slope(&ns, &vals) - 0.3).abs() < 1e-12);
    }
}
