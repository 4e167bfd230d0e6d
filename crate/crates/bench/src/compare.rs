//! Percentage-point differences between two methods in benchmark summaries.

use crate::config::Method;
use crate::error::{BenchError, Result};
use crate::report::{num, Table};

/// Windows at or above this count as medium-long.
pub const LONG_WINDOW_NS: f64 = 2400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub tm_ns: Vec<f64>,
    /// `100 * (acc_a - acc_b)` per window.
    pub diff_pp: Vec<f64>,
    pub mean_all: f64,
    pub mean_long: f64,
}

fn accuracy_by_tm(summary: &Table, method: Method) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for i in 0..summary.rows.len() {
        if summary.get(i, "method") == Some(method.name()) {
            out.push((summary.get_f64(i, "tm_ns")?, summary.get_f64(i, "global_mean")?));
        }
    }
    if out.is_empty() {
        return Err(BenchError::Data(format!("summary has no rows for {method}")));
    }
    Ok(out)
}

/// Differences `a - b` on one summary table. Both methods must cover the same windows.
pub fn compare_methods(summary: &Table, a: Method, b: Method) -> Result<Comparison> {
    let ra = accuracy_by_tm(summary, a)?;
    let rb = accuracy_by_tm(summary, b)?;
    if ra.iter().map(|r| r.0).ne(rb.iter().map(|r| r.0)) {
        return Err(BenchError::Data(format!("{a} and {b} were run on different windows")));
    }
    let tm_ns: Vec<f64> = ra.iter().map(|r| r.0).collect();
    let diff_pp: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| 100.0 * (x.1 - y.1)).collect();
    let mean = |v: Vec<f64>| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(Comparison {
        mean_all: mean(diff_pp.clone()),
        mean_long: mean(
            tm_ns
                .iter()
                .zip(&diff_pp)
                .filter(|(t, _)| **t >= LONG_WINDOW_NS)
                .map(|(_, d)| *d)
                .collect(),
        ),
        tm_ns,
        diff_pp,
    })
}

/// One block of rows per report, then (with two or more reports) a flag
/// telling whether the last report's mean advantage is at least the first's.
pub fn compare_reports(named: &[(String, Table)], a: Method, b: Method) -> Result<Table> {
    if named.is_empty() {
        return Err(BenchError::Usage("no reports to compare".into()));
    }
    let results: Vec<Comparison> = named.iter().map(|(_, t)| compare_methods(t, a, b)).collect::<Result<_>>()?;
    if results.iter().any(|c| c.tm_ns != results[0].tm_ns) {
        return Err(BenchError::Data("reports use different T_m grids".into()));
    }
    let mut t = Table::new(["report", "row", "diff_pp"]);
    for ((name, _), c) in named.iter().zip(&results) {
        for (tm, d) in c.tm_ns.iter().zip(&c.diff_pp) {
            t.push(vec![name.clone(), format!("tm_{tm}"), num(*d)]);
        }
        t.push(vec![name.clone(), "mean_all".into(), num(c.mean_all)]);
        t.push(vec![name.clone(), format!("mean_ge_{LONG_WINDOW_NS}"), num(c.mean_long)]);
    }
    if results.len() >= 2 {
        let grows = results[results.len() - 1].mean_all >= results[0].mean_all;
        t.push(vec!["all".into(), "last_mean_ge_first_mean".into(), grows.to_string()]);
    }
    Ok(t)
}
