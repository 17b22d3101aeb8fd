use std::fmt::Write;

use super::{DepthBucketReport, EvalReport};
use crate::util::round2;

/// Plain-text table: one row per target plus an overall row.
pub fn render_report_table(title: &str, report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<16} {:>6} {:>10} {:>10} {:>10} {:>8}",
        "target", "n", "F1-against", "F1-favor", "F1-none", "F1-avg"
    );
    let rows = report
        .per_target
        .iter()
        .map(|(k, v)| (k.as_str(), v))
        .chain(std::iter::once(("overall", &report.overall)));
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>10.2} {:>10.2} {:>10.2} {:>8.2}",
            name,
            s.n,
            round2(s.f1_against),
            round2(s.f1_favor),
            round2(s.f1_none),
            round2(s.f1_avg)
        );
    }
    out
}

/// Plain-text depth table: F1-avg and population per bucket.
pub fn render_depth_table(report: &DepthBucketReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:>6} {:>8}", "depth", "n", "F1-avg");
    for b in &report.buckets {
        let _ = writeln!(out, "{:<8} {:>6} {:>8.2}", b.label(), b.scores.n, round2(b.scores.f1_avg));
    }
    out
}
