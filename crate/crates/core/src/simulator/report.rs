//! JSON and Markdown renderings of a [`SimulationReport`].

use std::fmt::Write;
use std::str::FromStr;

use super::{DigestMatch, QueryComparison, SideOutcome, SimulationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown format '{other}' (expected json or markdown)")),
        }
    }
}

/// Raw SQL appears only in JSON, or in Markdown when `show_sql` is set.
pub fn render_report(report: &SimulationReport, format: ReportFormat, show_sql: bool) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => markdown(report, show_sql),
    }
}

pub fn parse_report_json(s: &str) -> Result<SimulationReport, serde_json::Error> {
    serde_json::from_str(s)
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn ms(x: f64) -> String {
    format!("{x:.3}")
}

fn side_result(s: &SideOutcome) -> String {
    match (&s.digest, &s.error) {
        (_, Some(e)) => e.code.clone(),
        (Some(d), None) => format!("`{d}`"),
        (None, None) => "-".into(),
    }
}

fn sql_block(out: &mut String, comparisons: &[&QueryComparison]) {
    if comparisons.is_empty() {
        return;
    }
    out.push_str("\n<details><summary>SQL</summary>\n\n");
    for c in comparisons {
        let _ = writeln!(out, "`{}`\n\n```sql\n{}\n```\n", c.query_id, c.sql);
    }
    out.push_str("</details>\n");
}

fn markdown(r: &SimulationReport, show_sql: bool) -> String {
    let m = &r.metadata;
    let s = &r.summary;
    let mut out = String::new();
    out.push_str("# Simulation report\n\n");
    let _ = writeln!(out, "- benchmark: `{}`", m.benchmark_id);
    let _ = writeln!(out, "- control: `{}`", m.control);
    let _ = writeln!(out, "- test: `{}`", m.test);
    let _ = writeln!(out, "- parallelism: {}, repeat: {}", m.run.parallelism, m.repeat);
    let _ = writeln!(
        out,
        "- thresholds: ratio > {}, delta >= {} ms, scan diff > {}",
        m.thresholds.perf_ratio, m.thresholds.min_delta_ms, m.thresholds.scan_diff
    );
    let _ = writeln!(out, "- generated: {}", m.run.generated_at);

    out.push_str("\n## Summary\n\n");
    out.push_str("| total | matched | mismatched | skipped_nondet | errored | slower | scan_regressed |\n");
    out.push_str("|---:|---:|---:|---:|---:|---:|---:|\n");
    let _ = writeln!(
        out,
        "| {} | {} | {} | {} | {} | {} | {} |",
        s.total, s.matched, s.mismatched, s.skipped_nondet, s.errored, s.slower, s.scan_regressed
    );

    out.push_str("\n## Slower queries\n\n");
    if r.slower_list.is_empty() {
        out.push_str("None.\n");
    } else {
        out.push_str("| query_id | signature | ratio | control ms | test ms | delta ms |\n");
        out.push_str("|---|---|---:|---:|---:|---:|\n");
        for e in &r.slower_list {
            let _ = writeln!(
                out,
                "| {} | `{}` | {:.3} | {} | {} | {} |",
                cell(&e.query_id),
                cell(&e.signature),
                e.perf_ratio,
                ms(e.control_wall_ms),
                ms(e.test_wall_ms),
                ms(e.delta_ms)
            );
        }
        if show_sql {
            let listed: Vec<&QueryComparison> =
                r.slower_list.iter().filter_map(|e| r.comparison(&e.query_id)).collect();
            sql_block(&mut out, &listed);
        }
    }

    out.push_str("\n## Result mismatches\n\n");
    let bad: Vec<&QueryComparison> = r
        .comparisons
        .iter()
        .filter(|c| matches!(c.digest_match, DigestMatch::Mismatch | DigestMatch::Error))
        .collect();
    if bad.is_empty() {
        out.push_str("None.\n");
    } else {
        out.push_str("| query_id | signature | status | control | test |\n");
        out.push_str("|---|---|---|---|---|\n");
        for c in &bad {
            let _ = writeln!(
                out,
                "| {} | `{}` | {} | {} | {} |",
                cell(&c.query_id),
                cell(&c.signature),
                c.digest_match.name(),
                side_result(&c.control),
                side_result(&c.test)
            );
        }
        if show_sql {
            sql_block(&mut out, &bad);
        }
    }

    out.push_str("\n## Scan regressions\n\n");
    let scans: Vec<&QueryComparison> = r.comparisons.iter().filter(|c| c.scan_regressed).collect();
    if scans.is_empty() {
        out.push_str("None.\n");
    } else {
        out.push_str("| query_id | signature | control partitions | test partitions | diff |\n");
        out.push_str("|---|---|---:|---:|---:|\n");
        for c in &scans {
            let _ = writeln!(
                out,
                "| {} | `{}` | {} | {} | {:+} |",
                cell(&c.query_id),
                cell(&c.signature),
                c.control.partitions_scanned,
                c.test.partitions_scanned,
                c.scan_diff
            );
        }
    }

    out.push_str("\n## Appendix: non-determinism\n\n");
    let labelled: Vec<&QueryComparison> = r.comparisons.iter().filter(|c| !c.labels.is_empty()).collect();
    if labelled.is_empty() {
        out.push_str("No query carries a non-determinism label.\n");
    } else {
        out.push_str("| query_id | category | construct | location | speculative | digests differed |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        for c in labelled {
            for l in &c.labels {
                let _ = writeln!(
                    out,
                    "| {} | {} | `{}` | {} | {} | {} |",
                    cell(&c.query_id),
                    l.category.name(),
                    cell(&l.construct),
                    cell(&l.location),
                    if l.speculative { "yes" } else { "no" },
                    if c.nondet_mismatch { "yes" } else { "no" }
                );
            }
        }
    }
    out
}
