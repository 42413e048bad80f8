use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{HarnessError, RunReport, TaskResult};
use crate::task::{render_grid_ascii, Grid};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

/// Expected, predicted and a cell mask (`x` where they differ).
pub fn render_diff(expected: &Grid, got: &Grid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "expected:\n{}", render_grid_ascii(expected).trim_end());
    let _ = writeln!(out, "predicted:\n{}", render_grid_ascii(got).trim_end());
    if expected.dims() == got.dims() {
        out.push_str("diff:\n");
        for r in 0..expected.rows() {
            let row: Vec<&str> = (0..expected.cols())
                .map(|c| if expected.get(r, c) == got.get(r, c) { "." } else { "x" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    } else {
        let _ = writeln!(
            out,
            "diff: size {}x{} vs {}x{}",
            expected.rows(),
            expected.cols(),
            got.rows(),
            got.cols()
        );
    }
    out
}

fn failure_section(result: &TaskResult) -> String {
    let mut out = format!("### {}\n\n", result.task_id);
    if let Some(e) = &result.error {
        let _ = writeln!(out, "error: {e}\n");
    }
    for (i, pair) in result.test_pairs.iter().enumerate() {
        if pair.matched.is_some() {
            continue;
        }
        let _ = writeln!(out, "test pair {i}:\n");
        out.push_str("```\n");
        match (&pair.truth, pair.predictions.first()) {
            (Some(truth), Some(got)) => out.push_str(&render_diff(truth, got)),
            (Some(truth), None) => {
                let _ = writeln!(
                    out,
                    "expected:\n{}\npredicted: none",
                    render_grid_ascii(truth).trim_end()
                );
            }
            (None, _) => out.push_str("no ground truth\n"),
        }
        out.push_str("```\n\n");
    }
    out
}

pub fn render_markdown(report: &RunReport) -> String {
    let mut out = String::from("# Evaluation report\n\n");
    let _ = writeln!(out, "solved {}/{}\n", report.solved, report.total);
    let _ = writeln!(
        out,
        "flow: {}, model: {}, attempts: {}, seed: {}, requests: {}\n",
        report.config.flow, report.config.model, report.config.attempts, report.config.seed, report.requests
    );
    let _ = writeln!(out, "started: {}\n", report.timing.started_at.to_rfc3339());
    out.push_str("| task | solved | attempts used | requests | transcript |\n|---|---|---|---|---|\n");
    for r in &report.results {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.task_id,
            if r.solved { "yes" } else { "no" },
            r.attempts_used,
            r.requests,
            r.transcript_path.as_deref().unwrap_or("-")
        );
    }
    let failures: Vec<&TaskResult> = report.results.iter().filter(|r| !r.solved).collect();
    if !failures.is_empty() {
        out.push_str("\n## Failures\n\n");
        for f in failures {
            out.push_str(&failure_section(f));
        }
    }
    out
}

/// Write `report.json` and `report.md` into `out_dir`.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<(), HarnessError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let json_path = out_dir.join(REPORT_JSON);
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    fs::write(&json_path, json).map_err(io(&json_path))?;
    let md_path = out_dir.join(REPORT_MD);
    fs::write(&md_path, render_markdown(report)).map_err(io(&md_path))?;
    Ok(())
}
