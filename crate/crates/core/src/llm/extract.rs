//! Pulling structure back out of free-text completions.

use crate::task::Grid;

/// Outermost balanced `[...]` spans as byte ranges, in order.
fn bracket_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, b) in text.bytes().enumerate() {
        match b {
            b'[' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b']' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push((start, i + 1));
                }
            }
            _ => {}
        }
    }
    spans
}

fn parse_grid_literal(text: &str) -> Option<Grid> {
    let rows: Vec<Vec<i64>> = serde_json::from_str(text).ok()?;
    if rows.iter().flatten().any(|v| !(0..=9).contains(v)) {
        return None;
    }
    let rows: Vec<Vec<u8>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| v as u8).collect())
        .collect();
    Grid::from_rows(&rows).ok()
}

/// Every well-formed grid literal with the byte offset where it starts.
fn grid_literals(text: &str, base: usize, out: &mut Vec<(usize, Grid)>) {
    for (start, end) in bracket_spans(text) {
        let span = &text[start..end];
        match parse_grid_literal(span) {
            Some(grid) => out.push((base + start, grid)),
            None => grid_literals(&span[1..span.len() - 1], base + start + 1, out),
        }
    }
}

/// The text that labels an array starting at `offset`: what precedes it on
/// its line (after any earlier array), or the previous non-empty line when
/// the array opens a line.
fn label_for(text: &str, offset: usize) -> &str {
    let line_start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let mut before = &text[line_start..offset];
    if let Some(end_of_previous) = before.rfind(']') {
        before = &before[end_of_previous + 1..];
    }
    if !before.trim().is_empty() {
        return before;
    }
    text[..line_start]
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
}

fn restates_input(label: &str) -> bool {
    let label = label.to_lowercase();
    label.contains("input") && !["output", "answer", "result"].iter().any(|k| label.contains(k))
}

/// The last well-formed rectangular array of values 0-9 in the text,
/// skipping arrays introduced as a restatement of an input.
pub fn extract_grid_from_completion(text: &str) -> Option<Grid> {
    let mut found = Vec::new();
    grid_literals(text, 0, &mut found);
    found
        .into_iter()
        .rev()
        .find(|(offset, _)| !restates_input(label_for(text, *offset)))
        .map(|(_, grid)| grid)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sections {
    pub broad: String,
    pub detailed: String,
    /// False when no broad header was found and everything went to `detailed`.
    pub has_headers: bool,
}

/// `Some(rest of line)` when the line is a header mentioning `keyword`.
fn header_rest<'a>(line: &'a str, keyword: &str) -> Option<&'a str> {
    let stripped = line.trim().trim_start_matches(['#', '*', '-', ' ']);
    match stripped.split_once(':') {
        Some((head, rest)) => {
            let head = head.trim_end_matches('*').to_lowercase();
            (head.len() <= 80 && head.contains(keyword)).then(|| rest.trim_start_matches('*'))
        }
        None => {
            let lower = stripped.trim_end_matches('*').to_lowercase();
            (lower.len() <= 60 && lower.contains(keyword) && lower.contains("description")).then_some("")
        }
    }
}

/// Split a completion on its own "broad ..." and "step ..." headers
/// (case-insensitive). Without a broad header the whole text is detailed.
pub fn split_sections(text: &str) -> Sections {
    let lines: Vec<&str> = text.lines().collect();
    let Some((broad_at, broad_rest)) = lines
        .iter()
        .enumerate()
        .find_map(|(i, l)| header_rest(l, "broad").map(|r| (i, r)))
    else {
        return Sections {
            broad: String::new(),
            detailed: text.trim().to_string(),
            has_headers: false,
        };
    };
    let step = lines
        .iter()
        .enumerate()
        .skip(broad_at + 1)
        .find_map(|(i, l)| header_rest(l, "step").map(|r| (i, r)));

    let join = |first: &str, rest: &[&str]| -> String {
        let mut parts = vec![first];
        parts.extend_from_slice(rest);
        parts.join("\n").trim().to_string()
    };
    match step {
        Some((step_at, step_rest)) => Sections {
            broad: join(broad_rest, &lines[broad_at + 1..step_at]),
            detailed: join(step_rest, &lines[step_at + 1..]),
            has_headers: true,
        },
        None => Sections {
            broad: join(broad_rest, &lines[broad_at + 1..]),
            detailed: String::new(),
            has_headers: true,
        },
    }
}
