//! ARC task model: grids, train/test pairs, JSON parsing and the canonical
//! writer used for prompts and redaction.
//!
//! Input accepts standard JSON as well as the Python-literal style
//! (single-quoted keys and strings). A `"test"` value may be a list of pairs
//! or a single pair object; both are normalized to a list.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

/// Placeholder written in place of every hidden test output.
pub const REDACTED_OUTPUT: &str = "to_be_filled";

/// Largest grid side found in the public ARC corpus. Not enforced.
pub const ARC_MAX_SIDE: usize = 30;

/// A cell symbol. Values are nominal, never compared by magnitude.
pub type CellValue = u8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("cell value {0} outside 0-9")]
    ValueOutOfRange(i64),
    #[error("ragged grid: row {row} has {found} cells, expected {expected}")]
    RaggedGrid { row: usize, expected: usize, found: usize },
    #[error("grid has no rows or no columns")]
    EmptyGrid,
    #[error("{rows}x{cols} grid needs {expected} cells, got {found}")]
    SizeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("cell value {0} outside 0-9")]
    ValueOutOfRange(i64),
    #[error("ragged grid: row {row} has {found} cells, expected {expected}")]
    RaggedGrid { row: usize, expected: usize, found: usize },
    #[error("empty grid")]
    EmptyGrid,
}

impl From<GridError> for TaskError {
    fn from(err: GridError) -> Self {
        match err {
            GridError::ValueOutOfRange(v) => TaskError::ValueOutOfRange(v),
            GridError::RaggedGrid { row, expected, found } => TaskError::RaggedGrid { row, expected, found },
            GridError::EmptyGrid => TaskError::EmptyGrid,
            GridError::SizeMismatch { .. } => TaskError::SchemaViolation(err.to_string()),
        }
    }
}

/// Rectangular, row-major matrix of cell values 0-9.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<CellValue>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, cells: Vec<CellValue>) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::EmptyGrid);
        }
        if cells.len() != rows * cols {
            return Err(GridError::SizeMismatch {
                rows,
                cols,
                expected: rows * cols,
                found: cells.len(),
            });
        }
        if let Some(&bad) = cells.iter().find(|&&v| v > 9) {
            return Err(GridError::ValueOutOfRange(i64::from(bad)));
        }
        Ok(Self { rows, cols, cells })
    }

    /// Grid of `rows x cols` cells all equal to `value`.
    pub fn filled(rows: usize, cols: usize, value: CellValue) -> Result<Self, GridError> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn from_rows<R: AsRef<[CellValue]>>(rows: &[R]) -> Result<Self, GridError> {
        let first = rows.first().ok_or(GridError::EmptyGrid)?.as_ref().len();
        if first == 0 {
            return Err(GridError::EmptyGrid);
        }
        let mut cells = Vec::with_capacity(rows.len() * first);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != first {
                return Err(GridError::RaggedGrid {
                    row: i,
                    expected: first,
                    found: row.len(),
                });
            }
            cells.extend_from_slice(row);
        }
        Self::new(rows.len(), first, cells)
    }

    /// Build a grid by evaluating `f(row, col)` for every cell.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> CellValue) -> Result<Self, GridError> {
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(f(r, c));
            }
        }
        Self::new(rows, cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn cells(&self) -> &[CellValue] {
        &self.cells
    }

    /// Panics when out of bounds.
    pub fn get(&self, row: usize, col: usize) -> CellValue {
        assert!(row < self.rows && col < self.cols, "cell ({row},{col}) out of bounds");
        self.cells[row * self.cols + col]
    }

    pub fn try_get(&self, row: isize, col: isize) -> Option<CellValue> {
        if row < 0 || col < 0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        (row < self.rows && col < self.cols).then(|| self.cells[row * self.cols + col])
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: CellValue) {
        debug_assert!(value <= 9);
        self.cells[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[CellValue] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<CellValue>> {
        self.cells.chunks(self.cols).map(<[_]>::to_vec).collect()
    }

    /// Copy of the `height x width` window whose top-left cell is `(top, left)`.
    pub fn window(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self, GridError> {
        if top + height > self.rows || left + width > self.cols {
            return Err(GridError::SizeMismatch {
                rows: height,
                cols: width,
                expected: height * width,
                found: 0,
            });
        }
        Self::from_fn(height, width, |r, c| self.get(top + r, left + c))
    }

    /// Rotate a quarter turn clockwise.
    pub fn rotate_cw(&self) -> Self {
        let (rows, cols) = (self.cols, self.rows);
        let mut cells = Vec::with_capacity(self.cells.len());
        for r in 0..rows {
            for c in 0..cols {
                cells.push(self.get(self.rows - 1 - c, r));
            }
        }
        Self { rows, cols, cells }
    }

    /// Mirror across the horizontal axis (row order reversed).
    pub fn flip_rows(&self) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for r in (0..self.rows).rev() {
            cells.extend_from_slice(self.row(r));
        }
        Self { cells, ..*self }
    }

    /// Mirror across the vertical axis (each row reversed).
    pub fn flip_cols(&self) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for r in 0..self.rows {
            cells.extend(self.row(r).iter().rev());
        }
        Self { cells, ..*self }
    }

    /// Mirror across the main diagonal.
    pub fn transpose(&self) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                cells.push(self.get(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            cells,
        }
    }

    /// Mirror across the anti-diagonal.
    pub fn anti_transpose(&self) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for c in (0..self.cols).rev() {
            for r in (0..self.rows).rev() {
                cells.push(self.get(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            cells,
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_grid_ascii(self))
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<i64>>::deserialize(deserializer)?;
        grid_from_i64_rows(&rows).map_err(serde::de::Error::custom)
    }
}

fn grid_from_i64_rows(rows: &[Vec<i64>]) -> Result<Grid, GridError> {
    let mut narrow = Vec::with_capacity(rows.len());
    for row in rows {
        let mut out = Vec::with_capacity(row.len());
        for &v in row {
            if !(0..=9).contains(&v) {
                return Err(GridError::ValueOutOfRange(v));
            }
            out.push(v as CellValue);
        }
        narrow.push(out);
    }
    Grid::from_rows(&narrow)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskPair {
    pub input: Grid,
    pub output: Option<Grid>,
}

impl TaskPair {
    pub fn new(input: Grid, output: Grid) -> Self {
        Self {
            input,
            output: Some(output),
        }
    }

    pub fn unsolved(input: Grid) -> Self {
        Self { input, output: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub train: Vec<TaskPair>,
    pub test: Vec<TaskPair>,
}

impl Task {
    /// Validating constructor: at least one train and one test pair, and
    /// every train pair carries an output.
    pub fn new(id: impl Into<String>, train: Vec<TaskPair>, test: Vec<TaskPair>) -> Result<Self, TaskError> {
        if train.is_empty() {
            return Err(TaskError::SchemaViolation(
                "\"train\" must list at least one pair".into(),
            ));
        }
        if let Some(i) = train.iter().position(|p| p.output.is_none()) {
            return Err(TaskError::SchemaViolation(format!("train pair {i} has no output")));
        }
        if test.is_empty() {
            return Err(TaskError::SchemaViolation(
                "\"test\" must list at least one pair".into(),
            ));
        }
        Ok(Self {
            id: id.into(),
            train,
            test,
        })
    }

    /// The same task restricted to a single test pair.
    pub fn with_single_test(&self, index: usize) -> Task {
        Task {
            id: self.id.clone(),
            train: self.train.clone(),
            test: vec![self.test[index].clone()],
        }
    }

    pub fn largest_side(&self) -> usize {
        self.train
            .iter()
            .chain(&self.test)
            .flat_map(|p| std::iter::once(&p.input).chain(p.output.as_ref()))
            .map(|g| g.rows().max(g.cols()))
            .max()
            .unwrap_or(0)
    }
}

/// Parse one task file. `id` is usually the file stem.
pub fn parse_task(json_text: &str, id: &str) -> Result<Task, TaskError> {
    let value: Value = match serde_json::from_str(json_text) {
        Ok(v) => v,
        Err(first) => serde_json::from_str(&python_quotes_to_json(json_text))
            .map_err(|_| TaskError::MalformedJson(first.to_string()))?,
    };
    let top = value
        .as_object()
        .ok_or_else(|| TaskError::SchemaViolation("top level must be an object".into()))?;
    let train = top
        .get("train")
        .ok_or_else(|| TaskError::SchemaViolation("missing key \"train\"".into()))?;
    let test = top
        .get("test")
        .ok_or_else(|| TaskError::SchemaViolation("missing key \"test\"".into()))?;

    let train = match train {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, v)| parse_pair(v, &format!("train[{i}]"), true))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(TaskError::SchemaViolation("\"train\" must be an array".into())),
    };
    let test = match test {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, v)| parse_pair(v, &format!("test[{i}]"), false))
            .collect::<Result<Vec<_>, _>>()?,
        Value::Object(_) => vec![parse_pair(test, "test", false)?],
        _ => return Err(TaskError::SchemaViolation("\"test\" must be an array or object".into())),
    };
    Task::new(id, train, test)
}

fn parse_pair(value: &Value, at: &str, output_required: bool) -> Result<TaskPair, TaskError> {
    let obj = value
        .as_object()
        .ok_or_else(|| TaskError::SchemaViolation(format!("{at} must be an object")))?;
    let input = obj
        .get("input")
        .ok_or_else(|| TaskError::SchemaViolation(format!("{at} has no \"input\"")))?;
    let input = parse_grid_value(input, &format!("{at}.input"))?;
    let output = match obj.get("output") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s == REDACTED_OUTPUT => None,
        Some(v) => Some(parse_grid_value(v, &format!("{at}.output"))?),
    };
    if output_required && output.is_none() {
        return Err(TaskError::SchemaViolation(format!("{at} has no \"output\" grid")));
    }
    Ok(TaskPair { input, output })
}

fn parse_grid_value(value: &Value, at: &str) -> Result<Grid, TaskError> {
    let rows = value
        .as_array()
        .ok_or_else(|| TaskError::SchemaViolation(format!("{at} must be an array of rows")))?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| TaskError::SchemaViolation(format!("{at}[{r}] must be an array")))?;
        let mut out = Vec::with_capacity(row.len());
        for cell in row {
            let v = cell
                .as_i64()
                .ok_or_else(|| TaskError::SchemaViolation(format!("{at}[{r}] holds a non-integer cell {cell}")))?;
            out.push(v);
        }
        parsed.push(out);
    }
    Ok(grid_from_i64_rows(&parsed)?)
}

/// Rewrite single-quoted string literals as double-quoted JSON strings.
fn python_quotes_to_json(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    let mut quote: Option<char> = None;
    while let Some(ch) = chars.next() {
        match (quote, ch) {
            (None, '\'') => {
                quote = Some('\'');
                out.push('"');
            }
            (None, '"') => {
                quote = Some('"');
                out.push('"');
            }
            (None, _) => out.push(ch),
            (Some(q), '\\') => match chars.next() {
                Some('\'') if q == '\'' => out.push('\''),
                Some(next) => {
                    out.push('\\');
                    out.push(next);
                }
                None => out.push('\\'),
            },
            (Some('\''), '"') => out.push_str("\\\""),
            (Some(q), c) if c == q => {
                quote = None;
                out.push('"');
            }
            (Some(_), c) => out.push(c),
        }
    }
    out
}

fn write_grid_json(out: &mut String, grid: &Grid) {
    out.push('[');
    for r in 0..grid.rows() {
        if r > 0 {
            out.push_str(", ");
        }
        out.push('[');
        for (c, v) in grid.row(r).iter().enumerate() {
            if c > 0 {
                out.push_str(", ");
            }
            out.push(char::from(b'0' + v));
        }
        out.push(']');
    }
    out.push(']');
}

/// Grid as a single-line JSON array, e.g. `[[1, 2], [3, 4]]`.
pub fn grid_to_json(grid: &Grid) -> String {
    let mut out = String::new();
    write_grid_json(&mut out, grid);
    out
}

enum OutputMode {
    Keep,
    Redact,
}

fn write_pair(out: &mut String, pair: &TaskPair, mode: &OutputMode) {
    out.push_str("{\"input\": ");
    write_grid_json(out, &pair.input);
    match (mode, &pair.output) {
        (OutputMode::Redact, _) => {
            out.push_str(", \"output\": \"");
            out.push_str(REDACTED_OUTPUT);
            out.push('"');
        }
        (OutputMode::Keep, Some(grid)) => {
            out.push_str(", \"output\": ");
            write_grid_json(out, grid);
        }
        (OutputMode::Keep, None) => {}
    }
    out.push('}');
}

fn write_task(task: &Task, mode: OutputMode) -> String {
    let mut out = String::from("{\"train\": [");
    for (i, pair) in task.train.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_pair(&mut out, pair, &OutputMode::Keep);
    }
    out.push_str("], \"test\": ");
    if let [only] = task.test.as_slice() {
        write_pair(&mut out, only, &mode);
    } else {
        out.push('[');
        for (i, pair) in task.test.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_pair(&mut out, pair, &mode);
        }
        out.push(']');
    }
    out.push('}');
    out
}

/// Canonical single-line JSON for a task with every known output intact.
///
/// Separators are `", "` and `": "`. A task with exactly one test pair writes
/// `"test"` as a bare object, more than one as a list.
pub fn serialize_task(task: &Task) -> String {
    write_task(task, OutputMode::Keep)
}

/// Canonical JSON with every test output replaced by `"to_be_filled"`.
pub fn redact_test_output(task: &Task) -> String {
    write_task(task, OutputMode::Redact)
}

/// Single pair as canonical JSON, output included when present.
pub fn pair_to_json(pair: &TaskPair) -> String {
    let mut out = String::new();
    write_pair(&mut out, pair, &OutputMode::Keep);
    out
}

pub fn grids_equal(a: &Grid, b: &Grid) -> bool {
    a == b
}

/// Rows of space-separated digits joined by newlines.
pub fn render_grid_ascii(grid: &Grid) -> String {
    let mut out = String::with_capacity(grid.rows() * grid.cols() * 2);
    for r in 0..grid.rows() {
        if r > 0 {
            out.push('\n');
        }
        for (c, v) in grid.row(r).iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            out.push(char::from(b'0' + v));
        }
    }
    out
}

/// Inverse of [`render_grid_ascii`]. Blank lines are ignored.
pub fn parse_grid_ascii(text: &str) -> Result<Grid, TaskError> {
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>()
                    .map_err(|_| TaskError::SchemaViolation(format!("not a cell value: {tok:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(TaskError::EmptyGrid);
    }
    Ok(grid_from_i64_rows(&rows)?)
}
