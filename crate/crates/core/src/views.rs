//! Deterministic grid analyses: connected objects, whole-grid symmetry and
//! two-segment splits.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{CellValue, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    /// Orthogonal neighbours only.
    Four,
    /// Orthogonal and diagonal neighbours.
    Eight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    /// Adjacent cells join only when their values are equal.
    SameValue,
    /// Any two adjacent non-background cells join.
    AnyNonBackground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub connectivity: Connectivity,
    pub grouping: Grouping,
    pub background: CellValue,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Eight,
            grouping: Grouping::AnyNonBackground,
            background: 0,
        }
    }
}

impl SegmentationConfig {
    pub fn new(connectivity: Connectivity, grouping: Grouping, background: CellValue) -> Self {
        assert!(background <= 9, "background must be a cell value");
        Self {
            connectivity,
            grouping,
            background,
        }
    }
}

/// Inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub value: CellValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectComponent {
    /// Sorted row-major.
    pub cells: Vec<Cell>,
    pub bounding_box: BoundingBox,
}

impl ObjectComponent {
    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn contains_value(&self, value: CellValue) -> bool {
        self.cells.iter().any(|c| c.value == value)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.cells.binary_search_by(|c| (c.row, c.col).cmp(&(row, col))).is_ok()
    }
}

const ORTHOGONAL: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const WITH_DIAGONALS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &ORTHOGONAL,
            Connectivity::Eight => &WITH_DIAGONALS,
        }
    }
}

/// Connected components of non-background cells, ordered by their
/// top-left-most cell in row-major order.
pub fn extract_objects(grid: &Grid, config: &SegmentationConfig) -> Vec<ObjectComponent> {
    let (rows, cols) = grid.dims();
    let mut seen = vec![false; rows * cols];
    let mut objects = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..rows * cols {
        let seed_value = grid.cells()[start];
        if seen[start] || seed_value == config.background {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        while let Some(idx) = queue.pop_front() {
            let (r, c) = (idx / cols, idx % cols);
            let value = grid.cells()[idx];
            cells.push(Cell { row: r, col: c, value });
            for &(dr, dc) in config.connectivity.offsets() {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                let Some(nv) = grid.try_get(nr, nc) else { continue };
                let nidx = nr as usize * cols + nc as usize;
                if seen[nidx] || nv == config.background {
                    continue;
                }
                if config.grouping == Grouping::SameValue && nv != value {
                    continue;
                }
                seen[nidx] = true;
                queue.push_back(nidx);
            }
        }
        cells.sort();
        let bounding_box = BoundingBox {
            top: cells.iter().map(|c| c.row).min().unwrap_or(0),
            left: cells.iter().map(|c| c.col).min().unwrap_or(0),
            bottom: cells.iter().map(|c| c.row).max().unwrap_or(0),
            right: cells.iter().map(|c| c.col).max().unwrap_or(0),
        };
        objects.push(ObjectComponent { cells, bounding_box });
    }
    objects
}

/// Which isometries map the grid onto itself.
///
/// `horizontal` is the mirror across the horizontal axis (rows reversed),
/// `vertical` the mirror across the vertical axis (columns reversed).
/// Diagonal mirrors and the quarter turn are only defined on square grids
/// and are reported `false` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub horizontal: bool,
    pub vertical: bool,
    pub main_diagonal: bool,
    pub anti_diagonal: bool,
    pub rotation_90: bool,
    pub rotation_180: bool,
}

pub fn detect_symmetries(grid: &Grid) -> SymmetryReport {
    let square = grid.is_square();
    let rot90 = square && grid.rotate_cw() == *grid;
    SymmetryReport {
        horizontal: grid.flip_rows() == *grid,
        vertical: grid.flip_cols() == *grid,
        main_diagonal: square && grid.transpose() == *grid,
        anti_diagonal: square && grid.anti_transpose() == *grid,
        rotation_90: rot90,
        rotation_180: rot90 || grid.flip_rows().flip_cols() == *grid,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Cut between rows; parts stack vertically.
    Row,
    /// Cut between columns; parts sit side by side.
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Separator {
    /// Split before this row/column index; no line is removed.
    Index(usize),
    /// The first interior row/column made entirely of this value, removed.
    Value(CellValue),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSplit {
    pub axis: Axis,
    pub separator: Separator,
    /// Index of the first line of the second part (`Index`), or of the
    /// removed separator line (`Value`).
    pub separator_index: usize,
    pub parts: (Grid, Grid),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("no full {axis:?} line of value {value} splits the grid")]
    NoSuchSeparator { axis: Axis, value: CellValue },
    #[error("separator index {index} is not strictly inside 0..{len}")]
    OutOfBounds { index: usize, len: usize },
}

fn line_count(grid: &Grid, axis: Axis) -> usize {
    match axis {
        Axis::Row => grid.rows(),
        Axis::Column => grid.cols(),
    }
}

fn line_is_constant(grid: &Grid, axis: Axis, index: usize, value: CellValue) -> bool {
    match axis {
        Axis::Row => grid.row(index).iter().all(|&v| v == value),
        Axis::Column => (0..grid.rows()).all(|r| grid.get(r, index) == value),
    }
}

fn slice_lines(grid: &Grid, axis: Axis, start: usize, end: usize) -> Grid {
    let window = match axis {
        Axis::Row => grid.window(start, 0, end - start, grid.cols()),
        Axis::Column => grid.window(0, start, grid.rows(), end - start),
    };
    window.expect("slice bounds checked by caller")
}

pub fn split_segments(grid: &Grid, axis: Axis, separator: Separator) -> Result<SegmentSplit, SplitError> {
    let len = line_count(grid, axis);
    let (index, parts) = match separator {
        Separator::Index(index) => {
            if index == 0 || index >= len {
                return Err(SplitError::OutOfBounds { index, len });
            }
            (
                index,
                (slice_lines(grid, axis, 0, index), slice_lines(grid, axis, index, len)),
            )
        }
        Separator::Value(value) => {
            let index = (1..len.saturating_sub(1))
                .find(|&i| line_is_constant(grid, axis, i, value))
                .ok_or(SplitError::NoSuchSeparator { axis, value })?;
            (
                index,
                (
                    slice_lines(grid, axis, 0, index),
                    slice_lines(grid, axis, index + 1, len),
                ),
            )
        }
    };
    Ok(SegmentSplit {
        axis,
        separator,
        separator_index: index,
        parts,
    })
}

/// Reassemble a split, re-inserting the separator line when one was removed.
pub fn stitch_segments(split: &SegmentSplit) -> Grid {
    let (a, b) = &split.parts;
    match split.axis {
        Axis::Row => {
            let mut rows = a.to_rows();
            if let Separator::Value(v) = split.separator {
                rows.push(vec![v; a.cols()]);
            }
            rows.extend(b.to_rows());
            Grid::from_rows(&rows).expect("parts share a width")
        }
        Axis::Column => {
            let sep = match split.separator {
                Separator::Value(v) => vec![v],
                Separator::Index(_) => vec![],
            };
            let rows: Vec<Vec<CellValue>> = (0..a.rows()).map(|r| [a.row(r), &sep, b.row(r)].concat()).collect();
            Grid::from_rows(&rows).expect("parts share a height")
        }
    }
}
