use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CombineRule, Instruction, Primitive, ReflectAxis, Selector};
use crate::task::{grids_equal, CellValue, Grid, TaskPair};
use crate::views::{extract_objects, split_segments, ObjectComponent, SegmentationConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("step {step}: selector {selector} matched no object")]
    SelectorUnresolved { step: usize, selector: String },
    #[error("step {step}: {detail}")]
    GeometryError { step: usize, detail: String },
}

fn select(objects: &[ObjectComponent], selector: Selector) -> Option<&ObjectComponent> {
    match selector {
        // min_by_key/max_by_key keep the last of equal keys, so compare manually
        Selector::Largest => objects
            .iter()
            .fold(None, |best: Option<&ObjectComponent>, o| match best {
                Some(b) if b.size() >= o.size() => Some(b),
                _ => Some(o),
            }),
        Selector::Smallest => objects
            .iter()
            .fold(None, |best: Option<&ObjectComponent>, o| match best {
                Some(b) if b.size() <= o.size() => Some(b),
                _ => Some(o),
            }),
        Selector::NthInOrder(n) => objects.get(n.checked_sub(1)?),
        Selector::ByValue(v) => objects.iter().find(|o| o.contains_value(v)),
    }
}

/// Run a single primitive. `step` only labels errors.
pub fn apply_primitive(
    primitive: &Primitive,
    grid: &Grid,
    config: &SegmentationConfig,
    step: usize,
) -> Result<Grid, ExecError> {
    let geometry = |detail: String| ExecError::GeometryError { step, detail };
    let resolve = |selector: Selector| -> Result<ObjectComponent, ExecError> {
        let objects = extract_objects(grid, config);
        select(&objects, selector)
            .cloned()
            .ok_or_else(|| ExecError::SelectorUnresolved {
                step,
                selector: selector.to_string(),
            })
    };
    let bg = config.background;

    let out = match primitive {
        Primitive::Rotate { quarter_turns } => {
            let mut out = grid.clone();
            for _ in 0..*quarter_turns {
                out = out.rotate_cw();
            }
            out
        }
        Primitive::Reflect { axis } => match axis {
            ReflectAxis::Horizontal => grid.flip_rows(),
            ReflectAxis::Vertical => grid.flip_cols(),
            ReflectAxis::MainDiagonal => grid.transpose(),
            ReflectAxis::AntiDiagonal => grid.anti_transpose(),
        },
        Primitive::ShiftObject { selector, dr, dc } => {
            let object = resolve(*selector)?;
            let mut out = grid.clone();
            for cell in &object.cells {
                out.set(cell.row, cell.col, bg);
            }
            for cell in &object.cells {
                let (r, c) = (cell.row as i64 + i64::from(*dr), cell.col as i64 + i64::from(*dc));
                if (0..grid.rows() as i64).contains(&r) && (0..grid.cols() as i64).contains(&c) {
                    out.set(r as usize, c as usize, cell.value);
                }
            }
            out
        }
        Primitive::Recolor { map } => Grid::from_fn(grid.rows(), grid.cols(), |r, c| {
            let v = grid.get(r, c);
            map.get(&v).copied().unwrap_or(v)
        })
        .expect("recolor maps into 0-9"),
        Primitive::ScatterToCorners { selector } => {
            let object = resolve(*selector)?;
            let bb = object.bounding_box;
            let (h, w) = (bb.height(), bb.width());
            if h % 2 != 0 || w % 2 != 0 {
                return Err(geometry(format!(
                    "object bounding box {h}x{w} has no even quadrant split"
                )));
            }
            let mut out = grid.clone();
            for cell in &object.cells {
                out.set(cell.row, cell.col, bg);
            }
            for cell in &object.cells {
                let (lr, lc) = (cell.row - bb.top, cell.col - bb.left);
                let r = if lr < h / 2 { lr } else { grid.rows() - h + lr };
                let c = if lc < w / 2 { lc } else { grid.cols() - w + lc };
                out.set(r, c, cell.value);
            }
            out
        }
        Primitive::Subsample {
            row_offset,
            row_stride,
            col_offset,
            col_stride,
        } => {
            if *row_offset >= grid.rows() || *col_offset >= grid.cols() || *row_stride == 0 || *col_stride == 0 {
                return Err(geometry(format!(
                    "subsample offsets ({row_offset},{col_offset}) strides ({row_stride},{col_stride}) do not fit a {}x{} grid",
                    grid.rows(),
                    grid.cols()
                )));
            }
            let rows = (grid.rows() - row_offset).div_ceil(*row_stride);
            let cols = (grid.cols() - col_offset).div_ceil(*col_stride);
            Grid::from_fn(rows, cols, |r, c| {
                grid.get(row_offset + r * row_stride, col_offset + c * col_stride)
            })
            .expect("non-empty lattice")
        }
        Primitive::CropBbox { selector } => {
            let bb = resolve(*selector)?.bounding_box;
            grid.window(bb.top, bb.left, bb.height(), bb.width())
                .expect("bounding box lies inside the grid")
        }
        Primitive::TilePattern { out_rows, out_cols } => {
            if *out_rows == 0 || *out_cols == 0 {
                return Err(geometry(format!("cannot tile to {out_rows}x{out_cols}")));
            }
            Grid::from_fn(*out_rows, *out_cols, |r, c| grid.get(r % grid.rows(), c % grid.cols()))
                .expect("positive size")
        }
        Primitive::CombineSegments { axis, separator, rule } => {
            let split = split_segments(grid, *axis, *separator).map_err(|e| geometry(e.to_string()))?;
            let (a, b) = &split.parts;
            if a.dims() != b.dims() {
                return Err(geometry(format!(
                    "segments differ in size: {:?} vs {:?}",
                    a.dims(),
                    b.dims()
                )));
            }
            Grid::from_fn(a.rows(), a.cols(), |r, c| {
                combine_cell(rule, a.get(r, c), b.get(r, c), bg)
            })
            .expect("same size as parts")
        }
        Primitive::EmitFixed { grid } => grid.clone(),
    };
    Ok(out)
}

fn combine_cell(rule: &CombineRule, a: CellValue, b: CellValue, bg: CellValue) -> CellValue {
    match rule {
        CombineRule::Priority(order) => {
            let rank = |v: CellValue| match order.iter().position(|&p| p == v) {
                Some(i) => i,
                None if v != bg => order.len(),
                None => order.len() + 1,
            };
            if rank(b) < rank(a) {
                b
            } else {
                a
            }
        }
        CombineRule::NonzeroUnion => {
            if a != bg {
                a
            } else {
                b
            }
        }
        CombineRule::NewValueOnOverlap(v) => match (a != bg, b != bg) {
            (true, true) => *v,
            (true, false) => a,
            (false, true) => b,
            (false, false) => bg,
        },
    }
}

/// Run every step left to right.
pub fn apply_instruction(instr: &Instruction, grid: &Grid, config: &SegmentationConfig) -> Result<Grid, ExecError> {
    let mut current = grid.clone();
    for (i, step) in instr.steps().iter().enumerate() {
        current = apply_primitive(step, &current, config, i + 1)?;
    }
    Ok(current)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PairOutcome {
    Pass,
    Fail { expected: Grid, got: Grid },
    Error { reason: String },
}

impl PairOutcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, PairOutcome::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// One outcome per checked pair, in pair order. Shorter than
    /// `pair_count` only when checking stopped at the first failure.
    pub outcomes: Vec<PairOutcome>,
    pub pair_count: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.outcomes.len() == self.pair_count && self.outcomes.iter().all(PairOutcome::is_pass)
    }

    /// Index and outcome of the first non-passing pair.
    pub fn first_failure(&self) -> Option<(usize, &PairOutcome)> {
        self.outcomes.iter().enumerate().find(|(_, o)| !o.is_pass())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifyMode {
    #[default]
    Full,
    StopAtFirstFailure,
}

pub fn verify_instruction(instr: &Instruction, pairs: &[TaskPair], config: &SegmentationConfig) -> VerificationReport {
    verify_instruction_with(instr, pairs, config, VerifyMode::Full)
}

pub fn verify_instruction_with(
    instr: &Instruction,
    pairs: &[TaskPair],
    config: &SegmentationConfig,
    mode: VerifyMode,
) -> VerificationReport {
    let mut outcomes = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let outcome = match (&pair.output, apply_instruction(instr, &pair.input, config)) {
            (None, _) => PairOutcome::Error {
                reason: "pair has no expected output".into(),
            },
            (Some(_), Err(e)) => PairOutcome::Error { reason: e.to_string() },
            (Some(expected), Ok(got)) if grids_equal(expected, &got) => PairOutcome::Pass,
            (Some(expected), Ok(got)) => PairOutcome::Fail {
                expected: expected.clone(),
                got,
            },
        };
        let stop = !outcome.is_pass() && mode == VerifyMode::StopAtFirstFailure;
        outcomes.push(outcome);
        if stop {
            break;
        }
    }
    VerificationReport {
        outcomes,
        pair_count: pairs.len(),
    }
}
