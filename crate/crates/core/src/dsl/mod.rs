//! A small line-oriented instruction language over grids.
//!
//! One primitive per line, arguments as `name=value`, `#` starts a comment:
//!
//! ```text
//! # keep every other cell
//! subsample row_offset=0 row_stride=2 col_offset=0 col_stride=2
//! recolor map=1:2,3:4
//! ```
//!
//! Programs are straight-line: steps run left to right, each on the grid the
//! previous step produced. Selectors are resolved against the objects of the
//! current intermediate grid.

mod interp;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::task::{CellValue, Grid};
use crate::views::{Axis, Separator};

pub use interp::{
    apply_instruction, apply_primitive, verify_instruction, verify_instruction_with, ExecError, PairOutcome,
    VerificationReport, VerifyMode,
};
pub use parse::{parse_instruction, ParseError};

/// Picks one object out of `extract_objects` output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selector {
    /// Most cells; earliest in order on ties.
    Largest,
    /// Fewest cells; earliest in order on ties.
    Smallest,
    /// 1-based position in top-left row-major order.
    NthInOrder(usize),
    /// First object containing a cell of this value.
    ByValue(CellValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReflectAxis {
    /// Rows reversed.
    Horizontal,
    /// Columns reversed.
    Vertical,
    MainDiagonal,
    AntiDiagonal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CombineRule {
    /// Earlier values win. Unlisted foreground values beat background;
    /// remaining ties keep the first part's value.
    Priority(Vec<CellValue>),
    /// First part's foreground, else second part's cell.
    NonzeroUnion,
    /// Cells that are foreground in both parts take the given value.
    NewValueOnOverlap(CellValue),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Primitive {
    /// Clockwise quarter turns, 0-3.
    Rotate {
        quarter_turns: u8,
    },
    Reflect {
        axis: ReflectAxis,
    },
    /// Translate one object; vacated cells become background, cells pushed
    /// off the grid are dropped.
    ShiftObject {
        selector: Selector,
        dr: i32,
        dc: i32,
    },
    /// Cellwise value substitution; unmapped values are kept.
    Recolor {
        map: BTreeMap<CellValue, CellValue>,
    },
    /// Split the selected object's bounding box into quadrants and move each
    /// quadrant to the matching grid corner.
    ScatterToCorners {
        selector: Selector,
    },
    Subsample {
        row_offset: usize,
        row_stride: usize,
        col_offset: usize,
        col_stride: usize,
    },
    CropBbox {
        selector: Selector,
    },
    /// Repeat the grid periodically to the given size.
    TilePattern {
        out_rows: usize,
        out_cols: usize,
    },
    CombineSegments {
        axis: Axis,
        separator: Separator,
        rule: CombineRule,
    },
    EmitFixed {
        grid: Grid,
    },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Rotate { .. } => "rotate",
            Primitive::Reflect { .. } => "reflect",
            Primitive::ShiftObject { .. } => "shift_object",
            Primitive::Recolor { .. } => "recolor",
            Primitive::ScatterToCorners { .. } => "scatter_to_corners",
            Primitive::Subsample { .. } => "subsample",
            Primitive::CropBbox { .. } => "crop_bbox",
            Primitive::TilePattern { .. } => "tile_pattern",
            Primitive::CombineSegments { .. } => "combine_segments",
            Primitive::EmitFixed { .. } => "emit_fixed",
        }
    }
}

/// Non-empty, straight-line program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    steps: Vec<Primitive>,
}

impl Instruction {
    pub fn new(steps: Vec<Primitive>) -> Option<Self> {
        (!steps.is_empty()).then_some(Self { steps })
    }

    pub fn single(step: Primitive) -> Self {
        Self { steps: vec![step] }
    }

    pub fn steps(&self) -> &[Primitive] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Largest => f.write_str("largest"),
            Selector::Smallest => f.write_str("smallest"),
            Selector::NthInOrder(n) => write!(f, "nth-in-order({n})"),
            Selector::ByValue(v) => write!(f, "by-value({v})"),
        }
    }
}

impl fmt::Display for ReflectAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReflectAxis::Horizontal => "horizontal",
            ReflectAxis::Vertical => "vertical",
            ReflectAxis::MainDiagonal => "main-diagonal",
            ReflectAxis::AntiDiagonal => "anti-diagonal",
        })
    }
}

impl fmt::Display for CombineRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CombineRule::Priority(values) => {
                let list: Vec<String> = values.iter().map(u8::to_string).collect();
                write!(f, "priority({})", list.join(","))
            }
            CombineRule::NonzeroUnion => f.write_str("nonzero-union"),
            CombineRule::NewValueOnOverlap(v) => write!(f, "new-value-on-overlap({v})"),
        }
    }
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Row => "row",
        Axis::Column => "column",
    }
}

fn separator_text(separator: Separator) -> String {
    match separator {
        Separator::Index(i) => format!("index({i})"),
        Separator::Value(v) => format!("value({v})"),
    }
}

fn compact_grid(grid: &Grid) -> String {
    let rows: Vec<String> = grid
        .to_rows()
        .iter()
        .map(|row| {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        match self {
            Primitive::Rotate { quarter_turns } => write!(f, " quarter_turns={quarter_turns}"),
            Primitive::Reflect { axis } => write!(f, " axis={axis}"),
            Primitive::ShiftObject { selector, dr, dc } => write!(f, " selector={selector} dr={dr} dc={dc}"),
            Primitive::Recolor { map } => {
                let pairs: Vec<String> = map.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                write!(f, " map={}", pairs.join(","))
            }
            Primitive::ScatterToCorners { selector } | Primitive::CropBbox { selector } => {
                write!(f, " selector={selector}")
            }
            Primitive::Subsample {
                row_offset,
                row_stride,
                col_offset,
                col_stride,
            } => write!(
                f,
                " row_offset={row_offset} row_stride={row_stride} col_offset={col_offset} col_stride={col_stride}"
            ),
            Primitive::TilePattern { out_rows, out_cols } => write!(f, " out_rows={out_rows} out_cols={out_cols}"),
            Primitive::CombineSegments { axis, separator, rule } => write!(
                f,
                " axis={} separator={} rule={rule}",
                axis_name(*axis),
                separator_text(*separator)
            ),
            Primitive::EmitFixed { grid } => write!(f, " grid={}", compact_grid(grid)),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

impl Serialize for Instruction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Instruction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_instruction(&text).map_err(serde::de::Error::custom)
    }
}

/// Grammar reference embedded in prompts that ask for a program.
pub const GRAMMAR_REFERENCE: &str = "\
rotate quarter_turns=<0-3>                      (clockwise quarter turns of the whole grid)
reflect axis=<horizontal|vertical|main-diagonal|anti-diagonal>
shift_object selector=<S> dr=<int> dc=<int>     (move one object; vacated cells become 0)
recolor map=<from>:<to>,<from>:<to>             (change values everywhere)
scatter_to_corners selector=<S>                 (move each quadrant of an object to the matching grid corner)
subsample row_offset=<n> row_stride=<n> col_offset=<n> col_stride=<n>
crop_bbox selector=<S>                          (crop to an object's bounding box)
tile_pattern out_rows=<n> out_cols=<n>          (continue the grid periodically)
combine_segments axis=<row|column> separator=<index(n)|value(v)> rule=<priority(v,...)|nonzero-union|new-value-on-overlap(v)>
emit_fixed grid=<[[v,...],...]>                 (output a constant grid)
where <S> is largest, smallest, nth-in-order(n) or by-value(v); objects are numbered from 1 in top-left reading order.";
