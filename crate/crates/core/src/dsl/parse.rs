use std::collections::BTreeMap;

use thiserror::Error;

use super::{CombineRule, Instruction, Primitive, ReflectAxis, Selector};
use crate::task::{CellValue, Grid};
use crate::views::{Axis, Separator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: unknown primitive {name:?}")]
    UnknownPrimitive { line: usize, name: String },
    #[error("line {line}: {primitive}: {detail}")]
    BadArity {
        line: usize,
        primitive: String,
        detail: String,
    },
    #[error("line {line}: {primitive}: bad value {value:?} for {argument} (expected {expected})")]
    BadArgumentType {
        line: usize,
        primitive: String,
        argument: String,
        value: String,
        expected: String,
    },
    #[error("program has no steps")]
    EmptyProgram,
}

const SIGNATURES: &[(&str, &[&str])] = &[
    ("rotate", &["quarter_turns"]),
    ("reflect", &["axis"]),
    ("shift_object", &["selector", "dr", "dc"]),
    ("recolor", &["map"]),
    ("scatter_to_corners", &["selector"]),
    ("subsample", &["row_offset", "row_stride", "col_offset", "col_stride"]),
    ("crop_bbox", &["selector"]),
    ("tile_pattern", &["out_rows", "out_cols"]),
    ("combine_segments", &["axis", "separator", "rule"]),
    ("emit_fixed", &["grid"]),
];

/// Split on whitespace outside brackets and parentheses.
fn tokenize(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut depth = 0i32;
    for ch in line.chars() {
        match ch {
            '[' | '(' => {
                depth += 1;
                current.push(ch);
            }
            ']' | ')' => {
                depth -= 1;
                current.push(ch);
            }
            c if c.is_whitespace() && depth <= 0 => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            c if c.is_whitespace() => {}
            c => current.push(c),
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

struct Args<'a> {
    line: usize,
    primitive: &'a str,
    values: BTreeMap<String, String>,
}

impl Args<'_> {
    fn bad(&self, argument: &str, expected: &str) -> ParseError {
        ParseError::BadArgumentType {
            line: self.line,
            primitive: self.primitive.to_string(),
            argument: argument.to_string(),
            value: self.values.get(argument).cloned().unwrap_or_default(),
            expected: expected.to_string(),
        }
    }

    fn raw(&self, argument: &str) -> &str {
        self.values.get(argument).map(String::as_str).unwrap_or_default()
    }

    fn int_in(&self, argument: &str, min: i64, max: i64) -> Result<i64, ParseError> {
        let expected = if max == i64::MAX {
            format!("integer >= {min}")
        } else {
            format!("integer in {min}..={max}")
        };
        match self.raw(argument).parse::<i64>() {
            Ok(v) if (min..=max).contains(&v) => Ok(v),
            _ => Err(self.bad(argument, &expected)),
        }
    }

    fn count(&self, argument: &str, min: i64) -> Result<usize, ParseError> {
        self.int_in(argument, min, i64::from(u32::MAX)).map(|v| v as usize)
    }

    fn offset(&self, argument: &str) -> Result<i32, ParseError> {
        self.int_in(argument, i64::from(i32::MIN), i64::from(i32::MAX))
            .map(|v| v as i32)
    }

    fn selector(&self) -> Result<Selector, ParseError> {
        let raw = self.raw("selector");
        let expected = "largest, smallest, nth-in-order(n>=1) or by-value(0-9)";
        let parsed = match raw {
            "largest" => Some(Selector::Largest),
            "smallest" => Some(Selector::Smallest),
            _ => {
                if let Some(n) = call_arg(raw, "nth-in-order") {
                    n.parse::<usize>().ok().filter(|&n| n >= 1).map(Selector::NthInOrder)
                } else if let Some(v) = call_arg(raw, "by-value") {
                    cell_value(v).map(Selector::ByValue)
                } else {
                    None
                }
            }
        };
        parsed.ok_or_else(|| self.bad("selector", expected))
    }
}

/// `name(inner)` -> `inner`.
fn call_arg<'s>(raw: &'s str, name: &str) -> Option<&'s str> {
    raw.strip_prefix(name)?
        .strip_prefix('(')?
        .strip_suffix(')')
        .map(str::trim)
}

fn cell_value(text: &str) -> Option<CellValue> {
    text.trim().parse::<u8>().ok().filter(|&v| v <= 9)
}

fn parse_line(line_no: usize, text: &str) -> Result<Primitive, ParseError> {
    let tokens = tokenize(text);
    let (name, rest) = tokens.split_first().expect("caller skips blank lines");
    let Some(&(primitive, expected_args)) = SIGNATURES.iter().find(|(n, _)| n == name) else {
        return Err(ParseError::UnknownPrimitive {
            line: line_no,
            name: name.clone(),
        });
    };

    let arity = |detail: String| ParseError::BadArity {
        line: line_no,
        primitive: primitive.to_string(),
        detail,
    };
    let mut values = BTreeMap::new();
    for token in rest {
        let Some((key, value)) = token.split_once('=') else {
            return Err(arity(format!("argument {token:?} is not name=value")));
        };
        if !expected_args.contains(&key) {
            return Err(arity(format!("unexpected argument {key:?}")));
        }
        if values.insert(key.to_string(), value.to_string()).is_some() {
            return Err(arity(format!("argument {key:?} given twice")));
        }
    }
    if let Some(missing) = expected_args.iter().find(|a| !values.contains_key(**a)) {
        return Err(arity(format!(
            "missing argument {missing:?}; expected {} argument(s): {}",
            expected_args.len(),
            expected_args.join(", ")
        )));
    }

    let args = Args {
        line: line_no,
        primitive,
        values,
    };
    let step = match primitive {
        "rotate" => Primitive::Rotate {
            quarter_turns: args.int_in("quarter_turns", 0, 3)? as u8,
        },
        "reflect" => Primitive::Reflect {
            axis: match args.raw("axis") {
                "horizontal" => ReflectAxis::Horizontal,
                "vertical" => ReflectAxis::Vertical,
                "main-diagonal" => ReflectAxis::MainDiagonal,
                "anti-diagonal" => ReflectAxis::AntiDiagonal,
                _ => return Err(args.bad("axis", "horizontal, vertical, main-diagonal or anti-diagonal")),
            },
        },
        "shift_object" => Primitive::ShiftObject {
            selector: args.selector()?,
            dr: args.offset("dr")?,
            dc: args.offset("dc")?,
        },
        "recolor" => {
            let expected = "comma-separated from:to pairs of values 0-9";
            let mut map = BTreeMap::new();
            for pair in args.raw("map").split(',') {
                let (from, to) = pair.split_once(':').ok_or_else(|| args.bad("map", expected))?;
                let (Some(from), Some(to)) = (cell_value(from), cell_value(to)) else {
                    return Err(args.bad("map", expected));
                };
                if map.insert(from, to).is_some() {
                    return Err(args.bad("map", "each source value at most once"));
                }
            }
            Primitive::Recolor { map }
        }
        "scatter_to_corners" => Primitive::ScatterToCorners {
            selector: args.selector()?,
        },
        "subsample" => Primitive::Subsample {
            row_offset: args.count("row_offset", 0)?,
            row_stride: args.count("row_stride", 1)?,
            col_offset: args.count("col_offset", 0)?,
            col_stride: args.count("col_stride", 1)?,
        },
        "crop_bbox" => Primitive::CropBbox {
            selector: args.selector()?,
        },
        "tile_pattern" => Primitive::TilePattern {
            out_rows: args.count("out_rows", 1)?,
            out_cols: args.count("out_cols", 1)?,
        },
        "combine_segments" => {
            let axis = match args.raw("axis") {
                "row" => Axis::Row,
                "column" => Axis::Column,
                _ => return Err(args.bad("axis", "row or column")),
            };
            let sep_raw = args.raw("separator");
            let separator = if let Some(i) = call_arg(sep_raw, "index") {
                i.parse::<usize>().ok().filter(|&i| i >= 1).map(Separator::Index)
            } else {
                call_arg(sep_raw, "value").and_then(cell_value).map(Separator::Value)
            }
            .ok_or_else(|| args.bad("separator", "index(n>=1) or value(0-9)"))?;
            let rule_raw = args.raw("rule");
            let rule = if rule_raw == "nonzero-union" {
                Some(CombineRule::NonzeroUnion)
            } else if let Some(v) = call_arg(rule_raw, "new-value-on-overlap") {
                cell_value(v).map(CombineRule::NewValueOnOverlap)
            } else if let Some(list) = call_arg(rule_raw, "priority") {
                let values: Option<Vec<CellValue>> = list.split(',').map(cell_value).collect();
                values.filter(|v| !v.is_empty()).map(CombineRule::Priority)
            } else {
                None
            }
            .ok_or_else(|| args.bad("rule", "priority(v,...), nonzero-union or new-value-on-overlap(v)"))?;
            Primitive::CombineSegments { axis, separator, rule }
        }
        "emit_fixed" => {
            let rows: Vec<Vec<u8>> =
                serde_json::from_str(args.raw("grid")).map_err(|_| args.bad("grid", "nested array of values 0-9"))?;
            let grid = Grid::from_rows(&rows).map_err(|_| args.bad("grid", "rectangular grid of values 0-9"))?;
            Primitive::EmitFixed { grid }
        }
        _ => unreachable!("signature table and match arms list the same primitives"),
    };
    Ok(step)
}

/// Parse a program. Blank lines and `#` comments are skipped.
pub fn parse_instruction(text: &str) -> Result<Instruction, ParseError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let code = raw.split('#').next().unwrap_or_default().trim();
        if code.is_empty() {
            continue;
        }
        steps.push(parse_line(i + 1, code)?);
    }
    Instruction::new(steps).ok_or(ParseError::EmptyProgram)
}
