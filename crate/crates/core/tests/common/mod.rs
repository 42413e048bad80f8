//! Shared helpers for the integration and acceptance targets: fixture
//! access, random generators and reference implementations written
//! directly from index formulas, independent of the library code.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use arcprompt::dsl::{CombineRule, Instruction, Primitive, ReflectAxis, Selector};
use arcprompt::views::{Axis, Connectivity, Grouping, Separator};
use arcprompt::{parse_task, Grid, Task};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<u8>>;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn fixture_task(id: &str) -> Task {
    let path = fixtures().join("tasks").join(format!("{id}.json"));
    parse_task(&std::fs::read_to_string(path).unwrap(), id).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random grid up to `max_side` per side; about half the cells are 0.
pub fn random_rows(rng: &mut impl Rng, max_side: usize, palette: u8) -> Rows {
    let rows = rng.gen_range(1..=max_side);
    let cols = rng.gen_range(1..=max_side);
    sized_rows(rng, rows, cols, palette)
}

pub fn sized_rows(rng: &mut impl Rng, rows: usize, cols: usize, palette: u8) -> Rows {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        0
                    } else {
                        rng.gen_range(1..=palette)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn to_grid(rows: &Rows) -> Grid {
    Grid::from_rows(rows).unwrap()
}

pub fn from_grid(grid: &Grid) -> Rows {
    grid.to_rows()
}

fn dims(g: &Rows) -> (usize, usize) {
    (g.len(), g[0].len())
}

// ---- geometry by index formula ----

pub fn rot_cw(g: &Rows) -> Rows {
    let (r, c) = dims(g);
    (0..c).map(|i| (0..r).map(|j| g[r - 1 - j][i]).collect()).collect()
}

pub fn flip_h(g: &Rows) -> Rows {
    let (r, _) = dims(g);
    (0..r).map(|i| g[r - 1 - i].clone()).collect()
}

pub fn flip_v(g: &Rows) -> Rows {
    g.iter().map(|row| row.iter().rev().copied().collect()).collect()
}

pub fn transpose(g: &Rows) -> Rows {
    let (r, c) = dims(g);
    (0..c).map(|i| (0..r).map(|j| g[j][i]).collect()).collect()
}

pub fn anti_transpose(g: &Rows) -> Rows {
    let (r, c) = dims(g);
    (0..c)
        .map(|i| (0..r).map(|j| g[r - 1 - j][c - 1 - i]).collect())
        .collect()
}

#[derive(Debug, PartialEq, Eq, Clone, Copy)]
pub struct Symmetries {
    pub horizontal: bool,
    pub vertical: bool,
    pub main_diagonal: bool,
    pub anti_diagonal: bool,
    pub rotation_90: bool,
    pub rotation_180: bool,
}

/// Cell-by-cell checks of each invariance.
pub fn oracle_symmetries(g: &Rows) -> Symmetries {
    let (r, c) = dims(g);
    let all = |f: &dyn Fn(usize, usize) -> bool| (0..r).all(|i| (0..c).all(|j| f(i, j)));
    let square = r == c;
    Symmetries {
        horizontal: all(&|i, j| g[i][j] == g[r - 1 - i][j]),
        vertical: all(&|i, j| g[i][j] == g[i][c - 1 - j]),
        main_diagonal: square && all(&|i, j| g[i][j] == g[j][i]),
        anti_diagonal: square && all(&|i, j| g[i][j] == g[c - 1 - j][r - 1 - i]),
        rotation_90: square && all(&|i, j| g[i][j] == g[r - 1 - j][i]),
        rotation_180: all(&|i, j| g[i][j] == g[r - 1 - i][c - 1 - j]),
    }
}

// ---- connected components by union-find over all neighbour pairs ----

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Components as sorted (row, col) lists, ordered by their first cell.
pub fn oracle_components(g: &Rows, eight: bool, same_value: bool, bg: u8) -> Vec<Vec<(usize, usize)>> {
    let (r, c) = dims(g);
    let mut parent: Vec<usize> = (0..r * c).collect();
    for i in 0..r {
        for j in 0..c {
            for i2 in 0..r {
                for j2 in 0..c {
                    let (di, dj) = (i.abs_diff(i2), j.abs_diff(j2));
                    let adjacent = if eight {
                        di <= 1 && dj <= 1 && (di, dj) != (0, 0)
                    } else {
                        di + dj == 1
                    };
                    if !adjacent || g[i][j] == bg || g[i2][j2] == bg {
                        continue;
                    }
                    if same_value && g[i][j] != g[i2][j2] {
                        continue;
                    }
                    let (a, b) = (find(&mut parent, i * c + j), find(&mut parent, i2 * c + j2));
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..r {
        for j in 0..c {
            if g[i][j] != bg {
                let root = find(&mut parent, i * c + j);
                groups.entry(root).or_default().push((i, j));
            }
        }
    }
    let mut out: Vec<Vec<(usize, usize)>> = groups
        .into_values()
        .map(|mut v| {
            v.sort();
            v
        })
        .collect();
    out.sort();
    out
}

pub const CONFIGS: [(Connectivity, Grouping); 4] = [
    (Connectivity::Four, Grouping::SameValue),
    (Connectivity::Four, Grouping::AnyNonBackground),
    (Connectivity::Eight, Grouping::SameValue),
    (Connectivity::Eight, Grouping::AnyNonBackground),
];

// ---- reference interpreter (background 0, 8-connected, any colour) ----

fn oracle_select(g: &Rows, selector: Selector) -> Option<Vec<(usize, usize)>> {
    let comps = oracle_components(g, true, false, 0);
    match selector {
        Selector::Largest => {
            let best = comps.iter().map(Vec::len).max()?;
            comps.into_iter().find(|c| c.len() == best)
        }
        Selector::Smallest => {
            let best = comps.iter().map(Vec::len).min()?;
            comps.into_iter().find(|c| c.len() == best)
        }
        Selector::NthInOrder(n) => comps.into_iter().nth(n.checked_sub(1)?),
        Selector::ByValue(v) => comps.into_iter().find(|c| c.iter().any(|&(i, j)| g[i][j] == v)),
    }
}

fn bbox(cells: &[(usize, usize)]) -> (usize, usize, usize, usize) {
    let top = cells.iter().map(|c| c.0).min().unwrap();
    let bottom = cells.iter().map(|c| c.0).max().unwrap();
    let left = cells.iter().map(|c| c.1).min().unwrap();
    let right = cells.iter().map(|c| c.1).max().unwrap();
    (top, left, bottom - top + 1, right - left + 1)
}

fn split(g: &Rows, axis: Axis, sep: Separator) -> Option<(Rows, Rows)> {
    let work = if axis == Axis::Column { transpose(g) } else { g.clone() };
    let n = work.len();
    let (a, b) = match sep {
        Separator::Index(i) => {
            if i == 0 || i >= n {
                return None;
            }
            (work[..i].to_vec(), work[i..].to_vec())
        }
        Separator::Value(v) => {
            let i = (1..n.saturating_sub(1)).find(|&i| work[i].iter().all(|&x| x == v))?;
            (work[..i].to_vec(), work[i + 1..].to_vec())
        }
    };
    if axis == Axis::Column {
        Some((transpose(&a), transpose(&b)))
    } else {
        Some((a, b))
    }
}

/// `None` wherever the library is expected to report an error.
pub fn oracle_apply(p: &Primitive, g: &Rows) -> Option<Rows> {
    let (r, c) = dims(g);
    Some(match p {
        Primitive::Rotate { quarter_turns } => {
            let mut out = g.clone();
            for _ in 0..*quarter_turns {
                out = rot_cw(&out);
            }
            out
        }
        Primitive::Reflect { axis } => match axis {
            ReflectAxis::Horizontal => flip_h(g),
            ReflectAxis::Vertical => flip_v(g),
            ReflectAxis::MainDiagonal => transpose(g),
            ReflectAxis::AntiDiagonal => anti_transpose(g),
        },
        Primitive::ShiftObject { selector, dr, dc } => {
            let cells = oracle_select(g, *selector)?;
            let mut out = g.clone();
            for &(i, j) in &cells {
                out[i][j] = 0;
            }
            for &(i, j) in &cells {
                let (ni, nj) = (i as i64 + *dr as i64, j as i64 + *dc as i64);
                if ni >= 0 && nj >= 0 && (ni as usize) < r && (nj as usize) < c {
                    out[ni as usize][nj as usize] = g[i][j];
                }
            }
            out
        }
        Primitive::Recolor { map } => g
            .iter()
            .map(|row| row.iter().map(|v| *map.get(v).unwrap_or(v)).collect())
            .collect(),
        Primitive::ScatterToCorners { selector } => {
            let cells = oracle_select(g, *selector)?;
            let (top, left, h, w) = bbox(&cells);
            if h % 2 == 1 || w % 2 == 1 {
                return None;
            }
            let mut out = g.clone();
            for &(i, j) in &cells {
                out[i][j] = 0;
            }
            for &(i, j) in &cells {
                let (li, lj) = (i - top, j - left);
                let ni = if 2 * li < h { li } else { r - (h - li) };
                let nj = if 2 * lj < w { lj } else { c - (w - lj) };
                out[ni][nj] = g[i][j];
            }
            out
        }
        Primitive::Subsample {
            row_offset,
            row_stride,
            col_offset,
            col_stride,
        } => {
            if *row_stride == 0 || *col_stride == 0 || *row_offset >= r || *col_offset >= c {
                return None;
            }
            (*row_offset..r)
                .step_by(*row_stride)
                .map(|i| (*col_offset..c).step_by(*col_stride).map(|j| g[i][j]).collect())
                .collect()
        }
        Primitive::CropBbox { selector } => {
            let cells = oracle_select(g, *selector)?;
            let (top, left, h, w) = bbox(&cells);
            (top..top + h).map(|i| g[i][left..left + w].to_vec()).collect()
        }
        Primitive::TilePattern { out_rows, out_cols } => {
            if *out_rows == 0 || *out_cols == 0 {
                return None;
            }
            (0..*out_rows)
                .map(|i| (0..*out_cols).map(|j| g[i % r][j % c]).collect())
                .collect()
        }
        Primitive::CombineSegments { axis, separator, rule } => {
            let (a, b) = split(g, *axis, *separator)?;
            if dims(&a) != dims(&b) {
                return None;
            }
            let (pr, pc) = dims(&a);
            (0..pr)
                .map(|i| {
                    (0..pc)
                        .map(|j| {
                            let (x, y) = (a[i][j], b[i][j]);
                            match rule {
                                CombineRule::NonzeroUnion => {
                                    if x != 0 {
                                        x
                                    } else {
                                        y
                                    }
                                }
                                CombineRule::NewValueOnOverlap(v) => match (x != 0, y != 0) {
                                    (true, true) => *v,
                                    (true, false) => x,
                                    _ => y,
                                },
                                CombineRule::Priority(order) => {
                                    let rank = |v: u8| {
                                        order.iter().position(|&p| p == v).unwrap_or(if v != 0 {
                                            order.len()
                                        } else {
                                            order.len() + 1
                                        })
                                    };
                                    if rank(y) < rank(x) {
                                        y
                                    } else {
                                        x
                                    }
                                }
                            }
                        })
                        .collect()
                })
                .collect()
        }
        Primitive::EmitFixed { grid } => from_grid(grid),
    })
}

pub fn oracle_run(instr: &Instruction, g: &Rows) -> Option<Rows> {
    let mut cur = g.clone();
    for p in instr.steps() {
        cur = oracle_apply(p, &cur)?;
    }
    Some(cur)
}

// ---- random primitives ----

pub fn random_selector(rng: &mut impl Rng) -> Selector {
    match rng.gen_range(0..4) {
        0 => Selector::Largest,
        1 => Selector::Smallest,
        2 => Selector::NthInOrder(rng.gen_range(1..=3)),
        _ => Selector::ByValue(rng.gen_range(1..=4)),
    }
}

pub fn random_axis(rng: &mut impl Rng) -> ReflectAxis {
    *[
        ReflectAxis::Horizontal,
        ReflectAxis::Vertical,
        ReflectAxis::MainDiagonal,
        ReflectAxis::AntiDiagonal,
    ]
    .choose(rng)
    .unwrap()
}

pub fn random_recolor(rng: &mut impl Rng) -> BTreeMap<u8, u8> {
    (0..rng.gen_range(1..=3))
        .map(|_| (rng.gen_range(0..=5), rng.gen_range(0..=9)))
        .collect()
}

/// Primitive number `kind` (0-9) with random parameters.
pub fn random_primitive(rng: &mut impl Rng, kind: usize) -> Primitive {
    match kind {
        0 => Primitive::Rotate {
            quarter_turns: rng.gen_range(0..4),
        },
        1 => Primitive::Reflect { axis: random_axis(rng) },
        2 => Primitive::ShiftObject {
            selector: random_selector(rng),
            dr: rng.gen_range(-3..=3),
            dc: rng.gen_range(-3..=3),
        },
        3 => Primitive::Recolor {
            map: random_recolor(rng),
        },
        4 => Primitive::ScatterToCorners {
            selector: random_selector(rng),
        },
        5 => Primitive::Subsample {
            row_offset: rng.gen_range(0..3),
            row_stride: rng.gen_range(1..4),
            col_offset: rng.gen_range(0..3),
            col_stride: rng.gen_range(1..4),
        },
        6 => Primitive::CropBbox {
            selector: random_selector(rng),
        },
        7 => Primitive::TilePattern {
            out_rows: rng.gen_range(1..10),
            out_cols: rng.gen_range(1..10),
        },
        8 => {
            let axis = if rng.gen_bool(0.5) { Axis::Row } else { Axis::Column };
            let separator = if rng.gen_bool(0.5) {
                Separator::Index(rng.gen_range(0..5))
            } else {
                Separator::Value(rng.gen_range(0..=4))
            };
            let rule = match rng.gen_range(0..3) {
                0 => CombineRule::NonzeroUnion,
                1 => CombineRule::NewValueOnOverlap(rng.gen_range(0..=9)),
                _ => {
                    let mut order: Vec<u8> = (0..=4).collect();
                    order.shuffle(rng);
                    order.truncate(rng.gen_range(1..=5));
                    CombineRule::Priority(order)
                }
            };
            Primitive::CombineSegments { axis, separator, rule }
        }
        _ => {
            let (r, c) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let rows = sized_rows(rng, r, c, 9);
            Primitive::EmitFixed { grid: to_grid(&rows) }
        }
    }
}

/// A program family that usually runs on arbitrary inputs.
pub fn random_program(rng: &mut impl Rng) -> Instruction {
    let len = rng.gen_range(1..=2);
    let steps = (0..len)
        .map(|_| {
            let kind = *[0usize, 1, 2, 3, 5, 6, 7, 8].choose(rng).unwrap();
            random_primitive(rng, kind)
        })
        .collect();
    Instruction::new(steps).unwrap()
}

/// Perturb one parameter of one step, or swap one step for another kind.
pub fn mutate(rng: &mut impl Rng, instr: &Instruction) -> Instruction {
    let mut steps = instr.steps().to_vec();
    let i = rng.gen_range(0..steps.len());
    steps[i] = if rng.gen_bool(0.3) {
        let kind = rng.gen_range(0..10);
        random_primitive(rng, kind)
    } else {
        match &steps[i] {
            Primitive::Rotate { quarter_turns } => Primitive::Rotate {
                quarter_turns: (quarter_turns + rng.gen_range(1..4)) % 4,
            },
            Primitive::Reflect { .. } => Primitive::Reflect { axis: random_axis(rng) },
            Primitive::ShiftObject { selector, dr, dc } => Primitive::ShiftObject {
                selector: *selector,
                dr: dr + rng.gen_range(-1..=1),
                dc: dc + 1,
            },
            Primitive::Recolor { map } => {
                let mut map = map.clone();
                map.insert(rng.gen_range(1..=5), rng.gen_range(0..=9));
                Primitive::Recolor { map }
            }
            Primitive::Subsample {
                row_offset,
                row_stride,
                col_offset,
                col_stride,
            } => Primitive::Subsample {
                row_offset: *row_offset,
                row_stride: row_stride + 1,
                col_offset: *col_offset,
                col_stride: *col_stride,
            },
            Primitive::TilePattern { out_rows, out_cols } => Primitive::TilePattern {
                out_rows: out_rows + 1,
                out_cols: *out_cols,
            },
            other => {
                let kind = rng.gen_range(0..10);
                let p = random_primitive(rng, kind);
                if &p == other {
                    Primitive::Rotate { quarter_turns: 1 }
                } else {
                    p
                }
            }
        }
    };
    Instruction::new(steps).unwrap()
}

// ---- exact k-NN by full scan ----

pub fn brute_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Ids of the k best entries: highest cosine first, then smallest id.
pub fn brute_top_k(entries: &[(String, Vec<f64>)], query: &[f64], k: usize) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = entries
        .iter()
        .map(|(id, e)| (brute_cosine(query, e), id.as_str()))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub mod criteria;
