// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic designs with answers known by construction.
//!
//! A fixture is a small four-metal design: random logic at a target density,
//! trigger spaces of planted sizes fenced by a ring of guard cells, and
//! planted critical wires on metal2 whose surroundings are drawn so their
//! blockage is known exactly. The generator also computes its own answers
//! (region sizes, blockage, route distances, viable counts) from the
//! occupancy it placed, without going through the analysis code.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::attacks::reference_attacks;
use crate::gdsii::{GdsBoundary, GdsCell, GdsElementKind, GdsLibrary, GdsPlacement, GdsSref};
use crate::geom::{manhattan_rect_distance, Coord, Orient, Point, Rect, Transform};
use crate::layout::{build_layout, AttackSpec, BuildOptions, LayoutError};
use crate::lefdef::{
    parse_def, write_def, write_lef, Component, Direction, FloorplanDef, LayerKind, LayerMap, Lef,
    Macro, MacroPin, NetPin, ParseError, PlacementStatus, RoutedNet, Row, Segment, Site, TechLayer,
    ViaDef, ViaUse,
};
use crate::netlist::CriticalSet;

pub const DBU_PER_MICRON: i64 = 2000;
pub const SITE_W: Coord = 380;
pub const SITE_H: Coord = 3420;
/// Routing pitch of every metal layer; tracks sit at `190 + k·380`.
pub const PITCH: Coord = 380;
pub const WIRE_W: Coord = 140;
/// Half-width, in sites, of the keep-out around a planted wire.
const KEEPOUT_COLS: usize = 3;
const SITE_NAME: &str = "core";
const GUARD: &str = "GUARD1";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("infeasible fixture: {0}")]
    Infeasible(String),
    #[error("filling fraction {0} is outside [0, 1]")]
    Fraction(f64),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Layout(#[from] LayoutError),
}

/// Surroundings drawn around a planted wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    /// Nothing within the keep-out.
    None,
    /// A metal2 frame enclosing the probe ring.
    Ring,
    /// Metal3 over the whole wire.
    CoverAbove,
    /// Frame plus metal1 and metal3 covers.
    Full,
}

impl Recipe {
    /// Exact (same-layer, adjacent-layer, overall) blocked fractions.
    pub fn expected(self) -> (Ratio<i128>, Ratio<i128>, Ratio<i128>) {
        let r = |n, d| Ratio::new(n, d);
        match self {
            Recipe::None => (r(0, 1), r(0, 1), r(0, 1)),
            Recipe::Ring => (r(1, 1), r(0, 1), r(2, 3)),
            Recipe::CoverAbove => (r(0, 1), r(1, 2), r(1, 6)),
            Recipe::Full => (r(1, 1), r(1, 1), r(1, 1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRegion {
    pub size: usize,
    /// Lower-left site `(col, row)`.
    pub anchor: (usize, usize),
    /// Sites per row; the last row holds the remainder.
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedNet {
    pub name: String,
    /// The wire runs vertically on metal2 through the center of site `col`,
    /// from the middle of row `row` to the middle of row `row + rows`.
    pub col: usize,
    pub row: usize,
    pub rows: usize,
    pub recipe: Recipe,
    /// Another planted net whose driver reads this one.
    pub feeds: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub cols: usize,
    pub rows: usize,
    /// Target occupied fraction of unreserved sites.
    pub density: f64,
    pub regions: Vec<PlantedRegion>,
    pub nets: Vec<PlantedNet>,
    pub random_nets: usize,
    /// Fraction of open sites filled nearest-first around the planted nets.
    pub fill_fraction: f64,
}

fn planted(name: &str, col: usize, row: usize, rows: usize, recipe: Recipe) -> PlantedNet {
    PlantedNet {
        name: name.into(),
        col,
        row,
        rows,
        recipe,
        feeds: None,
    }
}

impl FixtureSpec {
    /// A small design exercising every recipe, with a fan-in chain.
    pub fn demo(seed: u64) -> Self {
        let mut mux = planted("key_mux", 40, 22, 3, Recipe::Full);
        mux.feeds = Some("sec_key".into());
        FixtureSpec {
            seed,
            cols: 96,
            rows: 40,
            density: 0.6,
            regions: vec![
                PlantedRegion {
                    size: 25,
                    anchor: (4, 3),
                    width: 5,
                },
                PlantedRegion {
                    size: 400,
                    anchor: (60, 20),
                    width: 20,
                },
            ],
            nets: vec![
                planted("sec_key", 20, 6, 4, Recipe::None),
                planted("sec_mode", 40, 6, 3, Recipe::Ring),
                planted("sec_cfg", 20, 22, 5, Recipe::CoverAbove),
                mux,
            ],
            random_nets: 300,
            fill_fraction: 0.0,
        }
    }

    /// Regions large enough for every reference attack.
    pub fn reference(seed: u64) -> Self {
        FixtureSpec {
            seed,
            cols: 160,
            rows: 64,
            density: 0.7,
            regions: vec![
                PlantedRegion {
                    size: 2600,
                    anchor: (2, 2),
                    width: 100,
                },
                PlantedRegion {
                    size: 1500,
                    anchor: (2, 32),
                    width: 60,
                },
                PlantedRegion {
                    size: 360,
                    anchor: (120, 40),
                    width: 30,
                },
                PlantedRegion {
                    size: 24,
                    anchor: (140, 4),
                    width: 6,
                },
            ],
            nets: vec![
                planted("sec_key", 115, 6, 4, Recipe::None),
                planted("sec_mode", 80, 36, 3, Recipe::Ring),
                planted("sec_cfg", 135, 20, 5, Recipe::CoverAbove),
                planted("sec_lock", 90, 52, 3, Recipe::Full),
            ],
            random_nets: 1200,
            fill_fraction: 0.0,
        }
    }

    /// The scale target: 512 × 512 sites and 10k routed nets.
    pub fn large(seed: u64) -> Self {
        let mut nets = Vec::new();
        let recipes = [Recipe::None, Recipe::Ring, Recipe::CoverAbove, Recipe::Full];
        for k in 0..8 {
            nets.push(planted(
                &format!("sec_n{k}"),
                40 + 60 * k,
                100 + 40 * (k % 4),
                4,
                recipes[k % 4],
            ));
        }
        FixtureSpec {
            seed,
            cols: 512,
            rows: 512,
            density: 0.75,
            regions: vec![
                PlantedRegion {
                    size: 3000,
                    anchor: (20, 300),
                    width: 120,
                },
                PlantedRegion {
                    size: 1444,
                    anchor: (300, 300),
                    width: 76,
                },
                PlantedRegion {
                    size: 342,
                    anchor: (200, 400),
                    width: 19,
                },
                PlantedRegion {
                    size: 20,
                    anchor: (450, 450),
                    width: 5,
                },
            ],
            nets,
            random_nets: 10_800,
            fill_fraction: 0.0,
        }
    }
}

/// Generator answers, computed from the placed occupancy and the planted
/// geometry alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expected {
    pub seed: u64,
    pub open_sites: usize,
    /// Region size to count, from an independent flood fill.
    pub region_histogram: BTreeMap<usize, usize>,
    pub planted_regions: Vec<usize>,
    pub critical: Vec<String>,
    pub nets: Vec<ExpectedNet>,
    /// Routed regular-net centerline lengths, by name.
    pub lengths: BTreeMap<String, Coord>,
    /// Distances for pairs whose region is at least as large as the
    /// smallest reference attack.
    pub pairs: Vec<ExpectedPair>,
    pub viable: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedNet {
    pub name: String,
    pub recipe: Recipe,
    pub same_layer: String,
    pub adjacent_layer: String,
    pub overall: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpectedPair {
    pub net: String,
    pub region_seed: (u32, u32),
    pub region_size: usize,
    pub manhattan: Coord,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub lef: String,
    pub def: String,
    pub netlist: String,
    pub gds: Vec<u8>,
    pub layermap: String,
    pub attacks: String,
    pub expected: Expected,
}

// ---------------------------------------------------------------------------
// Technology

const LAYERS: [(&str, LayerKind, Option<Direction>, i16); 7] = [
    (
        "metal1",
        LayerKind::Routing,
        Some(Direction::Horizontal),
        10,
    ),
    ("via1", LayerKind::Cut, None, 11),
    ("metal2", LayerKind::Routing, Some(Direction::Vertical), 12),
    ("via2", LayerKind::Cut, None, 13),
    (
        "metal3",
        LayerKind::Routing,
        Some(Direction::Horizontal),
        14,
    ),
    ("via3", LayerKind::Cut, None, 15),
    ("metal4", LayerKind::Routing, Some(Direction::Vertical), 16),
];

/// `(macro, span in sites, input pins, output pin)`.
const LOGIC: [(&str, usize, &[&str], &str); 11] = [
    ("INV", 2, &["A"], "Y"),
    ("BUF", 3, &["A"], "Y"),
    ("NAND2", 3, &["A", "B"], "Y"),
    ("NAND3", 4, &["A", "B", "C"], "Y"),
    ("NOR2", 3, &["A", "B"], "Y"),
    ("NOR3", 4, &["A", "B", "C"], "Y"),
    ("AND2", 4, &["A", "B"], "Y"),
    ("OR2", 4, &["A", "B"], "Y"),
    ("XOR2", 5, &["A", "B"], "Y"),
    ("MUX2", 6, &["A", "B", "S"], "Y"),
    ("DFF", 12, &["D", "CLK"], "Q"),
];

const FILLERS: [(&str, usize); 3] = [("FILL1", 1), ("FILL2", 2), ("FILL4", 4)];

/// Metal1 pin rectangle for pin slot `k` of a cell (local coordinates). The
/// rectangle is symmetric about the row's mid-line so it lands on the same
/// track under N and FS.
fn pin_rect(k: usize) -> Rect {
    let x = 190 + SITE_W * k as Coord;
    Rect::new(x - 70, SITE_H / 2 - 190, x + 70, SITE_H / 2 + 190)
}

/// The four-metal library used by every fixture.
pub fn technology() -> Lef {
    let layers = LAYERS
        .iter()
        .map(|&(name, kind, direction, _)| {
            let routing = kind == LayerKind::Routing;
            TechLayer {
                name: name.into(),
                kind,
                direction,
                pitch: if routing { PITCH } else { 0 },
                min_width: WIRE_W,
                min_spacing: if name == "metal1" { 130 } else { 140 },
                stack_index: 0,
            }
        })
        .collect();
    let cut = Rect::new(-70, -70, 70, 70);
    let vias = (0..3)
        .map(|i| {
            let (lo, cl, hi) = (LAYERS[2 * i].0, LAYERS[2 * i + 1].0, LAYERS[2 * i + 2].0);
            let pad = |dir: Option<Direction>| match dir {
                Some(Direction::Vertical) => Rect::new(-70, -130, 70, 130),
                _ => Rect::new(-130, -70, 130, 70),
            };
            ViaDef {
                name: format!("via{}{}", i + 1, i + 2),
                layers: vec![
                    (lo.into(), vec![pad(LAYERS[2 * i].2)]),
                    (cl.into(), vec![cut]),
                    (hi.into(), vec![pad(LAYERS[2 * i + 2].2)]),
                ],
            }
        })
        .collect();
    let site = Site {
        name: SITE_NAME.into(),
        class: "CORE".into(),
        width: SITE_W,
        height: SITE_H,
    };
    let rails = [("metal1".to_string(), Rect::new(0, 0, 0, 170)),
        ("metal1".to_string(), Rect::new(0, SITE_H - 170, 0, SITE_H))];
    let mut macros = Vec::new();
    for (name, span, ins, out) in LOGIC {
        let w = SITE_W * span as Coord;
        let pins = ins
            .iter()
            .map(|p| (p, "INPUT"))
            .chain([(&out, "OUTPUT")])
            .enumerate()
            .map(|(k, (p, dir))| MacroPin {
                name: p.to_string(),
                direction: Some(dir.into()),
                shapes: vec![("metal1".into(), pin_rect(k))],
            })
            .collect();
        let obstructions = rails
            .iter()
            .map(|(l, r)| (l.clone(), Rect::new(0, r.lo.y, w, r.hi.y)))
            .collect();
        macros.push(cell_macro(name, span, "CORE", pins, obstructions));
    }
    for (name, span) in FILLERS {
        macros.push(cell_macro(
            name,
            span,
            "CORE SPACER",
            Vec::new(),
            Vec::new(),
        ));
    }
    macros.push(cell_macro(GUARD, 1, "CORE", Vec::new(), Vec::new()));
    Lef::from_parts(DBU_PER_MICRON, layers, vias, vec![site], macros)
}

fn cell_macro(
    name: &str,
    span: usize,
    class: &str,
    pins: Vec<MacroPin>,
    obs: Vec<(String, Rect)>,
) -> Macro {
    Macro {
        name: name.into(),
        class: Some(class.into()),
        size: (SITE_W * span as Coord, SITE_H),
        site: Some(SITE_NAME.into()),
        site_span: span,
        row_span: 1,
        pins,
        obstructions: obs,
    }
}

pub fn layermap() -> LayerMap {
    let mut m = LayerMap::default();
    for (name, _, _, gds) in LAYERS {
        m.insert(name, "drawing", gds, 0);
    }
    m
}

pub fn attacks_text(attacks: &[AttackSpec]) -> String {
    let mut s = String::new();
    for a in attacks {
        writeln!(s, "attack {}", a.name).unwrap();
        writeln!(s, "cells {}", a.std_cells).unwrap();
        writeln!(s, "sites {}", a.placement_sites).unwrap();
        writeln!(s, "timing_critical {}", a.timing_critical).unwrap();
        if !a.target_nets.is_empty() {
            writeln!(s, "targets {}", a.target_nets.join(", ")).unwrap();
        }
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// Generation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reserve {
    Free,
    Region,
    Guard,
    KeepOut,
}

struct Placed {
    name: String,
    macro_name: &'static str,
    col: usize,
    row: usize,
    /// Index into `LOGIC` for logic cells.
    logic: Option<usize>,
}

fn row_orient(row: usize) -> Orient {
    Orient::from_def(if row.is_multiple_of(2) { "N" } else { "FS" }).expect("known code")
}

fn site_rect(col: usize, row: usize) -> Rect {
    let (x, y) = (col as Coord * SITE_W, row as Coord * SITE_H);
    Rect::new(x, y, x + SITE_W, y + SITE_H)
}

fn track_x(col: usize) -> Coord {
    col as Coord * SITE_W + SITE_W / 2
}

fn track_y(row: usize) -> Coord {
    row as Coord * SITE_H + SITE_H / 2
}

/// The drawn rectangle of a planted wire.
pub fn planted_wire(n: &PlantedNet) -> Rect {
    let x = track_x(n.col);
    Rect::new(
        x - WIRE_W / 2,
        track_y(n.row) - WIRE_W / 2,
        x + WIRE_W / 2,
        track_y(n.row + n.rows) + WIRE_W / 2,
    )
}

fn keepout_sites(n: &PlantedNet) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    let c0 = n.col.checked_sub(KEEPOUT_COLS)?;
    let r0 = n.row.checked_sub(1)?;
    Some((c0..n.col + KEEPOUT_COLS + 1, r0..n.row + n.rows + 2))
}

fn region_sites(r: &PlantedRegion) -> Vec<(usize, usize)> {
    (0..r.size)
        .map(|i| (r.anchor.0 + i % r.width, r.anchor.1 + i / r.width))
        .collect()
}

fn reserve(spec: &FixtureSpec) -> Result<Vec<Reserve>, FixtureError> {
    let (cols, rows) = (spec.cols, spec.rows);
    let bad = |m: String| Err(FixtureError::Infeasible(m));
    let mut res = vec![Reserve::Free; cols * rows];
    for n in &spec.nets {
        let Some((cs, rs)) = keepout_sites(n) else {
            return bad(format!("net {} is too close to the die edge", n.name));
        };
        if cs.end > cols || rs.end > rows || n.rows == 0 {
            return bad(format!("net {} does not fit the grid", n.name));
        }
        for r in rs {
            for c in cs.clone() {
                if res[r * cols + c] != Reserve::Free {
                    return bad(format!("net {} overlaps another planted object", n.name));
                }
                res[r * cols + c] = Reserve::KeepOut;
            }
        }
    }
    for (i, reg) in spec.regions.iter().enumerate() {
        if reg.size == 0 || reg.width == 0 {
            return bad(format!("region {i} is empty"));
        }
        let sites = region_sites(reg);
        for &(c, r) in &sites {
            if c >= cols || r >= rows || res[r * cols + c] != Reserve::Free {
                return bad(format!("region {i} does not fit"));
            }
            res[r * cols + c] = Reserve::Region;
        }
        for &(c, r) in &sites {
            let neighbours = [
                (c.wrapping_sub(1), r),
                (c + 1, r),
                (c, r.wrapping_sub(1)),
                (c, r + 1),
            ];
            for (nc, nr) in neighbours {
                if nc >= cols || nr >= rows {
                    continue;
                }
                match res[nr * cols + nc] {
                    Reserve::Free => res[nr * cols + nc] = Reserve::Guard,
                    Reserve::Guard | Reserve::Region => {}
                    Reserve::KeepOut => return bad(format!("region {i} touches a keep-out")),
                }
            }
        }
    }
    // Guards of two regions may not be shared: a region touching another's
    // guard ring through a region site would merge them.
    Ok(res)
}

/// Builds the design described by `spec`.
pub fn generate(spec: &FixtureSpec) -> Result<Fixture, FixtureError> {
    if !(0.0..=1.0).contains(&spec.density) {
        return Err(FixtureError::Infeasible(format!(
            "density {} outside [0, 1]",
            spec.density
        )));
    }
    let mut names = BTreeSet::new();
    for n in &spec.nets {
        if !names.insert(n.name.as_str()) {
            return Err(FixtureError::Infeasible(format!(
                "duplicate planted net {}",
                n.name
            )));
        }
    }
    for n in &spec.nets {
        if let Some(t) = &n.feeds {
            if !names.contains(t.as_str()) || t == &n.name {
                return Err(FixtureError::Infeasible(format!(
                    "net {} feeds unknown net {t}",
                    n.name
                )));
            }
        }
    }
    let lef = technology();
    let res = reserve(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (cols, rows) = (spec.cols, spec.rows);

    // Placement.
    let mean_span = LOGIC.iter().map(|l| l.1 as f64).sum::<f64>() / LOGIC.len() as f64;
    let f = spec.density.min(0.999);
    let p_cell = f / (mean_span * (1.0 - f) + f);
    let mut occupied = vec![false; cols * rows];
    let mut placed: Vec<Placed> = Vec::new();
    let mut fill_count = 0usize;
    for r in 0..rows {
        let mut c = 0;
        while c < cols {
            let free_run = (c..cols)
                .take_while(|&k| res[r * cols + k] == Reserve::Free)
                .count();
            if res[r * cols + c] == Reserve::Guard {
                occupied[r * cols + c] = true;
                placed.push(Placed {
                    name: format!("guard_{r}_{c}"),
                    macro_name: GUARD,
                    col: c,
                    row: r,
                    logic: None,
                });
                c += 1;
                continue;
            }
            if free_run == 0 {
                c += 1;
                continue;
            }
            if rng.gen_bool(p_cell) {
                let k = rng.gen_range(0..LOGIC.len());
                let span = LOGIC[k].1;
                if span <= free_run {
                    for s in c..c + span {
                        occupied[r * cols + s] = true;
                    }
                    placed.push(Placed {
                        name: format!("u{}", placed.len()),
                        macro_name: LOGIC[k].0,
                        col: c,
                        row: r,
                        logic: Some(k),
                    });
                    c += span;
                    continue;
                }
            }
            if rng.gen_bool(0.2) {
                let (name, span) = FILLERS[rng.gen_range(0..FILLERS.len())];
                if span <= free_run {
                    placed.push(Placed {
                        name: format!("fill_{fill_count}"),
                        macro_name: name,
                        col: c,
                        row: r,
                        logic: None,
                    });
                    fill_count += 1;
                    c += span;
                    continue;
                }
            }
            c += 1;
        }
    }

    let logic_cells: Vec<usize> = (0..placed.len())
        .filter(|&i| placed[i].logic.is_some())
        .collect();
    // Per logic cell: output net and input nets (by pin slot).
    let mut out_net: BTreeMap<usize, String> = BTreeMap::new();
    let mut in_nets: BTreeMap<(usize, usize), String> = BTreeMap::new();
    let mut primary_inputs: Vec<String> = vec!["clk".into()];

    // Planted drivers: a non-sequential cell with enough inputs.
    let mut shuffled = logic_cells.clone();
    shuffled.shuffle(&mut rng);
    let mut taken = BTreeSet::new();
    for n in &spec.nets {
        let feeders: Vec<&PlantedNet> = spec
            .nets
            .iter()
            .filter(|m| m.feeds.as_deref() == Some(&n.name))
            .collect();
        let need = 1 + feeders.len();
        let Some(&cell) = shuffled.iter().find(|&&i| {
            let k = placed[i].logic.unwrap();
            !taken.contains(&i) && LOGIC[k].0 != "DFF" && LOGIC[k].2.len() >= need
        }) else {
            return Err(FixtureError::Infeasible(format!(
                "no cell can drive {}",
                n.name
            )));
        };
        taken.insert(cell);
        out_net.insert(cell, n.name.clone());
        let pi = format!("pi_{}", n.name);
        in_nets.insert((cell, 0), pi.clone());
        primary_inputs.push(pi);
        for (slot, fd) in feeders.iter().enumerate() {
            in_nets.insert((cell, slot + 1), fd.name.clone());
        }
    }

    // Random nets, each driven by one cell and read by up to two neighbours
    // in placement order.
    let drivers: Vec<usize> = shuffled
        .iter()
        .copied()
        .filter(|i| !taken.contains(i))
        .collect();
    // (name, driver, load pins)
    type RandomNet = (String, usize, Vec<(usize, usize)>);
    let mut random_nets: Vec<RandomNet> = Vec::new();
    let pos_of: BTreeMap<usize, usize> = logic_cells
        .iter()
        .enumerate()
        .map(|(p, &i)| (i, p))
        .collect();
    for (k, &d) in drivers.iter().take(spec.random_nets).enumerate() {
        let name = format!("n{k}");
        out_net.insert(d, name.clone());
        let p = pos_of[&d];
        let mut loads = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let lo = p.saturating_sub(30);
            let hi = (p + 30).min(logic_cells.len() - 1);
            let q = logic_cells[rng.gen_range(lo..=hi)];
            if q == d || taken.contains(&q) {
                continue;
            }
            let k = placed[q].logic.unwrap();
            let slot = LOGIC[k]
                .2
                .iter()
                .enumerate()
                .position(|(s, pin)| *pin != "CLK" && !in_nets.contains_key(&(q, s)));
            if let Some(s) = slot {
                in_nets.insert((q, s), name.clone());
                loads.push((q, s));
            }
        }
        random_nets.push((name, d, loads));
    }
    for &i in &logic_cells {
        let k = placed[i].logic.unwrap();
        if let Some(s) = LOGIC[k].2.iter().position(|p| *p == "CLK") {
            in_nets.insert((i, s), "clk".into());
        }
    }

    // Keep-out rectangles in dbu, for routing avoidance.
    let keepouts: Vec<Rect> = spec
        .nets
        .iter()
        .map(|n| {
            let (cs, rs) = keepout_sites(n).expect("checked");
            site_rect(cs.start, rs.start).union(&site_rect(cs.end - 1, rs.end - 1))
        })
        .collect();
    let pin_center = |cell: usize, slot: usize| {
        Point::new(track_x(placed[cell].col + slot), track_y(placed[cell].row))
    };
    let via34 = lef.via("via34").expect("technology via").clone();
    let blocked = |segs: &[Segment], vias: &[Point]| {
        let mut rects: Vec<Rect> = segs.iter().map(Segment::rect).collect();
        for v in vias {
            for (_, rs) in &via34.layers {
                rects.extend(rs.iter().map(|r| r.translate(v.x, v.y)));
            }
        }
        rects.iter().any(|r| {
            keepouts
                .iter()
                .any(|k| r.expand(WIRE_W).overlap(k).is_some())
        })
    };
    let seg = |layer: &str, a: Point, b: Point| Segment {
        layer: layer.into(),
        start: a,
        end: b,
        width: WIRE_W,
        ext: WIRE_W / 2,
    };
    let mut def_nets = Vec::new();
    let mut lengths = BTreeMap::new();
    for (name, d, loads) in &random_nets {
        let k = placed[*d].logic.unwrap();
        let out_slot = LOGIC[k].2.len();
        let mut net = RoutedNet {
            name: name.clone(),
            pins: vec![NetPin {
                instance: placed[*d].name.clone(),
                pin: LOGIC[k].3.into(),
            }],
            ..Default::default()
        };
        let a = pin_center(*d, out_slot);
        for &(q, s) in loads {
            net.pins.push(NetPin {
                instance: placed[q].name.clone(),
                pin: LOGIC[placed[q].logic.unwrap()].2[s].into(),
            });
            let b = pin_center(q, s);
            if a == b {
                continue;
            }
            // Horizontal-first, then vertical-first.
            let options = [
                (Point::new(b.x, a.y), "metal3", "metal4"),
                (Point::new(a.x, b.y), "metal4", "metal3"),
            ];
            for (corner, first, second) in options {
                let mut segs = Vec::new();
                if corner != a {
                    segs.push(seg(first, a, corner));
                }
                if corner != b {
                    segs.push(seg(second, corner, b));
                }
                let vias: Vec<Point> = if segs.len() == 2 {
                    vec![corner]
                } else {
                    Vec::new()
                };
                if !blocked(&segs, &vias) {
                    net.segments.extend(segs);
                    net.vias.extend(vias.into_iter().map(|at| ViaUse {
                        via: "via34".into(),
                        at,
                    }));
                    break;
                }
            }
        }
        if net.is_routed() {
            lengths.insert(name.clone(), net.length());
        }
        def_nets.push(net);
    }

    let mut special = Vec::new();
    for n in &spec.nets {
        let w = planted_wire(n);
        let x = track_x(n.col);
        let net = RoutedNet {
            name: n.name.clone(),
            segments: vec![seg(
                "metal2",
                Point::new(x, track_y(n.row)),
                Point::new(x, track_y(n.row + n.rows)),
            )],
            ..Default::default()
        };
        lengths.insert(n.name.clone(), net.length());
        def_nets.push(net);
        let mut rects = Vec::new();
        if matches!(n.recipe, Recipe::Ring | Recipe::Full) {
            let (o, i) = (w.expand(600), w.expand(200));
            for r in [
                Rect::new(o.lo.x, o.lo.y, o.hi.x, i.lo.y),
                Rect::new(o.lo.x, i.hi.y, o.hi.x, o.hi.y),
                Rect::new(o.lo.x, i.lo.y, i.lo.x, i.hi.y),
                Rect::new(i.hi.x, i.lo.y, o.hi.x, i.hi.y),
            ] {
                rects.push(("metal2".to_string(), r));
            }
        }
        if matches!(n.recipe, Recipe::CoverAbove | Recipe::Full) {
            rects.push(("metal3".into(), w.expand(200)));
        }
        if n.recipe == Recipe::Full {
            rects.push(("metal1".into(), w.expand(200)));
        }
        if !rects.is_empty() {
            special.push(RoutedNet {
                name: format!("blk_{}", n.name),
                rects,
                ..Default::default()
            });
        }
    }
    def_nets.sort_by(|a, b| a.name.cmp(&b.name));

    let die = Rect::new(0, 0, cols as Coord * SITE_W, rows as Coord * SITE_H);
    let floorplan = FloorplanDef {
        design: "fixture".into(),
        die_area: die,
        rows: (0..rows)
            .map(|r| Row {
                name: format!("row_{r}"),
                site: SITE_NAME.into(),
                origin: Point::new(0, r as Coord * SITE_H),
                orient: row_orient(r),
                count_x: cols,
                count_y: 1,
                step: (SITE_W, 0),
            })
            .collect(),
        components: placed
            .iter()
            .map(|p| Component {
                name: p.name.clone(),
                macro_name: p.macro_name.into(),
                location: Point::new(p.col as Coord * SITE_W, p.row as Coord * SITE_H),
                orient: row_orient(p.row),
                status: PlacementStatus::Placed,
            })
            .collect(),
        nets: def_nets,
        special_nets: special,
    };

    // Netlist.
    let mut nl = String::new();
    let inputs = primary_inputs.join(", ");
    writeln!(nl, "module fixture({inputs});").unwrap();
    writeln!(nl, "  input {inputs};").unwrap();
    let mut wires: Vec<&String> = out_net.values().collect();
    wires.sort();
    for w in wires {
        writeln!(nl, "  wire {w};").unwrap();
    }
    for &i in &logic_cells {
        let k = placed[i].logic.unwrap();
        let (cell, _, ins, out) = LOGIC[k];
        let mut conns: Vec<String> = ins
            .iter()
            .enumerate()
            .map(|(s, p)| format!(".{p}({})", in_nets.get(&(i, s)).map_or("", String::as_str)))
            .collect();
        conns.push(format!(
            ".{out}({})",
            out_net.get(&i).map_or("", String::as_str)
        ));
        writeln!(nl, "  {cell} {} ({});", placed[i].name, conns.join(", ")).unwrap();
    }
    nl.push_str("endmodule\n");

    let map = layermap();
    let gds = write_gds_for(&floorplan, &lef, &map);
    let mut critical: Vec<String> = spec.nets.iter().map(|n| n.name.clone()).collect();
    critical.sort();
    let open: Vec<bool> = occupied.iter().map(|o| !o).collect();
    let expected = expected_answers(spec, &open, &lengths, critical);

    let mut fixture = Fixture {
        lef: write_lef(&lef),
        def: write_def(&floorplan, &lef),
        netlist: nl,
        gds: crate::gdsii::write_gds(&gds).expect("generated library is well formed"),
        layermap: map.to_text(),
        attacks: attacks_text(&reference_attacks()),
        expected,
    };
    if spec.fill_fraction > 0.0 {
        let names: Vec<String> = spec.nets.iter().map(|n| n.name.clone()).collect();
        fixture.def = apply_filling(&fixture.def, &lef, &names, spec.fill_fraction, GUARD)?;
        let filled = parse_def(&fixture.def, &lef)?.def;
        fixture.gds = crate::gdsii::write_gds(&write_gds_for(&filled, &lef, &map))
            .expect("generated library is well formed");
        let open = occupancy(&filled, &lef)?;
        fixture.expected = expected_answers(
            spec,
            &open,
            &fixture.expected.lengths,
            fixture.expected.critical.clone(),
        );
    }
    Ok(fixture)
}

/// Open-site bitmap of a parsed floorplan, by the generator's own rules:
/// anything but a FILL macro occupies its sites.
fn occupancy(def: &FloorplanDef, lef: &Lef) -> Result<Vec<bool>, FixtureError> {
    let rows = def.rows.len();
    let cols = def.rows.first().map_or(0, |r| r.count_x);
    let mut open = vec![true; cols * rows];
    for c in &def.components {
        if c.macro_name.starts_with("FILL") {
            continue;
        }
        let m = lef
            .macro_def(&c.macro_name)
            .ok_or_else(|| FixtureError::Infeasible(format!("unknown macro {}", c.macro_name)))?;
        let (col, row) = (
            (c.location.x / SITE_W) as usize,
            (c.location.y / SITE_H) as usize,
        );
        for k in col..col + m.site_span {
            open[row * cols + k] = false;
        }
    }
    Ok(open)
}

fn write_gds_for(def: &FloorplanDef, lef: &Lef, map: &LayerMap) -> GdsLibrary {
    let mut lib = GdsLibrary::new("fixture", DBU_PER_MICRON as u32);
    let boundary = |layer: &str, r: &Rect| {
        let (l, d) = map.lookup(layer).expect("every fixture layer is mapped");
        GdsElementKind::Boundary(GdsBoundary::from_polygon(l, d, &r.to_polygon()))
    };
    let used: BTreeSet<&str> = def
        .components
        .iter()
        .map(|c| c.macro_name.as_str())
        .collect();
    for m in lef.macros.iter().filter(|m| used.contains(m.name.as_str())) {
        let mut cell = GdsCell::new(m.name.clone());
        for p in &m.pins {
            for (l, r) in &p.shapes {
                cell.push(boundary(l, r));
            }
        }
        for (l, r) in &m.obstructions {
            cell.push(boundary(l, r));
        }
        lib.cells.push(cell);
    }
    let mut top = GdsCell::new(def.design.clone());
    for c in &def.components {
        let m = lef.macro_def(&c.macro_name).expect("placed macros exist");
        let t = Transform::placement(c.orient, m.size.0, m.size.1, c.location);
        top.push(GdsElementKind::Sref(GdsSref {
            name: m.name.clone(),
            placement: GdsPlacement::rotated(
                c.orient.reflect_x,
                c.orient.quarter_turns as u16 * 90,
            ),
            origin: t.offset,
        }));
    }
    for n in def.special_nets.iter().chain(&def.nets) {
        for s in &n.segments {
            top.push(boundary(&s.layer, &s.rect()));
        }
        for v in &n.vias {
            let vd = lef.via(&v.via).expect("fixture vias exist");
            for (l, rs) in &vd.layers {
                for r in rs {
                    top.push(boundary(l, &r.translate(v.at.x, v.at.y)));
                }
            }
        }
        for (l, r) in &n.rects {
            top.push(boundary(l, r));
        }
    }
    lib.cells.push(top);
    lib
}

// ---------------------------------------------------------------------------
// Answers

/// Depth-first labelling (stack based), independent of the breadth-first
/// labelling used by the analysis. Regions are returned with sites sorted in
/// scanline order.
pub fn flood_fill_regions(cols: usize, rows: usize, open: &[bool]) -> Vec<Vec<(u32, u32)>> {
    let mut label = vec![usize::MAX; open.len()];
    let mut out: Vec<Vec<(u32, u32)>> = Vec::new();
    for start in 0..open.len() {
        if !open[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        let mut sites = Vec::new();
        label[start] = id;
        while let Some(k) = stack.pop() {
            sites.push(((k % cols) as u32, (k / cols) as u32));
            let (c, r) = (k % cols, k / cols);
            let mut nb = Vec::with_capacity(4);
            if c > 0 {
                nb.push(k - 1);
            }
            if c + 1 < cols {
                nb.push(k + 1);
            }
            if r > 0 {
                nb.push(k - cols);
            }
            if r + 1 < rows {
                nb.push(k + cols);
            }
            for n in nb {
                if open[n] && label[n] == usize::MAX {
                    label[n] = id;
                    stack.push(n);
                }
            }
        }
        sites.sort_unstable_by_key(|&(c, r)| (r, c));
        out.push(sites);
    }
    out
}

/// Distance from a site to the open geometry of a planted wire, in closed
/// form: the full probe-ring outline (when same-layer is open) and the via
/// anchor at the wire's lower-left corner on each open adjacent layer.
fn planted_distance(n: &PlantedNet, site: &Rect) -> Option<Coord> {
    let w = planted_wire(n);
    let mut best: Option<Coord> = None;
    let mut take = |d: Coord| best = Some(best.map_or(d, |b: Coord| b.min(d)));
    if matches!(n.recipe, Recipe::None | Recipe::CoverAbove) {
        let b = w.expand(PITCH);
        let inside =
            site.lo.x > b.lo.x && site.hi.x < b.hi.x && site.lo.y > b.lo.y && site.hi.y < b.hi.y;
        if inside {
            take(
                (site.lo.x - b.lo.x)
                    .min(b.hi.x - site.hi.x)
                    .min(site.lo.y - b.lo.y)
                    .min(b.hi.y - site.hi.y),
            );
        } else {
            take(manhattan_rect_distance(site, &b));
        }
    }
    let anchor = Point::new(w.lo.x + WIRE_W / 2, w.lo.y + WIRE_W / 2);
    let anchors = match n.recipe {
        Recipe::None | Recipe::Ring => 2,
        Recipe::CoverAbove => 1,
        Recipe::Full => 0,
    };
    if anchors > 0 {
        let dx = (site.lo.x - anchor.x).max(anchor.x - site.hi.x).max(0);
        let dy = (site.lo.y - anchor.y).max(anchor.y - site.hi.y).max(0);
        take(dx + dy);
    }
    best
}

fn ratio_text(r: Ratio<i128>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn expected_answers(
    spec: &FixtureSpec,
    open: &[bool],
    lengths: &BTreeMap<String, Coord>,
    critical: Vec<String>,
) -> Expected {
    let regions = flood_fill_regions(spec.cols, spec.rows, open);
    let mut hist = BTreeMap::new();
    for r in &regions {
        *hist.entry(r.len()).or_insert(0) += 1;
    }
    let attacks = reference_attacks();
    let min_sites = attacks.iter().map(|a| a.placement_sites).min().unwrap_or(1) as usize;
    let n = lengths.len() as i128;
    let sum: i128 = lengths.values().map(|&l| l as i128).sum();
    let sum_sq: i128 = lengths.values().map(|&l| (l as i128) * (l as i128)).sum();
    let disc = n * sum_sq - sum * sum;
    // sigma(m) <= 3, exactly.
    let timing_ok = |m: Coord| {
        let num = n * m as i128 - sum;
        num <= 0 || (disc > 0 && num * num <= 9 * disc)
    };

    let mut pairs = Vec::new();
    let mut viable: BTreeMap<String, usize> = attacks.iter().map(|a| (a.name.clone(), 0)).collect();
    for net in &spec.nets {
        if net.recipe == Recipe::Full {
            continue;
        }
        for sites in regions.iter().filter(|s| s.len() >= min_sites) {
            let m = sites
                .iter()
                .filter_map(|&(c, r)| planted_distance(net, &site_rect(c as usize, r as usize)))
                .min()
                .expect("unblocked planted net has open geometry");
            pairs.push(ExpectedPair {
                net: net.name.clone(),
                region_seed: sites[0],
                region_size: sites.len(),
                manhattan: m,
            });
            for a in &attacks {
                if sites.len() as u64 >= a.placement_sites && (!a.timing_critical || timing_ok(m)) {
                    *viable.get_mut(&a.name).unwrap() += 1;
                }
            }
        }
    }
    Expected {
        seed: spec.seed,
        open_sites: open.iter().filter(|&&o| o).count(),
        region_histogram: hist,
        planted_regions: spec.regions.iter().map(|r| r.size).collect(),
        critical,
        nets: spec
            .nets
            .iter()
            .map(|n| {
                let (s, a, o) = n.recipe.expected();
                ExpectedNet {
                    name: n.name.clone(),
                    recipe: n.recipe,
                    same_layer: ratio_text(s),
                    adjacent_layer: ratio_text(a),
                    overall: ratio_text(o),
                }
            })
            .collect(),
        lengths: lengths.clone(),
        pairs,
        viable,
    }
}

// ---------------------------------------------------------------------------
// Defensive filling

/// Places `macro_name` (a one-site, non-filler cell) on the `⌊fraction · n⌋`
/// open sites nearest the critical nets' geometry, where `n` is the number of
/// open sites. Distance is Manhattan in site units to the nearest site the
/// geometry touches; ties go to scanline order.
pub fn apply_filling(
    def_text: &str,
    lef: &Lef,
    critical: &[String],
    fraction: f64,
    macro_name: &str,
) -> Result<String, FixtureError> {
    if !(0.0..=1.0).contains(&fraction) || fraction.is_nan() {
        return Err(FixtureError::Fraction(fraction));
    }
    let m = lef
        .macro_def(macro_name)
        .ok_or_else(|| FixtureError::Infeasible(format!("unknown filling macro {macro_name}")))?;
    if m.site_span != 1 || m.row_span != 1 {
        return Err(FixtureError::Infeasible(format!(
            "filling macro {macro_name} must span one site"
        )));
    }
    let mut def = parse_def(def_text, lef)?.def;
    let db = build_layout(
        lef,
        &def,
        &CriticalSet::from_roots(critical.iter().cloned()),
        &BuildOptions::default(),
    )?;
    let g = &db.grid;
    let mut dist = vec![usize::MAX; g.len()];
    let mut queue = VecDeque::new();
    for &ni in &db.critical_nets {
        for (_, r) in &db.nets[ni].shapes {
            let (cs, rs) = g.site_span(r);
            for row in rs {
                for col in cs.clone() {
                    let k = row * g.cols + col;
                    if dist[k] == usize::MAX {
                        dist[k] = 0;
                        queue.push_back(k);
                    }
                }
            }
        }
    }
    if queue.is_empty() && fraction > 0.0 {
        return Err(FixtureError::Infeasible(
            "critical nets have no geometry inside the rows".into(),
        ));
    }
    while let Some(k) = queue.pop_front() {
        let (c, r) = (k % g.cols, k / g.cols);
        let mut step = |n: usize| {
            if dist[n] == usize::MAX {
                dist[n] = dist[k] + 1;
                queue.push_back(n);
            }
        };
        if c > 0 {
            step(k - 1);
        }
        if c + 1 < g.cols {
            step(k + 1);
        }
        if r > 0 {
            step(k - g.cols);
        }
        if r + 1 < g.rows {
            step(k + g.cols);
        }
    }
    let mut open: Vec<usize> = (0..g.len()).filter(|&k| g.states()[k].is_open()).collect();
    let k = (fraction * open.len() as f64).floor() as usize;
    open.sort_by_key(|&s| (dist[s], s));
    let orient_of = |y: Coord| {
        def.rows
            .iter()
            .find(|r| r.origin.y == y)
            .map_or(Orient::IDENTITY, |r| r.orient)
    };
    let mut added = Vec::with_capacity(k);
    for (i, &s) in open[..k].iter().enumerate() {
        let loc = Point::new(
            g.origin.x + (s % g.cols) as Coord * g.site_w,
            g.origin.y + (s / g.cols) as Coord * g.site_h,
        );
        added.push(Component {
            name: format!("guard_fill_{i}"),
            macro_name: macro_name.into(),
            location: loc,
            orient: orient_of(loc.y),
            status: PlacementStatus::Placed,
        });
    }
    def.components.extend(added);
    Ok(write_def(&def, lef))
}

// ---------------------------------------------------------------------------
// Random netlists for fan-in checks

/// One gate of a generated netlist.
#[derive(Debug, Clone, PartialEq)]
pub struct DagGate {
    pub name: String,
    pub cell: &'static str,
    /// Data inputs (port, net).
    pub inputs: Vec<(String, String)>,
    pub clock: Option<String>,
    pub output: String,
}

/// A generated netlist together with its ground-truth structure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RandomDag {
    pub text: String,
    pub primary_inputs: Vec<String>,
    pub gates: Vec<DagGate>,
    /// `(lhs, rhs)` bit aliases from `assign` statements.
    pub aliases: Vec<(String, String)>,
}

/// A random acyclic netlist of `gates` gates over the built-in cells. Some
/// outputs are bits of a bus, some nets are reached through `assign`
/// aliases (scalar and vector) and every DFF clock comes from `clk`.
pub fn random_dag(seed: u64, gates: usize) -> RandomDag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pis: Vec<String> = (0..4)
        .map(|i| format!("in{i}"))
        .chain(["clk".to_string()])
        .collect();
    let mut avail: Vec<String> = pis[..4].to_vec();
    let mut out = RandomDag {
        primary_inputs: pis.clone(),
        ..Default::default()
    };
    let bus_w = gates.div_ceil(8).max(2);
    let mut decls = Vec::new();
    let mut bus_bits = 0usize;
    let mut body = String::new();
    for k in 0..gates {
        let (cell, _, ins, _) = LOGIC[rng.gen_range(0..LOGIC.len())];
        let output = if bus_bits < bus_w && rng.gen_bool(0.15) {
            bus_bits += 1;
            format!("bus[{}]", bus_bits - 1)
        } else if rng.gen_bool(0.25) {
            let n = format!("sec_g{k}");
            decls.push(n.clone());
            n
        } else {
            let n = format!("w{k}");
            decls.push(n.clone());
            n
        };
        let mut gate = DagGate {
            name: format!("g{k}"),
            cell,
            inputs: Vec::new(),
            clock: None,
            output: output.clone(),
        };
        for p in ins {
            if *p == "CLK" {
                gate.clock = Some("clk".into());
            } else {
                gate.inputs
                    .push((p.to_string(), avail[rng.gen_range(0..avail.len())].clone()));
            }
        }
        let mut conns: Vec<String> = gate
            .inputs
            .iter()
            .map(|(p, n)| format!(".{p}({n})"))
            .collect();
        if let Some(c) = &gate.clock {
            conns.push(format!(".CLK({c})"));
        }
        conns.push(format!(
            ".{}({output})",
            LOGIC.iter().find(|l| l.0 == cell).unwrap().3
        ));
        writeln!(body, "  {cell} g{k} ({});", conns.join(", ")).unwrap();
        out.gates.push(gate);
        avail.push(output.clone());
        // Occasionally re-expose a net through an alias chain.
        if rng.gen_bool(0.1) {
            let alias = format!("sec_a{k}");
            decls.push(alias.clone());
            writeln!(body, "  assign {alias} = {output};").unwrap();
            out.aliases.push((alias.clone(), output));
            avail.push(alias);
        }
    }
    // Vector alias over the driven bus bits, LSB aligned.
    let mut text = format!(
        "module dag({});\n  input {};\n",
        pis.join(", "),
        pis.join(", ")
    );
    writeln!(text, "  wire [{}:0] bus;", bus_w - 1).unwrap();
    if bus_bits > 0 {
        writeln!(text, "  wire [{}:0] sec_bus;", bus_bits - 1).unwrap();
    }
    for d in &decls {
        writeln!(text, "  wire {d};").unwrap();
    }
    text.push_str(&body);
    if bus_bits > 0 {
        writeln!(text, "  assign sec_bus = bus[{}:0];", bus_bits - 1).unwrap();
        for i in 0..bus_bits {
            out.aliases
                .push((format!("sec_bus[{i}]"), format!("bus[{i}]")));
        }
    }
    text.push_str("endmodule\n");
    out.text = text;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lefdef::parse_lef;
    use crate::netlist::parse_netlist;

    #[test]
    fn technology_round_trips_through_text() {
        let lef = parse_lef(&write_lef(&technology())).unwrap();
        assert!(lef.warnings.is_empty(), "{:?}", lef.warnings);
        assert_eq!(lef.via_rule("via1").unwrap().min_cut, (140, 140));
        assert_eq!(lef.macro_def("MUX2").unwrap().site_span, 6);
    }

    #[test]
    fn demo_is_deterministic_and_parses() {
        let a = generate(&FixtureSpec::demo(7)).unwrap();
        let b = generate(&FixtureSpec::demo(7)).unwrap();
        assert_eq!(a.def, b.def);
        assert_eq!(a.gds, b.gds);
        let lef = parse_lef(&a.lef).unwrap();
        let def = parse_def(&a.def, &lef).unwrap();
        assert!(def.warnings.is_empty(), "{:?}", def.warnings);
        parse_netlist(&a.netlist).unwrap();
        assert!(a
            .expected
            .region_histogram
            .get(&25)
            .is_some_and(|&c| c >= 1));
        assert_ne!(generate(&FixtureSpec::demo(8)).unwrap().def, a.def);
    }

    #[test]
    fn overlapping_plants_are_rejected() {
        let mut s = FixtureSpec::demo(1);
        s.nets[1].col = s.nets[0].col + 2;
        s.nets[1].row = s.nets[0].row;
        assert!(matches!(generate(&s), Err(FixtureError::Infeasible(_))));
    }

    #[test]
    fn filling_zero_is_identity_and_bad_fraction_errors() {
        let f = generate(&FixtureSpec::demo(3)).unwrap();
        let lef = parse_lef(&f.lef).unwrap();
        let crit = vec!["sec_key".to_string()];
        assert_eq!(
            apply_filling(&f.def, &lef, &crit, 0.0, GUARD).unwrap(),
            f.def
        );
        assert!(matches!(
            apply_filling(&f.def, &lef, &crit, 1.5, GUARD),
            Err(FixtureError::Fraction(_))
        ));
    }

    #[test]
    fn flood_fill_counts() {
        // 3×2: O . O / O O .
        let open = [true, false, true, true, true, false];
        let r = flood_fill_regions(3, 2, &open);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0], vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!(r[1], vec![(2, 0)]);
    }

    #[test]
    fn random_dag_parses() {
        for seed in 0..10 {
            let d = random_dag(seed, 60);
            let g = parse_netlist(&d.text).unwrap();
            assert_eq!(g.instances.len(), 60);
        }
    }
}
