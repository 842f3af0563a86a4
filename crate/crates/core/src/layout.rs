// SPDX-License-Identifier: Apache-2.0

//! The fused layout database the metrics read: placement-site occupancy,
//! per-layer shape indices and net geometry.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use thiserror::Error;

use crate::gdsii::FlatGeometry;
use crate::geom::{rect_set_overlap, Coord, Point, Rect, Transform};
use crate::lefdef::{FloorplanDef, LayerKind, LayerMap, Lef, RoutedNet, TechLayer, ViaRule};
use crate::netlist::CriticalSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("components {0} and {1} overlap")]
    Overlap(String, String),
    #[error("placement rows use different site sizes ({0} and {1})")]
    MixedRows(String, String),
    #[error("row {0} is not aligned to the site grid")]
    RowAlignment(String),
    #[error("design has no placement rows")]
    NoRows,
    #[error("component {0} uses macro {1}, which is not in the LEF")]
    UnknownMacro(String, String),
    #[error("attack file line {line}: {message}")]
    Attack { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum SiteState {
    Empty,
    Filler,
    Occupied,
}

impl SiteState {
    /// Open to an attacker: empty, or holding a removable filler.
    pub fn is_open(self) -> bool {
        !matches!(self, SiteState::Occupied)
    }
}

/// Site-occupancy bitmap over the row area, row-major from the bottom-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementGrid {
    pub origin: Point,
    pub site_w: Coord,
    pub site_h: Coord,
    pub cols: usize,
    pub rows: usize,
    states: Vec<SiteState>,
}

impl PlacementGrid {
    pub fn new(origin: Point, site_w: Coord, site_h: Coord, cols: usize, rows: usize) -> Self {
        PlacementGrid {
            origin,
            site_w,
            site_h,
            cols,
            rows,
            states: vec![SiteState::Empty; cols * rows],
        }
    }

    /// A grid from a bitmap of open flags (`true` = empty).
    pub fn from_open_bitmap(cols: usize, rows: usize, open: &[bool]) -> Self {
        assert_eq!(open.len(), cols * rows);
        let mut g = PlacementGrid::new(Point::new(0, 0), 1, 1, cols, rows);
        for (s, &o) in g.states.iter_mut().zip(open) {
            *s = if o {
                SiteState::Empty
            } else {
                SiteState::Occupied
            };
        }
        g
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, col: usize, row: usize) -> SiteState {
        self.states[row * self.cols + col]
    }

    pub fn set(&mut self, col: usize, row: usize, s: SiteState) {
        self.states[row * self.cols + col] = s;
    }

    pub fn states(&self) -> &[SiteState] {
        &self.states
    }

    pub fn site_rect(&self, col: usize, row: usize) -> Rect {
        let x = self.origin.x + col as Coord * self.site_w;
        let y = self.origin.y + row as Coord * self.site_h;
        Rect::new(x, y, x + self.site_w, y + self.site_h)
    }

    /// Site columns and rows touched by the interior of `r`, clipped to the grid.
    pub fn site_span(&self, r: &Rect) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let clamp = |v: Coord, n: usize| v.clamp(0, n as Coord) as usize;
        let c0 = (r.lo.x - self.origin.x).div_euclid(self.site_w);
        let c1 = (r.hi.x - self.origin.x + self.site_w - 1).div_euclid(self.site_w);
        let r0 = (r.lo.y - self.origin.y).div_euclid(self.site_h);
        let r1 = (r.hi.y - self.origin.y + self.site_h - 1).div_euclid(self.site_h);
        (
            clamp(c0, self.cols)..clamp(c1, self.cols),
            clamp(r0, self.rows)..clamp(r1, self.rows),
        )
    }

    pub fn count(&self, s: SiteState) -> usize {
        self.states.iter().filter(|&&x| x == s).count()
    }
}

/// Who a shape belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Owner {
    /// Index into `LayoutDb::nets`.
    Net(u32),
    /// Index into `FloorplanDef::components`.
    Instance(u32),
}

pub type IndexedShape = GeomWithData<Rectangle<[Coord; 2]>, Owner>;

fn indexed(r: &Rect, owner: Owner) -> IndexedShape {
    GeomWithData::new(
        Rectangle::from_corners([r.lo.x, r.lo.y], [r.hi.x, r.hi.y]),
        owner,
    )
}

pub fn to_rect(s: &IndexedShape) -> Rect {
    let e = s.geom();
    let (lo, hi) = (e.lower(), e.upper());
    Rect::new(lo[0], lo[1], hi[0], hi[1])
}

/// One layer's shapes with a spatial index.
#[derive(Debug, Clone)]
pub struct LayerShapes {
    pub tree: RTree<IndexedShape>,
}

impl LayerShapes {
    /// Shapes whose closed extent meets the closed rect `r`.
    pub fn touching(&self, r: &Rect) -> impl Iterator<Item = (Rect, Owner)> + '_ {
        let env = AABB::from_corners([r.lo.x, r.lo.y], [r.hi.x, r.hi.y]);
        self.tree
            .locate_in_envelope_intersecting(&env)
            .map(|s| (to_rect(s), s.data))
    }

    pub fn len(&self) -> usize {
        self.tree.size()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.size() == 0
    }
}

/// A routed net and its materialized metal.
#[derive(Debug, Clone)]
pub struct NetGeom {
    pub name: String,
    pub special: bool,
    pub routing: RoutedNet,
    /// `(layer index, rect)` for wires, vias and connected pins.
    pub shapes: Vec<(usize, Rect)>,
    /// Routed centerline length.
    pub length: Coord,
}

impl NetGeom {
    /// Wire and via metal only (pins excluded).
    pub fn has_routing(&self) -> bool {
        self.routing.is_routed()
    }
}

#[derive(Debug, Clone)]
pub struct LayoutDb {
    pub dbu_per_micron: i64,
    pub die_area: Rect,
    pub grid: PlacementGrid,
    pub layers: Vec<TechLayer>,
    pub via_rules: Vec<ViaRule>,
    pub shapes: Vec<LayerShapes>,
    pub nets: Vec<NetGeom>,
    /// Critical set restricted to regular nets present in the DEF.
    pub critical: CriticalSet,
    /// Indices into `nets` of the critical nets, by name.
    pub critical_nets: Vec<usize>,
    /// Critical names with no DEF net.
    pub unmatched: Vec<String>,
    pub warnings: Vec<String>,
    net_index: HashMap<String, usize>,
}

impl LayoutDb {
    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn net(&self, name: &str) -> Option<&NetGeom> {
        self.net_index.get(name).map(|&i| &self.nets[i])
    }

    pub fn net_id(&self, name: &str) -> Option<usize> {
        self.net_index.get(name).copied()
    }

    /// Conducting layers immediately below and above `layer` in the stack,
    /// skipping cut layers.
    pub fn adjacent_layers(&self, layer: usize) -> Vec<usize> {
        let below = (0..layer).rev().find(|&i| self.layers[i].is_conducting());
        let above = (layer + 1..self.layers.len()).find(|&i| self.layers[i].is_conducting());
        below.into_iter().chain(above).collect()
    }

    /// Smallest via cut between two conducting layers, taken from the cut
    /// layers between them.
    pub fn via_between(&self, a: usize, b: usize) -> Option<(Coord, Coord)> {
        let (lo, hi) = (a.min(b), a.max(b));
        (lo + 1..hi)
            .filter(|&i| self.layers[i].kind == LayerKind::Cut)
            .filter_map(|i| {
                self.via_rules
                    .iter()
                    .find(|v| v.cut_layer == self.layers[i].name)
            })
            .map(|v| v.min_cut)
            .min_by_key(|(w, h)| (*w as i128 * *h as i128, *w))
    }

    /// Regular nets in name order.
    pub fn regular_nets(&self) -> impl Iterator<Item = &NetGeom> {
        self.nets.iter().filter(|n| !n.special)
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub filler_prefixes: Vec<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            filler_prefixes: vec!["FILL".into(), "DECAP".into()],
        }
    }
}

fn build_grid(def: &FloorplanDef, lef: &Lef) -> Result<PlacementGrid, LayoutError> {
    let first = def.rows.first().ok_or(LayoutError::NoRows)?;
    let site = lef
        .site(&first.site)
        .expect("row sites checked by the DEF reader");
    let (sw, sh) = (site.width, site.height);
    for r in &def.rows {
        let s = lef
            .site(&r.site)
            .expect("row sites checked by the DEF reader");
        if (s.width, s.height) != (sw, sh) {
            return Err(LayoutError::MixedRows(first.name.clone(), r.name.clone()));
        }
    }
    let x0 = def.rows.iter().map(|r| r.origin.x).min().unwrap();
    let y0 = def.rows.iter().map(|r| r.origin.y).min().unwrap();
    let mut cols = 0;
    let mut rows = 0;
    for r in &def.rows {
        let (dx, dy) = (r.origin.x - x0, r.origin.y - y0);
        if dx % sw != 0 || dy % sh != 0 {
            return Err(LayoutError::RowAlignment(r.name.clone()));
        }
        cols = cols.max((dx / sw) as usize + r.count_x);
        rows = rows.max((dy / sh) as usize + r.count_y);
    }
    let mut grid = PlacementGrid::new(Point::new(x0, y0), sw, sh, cols, rows);
    // Sites outside every row cannot host cells.
    let mut in_row = vec![false; cols * rows];
    for r in &def.rows {
        let c0 = ((r.origin.x - x0) / sw) as usize;
        let r0 = ((r.origin.y - y0) / sh) as usize;
        for j in r0..r0 + r.count_y {
            for i in c0..c0 + r.count_x {
                in_row[j * cols + i] = true;
            }
        }
    }
    for (s, ok) in grid.states.iter_mut().zip(in_row) {
        if !ok {
            *s = SiteState::Occupied;
        }
    }
    Ok(grid)
}

/// Fuses LEF and DEF into a `LayoutDb` and marks the critical nets.
pub fn build_layout(
    lef: &Lef,
    def: &FloorplanDef,
    critical: &CriticalSet,
    opts: &BuildOptions,
) -> Result<LayoutDb, LayoutError> {
    let mut warnings = Vec::new();
    let mut grid = build_grid(def, lef)?;
    let layer_ix: HashMap<&str, usize> = lef
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| (l.name.as_str(), i))
        .collect();

    // Occupancy. Components are visited in name order so the result and any
    // overlap error do not depend on declaration order.
    let mut order: Vec<usize> = (0..def.components.len()).collect();
    order.sort_by(|&a, &b| def.components[a].name.cmp(&def.components[b].name));
    let mut owner: Vec<Option<usize>> = vec![None; grid.len()];
    let mut transforms = vec![Transform::IDENTITY; def.components.len()];
    let mut fillers = Vec::new();
    for &ci in &order {
        let c = &def.components[ci];
        let m = lef
            .macro_def(&c.macro_name)
            .ok_or_else(|| LayoutError::UnknownMacro(c.name.clone(), c.macro_name.clone()))?;
        let t = Transform::placement(c.orient, m.size.0, m.size.1, c.location);
        transforms[ci] = t;
        let bbox = t.apply_rect(&Rect::new(0, 0, m.size.0, m.size.1));
        let (cs, rs) = grid.site_span(&bbox);
        if opts
            .filler_prefixes
            .iter()
            .any(|p| c.macro_name.starts_with(p.as_str()))
        {
            fillers.push((cs, rs));
            continue;
        }
        for j in rs {
            for i in cs.clone() {
                let k = j * grid.cols + i;
                if let Some(prev) = owner[k] {
                    return Err(LayoutError::Overlap(
                        def.components[prev].name.clone(),
                        c.name.clone(),
                    ));
                }
                owner[k] = Some(ci);
                grid.states[k] = SiteState::Occupied;
            }
        }
    }
    for (cs, rs) in fillers {
        for j in rs {
            for i in cs.clone() {
                if grid.get(i, j) == SiteState::Empty {
                    grid.set(i, j, SiteState::Filler);
                }
            }
        }
    }

    // Nets, sorted by (special, name) for stable ids.
    let mut all: Vec<(bool, &RoutedNet)> = def
        .nets
        .iter()
        .map(|n| (false, n))
        .chain(def.special_nets.iter().map(|n| (true, n)))
        .collect();
    all.sort_by(|a, b| (a.0, &a.1.name).cmp(&(b.0, &b.1.name)));
    let mut net_index = HashMap::new();
    let mut pin_owner: HashMap<(&str, &str), u32> = HashMap::new();
    let comp_ix: HashMap<&str, usize> = def
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let mut nets = Vec::with_capacity(all.len());
    for (special, n) in all {
        let id = nets.len();
        if !special {
            if net_index.insert(n.name.clone(), id).is_some() {
                warnings.push(format!("net {} is defined more than once", n.name));
            }
        } else {
            net_index.entry(n.name.clone()).or_insert(id);
        }
        let mut shapes = Vec::new();
        for s in &n.segments {
            shapes.push((layer_ix[s.layer.as_str()], s.rect()));
        }
        for v in &n.vias {
            let vd = lef.via(&v.via).expect("vias checked by the DEF reader");
            for (l, rects) in &vd.layers {
                let Some(&li) = layer_ix.get(l.as_str()) else {
                    continue;
                };
                for r in rects {
                    shapes.push((li, r.translate(v.at.x, v.at.y)));
                }
            }
        }
        for (l, r) in &n.rects {
            shapes.push((layer_ix[l.as_str()], *r));
        }
        for p in &n.pins {
            if comp_ix.contains_key(p.instance.as_str()) {
                pin_owner.insert((p.instance.as_str(), p.pin.as_str()), id as u32);
            }
        }
        nets.push(NetGeom {
            name: n.name.clone(),
            special,
            routing: n.clone(),
            shapes,
            length: n.length(),
        });
    }

    // Instance pin and obstruction shapes.
    let mut per_layer: Vec<Vec<IndexedShape>> = vec![Vec::new(); lef.layers.len()];
    let mut missing_layers = BTreeSet::new();
    for &ci in &order {
        let c = &def.components[ci];
        let m = lef.macro_def(&c.macro_name).expect("checked above");
        let t = &transforms[ci];
        for p in &m.pins {
            let own = pin_owner.get(&(c.name.as_str(), p.name.as_str())).copied();
            for (l, r) in &p.shapes {
                let Some(&li) = layer_ix.get(l.as_str()) else {
                    missing_layers.insert(l.clone());
                    continue;
                };
                let r = t.apply_rect(r);
                match own {
                    Some(net) => nets[net as usize].shapes.push((li, r)),
                    None => per_layer[li].push(indexed(&r, Owner::Instance(ci as u32))),
                }
            }
        }
        for (l, r) in &m.obstructions {
            let Some(&li) = layer_ix.get(l.as_str()) else {
                missing_layers.insert(l.clone());
                continue;
            };
            per_layer[li].push(indexed(&t.apply_rect(r), Owner::Instance(ci as u32)));
        }
    }
    for l in missing_layers {
        warnings.push(format!(
            "macro geometry on layer {l}, which is not in the LEF stack"
        ));
    }
    for (id, n) in nets.iter().enumerate() {
        for (li, r) in &n.shapes {
            if !r.is_degenerate() {
                per_layer[*li].push(indexed(r, Owner::Net(id as u32)));
            }
        }
    }
    let shapes = per_layer
        .into_iter()
        .map(|v| LayerShapes {
            tree: RTree::bulk_load(v),
        })
        .collect();

    // Critical nets.
    let mut restricted = CriticalSet {
        depth_limit: critical.depth_limit,
        roots: BTreeSet::new(),
        warnings: critical.warnings.clone(),
        ..Default::default()
    };
    let mut critical_nets = Vec::new();
    let mut unmatched = Vec::new();
    for (name, &depth) in &critical.members {
        match net_index.get(name) {
            Some(&i) if !nets[i].special => {
                restricted.members.insert(name.clone(), depth);
                if let Some(o) = critical.origins.get(name) {
                    restricted.origins.insert(name.clone(), o.clone());
                }
                if critical.roots.contains(name) {
                    restricted.roots.insert(name.clone());
                }
                critical_nets.push(i);
            }
            _ => unmatched.push(name.clone()),
        }
    }
    if !unmatched.is_empty() {
        warnings.push(format!(
            "{} critical net(s) not found in the DEF: {}",
            unmatched.len(),
            preview(&unmatched)
        ));
    }

    Ok(LayoutDb {
        dbu_per_micron: lef.dbu_per_micron,
        die_area: def.die_area,
        grid,
        layers: lef.layers.clone(),
        via_rules: lef.via_rules.clone(),
        shapes,
        nets,
        critical: restricted,
        critical_nets,
        unmatched,
        warnings,
        net_index,
    })
}

fn preview(names: &[String]) -> String {
    const SHOW: usize = 8;
    let mut s = names
        .iter()
        .take(SHOW)
        .cloned()
        .collect::<Vec<_>>()
        .join(", ");
    if names.len() > SHOW {
        s += &format!(", … ({} more)", names.len() - SHOW);
    }
    s
}

// ---------------------------------------------------------------------------
// Attack descriptions

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AttackSpec {
    pub name: String,
    pub std_cells: u64,
    pub placement_sites: u64,
    pub timing_critical: bool,
    pub target_nets: Vec<String>,
}

/// Reads blank-line-separated blocks of `attack`, `sites`, `cells`,
/// `timing_critical` and optional `targets` lines.
pub fn parse_attacks(text: &str) -> Result<Vec<AttackSpec>, LayoutError> {
    #[derive(Default)]
    struct Block {
        start: usize,
        name: Option<String>,
        sites: Option<u64>,
        cells: Option<u64>,
        timing: Option<bool>,
        targets: Vec<String>,
    }
    let fail = |line: usize, message: String| LayoutError::Attack { line, message };
    let finish = |b: Block| -> Result<AttackSpec, LayoutError> {
        let name = b
            .name
            .ok_or_else(|| fail(b.start, "block has no `attack <name>` line".into()))?;
        let need = |what: &str| fail(b.start, format!("attack {name:?} is missing `{what}`"));
        let spec = AttackSpec {
            std_cells: b.cells.ok_or_else(|| need("cells"))?,
            placement_sites: b.sites.ok_or_else(|| need("sites"))?,
            timing_critical: b.timing.ok_or_else(|| need("timing_critical"))?,
            target_nets: b.targets,
            name: name.clone(),
        };
        if spec.std_cells < 1 || spec.placement_sites < spec.std_cells {
            return Err(fail(
                b.start,
                format!("attack {name:?} needs sites >= cells >= 1"),
            ));
        }
        Ok(spec)
    };

    let mut out = Vec::new();
    let mut cur: Option<Block> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            if raw.trim().is_empty() {
                if let Some(b) = cur.take() {
                    out.push(finish(b)?);
                }
            }
            continue;
        }
        let (key, value) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        let value = value.trim();
        let b = cur.get_or_insert_with(|| Block {
            start: line,
            ..Default::default()
        });
        let int = |v: &str| {
            v.parse::<u64>().map_err(|_| {
                fail(
                    line,
                    format!("`{key}` expects a non-negative integer, found {v:?}"),
                )
            })
        };
        match key {
            "attack" if value.is_empty() => return Err(fail(line, "attack name is empty".into())),
            "attack" if b.name.is_some() => {
                return Err(fail(line, "two `attack` lines in one block".into()))
            }
            "attack" => b.name = Some(value.to_string()),
            "sites" => b.sites = Some(int(value)?),
            "cells" => b.cells = Some(int(value)?),
            "timing_critical" => {
                b.timing = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(fail(
                            line,
                            format!("timing_critical expects true or false, found {value:?}"),
                        ))
                    }
                })
            }
            "targets" => {
                b.targets = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            _ => return Err(fail(line, format!("unknown key {key:?}"))),
        }
    }
    if let Some(b) = cur.take() {
        out.push(finish(b)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// GDSII cross-check

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LayerCheck {
    pub layer: String,
    pub def_only: i128,
    pub gds_only: i128,
    pub both: i128,
}

impl LayerCheck {
    /// Mismatched area over union area; 0 for an empty layer.
    pub fn mismatch_fraction(&self) -> f64 {
        let union = self.def_only + self.gds_only + self.both;
        if union == 0 {
            0.0
        } else {
            (self.def_only + self.gds_only) as f64 / union as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CrossCheck {
    pub layers: Vec<LayerCheck>,
    pub epsilon: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Compares DEF-derived shapes with flattened GDSII shapes layer by layer.
pub fn crosscheck_gds(
    db: &LayoutDb,
    flat: &FlatGeometry,
    map: &LayerMap,
    epsilon: f64,
) -> CrossCheck {
    let mut gds_by_layer: BTreeMap<&str, Vec<Rect>> = BTreeMap::new();
    for (name, _purpose, e) in map.iter() {
        if let Some(polys) = flat.layers.get(&(e.gds_layer, e.gds_datatype)) {
            let v = gds_by_layer.entry(name).or_default();
            for p in polys {
                if p.is_rectilinear() {
                    v.extend(p.to_rects());
                } else {
                    v.push(p.bbox());
                }
            }
        } else {
            gds_by_layer.entry(name).or_default();
        }
    }
    let mut layers = Vec::new();
    let mut warnings = Vec::new();
    for (name, gds) in gds_by_layer {
        let def_rects: Vec<Rect> = match db.layer_index(name) {
            Some(li) => db.shapes[li].tree.iter().map(to_rect).collect(),
            None => Vec::new(),
        };
        if def_rects.is_empty() && gds.is_empty() {
            warnings.push(format!(
                "layer {name} is mapped but has no shapes in either source"
            ));
            continue;
        }
        let o = rect_set_overlap(&def_rects, &gds);
        layers.push(LayerCheck {
            layer: name.to_string(),
            def_only: o.only_a,
            gds_only: o.only_b,
            both: o.both,
        });
    }
    let pass = layers.iter().all(|l| l.mismatch_fraction() <= epsilon);
    CrossCheck {
        layers,
        epsilon,
        pass,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lefdef::{parse_def, parse_lef};

    const LEF: &str = r#"
UNITS DATABASE MICRONS 1000 ; END UNITS
LAYER metal1 TYPE ROUTING ; DIRECTION HORIZONTAL ; PITCH 0.2 ; WIDTH 0.1 ; SPACING 0.1 ; END metal1
LAYER via1 TYPE CUT ; WIDTH 0.1 ; END via1
LAYER metal2 TYPE ROUTING ; DIRECTION VERTICAL ; PITCH 0.2 ; WIDTH 0.1 ; SPACING 0.1 ; END metal2
SITE core CLASS CORE ; SIZE 0.2 BY 2 ; END core
MACRO C4 CLASS CORE ; SIZE 0.8 BY 2 ; SITE core ;
  PIN A PORT LAYER metal1 ; RECT 0.1 0.5 0.3 0.7 ; END END A
  OBS LAYER metal1 ; RECT 0 0 0.8 0.1 ; END
END C4
MACRO FILL1 CLASS CORE SPACER ; SIZE 0.2 BY 2 ; SITE core ; END FILL1
END LIBRARY
"#;

    fn def(components: &str, nets: &str) -> String {
        format!(
            "UNITS DISTANCE MICRONS 1000 ;\nDIEAREA ( 0 0 ) ( 2000 4000 ) ;\n\
             ROW r0 core 0 0 N DO 10 BY 1 STEP 200 0 ;\n\
             COMPONENTS 0 ;\n{components}END COMPONENTS\nNETS 0 ;\n{nets}END NETS\nEND DESIGN\n"
        )
    }

    fn build(components: &str, nets: &str, crit: &CriticalSet) -> Result<LayoutDb, LayoutError> {
        let lef = parse_lef(LEF).unwrap();
        let d = parse_def(&def(components, nets), &lef).unwrap();
        build_layout(&lef, &d.def, crit, &BuildOptions::default())
    }

    fn states(db: &LayoutDb) -> String {
        db.grid
            .states()
            .iter()
            .map(|s| match s {
                SiteState::Empty => 'E',
                SiteState::Filler => 'F',
                SiteState::Occupied => 'O',
            })
            .collect()
    }

    #[test]
    fn occupancy_examples() {
        let db = build(
            " - u1 C4 + PLACED ( 400 0 ) N ;\n",
            "",
            &CriticalSet::default(),
        )
        .unwrap();
        assert_eq!((db.grid.cols, db.grid.rows), (10, 1));
        assert_eq!(states(&db), "EEOOOOEEEE");
        let db = build(
            " - u1 C4 + PLACED ( 400 0 ) N ;\n - f0 FILL1 + PLACED ( 0 0 ) N ;\n",
            "",
            &CriticalSet::default(),
        )
        .unwrap();
        assert_eq!(states(&db), "FEOOOOEEEE");
        let n = db.grid.len();
        assert_eq!(
            db.grid.count(SiteState::Empty)
                + db.grid.count(SiteState::Filler)
                + db.grid.count(SiteState::Occupied),
            n
        );
    }

    #[test]
    fn overlap_names_both() {
        let e = build(
            " - u1 C4 + PLACED ( 400 0 ) N ;\n - u2 C4 + PLACED ( 600 0 ) N ;\n",
            "",
            &CriticalSet::default(),
        )
        .unwrap_err();
        assert_eq!(e, LayoutError::Overlap("u1".into(), "u2".into()));
    }

    #[test]
    fn critical_net_geometry_and_unmatched() {
        let crit = CriticalSet::from_roots(["sec_supv", "sec_gone"]);
        let db = build(
            " - u1 C4 + PLACED ( 400 0 ) FS ;\n",
            " - sec_supv ( u1 A ) + ROUTED metal2 ( 1000 500 ) ( 1000 3000 ) ;\n",
            &crit,
        )
        .unwrap();
        assert_eq!(db.critical.members.len(), 1);
        assert_eq!(db.unmatched, ["sec_gone"]);
        assert_eq!(db.warnings.len(), 1);
        let n = db.net("sec_supv").unwrap();
        assert_eq!(n.routing.segments.len(), 1);
        // Wire on metal2 plus the connected pin on metal1, placed flipped.
        assert_eq!(n.shapes.len(), 2);
        assert_eq!(n.shapes[1], (0, Rect::new(500, 1300, 700, 1500)));
        let m1 = &db.shapes[0];
        assert!(m1
            .touching(&Rect::new(500, 1300, 700, 1500))
            .any(|(_, o)| o == Owner::Net(0)));
        assert!(n.shapes.iter().all(|(_, r)| db.die_area.contains_rect(r)));
    }

    #[test]
    fn declaration_order_does_not_matter() {
        let a = build(
            " - u1 C4 + PLACED ( 0 0 ) N ;\n - u2 C4 + PLACED ( 800 0 ) N ;\n",
            " - n1 + ROUTED metal1 ( 100 100 ) ( 1500 100 ) ;\n - n0 + ROUTED metal1 ( 100 900 ) ( 1500 900 ) ;\n",
            &CriticalSet::default(),
        )
        .unwrap();
        let b = build(
            " - u2 C4 + PLACED ( 800 0 ) N ;\n - u1 C4 + PLACED ( 0 0 ) N ;\n",
            " - n0 + ROUTED metal1 ( 100 900 ) ( 1500 900 ) ;\n - n1 + ROUTED metal1 ( 100 100 ) ( 1500 100 ) ;\n",
            &CriticalSet::default(),
        )
        .unwrap();
        assert_eq!(a.grid, b.grid);
        let names = |db: &LayoutDb| {
            db.nets
                .iter()
                .map(|n| (n.name.clone(), n.shapes.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(names(&a), names(&b));
        assert_eq!(a.shapes[0].len(), b.shapes[0].len());
    }

    #[test]
    fn adjacency_skips_cut_layers() {
        let db = build("", "", &CriticalSet::default()).unwrap();
        assert_eq!(db.adjacent_layers(0), [2]);
        assert_eq!(db.adjacent_layers(2), [0]);
        assert_eq!(db.via_between(0, 2), Some((100, 100)));
    }

    #[test]
    fn attack_file() {
        let text = "# reference attacks\nattack A2 Analog\ncells 2\nsites 20\ntiming_critical false\n\n\
                    attack Key Leak\ncells 187\nsites 2553\ntiming_critical true\ntargets sec_key, sec_en\n";
        let a = parse_attacks(text).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(
            (a[0].std_cells, a[0].placement_sites, a[0].timing_critical),
            (2, 20, false)
        );
        assert_eq!(a[0].name, "A2 Analog");
        assert_eq!(
            (a[1].std_cells, a[1].placement_sites, a[1].timing_critical),
            (187, 2553, true)
        );
        assert_eq!(a[1].target_nets, ["sec_key", "sec_en"]);
        assert!(parse_attacks("").unwrap().is_empty());
        let e = parse_attacks("attack X\ncells 2\ntiming_critical true\n").unwrap_err();
        assert!(
            e.to_string().contains("\"X\"") && e.to_string().contains("sites"),
            "{e}"
        );
    }
}
