// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fmt::Write;

use serde::Serialize;

use super::{format_scaled, ParseError, ParseResult, Tokens};
use crate::geom::{Coord, Point, Polygon, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LayerKind {
    Routing,
    Cut,
    Masterslice,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TechLayer {
    pub name: String,
    pub kind: LayerKind,
    pub direction: Option<Direction>,
    pub pitch: Coord,
    pub min_width: Coord,
    pub min_spacing: Coord,
    /// Position in the stack, 0 at the bottom.
    pub stack_index: usize,
}

impl TechLayer {
    /// Routing or masterslice: a layer that carries wires or device shapes
    /// a rogue wire could use.
    pub fn is_conducting(&self) -> bool {
        matches!(self.kind, LayerKind::Routing | LayerKind::Masterslice)
    }
}

/// A fixed via from the LEF `VIA` section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViaDef {
    pub name: String,
    pub layers: Vec<(String, Vec<Rect>)>,
}

/// The smallest via cut allowed on a cut layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ViaRule {
    pub cut_layer: String,
    pub min_cut: (Coord, Coord),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub name: String,
    pub class: String,
    pub width: Coord,
    pub height: Coord,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroPin {
    pub name: String,
    pub direction: Option<String>,
    pub shapes: Vec<(String, Rect)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Macro {
    pub name: String,
    pub class: Option<String>,
    pub size: (Coord, Coord),
    pub site: Option<String>,
    /// Width in placement sites.
    pub site_span: usize,
    /// Height in placement rows.
    pub row_span: usize,
    pub pins: Vec<MacroPin>,
    pub obstructions: Vec<(String, Rect)>,
}

impl Macro {
    pub fn pin(&self, name: &str) -> Option<&MacroPin> {
        self.pins.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lef {
    pub dbu_per_micron: i64,
    pub layers: Vec<TechLayer>,
    pub vias: Vec<ViaDef>,
    pub via_rules: Vec<ViaRule>,
    pub sites: Vec<Site>,
    pub macros: Vec<Macro>,
    pub warnings: Vec<String>,
    layer_index: HashMap<String, usize>,
    macro_index: HashMap<String, usize>,
}

impl Lef {
    pub fn layer(&self, name: &str) -> Option<&TechLayer> {
        self.layer_index.get(name).map(|&i| &self.layers[i])
    }

    pub fn macro_def(&self, name: &str) -> Option<&Macro> {
        self.macro_index.get(name).map(|&i| &self.macros[i])
    }

    pub fn via(&self, name: &str) -> Option<&ViaDef> {
        self.vias.iter().find(|v| v.name == name)
    }

    pub fn site(&self, name: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.name == name)
    }

    pub fn via_rule(&self, cut_layer: &str) -> Option<&ViaRule> {
        self.via_rules.iter().find(|v| v.cut_layer == cut_layer)
    }

    /// Assembles a library from parts, deriving stack indices, via rules and
    /// lookup tables.
    pub fn from_parts(
        dbu_per_micron: i64,
        mut layers: Vec<TechLayer>,
        vias: Vec<ViaDef>,
        sites: Vec<Site>,
        macros: Vec<Macro>,
    ) -> Self {
        for (i, l) in layers.iter_mut().enumerate() {
            l.stack_index = i;
        }
        let mut lef = Lef {
            dbu_per_micron,
            layers,
            vias,
            sites,
            macros,
            ..Default::default()
        };
        lef.reindex();
        lef
    }

    fn reindex(&mut self) {
        self.layer_index = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.name.clone(), i))
            .collect();
        self.macro_index = self
            .macros
            .iter()
            .enumerate()
            .map(|(i, m)| (m.name.clone(), i))
            .collect();
        self.via_rules = derive_via_rules(&self.layers, &self.vias);
    }
}

/// Minimum cut per cut layer: the smallest-area candidate among the layer's
/// own WIDTH (square cut) and every fixed via's cut shapes.
fn derive_via_rules(layers: &[TechLayer], vias: &[ViaDef]) -> Vec<ViaRule> {
    let mut out = Vec::new();
    for l in layers.iter().filter(|l| l.kind == LayerKind::Cut) {
        let mut cands: Vec<(Coord, Coord)> = Vec::new();
        if l.min_width > 0 {
            cands.push((l.min_width, l.min_width));
        }
        for v in vias {
            for (name, rects) in &v.layers {
                if name == &l.name {
                    cands.extend(rects.iter().map(|r| (r.width(), r.height())));
                }
            }
        }
        if let Some(&min_cut) = cands
            .iter()
            .filter(|(w, h)| *w > 0 && *h > 0)
            .min_by_key(|(w, h)| (*w as i128 * *h as i128, *w))
        {
            out.push(ViaRule {
                cut_layer: l.name.clone(),
                min_cut,
            });
        }
    }
    out
}

/// Blocks whose bodies are skipped wholesale: `KEYWORD [name] ... END <name|KEYWORD>`.
const SKIPPED_BLOCKS: &[&str] = &[
    "VIARULE",
    "NONDEFAULTRULE",
    "PROPERTYDEFINITIONS",
    "SPACING",
    "ARRAY",
    "BEGINEXT",
    "NOISETABLE",
    "CORRECTIONTABLE",
    "IRDROP",
];

/// Harmless header statements that need no warning.
const IGNORED_STATEMENTS: &[&str] = &[
    "VERSION",
    "BUSBITCHARS",
    "DIVIDERCHAR",
    "NAMESCASESENSITIVE",
    "MANUFACTURINGGRID",
];

/// Parses the LEF subset: UNITS, LAYER, VIA, SITE and MACRO.
pub fn parse_lef(text: &str) -> ParseResult<Lef> {
    let dbu = find_lef_units(text)?;
    let mut t = Tokens::new(text);
    let mut layers = Vec::new();
    let mut vias = Vec::new();
    let mut sites = Vec::new();
    let mut macros = Vec::new();
    while let Some(kw) = t.peek() {
        match kw.to_ascii_uppercase().as_str() {
            "UNITS" => {
                t.next()?;
                t.skip_block("UNITS")?;
            }
            "LAYER" => layers.push(parse_layer(&mut t, dbu)?),
            "VIA" => vias.push(parse_via(&mut t, dbu)?),
            "SITE" => sites.push(parse_site(&mut t, dbu)?),
            "MACRO" => macros.push(parse_macro(&mut t, dbu)?),
            "END" => {
                t.next()?;
                t.expect("LIBRARY")?;
                break;
            }
            k if IGNORED_STATEMENTS.contains(&k) => t.skip_statement()?,
            k if SKIPPED_BLOCKS.contains(&k) => {
                let line = t.line();
                t.next()?;
                let name = t.peek().unwrap_or("").to_string();
                t.warnings
                    .push(format!("line {line}: skipped unsupported {k} block"));
                if t.skip_block(&name).is_err() {
                    return Err(ParseError::new(line, format!("unterminated {k} block")));
                }
            }
            _ => t.skip_unsupported("LEF")?,
        }
    }
    let mut lef = Lef::from_parts(dbu, layers, vias, sites, macros);
    finish_macros(&mut lef)?;
    lef.warnings = t.warnings;
    Ok(lef)
}

fn find_lef_units(text: &str) -> ParseResult<i64> {
    let mut t = Tokens::new(text);
    while let Some(tok) = t.peek() {
        if tok.eq_ignore_ascii_case("DATABASE")
            && t.peek_at(1)
                .is_some_and(|m| m.eq_ignore_ascii_case("MICRONS"))
        {
            t.next()?;
            t.next()?;
            let v = t.int()?;
            if v <= 0 {
                return Err(t.err("DATABASE MICRONS must be positive"));
            }
            return Ok(v);
        }
        t.next()?;
    }
    Err(ParseError::new(t.line(), "missing UNITS DATABASE MICRONS"))
}

fn parse_layer(t: &mut Tokens, dbu: i64) -> ParseResult<TechLayer> {
    t.expect("LAYER")?;
    let start_line = t.line();
    let name = t.next()?.to_string();
    let mut kind = None;
    let mut direction = None;
    let mut pitch = None;
    let mut width = None;
    let mut spacing: Option<Coord> = None;
    loop {
        let kw = t
            .peek()
            .ok_or_else(|| t.err(format!("unterminated LAYER {name}")))?;
        match kw.to_ascii_uppercase().as_str() {
            "END" => {
                t.next()?;
                t.expect(&name)?;
                break;
            }
            "TYPE" => {
                t.next()?;
                kind = Some(match t.next()?.to_ascii_uppercase().as_str() {
                    "ROUTING" => LayerKind::Routing,
                    "CUT" => LayerKind::Cut,
                    "MASTERSLICE" => LayerKind::Masterslice,
                    _ => LayerKind::Other,
                });
                t.skip_statement()?;
            }
            "DIRECTION" => {
                t.next()?;
                direction = match t.next()?.to_ascii_uppercase().as_str() {
                    "HORIZONTAL" => Some(Direction::Horizontal),
                    "VERTICAL" => Some(Direction::Vertical),
                    other => return Err(t.err(format!("unknown DIRECTION {other}"))),
                };
                t.skip_statement()?;
            }
            "PITCH" => {
                t.next()?;
                pitch = Some(t.scaled(dbu)?);
                t.skip_statement()?;
            }
            "WIDTH" => {
                t.next()?;
                width = Some(t.scaled(dbu)?);
                t.skip_statement()?;
            }
            "SPACING" => {
                t.next()?;
                let s = t.scaled(dbu)?;
                spacing = Some(spacing.map_or(s, |old| old.min(s)));
                t.skip_statement()?;
            }
            _ => t.skip_unsupported("LAYER")?,
        }
    }
    let kind =
        kind.ok_or_else(|| ParseError::new(start_line, format!("LAYER {name} has no TYPE")))?;
    let missing =
        |what: &str| ParseError::new(start_line, format!("routing LAYER {name} has no {what}"));
    let layer = if kind == LayerKind::Routing {
        let layer = TechLayer {
            name: name.clone(),
            kind,
            direction,
            pitch: pitch.ok_or_else(|| missing("PITCH"))?,
            min_width: width.ok_or_else(|| missing("WIDTH"))?,
            min_spacing: spacing.ok_or_else(|| missing("SPACING"))?,
            stack_index: 0,
        };
        if layer.pitch < layer.min_width + layer.min_spacing {
            return Err(ParseError::new(
                start_line,
                format!("LAYER {name}: pitch is smaller than width + spacing"),
            ));
        }
        layer
    } else {
        TechLayer {
            name,
            kind,
            direction,
            pitch: pitch.unwrap_or(0),
            min_width: width.unwrap_or(0),
            min_spacing: spacing.unwrap_or(0),
            stack_index: 0,
        }
    };
    Ok(layer)
}

/// `RECT x1 y1 x2 y2 ;` or `POLYGON x1 y1 ... ;` after the keyword.
fn parse_shape(t: &mut Tokens, dbu: i64, kw: &str) -> ParseResult<Vec<Rect>> {
    let mut coords = Vec::new();
    while t.peek() != Some(";") {
        coords.push(t.scaled(dbu)?);
    }
    t.next()?;
    if kw == "RECT" {
        if coords.len() != 4 {
            return Err(t.err("RECT needs 4 coordinates"));
        }
        return Ok(vec![Rect::new(coords[0], coords[1], coords[2], coords[3])]);
    }
    if coords.len() % 2 != 0 {
        return Err(t.err("POLYGON needs coordinate pairs"));
    }
    let pts = coords
        .chunks_exact(2)
        .map(|c| Point::new(c[0], c[1]))
        .collect();
    let poly = Polygon::rectilinear(pts).map_err(|e| t.err(format!("bad POLYGON: {e}")))?;
    Ok(poly.to_rects())
}

impl Tokens<'_> {
    /// True at a `MASK n` prefix on a shape statement.
    fn at_mask(&self) -> bool {
        self.peek().is_some_and(|k| k.eq_ignore_ascii_case("MASK"))
            && self.peek_at(1).is_some_and(|v| v.parse::<i64>().is_ok())
    }
}

/// Parses `LAYER ... ; RECT ... ; ... ` geometry statements until `END`.
fn parse_geometry(t: &mut Tokens, dbu: i64, owner: &str) -> ParseResult<Vec<(String, Rect)>> {
    let mut shapes = Vec::new();
    let mut layer: Option<String> = None;
    loop {
        let kw = t
            .peek()
            .ok_or_else(|| t.err(format!("unterminated geometry in {owner}")))?;
        match kw.to_ascii_uppercase().as_str() {
            "END" => {
                t.next()?;
                return Ok(shapes);
            }
            "LAYER" => {
                t.next()?;
                layer = Some(t.next()?.to_string());
                t.skip_statement()?;
            }
            k @ ("RECT" | "POLYGON") => {
                let k = k.to_string();
                t.next()?;
                if t.at_mask() {
                    t.next()?;
                    t.next()?;
                }
                let l = layer
                    .clone()
                    .ok_or_else(|| t.err(format!("{k} before LAYER in {owner}")))?;
                for r in parse_shape(t, dbu, &k)? {
                    shapes.push((l.clone(), r));
                }
            }
            _ => t.skip_unsupported("geometry")?,
        }
    }
}

fn parse_via(t: &mut Tokens, dbu: i64) -> ParseResult<ViaDef> {
    t.expect("VIA")?;
    let name = t.next()?.to_string();
    while t.peek().is_some_and(|k| k != "LAYER" && k != "END") {
        // DEFAULT / GENERATED / RESISTANCE ... ;
        if t.peek().is_some_and(|k| {
            k.eq_ignore_ascii_case("DEFAULT") || k.eq_ignore_ascii_case("GENERATED")
        }) {
            t.next()?;
        } else {
            t.skip_unsupported("VIA")?;
        }
    }
    let shapes = parse_geometry(t, dbu, &name)?;
    t.expect(&name)?;
    let mut layers: Vec<(String, Vec<Rect>)> = Vec::new();
    for (l, r) in shapes {
        match layers.iter_mut().find(|(n, _)| *n == l) {
            Some((_, rs)) => rs.push(r),
            None => layers.push((l, vec![r])),
        }
    }
    Ok(ViaDef { name, layers })
}

fn parse_size(t: &mut Tokens, dbu: i64) -> ParseResult<(Coord, Coord)> {
    t.expect("SIZE")?;
    let w = t.scaled(dbu)?;
    t.expect("BY")?;
    let h = t.scaled(dbu)?;
    t.expect(";")?;
    Ok((w, h))
}

fn parse_site(t: &mut Tokens, dbu: i64) -> ParseResult<Site> {
    t.expect("SITE")?;
    let name = t.next()?.to_string();
    let mut class = String::new();
    let mut size = None;
    loop {
        let kw = t.peek().ok_or_else(|| t.err("unterminated SITE"))?;
        match kw.to_ascii_uppercase().as_str() {
            "END" => {
                t.next()?;
                t.expect(&name)?;
                break;
            }
            "CLASS" => {
                t.next()?;
                class = t.next()?.to_string();
                t.skip_statement()?;
            }
            "SIZE" => size = Some(parse_size(t, dbu)?),
            "SYMMETRY" => t.skip_statement()?,
            _ => t.skip_unsupported("SITE")?,
        }
    }
    let (width, height) = size.ok_or_else(|| t.err(format!("SITE {name} has no SIZE")))?;
    if width <= 0 || height <= 0 {
        return Err(t.err(format!("SITE {name} has non-positive SIZE")));
    }
    Ok(Site {
        name,
        class,
        width,
        height,
    })
}

fn parse_macro(t: &mut Tokens, dbu: i64) -> ParseResult<Macro> {
    t.expect("MACRO")?;
    let line = t.line();
    let name = t.next()?.to_string();
    let mut class = None;
    let mut size = None;
    let mut site = None;
    let mut origin = (0, 0);
    let mut pins = Vec::new();
    let mut obstructions = Vec::new();
    loop {
        let kw = t
            .peek()
            .ok_or_else(|| t.err(format!("unterminated MACRO {name}")))?;
        match kw.to_ascii_uppercase().as_str() {
            "END" => {
                t.next()?;
                t.expect(&name)?;
                break;
            }
            "CLASS" => {
                t.next()?;
                let mut parts = Vec::new();
                while t.peek() != Some(";") {
                    parts.push(t.next()?.to_string());
                }
                t.next()?;
                class = Some(parts.join(" "));
            }
            "SIZE" => size = Some(parse_size(t, dbu)?),
            "ORIGIN" => {
                t.next()?;
                origin = (t.scaled(dbu)?, t.scaled(dbu)?);
                t.expect(";")?;
            }
            "SITE" => {
                t.next()?;
                site = Some(t.next()?.to_string());
                t.skip_statement()?;
            }
            "FOREIGN" | "SYMMETRY" => t.skip_statement()?,
            "PIN" => pins.push(parse_pin(t, dbu)?),
            "OBS" => {
                t.next()?;
                obstructions.extend(parse_geometry(t, dbu, &name)?);
            }
            _ => t.skip_unsupported("MACRO")?,
        }
    }
    let size = size.ok_or_else(|| ParseError::new(line, format!("MACRO {name} has no SIZE")))?;
    let shift = |r: Rect| r.translate(origin.0, origin.1);
    for p in &mut pins {
        for s in &mut p.shapes {
            s.1 = shift(s.1);
        }
    }
    for s in &mut obstructions {
        s.1 = shift(s.1);
    }
    let bounds = Rect::new(0, 0, size.0, size.1);
    for p in &pins {
        if let Some((l, r)) = p.shapes.iter().find(|(_, r)| !bounds.contains_rect(r)) {
            return Err(ParseError::new(
                line,
                format!(
                    "MACRO {name} pin {} shape {r:?} on {l} lies outside the cell",
                    p.name
                ),
            ));
        }
    }
    Ok(Macro {
        name,
        class,
        size,
        site,
        site_span: 0,
        row_span: 0,
        pins,
        obstructions,
    })
}

fn parse_pin(t: &mut Tokens, dbu: i64) -> ParseResult<MacroPin> {
    t.expect("PIN")?;
    let name = t.next()?.to_string();
    let mut direction = None;
    let mut shapes = Vec::new();
    loop {
        let kw = t
            .peek()
            .ok_or_else(|| t.err(format!("unterminated PIN {name}")))?;
        match kw.to_ascii_uppercase().as_str() {
            "END" => {
                t.next()?;
                t.expect(&name)?;
                break;
            }
            "DIRECTION" => {
                t.next()?;
                direction = Some(t.next()?.to_ascii_uppercase());
                t.skip_statement()?;
            }
            "PORT" => {
                t.next()?;
                shapes.extend(parse_geometry(t, dbu, &name)?);
            }
            "USE" | "SHAPE" => t.skip_statement()?,
            _ => t.skip_unsupported("PIN")?,
        }
    }
    Ok(MacroPin {
        name,
        direction,
        shapes,
    })
}

/// Resolves each macro's site and computes its site/row span.
fn finish_macros(lef: &mut Lef) -> ParseResult<()> {
    let default_site = lef
        .sites
        .iter()
        .find(|s| s.class.eq_ignore_ascii_case("CORE"))
        .or(lef.sites.first())
        .cloned();
    let sites = lef.sites.clone();
    for m in &mut lef.macros {
        let site = match &m.site {
            Some(n) => sites
                .iter()
                .find(|s| &s.name == n)
                .cloned()
                .ok_or_else(|| {
                    ParseError::new(1, format!("MACRO {} references unknown SITE {n}", m.name))
                })?,
            None => match &default_site {
                Some(s) => s.clone(),
                None => {
                    return Err(ParseError::new(
                        1,
                        format!("MACRO {} has no SITE and none is defined", m.name),
                    ))
                }
            },
        };
        if m.size.0 % site.width != 0 || m.size.0 <= 0 {
            return Err(ParseError::new(
                1,
                format!(
                    "MACRO {} width {} is not a multiple of site width {}",
                    m.name, m.size.0, site.width
                ),
            ));
        }
        m.site_span = (m.size.0 / site.width) as usize;
        m.row_span = ((m.size.1 + site.height - 1) / site.height).max(1) as usize;
    }
    Ok(())
}

/// Emits the LEF subset this crate reads back.
pub fn write_lef(lef: &Lef) -> String {
    let d = lef.dbu_per_micron;
    let f = |v: Coord| format_scaled(v, d);
    let mut s = String::new();
    writeln!(
        s,
        "VERSION 5.8 ;\nBUSBITCHARS \"[]\" ;\nDIVIDERCHAR \"/\" ;\n"
    )
    .unwrap();
    writeln!(s, "UNITS\n  DATABASE MICRONS {d} ;\nEND UNITS\n").unwrap();
    for l in &lef.layers {
        writeln!(s, "LAYER {}", l.name).unwrap();
        let kind = match l.kind {
            LayerKind::Routing => "ROUTING",
            LayerKind::Cut => "CUT",
            LayerKind::Masterslice => "MASTERSLICE",
            LayerKind::Other => "IMPLANT",
        };
        writeln!(s, "  TYPE {kind} ;").unwrap();
        if let Some(dir) = l.direction {
            let dir = match dir {
                Direction::Horizontal => "HORIZONTAL",
                Direction::Vertical => "VERTICAL",
            };
            writeln!(s, "  DIRECTION {dir} ;").unwrap();
        }
        if l.pitch > 0 {
            writeln!(s, "  PITCH {} ;", f(l.pitch)).unwrap();
        }
        if l.min_width > 0 {
            writeln!(s, "  WIDTH {} ;", f(l.min_width)).unwrap();
        }
        if l.min_spacing > 0 {
            writeln!(s, "  SPACING {} ;", f(l.min_spacing)).unwrap();
        }
        writeln!(s, "END {}\n", l.name).unwrap();
    }
    let rect = |s: &mut String, r: &Rect| {
        writeln!(
            s,
            "      RECT {} {} {} {} ;",
            f(r.lo.x),
            f(r.lo.y),
            f(r.hi.x),
            f(r.hi.y)
        )
        .unwrap();
    };
    for v in &lef.vias {
        writeln!(s, "VIA {} DEFAULT", v.name).unwrap();
        for (l, rects) in &v.layers {
            writeln!(s, "    LAYER {l} ;").unwrap();
            for r in rects {
                rect(&mut s, r);
            }
        }
        writeln!(s, "END {}\n", v.name).unwrap();
    }
    for site in &lef.sites {
        writeln!(
            s,
            "SITE {}\n  CLASS {} ;\n  SIZE {} BY {} ;\nEND {}\n",
            site.name,
            site.class,
            f(site.width),
            f(site.height),
            site.name
        )
        .unwrap();
    }
    for m in &lef.macros {
        writeln!(s, "MACRO {}", m.name).unwrap();
        if let Some(c) = &m.class {
            writeln!(s, "  CLASS {c} ;").unwrap();
        }
        writeln!(
            s,
            "  ORIGIN 0 0 ;\n  SIZE {} BY {} ;",
            f(m.size.0),
            f(m.size.1)
        )
        .unwrap();
        if let Some(site) = &m.site {
            writeln!(s, "  SITE {site} ;").unwrap();
        }
        for p in &m.pins {
            writeln!(s, "  PIN {}", p.name).unwrap();
            if let Some(d) = &p.direction {
                writeln!(s, "    DIRECTION {d} ;").unwrap();
            }
            writeln!(s, "    PORT").unwrap();
            write_shapes(&mut s, &p.shapes, &f);
            writeln!(s, "    END\n  END {}", p.name).unwrap();
        }
        if !m.obstructions.is_empty() {
            writeln!(s, "  OBS").unwrap();
            write_shapes(&mut s, &m.obstructions, &f);
            writeln!(s, "  END").unwrap();
        }
        writeln!(s, "END {}\n", m.name).unwrap();
    }
    writeln!(s, "END LIBRARY").unwrap();
    s
}

fn write_shapes(s: &mut String, shapes: &[(String, Rect)], f: &dyn Fn(Coord) -> String) {
    let mut current: Option<&str> = None;
    for (l, r) in shapes {
        if current != Some(l.as_str()) {
            writeln!(s, "      LAYER {l} ;").unwrap();
            current = Some(l);
        }
        writeln!(
            s,
            "        RECT {} {} {} {} ;",
            f(r.lo.x),
            f(r.lo.y),
            f(r.hi.x),
            f(r.hi.y)
        )
        .unwrap();
    }
}
