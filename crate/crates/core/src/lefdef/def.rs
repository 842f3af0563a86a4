// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::{LayerKind, Lef, ParseError, ParseResult, Tokens};
use crate::geom::{Coord, Orient, Point, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementStatus {
    Placed,
    Fixed,
    Cover,
}

impl PlacementStatus {
    fn keyword(self) -> &'static str {
        match self {
            PlacementStatus::Placed => "PLACED",
            PlacementStatus::Fixed => "FIXED",
            PlacementStatus::Cover => "COVER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub name: String,
    pub site: String,
    pub origin: Point,
    pub orient: Orient,
    pub count_x: usize,
    pub count_y: usize,
    pub step: (Coord, Coord),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub macro_name: String,
    pub location: Point,
    pub orient: Orient,
    pub status: PlacementStatus,
}

/// A net terminal. I/O pins use the instance name `PIN`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NetPin {
    pub instance: String,
    pub pin: String,
}

/// One straight wire piece, normalized from DEF routing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub layer: String,
    pub start: Point,
    pub end: Point,
    pub width: Coord,
    /// How far the metal runs past each endpoint along the wire.
    pub ext: Coord,
}

impl Segment {
    pub fn is_horizontal(&self) -> bool {
        self.start.y == self.end.y
    }

    /// Centerline length, `|Δx| + |Δy|`.
    pub fn length(&self) -> Coord {
        (self.end.x - self.start.x).abs() + (self.end.y - self.start.y).abs()
    }

    /// The metal rectangle covered by this segment.
    pub fn rect(&self) -> Rect {
        let lo = self.width / 2;
        let hi = self.width - lo;
        let r = Rect::from_points(self.start, self.end);
        if self.is_horizontal() {
            Rect::new(
                r.lo.x - self.ext,
                r.lo.y - lo,
                r.hi.x + self.ext,
                r.hi.y + hi,
            )
        } else {
            Rect::new(
                r.lo.x - lo,
                r.lo.y - self.ext,
                r.hi.x + hi,
                r.hi.y + self.ext,
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViaUse {
    pub via: String,
    pub at: Point,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoutedNet {
    pub name: String,
    pub pins: Vec<NetPin>,
    pub segments: Vec<Segment>,
    pub vias: Vec<ViaUse>,
    /// Explicit rectangles (`+ RECT`), special nets only.
    pub rects: Vec<(String, Rect)>,
}

impl RoutedNet {
    pub fn is_routed(&self) -> bool {
        !(self.segments.is_empty() && self.vias.is_empty() && self.rects.is_empty())
    }

    /// Sum of segment centerline lengths.
    pub fn length(&self) -> Coord {
        self.segments.iter().map(Segment::length).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FloorplanDef {
    pub design: String,
    pub die_area: Rect,
    pub rows: Vec<Row>,
    pub components: Vec<Component>,
    pub nets: Vec<RoutedNet>,
    pub special_nets: Vec<RoutedNet>,
}

#[derive(Debug, Clone)]
pub struct DefFile {
    pub def: FloorplanDef,
    pub warnings: Vec<String>,
}

struct DefParser<'a, 'l> {
    t: Tokens<'a>,
    lef: &'l Lef,
    /// LEF dbu per DEF unit.
    mult: Coord,
}

impl DefParser<'_, '_> {
    fn coord(&mut self) -> ParseResult<Coord> {
        let line = self.t.line();
        let tok = self.t.next()?;
        let v: Coord = tok.parse().map_err(|_| {
            ParseError::new(line, format!("expected integer coordinate, found {tok:?}"))
        })?;
        Ok(v * self.mult)
    }

    fn point(&mut self) -> ParseResult<Point> {
        self.t.expect("(")?;
        let x = self.coord()?;
        let y = self.coord()?;
        self.t.expect(")")?;
        Ok(Point::new(x, y))
    }

    fn orient(&mut self) -> ParseResult<Orient> {
        let line = self.t.line();
        let code = self.t.next()?;
        Orient::from_def(&code.to_ascii_uppercase())
            .ok_or_else(|| ParseError::new(line, format!("unknown orientation {code:?}")))
    }

    fn section_count(&mut self) -> ParseResult<()> {
        self.t.int()?;
        self.t.expect(";")
    }
}

/// Parses the DEF subset against an already-parsed LEF.
pub fn parse_def(text: &str, lef: &Lef) -> ParseResult<DefFile> {
    let mut p = DefParser {
        t: Tokens::new(text),
        lef,
        mult: 1,
    };
    let mut def = FloorplanDef::default();
    let mut have_die = false;
    let mut have_nets = false;
    let mut have_units = false;
    while let Some(kw) = p.t.peek() {
        match kw.to_ascii_uppercase().as_str() {
            "VERSION" | "DIVIDERCHAR" | "BUSBITCHARS" => p.t.skip_statement()?,
            "DESIGN" => {
                p.t.next()?;
                def.design = p.t.next()?.to_string();
                p.t.expect(";")?;
            }
            "UNITS" => {
                p.t.next()?;
                p.t.expect("DISTANCE")?;
                p.t.expect("MICRONS")?;
                let line = p.t.line();
                let units = p.t.int()?;
                p.t.expect(";")?;
                if units <= 0 || lef.dbu_per_micron % units != 0 {
                    return Err(ParseError::new(
                        line,
                        format!(
                            "DEF units {units} do not divide LEF database units {}",
                            lef.dbu_per_micron
                        ),
                    ));
                }
                p.mult = lef.dbu_per_micron / units;
                have_units = true;
            }
            "DIEAREA" => {
                p.t.next()?;
                let line = p.t.line();
                let mut pts = Vec::new();
                while p.t.peek() == Some("(") {
                    pts.push(p.point()?);
                }
                p.t.expect(";")?;
                if pts.len() != 2 {
                    return Err(ParseError::new(
                        line,
                        "only rectangular DIEAREA is supported",
                    ));
                }
                def.die_area = Rect::from_points(pts[0], pts[1]);
                have_die = true;
            }
            "ROW" => def.rows.push(parse_row(&mut p)?),
            "COMPONENTS" => {
                p.t.next()?;
                p.section_count()?;
                while !p.t.eat("END") {
                    if let Some(c) = parse_component(&mut p)? {
                        def.components.push(c);
                    }
                }
                p.t.expect("COMPONENTS")?;
            }
            "NETS" | "SPECIALNETS" => {
                let special = kw.eq_ignore_ascii_case("SPECIALNETS");
                let section = if special { "SPECIALNETS" } else { "NETS" };
                p.t.next()?;
                p.section_count()?;
                while !p.t.eat("END") {
                    let net = parse_net(&mut p, special)?;
                    if special {
                        def.special_nets.push(net);
                    } else {
                        def.nets.push(net);
                    }
                }
                p.t.expect(section)?;
                have_nets |= !special;
            }
            "END" => {
                p.t.next()?;
                p.t.expect("DESIGN")?;
                break;
            }
            "VIAS"
            | "PINS"
            | "BLOCKAGES"
            | "REGIONS"
            | "GROUPS"
            | "FILLS"
            | "NONDEFAULTRULES"
            | "PROPERTYDEFINITIONS"
            | "SCANCHAINS"
            | "STYLES" => {
                let name = kw.to_string();
                let line = p.t.line();
                p.t.warnings
                    .push(format!("line {line}: skipped unsupported {name} section"));
                p.t.next()?;
                p.t.skip_block(&name)
                    .map_err(|_| ParseError::new(line, format!("unterminated {name} section")))?;
            }
            _ => p.t.skip_unsupported("DEF")?,
        }
    }
    if !have_units {
        let line = p.t.line();
        p.t.warnings.push(format!(
            "line {line}: no UNITS statement; assuming LEF database units"
        ));
    }
    if !have_die {
        return Err(p.t.err("missing DIEAREA"));
    }
    if !have_nets {
        p.t.warnings
            .push("no NETS section; net list is empty".to_string());
    }
    check_components(&def, lef)?;
    for net in def.nets.iter().chain(&def.special_nets) {
        check_inside_die(net, def.die_area, lef)?;
    }
    Ok(DefFile {
        def,
        warnings: p.t.warnings,
    })
}

fn parse_row(p: &mut DefParser) -> ParseResult<Row> {
    p.t.expect("ROW")?;
    let line = p.t.line();
    let name = p.t.next()?.to_string();
    let site_name = p.t.next()?.to_string();
    let x = p.coord()?;
    let y = p.coord()?;
    let orient = p.orient()?;
    let site = p.lef.site(&site_name).ok_or_else(|| {
        ParseError::new(line, format!("ROW {name} uses unknown SITE {site_name}"))
    })?;
    let mut row = Row {
        name,
        site: site_name,
        origin: Point::new(x, y),
        orient,
        count_x: 1,
        count_y: 1,
        step: (site.width, site.height),
    };
    if p.t.eat("DO") {
        row.count_x =
            p.t.int()?
                .try_into()
                .map_err(|_| p.t.err("negative DO count"))?;
        p.t.expect("BY")?;
        row.count_y =
            p.t.int()?
                .try_into()
                .map_err(|_| p.t.err("negative BY count"))?;
        if p.t.eat("STEP") {
            row.step = (p.coord()?, p.coord()?);
        }
    }
    while p.t.peek() != Some(";") {
        // + PROPERTY ...
        p.t.next()?;
    }
    p.t.next()?;
    if row.count_x > 1 && row.step.0 != site.width {
        return Err(ParseError::new(
            line,
            format!("ROW {} x step differs from site width", row.name),
        ));
    }
    if row.count_y > 1 && row.step.1 != site.height {
        return Err(ParseError::new(
            line,
            format!("ROW {} y step differs from site height", row.name),
        ));
    }
    Ok(row)
}

fn parse_component(p: &mut DefParser) -> ParseResult<Option<Component>> {
    p.t.expect("-")?;
    let line = p.t.line();
    let name = p.t.next()?.to_string();
    let macro_name = p.t.next()?.to_string();
    if p.lef.macro_def(&macro_name).is_none() {
        return Err(ParseError::new(
            line,
            format!("component {name} references unknown macro {macro_name}"),
        ));
    }
    let mut placed = None;
    loop {
        let tok = p.t.next()?;
        if tok == ";" {
            break;
        }
        if tok != "+" {
            return Err(ParseError::new(
                p.t.line(),
                format!("unexpected {tok:?} in component {name}"),
            ));
        }
        let kw = p.t.next()?.to_ascii_uppercase();
        let status = match kw.as_str() {
            "PLACED" => Some(PlacementStatus::Placed),
            "FIXED" => Some(PlacementStatus::Fixed),
            "COVER" => Some(PlacementStatus::Cover),
            _ => None,
        };
        if let Some(status) = status {
            let at = p.point()?;
            let orient = p.orient()?;
            placed = Some((at, orient, status));
        } else if kw == "UNPLACED" {
            p.t.warnings.push(format!(
                "line {line}: component {name} is unplaced and ignored"
            ));
        } else {
            if kw != "SOURCE" {
                p.t.warnings
                    .push(format!("line {line}: skipped component option {kw}"));
            }
            while !matches!(p.t.peek(), Some("+") | Some(";")) {
                p.t.next()?;
            }
        }
    }
    Ok(placed.map(|(location, orient, status)| Component {
        name,
        macro_name,
        location,
        orient,
        status,
    }))
}

/// Rejects placements whose origin is not on a row's site grid.
fn check_components(def: &FloorplanDef, lef: &Lef) -> ParseResult<()> {
    if def.rows.is_empty() {
        return Ok(());
    }
    for c in &def.components {
        let on_grid = def.rows.iter().any(|r| {
            let dx = c.location.x - r.origin.x;
            let dy = c.location.y - r.origin.y;
            let (sx, sy) = r.step;
            dx >= 0
                && dy >= 0
                && dx % sx.max(1) == 0
                && (if r.count_y > 1 {
                    dy % sy.max(1) == 0
                } else {
                    dy == 0
                })
        });
        let m = lef.macro_def(&c.macro_name).expect("checked at parse");
        let class_free = m.class.as_deref().is_some_and(|k| {
            let k = k.to_ascii_uppercase();
            k.starts_with("BLOCK") || k.starts_with("PAD") || k.starts_with("COVER")
        });
        if !on_grid && !class_free {
            return Err(ParseError::new(
                1,
                format!(
                    "component {} at ({}, {}) is not aligned to any placement row",
                    c.name, c.location.x, c.location.y
                ),
            ));
        }
    }
    Ok(())
}

fn check_inside_die(net: &RoutedNet, die: Rect, lef: &Lef) -> ParseResult<()> {
    let outside = |p: Point| !die.contains(p);
    for s in &net.segments {
        if outside(s.start) || outside(s.end) {
            return Err(ParseError::new(
                1,
                format!(
                    "net {} routes on {} outside the die area",
                    net.name, s.layer
                ),
            ));
        }
    }
    for v in &net.vias {
        if outside(v.at) {
            return Err(ParseError::new(
                1,
                format!("net {} places via {} outside the die area", net.name, v.via),
            ));
        }
        debug_assert!(lef.via(&v.via).is_some());
    }
    for (l, r) in &net.rects {
        if !die.contains_rect(r) {
            return Err(ParseError::new(
                1,
                format!("net {} has a {l} rectangle outside the die area", net.name),
            ));
        }
    }
    Ok(())
}

fn routing_layer(p: &DefParser, line: usize, name: &str, net: &str) -> ParseResult<Coord> {
    match p.lef.layer(name) {
        Some(l) if l.kind != LayerKind::Cut => Ok(l.min_width),
        Some(_) => Err(ParseError::new(
            line,
            format!("net {net} routes on cut layer {name}"),
        )),
        None => Err(ParseError::new(
            line,
            format!("net {net} routed on unknown layer {name}"),
        )),
    }
}

fn parse_net(p: &mut DefParser, special: bool) -> ParseResult<RoutedNet> {
    p.t.expect("-")?;
    let mut net = RoutedNet {
        name: p.t.next()?.to_string(),
        ..Default::default()
    };
    loop {
        match p.t.next()? {
            ";" => break,
            "(" => {
                let instance = p.t.next()?.to_string();
                let pin = p.t.next()?.to_string();
                while p.t.next()? != ")" {}
                net.pins.push(NetPin { instance, pin });
            }
            "+" => {
                let line = p.t.line();
                let kw = p.t.next()?.to_ascii_uppercase();
                match kw.as_str() {
                    "ROUTED" | "FIXED" | "COVER" | "NOSHIELD" => {
                        parse_wiring(p, &mut net, special)?
                    }
                    "RECT" if special => {
                        let layer = p.t.next()?.to_string();
                        routing_layer(p, line, &layer, &net.name)?;
                        if p.t.eat("+") {
                            p.t.expect("MASK")?;
                            p.t.int()?;
                        }
                        let a = p.point()?;
                        let b = p.point()?;
                        net.rects.push((layer, Rect::from_points(a, b)));
                    }
                    _ => {
                        if !matches!(kw.as_str(), "USE" | "SOURCE") {
                            p.t.warnings.push(format!(
                                "line {line}: skipped net option {kw} on {}",
                                net.name
                            ));
                        }
                        while !matches!(p.t.peek(), Some("+") | Some(";")) {
                            p.t.next()?;
                        }
                    }
                }
            }
            tok => {
                return Err(ParseError::new(
                    p.t.line(),
                    format!("unexpected {tok:?} in net {}", net.name),
                ))
            }
        }
    }
    Ok(net)
}

/// Reads routing statements after `+ ROUTED` up to the next `+` or `;`.
fn parse_wiring(p: &mut DefParser, net: &mut RoutedNet, special: bool) -> ParseResult<()> {
    loop {
        let line = p.t.line();
        let mut layer = p.t.next()?.to_string();
        let mut width = routing_layer(p, line, &layer, &net.name)?;
        let mut ext = width / 2;
        if special {
            width = p.coord()?;
            ext = 0;
            if width <= 0 {
                return Err(ParseError::new(
                    line,
                    format!("net {} has non-positive wire width", net.name),
                ));
            }
        }
        // Wire-level modifiers.
        loop {
            match p.t.peek().map(|s| s.to_ascii_uppercase()) {
                Some(k) if k == "TAPER" => {
                    p.t.next()?;
                }
                Some(k) if k == "TAPERRULE" || k == "STYLE" || k == "MASK" => {
                    p.t.next()?;
                    p.t.next()?;
                }
                Some(k)
                    if special
                        && k == "+"
                        && p.t
                            .peek_at(1)
                            .is_some_and(|s| s.eq_ignore_ascii_case("SHAPE")) =>
                {
                    p.t.next()?;
                    p.t.next()?;
                    p.t.next()?;
                }
                _ => break,
            }
        }
        let mut cur: Option<Point> = None;
        loop {
            match p.t.peek() {
                Some("(") => {
                    p.t.next()?;
                    let prev = cur;
                    let x = match p.t.next()? {
                        "*" => prev.ok_or_else(|| p.t.err("'*' with no previous point"))?.x,
                        s => parse_coord(p, s)?,
                    };
                    let y = match p.t.next()? {
                        "*" => prev.ok_or_else(|| p.t.err("'*' with no previous point"))?.y,
                        s => parse_coord(p, s)?,
                    };
                    if p.t.peek() != Some(")") {
                        // Explicit extension value.
                        let e = p.coord()?;
                        if !special {
                            ext = e;
                        }
                    }
                    p.t.expect(")")?;
                    let pt = Point::new(x, y);
                    if let Some(a) = prev {
                        if a.x != pt.x && a.y != pt.y {
                            return Err(ParseError::new(
                                line,
                                format!(
                                    "net {} has a non-axis-parallel segment on {layer}",
                                    net.name
                                ),
                            ));
                        }
                        if a != pt {
                            net.segments.push(Segment {
                                layer: layer.clone(),
                                start: a,
                                end: pt,
                                width,
                                ext,
                            });
                        }
                    }
                    cur = Some(pt);
                }
                Some(tok) if !matches!(tok, "+" | ";") && !tok.eq_ignore_ascii_case("NEW") => {
                    let vline = p.t.line();
                    let via_name = p.t.next()?.to_string();
                    let via = p.lef.via(&via_name).ok_or_else(|| {
                        ParseError::new(
                            vline,
                            format!("net {} uses unknown via {via_name}", net.name),
                        )
                    })?;
                    let at = cur.ok_or_else(|| ParseError::new(vline, "via before any point"))?;
                    net.vias.push(ViaUse { via: via_name, at });
                    let other = via.layers.iter().map(|(l, _)| l).find(|l| {
                        **l != layer && p.lef.layer(l).is_some_and(|t| t.kind != LayerKind::Cut)
                    });
                    if let Some(other) = other {
                        layer = other.clone();
                        if !special {
                            width = routing_layer(p, vline, &layer, &net.name)?;
                            ext = width / 2;
                        }
                    }
                }
                _ => break,
            }
        }
        if !p.t.eat("NEW") {
            return Ok(());
        }
    }
}

fn parse_coord(p: &DefParser, s: &str) -> ParseResult<Coord> {
    s.parse::<Coord>()
        .map(|v| v * p.mult)
        .map_err(|_| p.t.err(format!("expected coordinate, found {s:?}")))
}

/// Debug emitter: writes a DEF that parses back to the same `FloorplanDef`.
pub fn write_def(def: &FloorplanDef, lef: &Lef) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "VERSION 5.8 ;\nDIVIDERCHAR \"/\" ;\nBUSBITCHARS \"[]\" ;"
    )
    .unwrap();
    writeln!(
        s,
        "DESIGN {} ;",
        if def.design.is_empty() {
            "top"
        } else {
            &def.design
        }
    )
    .unwrap();
    writeln!(s, "UNITS DISTANCE MICRONS {} ;", lef.dbu_per_micron).unwrap();
    let d = def.die_area;
    writeln!(
        s,
        "DIEAREA ( {} {} ) ( {} {} ) ;",
        d.lo.x, d.lo.y, d.hi.x, d.hi.y
    )
    .unwrap();
    for r in &def.rows {
        writeln!(
            s,
            "ROW {} {} {} {} {} DO {} BY {} STEP {} {} ;",
            r.name,
            r.site,
            r.origin.x,
            r.origin.y,
            r.orient.def_code(),
            r.count_x,
            r.count_y,
            r.step.0,
            r.step.1
        )
        .unwrap();
    }
    writeln!(s, "COMPONENTS {} ;", def.components.len()).unwrap();
    for c in &def.components {
        writeln!(
            s,
            "  - {} {} + {} ( {} {} ) {} ;",
            c.name,
            c.macro_name,
            c.status.keyword(),
            c.location.x,
            c.location.y,
            c.orient.def_code()
        )
        .unwrap();
    }
    writeln!(s, "END COMPONENTS").unwrap();
    for (section, nets, special) in [
        ("SPECIALNETS", &def.special_nets, true),
        ("NETS", &def.nets, false),
    ] {
        writeln!(s, "{section} {} ;", nets.len()).unwrap();
        for n in nets {
            write_net(&mut s, n, lef, special);
        }
        writeln!(s, "END {section}").unwrap();
    }
    writeln!(s, "END DESIGN").unwrap();
    s
}

fn write_net(s: &mut String, n: &RoutedNet, lef: &Lef, special: bool) {
    write!(s, "  - {}", n.name).unwrap();
    for p in &n.pins {
        write!(s, " ( {} {} )", p.instance, p.pin).unwrap();
    }
    let mut first = true;
    let mut lead = |s: &mut String, layer: &str, width: Coord| {
        let kw = if first {
            "\n    + ROUTED"
        } else {
            "\n      NEW"
        };
        first = false;
        if special {
            write!(s, "{kw} {layer} {width}").unwrap();
        } else {
            write!(s, "{kw} {layer}").unwrap();
        }
    };
    for seg in &n.segments {
        lead(s, &seg.layer, seg.width);
        let explicit = !special && seg.ext != seg.width / 2;
        if explicit {
            write!(
                s,
                " ( {} {} {} ) ( {} {} {} )",
                seg.start.x, seg.start.y, seg.ext, seg.end.x, seg.end.y, seg.ext
            )
            .unwrap();
        } else {
            write!(
                s,
                " ( {} {} ) ( {} {} )",
                seg.start.x, seg.start.y, seg.end.x, seg.end.y
            )
            .unwrap();
        }
    }
    for v in &n.vias {
        let layer = lef
            .via(&v.via)
            .and_then(|vd| {
                vd.layers
                    .iter()
                    .map(|(l, _)| l)
                    .find(|l| lef.layer(l).is_some_and(|t| t.kind != LayerKind::Cut))
            })
            .cloned()
            .unwrap_or_default();
        let width = lef.layer(&layer).map_or(1, |l| l.min_width.max(1));
        lead(s, &layer, width);
        write!(s, " ( {} {} ) {}", v.at.x, v.at.y, v.via).unwrap();
    }
    for (l, r) in &n.rects {
        write!(
            s,
            "\n    + RECT {l} ( {} {} ) ( {} {} )",
            r.lo.x, r.lo.y, r.hi.x, r.hi.y
        )
        .unwrap();
    }
    writeln!(s, " ;").unwrap();
}
