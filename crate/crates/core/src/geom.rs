// SPDX-License-Identifier: Apache-2.0

//! Integer-exact rectilinear geometry.
//!
//! Every coordinate is an `i64` database unit (dbu). Areas are carried as
//! `i128` so products of two coordinates never overflow. Containment is
//! boundary-inclusive throughout: a probe that touches a shape is inside it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Coord = i64;
pub type Area = i128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeomError {
    #[error("polygon has {0} distinct vertices; at least 3 are required")]
    TooFewVertices(usize),
    #[error("polygon is self-intersecting (edges {0} and {1})")]
    SelfIntersecting(usize, usize),
    #[error("polygon is not rectilinear (edge {0} is not axis-parallel)")]
    NotRectilinear(usize),
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Point {
    pub x: Coord,
    pub y: Coord,
}

impl Point {
    pub const fn new(x: Coord, y: Coord) -> Self {
        Point { x, y }
    }

    pub fn offset(self, dx: Coord, dy: Coord) -> Self {
        Point::new(self.x + dx, self.y + dy)
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Rect {
    pub lo: Point,
    pub hi: Point,
}

impl Rect {
    /// Builds a rectangle from two opposite corners in any order.
    pub fn new(x0: Coord, y0: Coord, x1: Coord, y1: Coord) -> Self {
        Rect {
            lo: Point::new(x0.min(x1), y0.min(y1)),
            hi: Point::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn from_points(a: Point, b: Point) -> Self {
        Rect::new(a.x, a.y, b.x, b.y)
    }

    /// Degenerate rectangle covering a single point.
    pub fn point(p: Point) -> Self {
        Rect { lo: p, hi: p }
    }

    pub fn width(&self) -> Coord {
        self.hi.x - self.lo.x
    }

    pub fn height(&self) -> Coord {
        self.hi.y - self.lo.y
    }

    pub fn area(&self) -> Area {
        self.width() as Area * self.height() as Area
    }

    pub fn is_degenerate(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    /// True when the closed rectangles share at least one point.
    pub fn touches(&self, other: &Rect) -> bool {
        self.lo.x <= other.hi.x
            && other.lo.x <= self.hi.x
            && self.lo.y <= other.hi.y
            && other.lo.y <= self.hi.y
    }

    /// Intersection with positive area, if any.
    pub fn overlap(&self, other: &Rect) -> Option<Rect> {
        let lo = Point::new(self.lo.x.max(other.lo.x), self.lo.y.max(other.lo.y));
        let hi = Point::new(self.hi.x.min(other.hi.x), self.hi.y.min(other.hi.y));
        (lo.x < hi.x && lo.y < hi.y).then_some(Rect { lo, hi })
    }

    pub fn expand(&self, d: Coord) -> Rect {
        Rect {
            lo: self.lo.offset(-d, -d),
            hi: self.hi.offset(d, d),
        }
    }

    pub fn translate(&self, dx: Coord, dy: Coord) -> Rect {
        Rect {
            lo: self.lo.offset(dx, dy),
            hi: self.hi.offset(dx, dy),
        }
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            lo: Point::new(self.lo.x.min(other.lo.x), self.lo.y.min(other.lo.y)),
            hi: Point::new(self.hi.x.max(other.hi.x), self.hi.y.max(other.hi.y)),
        }
    }

    /// Center, rounded toward negative infinity.
    pub fn center(&self) -> Point {
        Point::new(
            (self.lo.x + self.hi.x).div_euclid(2),
            (self.lo.y + self.hi.y).div_euclid(2),
        )
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon {
            vertices: vec![
                self.lo,
                Point::new(self.hi.x, self.lo.y),
                self.hi,
                Point::new(self.lo.x, self.hi.y),
            ],
        }
    }
}

/// Simple polygon stored as an implicitly closed vertex ring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Validates and builds a polygon. A repeated closing vertex and
    /// consecutive duplicates are dropped before validation.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeomError> {
        vertices.dedup();
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeomError::TooFewVertices(vertices.len()));
        }
        let poly = Polygon { vertices };
        poly.check_simple()?;
        Ok(poly)
    }

    /// Validates and additionally requires axis-parallel edges.
    pub fn rectilinear(vertices: Vec<Point>) -> Result<Self, GeomError> {
        let poly = Polygon::new(vertices)?;
        if let Some(i) = poly.first_oblique_edge() {
            return Err(GeomError::NotRectilinear(i));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn first_oblique_edge(&self) -> Option<usize> {
        self.edges().position(|(a, b)| a.x != b.x && a.y != b.y)
    }

    pub fn is_rectilinear(&self) -> bool {
        self.first_oblique_edge().is_none()
    }

    /// Twice the signed area (shoelace); positive for counter-clockwise rings.
    pub fn signed_area2(&self) -> Area {
        self.edges()
            .map(|(a, b)| a.x as Area * b.y as Area - b.x as Area * a.y as Area)
            .sum()
    }

    /// Absolute area. Exact for rectilinear polygons; general polygons with
    /// odd doubled area round down.
    pub fn area(&self) -> Area {
        self.signed_area2().abs() / 2
    }

    pub fn bbox(&self) -> Rect {
        let mut r = Rect::point(self.vertices[0]);
        for &p in &self.vertices[1..] {
            r = r.union(&Rect::point(p));
        }
        r
    }

    /// Returns the image of this polygon under `t`.
    pub fn transformed(&self, t: &Transform) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&p| t.apply(p)).collect(),
        }
    }

    fn check_simple(&self) -> Result<(), GeomError> {
        let n = self.vertices.len();
        let edges: Vec<(Point, Point)> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Adjacent edges share exactly one endpoint; they may only
                    // meet there. Collinear backtracking is an overlap.
                    let shared = if j == i + 1 { b } else { a };
                    let (far_i, far_j) = if j == i + 1 { (a, d) } else { (b, c) };
                    if cross(shared, far_i, far_j) == 0 && dot(shared, far_i, far_j) > 0 {
                        return Err(GeomError::SelfIntersecting(i, j));
                    }
                } else if segments_touch(a, b, c, d) {
                    return Err(GeomError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(())
    }

    /// Horizontal interior intervals of a rectilinear polygon within the
    /// open slab `(y0, y1)`; `y0 < y1` must lie between consecutive vertex
    /// ordinates so that no horizontal edge falls strictly inside.
    fn slab_intervals(&self, y0: Coord, y1: Coord, out: &mut Vec<(Coord, Coord)>) {
        let mut xs: Vec<Coord> = self
            .edges()
            .filter(|(a, b)| a.x == b.x && a.y.min(b.y) <= y0 && a.y.max(b.y) >= y1)
            .map(|(a, _)| a.x)
            .collect();
        xs.sort_unstable();
        for pair in xs.chunks_exact(2) {
            if pair[0] < pair[1] {
                out.push((pair[0], pair[1]));
            }
        }
    }

    /// Exact decomposition of a rectilinear polygon into disjoint rectangles
    /// (one horizontal slab per pair of consecutive distinct ordinates).
    pub fn to_rects(&self) -> Vec<Rect> {
        let mut ys: Vec<Coord> = self.vertices.iter().map(|p| p.y).collect();
        ys.sort_unstable();
        ys.dedup();
        let mut out = Vec::new();
        let mut spans = Vec::new();
        for w in ys.windows(2) {
            spans.clear();
            self.slab_intervals(w[0], w[1], &mut spans);
            out.extend(spans.iter().map(|&(x0, x1)| Rect::new(x0, w[0], x1, w[1])));
        }
        out
    }
}

fn cross(o: Point, a: Point, b: Point) -> i128 {
    (a.x - o.x) as i128 * (b.y - o.y) as i128 - (a.y - o.y) as i128 * (b.x - o.x) as i128
}

fn dot(o: Point, a: Point, b: Point) -> i128 {
    (a.x - o.x) as i128 * (b.x - o.x) as i128 + (a.y - o.y) as i128 * (b.y - o.y) as i128
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, touching included.
fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a).signum();
    let d2 = cross(c, d, b).signum();
    let d3 = cross(a, b, c).signum();
    let d4 = cross(a, b, d).signum();
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

/// Ray-casting containment test. Points on the boundary are inside.
pub fn point_in_polygon(p: Point, poly: &Polygon) -> bool {
    let mut inside = false;
    for (a, b) in poly.edges() {
        if on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            // Sign of the cross product tells which side of the edge p is on;
            // the ray toward +x crosses the edge iff p lies left of it in the
            // edge's upward orientation.
            let t = cross(a, b, p);
            if (b.y > a.y && t > 0) || (b.y < a.y && t < 0) {
                inside = !inside;
            }
        }
    }
    inside
}

/// Exact area of the intersection of two rectilinear polygons.
///
/// Both rings are swept in horizontal slabs bounded by the union of their
/// vertex ordinates; in each slab the interior intervals are intersected.
/// This yields the same area as Weiler-Atherton clipping followed by a
/// shoelace sum, without materializing the clipped polygons.
pub fn clip_intersection_area(a: &Polygon, b: &Polygon) -> Result<Area, GeomError> {
    for p in [a, b] {
        if let Some(i) = p.first_oblique_edge() {
            return Err(GeomError::NotRectilinear(i));
        }
    }
    let (ba, bb) = (a.bbox(), b.bbox());
    if ba.overlap(&bb).is_none() {
        return Ok(0);
    }
    let mut ys: Vec<Coord> = a
        .vertices()
        .iter()
        .chain(b.vertices())
        .map(|p| p.y)
        .filter(|&y| y >= ba.lo.y.max(bb.lo.y) && y <= ba.hi.y.min(bb.hi.y))
        .collect();
    ys.sort_unstable();
    ys.dedup();
    let mut total: Area = 0;
    let (mut ia, mut ib) = (Vec::new(), Vec::new());
    for w in ys.windows(2) {
        ia.clear();
        ib.clear();
        a.slab_intervals(w[0], w[1], &mut ia);
        b.slab_intervals(w[0], w[1], &mut ib);
        total += intervals_overlap_len(&ia, &ib) as Area * (w[1] - w[0]) as Area;
    }
    Ok(total)
}

/// Total overlap length of two sorted, internally disjoint interval lists.
fn intervals_overlap_len(a: &[(Coord, Coord)], b: &[(Coord, Coord)]) -> Coord {
    let (mut i, mut j, mut len) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            len += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    len
}

/// L1 gap between two closed rectangles; zero when they touch or overlap.
pub fn manhattan_rect_distance(a: &Rect, b: &Rect) -> Coord {
    let gx = (a.lo.x - b.hi.x).max(b.lo.x - a.hi.x).max(0);
    let gy = (a.lo.y - b.hi.y).max(b.lo.y - a.hi.y).max(0);
    gx + gy
}

/// Areas of `A \ B`, `B \ A` and `A ∩ B` where `A` and `B` are the unions of
/// the given rectangle sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OverlapAreas {
    pub only_a: Area,
    pub only_b: Area,
    pub both: Area,
}

impl OverlapAreas {
    pub fn area_a(&self) -> Area {
        self.only_a + self.both
    }

    pub fn area_b(&self) -> Area {
        self.only_b + self.both
    }

    pub fn union(&self) -> Area {
        self.only_a + self.only_b + self.both
    }
}

/// Sweep over rectangle sets computing the union-corrected overlap areas.
pub fn rect_set_overlap(a: &[Rect], b: &[Rect]) -> OverlapAreas {
    #[derive(Clone, Copy)]
    struct Tagged {
        r: Rect,
        side: u8,
    }
    let mut items: Vec<Tagged> = a
        .iter()
        .map(|&r| Tagged { r, side: 0 })
        .chain(b.iter().map(|&r| Tagged { r, side: 1 }))
        .filter(|t| !t.r.is_degenerate())
        .collect();
    items.sort_by_key(|t| t.r.lo.y);
    let mut ys: Vec<Coord> = items.iter().flat_map(|t| [t.r.lo.y, t.r.hi.y]).collect();
    ys.sort_unstable();
    ys.dedup();

    let mut out = OverlapAreas::default();
    let mut active: Vec<Tagged> = Vec::new();
    let mut next = 0;
    let mut events: Vec<(Coord, i32, u8)> = Vec::new();
    for w in ys.windows(2) {
        let (y0, y1) = (w[0], w[1]);
        active.retain(|t| t.r.hi.y > y0);
        while next < items.len() && items[next].r.lo.y <= y0 {
            if items[next].r.hi.y > y0 {
                active.push(items[next]);
            }
            next += 1;
        }
        if active.is_empty() {
            continue;
        }
        events.clear();
        for t in &active {
            events.push((t.r.lo.x, 1, t.side));
            events.push((t.r.hi.x, -1, t.side));
        }
        events.sort_unstable();
        let (mut ca, mut cb) = (0i32, 0i32);
        let mut last_x = events[0].0;
        let (mut la, mut lb, mut lab) = (0 as Coord, 0 as Coord, 0 as Coord);
        for &(x, delta, side) in &events {
            let span = x - last_x;
            if span > 0 {
                match (ca > 0, cb > 0) {
                    (true, true) => lab += span,
                    (true, false) => la += span,
                    (false, true) => lb += span,
                    _ => {}
                }
            }
            last_x = x;
            if side == 0 {
                ca += delta;
            } else {
                cb += delta;
            }
        }
        let h = (y1 - y0) as Area;
        out.only_a += la as Area * h;
        out.only_b += lb as Area * h;
        out.both += lab as Area * h;
    }
    out
}

/// Area of the union of a rectangle set.
pub fn union_area(rects: &[Rect]) -> Area {
    rect_set_overlap(rects, &[]).only_a
}

/// One of the eight rectilinear orientations: an optional mirror about the
/// x axis (y → -y) followed by a counter-clockwise rotation of
/// `quarter_turns × 90°`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Orient {
    pub reflect_x: bool,
    pub quarter_turns: u8,
}

impl Orient {
    pub const IDENTITY: Orient = Orient {
        reflect_x: false,
        quarter_turns: 0,
    };

    pub fn new(reflect_x: bool, quarter_turns: u8) -> Self {
        Orient {
            reflect_x,
            quarter_turns: quarter_turns % 4,
        }
    }

    pub fn apply(self, p: Point) -> Point {
        let y = if self.reflect_x { -p.y } else { p.y };
        match self.quarter_turns % 4 {
            0 => Point::new(p.x, y),
            1 => Point::new(-y, p.x),
            2 => Point::new(-p.x, -y),
            _ => Point::new(y, -p.x),
        }
    }

    /// The orientation `outer ∘ self`.
    pub fn then(self, outer: Orient) -> Orient {
        // R(a)·M·R(b)·M = R(a − b) and R(a)·R(b)·M = R(a + b)·M.
        let (reflect_x, turns) = if outer.reflect_x {
            (
                !self.reflect_x,
                (outer.quarter_turns + 4 - self.quarter_turns) % 4,
            )
        } else {
            (
                self.reflect_x,
                (outer.quarter_turns + self.quarter_turns) % 4,
            )
        };
        Orient::new(reflect_x, turns)
    }

    /// DEF orientation code (N, S, E, W, FN, FS, FE, FW).
    pub fn from_def(code: &str) -> Option<Orient> {
        Some(match code {
            "N" => Orient::new(false, 0),
            "W" => Orient::new(false, 1),
            "S" => Orient::new(false, 2),
            "E" => Orient::new(false, 3),
            "FS" => Orient::new(true, 0),
            "FW" => Orient::new(true, 1),
            "FN" => Orient::new(true, 2),
            "FE" => Orient::new(true, 3),
            _ => return None,
        })
    }

    pub fn def_code(self) -> &'static str {
        match (self.reflect_x, self.quarter_turns % 4) {
            (false, 0) => "N",
            (false, 1) => "W",
            (false, 2) => "S",
            (false, _) => "E",
            (true, 0) => "FS",
            (true, 1) => "FW",
            (true, 2) => "FN",
            (true, _) => "FE",
        }
    }
}

/// Rectilinear affine map: orientation, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Transform {
    pub orient: Orient,
    pub offset: Point,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        orient: Orient::IDENTITY,
        offset: Point::new(0, 0),
    };

    pub fn new(orient: Orient, offset: Point) -> Self {
        Transform { orient, offset }
    }

    pub fn apply(&self, p: Point) -> Point {
        let q = self.orient.apply(p);
        Point::new(q.x + self.offset.x, q.y + self.offset.y)
    }

    pub fn apply_rect(&self, r: &Rect) -> Rect {
        Rect::from_points(self.apply(r.lo), self.apply(r.hi))
    }

    /// The map `x ↦ outer(self(x))`.
    pub fn then(&self, outer: &Transform) -> Transform {
        Transform {
            orient: self.orient.then(outer.orient),
            offset: outer.apply(self.offset),
        }
    }

    /// Placement transform for a cell of size `(w, h)` whose oriented bounding
    /// box has its lower-left corner at `origin` (DEF placement semantics).
    pub fn placement(orient: Orient, w: Coord, h: Coord, origin: Point) -> Transform {
        let bb = Rect::from_points(
            orient.apply(Point::new(0, 0)),
            orient.apply(Point::new(w, h)),
        );
        Transform {
            orient,
            offset: Point::new(origin.x - bb.lo.x, origin.y - bb.lo.y),
        }
    }
}
