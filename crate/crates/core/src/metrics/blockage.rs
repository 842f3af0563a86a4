// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{manhattan_rect_distance, union_area, Area, Coord, Point, Rect};
use crate::layout::{LayoutDb, Owner};

pub type Fraction = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockageConfig {
    /// Perimeter sampling step, dbu.
    pub granularity: Coord,
    /// Probe offset from the net's edge; `None` uses each layer's pitch.
    pub extension: Option<Coord>,
}

impl Default for BlockageConfig {
    fn default() -> Self {
        BlockageConfig {
            granularity: 1,
            extension: None,
        }
    }
}

/// Evenly spaced unblocked attachment points along one axis:
/// `start + k·step` for `k < count`, stepping in +x or +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpenRun {
    pub layer: usize,
    pub start: Point,
    pub step: Coord,
    pub count: u64,
    pub horizontal: bool,
}

impl OpenRun {
    pub fn single(layer: usize, p: Point) -> Self {
        OpenRun {
            layer,
            start: p,
            step: 1,
            count: 1,
            horizontal: true,
        }
    }

    pub fn point(&self, k: u64) -> Point {
        let off = k as Coord * self.step;
        if self.horizontal {
            self.start.offset(off, 0)
        } else {
            self.start.offset(0, off)
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.count).map(|k| self.point(k))
    }

    pub fn last(&self) -> Point {
        self.point(self.count - 1)
    }

    /// Minimum Manhattan distance from `r` to any point of the run.
    pub fn distance_to(&self, r: &Rect) -> Coord {
        let (along_lo, along_hi, s0, fixed, cross_lo, cross_hi) = if self.horizontal {
            (r.lo.x, r.hi.x, self.start.x, self.start.y, r.lo.y, r.hi.y)
        } else {
            (r.lo.y, r.hi.y, self.start.y, self.start.x, r.lo.x, r.hi.x)
        };
        let cross = (cross_lo - fixed).max(0) + (fixed - cross_hi).max(0);
        let n = self.count as Coord;
        let clamp = |k: Coord| k.clamp(0, n - 1);
        let gap = |k: Coord| {
            let v = s0 + k * self.step;
            (along_lo - v).max(0) + (v - along_hi).max(0)
        };
        // The along-axis gap is convex in k; its minimum sits next to an end
        // of [along_lo, along_hi] or at an end of the run.
        let cands = [
            0,
            n - 1,
            clamp((along_lo - s0).div_euclid(self.step)),
            clamp((along_lo - s0).div_euclid(self.step) + 1),
            clamp((along_hi - s0).div_euclid(self.step)),
            clamp((along_hi - s0).div_euclid(self.step) + 1),
        ];
        cross + cands.into_iter().map(gap).min().expect("non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetBlockage {
    pub net: String,
    /// Index into `LayoutDb::nets`.
    pub net_id: usize,
    pub perimeter: Area,
    pub perimeter_blocked: Area,
    pub area: Area,
    pub area_blocked: Area,
    pub same_layer: Fraction,
    pub adjacent_layer: Fraction,
    pub overall: Fraction,
    pub open_points: Vec<OpenRun>,
}

impl NetBlockage {
    pub fn fully_blocked(&self) -> bool {
        self.overall == Fraction::from_integer(1)
    }

    pub fn open_point_count(&self) -> u64 {
        self.open_points.iter().map(|r| r.count).sum()
    }

    /// Minimum Manhattan distance from `r` to any open point.
    pub fn distance_to(&self, r: &Rect) -> Option<Coord> {
        self.open_points.iter().map(|p| p.distance_to(r)).min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignBlockage {
    pub perimeter: Area,
    pub perimeter_blocked: Area,
    pub area: Area,
    pub area_blocked: Area,
    pub same_layer: Fraction,
    pub adjacent_layer: Fraction,
    pub overall: Fraction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockageReport {
    pub per_net: Vec<NetBlockage>,
    pub design: DesignBlockage,
    pub warnings: Vec<String>,
}

/// `num / den`, or 1 when nothing was measured.
fn fraction(num: Area, den: Area) -> Fraction {
    if den == 0 {
        Fraction::from_integer(1)
    } else {
        Fraction::new(num, den)
    }
}

/// The weighted combination `(2·same + adjacent) / 3`.
pub fn combine(same: Fraction, adjacent: Fraction) -> Fraction {
    (same * 2 + adjacent) / 3
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Sample {
    Open,
    Blocked,
    /// Inside the net's own metal; neither counted nor a run boundary.
    Own,
}

/// One side of a probe ring: points `start + t·dir`, `t ∈ [0, len)`.
struct Face {
    start: Point,
    dir: (Coord, Coord),
    len: Coord,
}

impl Face {
    fn at(&self, t: Coord) -> Point {
        self.start.offset(self.dir.0 * t, self.dir.1 * t)
    }

    /// Parameter interval (closed) over which the face lies inside `r`.
    fn covered(&self, r: &Rect) -> Option<(Coord, Coord)> {
        let p = self.start;
        let (fixed_ok, lo, hi, origin, sign) = match self.dir {
            (1, 0) => (r.lo.y <= p.y && p.y <= r.hi.y, r.lo.x, r.hi.x, p.x, 1),
            (-1, 0) => (r.lo.y <= p.y && p.y <= r.hi.y, r.lo.x, r.hi.x, p.x, -1),
            (0, 1) => (r.lo.x <= p.x && p.x <= r.hi.x, r.lo.y, r.hi.y, p.y, 1),
            _ => (r.lo.x <= p.x && p.x <= r.hi.x, r.lo.y, r.hi.y, p.y, -1),
        };
        if !fixed_ok {
            return None;
        }
        let (a, b) = if sign > 0 {
            (lo - origin, hi - origin)
        } else {
            (origin - hi, origin - lo)
        };
        let (a, b) = (a.max(0), b.min(self.len - 1));
        (a <= b).then_some((a, b))
    }

    /// The face as a (degenerate) rectangle for index queries.
    fn extent(&self) -> Rect {
        Rect::from_points(self.start, self.at(self.len - 1))
    }
}

/// Counter-clockwise ring around `r`, each corner on exactly one face.
fn ring(r: &Rect) -> [Face; 4] {
    let (w, h) = (r.width(), r.height());
    [
        Face {
            start: r.lo,
            dir: (1, 0),
            len: w,
        },
        Face {
            start: Point::new(r.hi.x, r.lo.y),
            dir: (0, 1),
            len: h,
        },
        Face {
            start: r.hi,
            dir: (-1, 0),
            len: w,
        },
        Face {
            start: Point::new(r.lo.x, r.hi.y),
            dir: (0, -1),
            len: h,
        },
    ]
}

/// Marks samples `t = k·g` that fall in any of the closed intervals.
fn mark(states: &mut [Sample], g: Coord, mut iv: Vec<(Coord, Coord)>, s: Sample) {
    iv.sort_unstable();
    for (a, b) in iv {
        let k0 = (a + g - 1).div_euclid(g) as usize;
        let k1 = b.div_euclid(g) as usize;
        for st in states.iter_mut().take(k1 + 1).skip(k0) {
            if *st == Sample::Open {
                *st = s;
            }
        }
    }
}

struct SameLayer {
    perimeter: Area,
    blocked: Area,
    runs: Vec<OpenRun>,
}

fn same_layer(
    db: &LayoutDb,
    net_id: usize,
    layer: usize,
    own: &[Rect],
    cfg: &BlockageConfig,
) -> SameLayer {
    let g = cfg.granularity.max(1);
    let tl = &db.layers[layer];
    let d = cfg.extension.unwrap_or(tl.pitch).max(1);
    let min_run = (tl.min_width + tl.min_spacing) as Area;
    let me = Owner::Net(net_id as u32);
    let tree = &db.shapes[layer];
    let die = db.die_area;
    let mut out = SameLayer {
        perimeter: 0,
        blocked: 0,
        runs: Vec::new(),
    };
    for r in own {
        let faces = ring(&r.expand(d));
        // Per-sample state and weight around the whole ring.
        let mut states: Vec<Sample> = Vec::new();
        let mut weights: Vec<Coord> = Vec::new();
        let mut origin: Vec<(usize, Coord)> = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            if f.len == 0 {
                continue;
            }
            let n = ((f.len + g - 1) / g) as usize;
            let mut st = vec![Sample::Open; n];
            let q = f.extent();
            let own_iv: Vec<_> = own.iter().filter_map(|o| f.covered(o)).collect();
            mark(&mut st, g, own_iv, Sample::Own);
            let mut foreign: Vec<_> = tree
                .touching(&q)
                .filter(|(_, o)| *o != me)
                .filter_map(|(s, _)| f.covered(&s))
                .collect();
            // Outside the die nothing can be routed.
            let inside = f.covered(&die);
            match inside {
                None => foreign.push((0, f.len - 1)),
                Some((a, b)) => {
                    if a > 0 {
                        foreign.push((0, a - 1));
                    }
                    if b < f.len - 1 {
                        foreign.push((b + 1, f.len - 1));
                    }
                }
            }
            mark(&mut st, g, foreign, Sample::Blocked);
            for (k, s) in st.into_iter().enumerate() {
                let t = k as Coord * g;
                states.push(s);
                weights.push(g.min(f.len - t));
                origin.push((fi, t));
            }
        }
        reclassify_narrow_runs(&mut states, &weights, min_run);
        for (k, s) in states.iter().enumerate() {
            match s {
                Sample::Own => {}
                Sample::Blocked => {
                    out.perimeter += weights[k] as Area;
                    out.blocked += weights[k] as Area;
                }
                Sample::Open => out.perimeter += weights[k] as Area,
            }
        }
        // Open samples grouped into per-face arithmetic runs.
        let mut k = 0;
        while k < states.len() {
            if states[k] != Sample::Open {
                k += 1;
                continue;
            }
            let (fi, t0) = origin[k];
            let mut j = k;
            while j + 1 < states.len() && states[j + 1] == Sample::Open && origin[j + 1].0 == fi {
                j += 1;
            }
            let t1 = origin[j].1;
            let f = &faces[fi];
            let (a, b) = (f.at(t0), f.at(t1));
            let horizontal = f.dir.1 == 0;
            out.runs.push(OpenRun {
                layer,
                start: if a <= b { a } else { b },
                step: g,
                count: (j - k + 1) as u64,
                horizontal,
            });
            k = j + 1;
        }
    }
    out
}

/// Open runs hemmed in by blocked samples on both sides and shorter than
/// `min_run` cannot carry a wire; they become blocked. The ring is circular.
fn reclassify_narrow_runs(states: &mut [Sample], weights: &[Coord], min_run: Area) {
    let n = states.len();
    let Some(anchor) = states.iter().position(|s| *s != Sample::Open) else {
        return;
    };
    let mut i = 0;
    while i < n {
        let k = (anchor + i) % n;
        if states[k] != Sample::Open {
            i += 1;
            continue;
        }
        let before = states[(k + n - 1) % n];
        let mut len: Area = 0;
        let mut j = i;
        while j < n && states[(anchor + j) % n] == Sample::Open {
            len += weights[(anchor + j) % n] as Area;
            j += 1;
        }
        let after = states[(anchor + j) % n];
        if before == Sample::Blocked && after == Sample::Blocked && len < min_run {
            for m in i..j {
                states[(anchor + m) % n] = Sample::Blocked;
            }
        }
        i = j;
    }
}

struct Adjacent {
    area: Area,
    blocked: Area,
    points: Vec<OpenRun>,
}

/// Footprint of `own` (on its layer) against foreign metal on layer `adj`.
fn adjacent_layer(
    db: &LayoutDb,
    net_id: usize,
    layer: usize,
    adj: usize,
    own: &[Rect],
) -> Adjacent {
    let me = Owner::Net(net_id as u32);
    let area = union_area(own);
    let mut foreign: BTreeSet<Rect> = BTreeSet::new();
    for r in own {
        for (s, o) in db.shapes[adj].touching(r) {
            if o != me {
                if let Some(c) = s.overlap(r) {
                    foreign.insert(c);
                }
            }
        }
    }
    let (vw, vh) = db.via_between(layer, adj).unwrap_or((1, 1));

    let mut xs: Vec<Coord> = own
        .iter()
        .chain(&foreign)
        .flat_map(|r| [r.lo.x, r.hi.x])
        .collect();
    let mut ys: Vec<Coord> = own
        .iter()
        .chain(&foreign)
        .flat_map(|r| [r.lo.y, r.hi.y])
        .collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let (nx, ny) = (xs.len().saturating_sub(1), ys.len().saturating_sub(1));
    let cell = |x: usize, y: usize| y * nx + x;
    let span = |v: &[Coord], lo: Coord, hi: Coord| {
        v.partition_point(|&c| c < lo)..v.partition_point(|&c| c < hi)
    };
    let mut in_fp = vec![false; nx * ny];
    let mut taken = vec![false; nx * ny];
    for (rects, grid) in [
        (own.iter().collect::<Vec<_>>(), &mut in_fp),
        (foreign.iter().collect(), &mut taken),
    ] {
        for r in rects {
            for y in span(&ys, r.lo.y, r.hi.y) {
                for x in span(&xs, r.lo.x, r.hi.x) {
                    grid[cell(x, y)] = true;
                }
            }
        }
    }
    let free: Vec<bool> = in_fp.iter().zip(&taken).map(|(f, t)| *f && !*t).collect();

    // Prefix sums of non-free cells for O(1) placement checks.
    let mut pre = vec![0u32; (nx + 1) * (ny + 1)];
    for y in 0..ny {
        for x in 0..nx {
            pre[(y + 1) * (nx + 1) + x + 1] =
                pre[y * (nx + 1) + x + 1] + pre[(y + 1) * (nx + 1) + x] - pre[y * (nx + 1) + x]
                    + u32::from(!free[cell(x, y)]);
        }
    }
    let blocked_in = |x0: usize, x1: usize, y0: usize, y1: usize| {
        pre[y1 * (nx + 1) + x1] + pre[y0 * (nx + 1) + x0]
            - pre[y0 * (nx + 1) + x1]
            - pre[y1 * (nx + 1) + x0]
    };

    // Connected free patches.
    let mut comp = vec![usize::MAX; nx * ny];
    let mut comp_area: Vec<Area> = Vec::new();
    for start in 0..nx * ny {
        if !free[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = comp_area.len();
        let mut a: Area = 0;
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(k) = stack.pop() {
            let (x, y) = (k % nx, k / nx);
            a += (xs[x + 1] - xs[x]) as Area * (ys[y + 1] - ys[y]) as Area;
            let mut push = |n: usize| {
                if free[n] && comp[n] == usize::MAX {
                    comp[n] = id;
                    stack.push(n);
                }
            };
            if x > 0 {
                push(k - 1);
            }
            if x + 1 < nx {
                push(k + 1);
            }
            if y > 0 {
                push(k - nx);
            }
            if y + 1 < ny {
                push(k + nx);
            }
        }
        comp_area.push(a);
    }

    // A via fits with its lower-left corner on a grid line if it fits at all
    // (slide it down and left until it touches an edge).
    let mut anchor: Vec<Option<Point>> = vec![None; comp_area.len()];
    let dims = if vw == vh {
        vec![(vw, vh)]
    } else {
        vec![(vw, vh), (vh, vw)]
    };
    for y in 0..ny {
        for x in 0..nx {
            let k = cell(x, y);
            if !free[k] || anchor[comp[k]].is_some() {
                continue;
            }
            for &(w, h) in &dims {
                let (x_end, y_end) = (xs[x] + w, ys[y] + h);
                if x_end > *xs.last().unwrap() || y_end > *ys.last().unwrap() {
                    continue;
                }
                let x1 = xs.partition_point(|&c| c < x_end);
                let y1 = ys.partition_point(|&c| c < y_end);
                if blocked_in(x, x1, y, y1) == 0 {
                    anchor[comp[k]] = Some(Point::new(xs[x] + w / 2, ys[y] + h / 2));
                    break;
                }
            }
        }
    }
    let open_area: Area = comp_area
        .iter()
        .zip(&anchor)
        .filter(|(_, a)| a.is_some())
        .map(|(a, _)| *a)
        .sum();
    Adjacent {
        area,
        blocked: area - open_area,
        points: anchor
            .into_iter()
            .flatten()
            .map(|p| OpenRun::single(adj, p))
            .collect(),
    }
}

fn net_blockage_one(db: &LayoutDb, net_id: usize, cfg: &BlockageConfig) -> Option<NetBlockage> {
    let net = &db.nets[net_id];
    let mut by_layer: Vec<Vec<Rect>> = vec![Vec::new(); db.layers.len()];
    for (l, r) in &net.shapes {
        if db.layers[*l].is_conducting() && !r.is_degenerate() {
            by_layer[*l].push(*r);
        }
    }
    let mut nb = NetBlockage {
        net: net.name.clone(),
        net_id,
        perimeter: 0,
        perimeter_blocked: 0,
        area: 0,
        area_blocked: 0,
        same_layer: Fraction::from_integer(0),
        adjacent_layer: Fraction::from_integer(0),
        overall: Fraction::from_integer(0),
        open_points: Vec::new(),
    };
    let mut any = false;
    for (l, own) in by_layer.iter_mut().enumerate() {
        if own.is_empty() {
            continue;
        }
        any = true;
        own.sort_unstable();
        own.dedup();
        let s = same_layer(db, net_id, l, own, cfg);
        nb.perimeter += s.perimeter;
        nb.perimeter_blocked += s.blocked;
        nb.open_points.extend(s.runs);
        for a in db.adjacent_layers(l) {
            let adj = adjacent_layer(db, net_id, l, a, own);
            nb.area += adj.area;
            nb.area_blocked += adj.blocked;
            nb.open_points.extend(adj.points);
        }
    }
    if !any {
        return None;
    }
    nb.same_layer = fraction(nb.perimeter_blocked, nb.perimeter);
    nb.adjacent_layer = fraction(nb.area_blocked, nb.area);
    nb.overall = combine(nb.same_layer, nb.adjacent_layer);
    Some(nb)
}

/// Same-layer, adjacent-layer and overall blockage of every critical net,
/// plus design-wide ratio-of-sums values.
pub fn net_blockage(db: &LayoutDb, cfg: &BlockageConfig) -> BlockageReport {
    let results: Vec<Option<NetBlockage>> = db
        .critical_nets
        .par_iter()
        .map(|&id| net_blockage_one(db, id, cfg))
        .collect();
    let mut warnings = Vec::new();
    let mut per_net = Vec::new();
    for (r, &id) in results.into_iter().zip(&db.critical_nets) {
        match r {
            Some(nb) => per_net.push(nb),
            None => warnings.push(format!(
                "critical net {} has no routed geometry and is excluded from blockage",
                db.nets[id].name
            )),
        }
    }
    if db.critical_nets.is_empty() {
        warnings.push("no critical nets to measure".to_string());
    }
    let sum = |f: fn(&NetBlockage) -> Area| per_net.iter().map(f).sum::<Area>();
    let (p, pb, a, ab) = (
        sum(|n| n.perimeter),
        sum(|n| n.perimeter_blocked),
        sum(|n| n.area),
        sum(|n| n.area_blocked),
    );
    let same = fraction(pb, p);
    let adjacent = fraction(ab, a);
    BlockageReport {
        design: DesignBlockage {
            perimeter: p,
            perimeter_blocked: pb,
            area: a,
            area_blocked: ab,
            same_layer: same,
            adjacent_layer: adjacent,
            overall: combine(same, adjacent),
        },
        per_net,
        warnings,
    }
}

/// Distance from `r` to the nearest open point, by direct enumeration.
/// Reference implementation for tests.
pub fn brute_distance(nb: &NetBlockage, r: &Rect) -> Option<Coord> {
    nb.open_points
        .iter()
        .flat_map(|run| run.points())
        .map(|p| manhattan_rect_distance(&Rect::point(p), r))
        .min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ring_faces_cover_the_perimeter_once() {
        let r = Rect::new(0, 0, 5, 3);
        let faces = ring(&r);
        let mut pts = BTreeSet::new();
        for f in &faces {
            for t in 0..f.len {
                assert!(pts.insert(f.at(t)));
            }
        }
        assert_eq!(pts.len() as Coord, 2 * (5 + 3));
    }

    #[test]
    fn narrow_runs() {
        use Sample::*;
        let mut s = vec![
            Blocked, Open, Open, Blocked, Open, Open, Open, Open, Own, Open,
        ];
        let w = vec![1; s.len()];
        reclassify_narrow_runs(&mut s, &w, 3);
        assert_eq!(s[1..3], [Blocked, Blocked]);
        assert_eq!(s[4..8], [Open; 4]);
        // Wraparound run [9, 0) is bounded by Own on one side: untouched.
        assert_eq!(s[9], Open);
        let mut all = vec![Open; 4];
        reclassify_narrow_runs(&mut all, &[1; 4], 10);
        assert_eq!(all, [Open; 4]);
    }

    #[test]
    fn combine_is_exact() {
        let f = combine(Fraction::new(1, 3), Fraction::new(1, 7));
        assert_eq!(f, Fraction::new(2 * 7 + 3, 63));
    }

    proptest! {
        #[test]
        fn run_distance_matches_enumeration(
            sx in -50i64..50, sy in -50i64..50, step in 1i64..7, count in 1u64..30, horizontal: bool,
            x0 in -60i64..60, y0 in -60i64..60, w in 0i64..30, h in 0i64..30,
        ) {
            let run = OpenRun { layer: 0, start: Point::new(sx, sy), step, count, horizontal };
            let r = Rect::new(x0, y0, x0 + w, y0 + h);
            let brute = run.points().map(|p| manhattan_rect_distance(&Rect::point(p), &r)).min().unwrap();
            prop_assert_eq!(run.distance_to(&r), brute);
        }
    }
}
