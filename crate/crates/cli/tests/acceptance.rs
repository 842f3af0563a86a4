// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Each criterion runs against an oracle written here,
//! independent of the library code it checks, and prints one PASS or FAIL
//! line. The process exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use icsurf::fixtures::{
    generate, planted_wire, random_dag, Fixture, FixtureSpec, PlantedNet, Recipe, PITCH,
};
use icsurf::gdsii::{
    flatten, read_gds, write_gds, GdsAref, GdsBoundary, GdsCell, GdsElementKind, GdsLibrary,
    GdsPlacement, GdsSref,
};
use icsurf::geom::{
    clip_intersection_area, manhattan_rect_distance, point_in_polygon, Point, Polygon, Rect,
};
use icsurf::layout::{build_layout, BuildOptions, LayoutDb, PlacementGrid};
use icsurf::lefdef::{parse_def, parse_lef};
use icsurf::metrics::{
    net_blockage, net_length_stats, route_distance, trigger_spaces, BlockageConfig, BlockageReport,
    HeatmapBins,
};
use icsurf::netlist::{parse_netlist, trace_fanin, TraceConfig};
use icsurf_cli::{analyze, cmd_analyze, cmd_generate, RunConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Shared helpers

fn build(f: &Fixture) -> LayoutDb {
    let lef = parse_lef(&f.lef).unwrap();
    let def = parse_def(&f.def, &lef).unwrap();
    let cs = trace_fanin(&parse_netlist(&f.netlist).unwrap(), &TraceConfig::default());
    build_layout(&lef, &def.def, &cs, &BuildOptions::default()).unwrap()
}

fn write_fixture(spec: &FixtureSpec, dir: &Path) -> RunConfig {
    cmd_generate(spec, dir).unwrap();
    let mut cfg = RunConfig::new(
        dir.join("tech.lef"),
        dir.join("design.def"),
        dir.join("design.v"),
        dir.join("out"),
    );
    cfg.gds = Some(dir.join("design.gds"));
    cfg.layermap = Some(dir.join("layers.map"));
    cfg.attacks = Some(dir.join("attacks.txt"));
    cfg
}

fn recipe_net(name: &str, col: usize, row: usize, rows: usize, recipe: Recipe) -> PlantedNet {
    PlantedNet {
        name: name.into(),
        col,
        row,
        rows,
        recipe,
        feeds: None,
    }
}

// ---------------------------------------------------------------------------
// 1. Trigger spaces against a union-find labelling

fn union_find_regions(cols: usize, rows: usize, open: &[bool]) -> Vec<usize> {
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..open.len()).collect();
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            if !open[k] {
                continue;
            }
            for n in [
                (c + 1 < cols).then(|| k + 1),
                (r + 1 < rows).then(|| k + cols),
            ]
            .into_iter()
            .flatten()
            {
                if open[n] {
                    let (a, b) = (find(&mut parent, k), find(&mut parent, n));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..open.len()).map(|k| find(&mut parent, k)).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7151);
    let start = Instant::now();
    let mut regions_seen = 0usize;
    for map in 0..1000 {
        let density: f64 = rng.gen_range(0.2..0.8);
        let open: Vec<bool> = (0..64 * 64).map(|_| rng.gen_bool(density)).collect();
        let got = trigger_spaces(&PlacementGrid::from_open_bitmap(64, 64, &open));
        let roots = union_find_regions(64, 64, &open);
        let mut oracle: BTreeMap<usize, usize> = BTreeMap::new();
        for (k, &o) in open.iter().enumerate() {
            if o {
                *oracle.entry(roots[k]).or_default() += 1;
            }
        }
        ensure!(
            got.regions.len() == oracle.len(),
            "bitmap {map}: {} regions, oracle {}",
            got.regions.len(),
            oracle.len()
        );
        for reg in &got.regions {
            let root = roots[reg.sites[0].1 as usize * 64 + reg.sites[0].0 as usize];
            ensure!(
                reg.sites
                    .iter()
                    .all(|&(c, r)| roots[r as usize * 64 + c as usize] == root),
                "bitmap {map}: region {} mixes oracle components",
                reg.id
            );
            ensure!(
                reg.size == oracle[&root],
                "bitmap {map}: region {} size differs",
                reg.id
            );
        }
        let mut hist = BTreeMap::new();
        for s in oracle.values() {
            *hist.entry(*s).or_insert(0usize) += 1;
        }
        ensure!(got.histogram == hist, "bitmap {map}: histogram differs");
        regions_seen += oracle.len();
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("1000 bitmaps, {regions_seen} regions, {t:.2?}"))
}

// ---------------------------------------------------------------------------
// 2. Overall fraction identity and ratio-of-sums aggregation

fn ring_perimeter(n: &PlantedNet) -> i128 {
    let b = planted_wire(n).expand(PITCH);
    2 * (b.width() as i128 + b.height() as i128)
}

fn criterion_2() -> Outcome {
    let mut checked = 0;
    let mut fixtures: Vec<Fixture> = (0..3)
        .map(|s| generate(&FixtureSpec::demo(s)).unwrap())
        .collect();
    fixtures.push(generate(&FixtureSpec::reference(4)).unwrap());
    for f in &fixtures {
        let rep = net_blockage(&build(f), &BlockageConfig::default());
        for n in &rep.per_net {
            let want =
                (Ratio::from_integer(2) * n.same_layer + n.adjacent_layer) / Ratio::from_integer(3);
            ensure!(
                n.overall == want,
                "{}: overall {} != {}",
                n.net,
                n.overall,
                want
            );
            checked += 1;
        }
        let d = &rep.design;
        ensure!(
            d.overall
                == (Ratio::from_integer(2) * d.same_layer + d.adjacent_layer)
                    / Ratio::from_integer(3),
            "design overall"
        );
    }

    // Two nets with very different perimeters: one ringed, one free.
    let short = recipe_net("sec_short", 8, 3, 1, Recipe::Ring);
    let long = recipe_net("sec_long", 26, 3, 8, Recipe::None);
    let spec = FixtureSpec {
        seed: 2,
        cols: 40,
        rows: 16,
        density: 0.5,
        regions: vec![],
        nets: vec![short.clone(), long.clone()],
        random_nets: 20,
        fill_fraction: 0.0,
    };
    let rep = net_blockage(
        &build(&generate(&spec).unwrap()),
        &BlockageConfig::default(),
    );
    let (ps, pl) = (ring_perimeter(&short), ring_perimeter(&long));
    let want = Ratio::new(ps, ps + pl);
    let mean_of_ratios = Ratio::new(1, 2);
    ensure!(
        rep.design.same_layer == want,
        "design same-layer {} != {}",
        rep.design.same_layer,
        want
    );
    ensure!(
        rep.design.same_layer != mean_of_ratios,
        "ratio-of-sums equals mean-of-ratios"
    );
    let num: i128 = rep.per_net.iter().map(|n| n.perimeter_blocked).sum();
    let den: i128 = rep.per_net.iter().map(|n| n.perimeter).sum();
    ensure!(Ratio::new(num, den) == want, "per-net sums disagree");
    Ok(format!(
        "{checked} nets exact; two-net design same-layer {want} vs mean {mean_of_ratios}"
    ))
}

// ---------------------------------------------------------------------------
// 3. Blockage extremes

fn criterion_3() -> Outcome {
    let mut seen = BTreeSet::new();
    let mut fixtures: Vec<Fixture> = (0..2)
        .map(|s| generate(&FixtureSpec::demo(s)).unwrap())
        .collect();
    fixtures.push(generate(&FixtureSpec::reference(9)).unwrap());
    for f in &fixtures {
        let rep = net_blockage(&build(f), &BlockageConfig::default());
        for e in &f.expected.nets {
            let n = rep
                .per_net
                .iter()
                .find(|n| n.net == e.name)
                .ok_or(format!("{} missing", e.name))?;
            let (s, a, o) = e.recipe.expected();
            ensure!(
                (n.same_layer, n.adjacent_layer, n.overall) == (s, a, o),
                "{} ({:?}): got {}/{}/{}, want {s}/{a}/{o}",
                e.name,
                e.recipe,
                n.same_layer,
                n.adjacent_layer,
                n.overall
            );
            seen.insert(format!("{:?}", e.recipe));
        }
    }
    ensure!(seen.len() == 4, "recipes covered: {seen:?}");
    ensure!(
        Recipe::Ring.expected()
            == (
                Ratio::from_integer(1),
                Ratio::from_integer(0),
                Ratio::new(2, 3)
            ),
        "ring answer"
    );
    Ok(format!(
        "recipes {} exact (none 0, full 1, ring 1/0/2/3)",
        seen.into_iter().collect::<Vec<_>>().join(", ")
    ))
}

// ---------------------------------------------------------------------------
// 4. Geometry against cell rasters and brute-force distance

/// An x-monotone rectilinear polygon over unit cells: column `x0 + i` covers
/// rows `[lo[i], hi[i])`, consecutive columns overlap.
struct Staircase {
    x0: i64,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl Staircase {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let w = rng.gen_range(1..24);
        let x0 = rng.gen_range(0..64 - w);
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        let mut l: i64 = rng.gen_range(0..50);
        let mut h = l + rng.gen_range(1..14);
        for _ in 0..w {
            lo.push(l);
            hi.push(h);
            let nl = rng.gen_range((l - 6).max(0)..h);
            let nh = rng.gen_range((nl.max(l) + 1)..=(h + 6).min(64));
            l = nl;
            h = nh;
        }
        Staircase { x0, lo, hi }
    }

    fn contains_cell(&self, x: i64, y: i64) -> bool {
        let i = x - self.x0;
        i >= 0
            && (i as usize) < self.lo.len()
            && self.lo[i as usize] <= y
            && y < self.hi[i as usize]
    }

    /// Outline in doubled coordinates, counter-clockwise.
    fn polygon(&self) -> Polygon {
        let n = self.lo.len();
        let mut v = Vec::new();
        for i in 0..n {
            let x = self.x0 + i as i64;
            v.push(Point::new(2 * x, 2 * self.lo[i]));
            v.push(Point::new(2 * (x + 1), 2 * self.lo[i]));
        }
        for i in (0..n).rev() {
            let x = self.x0 + i as i64;
            v.push(Point::new(2 * (x + 1), 2 * self.hi[i]));
            v.push(Point::new(2 * x, 2 * self.hi[i]));
        }
        v.dedup();
        // Drop collinear middles.
        let mut changed = true;
        while changed {
            changed = false;
            let k = v.len();
            for i in 0..k {
                let (a, b, c) = (v[(i + k - 1) % k], v[i], v[(i + 1) % k]);
                if (a.x == b.x && b.x == c.x) || (a.y == b.y && b.y == c.y) {
                    v.remove(i);
                    changed = true;
                    break;
                }
            }
        }
        Polygon::rectilinear(v).expect("staircase outline is simple")
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e0);
    let mut worst = 0.0f64;
    for pair in 0..100 {
        let (a, b) = (Staircase::random(&mut rng), Staircase::random(&mut rng));
        let (pa, pb) = (a.polygon(), b.polygon());
        let mut both = 0i128;
        for x in 0..64 {
            for y in 0..64 {
                let c = Point::new(2 * x + 1, 2 * y + 1);
                let (ia, ib) = (a.contains_cell(x, y), b.contains_cell(x, y));
                ensure!(
                    point_in_polygon(c, &pa) == ia,
                    "pair {pair}: containment of cell ({x},{y}) in a"
                );
                ensure!(
                    point_in_polygon(c, &pb) == ib,
                    "pair {pair}: containment of cell ({x},{y}) in b"
                );
                both += i128::from(ia && ib);
            }
        }
        let oracle = 4 * both;
        let got = clip_intersection_area(&pa, &pb).map_err(|e| e.to_string())?;
        let err = if oracle == 0 {
            if got == 0 {
                0.0
            } else {
                1.0
            }
        } else {
            (got - oracle).abs() as f64 / oracle as f64
        };
        worst = worst.max(err);
        ensure!(err <= 0.005, "pair {pair}: area {got} vs {oracle}");
        ensure!(
            clip_intersection_area(&pb, &pa).unwrap() == got,
            "pair {pair}: not symmetric"
        );
    }
    for pair in 0..200 {
        let mut r = || {
            let (x, y) = (rng.gen_range(0..40), rng.gen_range(0..40));
            Rect::new(x, y, x + rng.gen_range(0..8), y + rng.gen_range(0..8))
        };
        let (a, b) = (r(), r());
        let mut best = i64::MAX;
        for ax in a.lo.x..=a.hi.x {
            for ay in a.lo.y..=a.hi.y {
                for bx in b.lo.x..=b.hi.x {
                    for by in b.lo.y..=b.hi.y {
                        best = best.min((ax - bx).abs() + (ay - by).abs());
                    }
                }
            }
        }
        ensure!(
            manhattan_rect_distance(&a, &b) == best,
            "rect pair {pair}: {:?} {:?}",
            a,
            b
        );
    }
    Ok(format!("100 polygon pairs (worst area error {:.3}%, 409600 containment checks), 200 rect pairs exact", worst * 100.0))
}

// ---------------------------------------------------------------------------
// 5. Route distance against exhaustive site × point enumeration

fn criterion_5() -> Outcome {
    let recipes = [Recipe::None, Recipe::CoverAbove, Recipe::Ring];
    let mut entries = 0;
    let mut max_pairs = 0usize;
    for seed in 0..12u64 {
        let spec = FixtureSpec {
            seed,
            cols: 20,
            rows: 8,
            density: 0.75,
            regions: vec![icsurf::fixtures::PlantedRegion {
                size: 6,
                anchor: (1, 5),
                width: 3,
            }],
            nets: vec![recipe_net("sec_t", 10, 2, 1, recipes[seed as usize % 3])],
            random_nets: 15,
            fill_fraction: 0.0,
        };
        let db = build(&generate(&spec).unwrap());
        let spaces = trigger_spaces(&db.grid);
        let cfg = BlockageConfig {
            granularity: 200,
            extension: None,
        };
        let rep: BlockageReport = net_blockage(&db, &cfg);
        let stats = net_length_stats(&db, false).unwrap();
        let m = route_distance(
            &db.grid,
            &spaces,
            &rep,
            &stats,
            &HeatmapBins::default_for(spaces.largest()),
        );
        for nb in rep.per_net.iter().filter(|n| !n.fully_blocked()) {
            let points: Vec<Point> = nb
                .open_points
                .iter()
                .flat_map(|r| r.points().collect::<Vec<_>>())
                .collect();
            let pairs = spaces.open_sites() * points.len();
            max_pairs = max_pairs.max(pairs);
            ensure!(pairs <= 10_000, "fixture {seed}: {pairs} site-point pairs");
            for reg in &spaces.regions {
                let mut best = i64::MAX;
                for &(c, r) in &reg.sites {
                    let s = db.grid.site_rect(c as usize, r as usize);
                    for p in &points {
                        let dx = (s.lo.x - p.x).max(p.x - s.hi.x).max(0);
                        let dy = (s.lo.y - p.y).max(p.y - s.hi.y).max(0);
                        best = best.min(dx + dy);
                    }
                }
                let e = m
                    .entry(&nb.net, reg.id)
                    .ok_or(format!("fixture {seed}: entry missing"))?;
                ensure!(
                    e.manhattan == best,
                    "fixture {seed}: {} region {}: {} vs {best}",
                    nb.net,
                    reg.id,
                    e.manhattan
                );
                entries += 1;
            }
        }
    }
    Ok(format!(
        "{entries} matrix entries exact (largest fixture {max_pairs} site-point pairs)"
    ))
}

// ---------------------------------------------------------------------------
// 6. Viable counts: cross product and monotonicity under filling

fn criterion_6() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut history: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let fractions = [0.0, 0.25, 0.5, 0.75, 1.0];
    for (i, &f) in fractions.iter().enumerate() {
        let mut spec = FixtureSpec::reference(21);
        spec.fill_fraction = f;
        let dir = tmp.path().join(format!("f{i}"));
        let cfg = write_fixture(&spec, &dir);
        let expected: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("expected.json")).unwrap())
                .unwrap();
        let rep = analyze(&cfg).map_err(|e| e.to_string())?;
        let unblocked = rep
            .blockage
            .nets
            .iter()
            .filter(|n| n.overall.exact != "1")
            .count();
        for v in &rep.attacks {
            if !v.timing_critical {
                let big: usize = rep
                    .trigger_spaces
                    .histogram
                    .iter()
                    .filter(|h| h.size as u64 >= v.placement_sites)
                    .map(|h| h.count)
                    .sum();
                ensure!(
                    v.count == big * unblocked,
                    "{} at {f}: {} != {big} x {unblocked}",
                    v.attack,
                    v.count
                );
            }
            ensure!(
                expected["viable"][&v.attack].as_u64() == Some(v.count as u64),
                "{} at {f}: generator expects {}",
                v.attack,
                expected["viable"][&v.attack]
            );
            history.entry(v.attack.clone()).or_default().push(v.count);
        }
    }
    for (a, counts) in &history {
        ensure!(counts.len() == fractions.len(), "{a}: missing runs");
        ensure!(
            counts.windows(2).all(|w| w[1] <= w[0]),
            "{a}: counts {counts:?} increase"
        );
    }
    let summary: Vec<String> = history.iter().map(|(a, c)| format!("{a} {c:?}")).collect();
    Ok(summary.join("; "))
}

// ---------------------------------------------------------------------------
// 7. Fan-in against exhaustive path enumeration

fn path_oracle(d: &icsurf::fixtures::RandomDag, prefix: &str, n: u32) -> BTreeMap<String, u32> {
    let alias: BTreeMap<&str, &str> = d
        .aliases
        .iter()
        .map(|(l, r)| (l.as_str(), r.as_str()))
        .collect();
    let driver: BTreeMap<&str, &icsurf::fixtures::DagGate> =
        d.gates.iter().map(|g| (g.output.as_str(), g)).collect();
    let mut nets: BTreeSet<&str> = d.primary_inputs.iter().map(String::as_str).collect();
    for g in &d.gates {
        nets.insert(&g.output);
        nets.extend(g.inputs.iter().map(|(_, n)| n.as_str()));
    }
    nets.extend(alias.keys());
    let mut best: BTreeMap<String, u32> = BTreeMap::new();
    fn walk<'a>(
        net: &'a str,
        cost: u32,
        limit: u32,
        alias: &BTreeMap<&'a str, &'a str>,
        driver: &BTreeMap<&'a str, &'a icsurf::fixtures::DagGate>,
        best: &mut BTreeMap<String, u32>,
    ) {
        let e = best.entry(net.to_string()).or_insert(u32::MAX);
        *e = (*e).min(cost);
        if let Some(r) = alias.get(net) {
            walk(r, cost, limit, alias, driver, best);
        }
        if let Some(g) = driver.get(net) {
            if cost < limit {
                for (_, i) in &g.inputs {
                    walk(i, cost + 1, limit, alias, driver, best);
                }
            }
        }
    }
    for root in nets.iter().filter(|s| s.starts_with(prefix)) {
        walk(root, 0, n, &alias, &driver, &mut best);
    }
    best
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfa1);
    let mut members = 0;
    for k in 0..50 {
        let gates = rng.gen_range(20..=100);
        let d = random_dag(rng.gen(), gates);
        let g = parse_netlist(&d.text).map_err(|e| format!("dag {k}: {e}"))?;
        let mut prev: Option<BTreeMap<String, u32>> = None;
        for n in 0..=4 {
            let cs = trace_fanin(
                &g,
                &TraceConfig {
                    root_prefix: "sec_".into(),
                    depth: n,
                },
            );
            let oracle = path_oracle(&d, "sec_", n);
            ensure!(
                cs.members == oracle,
                "dag {k} ({gates} gates) N={n}: trace and oracle differ: got {:?} oracle {:?}\n{}",
                cs.members
                    .iter()
                    .filter(|(m, v)| oracle.get(*m) != Some(v))
                    .collect::<Vec<_>>(),
                oracle
                    .iter()
                    .filter(|(m, v)| cs.members.get(*m) != Some(v))
                    .collect::<Vec<_>>(),
                d.text
            );
            if let Some(p) = &prev {
                ensure!(
                    p.iter()
                        .all(|(m, dp)| cs.members.get(m).is_some_and(|d| d <= dp)),
                    "dag {k}: N={n} drops or deepens members"
                );
            }
            members += cs.members.len();
            prev = Some(cs.members);
        }
    }
    Ok(format!(
        "50 DAGs x N in 0..=4, {members} member depths match"
    ))
}

// ---------------------------------------------------------------------------
// 8. GDSII round trip and flattening against a matrix-based oracle

type Canon = Vec<(i16, i16, Vec<(i64, i64)>)>;

/// Affine map `p -> m·p + t` with an integer 2×2 matrix.
#[derive(Clone, Copy)]
struct Affine {
    m: [[i64; 2]; 2],
    t: (i64, i64),
}

impl Affine {
    const ID: Affine = Affine {
        m: [[1, 0], [0, 1]],
        t: (0, 0),
    };

    fn apply(&self, p: Point) -> (i64, i64) {
        (
            self.m[0][0] * p.x + self.m[0][1] * p.y + self.t.0,
            self.m[1][0] * p.x + self.m[1][1] * p.y + self.t.1,
        )
    }

    fn local(placement: &GdsPlacement, origin: (i64, i64)) -> Affine {
        let reflect = placement.strans.as_ref().is_some_and(|s| s.reflect_x);
        let quarter = placement.angle.map_or(0.0, |a| a.to_f64()) / 90.0;
        let (c, s) = match (quarter.round() as i64).rem_euclid(4) {
            0 => (1, 0),
            1 => (0, 1),
            2 => (-1, 0),
            _ => (0, -1),
        };
        let f = if reflect { -1 } else { 1 };
        // rotate · diag(1, f)
        Affine {
            m: [[c, -s * f], [s, c * f]],
            t: origin,
        }
    }

    fn then(&self, outer: &Affine) -> Affine {
        let a = outer.m;
        let b = self.m;
        let m = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        let t = outer.apply(Point::new(self.t.0, self.t.1));
        Affine { m, t }
    }
}

fn oracle_flatten(lib: &GdsLibrary, cell: &str, xf: Affine, out: &mut Canon) {
    let c = lib.cell(cell).expect("referenced cell exists");
    for e in &c.elements {
        match &e.kind {
            GdsElementKind::Boundary(b) => {
                let mut v: Vec<(i64, i64)> = b.xy[..b.xy.len() - 1]
                    .iter()
                    .map(|&p| xf.apply(p))
                    .collect();
                v.sort();
                out.push((b.layer, b.datatype, v));
            }
            GdsElementKind::Sref(s) => {
                let local = Affine::local(&s.placement, (s.origin.x, s.origin.y));
                oracle_flatten(lib, &s.name, local.then(&xf), out);
            }
            GdsElementKind::Aref(a) => {
                let [o, cpt, rpt] = a.xy;
                for i in 0..a.cols as i64 {
                    for j in 0..a.rows as i64 {
                        let ox = o.x
                            + i * (cpt.x - o.x) / a.cols as i64
                            + j * (rpt.x - o.x) / a.rows as i64;
                        let oy = o.y
                            + i * (cpt.y - o.y) / a.cols as i64
                            + j * (rpt.y - o.y) / a.rows as i64;
                        let local = Affine::local(&a.placement, (ox, oy));
                        oracle_flatten(lib, &a.name, local.then(&xf), out);
                    }
                }
            }
            _ => {}
        }
    }
}

fn canon_flat(lib: &GdsLibrary, top: &str) -> Result<Canon, String> {
    let flat = flatten(lib, top).map_err(|e| e.to_string())?;
    let mut out = Canon::new();
    for (&(l, d), polys) in &flat.layers {
        for p in polys {
            let mut v: Vec<(i64, i64)> = p.vertices().iter().map(|q| (q.x, q.y)).collect();
            v.sort();
            out.push((l, d, v));
        }
    }
    out.sort();
    Ok(out)
}

/// A three-level library with random orientations, SREFs and AREFs.
fn random_library(rng: &mut ChaCha8Rng) -> GdsLibrary {
    let mut lib = GdsLibrary::new("hier", 1000);
    let mut leaf = GdsCell::new("LEAF");
    let l_shape = Polygon::rectilinear(vec![
        Point::new(0, 0),
        Point::new(30, 0),
        Point::new(30, 10),
        Point::new(10, 10),
        Point::new(10, 25),
        Point::new(0, 25),
    ])
    .unwrap();
    leaf.push(GdsElementKind::Boundary(GdsBoundary::from_polygon(
        1, 0, &l_shape,
    )));
    leaf.push(GdsElementKind::Boundary(GdsBoundary::from_polygon(
        2,
        0,
        &Rect::new(5, 30, 17, 41).to_polygon(),
    )));
    lib.cells.push(leaf);
    let place = |rng: &mut ChaCha8Rng| {
        GdsPlacement::rotated(rng.gen_bool(0.5), 90 * rng.gen_range(0..4u16))
    };
    let mut mid = GdsCell::new("MID");
    mid.push(GdsElementKind::Boundary(GdsBoundary::from_polygon(
        3,
        1,
        &Rect::new(-50, -50, 0, 0).to_polygon(),
    )));
    for _ in 0..3 {
        let p = place(rng);
        mid.push(GdsElementKind::Sref(GdsSref {
            name: "LEAF".into(),
            placement: p,
            origin: Point::new(rng.gen_range(-200..200), rng.gen_range(-200..200)),
        }));
    }
    let (cols, rows) = (rng.gen_range(1..4i16), rng.gen_range(1..4i16));
    let o = Point::new(rng.gen_range(-100..100), rng.gen_range(-100..100));
    mid.push(GdsElementKind::Aref(GdsAref {
        name: "LEAF".into(),
        placement: place(rng),
        cols,
        rows,
        xy: [
            o,
            Point::new(o.x + 60 * cols as i64, o.y),
            Point::new(o.x, o.y + 70 * rows as i64),
        ],
    }));
    lib.cells.push(mid);
    let mut top = GdsCell::new("TOP");
    for _ in 0..2 {
        let p = place(rng);
        top.push(GdsElementKind::Sref(GdsSref {
            name: "MID".into(),
            placement: p,
            origin: Point::new(rng.gen_range(-1000..1000), rng.gen_range(-1000..1000)),
        }));
    }
    top.push(GdsElementKind::Aref(GdsAref {
        name: "MID".into(),
        placement: place(rng),
        cols: 2,
        rows: 2,
        xy: [Point::new(0, 0), Point::new(0, 1200), Point::new(-1400, 0)],
    }));
    lib.cells.push(top);
    lib
}

fn criterion_8() -> Outcome {
    let mut streams: Vec<(String, Vec<u8>)> = Vec::new();
    for s in 0..3 {
        streams.push((
            format!("demo {s}"),
            generate(&FixtureSpec::demo(s)).unwrap().gds,
        ));
    }
    streams.push((
        "reference".into(),
        generate(&FixtureSpec::reference(2)).unwrap().gds,
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d5);
    for k in 0..20 {
        streams.push((
            format!("hierarchy {k}"),
            write_gds(&random_library(&mut rng)).unwrap(),
        ));
    }
    let mut polygons = 0;
    for (name, bytes) in &streams {
        let lib = read_gds(bytes).map_err(|e| format!("{name}: {e}"))?;
        let again = write_gds(&lib).map_err(|e| format!("{name}: {e}"))?;
        ensure!(&again == bytes, "{name}: write(read(x)) differs from x");
        let top = lib
            .top_cell()
            .ok_or(format!("{name}: no top cell"))?
            .to_string();
        let got = canon_flat(&lib, &top)?;
        let mut want = Canon::new();
        oracle_flatten(&lib, &top, Affine::ID, &mut want);
        want.sort();
        ensure!(
            got == want,
            "{name}: flatten differs from oracle ({} vs {} polygons)",
            got.len(),
            want.len()
        );
        polygons += got.len();
    }
    Ok(format!(
        "{} streams byte-identical, {polygons} flattened polygons match",
        streams.len()
    ))
}

// ---------------------------------------------------------------------------
// 9. Determinism across runs and thread counts

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let base = write_fixture(&FixtureSpec::demo(17), &tmp.path().join("fx"));
    let mut outputs: Vec<(String, Vec<Vec<u8>>)> = Vec::new();
    let runs: Vec<(String, usize)> = (0..5)
        .map(|i| (format!("run {i}, 1 thread"), 1))
        .chain([4, 8].map(|t| (format!("{t} threads"), t)))
        .collect();
    for (i, (label, threads)) in runs.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.threads = Some(*threads);
        cfg.out = tmp.path().join(format!("out{i}"));
        let out = cmd_analyze(&cfg).map_err(|e| e.to_string())?;
        let bytes = out
            .files
            .iter()
            .map(|p| std::fs::read(p).unwrap())
            .collect();
        outputs.push((label.clone(), bytes));
    }
    for (label, b) in &outputs[1..] {
        ensure!(*b == outputs[0].1, "{label} differs from {}", outputs[0].0);
    }
    Ok(format!(
        "{} runs, {} files each, byte-identical",
        outputs.len(),
        outputs[0].1.len()
    ))
}

// ---------------------------------------------------------------------------
// 10. Scale

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let spec = FixtureSpec::large(5);
    let t0 = Instant::now();
    let cfg = write_fixture(&spec, &tmp.path().join("fx"));
    let generated = t0.elapsed();
    let lib = read_gds(&std::fs::read(cfg.gds.as_ref().unwrap()).unwrap()).unwrap();
    let polys = flatten(&lib, lib.top_cell().unwrap())
        .unwrap()
        .polygon_count();
    let start = Instant::now();
    let out = cmd_analyze(&cfg).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let r = &out.report;
    ensure!(polys >= 100_000, "only {polys} polygons");
    ensure!(
        r.net_lengths.count >= 10_000,
        "only {} routed nets",
        r.net_lengths.count
    );
    ensure!(
        (r.design.cols, r.design.rows) == (512, 512),
        "grid {}x{}",
        r.design.cols,
        r.design.rows
    );
    ensure!(
        r.crosscheck.as_ref().is_some_and(|c| c.pass),
        "crosscheck failed"
    );
    ensure!(t < Duration::from_secs(300), "analysis took {t:?}");
    Ok(format!(
        "{polys} polygons, {} routed nets, 512x512 sites: analyzed in {t:.2?} (generation {generated:.2?})",
        r.net_lengths.count
    ))
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("trigger spaces match flood-fill oracle", criterion_1),
        (
            "overall fraction identity; ratio-of-sums aggregation",
            criterion_2,
        ),
        ("blockage extremes", criterion_3),
        ("geometry oracles", criterion_4),
        ("route distance equals exhaustive enumeration", criterion_5),
        (
            "viable counts: cross product and fill monotonicity",
            criterion_6,
        ),
        ("fan-in equals path oracle, monotone in N", criterion_7),
        ("GDSII round trip and flatten oracle", criterion_8),
        ("determinism across runs and threads", criterion_9),
        ("performance envelope", criterion_10),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if filter.is_some_and(|k| k != n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!(
                "[PASS] criterion {n:>2}: {name}: {detail} ({:.2?})",
                start.elapsed()
            ),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {n:>2}: {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
