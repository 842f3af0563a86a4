// SPDX-License-Identifier: Apache-2.0

//! Runs the analysis chain on generated fixtures and compares every result
//! with the generator's own answers.

use std::collections::BTreeMap;

use icsurf::attacks::{enumerate_viable, SigmaThreshold};
use icsurf::fixtures::{generate, Fixture, FixtureSpec};
use icsurf::gdsii::{flatten, read_gds};
use icsurf::layout::{build_layout, crosscheck_gds, parse_attacks, BuildOptions, LayoutDb};
use icsurf::lefdef::{parse_def, parse_layermap, parse_lef};
use icsurf::metrics::{
    net_blockage, net_length_stats, route_distance, trigger_spaces, BlockageConfig, HeatmapBins,
};
use icsurf::netlist::{parse_netlist, trace_fanin, TraceConfig};

fn build(f: &Fixture) -> LayoutDb {
    let lef = parse_lef(&f.lef).unwrap();
    let def = parse_def(&f.def, &lef).unwrap();
    assert!(def.warnings.is_empty(), "{:?}", def.warnings);
    let g = parse_netlist(&f.netlist).unwrap();
    let cs = trace_fanin(&g, &TraceConfig::default());
    build_layout(&lef, &def.def, &cs, &BuildOptions::default()).unwrap()
}

fn check(f: &Fixture, planted_intact: bool) {
    let db = build(f);
    let e = &f.expected;
    let crit: Vec<&str> = db
        .critical_nets
        .iter()
        .map(|&i| db.nets[i].name.as_str())
        .collect();
    let mut want: Vec<&str> = e.critical.iter().map(String::as_str).collect();
    want.sort();
    let mut got = crit.clone();
    got.sort();
    assert_eq!(got, want);

    let spaces = trigger_spaces(&db.grid);
    assert_eq!(spaces.histogram, e.region_histogram);
    assert_eq!(spaces.open_sites(), e.open_sites);
    for s in e.planted_regions.iter().filter(|_| planted_intact) {
        assert!(
            spaces.histogram.contains_key(s),
            "planted region of size {s} missing"
        );
    }

    let blockage = net_blockage(&db, &BlockageConfig::default());
    for en in &e.nets {
        let nb = blockage.per_net.iter().find(|n| n.net == en.name).unwrap();
        assert_eq!(nb.same_layer.to_string(), en.same_layer, "{} same", en.name);
        assert_eq!(
            nb.adjacent_layer.to_string(),
            en.adjacent_layer,
            "{} adjacent",
            en.name
        );
        assert_eq!(nb.overall.to_string(), en.overall, "{} overall", en.name);
    }

    let stats = net_length_stats(&db, false).unwrap();
    let lengths: BTreeMap<String, i64> = stats.lengths.iter().cloned().collect();
    assert_eq!(lengths, e.lengths);

    let bins = HeatmapBins::default_for(spaces.largest());
    let matrix = route_distance(&db.grid, &spaces, &blockage, &stats, &bins);
    for p in &e.pairs {
        let region = spaces
            .regions
            .iter()
            .find(|r| r.seed() == p.region_seed)
            .unwrap();
        let entry = matrix.entry(&p.net, region.id).unwrap();
        assert_eq!(
            entry.manhattan, p.manhattan,
            "{} to region at {:?}",
            p.net, p.region_seed
        );
    }

    let attacks = parse_attacks(&f.attacks).unwrap();
    for a in &attacks {
        let v = enumerate_viable(
            &matrix,
            &spaces,
            &blockage,
            &db.critical,
            a,
            SigmaThreshold::default(),
        )
        .unwrap();
        assert_eq!(v.count, e.viable[&a.name], "{}", a.name);
    }

    let lib = read_gds(&f.gds).unwrap();
    let flat = flatten(&lib, lib.top_cell().unwrap()).unwrap();
    let map = parse_layermap(&f.layermap).unwrap();
    let cc = crosscheck_gds(&db, &flat, &map, 0.0);
    assert!(cc.pass, "{:?}", cc.layers);
}

#[test]
fn demo_fixtures_match_their_answers() {
    for seed in 0..3 {
        check(&generate(&FixtureSpec::demo(seed)).unwrap(), true);
    }
}

#[test]
fn reference_fixture_matches_its_answers() {
    let f = generate(&FixtureSpec::reference(11)).unwrap();
    assert!(
        f.expected.viable.values().any(|&c| c > 0),
        "{:?}",
        f.expected.viable
    );
    check(&f, true);
}

#[test]
fn filled_fixture_matches_its_answers() {
    let mut spec = FixtureSpec::demo(5);
    spec.fill_fraction = 0.5;
    let f = generate(&spec).unwrap();
    assert!(f.def.contains("guard_fill_0"));
    check(&f, false);
}
