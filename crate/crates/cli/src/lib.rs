// SPDX-License-Identifier: Apache-2.0

//! Command implementations behind the `icsurf` binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use icsurf::attacks::{
    compare_reports, enumerate_viable, AttackDelta, AttackViability, SigmaThreshold,
};
use icsurf::fixtures::{apply_filling, generate, FixtureSpec};
use icsurf::gdsii::{flatten, read_gds};
use icsurf::layout::{build_layout, crosscheck_gds, parse_attacks, BuildOptions, CrossCheck};
use icsurf::lefdef::{parse_def, parse_layermap, parse_lef};
use icsurf::metrics::{
    net_blockage, net_length_stats, route_distance, trigger_spaces, BlockageConfig, Fraction,
    Heatmap, HeatmapBins,
};
use icsurf::netlist::{
    emit_dot, parse_netlist_with, trace_fanin, CellLibrary, CriticalSet, TraceConfig,
};

/// Bumped whenever the report layout changes incompatibly.
pub const REPORT_SCHEMA: u32 = 1;

/// A failed command: exit code 1 for I/O problems, 2 for invalid input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn input(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::invalid(format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn cell_library(cells: Option<&Path>) -> CliResult<CellLibrary> {
    let mut lib = CellLibrary::builtin();
    if let Some(p) = cells {
        lib.extend_from_text(&read_text(p)?)
            .map_err(|e| CliError::input(p, e))?;
    }
    Ok(lib)
}

/// Writes every `(name, bytes)` into `dir`; on failure removes what it wrote.
fn write_outputs(dir: &Path, files: &[(&str, Vec<u8>)]) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let p = dir.join(name);
        if let Err(e) = write_file(&p, bytes) {
            for w in &written {
                let _ = fs::remove_file(w);
            }
            return Err(e);
        }
        written.push(p);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// trace

#[derive(Debug, Clone)]
pub struct TraceArgs {
    pub netlist: PathBuf,
    pub cells: Option<PathBuf>,
    pub root_prefix: String,
    pub depth: u32,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct TraceOutput {
    pub critical: CriticalSet,
    pub files: Vec<PathBuf>,
}

/// Traces the fan-in of prefixed roots; writes `fanin.dot` and
/// `critical.txt` (one net name per line, sorted).
pub fn cmd_trace(args: &TraceArgs) -> CliResult<TraceOutput> {
    let text = read_text(&args.netlist)?;
    let lib = cell_library(args.cells.as_deref())?;
    let g = parse_netlist_with(&text, &lib).map_err(|e| CliError::input(&args.netlist, e))?;
    let cs = trace_fanin(
        &g,
        &TraceConfig {
            root_prefix: args.root_prefix.clone(),
            depth: args.depth,
        },
    );
    let list: String = cs.members.keys().map(|n| format!("{n}\n")).collect();
    let files = write_outputs(
        &args.out,
        &[
            ("fanin.dot", emit_dot(&cs, &g).into_bytes()),
            ("critical.txt", list.into_bytes()),
        ],
    )?;
    Ok(TraceOutput {
        critical: cs,
        files,
    })
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lef: PathBuf,
    pub def: PathBuf,
    pub gds: Option<PathBuf>,
    pub netlist: PathBuf,
    pub layermap: Option<PathBuf>,
    pub attacks: Option<PathBuf>,
    pub cells: Option<PathBuf>,
    pub root_prefix: String,
    pub depth: u32,
    pub granularity: i64,
    pub extension: Option<i64>,
    pub sigma_threshold: f64,
    pub epsilon: f64,
    pub include_special: bool,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(
        lef: impl Into<PathBuf>,
        def: impl Into<PathBuf>,
        netlist: impl Into<PathBuf>,
        out: impl Into<PathBuf>,
    ) -> Self {
        RunConfig {
            lef: lef.into(),
            def: def.into(),
            gds: None,
            netlist: netlist.into(),
            layermap: None,
            attacks: None,
            cells: None,
            root_prefix: TraceConfig::default().root_prefix,
            depth: TraceConfig::default().depth,
            granularity: 1,
            extension: None,
            sigma_threshold: SigmaThreshold::default().value(),
            epsilon: 0.01,
            include_special: false,
            threads: None,
            out: out.into(),
        }
    }
}

/// Echo of the settings that shape the results. Thread count and output
/// directory are left out so reports compare byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub lef: String,
    pub def: String,
    pub gds: Option<String>,
    pub netlist: String,
    pub layermap: Option<String>,
    pub attacks: Option<String>,
    pub root_prefix: String,
    pub depth: u32,
    pub granularity: i64,
    pub extension: Option<i64>,
    pub sigma_threshold: f64,
    pub epsilon: f64,
    pub include_special: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FractionEcho {
    pub exact: String,
    pub value: f64,
}

impl From<Fraction> for FractionEcho {
    fn from(f: Fraction) -> Self {
        FractionEcho {
            exact: f.to_string(),
            value: *f.numer() as f64 / *f.denom() as f64,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignEcho {
    pub name: String,
    pub dbu_per_micron: i64,
    pub die_area: [i64; 4],
    pub cols: usize,
    pub rows: usize,
    pub nets: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberEcho {
    pub net: String,
    pub depth: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalEcho {
    pub roots: Vec<String>,
    pub members: Vec<MemberEcho>,
    /// Members with layout geometry, in analysis order.
    pub analyzed: Vec<String>,
    pub unmatched: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeCount {
    pub size: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TriggerEcho {
    pub open_sites: usize,
    pub regions: usize,
    pub largest: usize,
    pub histogram: Vec<SizeCount>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetBlockageEcho {
    pub net: String,
    pub perimeter: i128,
    pub perimeter_blocked: i128,
    pub area: i128,
    pub area_blocked: i128,
    pub same_layer: FractionEcho,
    pub adjacent_layer: FractionEcho,
    pub overall: FractionEcho,
    pub open_points: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockageEcho {
    pub same_layer: FractionEcho,
    pub adjacent_layer: FractionEcho,
    pub overall: FractionEcho,
    pub nets: Vec<NetBlockageEcho>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthEcho {
    pub count: i128,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub config: ConfigEcho,
    pub design: DesignEcho,
    pub critical: CriticalEcho,
    pub trigger_spaces: TriggerEcho,
    pub blockage: BlockageEcho,
    pub net_lengths: LengthEcho,
    pub heatmap: Heatmap,
    pub attacks: Vec<AttackViability>,
    pub crosscheck: Option<CrossCheck>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutput {
    pub report: Report,
    pub json: String,
    pub files: Vec<PathBuf>,
}

fn path_text(p: &Path) -> String {
    p.display().to_string()
}

/// Runs the whole chain and returns the report without writing anything.
pub fn analyze(cfg: &RunConfig) -> CliResult<Report> {
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::invalid(format!("thread pool: {e}")))?;
            pool.install(|| analyze_inner(cfg))
        }
        None => analyze_inner(cfg),
    }
}

fn analyze_inner(cfg: &RunConfig) -> CliResult<Report> {
    let mut warnings = Vec::new();
    let lef_text = read_text(&cfg.lef)?;
    let def_text = read_text(&cfg.def)?;
    let nl_text = read_text(&cfg.netlist)?;

    let lef = parse_lef(&lef_text).map_err(|e| CliError::input(&cfg.lef, e))?;
    warnings.extend(lef.warnings.iter().map(|w| format!("lef: {w}")));
    let def = parse_def(&def_text, &lef).map_err(|e| CliError::input(&cfg.def, e))?;
    warnings.extend(def.warnings.iter().map(|w| format!("def: {w}")));
    let lib = cell_library(cfg.cells.as_deref())?;
    let g = parse_netlist_with(&nl_text, &lib).map_err(|e| CliError::input(&cfg.netlist, e))?;
    let cs = trace_fanin(
        &g,
        &TraceConfig {
            root_prefix: cfg.root_prefix.clone(),
            depth: cfg.depth,
        },
    );
    warnings.extend(cs.warnings.iter().map(|w| format!("trace: {w}")));
    let db = build_layout(&lef, &def.def, &cs, &BuildOptions::default())
        .map_err(|e| CliError::input(&cfg.def, e))?;
    warnings.extend(db.warnings.iter().map(|w| format!("layout: {w}")));

    let crosscheck = match (&cfg.gds, &cfg.layermap) {
        (None, _) => None,
        (Some(_), None) => return Err(CliError::invalid("--gds needs --layermap")),
        (Some(gp), Some(mp)) => {
            let bytes = fs::read(gp).map_err(|e| CliError::io(gp, e))?;
            let gds = read_gds(&bytes).map_err(|e| CliError::input(gp, e))?;
            let top = gds
                .top_cell()
                .ok_or_else(|| CliError::input(gp, "library has no top cell"))?
                .to_string();
            let flat = flatten(&gds, &top).map_err(|e| CliError::input(gp, e))?;
            let map = parse_layermap(&read_text(mp)?).map_err(|e| CliError::input(mp, e))?;
            let cc = crosscheck_gds(&db, &flat, &map, cfg.epsilon);
            warnings.extend(cc.warnings.iter().map(|w| format!("crosscheck: {w}")));
            if !cc.pass {
                warnings.push(format!(
                    "crosscheck: GDSII and DEF geometry differ by more than {}",
                    cfg.epsilon
                ));
            }
            Some(cc)
        }
    };

    let spaces = trigger_spaces(&db.grid);
    let bcfg = BlockageConfig {
        granularity: cfg.granularity,
        extension: cfg.extension,
    };
    if bcfg.granularity < 1 {
        return Err(CliError::invalid("--granularity must be at least 1"));
    }
    let blockage = net_blockage(&db, &bcfg);
    warnings.extend(blockage.warnings.iter().map(|w| format!("blockage: {w}")));
    let stats =
        net_length_stats(&db, cfg.include_special).map_err(|e| CliError::input(&cfg.def, e))?;
    let bins = HeatmapBins::default_for(spaces.largest());
    let matrix = route_distance(&db.grid, &spaces, &blockage, &stats, &bins);
    warnings.extend(
        matrix
            .warnings
            .iter()
            .map(|w| format!("route distance: {w}")),
    );

    let thr =
        SigmaThreshold::new(cfg.sigma_threshold).map_err(|e| CliError::invalid(e.to_string()))?;
    let mut attacks = Vec::new();
    let attack_text = match &cfg.attacks {
        None => {
            warnings.push("attacks: no attack file given; viability section is empty".into());
            None
        }
        Some(p) if !p.exists() => {
            warnings.push(format!(
                "attacks: {} not found; viability section is empty",
                p.display()
            ));
            None
        }
        Some(p) => Some((p, read_text(p)?)),
    };
    if let Some((p, text)) = attack_text {
        for a in parse_attacks(&text).map_err(|e| CliError::input(p, e))? {
            let v = enumerate_viable(&matrix, &spaces, &blockage, &db.critical, &a, thr)
                .map_err(|e| CliError::input(p, e))?;
            attacks.push(v);
        }
    }

    let d = db.die_area;
    Ok(Report {
        schema: REPORT_SCHEMA,
        config: ConfigEcho {
            lef: path_text(&cfg.lef),
            def: path_text(&cfg.def),
            gds: cfg.gds.as_deref().map(path_text),
            netlist: path_text(&cfg.netlist),
            layermap: cfg.layermap.as_deref().map(path_text),
            attacks: cfg.attacks.as_deref().map(path_text),
            root_prefix: cfg.root_prefix.clone(),
            depth: cfg.depth,
            granularity: cfg.granularity,
            extension: cfg.extension,
            sigma_threshold: cfg.sigma_threshold,
            epsilon: cfg.epsilon,
            include_special: cfg.include_special,
        },
        design: DesignEcho {
            name: def.def.design.clone(),
            dbu_per_micron: db.dbu_per_micron,
            die_area: [d.lo.x, d.lo.y, d.hi.x, d.hi.y],
            cols: db.grid.cols,
            rows: db.grid.rows,
            nets: db.nets.len(),
        },
        critical: CriticalEcho {
            roots: db.critical.roots.iter().cloned().collect(),
            members: db
                .critical
                .members
                .iter()
                .map(|(n, &d)| MemberEcho {
                    net: n.clone(),
                    depth: d,
                })
                .collect(),
            analyzed: db
                .critical_nets
                .iter()
                .map(|&i| db.nets[i].name.clone())
                .collect(),
            unmatched: db.unmatched.clone(),
        },
        trigger_spaces: TriggerEcho {
            open_sites: spaces.open_sites(),
            regions: spaces.regions.len(),
            largest: spaces.largest(),
            histogram: spaces
                .histogram
                .iter()
                .map(|(&size, &count)| SizeCount { size, count })
                .collect(),
        },
        blockage: BlockageEcho {
            same_layer: blockage.design.same_layer.into(),
            adjacent_layer: blockage.design.adjacent_layer.into(),
            overall: blockage.design.overall.into(),
            nets: blockage
                .per_net
                .iter()
                .map(|n| NetBlockageEcho {
                    net: n.net.clone(),
                    perimeter: n.perimeter,
                    perimeter_blocked: n.perimeter_blocked,
                    area: n.area,
                    area_blocked: n.area_blocked,
                    same_layer: n.same_layer.into(),
                    adjacent_layer: n.adjacent_layer.into(),
                    overall: n.overall.into(),
                    open_points: n.open_point_count(),
                })
                .collect(),
        },
        net_lengths: LengthEcho {
            count: stats.count,
            mean: stats.mean(),
            stddev: stats.stddev(),
        },
        heatmap: matrix.heatmap,
        attacks,
        crosscheck,
        warnings,
    })
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::invalid(format!("csv: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| CliError::invalid(format!("csv: {e}")))
}

#[derive(Serialize)]
struct HeatRow {
    size_bin: String,
    sigma_bin: String,
    fraction: f64,
}

/// Runs [`analyze`] and writes `report.json`, `histogram.csv` and
/// `heatmap.csv` into the output directory.
pub fn cmd_analyze(cfg: &RunConfig) -> CliResult<AnalyzeOutput> {
    let report = analyze(cfg)?;
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::invalid(format!("report: {e}")))?;
    json.push('\n');
    let hist = csv_bytes(&report.trigger_spaces.histogram)?;
    let h = &report.heatmap;
    let heat = csv_bytes(h.cells.iter().map(|c| HeatRow {
        size_bin: h.size_label(c.size_bin),
        sigma_bin: h.sigma_label(c.sigma_bin),
        fraction: c.fraction,
    }))?;
    let files = write_outputs(
        &cfg.out,
        &[
            ("report.json", json.clone().into_bytes()),
            ("histogram.csv", hist),
            ("heatmap.csv", heat),
        ],
    )?;
    Ok(AnalyzeOutput {
        report,
        json,
        files,
    })
}

// ---------------------------------------------------------------------------
// compare

#[derive(Debug, Clone, Serialize)]
pub struct CompareDocument {
    pub schema: u32,
    pub baseline: String,
    pub candidate: String,
    pub attacks: Vec<AttackDelta>,
}

fn load_viability(path: &Path) -> CliResult<Vec<AttackViability>> {
    let text = read_text(path)?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
    match v.get("schema").and_then(serde_json::Value::as_u64) {
        Some(s) if s == REPORT_SCHEMA as u64 => {}
        Some(s) => {
            return Err(CliError::input(
                path,
                format!("report schema {s}, expected {REPORT_SCHEMA}"),
            ))
        }
        None => {
            return Err(CliError::input(
                path,
                "not an analysis report (no schema field)",
            ))
        }
    }
    let attacks = v
        .get("attacks")
        .cloned()
        .ok_or_else(|| CliError::input(path, "report has no attacks section"))?;
    serde_json::from_value(attacks).map_err(|e| CliError::input(path, e))
}

/// Compares the viability sections of two reports (e.g. before and after a
/// defense).
pub fn cmd_compare(baseline: &Path, candidate: &Path) -> CliResult<CompareDocument> {
    let a = load_viability(baseline)?;
    let b = load_viability(candidate)?;
    let attacks = compare_reports(&a, &b).map_err(|e| CliError::invalid(e.to_string()))?;
    Ok(CompareDocument {
        schema: REPORT_SCHEMA,
        baseline: path_text(baseline),
        candidate: path_text(candidate),
        attacks,
    })
}

// ---------------------------------------------------------------------------
// generate / fill

/// Names of the files written by [`cmd_generate`].
pub const FIXTURE_FILES: [&str; 7] = [
    "tech.lef",
    "design.def",
    "design.v",
    "design.gds",
    "layers.map",
    "attacks.txt",
    "expected.json",
];

pub fn preset(name: &str, seed: u64) -> CliResult<FixtureSpec> {
    match name {
        "demo" => Ok(FixtureSpec::demo(seed)),
        "reference" => Ok(FixtureSpec::reference(seed)),
        "large" => Ok(FixtureSpec::large(seed)),
        _ => Err(CliError::invalid(format!(
            "unknown preset {name:?} (demo, reference, large)"
        ))),
    }
}

pub fn cmd_generate(spec: &FixtureSpec, out: &Path) -> CliResult<Vec<PathBuf>> {
    let f = generate(spec).map_err(|e| CliError::invalid(e.to_string()))?;
    let mut expected =
        serde_json::to_string_pretty(&f.expected).map_err(|e| CliError::invalid(e.to_string()))?;
    expected.push('\n');
    let contents = [
        f.lef.into_bytes(),
        f.def.into_bytes(),
        f.netlist.into_bytes(),
        f.gds,
        f.layermap.into_bytes(),
        f.attacks.into_bytes(),
        expected.into_bytes(),
    ];
    let files: Vec<(&str, Vec<u8>)> = FIXTURE_FILES.iter().copied().zip(contents).collect();
    write_outputs(out, &files)
}

#[derive(Debug, Clone)]
pub struct FillArgs {
    pub lef: PathBuf,
    pub def: PathBuf,
    pub nets: Vec<String>,
    pub fraction: f64,
    pub macro_name: String,
    pub out: PathBuf,
}

pub fn cmd_fill(args: &FillArgs) -> CliResult<()> {
    let lef = parse_lef(&read_text(&args.lef)?).map_err(|e| CliError::input(&args.lef, e))?;
    let text = read_text(&args.def)?;
    let filled = apply_filling(&text, &lef, &args.nets, args.fraction, &args.macro_name)
        .map_err(|e| CliError::input(&args.def, e))?;
    write_file(&args.out, filled)
}
