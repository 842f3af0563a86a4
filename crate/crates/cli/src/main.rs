// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use icsurf_cli::{
    cmd_analyze, cmd_compare, cmd_fill, cmd_generate, cmd_trace, preset, CliError, FillArgs,
    RunConfig, TraceArgs,
};

/// Layout attack-surface analysis for hardware-Trojan insertion.
///
/// Every option can also come from an `ICSURF_*` environment variable;
/// command-line flags win over the environment, which wins over defaults.
#[derive(Parser)]
#[command(name = "icsurf", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trace the fan-in of prefixed security-critical nets.
    Trace(TraceCmd),
    /// Run the full analysis and write report.json plus CSVs.
    Analyze(AnalyzeCmd),
    /// Compare the attack viability of two reports.
    Compare(CompareCmd),
    /// Write a synthetic fixture with its expected answers.
    Generate(GenerateCmd),
    /// Occupy open sites nearest the critical nets with guard cells.
    Fill(FillCmd),
}

#[derive(Args)]
struct NetlistOpts {
    #[arg(long, env = "ICSURF_NETLIST")]
    netlist: PathBuf,
    /// Extra cell direction file (`CELL PORT:in|out|clk ...` per line).
    #[arg(long, env = "ICSURF_CELLS")]
    cells: Option<PathBuf>,
    #[arg(long, env = "ICSURF_PREFIX", default_value = "sec_")]
    prefix: String,
    #[arg(long, env = "ICSURF_DEPTH", default_value_t = 2)]
    depth: u32,
}

#[derive(Args)]
struct TraceCmd {
    #[command(flatten)]
    netlist: NetlistOpts,
    #[arg(long, env = "ICSURF_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeCmd {
    #[arg(long, env = "ICSURF_LEF")]
    lef: PathBuf,
    #[arg(long, env = "ICSURF_DEF")]
    def: PathBuf,
    #[arg(long, env = "ICSURF_GDS")]
    gds: Option<PathBuf>,
    #[arg(long, env = "ICSURF_LAYERMAP")]
    layermap: Option<PathBuf>,
    #[arg(long, env = "ICSURF_ATTACKS")]
    attacks: Option<PathBuf>,
    #[command(flatten)]
    netlist: NetlistOpts,
    /// Perimeter sampling step in dbu.
    #[arg(long, env = "ICSURF_GRANULARITY", default_value_t = 1)]
    granularity: i64,
    /// Probe offset in dbu; defaults to each layer's pitch.
    #[arg(long, env = "ICSURF_EXTENSION")]
    extension: Option<i64>,
    #[arg(long, env = "ICSURF_SIGMA_THRESHOLD", default_value_t = 3.0)]
    sigma_threshold: f64,
    /// Allowed GDSII/DEF area mismatch fraction per layer.
    #[arg(long, env = "ICSURF_EPSILON", default_value_t = 0.01)]
    epsilon: f64,
    /// Count special nets in the net-length distribution.
    #[arg(long, env = "ICSURF_INCLUDE_SPECIAL")]
    include_special: bool,
    #[arg(long, env = "ICSURF_THREADS")]
    threads: Option<usize>,
    #[arg(long, env = "ICSURF_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareCmd {
    baseline: PathBuf,
    candidate: PathBuf,
    /// Write the delta document here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateCmd {
    /// demo, reference or large.
    #[arg(long, default_value = "demo")]
    preset: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    fill: f64,
    #[arg(long, env = "ICSURF_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct FillCmd {
    #[arg(long, env = "ICSURF_LEF")]
    lef: PathBuf,
    #[arg(long, env = "ICSURF_DEF")]
    def: PathBuf,
    /// Critical nets, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    nets: Vec<String>,
    #[arg(long)]
    fraction: f64,
    #[arg(long = "macro", default_value = "GUARD1")]
    macro_name: String,
    /// Output DEF path.
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Trace(t) => {
            let out = cmd_trace(&TraceArgs {
                netlist: t.netlist.netlist,
                cells: t.netlist.cells,
                root_prefix: t.netlist.prefix,
                depth: t.netlist.depth,
                out: t.out,
            })?;
            for w in &out.critical.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} critical nets", out.critical.len());
        }
        Cmd::Analyze(a) => {
            let cfg = RunConfig {
                lef: a.lef,
                def: a.def,
                gds: a.gds,
                netlist: a.netlist.netlist,
                layermap: a.layermap,
                attacks: a.attacks,
                cells: a.netlist.cells,
                root_prefix: a.netlist.prefix,
                depth: a.netlist.depth,
                granularity: a.granularity,
                extension: a.extension,
                sigma_threshold: a.sigma_threshold,
                epsilon: a.epsilon,
                include_special: a.include_special,
                threads: a.threads,
                out: a.out,
            };
            let out = cmd_analyze(&cfg)?;
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            for v in &out.report.attacks {
                println!("{}: {} viable", v.attack, v.count);
            }
        }
        Cmd::Compare(c) => {
            let doc = cmd_compare(&c.baseline, &c.candidate)?;
            let mut text = serde_json::to_string_pretty(&doc).expect("delta serializes");
            text.push('\n');
            match c.out {
                Some(p) => std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))?,
                None => print!("{text}"),
            }
        }
        Cmd::Generate(g) => {
            let mut spec = preset(&g.preset, g.seed)?;
            spec.fill_fraction = g.fill;
            for p in cmd_generate(&spec, &g.out)? {
                println!("{}", p.display());
            }
        }
        Cmd::Fill(f) => cmd_fill(&FillArgs {
            lef: f.lef,
            def: f.def,
            nets: f.nets,
            fraction: f.fraction,
            macro_name: f.macro_name,
            out: f.out,
        })?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
