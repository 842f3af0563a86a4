// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CHAIN: &str = "\
module top(a, clk);
  input a, clk;
  wire b, c, sec_out;
  BUF u0 (.A(a), .Y(b));
  INV u1 (.A(b), .Y(c));
  INV u2 (.A(c), .Y(sec_out));
endmodule
";

fn icsurf(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_icsurf"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("ICSURF_")) {
        cmd.env_remove(k);
    }
    cmd.envs(envs.iter().copied());
    cmd.output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn critical(out: &Path) -> Vec<String> {
    fs::read_to_string(out.join("critical.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn generate(dir: &Path, fill: &str) {
    let o = icsurf(
        &[
            "generate",
            "--preset",
            "demo",
            "--seed",
            "3",
            "--fill",
            fill,
            "--out",
            s(dir),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn analyze(fx: &Path, out: &Path, attacks: Option<&Path>) -> Output {
    let mut args = vec![
        "analyze".to_string(),
        "--lef".into(),
        s(&fx.join("tech.lef")).into(),
        "--def".into(),
        s(&fx.join("design.def")).into(),
        "--netlist".into(),
        s(&fx.join("design.v")).into(),
        "--out".into(),
        s(out).into(),
    ];
    if let Some(a) = attacks {
        args.extend(["--attacks".into(), s(a).into()]);
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    icsurf(&refs, &[])
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn trace_follows_the_chain_to_the_requested_depth() {
    let tmp = tempfile::tempdir().unwrap();
    let net = tmp.path().join("chain.v");
    fs::write(&net, CHAIN).unwrap();
    let out = tmp.path().join("t");
    let o = icsurf(
        &[
            "trace",
            "--netlist",
            s(&net),
            "--depth",
            "2",
            "--out",
            s(&out),
        ],
        &[],
    );
    assert!(o.status.success());
    assert_eq!(critical(&out), ["b", "c", "sec_out"]);
    let dot = fs::read_to_string(out.join("fanin.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("sec_out"));
}

#[test]
fn trace_without_matching_roots_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let net = tmp.path().join("chain.v");
    fs::write(&net, CHAIN.replace("sec_out", "z")).unwrap();
    let out = tmp.path().join("t");
    let o = icsurf(&["trace", "--netlist", s(&net), "--out", s(&out)], &[]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert!(critical(&out).is_empty());
}

#[test]
fn behavioral_netlist_is_invalid_input() {
    let tmp = tempfile::tempdir().unwrap();
    let net = tmp.path().join("beh.v");
    fs::write(
        &net,
        "module m(a, clk);\n  input a, clk;\n  reg q;\n  always @(posedge clk) q <= a;\nendmodule\n",
    )
    .unwrap();
    let o = icsurf(
        &[
            "trace",
            "--netlist",
            s(&net),
            "--out",
            s(&tmp.path().join("t")),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_netlist_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = icsurf(
        &[
            "trace",
            "--netlist",
            s(&tmp.path().join("absent.v")),
            "--out",
            s(&tmp.path().join("t")),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_environment_which_overrides_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let net = tmp.path().join("chain.v");
    fs::write(&net, CHAIN).unwrap();
    let out = tmp.path().join("t");
    let o = icsurf(
        &["trace"],
        &[
            ("ICSURF_NETLIST", s(&net)),
            ("ICSURF_OUT", s(&out)),
            ("ICSURF_DEPTH", "0"),
        ],
    );
    assert!(o.status.success());
    assert_eq!(critical(&out), ["sec_out"]);
    let o = icsurf(
        &["trace", "--depth", "1"],
        &[
            ("ICSURF_NETLIST", s(&net)),
            ("ICSURF_OUT", s(&out)),
            ("ICSURF_DEPTH", "0"),
        ],
    );
    assert!(o.status.success());
    assert_eq!(critical(&out), ["c", "sec_out"]);
}

#[test]
fn analyze_without_attack_file_warns_and_leaves_viability_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    generate(&fx, "0");
    let out = tmp.path().join("a");
    let o = analyze(&fx, &out, Some(&tmp.path().join("nope.txt")));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let r = report(&out);
    assert_eq!(r["attacks"].as_array().unwrap().len(), 0);
    assert!(out.join("histogram.csv").exists());
    assert!(fs::read_to_string(out.join("heatmap.csv"))
        .unwrap()
        .starts_with("size_bin,sigma_bin,fraction"));
}

#[test]
fn fully_filled_layout_has_no_viable_attack() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    generate(&fx, "1");
    let out = tmp.path().join("a");
    let o = analyze(&fx, &out, Some(&fx.join("attacks.txt")));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let attacks = r["attacks"].as_array().unwrap();
    assert!(!attacks.is_empty());
    assert!(attacks.iter().all(|a| a["count"] == 0), "{attacks:?}");
    assert_eq!(r["trigger_spaces"]["open_sites"], 0);
}

#[test]
fn compare_reports_and_reject_unknown_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    generate(&fx, "0");
    let out = tmp.path().join("a");
    assert!(analyze(&fx, &out, Some(&fx.join("attacks.txt")))
        .status
        .success());
    let rep = out.join("report.json");

    let o = icsurf(&["compare", s(&rep), s(&rep)], &[]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    for d in doc["attacks"].as_array().unwrap() {
        assert_eq!(d["baseline"], d["candidate"]);
    }

    let mut bad = report(&out);
    bad["schema"] = Value::from(99);
    let bad_path = tmp.path().join("bad.json");
    fs::write(&bad_path, serde_json::to_string(&bad).unwrap()).unwrap();
    let o = icsurf(&["compare", s(&rep), s(&bad_path)], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fill_inserts_guard_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    generate(&fx, "0");
    let filled = tmp.path().join("filled.def");
    let o = icsurf(
        &[
            "fill",
            "--lef",
            s(&fx.join("tech.lef")),
            "--def",
            s(&fx.join("design.def")),
            "--nets",
            "sec_key,sec_mode",
            "--fraction",
            "0.5",
            "--out",
            s(&filled),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&filled).unwrap();
    assert!(text.contains("guard_fill_0 GUARD1"));

    let o = icsurf(
        &[
            "fill",
            "--lef",
            s(&fx.join("tech.lef")),
            "--def",
            s(&fx.join("design.def")),
            "--nets",
            "sec_key",
            "--fraction",
            "1.5",
            "--out",
            s(&filled),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}
