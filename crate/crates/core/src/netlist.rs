// SPDX-License-Identifier: Apache-2.0

//! Structural gate-level netlists and backward fan-in tracing.
//!
//! The reader accepts one module built from declarations, named-port cell
//! instances and `assign` aliases. Vectors are bit-blasted to `name[i]`
//! nets. Tracing walks from prefix-flagged root nets back through driving
//! cells' data inputs; aliases cost nothing and clock pins are never
//! followed.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct NetlistError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, NetlistError> {
    Err(NetlistError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortDir {
    Input,
    Output,
    /// Clock input; never traversed during fan-in tracing.
    Clock,
}

/// Port directions per cell type.
#[derive(Debug, Clone, Default)]
pub struct CellLibrary {
    cells: HashMap<String, Vec<(String, PortDir)>>,
}

impl CellLibrary {
    /// The built-in generic gate set.
    pub fn builtin() -> Self {
        use PortDir::*;
        let mut lib = CellLibrary::default();
        let logic: &[(&str, &[&str])] = &[
            ("INV", &["A"]),
            ("BUF", &["A"]),
            ("NAND2", &["A", "B"]),
            ("NAND3", &["A", "B", "C"]),
            ("NOR2", &["A", "B"]),
            ("NOR3", &["A", "B", "C"]),
            ("AND2", &["A", "B"]),
            ("OR2", &["A", "B"]),
            ("XOR2", &["A", "B"]),
            ("MUX2", &["A", "B", "S"]),
        ];
        for (cell, ins) in logic {
            let mut ports: Vec<(String, PortDir)> =
                ins.iter().map(|p| (p.to_string(), Input)).collect();
            ports.push(("Y".into(), Output));
            lib.cells.insert(cell.to_string(), ports);
        }
        lib.cells.insert(
            "DFF".into(),
            vec![
                ("D".into(), Input),
                ("CLK".into(), Clock),
                ("Q".into(), Output),
            ],
        );
        lib
    }

    pub fn insert(&mut self, cell: &str, ports: Vec<(String, PortDir)>) {
        self.cells.insert(cell.to_string(), ports);
    }

    /// Adds entries from a direction file: `<cellType> <port>:<in|out|clk> ...`
    /// per line, `#` comments. Later entries replace earlier ones.
    pub fn extend_from_text(&mut self, text: &str) -> Result<(), NetlistError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let mut cols = raw.split('#').next().unwrap_or("").split_whitespace();
            let Some(cell) = cols.next() else { continue };
            let mut ports = Vec::new();
            for c in cols {
                let Some((port, dir)) = c.split_once(':') else {
                    return err(line, format!("expected <port>:<dir>, found {c:?}"));
                };
                let dir = match dir.to_ascii_lowercase().as_str() {
                    "in" | "input" => PortDir::Input,
                    "out" | "output" => PortDir::Output,
                    "clk" | "clock" => PortDir::Clock,
                    _ => return err(line, format!("unknown direction {dir:?} for {cell}.{port}")),
                };
                ports.push((port.to_string(), dir));
            }
            if ports.is_empty() {
                return err(line, format!("cell {cell} lists no ports"));
            }
            self.cells.insert(cell.to_string(), ports);
        }
        Ok(())
    }

    pub fn port_dir(&self, cell: &str, port: &str) -> Option<PortDir> {
        self.cells
            .get(cell)?
            .iter()
            .find(|(p, _)| p == port)
            .map(|(_, d)| *d)
    }

    pub fn has_cell(&self, cell: &str) -> bool {
        self.cells.contains_key(cell)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub cell_type: String,
    /// Port name to (net index, direction). Unconnected and constant-tied
    /// ports are omitted.
    pub conns: BTreeMap<String, (usize, PortDir)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Instance(usize),
    /// `assign net = source`.
    Alias(usize),
    Constant,
    PrimaryInput,
}

#[derive(Debug, Clone, Default)]
pub struct NetGraph {
    pub module: String,
    pub nets: Vec<String>,
    pub instances: Vec<Instance>,
    pub drivers: Vec<Option<Driver>>,
    index: HashMap<String, usize>,
}

impl NetGraph {
    pub fn net_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn driver(&self, net: usize) -> Option<Driver> {
        self.drivers[net]
    }

    /// Nets one step upstream of `net`, with the step cost (0 for an alias,
    /// 1 through a cell's data input).
    pub fn upstream(&self, net: usize) -> Vec<(usize, u32)> {
        match self.drivers[net] {
            Some(Driver::Alias(src)) => vec![(src, 0)],
            Some(Driver::Instance(i)) => self.instances[i]
                .conns
                .values()
                .filter(|(_, d)| *d == PortDir::Input)
                .map(|(n, _)| (*n, 1))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn alias_count(&self) -> usize {
        self.drivers
            .iter()
            .filter(|d| matches!(d, Some(Driver::Alias(_))))
            .count()
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    Punct(char),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, NetlistError> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < b.len() {
        let c = b[i];
        match c {
            b'\n' => {
                line += 1;
                i += 1;
            }
            _ if c.is_ascii_whitespace() => i += 1,
            b'/' if b.get(i + 1) == Some(&b'/') => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                let start = line;
                i += 2;
                loop {
                    if i + 1 >= b.len() {
                        return err(start, "unterminated block comment");
                    }
                    if b[i] == b'*' && b[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    if b[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
            }
            b'\\' => {
                // Escaped identifier, terminated by whitespace.
                let start = i + 1;
                i = start;
                while i < b.len() && !b[i].is_ascii_whitespace() {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), line));
            }
            _ if c.is_ascii_alphabetic() || c == b'_' || c == b'$' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$')
                {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), line));
            }
            _ if c.is_ascii_digit() || c == b'\'' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'\'' || b[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Number(text[start..i].to_string()), line));
            }
            _ => {
                out.push((Tok::Punct(c as char), line));
                i += 1;
            }
        }
    }
    Ok(out)
}

const BEHAVIORAL: &[&str] = &[
    "always", "initial", "reg", "if", "else", "case", "casez", "casex", "begin", "end", "for",
    "while", "function", "task", "generate", "integer", "forever", "repeat", "posedge", "negedge",
];

// ---------------------------------------------------------------------------
// Parser

/// Bit-level view of an expression: each element is a net index, or `None`
/// for a constant bit. Most-significant bit first.
type Bits = Vec<Option<usize>>;

struct Parser<'l> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    lib: &'l CellLibrary,
    g: NetGraph,
    /// Declared name to `(msb, lsb)` for vectors, `None` for scalars.
    decls: HashMap<String, Option<(i64, i64)>>,
    /// Line that set each net's driver, for error messages.
    driver_line: Vec<usize>,
}

impl Parser<'_> {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or(self.toks.last())
            .map_or(1, |t| t.1)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Result<Tok, NetlistError> {
        let line = self.line();
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t.ok_or(NetlistError {
            line,
            message: "unexpected end of file".into(),
        })
    }

    fn is_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn expect_punct(&mut self, c: char) -> Result<(), NetlistError> {
        let line = self.line();
        match self.next()? {
            Tok::Punct(p) if p == c => Ok(()),
            other => err(line, format!("expected '{c}', found {}", describe(&other))),
        }
    }

    fn ident(&mut self) -> Result<String, NetlistError> {
        let line = self.line();
        match self.next()? {
            Tok::Ident(s) => {
                if BEHAVIORAL.contains(&s.as_str()) {
                    return err(line, format!("behavioral construct unsupported: `{s}`"));
                }
                Ok(s)
            }
            other => err(
                line,
                format!("expected identifier, found {}", describe(&other)),
            ),
        }
    }

    fn int(&mut self) -> Result<i64, NetlistError> {
        let line = self.line();
        match self.next()? {
            Tok::Number(s) => s
                .replace('_', "")
                .parse()
                .or_else(|_| err(line, format!("expected integer, found {s:?}"))),
            other => err(
                line,
                format!("expected integer, found {}", describe(&other)),
            ),
        }
    }

    fn range(&mut self) -> Result<Option<(i64, i64)>, NetlistError> {
        if !self.is_punct('[') {
            return Ok(None);
        }
        self.next()?;
        let msb = self.int()?;
        self.expect_punct(':')?;
        let lsb = self.int()?;
        self.expect_punct(']')?;
        Ok(Some((msb, lsb)))
    }

    fn declare(
        &mut self,
        name: &str,
        range: Option<(i64, i64)>,
        line: usize,
    ) -> Result<(), NetlistError> {
        if let Some(prev) = self.decls.get(name) {
            if *prev != range {
                return err(
                    line,
                    format!("net {name} redeclared with a different width"),
                );
            }
            return Ok(());
        }
        self.decls.insert(name.to_string(), range);
        for bit in bit_names(name, range) {
            let id = self.g.nets.len();
            self.g.index.insert(bit.clone(), id);
            self.g.nets.push(bit);
            self.g.drivers.push(None);
            self.driver_line.push(0);
        }
        Ok(())
    }

    fn set_driver(&mut self, net: usize, d: Driver, line: usize) -> Result<(), NetlistError> {
        if self.g.drivers[net].is_some() {
            return err(
                line,
                format!(
                    "net {} has multiple drivers (also driven on line {})",
                    self.g.nets[net], self.driver_line[net]
                ),
            );
        }
        self.g.drivers[net] = Some(d);
        self.driver_line[net] = line;
        Ok(())
    }

    fn bit(&self, name: &str, line: usize) -> Result<usize, NetlistError> {
        self.g
            .net_id(name)
            .map_or_else(|| err(line, format!("net {name} is not declared")), Ok)
    }

    /// A primary, part-select, constant or concatenation.
    fn expr(&mut self) -> Result<Bits, NetlistError> {
        let line = self.line();
        match self.peek().cloned() {
            Some(Tok::Punct('{')) => {
                self.next()?;
                let mut bits = Vec::new();
                loop {
                    bits.extend(self.expr()?);
                    if self.is_punct(',') {
                        self.next()?;
                    } else {
                        break;
                    }
                }
                self.expect_punct('}')?;
                Ok(bits)
            }
            Some(Tok::Number(s)) => {
                self.next()?;
                Ok(vec![None; constant_width(&s)])
            }
            Some(Tok::Ident(_)) => {
                let name = self.ident()?;
                let Some(&decl) = self.decls.get(&name) else {
                    return err(line, format!("net {name} is not declared"));
                };
                if !self.is_punct('[') {
                    return bit_names(&name, decl)
                        .iter()
                        .map(|b| self.bit(b, line).map(Some))
                        .collect();
                }
                self.next()?;
                let hi = self.int()?;
                let lo = if self.is_punct(':') {
                    self.next()?;
                    self.int()?
                } else {
                    hi
                };
                self.expect_punct(']')?;
                let Some((msb, lsb)) = decl else {
                    return err(line, format!("bit-select on scalar net {name}"));
                };
                let (dlo, dhi) = (msb.min(lsb), msb.max(lsb));
                if !(dlo..=dhi).contains(&hi) || !(dlo..=dhi).contains(&lo) {
                    return err(line, format!("index out of range for {name}[{msb}:{lsb}]"));
                }
                step_range(hi, lo)
                    .map(|i| self.bit(&format!("{name}[{i}]"), line).map(Some))
                    .collect()
            }
            Some(other) => err(
                line,
                format!("behavioral construct unsupported: {}", describe(&other)),
            ),
            None => err(line, "unexpected end of file"),
        }
    }

    fn parse_module(&mut self) -> Result<(), NetlistError> {
        let line = self.line();
        match self.next()? {
            Tok::Ident(s) if s == "module" => {}
            other => {
                return err(
                    line,
                    format!("expected `module`, found {}", describe(&other)),
                )
            }
        }
        self.g.module = self.ident()?;
        let mut pending_ports = Vec::new();
        if self.is_punct('(') {
            self.next()?;
            while !self.is_punct(')') {
                let line = self.line();
                if let Some(Tok::Ident(kw)) = self.peek() {
                    if matches!(kw.as_str(), "input" | "output" | "inout") {
                        let dir = kw.clone();
                        self.next()?;
                        if matches!(self.peek(), Some(Tok::Ident(w)) if w == "wire") {
                            self.next()?;
                        }
                        let range = self.range()?;
                        let name = self.ident()?;
                        self.declare(&name, range, line)?;
                        if dir == "input" {
                            self.mark_inputs(&name, line)?;
                        }
                    } else {
                        pending_ports.push(self.ident()?);
                    }
                } else {
                    pending_ports.push(self.ident()?);
                }
                if self.is_punct(',') {
                    self.next()?;
                }
            }
            self.next()?;
        }
        self.expect_punct(';')?;
        loop {
            let line = self.line();
            let kw = match self.next()? {
                Tok::Ident(s) => s,
                other => return err(line, format!("unexpected {}", describe(&other))),
            };
            match kw.as_str() {
                "endmodule" => break,
                "input" | "output" | "inout" | "wire" | "tri" => {
                    let range = self.range()?;
                    loop {
                        let name = self.ident()?;
                        self.declare(&name, range, line)?;
                        if kw == "input" {
                            self.mark_inputs(&name, line)?;
                        }
                        if self.is_punct(',') {
                            self.next()?;
                        } else {
                            break;
                        }
                    }
                    self.expect_punct(';')?;
                }
                "assign" => loop {
                    let line = self.line();
                    let lhs = self.expr()?;
                    self.expect_punct('=')?;
                    let rhs = self.expr()?;
                    if !(self.is_punct(';') || self.is_punct(',')) {
                        return err(
                            self.line(),
                            "behavioral construct unsupported: expression in assign",
                        );
                    }
                    // LSB-aligned: pair bits from the right.
                    for (l, r) in lhs.iter().rev().zip(rhs.iter().rev()) {
                        let Some(l) = l else {
                            return err(line, "assign target is a constant");
                        };
                        let d = r.map_or(Driver::Constant, Driver::Alias);
                        self.set_driver(*l, d, line)?;
                    }
                    if self.is_punct(',') {
                        self.next()?;
                    } else {
                        self.expect_punct(';')?;
                        break;
                    }
                },
                k if BEHAVIORAL.contains(&k) => {
                    return err(line, format!("behavioral construct unsupported: `{k}`"))
                }
                _ => self.parse_instance(kw, line)?,
            }
        }
        for p in pending_ports {
            if !self.decls.contains_key(&p) {
                return err(line, format!("port {p} is not declared"));
            }
        }
        if self.pos < self.toks.len() {
            return err(self.line(), "only one module per netlist is supported");
        }
        Ok(())
    }

    fn mark_inputs(&mut self, name: &str, line: usize) -> Result<(), NetlistError> {
        for b in bit_names(name, self.decls[name]) {
            let id = self.bit(&b, line)?;
            self.set_driver(id, Driver::PrimaryInput, line)?;
        }
        Ok(())
    }

    fn parse_instance(&mut self, cell_type: String, line: usize) -> Result<(), NetlistError> {
        if !self.lib.has_cell(&cell_type) {
            return err(
                line,
                format!("unknown cell type {cell_type}; add it to a direction file"),
            );
        }
        if self.is_punct('#') {
            return err(
                line,
                format!("parameterized instance of {cell_type} unsupported"),
            );
        }
        let name = self.ident()?;
        self.expect_punct('(')?;
        let mut conns = BTreeMap::new();
        let idx = self.g.instances.len();
        while !self.is_punct(')') {
            let pline = self.line();
            if !self.is_punct('.') {
                return err(
                    pline,
                    format!("instance {name}: positional port connections unsupported"),
                );
            }
            self.next()?;
            let port = self.ident()?;
            let Some(dir) = self.lib.port_dir(&cell_type, &port) else {
                return err(pline, format!("cell {cell_type} has no port {port}"));
            };
            self.expect_punct('(')?;
            let bits = if self.is_punct(')') {
                Vec::new()
            } else {
                self.expr()?
            };
            self.expect_punct(')')?;
            if bits.len() > 1 {
                return err(
                    pline,
                    format!(
                        "instance {name}: port {port} connected to {} bits",
                        bits.len()
                    ),
                );
            }
            if conns.contains_key(&port) {
                return err(
                    pline,
                    format!("instance {name}: port {port} connected twice"),
                );
            }
            if let Some(Some(net)) = bits.first() {
                if dir == PortDir::Output {
                    self.set_driver(*net, Driver::Instance(idx), pline)?;
                }
                conns.insert(port, (*net, dir));
            }
            if self.is_punct(',') {
                self.next()?;
            }
        }
        self.next()?;
        self.expect_punct(';')?;
        self.g.instances.push(Instance {
            name,
            cell_type,
            conns,
        });
        Ok(())
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) | Tok::Number(s) => format!("`{s}`"),
        Tok::Punct(c) => format!("'{c}'"),
    }
}

fn step_range(from: i64, to: i64) -> Box<dyn Iterator<Item = i64>> {
    if from >= to {
        Box::new((to..=from).rev())
    } else {
        Box::new(from..=to)
    }
}

/// Bit names of a declaration, most-significant first.
fn bit_names(name: &str, range: Option<(i64, i64)>) -> Vec<String> {
    match range {
        None => vec![name.to_string()],
        Some((msb, lsb)) => step_range(msb, lsb)
            .map(|i| format!("{name}[{i}]"))
            .collect(),
    }
}

fn constant_width(s: &str) -> usize {
    match s.split_once('\'') {
        Some((w, _)) if !w.is_empty() => w.parse().unwrap_or(1).max(1),
        _ => 1,
    }
}

pub fn parse_netlist(text: &str) -> Result<NetGraph, NetlistError> {
    parse_netlist_with(text, &CellLibrary::builtin())
}

pub fn parse_netlist_with(text: &str, lib: &CellLibrary) -> Result<NetGraph, NetlistError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        lib,
        g: NetGraph::default(),
        decls: HashMap::new(),
        driver_line: Vec::new(),
    };
    p.parse_module()?;
    Ok(p.g)
}

// ---------------------------------------------------------------------------
// Tracing

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceConfig {
    pub root_prefix: String,
    pub depth: u32,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            root_prefix: "sec_".into(),
            depth: 2,
        }
    }
}

/// Root nets and their bounded fan-in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CriticalSet {
    pub roots: BTreeSet<String>,
    /// Member net to the smallest depth at which it was reached.
    pub members: BTreeMap<String, u32>,
    pub depth_limit: u32,
    /// Member net to the roots whose fan-in contains it.
    pub origins: BTreeMap<String, BTreeSet<String>>,
    pub warnings: Vec<String>,
}

impl CriticalSet {
    /// A set whose members are exactly the given roots at depth 0.
    pub fn from_roots<I: IntoIterator<Item = S>, S: Into<String>>(roots: I) -> Self {
        let mut cs = CriticalSet::default();
        for r in roots {
            let r = r.into();
            cs.members.insert(r.clone(), 0);
            cs.origins.insert(r.clone(), BTreeSet::from([r.clone()]));
            cs.roots.insert(r);
        }
        cs
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, net: &str) -> bool {
        self.members.contains_key(net)
    }

    /// Members in the fan-in of any of `roots`.
    pub fn fanin_of<'a>(
        &'a self,
        roots: &'a BTreeSet<String>,
    ) -> impl Iterator<Item = &'a str> + 'a {
        self.origins
            .iter()
            .filter(|(_, o)| !o.is_disjoint(roots))
            .map(|(m, _)| m.as_str())
    }
}

/// Depth-bounded 0-1 BFS from one root.
fn bfs(g: &NetGraph, root: usize, limit: u32) -> BTreeMap<usize, u32> {
    let mut dist: BTreeMap<usize, u32> = BTreeMap::new();
    let mut dq = VecDeque::new();
    dist.insert(root, 0);
    dq.push_back((root, 0));
    while let Some((n, d)) = dq.pop_front() {
        if dist.get(&n).is_some_and(|&best| best < d) {
            continue;
        }
        for (up, cost) in g.upstream(n) {
            let nd = d + cost;
            if nd > limit || dist.get(&up).is_some_and(|&best| best <= nd) {
                continue;
            }
            dist.insert(up, nd);
            if cost == 0 {
                dq.push_front((up, nd));
            } else {
                dq.push_back((up, nd));
            }
        }
    }
    dist
}

pub fn trace_fanin(g: &NetGraph, cfg: &TraceConfig) -> CriticalSet {
    let mut cs = CriticalSet {
        depth_limit: cfg.depth,
        ..Default::default()
    };
    let roots: Vec<usize> = (0..g.nets.len())
        .filter(|&i| g.nets[i].starts_with(&cfg.root_prefix))
        .collect();
    if roots.is_empty() {
        cs.warnings.push(format!(
            "no net name starts with the root prefix {:?}",
            cfg.root_prefix
        ));
        return cs;
    }
    for &r in &roots {
        let root_name = &g.nets[r];
        cs.roots.insert(root_name.clone());
        for (n, d) in bfs(g, r, cfg.depth) {
            let name = &g.nets[n];
            let e = cs.members.entry(name.clone()).or_insert(d);
            *e = (*e).min(d);
            cs.origins
                .entry(name.clone())
                .or_default()
                .insert(root_name.clone());
        }
    }
    cs
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            q.push('\\');
        }
        q.push(c);
    }
    q.push('"');
    q
}

/// Graphviz rendering: one node per member, one edge per traversed step.
/// Alias steps are dashed.
pub fn emit_dot(cs: &CriticalSet, g: &NetGraph) -> String {
    let mut s = String::from("digraph fanin {\n  rankdir=RL;\n");
    for (m, d) in &cs.members {
        let shape = if cs.roots.contains(m) {
            "doubleoctagon"
        } else {
            "ellipse"
        };
        writeln!(
            s,
            "  {} [label={}, shape={shape}];",
            quote(m),
            quote(&format!("{m}\\nd={d}"))
        )
        .unwrap();
    }
    let mut edges: BTreeSet<(&str, &str, bool)> = BTreeSet::new();
    for (m, &d) in &cs.members {
        let Some(id) = g.net_id(m) else { continue };
        for (up, cost) in g.upstream(id) {
            let target = &g.nets[up];
            if d + cost <= cs.depth_limit && cs.contains(target) {
                edges.insert((m.as_str(), target.as_str(), cost == 0));
            }
        }
    }
    for (a, b, alias) in edges {
        let style = if alias { " [style=dashed]" } else { "" };
        writeln!(s, "  {} -> {}{style};", quote(a), quote(b)).unwrap();
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CHAIN: &str = "module top (a, sec_c);\n  input a;\n  output sec_c;\n  wire b;\n  \
                         INV u1 (.A(a), .Y(b));\n  INV u2 (.A(b), .Y(sec_c));\nendmodule\n";

    fn cfg(depth: u32) -> TraceConfig {
        TraceConfig {
            root_prefix: "sec_".into(),
            depth,
        }
    }

    #[test]
    fn single_nand() {
        let g = parse_netlist(
            "module m(a,b,y); input a, b; output y;\nNAND2 u1 (.A(a), .B(b), .Y(y));\nendmodule",
        )
        .unwrap();
        assert_eq!(g.instances.len(), 1);
        assert_eq!(g.nets.len(), 3);
        assert_eq!(g.driver(g.net_id("y").unwrap()), Some(Driver::Instance(0)));
    }

    #[test]
    fn vector_assign_expands_per_bit() {
        let g = parse_netlist(
            "module m(key); input [3:0] key;\nwire [1:0] k;\nassign k = key[1:0];\nendmodule",
        )
        .unwrap();
        let id = |n: &str| g.net_id(n).unwrap();
        assert_eq!(g.driver(id("k[0]")), Some(Driver::Alias(id("key[0]"))));
        assert_eq!(g.driver(id("k[1]")), Some(Driver::Alias(id("key[1]"))));
        assert_eq!(g.alias_count(), 2);
    }

    #[test]
    fn behavioral_rejected() {
        let e = parse_netlist("module m(a); input a;\nreg q;\nalways @(a) q = a;\nendmodule")
            .unwrap_err();
        assert!(
            e.message.contains("behavioral construct unsupported"),
            "{e}"
        );
        assert_eq!(e.line, 2);
        let e =
            parse_netlist("module m(a,b,y); input a,b; output y;\nassign y = a & b;\nendmodule")
                .unwrap_err();
        assert!(
            e.message.contains("behavioral construct unsupported"),
            "{e}"
        );
    }

    #[test]
    fn undeclared_and_multi_driver() {
        let e =
            parse_netlist("module m(a); input a;\nINV u (.A(a), .Y(z));\nendmodule").unwrap_err();
        assert!(e.message.contains("z is not declared"));
        let e = parse_netlist(
            "module m(a); input a; wire y;\nINV u (.A(a), .Y(y));\nBUF v (.A(a), .Y(y));\nendmodule",
        )
        .unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("multiple drivers"));
    }

    #[test]
    fn chain_depths() {
        let g = parse_netlist(CHAIN).unwrap();
        let one = trace_fanin(&g, &cfg(1));
        assert_eq!(
            one.members,
            BTreeMap::from([("sec_c".into(), 0), ("b".into(), 1)])
        );
        let two = trace_fanin(&g, &cfg(2));
        assert_eq!(
            two.members,
            BTreeMap::from([("sec_c".into(), 0), ("b".into(), 1), ("a".into(), 2)])
        );
    }

    #[test]
    fn clock_pins_not_followed() {
        let g = parse_netlist(
            "module m(d, clk); input d, clk; wire sec_q;\nDFF r (.D(d), .CLK(clk), .Q(sec_q));\nendmodule",
        )
        .unwrap();
        let cs = trace_fanin(&g, &cfg(3));
        assert!(cs.contains("d"));
        assert!(!cs.contains("clk"));
    }

    #[test]
    fn aliases_are_free() {
        let g = parse_netlist(
            "module m(a); input a; wire b, c, sec_r;\nINV u (.A(a), .Y(b));\nassign c = b;\nassign sec_r = c;\nendmodule",
        )
        .unwrap();
        let cs = trace_fanin(&g, &cfg(1));
        assert_eq!(cs.members["b"], 0);
        assert_eq!(cs.members["a"], 1);
        let dot = emit_dot(&cs, &g);
        assert_eq!(dot.matches("style=dashed").count(), 2);
    }

    #[test]
    fn no_roots_warns() {
        let g = parse_netlist(CHAIN).unwrap();
        let cs = trace_fanin(
            &g,
            &TraceConfig {
                root_prefix: "key_".into(),
                depth: 2,
            },
        );
        assert!(cs.is_empty());
        assert_eq!(cs.warnings.len(), 1);
    }

    #[test]
    fn dot_shapes() {
        let g = parse_netlist(CHAIN).unwrap();
        let empty = emit_dot(&CriticalSet::default(), &g);
        assert_eq!(empty, "digraph fanin {\n  rankdir=RL;\n}\n");
        let dot = emit_dot(&trace_fanin(&g, &cfg(1)), &g);
        assert_eq!(dot.matches("label=").count(), 2);
        assert_eq!(dot.matches(" -> ").count(), 1);
        assert_eq!(dot, emit_dot(&trace_fanin(&g, &cfg(1)), &g));
    }

    #[test]
    fn direction_file_extends_library() {
        let mut lib = CellLibrary::builtin();
        lib.extend_from_text("# custom\nAOI21 A1:in A2:in B:in Y:out\n")
            .unwrap();
        let g = parse_netlist_with(
            "module m(a,b,c); input a,b,c; wire sec_y;\nAOI21 u (.A1(a), .A2(b), .B(c), .Y(sec_y));\nendmodule",
            &lib,
        )
        .unwrap();
        assert_eq!(trace_fanin(&g, &cfg(1)).len(), 4);
        assert!(lib.extend_from_text("X A:sideways").is_err());
    }

    /// Random layered netlist over the built-in two-input gates.
    fn random_netlist(seed: u64, gates: usize) -> String {
        named_netlist(seed, gates, "n")
    }

    /// Same topology as `random_netlist`, non-root nets named `<stem><k>`.
    fn named_netlist(seed: u64, gates: usize, stem: &str) -> String {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut s = String::from("module r(i0, i1, i2);\ninput i0, i1, i2;\n");
        let mut nets: Vec<String> = vec!["i0".into(), "i1".into(), "i2".into()];
        for k in 0..gates {
            let out = if rng.gen_bool(0.2) {
                format!("sec_n{k}")
            } else {
                format!("{stem}{k}")
            };
            let a = nets[rng.gen_range(0..nets.len())].clone();
            let b = nets[rng.gen_range(0..nets.len())].clone();
            s += &format!("wire {out};\nNAND2 g{k} (.A({a}), .B({b}), .Y({out}));\n");
            nets.push(out);
        }
        s + "endmodule\n"
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn depth_monotone(seed in any::<u64>(), gates in 5usize..40, n in 0u32..5) {
            let g = parse_netlist(&random_netlist(seed, gates)).unwrap();
            let a = trace_fanin(&g, &cfg(n));
            let b = trace_fanin(&g, &cfg(n + 1));
            for (m, d) in &a.members {
                prop_assert!(*d <= n);
                prop_assert!(b.members.get(m).is_some_and(|e| e <= d));
            }
            for r in &a.roots {
                prop_assert_eq!(a.members.get(r), Some(&0));
            }
        }

        #[test]
        fn renaming_preserves_depth_multiset(seed in any::<u64>(), gates in 5usize..40) {
            let text = random_netlist(seed, gates);
            let a = trace_fanin(&parse_netlist(&text).unwrap(), &cfg(2));
            let b = trace_fanin(&parse_netlist(&named_netlist(seed, gates, "renamed_")).unwrap(), &cfg(2));
            let mut da: Vec<u32> = a.members.values().copied().collect();
            let mut db: Vec<u32> = b.members.values().copied().collect();
            da.sort_unstable();
            db.sort_unstable();
            prop_assert_eq!(da, db);
        }
    }
}
