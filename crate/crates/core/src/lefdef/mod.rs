// SPDX-License-Identifier: Apache-2.0

//! LEF, DEF and layer-map readers for the subset the metrics consume.
//!
//! Constructs outside the subset are skipped and counted as warnings rather
//! than rejected; real tool output carries many statements that have no
//! bearing on placement occupancy or routed geometry.

mod def;
mod layermap;
mod lef;

pub use def::{
    parse_def, write_def, Component, DefFile, FloorplanDef, NetPin, PlacementStatus, RoutedNet,
    Row, Segment, ViaUse,
};
pub use layermap::{parse_layermap, LayerMap, LayerMapEntry};
pub use lef::{
    parse_lef, write_lef, Direction, LayerKind, Lef, Macro, MacroPin, Site, TechLayer, ViaDef,
    ViaRule,
};

use thiserror::Error;

use crate::geom::Coord;

/// A parse failure with the 1-based source line it was detected on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

pub type ParseResult<T> = Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub line: usize,
}

/// Splits LEF/DEF text into tokens. `;`, `(` and `)` are always separate
/// tokens; `#` starts a comment; double-quoted strings are single tokens
/// (quotes stripped).
pub(crate) fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c == b'#' {
                break;
            } else if c == b'"' {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j] != b'"' {
                    j += 1;
                }
                out.push(Token {
                    text: &line[start..j],
                    line: line_no,
                });
                i = j + 1;
            } else if matches!(c, b';' | b'(' | b')') {
                out.push(Token {
                    text: &line[i..i + 1],
                    line: line_no,
                });
                i += 1;
            } else {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && !matches!(bytes[i], b';' | b'(' | b')')
                {
                    i += 1;
                }
                out.push(Token {
                    text: &line[start..i],
                    line: line_no,
                });
            }
        }
    }
    out
}

/// Token cursor shared by the LEF and DEF readers.
pub(crate) struct Tokens<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
    pub warnings: Vec<String>,
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str) -> Self {
        Tokens {
            toks: tokenize(text),
            pos: 0,
            warnings: Vec::new(),
        }
    }

    pub fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.text)
    }

    pub fn peek_at(&self, ahead: usize) -> Option<&'a str> {
        self.toks.get(self.pos + ahead).map(|t| t.text)
    }

    pub fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |t| t.line)
    }

    pub fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line(), message)
    }

    pub fn next(&mut self) -> ParseResult<&'a str> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(t.text)
    }

    pub fn expect(&mut self, want: &str) -> ParseResult<()> {
        let line = self.line();
        let got = self.next()?;
        if got.eq_ignore_ascii_case(want) {
            Ok(())
        } else {
            Err(ParseError::new(
                line,
                format!("expected {want:?}, found {got:?}"),
            ))
        }
    }

    pub fn eat(&mut self, want: &str) -> bool {
        if self.peek().is_some_and(|t| t.eq_ignore_ascii_case(want)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn int(&mut self) -> ParseResult<i64> {
        let line = self.line();
        let t = self.next()?;
        t.parse()
            .map_err(|_| ParseError::new(line, format!("expected integer, found {t:?}")))
    }

    /// Reads a decimal number and scales it to integer units.
    pub fn scaled(&mut self, scale: i64) -> ParseResult<Coord> {
        let line = self.line();
        let t = self.next()?;
        scale_decimal(t, scale)
            .ok_or_else(|| ParseError::new(line, format!("expected number, found {t:?}")))
    }

    /// Skips to and past the next `;`.
    pub fn skip_statement(&mut self) -> ParseResult<()> {
        while self.next()? != ";" {}
        Ok(())
    }

    /// Skips a statement that is outside the supported subset, counting a warning.
    pub fn skip_unsupported(&mut self, context: &str) -> ParseResult<()> {
        let line = self.line();
        let kw = self.peek().unwrap_or("");
        self.warnings.push(format!(
            "line {line}: skipped unsupported {context} statement {kw:?}"
        ));
        self.skip_statement()
    }

    /// Skips everything up to and including `END <name>`.
    pub fn skip_block(&mut self, name: &str) -> ParseResult<()> {
        loop {
            let t = self.next()?;
            if t.eq_ignore_ascii_case("END") && self.peek().is_some_and(|n| n == name) {
                self.pos += 1;
                return Ok(());
            }
        }
    }
}

/// Converts a decimal literal to `value × scale`, rounded half away from zero.
/// Exact for plain decimals; exponent notation goes through f64.
pub(crate) fn scale_decimal(s: &str, scale: i64) -> Option<Coord> {
    if s.contains(['e', 'E']) {
        let v: f64 = s.parse().ok()?;
        return v.is_finite().then(|| (v * scale as f64).round() as Coord);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let digits: i128 = format!("{int_part}{frac_part}").parse().ok()?;
    let denom = 10i128.checked_pow(frac_part.len() as u32)?;
    let num = digits.checked_mul(scale as i128)?;
    let q = (2 * num + denom) / (2 * denom);
    let v = Coord::try_from(q).ok()?;
    Some(if neg { -v } else { v })
}

/// Formats `value / scale` as a short decimal, e.g. `380 / 2000 → "0.19"`.
pub(crate) fn format_scaled(value: Coord, scale: i64) -> String {
    let neg = value < 0;
    let v = value.unsigned_abs();
    let s = scale as u64;
    let int = v / s;
    let mut rem = v % s;
    let mut frac = String::new();
    // Exact when scale is a product of 2s and 5s, which DB units always are.
    let mut guard = 0;
    while rem != 0 && guard < 18 {
        rem *= 10;
        frac.push(char::from(b'0' + (rem / s) as u8));
        rem %= s;
        guard += 1;
    }
    let sign = if neg { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}
