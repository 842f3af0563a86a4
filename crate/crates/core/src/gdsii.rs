// SPDX-License-Identifier: Apache-2.0

//! GDSII stream reading, writing and hierarchy flattening.
//!
//! The reader keeps enough of the record stream (raw reals, timestamps,
//! unrecognized records and their positions) that writing a parsed library
//! reproduces the input bytes for canonically ordered streams.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::geom::{Coord, GeomError, Orient, Point, Polygon, Rect, Transform};

/// Record type codes.
pub mod rt {
    pub const HEADER: u8 = 0x00;
    pub const BGNLIB: u8 = 0x01;
    pub const LIBNAME: u8 = 0x02;
    pub const UNITS: u8 = 0x03;
    pub const ENDLIB: u8 = 0x04;
    pub const BGNSTR: u8 = 0x05;
    pub const STRNAME: u8 = 0x06;
    pub const ENDSTR: u8 = 0x07;
    pub const BOUNDARY: u8 = 0x08;
    pub const PATH: u8 = 0x09;
    pub const SREF: u8 = 0x0A;
    pub const AREF: u8 = 0x0B;
    pub const TEXT: u8 = 0x0C;
    pub const LAYER: u8 = 0x0D;
    pub const DATATYPE: u8 = 0x0E;
    pub const WIDTH: u8 = 0x0F;
    pub const XY: u8 = 0x10;
    pub const ENDEL: u8 = 0x11;
    pub const SNAME: u8 = 0x12;
    pub const COLROW: u8 = 0x13;
    pub const NODE: u8 = 0x15;
    pub const STRANS: u8 = 0x1A;
    pub const MAG: u8 = 0x1B;
    pub const ANGLE: u8 = 0x1C;
    pub const PATHTYPE: u8 = 0x21;
    pub const BOX: u8 = 0x2D;
}

/// Data type codes.
pub mod dt {
    pub const NONE: u8 = 0;
    pub const BITARRAY: u8 = 1;
    pub const INT16: u8 = 2;
    pub const INT32: u8 = 3;
    pub const REAL32: u8 = 4;
    pub const REAL64: u8 = 5;
    pub const ASCII: u8 = 6;
}

const MAX_NAME_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum GdsError {
    #[error("truncated record at byte {offset}")]
    Truncated { offset: usize },
    #[error("invalid record length {length} at byte {offset}")]
    BadLength { offset: usize, length: usize },
    #[error("payload of {len} bytes is not a multiple of the data-type width at byte {offset}")]
    PayloadSize { offset: usize, len: usize },
    #[error("stream ended without ENDLIB")]
    MissingEndlib,
    #[error("unexpected record 0x{found:02x} at byte {offset}; expected {expected}")]
    Unexpected {
        offset: usize,
        expected: &'static str,
        found: u8,
    },
    #[error("name {0:?} exceeds {MAX_NAME_LEN} characters")]
    NameTooLong(String),
    #[error("cell reference cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("cell {cell:?} references undefined cell {target:?}")]
    DanglingReference { cell: String, target: String },
    #[error("cell {0:?} not found")]
    MissingCell(String),
    #[error(
        "reference to {target:?} in {cell:?}: magnification {mag} is not supported (only 1.0)"
    )]
    Magnification {
        cell: String,
        target: String,
        mag: f64,
    },
    #[error("reference to {target:?} in {cell:?}: angle {angle} is not a multiple of 90 degrees")]
    Angle {
        cell: String,
        target: String,
        angle: f64,
    },
    #[error("array reference to {target:?} in {cell:?}: displacement does not divide evenly into {cols}x{rows}")]
    ArrayPitch {
        cell: String,
        target: String,
        cols: i16,
        rows: i16,
    },
    #[error("path in {cell:?}: {reason}")]
    Path { cell: String, reason: String },
    #[error("malformed element in {cell:?}: {reason}")]
    Element { cell: String, reason: String },
    #[error("invalid polygon in {cell:?}: {source}")]
    Geometry {
        cell: String,
        #[source]
        source: GeomError,
    },
}

pub type GdsResult<T> = Result<T, GdsError>;

/// One stream record: header fields plus the raw payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GdsRecord {
    pub record_type: u8,
    pub data_type: u8,
    pub payload: Vec<u8>,
}

impl GdsRecord {
    pub fn new(record_type: u8, data_type: u8, payload: Vec<u8>) -> Self {
        GdsRecord {
            record_type,
            data_type,
            payload,
        }
    }

    fn nodata(record_type: u8) -> Self {
        GdsRecord::new(record_type, dt::NONE, Vec::new())
    }

    fn int16(record_type: u8, vals: &[i16]) -> Self {
        GdsRecord::new(
            record_type,
            dt::INT16,
            vals.iter().flat_map(|v| v.to_be_bytes()).collect(),
        )
    }

    fn int32(record_type: u8, vals: &[i32]) -> Self {
        GdsRecord::new(
            record_type,
            dt::INT32,
            vals.iter().flat_map(|v| v.to_be_bytes()).collect(),
        )
    }

    fn ascii(record_type: u8, s: &str) -> Self {
        let mut payload = s.as_bytes().to_vec();
        if payload.len() % 2 == 1 {
            payload.push(0);
        }
        GdsRecord::new(record_type, dt::ASCII, payload)
    }

    fn real(record_type: u8, vals: &[GdsReal]) -> Self {
        GdsRecord::new(
            record_type,
            dt::REAL64,
            vals.iter().flat_map(|v| v.0.to_be_bytes()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        4 + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    fn element_width(data_type: u8) -> usize {
        match data_type {
            dt::INT16 | dt::BITARRAY => 2,
            dt::INT32 | dt::REAL32 => 4,
            dt::REAL64 => 8,
            _ => 1,
        }
    }

    fn as_i16s(&self) -> Vec<i16> {
        self.payload
            .chunks_exact(2)
            .map(|c| i16::from_be_bytes([c[0], c[1]]))
            .collect()
    }

    fn as_i32s(&self) -> Vec<i32> {
        self.payload
            .chunks_exact(4)
            .map(|c| i32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    }

    fn as_reals(&self) -> Vec<GdsReal> {
        match self.data_type {
            dt::REAL32 => self
                .payload
                .chunks_exact(4)
                .map(|c| GdsReal((u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as u64) << 32))
                .collect(),
            _ => self
                .payload
                .chunks_exact(8)
                .map(|c| GdsReal(u64::from_be_bytes(c.try_into().unwrap())))
                .collect(),
        }
    }

    fn as_string(&self) -> String {
        let end = self
            .payload
            .iter()
            .rposition(|&b| b != 0)
            .map_or(0, |i| i + 1);
        String::from_utf8_lossy(&self.payload[..end]).into_owned()
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.len() as u16).to_be_bytes());
        out.push(self.record_type);
        out.push(self.data_type);
        out.extend_from_slice(&self.payload);
    }
}

/// Records tagged with their byte offset in the stream.
pub type OffsetRecords = Vec<(usize, GdsRecord)>;

/// Splits a byte stream into records. Stops after ENDLIB; any bytes after it
/// (tape padding) are returned separately.
pub fn read_records(bytes: &[u8]) -> GdsResult<(OffsetRecords, Vec<u8>)> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if pos + 4 > bytes.len() {
            return Err(GdsError::Truncated { offset: pos });
        }
        let length = u16::from_be_bytes([bytes[pos], bytes[pos + 1]]) as usize;
        if length < 4 || !length.is_multiple_of(2) {
            return Err(GdsError::BadLength {
                offset: pos,
                length,
            });
        }
        if pos + length > bytes.len() {
            return Err(GdsError::Truncated { offset: pos });
        }
        let record_type = bytes[pos + 2];
        let data_type = bytes[pos + 3];
        let payload = bytes[pos + 4..pos + length].to_vec();
        if !payload.len().is_multiple_of(GdsRecord::element_width(data_type)) {
            return Err(GdsError::PayloadSize {
                offset: pos,
                len: payload.len(),
            });
        }
        out.push((pos, GdsRecord::new(record_type, data_type, payload)));
        pos += length;
        if record_type == rt::ENDLIB {
            return Ok((out, bytes[pos..].to_vec()));
        }
    }
    Err(GdsError::MissingEndlib)
}

/// GDSII excess-64 real, stored bit-exact as read from the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GdsReal(pub u64);

impl GdsReal {
    pub fn to_f64(self) -> f64 {
        let bits = self.0;
        let mantissa = bits & 0x00FF_FFFF_FFFF_FFFF;
        if mantissa == 0 {
            return 0.0;
        }
        let exp = ((bits >> 56) & 0x7F) as i32 - 64;
        let sign = if bits >> 63 == 1 { -1.0 } else { 1.0 };
        sign * (mantissa as f64) * 2f64.powi(4 * exp - 56)
    }

    /// Encodes `v`; every finite f64 maps exactly onto the 56-bit mantissa.
    pub fn from_f64(v: f64) -> GdsReal {
        if v == 0.0 || !v.is_finite() {
            return GdsReal(0);
        }
        let sign = if v < 0.0 { 1u64 << 63 } else { 0 };
        let mut m = v.abs();
        let mut exp: i32 = 64;
        while m >= 1.0 {
            m /= 16.0;
            exp += 1;
        }
        while m < 1.0 / 16.0 {
            m *= 16.0;
            exp -= 1;
        }
        let mantissa = (m * (1u64 << 56) as f64) as u64;
        GdsReal(sign | ((exp as u64 & 0x7F) << 56) | mantissa)
    }
}

/// UNITS record: database unit in user units and in meters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GdsUnits {
    pub user: GdsReal,
    pub meters: GdsReal,
}

impl GdsUnits {
    /// Units for a micron user unit with `dbu_per_micron` database units.
    pub fn from_dbu_per_micron(dbu_per_micron: u32) -> Self {
        GdsUnits {
            user: GdsReal::from_f64(1.0 / dbu_per_micron as f64),
            meters: GdsReal::from_f64(1e-6 / dbu_per_micron as f64),
        }
    }

    pub fn dbu_per_micron(&self) -> f64 {
        1e-6 / self.meters.to_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GdsStrans {
    pub reflect_x: bool,
    pub abs_mag: bool,
    pub abs_angle: bool,
    /// Remaining (reserved) flag bits, kept for round trip.
    pub other_bits: u16,
}

impl GdsStrans {
    fn from_bits(bits: u16) -> Self {
        GdsStrans {
            reflect_x: bits & 0x8000 != 0,
            abs_mag: bits & 0x0004 != 0,
            abs_angle: bits & 0x0002 != 0,
            other_bits: bits & !0x8006,
        }
    }

    fn bits(&self) -> u16 {
        (if self.reflect_x { 0x8000 } else { 0 })
            | (if self.abs_mag { 0x0004 } else { 0 })
            | (if self.abs_angle { 0x0002 } else { 0 })
            | self.other_bits
    }
}

/// Placement fields shared by SREF and AREF.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GdsPlacement {
    pub strans: Option<GdsStrans>,
    pub mag: Option<GdsReal>,
    pub angle: Option<GdsReal>,
}

impl GdsPlacement {
    pub fn rotated(reflect_x: bool, angle_deg: u16) -> Self {
        if !reflect_x && angle_deg == 0 {
            return GdsPlacement::default();
        }
        GdsPlacement {
            strans: Some(GdsStrans {
                reflect_x,
                ..Default::default()
            }),
            mag: None,
            angle: (angle_deg != 0).then(|| GdsReal::from_f64(angle_deg as f64)),
        }
    }

    fn orient(&self, cell: &str, target: &str) -> GdsResult<Orient> {
        if let Some(mag) = self.mag {
            let m = mag.to_f64();
            if m != 1.0 {
                return Err(GdsError::Magnification {
                    cell: cell.into(),
                    target: target.into(),
                    mag: m,
                });
            }
        }
        let angle = self.angle.map_or(0.0, GdsReal::to_f64);
        let quarters = angle / 90.0;
        let rounded = quarters.round();
        if (quarters - rounded).abs() > 1e-9 {
            return Err(GdsError::Angle {
                cell: cell.into(),
                target: target.into(),
                angle,
            });
        }
        let reflect = self.strans.as_ref().is_some_and(|s| s.reflect_x);
        Ok(Orient::new(reflect, (rounded as i64).rem_euclid(4) as u8))
    }

    fn records(&self, out: &mut Vec<GdsRecord>) {
        if let Some(s) = &self.strans {
            out.push(GdsRecord::new(
                rt::STRANS,
                dt::BITARRAY,
                s.bits().to_be_bytes().to_vec(),
            ));
        }
        if let Some(m) = self.mag {
            out.push(GdsRecord::real(rt::MAG, &[m]));
        }
        if let Some(a) = self.angle {
            out.push(GdsRecord::real(rt::ANGLE, &[a]));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdsBoundary {
    pub layer: i16,
    pub datatype: i16,
    /// Vertex list as stored (closed: last point repeats the first).
    pub xy: Vec<Point>,
}

impl GdsBoundary {
    pub fn from_polygon(layer: i16, datatype: i16, poly: &Polygon) -> Self {
        let mut xy = poly.vertices().to_vec();
        xy.push(xy[0]);
        GdsBoundary {
            layer,
            datatype,
            xy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdsPath {
    pub layer: i16,
    pub datatype: i16,
    pub pathtype: Option<i16>,
    pub width: Option<i32>,
    pub xy: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdsSref {
    pub name: String,
    pub placement: GdsPlacement,
    pub origin: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdsAref {
    pub name: String,
    pub placement: GdsPlacement,
    pub cols: i16,
    pub rows: i16,
    /// Origin, column-extent point, row-extent point.
    pub xy: [Point; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum GdsElementKind {
    Boundary(GdsBoundary),
    Path(GdsPath),
    Sref(GdsSref),
    Aref(GdsAref),
    /// TEXT, NODE, BOX or anything else: the full record run, kept verbatim.
    Opaque(Vec<GdsRecord>),
}

/// An element plus records the reader did not interpret, each tagged with
/// its position inside the element's record run.
#[derive(Debug, Clone, PartialEq)]
pub struct GdsElement {
    pub kind: GdsElementKind,
    pub extras: Vec<(usize, GdsRecord)>,
}

impl From<GdsElementKind> for GdsElement {
    fn from(kind: GdsElementKind) -> Self {
        GdsElement {
            kind,
            extras: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdsCell {
    pub name: String,
    pub dates: [i16; 12],
    pub elements: Vec<GdsElement>,
}

impl GdsCell {
    pub fn new(name: impl Into<String>) -> Self {
        GdsCell {
            name: name.into(),
            dates: [0; 12],
            elements: Vec::new(),
        }
    }

    pub fn push(&mut self, kind: GdsElementKind) {
        self.elements.push(kind.into());
    }

    pub fn boundaries(&self) -> impl Iterator<Item = &GdsBoundary> {
        self.elements.iter().filter_map(|e| match &e.kind {
            GdsElementKind::Boundary(b) => Some(b),
            _ => None,
        })
    }

    pub fn paths(&self) -> impl Iterator<Item = &GdsPath> {
        self.elements.iter().filter_map(|e| match &e.kind {
            GdsElementKind::Path(p) => Some(p),
            _ => None,
        })
    }

    fn references(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(|e| match &e.kind {
            GdsElementKind::Sref(s) => Some(s.name.as_str()),
            GdsElementKind::Aref(a) => Some(a.name.as_str()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdsLibrary {
    pub version: i16,
    pub dates: [i16; 12],
    pub name: String,
    /// Records between LIBNAME and UNITS (REFLIBS, FONTS, ...), verbatim.
    pub header_extras: Vec<GdsRecord>,
    pub units: GdsUnits,
    pub cells: Vec<GdsCell>,
    /// Bytes after ENDLIB, typically zero padding.
    pub trailing: Vec<u8>,
}

impl GdsLibrary {
    pub fn new(name: impl Into<String>, dbu_per_micron: u32) -> Self {
        GdsLibrary {
            version: 600,
            dates: [0; 12],
            name: name.into(),
            header_extras: Vec::new(),
            units: GdsUnits::from_dbu_per_micron(dbu_per_micron),
            cells: Vec::new(),
            trailing: Vec::new(),
        }
    }

    pub fn cell(&self, name: &str) -> Option<&GdsCell> {
        self.cells.iter().find(|c| c.name == name)
    }

    pub fn dbu_per_micron(&self) -> f64 {
        self.units.dbu_per_micron()
    }

    /// The first cell, in file order, that no other cell references.
    pub fn top_cell(&self) -> Option<&str> {
        let referenced: std::collections::HashSet<&str> =
            self.cells.iter().flat_map(GdsCell::references).collect();
        self.cells
            .iter()
            .map(|c| c.name.as_str())
            .find(|n| !referenced.contains(n))
    }
}

struct Cursor<'a> {
    recs: &'a [(usize, GdsRecord)],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> GdsResult<&'a (usize, GdsRecord)> {
        let r = self.recs.get(self.pos).ok_or(GdsError::MissingEndlib)?;
        self.pos += 1;
        Ok(r)
    }

    fn expect(&mut self, record_type: u8, expected: &'static str) -> GdsResult<&'a GdsRecord> {
        let (offset, rec) = self.next()?;
        if rec.record_type != record_type {
            return Err(GdsError::Unexpected {
                offset: *offset,
                expected,
                found: rec.record_type,
            });
        }
        Ok(rec)
    }
}

fn dates12(rec: &GdsRecord) -> [i16; 12] {
    let mut d = [0i16; 12];
    for (slot, v) in d.iter_mut().zip(rec.as_i16s()) {
        *slot = v;
    }
    d
}

fn xy_points(rec: &GdsRecord) -> Vec<Point> {
    rec.as_i32s()
        .chunks_exact(2)
        .map(|c| Point::new(c[0] as Coord, c[1] as Coord))
        .collect()
}

/// Parses a GDSII stream into a library.
pub fn read_gds(bytes: &[u8]) -> GdsResult<GdsLibrary> {
    let (recs, trailing) = read_records(bytes)?;
    let mut cur = Cursor {
        recs: &recs,
        pos: 0,
    };
    let version = cur
        .expect(rt::HEADER, "HEADER")?
        .as_i16s()
        .first()
        .copied()
        .unwrap_or(0);
    let dates = dates12(cur.expect(rt::BGNLIB, "BGNLIB")?);
    let name = cur.expect(rt::LIBNAME, "LIBNAME")?.as_string();
    let mut header_extras = Vec::new();
    let units = loop {
        let (offset, rec) = cur.next()?;
        match rec.record_type {
            rt::UNITS => {
                let reals = rec.as_reals();
                if reals.len() != 2 {
                    return Err(GdsError::PayloadSize {
                        offset: *offset,
                        len: rec.payload.len(),
                    });
                }
                break GdsUnits {
                    user: reals[0],
                    meters: reals[1],
                };
            }
            rt::BGNSTR | rt::ENDLIB => {
                return Err(GdsError::Unexpected {
                    offset: *offset,
                    expected: "UNITS",
                    found: rec.record_type,
                })
            }
            _ => header_extras.push(rec.clone()),
        }
    };
    let mut cells = Vec::new();
    loop {
        let (offset, rec) = cur.next()?;
        match rec.record_type {
            rt::ENDLIB => break,
            rt::BGNSTR => cells.push(read_cell(&mut cur, dates12(rec))?),
            other => {
                return Err(GdsError::Unexpected {
                    offset: *offset,
                    expected: "BGNSTR or ENDLIB",
                    found: other,
                })
            }
        }
    }
    Ok(GdsLibrary {
        version,
        dates,
        name,
        header_extras,
        units,
        cells,
        trailing,
    })
}

fn read_cell(cur: &mut Cursor, dates: [i16; 12]) -> GdsResult<GdsCell> {
    let name = cur.expect(rt::STRNAME, "STRNAME")?.as_string();
    let mut cell = GdsCell {
        name,
        dates,
        elements: Vec::new(),
    };
    loop {
        let (offset, rec) = cur.next()?;
        match rec.record_type {
            rt::ENDSTR => return Ok(cell),
            rt::BOUNDARY | rt::PATH | rt::SREF | rt::AREF => {
                let el = read_element(cur, rec.record_type, &cell.name)?;
                cell.elements.push(el);
            }
            rt::ENDLIB => {
                return Err(GdsError::Unexpected {
                    offset: *offset,
                    expected: "ENDSTR",
                    found: rec.record_type,
                })
            }
            _ => {
                // Text, node, box or an unknown element: keep the whole run.
                let mut run = vec![rec.clone()];
                if matches!(rec.record_type, rt::TEXT | rt::NODE | rt::BOX) {
                    loop {
                        let (_, r) = cur.next()?;
                        run.push(r.clone());
                        if r.record_type == rt::ENDEL {
                            break;
                        }
                    }
                }
                cell.elements.push(GdsElementKind::Opaque(run).into());
            }
        }
    }
}

fn read_element(cur: &mut Cursor, kind: u8, cell: &str) -> GdsResult<GdsElement> {
    let mut layer = None;
    let mut datatype = None;
    let mut pathtype = None;
    let mut width = None;
    let mut xy: Option<Vec<Point>> = None;
    let mut sname = None;
    let mut placement = GdsPlacement::default();
    let mut colrow = None;
    let mut extras = Vec::new();
    let mut index = 0usize;
    loop {
        let (_, rec) = cur.next()?;
        match rec.record_type {
            rt::ENDEL => break,
            rt::LAYER if kind <= rt::PATH => layer = rec.as_i16s().first().copied(),
            rt::DATATYPE if kind <= rt::PATH => datatype = rec.as_i16s().first().copied(),
            rt::PATHTYPE if kind == rt::PATH => pathtype = rec.as_i16s().first().copied(),
            rt::WIDTH if kind == rt::PATH => width = rec.as_i32s().first().copied(),
            rt::XY => xy = Some(xy_points(rec)),
            rt::SNAME if kind >= rt::SREF => sname = Some(rec.as_string()),
            rt::STRANS if kind >= rt::SREF => {
                let bits = u16::from_be_bytes([rec.payload[0], rec.payload[1]]);
                placement.strans = Some(GdsStrans::from_bits(bits));
            }
            rt::MAG if kind >= rt::SREF => placement.mag = rec.as_reals().first().copied(),
            rt::ANGLE if kind >= rt::SREF => placement.angle = rec.as_reals().first().copied(),
            rt::COLROW if kind == rt::AREF => {
                let v = rec.as_i16s();
                if v.len() == 2 {
                    colrow = Some((v[0], v[1]));
                }
            }
            _ => extras.push((index, rec.clone())),
        }
        index += 1;
    }
    let missing = |what: &str| GdsError::Element {
        cell: cell.into(),
        reason: format!("missing {what}"),
    };
    let xy = xy.ok_or_else(|| missing("XY"))?;
    let kind = match kind {
        rt::BOUNDARY => GdsElementKind::Boundary(GdsBoundary {
            layer: layer.ok_or_else(|| missing("LAYER"))?,
            datatype: datatype.ok_or_else(|| missing("DATATYPE"))?,
            xy,
        }),
        rt::PATH => GdsElementKind::Path(GdsPath {
            layer: layer.ok_or_else(|| missing("LAYER"))?,
            datatype: datatype.ok_or_else(|| missing("DATATYPE"))?,
            pathtype,
            width,
            xy,
        }),
        rt::SREF => GdsElementKind::Sref(GdsSref {
            name: sname.ok_or_else(|| missing("SNAME"))?,
            placement,
            origin: *xy.first().ok_or_else(|| missing("origin"))?,
        }),
        _ => {
            let (cols, rows) = colrow.ok_or_else(|| missing("COLROW"))?;
            if xy.len() != 3 {
                return Err(GdsError::Element {
                    cell: cell.into(),
                    reason: format!("AREF needs 3 XY points, found {}", xy.len()),
                });
            }
            GdsElementKind::Aref(GdsAref {
                name: sname.ok_or_else(|| missing("SNAME"))?,
                placement,
                cols,
                rows,
                xy: [xy[0], xy[1], xy[2]],
            })
        }
    };
    Ok(GdsElement { kind, extras })
}

fn xy_record(points: &[Point]) -> GdsRecord {
    let vals: Vec<i32> = points
        .iter()
        .flat_map(|p| [p.x as i32, p.y as i32])
        .collect();
    GdsRecord::int32(rt::XY, &vals)
}

fn check_name(name: &str) -> GdsResult<()> {
    if name.len() > MAX_NAME_LEN {
        return Err(GdsError::NameTooLong(name.into()));
    }
    Ok(())
}

fn element_records(el: &GdsElement) -> GdsResult<Vec<GdsRecord>> {
    let mut body = Vec::new();
    let start = match &el.kind {
        GdsElementKind::Opaque(run) => return Ok(run.clone()),
        GdsElementKind::Boundary(b) => {
            body.push(GdsRecord::int16(rt::LAYER, &[b.layer]));
            body.push(GdsRecord::int16(rt::DATATYPE, &[b.datatype]));
            body.push(xy_record(&b.xy));
            rt::BOUNDARY
        }
        GdsElementKind::Path(p) => {
            body.push(GdsRecord::int16(rt::LAYER, &[p.layer]));
            body.push(GdsRecord::int16(rt::DATATYPE, &[p.datatype]));
            if let Some(t) = p.pathtype {
                body.push(GdsRecord::int16(rt::PATHTYPE, &[t]));
            }
            if let Some(w) = p.width {
                body.push(GdsRecord::int32(rt::WIDTH, &[w]));
            }
            body.push(xy_record(&p.xy));
            rt::PATH
        }
        GdsElementKind::Sref(s) => {
            check_name(&s.name)?;
            body.push(GdsRecord::ascii(rt::SNAME, &s.name));
            s.placement.records(&mut body);
            body.push(xy_record(&[s.origin]));
            rt::SREF
        }
        GdsElementKind::Aref(a) => {
            check_name(&a.name)?;
            body.push(GdsRecord::ascii(rt::SNAME, &a.name));
            a.placement.records(&mut body);
            body.push(GdsRecord::int16(rt::COLROW, &[a.cols, a.rows]));
            body.push(xy_record(&a.xy));
            rt::AREF
        }
    };
    for (idx, rec) in &el.extras {
        let at = (*idx).min(body.len());
        body.insert(at, rec.clone());
    }
    let mut out = Vec::with_capacity(body.len() + 2);
    out.push(GdsRecord::nodata(start));
    out.extend(body);
    out.push(GdsRecord::nodata(rt::ENDEL));
    Ok(out)
}

/// Serializes a library to a GDSII stream.
pub fn write_gds(lib: &GdsLibrary) -> GdsResult<Vec<u8>> {
    let mut out = Vec::new();
    GdsRecord::int16(rt::HEADER, &[lib.version]).encode(&mut out);
    GdsRecord::int16(rt::BGNLIB, &lib.dates).encode(&mut out);
    GdsRecord::ascii(rt::LIBNAME, &lib.name).encode(&mut out);
    for rec in &lib.header_extras {
        rec.encode(&mut out);
    }
    GdsRecord::real(rt::UNITS, &[lib.units.user, lib.units.meters]).encode(&mut out);
    for cell in &lib.cells {
        check_name(&cell.name)?;
        GdsRecord::int16(rt::BGNSTR, &cell.dates).encode(&mut out);
        GdsRecord::ascii(rt::STRNAME, &cell.name).encode(&mut out);
        for el in &cell.elements {
            for rec in element_records(el)? {
                rec.encode(&mut out);
            }
        }
        GdsRecord::nodata(rt::ENDSTR).encode(&mut out);
    }
    GdsRecord::nodata(rt::ENDLIB).encode(&mut out);
    out.extend_from_slice(&lib.trailing);
    Ok(out)
}

/// Flattened polygons keyed by `(layer, datatype)`, in top-cell coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatGeometry {
    pub layers: BTreeMap<(i16, i16), Vec<Polygon>>,
}

impl FlatGeometry {
    pub fn polygon_count(&self) -> usize {
        self.layers.values().map(Vec::len).sum()
    }
}

/// Converts a flush-ended (pathtype 0) path into one rectangle per segment.
fn path_rects(p: &GdsPath, cell: &str) -> GdsResult<Vec<Rect>> {
    let err = |reason: String| GdsError::Path {
        cell: cell.into(),
        reason,
    };
    if let Some(t) = p.pathtype {
        if t != 0 {
            return Err(err(format!("pathtype {t} unsupported (only flush ends)")));
        }
    }
    let width = p.width.unwrap_or(0).unsigned_abs() as Coord;
    if width % 2 != 0 {
        return Err(err(format!("odd width {width} has no integer half-width")));
    }
    let half = width / 2;
    let mut rects = Vec::new();
    for w in p.xy.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        if a.y == b.y {
            rects.push(Rect::new(a.x, a.y - half, b.x, a.y + half));
        } else if a.x == b.x {
            rects.push(Rect::new(a.x - half, a.y, a.x + half, b.y));
        } else {
            return Err(err(format!("segment {a}-{b} is not axis-parallel")));
        }
    }
    Ok(rects)
}

fn check_acyclic(lib: &GdsLibrary, index: &HashMap<&str, usize>) -> GdsResult<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        lib: &GdsLibrary,
        index: &HashMap<&str, usize>,
        i: usize,
        marks: &mut [Mark],
        stack: &mut Vec<usize>,
    ) -> GdsResult<()> {
        marks[i] = Mark::Active;
        stack.push(i);
        for target in lib.cells[i].references() {
            let j = *index
                .get(target)
                .ok_or_else(|| GdsError::DanglingReference {
                    cell: lib.cells[i].name.clone(),
                    target: target.into(),
                })?;
            match marks[j] {
                Mark::Active => {
                    let from = stack.iter().position(|&k| k == j).unwrap();
                    let mut cycle: Vec<String> = stack[from..]
                        .iter()
                        .map(|&k| lib.cells[k].name.clone())
                        .collect();
                    cycle.push(lib.cells[j].name.clone());
                    return Err(GdsError::Cycle(cycle));
                }
                Mark::New => visit(lib, index, j, marks, stack)?,
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[i] = Mark::Done;
        Ok(())
    }
    let mut marks = vec![Mark::New; lib.cells.len()];
    for i in 0..lib.cells.len() {
        if marks[i] == Mark::New {
            visit(lib, index, i, &mut marks, &mut Vec::new())?;
        }
    }
    Ok(())
}

/// One cell's own shapes, validated once and reused by every instance.
type LeafShapes = Vec<((i16, i16), Polygon)>;

fn leaf_shapes(cell: &GdsCell) -> GdsResult<LeafShapes> {
    let mut out = Vec::new();
    for el in &cell.elements {
        match &el.kind {
            GdsElementKind::Boundary(b) => {
                let poly = Polygon::new(b.xy.clone()).map_err(|source| GdsError::Geometry {
                    cell: cell.name.clone(),
                    source,
                })?;
                out.push(((b.layer, b.datatype), poly));
            }
            GdsElementKind::Path(p) => {
                for r in path_rects(p, &cell.name)? {
                    if !r.is_degenerate() {
                        out.push(((p.layer, p.datatype), r.to_polygon()));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Expands the hierarchy under `top` into top-level polygons.
///
/// Each reference applies reflection, rotation, magnification (1.0 only)
/// and translation, composed down the tree; arrays expand to every
/// column/row instance.
pub fn flatten(lib: &GdsLibrary, top: &str) -> GdsResult<FlatGeometry> {
    let index: HashMap<&str, usize> = lib
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let top_idx = *index
        .get(top)
        .ok_or_else(|| GdsError::MissingCell(top.into()))?;
    check_acyclic(lib, &index)?;
    let mut leaves: Vec<Option<LeafShapes>> = vec![None; lib.cells.len()];
    let mut flat = FlatGeometry::default();
    let mut stack = vec![(top_idx, Transform::IDENTITY)];
    while let Some((i, xf)) = stack.pop() {
        let cell = &lib.cells[i];
        if leaves[i].is_none() {
            leaves[i] = Some(leaf_shapes(cell)?);
        }
        for (key, poly) in leaves[i].as_ref().unwrap() {
            flat.layers
                .entry(*key)
                .or_default()
                .push(poly.transformed(&xf));
        }
        // Push children in reverse so instances come out in file order.
        let mut children = Vec::new();
        for el in &cell.elements {
            match &el.kind {
                GdsElementKind::Sref(s) => {
                    let orient = s.placement.orient(&cell.name, &s.name)?;
                    let local = Transform::new(orient, s.origin);
                    children.push((index[s.name.as_str()], local.then(&xf)));
                }
                GdsElementKind::Aref(a) => {
                    let orient = a.placement.orient(&cell.name, &a.name)?;
                    let pitch_err = || GdsError::ArrayPitch {
                        cell: cell.name.clone(),
                        target: a.name.clone(),
                        cols: a.cols,
                        rows: a.rows,
                    };
                    if a.cols <= 0 || a.rows <= 0 {
                        return Err(pitch_err());
                    }
                    let [o, c, r] = a.xy;
                    let (nc, nr) = (a.cols as Coord, a.rows as Coord);
                    let (cdx, cdy, rdx, rdy) = (c.x - o.x, c.y - o.y, r.x - o.x, r.y - o.y);
                    if cdx % nc != 0 || cdy % nc != 0 || rdx % nr != 0 || rdy % nr != 0 {
                        return Err(pitch_err());
                    }
                    let target = index[a.name.as_str()];
                    for row in 0..nr {
                        for col in 0..nc {
                            let origin = Point::new(
                                o.x + col * cdx / nc + row * rdx / nr,
                                o.y + col * cdy / nc + row * rdy / nr,
                            );
                            children.push((target, Transform::new(orient, origin).then(&xf)));
                        }
                    }
                }
                _ => {}
            }
        }
        stack.extend(children.into_iter().rev());
    }
    Ok(flat)
}
