// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::{ParseError, ParseResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerMapEntry {
    pub gds_layer: i16,
    pub gds_datatype: i16,
    /// 1-based source line.
    pub line: usize,
}

/// Layer name and purpose to GDSII `(layer, datatype)`.
///
/// Lines read `<layerName> <purpose> <gdsLayer> <gdsDatatype>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LayerMap {
    entries: BTreeMap<(String, String), LayerMapEntry>,
}

impl LayerMap {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn insert(&mut self, name: &str, purpose: &str, layer: i16, datatype: i16) {
        self.entries.insert(
            (name.to_string(), purpose.to_string()),
            LayerMapEntry {
                gds_layer: layer,
                gds_datatype: datatype,
                line: 0,
            },
        );
    }

    /// GDSII numbers for a layer, preferring the `drawing` purpose.
    pub fn lookup(&self, name: &str) -> Option<(i16, i16)> {
        let key = (name.to_string(), "drawing".to_string());
        self.entries
            .get(&key)
            .or_else(|| {
                self.entries
                    .range((name.to_string(), String::new())..)
                    .take_while(|((n, _), _)| n == name)
                    .map(|(_, e)| e)
                    .next()
            })
            .map(|e| (e.gds_layer, e.gds_datatype))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &LayerMapEntry)> {
        self.entries
            .iter()
            .map(|((n, p), e)| (n.as_str(), p.as_str(), e))
    }

    /// Layer names in sorted order, each listed once.
    pub fn layer_names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.entries.keys().map(|(n, _)| n.as_str()).collect();
        v.dedup();
        v
    }

    pub fn to_text(&self) -> String {
        self.iter()
            .map(|(n, p, e)| format!("{n} {p} {} {}\n", e.gds_layer, e.gds_datatype))
            .collect()
    }
}

pub fn parse_layermap(text: &str) -> ParseResult<LayerMap> {
    let mut map = LayerMap::default();
    let mut owners: BTreeMap<(i16, i16), (String, usize)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let cols: Vec<&str> = body.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != 4 {
            return Err(ParseError::new(
                line,
                format!(
                    "expected 4 columns (name purpose layer datatype), found {}",
                    cols.len()
                ),
            ));
        }
        let num = |s: &str, what: &str| {
            s.parse::<i16>()
                .map_err(|_| {
                    ParseError::new(line, format!("{what} {s:?} is not an integer in 0..32767"))
                })
                .and_then(|v| {
                    if v < 0 {
                        Err(ParseError::new(line, format!("{what} {v} is negative")))
                    } else {
                        Ok(v)
                    }
                })
        };
        let entry = LayerMapEntry {
            gds_layer: num(cols[2], "GDS layer")?,
            gds_datatype: num(cols[3], "GDS datatype")?,
            line,
        };
        let key = (cols[0].to_string(), cols[1].to_string());
        if let Some(prev) = map.entries.get(&key) {
            if (prev.gds_layer, prev.gds_datatype) != (entry.gds_layer, entry.gds_datatype) {
                return Err(ParseError::new(
                    line,
                    format!(
                        "{} {} maps to {}/{} on line {} but {}/{} on line {line}",
                        key.0,
                        key.1,
                        prev.gds_layer,
                        prev.gds_datatype,
                        prev.line,
                        entry.gds_layer,
                        entry.gds_datatype
                    ),
                ));
            }
            continue;
        }
        let nums = (entry.gds_layer, entry.gds_datatype);
        if let Some((other, other_line)) = owners.get(&nums) {
            if other != &key.0 {
                return Err(ParseError::new(
                    line,
                    format!(
                        "{}/{} is assigned to {other} on line {other_line} and to {} on line {line}",
                        nums.0, nums.1, key.0
                    ),
                ));
            }
        }
        owners.insert(nums, (key.0.clone(), line));
        map.entries.insert(key, entry);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry() {
        let m = parse_layermap("metal1 drawing 10 0\n").unwrap();
        assert_eq!(m.lookup("metal1"), Some((10, 0)));
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn comments_only() {
        assert!(parse_layermap("# nothing\n\n   # here\n")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn duplicates() {
        let ok = parse_layermap("metal1 drawing 10 0\nmetal1 drawing 10 0\n").unwrap();
        assert_eq!(ok.len(), 1);
        let err = parse_layermap("metal1 drawing 10 0\n# x\nmetal1 drawing 11 0\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(
            err.message.contains("line 1") && err.message.contains("line 3"),
            "{err}"
        );
    }

    #[test]
    fn bad_number_reports_line() {
        let err = parse_layermap("metal1 drawing 10 0\nmetal2 drawing ten 0\n").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn purpose_preference_and_injectivity() {
        let m = parse_layermap("metal1 pin 10 2\nmetal1 drawing 10 0\n").unwrap();
        assert_eq!(m.lookup("metal1"), Some((10, 0)));
        assert!(parse_layermap("metal1 drawing 10 0\nmetal2 drawing 10 0\n").is_err());
        assert_eq!(
            parse_layermap(&m.to_text()).unwrap().lookup("metal1"),
            Some((10, 0))
        );
    }
}
