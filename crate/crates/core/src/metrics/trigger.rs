// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::geom::Rect;
use crate::layout::PlacementGrid;

/// A maximal 4-connected region of open sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriggerSpace {
    pub id: usize,
    /// `(col, row)` pairs in scanline order (row, then column).
    pub sites: Vec<(u32, u32)>,
    pub size: usize,
    /// Bounding box in dbu.
    pub bbox: Rect,
}

impl TriggerSpace {
    /// The first site in scanline order; stable across layouts that differ
    /// elsewhere, so it keys regions when comparing reports.
    pub fn seed(&self) -> (u32, u32) {
        self.sites[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TriggerSpaces {
    pub regions: Vec<TriggerSpace>,
    /// Region size to number of regions of that size.
    pub histogram: BTreeMap<usize, usize>,
}

impl TriggerSpaces {
    pub fn open_sites(&self) -> usize {
        self.histogram.iter().map(|(s, c)| s * c).sum()
    }

    pub fn largest(&self) -> usize {
        self.histogram.keys().next_back().copied().unwrap_or(0)
    }
}

/// Breadth-first labelling of open (empty or filler) sites. Region ids follow
/// the scanline order of each region's first site.
pub fn trigger_spaces(grid: &PlacementGrid) -> TriggerSpaces {
    let (cols, rows) = (grid.cols, grid.rows);
    let open: Vec<bool> = grid.states().iter().map(|s| s.is_open()).collect();
    let mut seen = vec![false; open.len()];
    let mut out = TriggerSpaces::default();
    let mut queue = VecDeque::new();
    for start in 0..open.len() {
        if !open[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut sites = Vec::new();
        while let Some(k) = queue.pop_front() {
            let (c, r) = (k % cols, k / cols);
            sites.push((c as u32, r as u32));
            let mut visit = |n: usize| {
                if open[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if c > 0 {
                visit(k - 1);
            }
            if c + 1 < cols {
                visit(k + 1);
            }
            if r > 0 {
                visit(k - cols);
            }
            if r + 1 < rows {
                visit(k + cols);
            }
        }
        sites.sort_unstable_by_key(|&(c, r)| (r, c));
        let bbox = sites
            .iter()
            .map(|&(c, r)| grid.site_rect(c as usize, r as usize))
            .reduce(|a, b| a.union(&b))
            .expect("region has a site");
        let size = sites.len();
        *out.histogram.entry(size).or_insert(0) += 1;
        out.regions.push(TriggerSpace {
            id: out.regions.len(),
            sites,
            size,
            bbox,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(cols: usize, rows: usize, open: impl Fn(usize, usize) -> bool) -> PlacementGrid {
        let bits: Vec<bool> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (c, r)))
            .map(|(c, r)| open(c, r))
            .collect();
        PlacementGrid::from_open_bitmap(cols, rows, &bits)
    }

    #[test]
    fn empty_grid_is_one_region() {
        let t = trigger_spaces(&grid(4, 4, |_, _| true));
        assert_eq!(t.regions.len(), 1);
        assert_eq!(t.regions[0].size, 16);
        assert_eq!(t.regions[0].bbox, Rect::new(0, 0, 4, 4));
    }

    #[test]
    fn checkerboard_has_no_diagonal_links() {
        let t = trigger_spaces(&grid(4, 4, |c, r| (c + r) % 2 == 0));
        assert_eq!(t.regions.len(), 8);
        assert_eq!(t.histogram, BTreeMap::from([(1, 8)]));
    }

    #[test]
    fn ids_follow_scanline_seeds() {
        // Row 0: O . O ; row 1: . . O: the region seeded at (0,0) wraps around.
        let t = trigger_spaces(&grid(3, 2, |c, r| {
            !(r == 0 && c == 1) && !(r == 1 && c == 2)
        }));
        assert_eq!(t.regions.len(), 2);
        assert_eq!(t.regions[0].seed(), (0, 0));
        assert_eq!(t.regions[0].sites, [(0, 0), (0, 1), (1, 1)]);
        assert_eq!(t.regions[1].seed(), (2, 0));
    }

    proptest! {
        #[test]
        fn occupying_a_site_never_grows_regions(
            bits in proptest::collection::vec(any::<bool>(), 64),
            k in 0usize..64,
        ) {
            let before = trigger_spaces(&PlacementGrid::from_open_bitmap(8, 8, &bits));
            let mut fewer = bits.clone();
            fewer[k] = false;
            let after = trigger_spaces(&PlacementGrid::from_open_bitmap(8, 8, &fewer));
            // Every new region lies inside exactly one old region.
            let mut label = vec![usize::MAX; 64];
            for r in &before.regions {
                for &(c, row) in &r.sites {
                    label[row as usize * 8 + c as usize] = r.id;
                }
            }
            let mut used = vec![0usize; before.regions.len()];
            for r in &after.regions {
                let (c, row) = r.sites[0];
                let parent = label[row as usize * 8 + c as usize];
                prop_assert!(r.sites.iter().all(|&(c, row)| label[row as usize * 8 + c as usize] == parent));
                used[parent] += r.size;
            }
            for (p, &u) in before.regions.iter().zip(&used) {
                prop_assert!(u <= p.size);
            }
            prop_assert_eq!(before.open_sites() - after.open_sites(), usize::from(bits[k]));
        }
    }
}
