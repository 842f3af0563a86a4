// SPDX-License-Identifier: Apache-2.0

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::blockage::BlockageReport;
use super::trigger::TriggerSpaces;
use crate::geom::Coord;
use crate::layout::{LayoutDb, PlacementGrid};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("net-length statistics need at least 2 routed nets, found {0}")]
    TooFewNets(usize),
}

/// Population statistics of routed net lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct NetLengthStats {
    pub lengths: Vec<(String, Coord)>,
    pub count: i128,
    /// `Σ L`.
    pub sum: i128,
    /// `Σ L²`.
    pub sum_sq: i128,
}

impl NetLengthStats {
    pub fn from_lengths(lengths: Vec<(String, Coord)>) -> Result<Self, StatsError> {
        if lengths.len() < 2 {
            return Err(StatsError::TooFewNets(lengths.len()));
        }
        let count = lengths.len() as i128;
        let sum = lengths.iter().map(|(_, l)| *l as i128).sum();
        let sum_sq = lengths
            .iter()
            .map(|(_, l)| (*l as i128) * (*l as i128))
            .sum();
        Ok(NetLengthStats {
            lengths,
            count,
            sum,
            sum_sq,
        })
    }

    pub fn mean_exact(&self) -> Ratio<i128> {
        Ratio::new(self.sum, self.count)
    }

    /// `(nΣL² − (ΣL)²) / n²`.
    pub fn variance_exact(&self) -> Ratio<i128> {
        Ratio::new(
            self.count * self.sum_sq - self.sum * self.sum,
            self.count * self.count,
        )
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.count as f64
    }

    pub fn stddev(&self) -> f64 {
        ((self.count * self.sum_sq - self.sum * self.sum) as f64).sqrt() / self.count as f64
    }

    /// `(m − μ) / σ`, computed as `(n·m − ΣL) / √(nΣL² − (ΣL)²)` so the only
    /// rounding is in the final division. With σ = 0 the value is 0 at the
    /// mean and +∞ elsewhere (−∞ below it).
    pub fn sigma(&self, m: Coord) -> f64 {
        let num = self.count * m as i128 - self.sum;
        let disc = self.count * self.sum_sq - self.sum * self.sum;
        if disc == 0 {
            return match num.signum() {
                0 => 0.0,
                1 => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            };
        }
        num as f64 / (disc as f64).sqrt()
    }
}

/// Centerline lengths of routed regular nets (special nets optional).
pub fn net_length_stats(
    db: &LayoutDb,
    include_special: bool,
) -> Result<NetLengthStats, StatsError> {
    let lengths = db
        .nets
        .iter()
        .filter(|n| (include_special || !n.special) && n.has_routing())
        .map(|n| (n.name.clone(), n.length))
        .collect();
    NetLengthStats::from_lengths(lengths)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteEntry {
    pub net: String,
    pub region: usize,
    pub manhattan: Coord,
    #[serde(with = "super::sigma_serde")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatCell {
    pub size_bin: usize,
    pub sigma_bin: usize,
    pub count: u64,
    pub fraction: f64,
}

/// Region-size × sigma histogram, normalized per size column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    /// Lower edges of the size bins; bin `i` is `[edges[i], edges[i+1])`.
    pub size_edges: Vec<u64>,
    /// Upper edges of the sigma bins; bin `i` is `(edges[i-1], edges[i]]`
    /// and the last bin is `> edges[last]`.
    pub sigma_edges: Vec<f64>,
    pub cells: Vec<HeatCell>,
}

impl Heatmap {
    pub fn size_label(&self, i: usize) -> String {
        match self.size_edges.get(i + 1) {
            Some(hi) => format!("{}-{}", self.size_edges[i], hi - 1),
            None => format!("{}+", self.size_edges[i]),
        }
    }

    pub fn sigma_label(&self, i: usize) -> String {
        let e = &self.sigma_edges;
        if i == 0 {
            format!("<={}", e[0])
        } else if i == e.len() {
            format!(">{}", e[i - 1])
        } else {
            format!("{}-{}", e[i - 1], e[i])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapBins {
    pub size_edges: Vec<u64>,
    pub sigma_edges: Vec<f64>,
}

impl HeatmapBins {
    /// Powers of two covering `max_size`, and sigma edges 0.5, 1, 2, 3.
    pub fn default_for(max_size: usize) -> Self {
        let mut size_edges = vec![1u64];
        while (*size_edges.last().unwrap() * 2) as usize <= max_size.max(1) {
            size_edges.push(size_edges.last().unwrap() * 2);
        }
        HeatmapBins {
            size_edges,
            sigma_edges: vec![0.5, 1.0, 2.0, 3.0],
        }
    }

    fn size_bin(&self, size: usize) -> usize {
        self.size_edges
            .partition_point(|&e| e as usize <= size)
            .saturating_sub(1)
    }

    fn sigma_bin(&self, s: f64) -> usize {
        self.sigma_edges.partition_point(|&e| e < s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteDistanceMatrix {
    pub entries: Vec<RouteEntry>,
    pub heatmap: Heatmap,
    pub warnings: Vec<String>,
}

impl RouteDistanceMatrix {
    pub fn entry(&self, net: &str, region: usize) -> Option<&RouteEntry> {
        self.entries
            .iter()
            .find(|e| e.net == net && e.region == region)
    }
}

/// Minimum Manhattan distance between every (unblocked critical net, trigger
/// space) pair, normalized by the net-length distribution.
pub fn route_distance(
    grid: &PlacementGrid,
    spaces: &TriggerSpaces,
    blockage: &BlockageReport,
    stats: &NetLengthStats,
    bins: &HeatmapBins,
) -> RouteDistanceMatrix {
    let mut warnings = Vec::new();
    let nets: Vec<_> = blockage
        .per_net
        .iter()
        .filter(|n| !n.fully_blocked() && !n.open_points.is_empty())
        .collect();
    if nets.is_empty() {
        warnings.push("no unblocked critical nets; route-distance matrix is empty".to_string());
    }
    let pairs: Vec<(usize, usize)> = (0..nets.len())
        .flat_map(|n| (0..spaces.regions.len()).map(move |r| (n, r)))
        .collect();
    let entries: Vec<RouteEntry> = pairs
        .par_iter()
        .map(|&(n, r)| {
            let nb = nets[n];
            let region = &spaces.regions[r];
            let m = region
                .sites
                .iter()
                .map(|&(c, row)| {
                    nb.distance_to(&grid.site_rect(c as usize, row as usize))
                        .expect("unblocked net has open points")
                })
                .min()
                .expect("region has a site");
            RouteEntry {
                net: nb.net.clone(),
                region: region.id,
                manhattan: m,
                sigma: stats.sigma(m),
            }
        })
        .collect();

    let n_size = bins.size_edges.len();
    let n_sigma = bins.sigma_edges.len() + 1;
    let mut counts = vec![0u64; n_size * n_sigma];
    for e in &entries {
        let sb = bins.size_bin(spaces.regions[e.region].size);
        counts[sb * n_sigma + bins.sigma_bin(e.sigma)] += 1;
    }
    let mut cells = Vec::new();
    for sb in 0..n_size {
        let col: u64 = counts[sb * n_sigma..(sb + 1) * n_sigma].iter().sum();
        if col == 0 {
            continue;
        }
        for gb in 0..n_sigma {
            let count = counts[sb * n_sigma + gb];
            cells.push(HeatCell {
                size_bin: sb,
                sigma_bin: gb,
                count,
                fraction: count as f64 / col as f64,
            });
        }
    }
    RouteDistanceMatrix {
        entries,
        heatmap: Heatmap {
            size_edges: bins.size_edges.clone(),
            sigma_edges: bins.sigma_edges.clone(),
            cells,
        },
        warnings,
    }
}
