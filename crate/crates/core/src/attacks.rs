// SPDX-License-Identifier: Apache-2.0

//! Viable (critical net, trigger space) pairs per attack.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Coord;
use crate::layout::AttackSpec;
use crate::metrics::{BlockageReport, RouteDistanceMatrix, TriggerSpaces};
use crate::netlist::CriticalSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("attack {attack:?} targets {net:?}, which is not a critical root")]
    UnknownTarget { attack: String, net: String },
    #[error("attack {0:?} appears in only one report")]
    Unpaired(String),
    #[error("sigma threshold must be positive, got {0}")]
    Threshold(f64),
}

/// Trojan timing bound in standard deviations of net length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaThreshold(f64);

impl SigmaThreshold {
    pub fn new(v: f64) -> Result<Self, AttackError> {
        if v > 0.0 {
            Ok(SigmaThreshold(v))
        } else {
            Err(AttackError::Threshold(v))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for SigmaThreshold {
    fn default() -> Self {
        SigmaThreshold(3.0)
    }
}

/// The four attacks used to assess defensive coverage.
pub fn reference_attacks() -> Vec<AttackSpec> {
    let spec = |name: &str, cells, sites, timing| AttackSpec {
        name: name.into(),
        std_cells: cells,
        placement_sites: sites,
        timing_critical: timing,
        target_nets: Vec::new(),
    };
    vec![
        spec("A2 Analog", 2, 20, false),
        spec("A2 Digital", 91, 1444, true),
        spec("Privilege Escalation", 25, 342, true),
        spec("Key Leak", 187, 2553, true),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViablePair {
    pub net: String,
    pub region: usize,
    /// First site of the region in scanline order.
    pub region_seed: (u32, u32),
    pub region_size: usize,
    pub manhattan: Coord,
    #[serde(with = "crate::metrics::sigma_serde")]
    pub sigma: f64,
    pub size_ok: bool,
    pub blockage_ok: bool,
    pub timing_ok: bool,
}

impl ViablePair {
    /// Identity that survives region renumbering between layouts.
    pub fn key(&self) -> (String, (u32, u32)) {
        (self.net.clone(), self.region_seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackViability {
    pub attack: String,
    pub placement_sites: u64,
    pub timing_critical: bool,
    pub count: usize,
    pub pairs: Vec<ViablePair>,
    /// No single region is large enough, but the open sites together are.
    pub splittable: bool,
}

/// Lists the pairs that satisfy the size, blockage and timing conditions.
pub fn enumerate_viable(
    matrix: &RouteDistanceMatrix,
    spaces: &TriggerSpaces,
    blockage: &BlockageReport,
    critical: &CriticalSet,
    attack: &AttackSpec,
    thr: SigmaThreshold,
) -> Result<AttackViability, AttackError> {
    let targets: BTreeSet<String> = attack.target_nets.iter().cloned().collect();
    let allowed: Option<BTreeSet<&str>> = if targets.is_empty() {
        None
    } else {
        for t in &targets {
            if !critical.roots.contains(t) {
                return Err(AttackError::UnknownTarget {
                    attack: attack.name.clone(),
                    net: t.clone(),
                });
            }
        }
        Some(critical.fanin_of(&targets).collect())
    };
    let overall: BTreeMap<&str, bool> = blockage
        .per_net
        .iter()
        .map(|n| (n.net.as_str(), !n.fully_blocked()))
        .collect();
    let need = attack.placement_sites as usize;
    let mut pairs = Vec::new();
    for e in &matrix.entries {
        if allowed
            .as_ref()
            .is_some_and(|a| !a.contains(e.net.as_str()))
        {
            continue;
        }
        let region = &spaces.regions[e.region];
        let size_ok = region.size >= need;
        let blockage_ok = overall.get(e.net.as_str()).copied().unwrap_or(false);
        let timing_ok = !attack.timing_critical || e.sigma <= thr.value();
        if size_ok && blockage_ok && timing_ok {
            pairs.push(ViablePair {
                net: e.net.clone(),
                region: e.region,
                region_seed: region.seed(),
                region_size: region.size,
                manhattan: e.manhattan,
                sigma: e.sigma,
                size_ok,
                blockage_ok,
                timing_ok,
            });
        }
    }
    pairs.sort_by(|a, b| (&a.net, a.region).cmp(&(&b.net, b.region)));
    let splittable = spaces.largest() < need && spaces.open_sites() >= need;
    Ok(AttackViability {
        attack: attack.name.clone(),
        placement_sites: attack.placement_sites,
        timing_critical: attack.timing_critical,
        count: pairs.len(),
        pairs,
        splittable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackDelta {
    pub attack: String,
    pub count_a: usize,
    pub count_b: usize,
    pub delta: i64,
    pub removed: Vec<ViablePair>,
    pub added: Vec<ViablePair>,
}

/// Per-attack change from report `a` (e.g. unprotected) to `b` (protected).
pub fn compare_reports(
    a: &[AttackViability],
    b: &[AttackViability],
) -> Result<Vec<AttackDelta>, AttackError> {
    let names_a: BTreeSet<&str> = a.iter().map(|v| v.attack.as_str()).collect();
    let names_b: BTreeSet<&str> = b.iter().map(|v| v.attack.as_str()).collect();
    if let Some(n) = names_a.symmetric_difference(&names_b).next() {
        return Err(AttackError::Unpaired(n.to_string()));
    }
    let mut out = Vec::new();
    for va in a {
        let vb = b
            .iter()
            .find(|v| v.attack == va.attack)
            .expect("names match");
        let ka: BTreeSet<_> = va.pairs.iter().map(ViablePair::key).collect();
        let kb: BTreeSet<_> = vb.pairs.iter().map(ViablePair::key).collect();
        out.push(AttackDelta {
            attack: va.attack.clone(),
            count_a: va.count,
            count_b: vb.count,
            delta: vb.count as i64 - va.count as i64,
            removed: va
                .pairs
                .iter()
                .filter(|p| !kb.contains(&p.key()))
                .cloned()
                .collect(),
            added: vb
                .pairs
                .iter()
                .filter(|p| !ka.contains(&p.key()))
                .cloned()
                .collect(),
        });
    }
    Ok(out)
}
