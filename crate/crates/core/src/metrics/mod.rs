// SPDX-License-Identifier: Apache-2.0

//! Attack-surface metrics over a built `LayoutDb`.

mod blockage;
mod distance;
mod trigger;

pub use blockage::{
    brute_distance, combine, net_blockage, BlockageConfig, BlockageReport, DesignBlockage,
    Fraction, NetBlockage, OpenRun,
};
pub use distance::{
    net_length_stats, route_distance, HeatCell, Heatmap, HeatmapBins, NetLengthStats,
    RouteDistanceMatrix, RouteEntry, StatsError,
};
pub use trigger::{trigger_spaces, TriggerSpace, TriggerSpaces};

/// Serde codec for sigma values: finite values are plain numbers, infinities
/// are the strings `"inf"` and `"-inf"` (JSON has no infinity literal).
pub mod sigma_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad sigma {t:?}"))),
        }
    }
}
