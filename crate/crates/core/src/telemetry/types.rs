use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TelemetryError;

/// A cell within a base station, e.g. `A-2` for the second cell of station A.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub base_station: String,
    pub cell_index: u32,
}

impl CellId {
    pub fn new(base_station: impl Into<String>, cell_index: u32) -> Result<Self, TelemetryError> {
        let base_station = base_station.into();
        if base_station.is_empty()
            || cell_index == 0
            || base_station.contains(|c: char| c == '-' || c == ',' || c.is_whitespace())
        {
            return Err(TelemetryError::InvalidId(format!("{base_station}-{cell_index}")));
        }
        Ok(Self { base_station, cell_index })
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.base_station, self.cell_index)
    }
}

impl FromStr for CellId {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (base, idx) = s.rsplit_once('-').ok_or_else(|| TelemetryError::InvalidId(s.to_string()))?;
        let idx = idx.parse().map_err(|_| TelemetryError::InvalidId(s.to_string()))?;
        CellId::new(base, idx)
    }
}

impl Serialize for CellId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceKind {
    Total,
    Voice,
    Data,
    Fwa,
}

impl SliceKind {
    pub const ALL: [SliceKind; 4] = [SliceKind::Total, SliceKind::Voice, SliceKind::Data, SliceKind::Fwa];
    pub const SERVICES: [SliceKind; 3] = [SliceKind::Voice, SliceKind::Data, SliceKind::Fwa];

    pub fn as_str(self) -> &'static str {
        match self {
            SliceKind::Total => "total",
            SliceKind::Voice => "voice",
            SliceKind::Data => "data",
            SliceKind::Fwa => "fwa",
        }
    }

    pub fn is_service(self) -> bool {
        self != SliceKind::Total
    }
}

impl fmt::Display for SliceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SliceKind {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "total" => Ok(SliceKind::Total),
            "voice" => Ok(SliceKind::Voice),
            "data" => Ok(SliceKind::Data),
            "fwa" => Ok(SliceKind::Fwa),
            _ => Err(TelemetryError::InvalidId(s.to_string())),
        }
    }
}

/// Counter label: `F0` is downlink traffic volume, `F-RAN1`..`F-RAN19` the
/// auxiliary RAN counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureLabel(u8);

impl FeatureLabel {
    pub const F0: FeatureLabel = FeatureLabel(0);
    pub const COUNT: usize = 20;

    pub fn ran(index: u8) -> Option<Self> {
        (1..=19).contains(&index).then_some(FeatureLabel(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// All labels in table order, F0 first.
    pub fn all() -> impl Iterator<Item = FeatureLabel> {
        (0..Self::COUNT as u8).map(FeatureLabel)
    }

    /// Only F0 and the two active-user counters are measured per slice.
    pub fn available_per_slice(self) -> bool {
        self.0 <= 2
    }
}

impl fmt::Display for FeatureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            f.write_str("F0")
        } else {
            write!(f, "F-RAN{}", self.0)
        }
    }
}

impl FromStr for FeatureLabel {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "F0" {
            return Ok(FeatureLabel::F0);
        }
        s.strip_prefix("F-RAN")
            .and_then(|n| n.parse::<u8>().ok())
            .and_then(FeatureLabel::ran)
            .ok_or_else(|| TelemetryError::InvalidId(s.to_string()))
    }
}

impl Serialize for FeatureLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub type SeriesKey = (CellId, SliceKind);

/// Hourly multivariate telemetry of one (cell, slice) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSeries {
    pub cell: CellId,
    pub slice: SliceKind,
    /// Ascending hour-aligned UTC timestamps, one per row.
    pub timestamps: Vec<DateTime<Utc>>,
    /// Per-label hourly values, each as long as `timestamps`.
    pub features: BTreeMap<FeatureLabel, Vec<f64>>,
}

impl CellSeries {
    /// A gapless series starting at `start`.
    pub fn hourly(
        cell: CellId,
        slice: SliceKind,
        start: DateTime<Utc>,
        features: BTreeMap<FeatureLabel, Vec<f64>>,
    ) -> Self {
        let len = features.get(&FeatureLabel::F0).map_or(0, Vec::len);
        let timestamps = (0..len).map(|h| start + Duration::hours(h as i64)).collect();
        Self { cell, slice, timestamps, features }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn start(&self) -> Option<DateTime<Utc>> {
        self.timestamps.first().copied()
    }

    pub fn key(&self) -> SeriesKey {
        (self.cell.clone(), self.slice)
    }

    pub fn f0(&self) -> &[f64] {
        self.features.get(&FeatureLabel::F0).map_or(&[], Vec::as_slice)
    }

    pub fn feature(&self, label: FeatureLabel) -> Option<&[f64]> {
        self.features.get(&label).map(Vec::as_slice)
    }

    /// Position of `ts` in the series, assuming it is gapless.
    pub fn hour_index(&self, ts: DateTime<Utc>) -> Option<usize> {
        let start = self.start()?;
        let h = (ts - start).num_hours();
        (h >= 0 && (h as usize) < self.len()).then_some(h as usize)
    }
}

/// Directed handover rates between cells, in percent of the source's handovers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HandoverMatrix {
    entries: BTreeMap<(CellId, CellId), f64>,
}

impl HandoverMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src: CellId, dst: CellId, rate_percent: f64) -> Result<(), TelemetryError> {
        if src == dst {
            return Err(TelemetryError::InvalidHandover { src, dst, reason: "self edge".into() });
        }
        if !(0.0..=100.0).contains(&rate_percent) {
            return Err(TelemetryError::InvalidHandover {
                src,
                dst,
                reason: format!("rate {rate_percent} outside [0, 100]"),
            });
        }
        self.entries.insert((src, dst), rate_percent);
        Ok(())
    }

    pub fn rate(&self, src: &CellId, dst: &CellId) -> Option<f64> {
        self.entries.get(&(src.clone(), dst.clone())).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellId, &CellId, f64)> {
        self.entries.iter().map(|((s, d), r)| (s, d, *r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Neighbors handing users over into `target`, with their rates.
    pub fn incoming(&self, target: &CellId) -> Vec<(CellId, f64)> {
        self.iter().filter(|(_, d, _)| *d == target).map(|(s, _, r)| (s.clone(), r)).collect()
    }

    /// Neighbors receiving handovers from `target`, with their rates.
    pub fn outgoing(&self, target: &CellId) -> Vec<(CellId, f64)> {
        self.iter().filter(|(s, _, _)| *s == target).map(|(_, d, r)| (d.clone(), r)).collect()
    }
}

/// All series plus the handover graph. Read-only once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TelemetryStore {
    series: BTreeMap<SeriesKey, CellSeries>,
    pub handovers: HandoverMatrix,
}

impl TelemetryStore {
    pub fn new(handovers: HandoverMatrix) -> Self {
        Self { series: BTreeMap::new(), handovers }
    }

    /// Adds a series; a second series for the same (cell, slice) is rejected.
    pub fn insert(&mut self, series: CellSeries) -> Result<(), TelemetryError> {
        let key = series.key();
        if self.series.contains_key(&key) {
            return Err(TelemetryError::InconsistentDurations(format!(
                "second series for {}/{}",
                key.0, key.1
            )));
        }
        self.series.insert(key, series);
        Ok(())
    }

    pub fn get(&self, cell: &CellId, slice: SliceKind) -> Option<&CellSeries> {
        self.series.get(&(cell.clone(), slice))
    }

    pub fn series(&self) -> impl Iterator<Item = &CellSeries> {
        self.series.values()
    }

    pub fn series_mut(&mut self) -> impl Iterator<Item = &mut CellSeries> {
        self.series.values_mut()
    }

    pub fn get_mut(&mut self, cell: &CellId, slice: SliceKind) -> Option<&mut CellSeries> {
        self.series.get_mut(&(cell.clone(), slice))
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn cells(&self) -> Vec<CellId> {
        let mut cells: Vec<CellId> = self.series.keys().map(|(c, _)| c.clone()).collect();
        cells.dedup();
        cells
    }
}
