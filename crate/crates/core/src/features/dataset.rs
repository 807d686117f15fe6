use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::telemetry::{validate_series, CellId, CellSeries, FeatureLabel, FoldSplit, SliceKind, TelemetryStore};

use super::calendar::{is_weekday, label_peak_hours, PEAK_RATIO};
use super::correlation::{gather, select_features, CORRELATION_THRESHOLD};
use super::mobility::{aggregate_at, Direction};
use super::FeatureError;

/// Which feature families feed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Univariate,
    MvRan,
    MvPeak,
    MvHandover,
    MvAll,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Univariate, ModelKind::MvRan, ModelKind::MvPeak, ModelKind::MvHandover, ModelKind::MvAll];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Univariate => "univariate",
            ModelKind::MvRan => "mv-ran",
            ModelKind::MvPeak => "mv-peak",
            ModelKind::MvHandover => "mv-handover",
            ModelKind::MvAll => "mv-all",
        }
    }

    fn uses_ran(self) -> bool {
        matches!(self, ModelKind::MvRan | ModelKind::MvAll)
    }

    fn uses_calendar(self) -> bool {
        matches!(self, ModelKind::MvPeak | ModelKind::MvAll)
    }

    fn uses_mobility(self) -> bool {
        matches!(self, ModelKind::MvHandover | ModelKind::MvAll)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One input channel of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Ran(FeatureLabel),
    PeakHourFlag,
    DayOfWeekFlag,
    McIn,
    McOut,
}

impl Channel {
    pub fn is_flag(self) -> bool {
        matches!(self, Channel::PeakHourFlag | Channel::DayOfWeekFlag)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Ran(l) => write!(f, "{l}"),
            Channel::PeakHourFlag => f.write_str("peak-hour"),
            Channel::DayOfWeekFlag => f.write_str("day-of-week"),
            Channel::McIn => f.write_str("mc-in"),
            Channel::McOut => f.write_str("mc-out"),
        }
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "peak-hour" => Channel::PeakHourFlag,
            "day-of-week" => Channel::DayOfWeekFlag,
            "mc-in" => Channel::McIn,
            "mc-out" => Channel::McOut,
            other => Channel::Ran(other.parse().map_err(|_| format!("unknown channel `{other}`"))?),
        })
    }
}

impl Serialize for Channel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered channel list; the first channel is always F0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSet(Vec<Channel>);

impl FeatureSet {
    pub fn new(channels: Vec<Channel>) -> Result<Self, FeatureError> {
        if channels.first() != Some(&Channel::Ran(FeatureLabel::F0)) {
            return Err(FeatureError::DegenerateInput("first channel must be F0".into()));
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].contains(c) {
                return Err(FeatureError::DegenerateInput(format!("duplicate channel {c}")));
            }
        }
        Ok(Self(channels))
    }

    pub fn channels(&self) -> &[Channel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, channel: Channel) -> Option<usize> {
        self.0.iter().position(|c| *c == channel)
    }
}

/// Z-score parameters of one channel. Flags use the identity transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStat {
    pub mean: f64,
    pub std: f64,
}

impl NormStat {
    pub const IDENTITY: NormStat = NormStat { mean: 0.0, std: 1.0 };

    /// Population mean and standard deviation; a constant channel gets
    /// `std = 1` so it normalizes to zero instead of dividing by zero.
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        NormStat { mean, std: if std > 0.0 { std } else { 1.0 } }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    #[inline]
    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureOptions {
    pub threshold: f64,
    pub peak_ratio: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { threshold: CORRELATION_THRESHOLD, peak_ratio: PEAK_RATIO }
    }
}

/// Everything fitted on the training range that determines a model's inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePlan {
    pub cell: CellId,
    pub slice: SliceKind,
    pub kind: ModelKind,
    pub features: FeatureSet,
    pub norm: Vec<NormStat>,
    pub peak_hours: [bool; 24],
    /// Selected counters and their training-range correlation with F0.
    pub selected: Vec<(FeatureLabel, f64)>,
}

impl FeaturePlan {
    pub fn f0_norm(&self) -> NormStat {
        self.norm[0]
    }

    /// Flag channel value for an arbitrary (possibly future) hour.
    pub fn flag_value(&self, channel: Channel, ts: DateTime<Utc>) -> f64 {
        let on = match channel {
            Channel::PeakHourFlag => self.peak_hours[ts.hour() as usize],
            Channel::DayOfWeekFlag => is_weekday(ts),
            _ => unreachable!("not a flag channel"),
        };
        if on {
            1.0
        } else {
            0.0
        }
    }
}

/// Normalized sliding-window samples from one set of hour ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub window: usize,
    pub channels: usize,
    /// `len() x window x channels`, row-major.
    pub inputs: Vec<f64>,
    /// Normalized F0 at each sample's target hour.
    pub targets: Vec<f64>,
    /// Series index of each target hour.
    pub target_index: Vec<usize>,
    /// Timestamp of series index 0.
    pub origin: DateTime<Utc>,
    pub norm_stats: Vec<NormStat>,
    pub ranges: Vec<Range<usize>>,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        let stride = self.window * self.channels;
        &self.inputs[n * stride..(n + 1) * stride]
    }

    pub fn target_time(&self, n: usize) -> DateTime<Utc> {
        self.origin + Duration::hours(self.target_index[n] as i64)
    }

    /// Targets in physical units.
    pub fn raw_targets(&self) -> Vec<f64> {
        self.targets.iter().map(|&v| self.norm_stats[0].invert(v)).collect()
    }
}

/// Datasets of one series for the three roles of a fold.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub fold: usize,
    pub plan: FeaturePlan,
    pub train: SupervisedDataset,
    pub val: SupervisedDataset,
    pub test: SupervisedDataset,
}

fn series_for<'a>(store: &'a TelemetryStore, cell: &CellId, slice: SliceKind) -> Result<&'a CellSeries, FeatureError> {
    let series = store.get(cell, slice).ok_or_else(|| FeatureError::MissingSeries(cell.clone(), slice))?;
    let report = validate_series(series);
    if !report.gaps.is_empty() || !report.out_of_order.is_empty() {
        return Err(FeatureError::NotHourly);
    }
    Ok(series)
}

/// Fits channel composition, peak hours and normalization on `train`.
pub fn plan_features(
    store: &TelemetryStore,
    cell: &CellId,
    slice: SliceKind,
    kind: ModelKind,
    train: &[Range<usize>],
    options: &FeatureOptions,
) -> Result<FeaturePlan, FeatureError> {
    let series = series_for(store, cell, slice)?;
    if train.iter().all(|r| r.is_empty()) {
        return Err(FeatureError::DegenerateInput("empty training range".into()));
    }
    if train.iter().any(|r| r.end > series.len()) {
        return Err(FeatureError::DegenerateInput("training range beyond series end".into()));
    }

    let mut channels = vec![Channel::Ran(FeatureLabel::F0)];
    let selected = if kind.uses_ran() { select_features(store, cell, slice, options.threshold, train)? } else { vec![] };
    channels.extend(selected.iter().map(|(l, _)| Channel::Ran(*l)));
    if kind.uses_calendar() {
        channels.extend([Channel::PeakHourFlag, Channel::DayOfWeekFlag]);
    }
    if kind.uses_mobility() {
        channels.extend([Channel::McIn, Channel::McOut]);
    }
    let features = FeatureSet::new(channels)?;
    let peak_hours =
        if kind.uses_calendar() { label_peak_hours(series, train, options.peak_ratio)? } else { [false; 24] };

    let train_ts: Vec<DateTime<Utc>> = train.iter().flat_map(|r| series.timestamps[r.clone()].iter().copied()).collect();
    let mut norm = Vec::with_capacity(features.len());
    for &ch in features.channels() {
        let stat = match ch {
            Channel::Ran(label) => {
                let values = series.feature(label).ok_or(FeatureError::UnknownLabel(label))?;
                NormStat::fit(&gather(values, train))
            }
            Channel::McIn => NormStat::fit(&aggregate_at(store, cell, Direction::Incoming, &train_ts)?),
            Channel::McOut => NormStat::fit(&aggregate_at(store, cell, Direction::Outgoing, &train_ts)?),
            Channel::PeakHourFlag | Channel::DayOfWeekFlag => NormStat::IDENTITY,
        };
        norm.push(stat);
    }

    Ok(FeaturePlan { cell: cell.clone(), slice, kind, features, norm, peak_hours, selected })
}

/// Normalized channel matrix of the whole series, `hours x channels`.
fn channel_matrix(store: &TelemetryStore, series: &CellSeries, plan: &FeaturePlan) -> Result<Vec<f64>, FeatureError> {
    let c = plan.features.len();
    let hours = series.len();
    let mut out = vec![0.0; hours * c];
    for (j, &ch) in plan.features.channels().iter().enumerate() {
        let raw: Vec<f64> = match ch {
            Channel::Ran(label) => series.feature(label).ok_or(FeatureError::UnknownLabel(label))?.to_vec(),
            Channel::McIn => aggregate_at(store, &plan.cell, Direction::Incoming, &series.timestamps)?,
            Channel::McOut => aggregate_at(store, &plan.cell, Direction::Outgoing, &series.timestamps)?,
            Channel::PeakHourFlag | Channel::DayOfWeekFlag => {
                series.timestamps.iter().map(|ts| plan.flag_value(ch, *ts)).collect()
            }
        };
        let stat = plan.norm[j];
        for (t, v) in raw.into_iter().enumerate() {
            out[t * c + j] = stat.apply(v);
        }
    }
    Ok(out)
}

/// Windows over `ranges` using a previously fitted plan. Every window and
/// its target lie inside one range, so a range of `n` hours yields
/// `n - window` samples.
pub fn materialize(
    store: &TelemetryStore,
    plan: &FeaturePlan,
    ranges: &[Range<usize>],
    window: usize,
) -> Result<SupervisedDataset, FeatureError> {
    let series = series_for(store, &plan.cell, plan.slice)?;
    let hours: usize = ranges.iter().map(|r| r.len()).sum();
    if window == 0 {
        return Err(FeatureError::WindowTooLong { window, hours });
    }
    if ranges.iter().any(|r| r.end > series.len()) {
        return Err(FeatureError::DegenerateInput("range beyond series end".into()));
    }
    let matrix = channel_matrix(store, series, plan)?;
    let c = plan.features.len();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut target_index = Vec::new();
    for r in ranges {
        for t in (r.start + window)..r.end {
            inputs.extend_from_slice(&matrix[(t - window) * c..t * c]);
            targets.push(matrix[t * c]);
            target_index.push(t);
        }
    }
    if targets.is_empty() {
        return Err(FeatureError::WindowTooLong { window, hours });
    }
    Ok(SupervisedDataset {
        window,
        channels: c,
        inputs,
        targets,
        target_index,
        origin: series.timestamps[0],
        norm_stats: plan.norm.clone(),
        ranges: ranges.to_vec(),
    })
}

/// Fits a plan on the fold's training hours and windows all three roles.
pub fn build_dataset(
    store: &TelemetryStore,
    cell: &CellId,
    slice: SliceKind,
    kind: ModelKind,
    split: &FoldSplit,
    window: usize,
    options: &FeatureOptions,
) -> Result<DatasetBundle, FeatureError> {
    let plan = plan_features(store, cell, slice, kind, &split.train, options)?;
    let train = materialize(store, &plan, &split.train, window)?;
    let val = materialize(store, &plan, std::slice::from_ref(&split.val), window)?;
    let test = materialize(store, &plan, std::slice::from_ref(&split.test), window)?;
    Ok(DatasetBundle { fold: split.fold, plan, train, val, test })
}
