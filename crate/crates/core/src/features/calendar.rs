use std::ops::Range;

use chrono::{DateTime, Datelike, Timelike, Utc, Weekday};

use crate::telemetry::CellSeries;

use super::FeatureError;

/// Hours whose mean training traffic exceeds this fraction of the busiest
/// hour's mean are peak hours.
pub const PEAK_RATIO: f64 = 0.7;

/// Peak-hour flags indexed by hour of day (UTC).
///
/// Hour `h` is flagged when its mean F0 over `train` is strictly greater than
/// `ratio` times the largest hour-of-day mean. An all-zero span flags nothing.
pub fn label_peak_hours(series: &CellSeries, train: &[Range<usize>], ratio: f64) -> Result<[bool; 24], FeatureError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(FeatureError::DegenerateInput(format!("peak ratio {ratio} outside (0, 1)")));
    }
    let mut sum = [0.0f64; 24];
    let mut count = [0usize; 24];
    let f0 = series.f0();
    for i in train.iter().flat_map(|r| r.clone()) {
        let h = series.timestamps[i].hour() as usize;
        sum[h] += f0[i];
        count[h] += 1;
    }
    if count.iter().all(|&c| c == 0) {
        return Err(FeatureError::DegenerateInput("empty training range".into()));
    }
    let means: Vec<Option<f64>> = (0..24).map(|h| (count[h] > 0).then(|| sum[h] / count[h] as f64)).collect();
    let peak = means.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(std::array::from_fn(|h| means[h].is_some_and(|m| m > ratio * peak)))
}

pub fn is_weekday(ts: DateTime<Utc>) -> bool {
    !matches!(ts.weekday(), Weekday::Sat | Weekday::Sun)
}

/// `true` Monday through Friday.
pub fn day_of_week_flags(timestamps: &[DateTime<Utc>]) -> Vec<bool> {
    timestamps.iter().map(|t| is_weekday(*t)).collect()
}
