//! Seeded synthetic RAN telemetry.
//!
//! Each (cell, slice) series is a daily load profile scaled down at
//! weekends, plus peak-hour spikes and Gaussian noise. Handover edges carry a
//! fraction of the source cell's deviation from its baseline into the
//! destination one hour later. Every random draw comes from a stream keyed by
//! `(seed, cell, slice, channel)`, so adding a cell or a channel never shifts
//! the draws of another.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, Timelike, Utc, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{
    CellId, CellSeries, FeatureLabel, HandoverMatrix, SliceKind, TelemetryError, TelemetryStore, HOURS_PER_WEEK,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    /// Follows the daily template.
    Regular,
    /// Random piecewise-constant load levels (FWA-like).
    Bursty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellProfile {
    pub base_load: f64,
    pub daily_amplitude: f64,
    pub weekend_factor: f64,
    /// Expected spikes per day, placed in the 12:00-22:00 window.
    pub spike_rate: f64,
    /// Load multiplier while a spike lasts.
    pub spike_magnitude: f64,
    pub noise_std: f64,
    pub regularity: Regularity,
}

impl CellProfile {
    pub fn flat(base_load: f64) -> Self {
        Self {
            base_load,
            daily_amplitude: 0.0,
            weekend_factor: 1.0,
            spike_rate: 0.0,
            spike_magnitude: 1.0,
            noise_std: 0.0,
            regularity: Regularity::Regular,
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            base_load: self.base_load * factor,
            daily_amplitude: self.daily_amplitude * factor,
            noise_std: self.noise_std * factor,
            ..self.clone()
        }
    }

    fn validate(&self, field: &str) -> Result<(), SynthError> {
        let checks = [
            (self.base_load > 0.0, "base_load", "must be > 0"),
            (self.daily_amplitude >= 0.0, "daily_amplitude", "must be >= 0"),
            (self.weekend_factor > 0.0 && self.weekend_factor <= 1.0, "weekend_factor", "must be in (0, 1]"),
            (self.spike_rate >= 0.0, "spike_rate", "must be >= 0"),
            (self.spike_magnitude >= 1.0, "spike_magnitude", "must be >= 1"),
            (self.noise_std >= 0.0, "noise_std", "must be >= 0"),
        ];
        for (ok, name, reason) in checks {
            if !ok {
                return Err(invalid(format!("{field}.{name}"), reason));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub cell: CellId,
    /// Either only `total`, or any non-empty subset of the service slices
    /// (whose sum then forms the total).
    pub profiles: BTreeMap<SliceKind, CellProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverEdge {
    pub src: CellId,
    pub dst: CellId,
    pub rate_percent: f64,
    /// Fraction of the transferred deviation that reaches `dst`.
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_start")]
    pub start: DateTime<Utc>,
    pub weeks: usize,
    pub seed: u64,
    /// Standard deviation of the noise on the planted F-RAN1..F-RAN4 counters.
    pub aux_feature_noise: f64,
    pub cells: Vec<CellConfig>,
    #[serde(default)]
    pub handover_edges: Vec<HandoverEdge>,
}

fn default_start() -> DateTime<Utc> {
    // a Monday
    "2023-01-02T00:00:00Z".parse().expect("valid literal")
}

/// Relative load by hour of day: quiet night, morning ramp, afternoon
/// plateau, evening peak.
pub const DAILY_TEMPLATE: [f64; 24] = [
    0.15, 0.08, 0.04, 0.02, 0.02, 0.04, 0.08, // 00-06
    0.2, 0.35, 0.5, 0.6, 0.68, // 07-11
    0.72, 0.74, 0.74, 0.72, 0.72, 0.74, 0.78, // 12-18
    0.9, 1.0, 1.0, 0.94, // 19-22
    0.5, // 23
];

const SPIKE_WINDOW: std::ops::RangeInclusive<usize> = 12..=22;
const BURST_MEAN_HOURS: f64 = 6.0;

/// Affine maps `offset + gain * (F0 + noise)` for the planted counters.
const PLANTED: [(u8, f64, f64); 4] = [(1, 2.0, 0.05), (2, 1.0, 0.02), (3, 5.0, 0.08), (4, 10.0, 0.2)];

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.weeks == 0 {
            return Err(invalid("weeks", "must be >= 1"));
        }
        if !(self.aux_feature_noise >= 0.0) {
            return Err(invalid("aux_feature_noise", "must be >= 0"));
        }
        if self.cells.is_empty() {
            return Err(invalid("cells", "at least one cell required"));
        }
        let layout: Vec<SliceKind> = self.cells[0].profiles.keys().copied().collect();
        for (i, c) in self.cells.iter().enumerate() {
            let keys: Vec<SliceKind> = c.profiles.keys().copied().collect();
            if keys.is_empty() {
                return Err(invalid(format!("cells[{i}].profiles"), "empty"));
            }
            if keys.contains(&SliceKind::Total) && keys.len() > 1 {
                return Err(invalid(format!("cells[{i}].profiles"), "`total` cannot be mixed with service slices"));
            }
            if keys != layout {
                return Err(invalid(format!("cells[{i}].profiles"), "all cells must use the same slice layout"));
            }
            if self.cells[..i].iter().any(|o| o.cell == c.cell) {
                return Err(invalid(format!("cells[{i}].cell"), format!("duplicate cell {}", c.cell)));
            }
            for (slice, p) in &c.profiles {
                p.validate(&format!("cells[{i}].profiles.{slice}"))?;
            }
        }
        for (i, e) in self.handover_edges.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.coupling) {
                return Err(invalid(format!("handover_edges[{i}].coupling"), format!("{} not in [0, 1]", e.coupling)));
            }
            if !(0.0..=100.0).contains(&e.rate_percent) {
                return Err(invalid(
                    format!("handover_edges[{i}].rate_percent"),
                    format!("{} not in [0, 100]", e.rate_percent),
                ));
            }
            if e.src == e.dst {
                return Err(invalid(format!("handover_edges[{i}]"), "self edge"));
            }
            for end in [&e.src, &e.dst] {
                if !self.cells.iter().any(|c| &c.cell == end) {
                    return Err(invalid(format!("handover_edges[{i}]"), format!("unknown cell {end}")));
                }
            }
        }
        Ok(())
    }

    /// Three cells of one base station, each split into voice/data/FWA
    /// slices, with moderate handover coupling.
    pub fn default_scenario(seed: u64) -> Self {
        let voice = CellProfile {
            base_load: 20.0,
            daily_amplitude: 40.0,
            weekend_factor: 0.7,
            spike_rate: 0.3,
            spike_magnitude: 1.4,
            noise_std: 3.0,
            regularity: Regularity::Regular,
        };
        let data = CellProfile {
            base_load: 60.0,
            daily_amplitude: 140.0,
            weekend_factor: 0.8,
            spike_rate: 0.5,
            spike_magnitude: 1.5,
            noise_std: 10.0,
            regularity: Regularity::Regular,
        };
        let fwa = CellProfile {
            base_load: 40.0,
            daily_amplitude: 60.0,
            weekend_factor: 0.9,
            spike_rate: 0.2,
            spike_magnitude: 1.3,
            noise_std: 5.0,
            regularity: Regularity::Bursty,
        };
        let cells = [1.3, 1.0, 0.7]
            .iter()
            .enumerate()
            .map(|(i, &f)| CellConfig {
                cell: CellId::new("A", i as u32 + 1).expect("valid id"),
                profiles: BTreeMap::from([
                    (SliceKind::Voice, voice.scaled(f)),
                    (SliceKind::Data, data.scaled(f)),
                    (SliceKind::Fwa, fwa.scaled(f)),
                ]),
            })
            .collect();
        let edge = |s: u32, d: u32, rate: f64| HandoverEdge {
            src: CellId::new("A", s).expect("valid id"),
            dst: CellId::new("A", d).expect("valid id"),
            rate_percent: rate,
            coupling: 0.3,
        };
        Self {
            start: default_start(),
            weeks: 16,
            seed,
            aux_feature_noise: 2.0,
            cells,
            handover_edges: vec![
                edge(1, 2, 35.0),
                edge(3, 2, 25.0),
                edge(2, 1, 30.0),
                edge(2, 3, 20.0),
                edge(1, 3, 15.0),
                edge(3, 1, 10.0),
            ],
        }
    }

    /// A quiet target cell `A-2` fed by two noisy, spiky neighbors.
    pub fn mobility_scenario(seed: u64, coupling: f64) -> Self {
        let quiet = CellProfile {
            base_load: 100.0,
            daily_amplitude: 150.0,
            weekend_factor: 0.8,
            spike_rate: 0.1,
            spike_magnitude: 1.3,
            noise_std: 4.0,
            regularity: Regularity::Regular,
        };
        let busy = CellProfile { noise_std: 25.0, spike_rate: 1.0, spike_magnitude: 1.6, ..quiet.clone() };
        let cell = |i: u32, p: &CellProfile| CellConfig {
            cell: CellId::new("A", i).expect("valid id"),
            profiles: BTreeMap::from([(SliceKind::Total, p.clone())]),
        };
        let edge = |s: u32, d: u32, rate: f64| HandoverEdge {
            src: CellId::new("A", s).expect("valid id"),
            dst: CellId::new("A", d).expect("valid id"),
            rate_percent: rate,
            coupling,
        };
        Self {
            start: default_start(),
            weeks: 16,
            seed,
            aux_feature_noise: 2.0,
            cells: vec![cell(1, &busy), cell(2, &quiet), cell(3, &busy)],
            handover_edges: vec![edge(1, 2, 60.0), edge(3, 2, 40.0), edge(2, 1, 30.0), edge(2, 3, 20.0)],
        }
    }

    pub fn hours(&self) -> usize {
        self.weeks * HOURS_PER_WEEK
    }
}

/// Deterministic stream for one (cell, slice, channel) triple.
fn stream(seed: u64, cell: &CellId, slice: SliceKind, channel: &str) -> ChaCha8Rng {
    // FNV-1a over the key, then a splitmix64 finaliser mixed with the seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in format!("{cell}/{slice}/{channel}").bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn is_weekend(ts: DateTime<Utc>) -> bool {
    matches!(ts.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Noise-free expected load and the random deviation around it.
struct Components {
    baseline: Vec<f64>,
    deviation: Vec<f64>,
}

fn components(
    profile: &CellProfile,
    start: DateTime<Utc>,
    hours: usize,
    seed: u64,
    cell: &CellId,
    slice: SliceKind,
) -> Components {
    let timestamps: Vec<DateTime<Utc>> = (0..hours).map(|h| start + Duration::hours(h as i64)).collect();
    let weekend = |t: usize| if is_weekend(timestamps[t]) { profile.weekend_factor } else { 1.0 };

    let baseline: Vec<f64> = match profile.regularity {
        Regularity::Regular => (0..hours)
            .map(|t| {
                let shape = DAILY_TEMPLATE[timestamps[t].hour() as usize];
                (profile.base_load + profile.daily_amplitude * shape) * weekend(t)
            })
            .collect(),
        Regularity::Bursty => {
            let mut rng = stream(seed, cell, slice, "burst");
            let mut out = Vec::with_capacity(hours);
            while out.len() < hours {
                let level = profile.base_load + profile.daily_amplitude * rng.gen::<f64>();
                let u: f64 = rng.gen::<f64>();
                let len = 1 + (-(1.0 - u).ln() * BURST_MEAN_HOURS) as usize;
                for _ in 0..len.min(hours - out.len()) {
                    let t = out.len();
                    out.push(level * weekend(t));
                }
            }
            out
        }
    };

    let mut spike = vec![false; hours];
    if profile.spike_rate > 0.0 && profile.spike_magnitude > 1.0 {
        let mut rng = stream(seed, cell, slice, "spike");
        let per_day = Poisson::new(profile.spike_rate).expect("positive rate");
        let first_midnight = (24 - start.hour() as usize) % 24;
        let mut day_start = first_midnight;
        while day_start < hours {
            let count: f64 = per_day.sample(&mut rng);
            for _ in 0..count as usize {
                let at = day_start + rng.gen_range(SPIKE_WINDOW);
                let len = rng.gen_range(1..=3usize);
                for flag in spike.iter_mut().skip(at).take(len) {
                    *flag = true;
                }
            }
            day_start += 24;
        }
    }

    let mut deviation = vec![0.0; hours];
    if profile.noise_std > 0.0 {
        let mut rng = stream(seed, cell, slice, "noise");
        let noise = Normal::new(0.0, profile.noise_std).expect("finite std");
        for d in deviation.iter_mut() {
            *d = noise.sample(&mut rng);
        }
    }
    for t in 0..hours {
        if spike[t] {
            deviation[t] += (profile.spike_magnitude - 1.0) * baseline[t];
        }
    }
    Components { baseline, deviation }
}

/// Adds lagged coupling transfers to `baseline + deviation` for one slice.
///
/// `series[i]` holds the components of cell `i`; `edges` are
/// `(src, dst, fraction)` with `fraction = coupling * rate_percent / 100`.
/// A source's own deviation (before anything it receives) is what moves.
fn couple(series: &[(&[f64], &[f64])], edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    series
        .iter()
        .enumerate()
        .map(|(i, (baseline, deviation))| {
            (0..baseline.len())
                .map(|t| {
                    let mut v = baseline[t] + deviation[t];
                    if t > 0 {
                        for &(src, _, frac) in edges.iter().filter(|e| e.1 == i) {
                            v += frac * series[src].1[t - 1];
                        }
                    }
                    v.max(0.0)
                })
                .collect()
        })
        .collect()
}

fn planted_counters(
    f0: &[f64],
    labels: impl Iterator<Item = (u8, f64, f64)>,
    noise_std: f64,
    seed: u64,
    cell: &CellId,
    slice: SliceKind,
    out: &mut BTreeMap<FeatureLabel, Vec<f64>>,
) {
    for (k, offset, gain) in labels {
        let label = FeatureLabel::ran(k).expect("planted label in range");
        let mut rng = stream(seed, cell, slice, &label.to_string());
        let values = f0
            .iter()
            .map(|&v| {
                let e: f64 = if noise_std > 0.0 { noise_std * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                offset + gain * (v + e)
            })
            .collect();
        out.insert(label, values);
    }
}

fn noise_counters(hours: usize, seed: u64, cell: &CellId, out: &mut BTreeMap<FeatureLabel, Vec<f64>>) {
    for k in 5..=19u8 {
        let label = FeatureLabel::ran(k).expect("label in range");
        let mut rng = stream(seed, cell, SliceKind::Total, &label.to_string());
        let mean = 40.0 + 3.0 * k as f64;
        let values = (0..hours).map(|_| mean + 5.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        out.insert(label, values);
    }
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<TelemetryStore, SynthError> {
    config.validate()?;
    let hours = config.hours();
    let index_of = |id: &CellId| config.cells.iter().position(|c| &c.cell == id).expect("validated edge");
    let edges: Vec<(usize, usize, f64)> = config
        .handover_edges
        .iter()
        .map(|e| (index_of(&e.src), index_of(&e.dst), e.coupling * e.rate_percent / 100.0))
        .collect();

    let mut handovers = HandoverMatrix::new();
    for e in &config.handover_edges {
        handovers.insert(e.src.clone(), e.dst.clone(), e.rate_percent)?;
    }
    let mut store = TelemetryStore::new(handovers);

    let layout: Vec<SliceKind> = config.cells[0].profiles.keys().copied().collect();
    let sliced = layout.iter().all(|s| s.is_service());
    let mut totals = vec![vec![0.0; hours]; config.cells.len()];

    for &slice in &layout {
        let comps: Vec<Components> = config
            .cells
            .iter()
            .map(|c| components(&c.profiles[&slice], config.start, hours, config.seed, &c.cell, slice))
            .collect();
        let views: Vec<(&[f64], &[f64])> =
            comps.iter().map(|c| (c.baseline.as_slice(), c.deviation.as_slice())).collect();
        let f0s = couple(&views, &edges);
        for ((cell_cfg, f0), total) in config.cells.iter().zip(f0s).zip(totals.iter_mut()) {
            for (t, v) in total.iter_mut().zip(&f0) {
                *t += v;
            }
            if sliced {
                let mut features = BTreeMap::new();
                planted_counters(
                    &f0,
                    PLANTED[..2].iter().copied(),
                    config.aux_feature_noise,
                    config.seed,
                    &cell_cfg.cell,
                    slice,
                    &mut features,
                );
                features.insert(FeatureLabel::F0, f0);
                store.insert(CellSeries::hourly(cell_cfg.cell.clone(), slice, config.start, features))?;
            }
        }
    }

    for (cell_cfg, total) in config.cells.iter().zip(totals) {
        let mut features = BTreeMap::new();
        planted_counters(
            &total,
            PLANTED.iter().copied(),
            config.aux_feature_noise,
            config.seed,
            &cell_cfg.cell,
            SliceKind::Total,
            &mut features,
        );
        noise_counters(hours, config.seed, &cell_cfg.cell, &mut features);
        features.insert(FeatureLabel::F0, total);
        store.insert(CellSeries::hourly(cell_cfg.cell.clone(), SliceKind::Total, config.start, features))?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::validate_series;

    fn one_cell(profile: CellProfile, weeks: usize) -> ScenarioConfig {
        ScenarioConfig {
            start: default_start(),
            weeks,
            seed: 1,
            aux_feature_noise: 0.0,
            cells: vec![CellConfig {
                cell: CellId::new("A", 1).unwrap(),
                profiles: BTreeMap::from([(SliceKind::Total, profile)]),
            }],
            handover_edges: vec![],
        }
    }

    #[test]
    fn flat_profile_is_constant() {
        let store = generate_scenario(&one_cell(CellProfile::flat(42.0), 1)).unwrap();
        let s = store.get(&CellId::new("A", 1).unwrap(), SliceKind::Total).unwrap();
        assert_eq!(s.len(), 168);
        assert!(s.f0().iter().all(|&v| v == 42.0));
    }

    #[test]
    fn same_seed_same_store() {
        let cfg = ScenarioConfig::default_scenario(11);
        assert_eq!(generate_scenario(&cfg).unwrap(), generate_scenario(&cfg).unwrap());
        let other = ScenarioConfig { seed: 12, ..cfg.clone() };
        assert_ne!(generate_scenario(&cfg).unwrap(), generate_scenario(&other).unwrap());
    }

    #[test]
    fn coupling_transfers_lagged_deviation() {
        // source deviates by +10 at hour 5; half of it lands in the target at hour 6
        let baseline = vec![50.0; 10];
        let mut src_dev = vec![0.0; 10];
        src_dev[5] = 10.0;
        let dst_dev = vec![0.0; 10];
        let views = [(baseline.as_slice(), src_dev.as_slice()), (baseline.as_slice(), dst_dev.as_slice())];
        let coupled = couple(&views, &[(0, 1, 0.5 * 100.0 / 100.0)]);
        let uncoupled = couple(&views, &[]);
        assert_eq!(coupled[1][6] - uncoupled[1][6], 5.0);
        for t in (0..10).filter(|&t| t != 6) {
            assert_eq!(coupled[1][t], uncoupled[1][t]);
        }
        assert_eq!(coupled[0], uncoupled[0]);
    }

    #[test]
    fn adding_a_cell_keeps_other_draws() {
        let mut cfg = ScenarioConfig::default_scenario(3);
        cfg.handover_edges.clear();
        let before = generate_scenario(&cfg).unwrap();
        let mut extra = cfg.cells[0].clone();
        extra.cell = CellId::new("Z", 9).unwrap();
        cfg.cells.push(extra);
        let after = generate_scenario(&cfg).unwrap();
        for s in before.series() {
            assert_eq!(Some(s), after.get(&s.cell, s.slice));
        }
    }

    #[test]
    fn total_is_sum_of_slices() {
        let store = generate_scenario(&ScenarioConfig::default_scenario(5)).unwrap();
        for cell in store.cells() {
            let total = store.get(&cell, SliceKind::Total).unwrap().f0();
            for t in 0..total.len() {
                let sum: f64 = SliceKind::SERVICES.iter().map(|s| store.get(&cell, *s).unwrap().f0()[t]).sum();
                assert!((total[t] - sum).abs() <= 1e-9 * sum.max(1.0));
            }
        }
    }

    #[test]
    fn slice_series_carry_only_per_slice_counters() {
        let store = generate_scenario(&ScenarioConfig::default_scenario(5)).unwrap();
        for s in store.series() {
            if s.slice.is_service() {
                assert!(s.features.keys().all(|l| l.available_per_slice()));
                assert_eq!(s.features.len(), 3);
            } else {
                assert_eq!(s.features.len(), 20);
            }
        }
    }

    #[test]
    fn output_always_validates() {
        for seed in 0..5 {
            for cfg in [ScenarioConfig::default_scenario(seed), ScenarioConfig::mobility_scenario(seed, 0.6)] {
                let store = generate_scenario(&cfg).unwrap();
                for s in store.series() {
                    assert!(validate_series(s).is_clean(), "{}/{}", s.cell, s.slice);
                }
            }
        }
    }

    #[test]
    fn weekdays_busier_than_weekends() {
        let p = CellProfile { daily_amplitude: 30.0, weekend_factor: 0.6, ..CellProfile::flat(10.0) };
        let store = generate_scenario(&one_cell(p, 2)).unwrap();
        let s = store.get(&CellId::new("A", 1).unwrap(), SliceKind::Total).unwrap();
        let (mut wd, mut we) = (vec![], vec![]);
        for (ts, v) in s.timestamps.iter().zip(s.f0()) {
            if is_weekend(*ts) { we.push(*v) } else { wd.push(*v) }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&wd) > mean(&we));
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = ScenarioConfig::default_scenario(1);
        cfg.handover_edges[0].coupling = 1.5;
        match generate_scenario(&cfg) {
            Err(SynthError::InvalidConfig { field, .. }) => assert_eq!(field, "handover_edges[0].coupling"),
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = ScenarioConfig::default_scenario(1);
        cfg.weeks = 0;
        assert!(generate_scenario(&cfg).is_err());
        let mut cfg = one_cell(CellProfile::flat(1.0), 1);
        cfg.cells[0].profiles.get_mut(&SliceKind::Total).unwrap().weekend_factor = 1.2;
        assert!(generate_scenario(&cfg).is_err());
    }

    #[test]
    fn config_json_round_trip_and_unknown_keys() {
        let cfg = ScenarioConfig::default_scenario(9);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&text).unwrap(), cfg);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ScenarioConfig>(v).is_err());
    }
}
