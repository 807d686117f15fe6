use std::collections::BTreeMap;

use proptest::prelude::*;
use slicecast::features::{build_dataset, pearson_correlation, plan_features, select_features, FeatureOptions, ModelKind};
use slicecast::synthgen::{generate_scenario, CellConfig, CellProfile, HandoverEdge, ScenarioConfig};
use slicecast::telemetry::{split_folds, CellId, FeatureLabel, SliceKind, TelemetryStore};

fn id(i: u32) -> CellId {
    CellId::new("A", i).unwrap()
}

fn scenario(seed: u64, weeks: usize) -> TelemetryStore {
    let mut cfg = ScenarioConfig::default_scenario(seed);
    cfg.weeks = weeks;
    generate_scenario(&cfg).unwrap()
}

fn pair(coupling: f64, seed: u64) -> TelemetryStore {
    let noisy = CellProfile { noise_std: 10.0, ..CellProfile::flat(100.0) };
    let cell = |i| CellConfig { cell: id(i), profiles: BTreeMap::from([(SliceKind::Total, noisy.clone())]) };
    let cfg = ScenarioConfig {
        start: "2023-01-02T00:00:00Z".parse().unwrap(),
        weeks: 4,
        seed,
        aux_feature_noise: 1.0,
        cells: vec![cell(1), cell(2)],
        handover_edges: vec![HandoverEdge { src: id(1), dst: id(2), rate_percent: 50.0, coupling }],
    };
    generate_scenario(&cfg).unwrap()
}

fn lagged_correlation(store: &TelemetryStore) -> f64 {
    let src = store.get(&id(1), SliceKind::Total).unwrap().f0();
    let dst = store.get(&id(2), SliceKind::Total).unwrap().f0();
    pearson_correlation(&src[..src.len() - 1], &dst[1..]).unwrap()
}

#[test]
fn coupling_raises_lagged_cross_correlation() {
    for seed in 1..=3 {
        let r: Vec<f64> = [0.0, 0.3, 0.6, 1.0].iter().map(|&c| lagged_correlation(&pair(c, seed))).collect();
        assert!(r[0].abs() < 0.1, "{r:?}");
        assert!(r[1] > 0.0, "{r:?}");
        assert!(r.windows(2).all(|w| w[1] > w[0]), "{r:?}");
    }
}

#[test]
fn planted_counters_selected_noise_counters_not() {
    for seed in 1..=5 {
        let store = scenario(seed, 8);
        for cell in store.cells() {
            let got: Vec<FeatureLabel> =
                select_features(&store, &cell, SliceKind::Total, 0.9, &[0..672]).unwrap().into_iter().map(|(l, _)| l).collect();
            let planted: Vec<FeatureLabel> = (1..=4).map(|k| FeatureLabel::ran(k).unwrap()).collect();
            assert_eq!(got, planted, "seed {seed} cell {cell}");
        }
    }
}

#[test]
fn slices_select_only_their_counters() {
    let store = scenario(2, 4);
    for slice in [SliceKind::Voice, SliceKind::Data, SliceKind::Fwa] {
        let got = select_features(&store, &id(1), slice, 0.9, &[0..336]).unwrap();
        assert!(got.iter().all(|(l, _)| l.available_per_slice()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn selection_shrinks_as_threshold_rises(seed in 0u64..1000, lo in 0.05f64..0.95, gap in 0.0f64..0.5) {
        let store = scenario(seed, 2);
        let hi = (lo + gap).min(1.0);
        let wide = select_features(&store, &id(2), SliceKind::Total, lo, &[0..200]).unwrap();
        let narrow = select_features(&store, &id(2), SliceKind::Total, hi, &[0..200]).unwrap();
        prop_assert!(narrow.iter().all(|x| wide.contains(x)));
        prop_assert!(wide.iter().all(|(_, r)| *r >= lo));
    }
}

/// Overwrites every value outside `keep` in every series of the store.
fn scramble_outside(store: &mut TelemetryStore, keep: &[std::ops::Range<usize>]) {
    for series in store.series_mut() {
        for values in series.features.values_mut() {
            for (t, v) in values.iter_mut().enumerate() {
                if !keep.iter().any(|r| r.contains(&t)) {
                    *v = 1e6 - *v * 3.0 + (t % 13) as f64;
                }
            }
        }
    }
}

#[test]
fn fitted_state_depends_only_on_training_hours() {
    let store = scenario(3, 16);
    let split = split_folds(16 * 168, 3, 4, 4).unwrap().remove(2);
    let mut mutated = store.clone();
    scramble_outside(&mut mutated, &split.train);
    let opts = FeatureOptions::default();
    for kind in ModelKind::ALL {
        for (cell, slice) in [(id(2), SliceKind::Total), (id(1), SliceKind::Data)] {
            let a = plan_features(&store, &cell, slice, kind, &split.train, &opts).unwrap();
            let b = plan_features(&mutated, &cell, slice, kind, &split.train, &opts).unwrap();
            let bits = |p: &slicecast::features::FeaturePlan| {
                let norm: Vec<(u64, u64)> = p.norm.iter().map(|s| (s.mean.to_bits(), s.std.to_bits())).collect();
                let sel: Vec<(FeatureLabel, u64)> = p.selected.iter().map(|(l, r)| (*l, r.to_bits())).collect();
                (norm, sel, p.peak_hours, p.features.clone())
            };
            assert_eq!(bits(&a), bits(&b), "{kind:?} {cell}/{slice}");

            let da = build_dataset(&store, &cell, slice, kind, &split, 24, &opts).unwrap();
            let db = build_dataset(&mutated, &cell, slice, kind, &split, 24, &opts).unwrap();
            assert_eq!(da.train, db.train);
            assert_ne!(da.test.targets, db.test.targets);
        }
    }
}
