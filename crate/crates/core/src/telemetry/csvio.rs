use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Timelike, Utc};

use super::types::{CellId, CellSeries, FeatureLabel, HandoverMatrix, SeriesKey, SliceKind, TelemetryStore};
use super::TelemetryError;

pub const HANDOVER_HEADER: [&str; 5] = ["src_base", "src_index", "dst_base", "dst_index", "rate_percent"];

const KEY_COLUMNS: [&str; 4] = ["timestamp", "base_station", "cell_index", "slice"];

fn telemetry_header() -> Vec<String> {
    KEY_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(FeatureLabel::all().map(|l| l.to_string()))
        .collect()
}

fn open(path: &Path) -> Result<File, TelemetryError> {
    File::open(path).map_err(|source| TelemetryError::Io { path: path.display().to_string(), source })
}

fn check_header(found: &csv::StringRecord, expected: &[String]) -> Result<(), TelemetryError> {
    if found.iter().ne(expected.iter().map(String::as_str)) {
        return Err(TelemetryError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn parse_timestamp(s: &str, line: u64) -> Result<DateTime<Utc>, TelemetryError> {
    let ts = DateTime::parse_from_rfc3339(s)
        .map_err(|e| TelemetryError::MalformedRow { line, reason: format!("timestamp `{s}`: {e}") })?
        .with_timezone(&Utc);
    if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(TelemetryError::MalformedRow { line, reason: format!("timestamp `{s}` is not on an hour") });
    }
    Ok(ts)
}

fn parse_value(s: &str, label: FeatureLabel, line: u64) -> Result<f64, TelemetryError> {
    let v: f64 = s
        .parse()
        .map_err(|_| TelemetryError::MalformedRow { line, reason: format!("{label}: `{s}` is not a number") })?;
    if !v.is_finite() {
        return Err(TelemetryError::MalformedRow { line, reason: format!("{label}: non-finite value") });
    }
    Ok(v)
}

struct PendingSeries {
    labels: Vec<FeatureLabel>,
    rows: Vec<(DateTime<Utc>, Vec<f64>)>,
}

/// Parses telemetry rows and groups them into per-(cell, slice) series
/// sorted by timestamp.
pub fn read_telemetry<R: Read>(reader: R) -> Result<Vec<CellSeries>, TelemetryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(rdr.headers()?, &telemetry_header())?;

    let mut pending: BTreeMap<SeriesKey, PendingSeries> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| TelemetryError::MalformedRow { line, reason };

        let ts = parse_timestamp(&record[0], line)?;
        let index: u32 = record[2].parse().map_err(|_| malformed(format!("cell_index `{}`", &record[2])))?;
        let cell = CellId::new(&record[1], index).map_err(|e| malformed(e.to_string()))?;
        let slice: SliceKind = record[3].parse().map_err(|_| malformed(format!("slice `{}`", &record[3])))?;

        let mut labels = Vec::new();
        let mut values = Vec::new();
        for label in FeatureLabel::all() {
            let field = record[KEY_COLUMNS.len() + label.index()].trim();
            if field.is_empty() {
                continue;
            }
            if slice.is_service() && !label.available_per_slice() {
                return Err(TelemetryError::MixedSliceSchema { line, slice, label });
            }
            labels.push(label);
            values.push(parse_value(field, label, line)?);
        }
        if labels.first() != Some(&FeatureLabel::F0) {
            return Err(malformed("F0 is empty".into()));
        }

        let entry = pending
            .entry((cell, slice))
            .or_insert_with(|| PendingSeries { labels: labels.clone(), rows: Vec::new() });
        if entry.labels != labels {
            return Err(malformed("row fills a different set of counters than earlier rows of its series".into()));
        }
        entry.rows.push((ts, values));
    }

    pending
        .into_iter()
        .map(|((cell, slice), mut p)| {
            p.rows.sort_by_key(|(ts, _)| *ts);
            if let Some(dup) = p.rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(TelemetryError::DuplicateTimestamp { cell, slice, timestamp: dup[0].0 });
            }
            let mut features: BTreeMap<FeatureLabel, Vec<f64>> =
                p.labels.iter().map(|l| (*l, Vec::with_capacity(p.rows.len()))).collect();
            let mut timestamps = Vec::with_capacity(p.rows.len());
            for (ts, values) in p.rows {
                timestamps.push(ts);
                for (label, v) in p.labels.iter().zip(values) {
                    features.get_mut(label).expect("label registered").push(v);
                }
            }
            Ok(CellSeries { cell, slice, timestamps, features })
        })
        .collect()
}

pub fn read_handovers<R: Read>(reader: R) -> Result<HandoverMatrix, TelemetryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let expected: Vec<String> = HANDOVER_HEADER.iter().map(|s| s.to_string()).collect();
    check_header(rdr.headers()?, &expected)?;
    let mut matrix = HandoverMatrix::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| TelemetryError::MalformedRow { line, reason };
        let cell = |base: &str, idx: &str| -> Result<CellId, TelemetryError> {
            let idx = idx.parse().map_err(|_| malformed(format!("cell index `{idx}`")))?;
            CellId::new(base, idx).map_err(|e| malformed(e.to_string()))
        };
        let src = cell(&record[0], &record[1])?;
        let dst = cell(&record[2], &record[3])?;
        let rate: f64 = record[4].parse().map_err(|_| malformed(format!("rate `{}`", &record[4])))?;
        if matrix.rate(&src, &dst).is_some() {
            return Err(malformed(format!("duplicate edge {src} -> {dst}")));
        }
        matrix.insert(src, dst, rate)?;
    }
    Ok(matrix)
}

/// Reads the telemetry CSV and, optionally, the handover CSV.
pub fn load_telemetry(telemetry_path: &Path, handover_path: Option<&Path>) -> Result<TelemetryStore, TelemetryError> {
    let handovers = match handover_path {
        Some(p) => read_handovers(open(p)?)?,
        None => HandoverMatrix::new(),
    };
    let mut store = TelemetryStore::new(handovers);
    for s in read_telemetry(open(telemetry_path)?)? {
        store.insert(s)?;
    }
    Ok(store)
}

/// Writes every series in (cell, slice, time) order. Values use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_telemetry<W: Write>(store: &TelemetryStore, writer: W) -> Result<(), TelemetryError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(telemetry_header())?;
    let mut row: Vec<String> = Vec::with_capacity(KEY_COLUMNS.len() + FeatureLabel::COUNT);
    for s in store.series() {
        let columns: Vec<Option<&Vec<f64>>> = FeatureLabel::all().map(|l| s.features.get(&l)).collect();
        for (i, ts) in s.timestamps.iter().enumerate() {
            row.clear();
            row.push(format_timestamp(ts));
            row.push(s.cell.base_station.clone());
            row.push(s.cell.cell_index.to_string());
            row.push(s.slice.to_string());
            for col in &columns {
                row.push(col.map(|c| c[i].to_string()).unwrap_or_default());
            }
            wtr.write_record(&row)?;
        }
    }
    wtr.flush().map_err(|source| TelemetryError::Io { path: "<telemetry writer>".into(), source })?;
    Ok(())
}

pub fn write_handovers<W: Write>(matrix: &HandoverMatrix, writer: W) -> Result<(), TelemetryError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HANDOVER_HEADER)?;
    for (src, dst, rate) in matrix.iter() {
        wtr.write_record([
            src.base_station.clone(),
            src.cell_index.to_string(),
            dst.base_station.clone(),
            dst.cell_index.to_string(),
            rate.to_string(),
        ])?;
    }
    wtr.flush().map_err(|source| TelemetryError::Io { path: "<handover writer>".into(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header() -> String {
        telemetry_header().join(",")
    }

    fn row(ts: &str, base: &str, idx: u32, slice: &str, f0: &str, rest: &[&str]) -> String {
        let mut cols = vec![ts.to_string(), base.to_string(), idx.to_string(), slice.to_string(), f0.to_string()];
        for i in 0..19 {
            cols.push(rest.get(i).map(|s| s.to_string()).unwrap_or_default());
        }
        cols.join(",")
    }

    #[test]
    fn empty_file_gives_empty_store() {
        let series = read_telemetry(format!("{}\n", header()).as_bytes()).unwrap();
        assert!(series.is_empty());
    }

    #[test]
    fn groups_a_day_of_rows() {
        let mut text = header();
        // reversed order to exercise sorting
        for h in (0..24).rev() {
            text.push('\n');
            text.push_str(&row(&format!("2023-01-02T{h:02}:00:00Z"), "A", 2, "total", &h.to_string(), &[]));
        }
        let series = read_telemetry(text.as_bytes()).unwrap();
        assert_eq!(series.len(), 1);
        let s = &series[0];
        assert_eq!(s.cell, CellId::new("A", 2).unwrap());
        assert_eq!(s.slice, SliceKind::Total);
        assert_eq!(s.len(), 24);
        assert_eq!(s.f0()[0], 0.0);
        assert_eq!(s.f0()[23], 23.0);
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let text = format!(
            "{}\n{}\n{}\n",
            header(),
            row("2023-01-02T01:00:00Z", "A", 2, "total", "1", &[]),
            row("2023-01-02T01:00:00Z", "A", 2, "total", "2", &[])
        );
        assert!(matches!(read_telemetry(text.as_bytes()), Err(TelemetryError::DuplicateTimestamp { .. })));
    }

    #[test]
    fn malformed_rows_rejected() {
        for bad in [
            row("2023-01-02 01:00", "A", 2, "total", "1", &[]),
            row("2023-01-02T01:30:00Z", "A", 2, "total", "1", &[]),
            row("2023-01-02T01:00:00Z", "A", 2, "total", "abc", &[]),
            row("2023-01-02T01:00:00Z", "A", 2, "total", "", &["1"]),
            row("2023-01-02T01:00:00Z", "A", 2, "slicey", "1", &[]),
        ] {
            let text = format!("{}\n{}\n", header(), bad);
            assert!(
                matches!(read_telemetry(text.as_bytes()), Err(TelemetryError::MalformedRow { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn slice_rows_with_cell_only_counters_rejected() {
        let text = format!("{}\n{}\n", header(), row("2023-01-02T01:00:00Z", "A", 2, "voice", "1", &["1", "2", "3"]));
        assert!(matches!(read_telemetry(text.as_bytes()), Err(TelemetryError::MixedSliceSchema { .. })));
        let ok = format!("{}\n{}\n", header(), row("2023-01-02T01:00:00Z", "A", 2, "voice", "1", &["1", "2"]));
        assert_eq!(read_telemetry(ok.as_bytes()).unwrap()[0].features.len(), 3);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(matches!(read_telemetry("timestamp,cell\n".as_bytes()), Err(TelemetryError::Header { .. })));
    }

    #[test]
    fn handovers_parse() {
        let text = "src_base,src_index,dst_base,dst_index,rate_percent\nN,2,F,4,18.34\nF,4,F,1,32.44\n";
        let m = read_handovers(text.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        let f4 = CellId::new("F", 4).unwrap();
        assert_eq!(m.incoming(&f4), vec![(CellId::new("N", 2).unwrap(), 18.34)]);
        let self_edge = "src_base,src_index,dst_base,dst_index,rate_percent\nF,4,F,4,1\n";
        assert!(read_handovers(self_edge.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(values in proptest::collection::vec(
            prop_oneof![0.0f64..1e-6, 0.0f64..1e9, Just(0.0), Just(1e-300), Just(123456.789e10)], 1..30)
        ) {
            let start = "2023-03-06T05:00:00Z".parse().unwrap();
            let aux: Vec<f64> = values.iter().map(|v| v * 0.1 + 3.0).collect();
            let series = CellSeries::hourly(
                CellId::new("Q", 7).unwrap(),
                SliceKind::Data,
                start,
                BTreeMap::from([(FeatureLabel::F0, values.clone()), (FeatureLabel::ran(1).unwrap(), aux)]),
            );
            let mut store = TelemetryStore::default();
            store.insert(series.clone()).unwrap();
            let mut buf = Vec::new();
            write_telemetry(&store, &mut buf).unwrap();
            let back = read_telemetry(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), 1);
            for (a, b) in back[0].f0().iter().zip(series.f0()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(&back[0], &series);
        }
    }
}
