//! Text serialization of daily series and quantized sequences.
//!
//! A series cache is a directory holding `window.json` (the observation
//! window) and `series.csv` with rows `user_id,day_index,seconds`. Every
//! user has exactly one row per window day, so the cache round-trips
//! losslessly, including users with no traffic at all.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{DailyTrafficSeries, ObservationWindow};
use crate::quantizer::StateSequence;

pub const SERIES_FILE: &str = "series.csv";
pub const WINDOW_FILE: &str = "window.json";

#[derive(Debug, Error)]
pub enum SeriesIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad series cache: {0}")]
    Format(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow<'a> {
    user_id: &'a str,
    day_index: usize,
    seconds: u64,
}

#[derive(Debug, Deserialize)]
struct OwnedSeriesRow {
    user_id: String,
    day_index: usize,
    seconds: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowMeta {
    first_day: chrono::NaiveDate,
    last_day: chrono::NaiveDate,
    day_count: usize,
    users: usize,
}

pub fn write_series_csv<W: Write>(writer: W, series: &[DailyTrafficSeries]) -> Result<(), SeriesIoError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["user_id", "day_index", "seconds"])?;
    for s in series {
        for (day_index, &seconds) in s.values().iter().enumerate() {
            w.serialize(SeriesRow {
                user_id: s.user(),
                day_index,
                seconds,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads rows back into series over `window`, in first-appearance order.
pub fn read_series_csv<R: Read>(
    reader: R,
    window: ObservationWindow,
) -> Result<Vec<DailyTrafficSeries>, SeriesIoError> {
    let days = window.day_count();
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<String, Vec<Option<u64>>> = BTreeMap::new();
    let mut r = csv::Reader::from_reader(reader);
    for row in r.deserialize() {
        let row: OwnedSeriesRow = row?;
        if row.day_index >= days {
            return Err(SeriesIoError::Format(format!(
                "user {} has day_index {} outside a {days}-day window",
                row.user_id, row.day_index
            )));
        }
        let slot = values.entry(row.user_id.clone()).or_insert_with(|| {
            order.push(row.user_id.clone());
            vec![None; days]
        });
        if slot[row.day_index].replace(row.seconds).is_some() {
            return Err(SeriesIoError::Format(format!(
                "user {} has day {} twice",
                row.user_id, row.day_index
            )));
        }
    }
    order
        .into_iter()
        .map(|user| {
            let v = values.remove(&user).expect("user recorded");
            let full: Option<Vec<u64>> = v.into_iter().collect();
            let full = full.ok_or_else(|| SeriesIoError::Format(format!("user {user} has missing days")))?;
            DailyTrafficSeries::new(user, window, full).map_err(|e| SeriesIoError::Format(e.to_string()))
        })
        .collect()
}

/// Writes `window.json` and `series.csv` into `dir`.
pub fn save_cache(
    dir: &Path,
    window: ObservationWindow,
    series: &[DailyTrafficSeries],
) -> Result<(), SeriesIoError> {
    fs::create_dir_all(dir)?;
    if let Some(bad) = series.iter().find(|s| s.window() != window) {
        return Err(SeriesIoError::Format(format!(
            "user {} does not use the cache window",
            bad.user()
        )));
    }
    let meta = WindowMeta {
        first_day: window.first_day(),
        last_day: window.last_day(),
        day_count: window.day_count(),
        users: series.len(),
    };
    let mut f = BufWriter::new(File::create(dir.join(WINDOW_FILE))?);
    serde_json::to_writer_pretty(&mut f, &meta)?;
    f.write_all(b"\n")?;
    f.flush()?;
    write_series_csv(BufWriter::new(File::create(dir.join(SERIES_FILE))?), series)
}

pub fn cache_exists(dir: &Path) -> bool {
    dir.join(WINDOW_FILE).is_file() && dir.join(SERIES_FILE).is_file()
}

pub fn load_cache(dir: &Path) -> Result<(ObservationWindow, Vec<DailyTrafficSeries>), SeriesIoError> {
    let meta: WindowMeta = serde_json::from_reader(BufReader::new(File::open(dir.join(WINDOW_FILE))?))?;
    let window = ObservationWindow::new(meta.first_day, meta.last_day)
        .map_err(|e| SeriesIoError::Format(e.to_string()))?;
    if window.day_count() != meta.day_count {
        return Err(SeriesIoError::Format("day_count disagrees with window dates".into()));
    }
    let series = read_series_csv(BufReader::new(File::open(dir.join(SERIES_FILE))?), window)?;
    if series.len() != meta.users {
        return Err(SeriesIoError::Format(format!(
            "window.json lists {} users but series.csv has {}",
            meta.users,
            series.len()
        )));
    }
    Ok((window, series))
}

/// Rows `user_id,day_index,state`.
pub fn write_states_csv<'a, W, I>(writer: W, sequences: I) -> Result<(), SeriesIoError>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a StateSequence)>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "day_index", "state"])?;
    for (user, seq) in sequences {
        for (day, state) in seq.states().iter().enumerate() {
            w.write_record([user, &day.to_string(), &state.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
