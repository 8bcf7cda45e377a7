//! CDR parsing and daily aggregation.
//!
//! A call is attributed entirely to the calendar date of its start time.
//! Calls crossing midnight are not split, and identical records are summed.

use std::collections::BTreeMap;
use std::io::BufRead;

use chrono::{NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const TIMESTAMP_FORMAT: &str = "%Y%m%d%H%M%S";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("malformed line: expected {expected} fields, found {found}")]
    MalformedLine { expected: usize, found: usize },
    #[error("bad timestamp {0:?}: expected 14-digit YYYYMMDDhhmmss")]
    BadTimestamp(String),
    #[error("bad duration {0:?}")]
    BadDuration(String),
    #[error("negative duration {0}")]
    NegativeDuration(i64),
    #[error("end time {end} precedes start time {start}")]
    EndBeforeStart {
        start: NaiveDateTime,
        end: NaiveDateTime,
    },
    #[error("invalid observation window: {first} .. {last}")]
    InvalidWindow { first: NaiveDate, last: NaiveDate },
    #[error("series has {found} values but the window spans {expected} days")]
    SeriesLength { expected: usize, found: usize },
    #[error("invalid field layout: {0}")]
    InvalidLayout(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// One parsed call log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdrRecord {
    pub service_nbr: String,
    pub opposite_no: String,
    pub start_time: NaiveDateTime,
    pub end_time: NaiveDateTime,
    /// Call length in whole seconds.
    pub duration: u64,
}

impl CdrRecord {
    /// True when `end_time - start_time` disagrees with the logged duration.
    /// The logged duration is always the one aggregated.
    pub fn duration_mismatch(&self) -> bool {
        let span = (self.end_time - self.start_time).num_seconds();
        span != self.duration as i64
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_time.date()
    }
}

/// Column positions of the five fields the pipeline uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldLayout {
    pub columns: usize,
    pub service_nbr: usize,
    pub opposite_no: usize,
    pub start_time: usize,
    pub end_time: usize,
    pub duration: usize,
    pub delimiter: u8,
}

impl Default for FieldLayout {
    /// The 13-column operator export order:
    /// `SERVICE_NBR, CALL_TYPE, OPPOSITE_NO, TOLLTYPE_ID, ROAM_TYPE,
    /// START_TIME, END_TIME, DURATION, CITY_ID, ROAM_CITY_ID, OPPCITY_ID,
    /// LAC_ID, CELL_ID`.
    fn default() -> Self {
        Self {
            columns: 13,
            service_nbr: 0,
            opposite_no: 2,
            start_time: 5,
            end_time: 6,
            duration: 7,
            delimiter: b',',
        }
    }
}

impl FieldLayout {
    /// Compact five-column layout `service_nbr, opposite_no, start, end, duration`.
    pub fn compact() -> Self {
        Self {
            columns: 5,
            service_nbr: 0,
            opposite_no: 1,
            start_time: 2,
            end_time: 3,
            duration: 4,
            delimiter: b',',
        }
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let idx = [
            self.service_nbr,
            self.opposite_no,
            self.start_time,
            self.end_time,
            self.duration,
        ];
        if let Some(bad) = idx.iter().find(|&&i| i >= self.columns) {
            return Err(IngestError::InvalidLayout(format!(
                "field index {bad} out of range for {} columns",
                self.columns
            )));
        }
        for (i, a) in idx.iter().enumerate() {
            if idx[i + 1..].contains(a) {
                return Err(IngestError::InvalidLayout(format!(
                    "field index {a} used twice"
                )));
            }
        }
        Ok(())
    }

    /// Parses `key=value` pairs such as
    /// `columns=5,service_nbr=0,opposite_no=1,start_time=2,end_time=3,duration=4`.
    /// Keys not given keep their default value.
    pub fn parse_spec(spec: &str) -> Result<Self, IngestError> {
        let mut layout = Self::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| IngestError::InvalidLayout(format!("expected key=value, got {part:?}")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| IngestError::InvalidLayout(format!("bad index in {part:?}")))?;
            match key.trim() {
                "columns" => layout.columns = value,
                "service_nbr" => layout.service_nbr = value,
                "opposite_no" => layout.opposite_no = value,
                "start_time" => layout.start_time = value,
                "end_time" => layout.end_time = value,
                "duration" => layout.duration = value,
                other => {
                    return Err(IngestError::InvalidLayout(format!("unknown field {other:?}")))
                }
            }
        }
        layout.validate()?;
        Ok(layout)
    }
}

/// Parses a 14-digit `YYYYMMDDhhmmss` timestamp.
pub fn parse_timestamp(raw: &str) -> Result<NaiveDateTime, IngestError> {
    let raw = raw.trim();
    if raw.len() != 14 || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return Err(IngestError::BadTimestamp(raw.to_string()));
    }
    NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT)
        .map_err(|_| IngestError::BadTimestamp(raw.to_string()))
}

pub fn parse_cdr_line(line: &str, layout: &FieldLayout) -> Result<CdrRecord, IngestError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(layout.delimiter as char).collect();
    if fields.len() != layout.columns {
        return Err(IngestError::MalformedLine {
            expected: layout.columns,
            found: fields.len(),
        });
    }
    let start_time = parse_timestamp(fields[layout.start_time])?;
    let end_time = parse_timestamp(fields[layout.end_time])?;
    let raw_duration = fields[layout.duration].trim();
    let duration: i64 = raw_duration
        .parse()
        .map_err(|_| IngestError::BadDuration(raw_duration.to_string()))?;
    if duration < 0 {
        return Err(IngestError::NegativeDuration(duration));
    }
    if end_time < start_time {
        return Err(IngestError::EndBeforeStart {
            start: start_time,
            end: end_time,
        });
    }
    Ok(CdrRecord {
        service_nbr: fields[layout.service_nbr].trim().to_string(),
        opposite_no: fields[layout.opposite_no].trim().to_string(),
        start_time,
        end_time,
        duration: duration as u64,
    })
}

/// Inclusive span of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservationWindow {
    first_day: NaiveDate,
    last_day: NaiveDate,
}

impl ObservationWindow {
    pub fn new(first_day: NaiveDate, last_day: NaiveDate) -> Result<Self, IngestError> {
        if last_day < first_day {
            return Err(IngestError::InvalidWindow {
                first: first_day,
                last: last_day,
            });
        }
        Ok(Self { first_day, last_day })
    }

    /// Window of `day_count` days starting at `first_day`.
    pub fn starting(first_day: NaiveDate, day_count: usize) -> Result<Self, IngestError> {
        if day_count == 0 {
            return Err(IngestError::InvalidWindow {
                first: first_day,
                last: first_day,
            });
        }
        let last_day = first_day + chrono::Duration::days(day_count as i64 - 1);
        Self::new(first_day, last_day)
    }

    pub fn first_day(&self) -> NaiveDate {
        self.first_day
    }

    pub fn last_day(&self) -> NaiveDate {
        self.last_day
    }

    pub fn day_count(&self) -> usize {
        (self.last_day - self.first_day).num_days() as usize + 1
    }

    /// Zero-based day offset of `date`, or `None` if outside the window.
    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        if date < self.first_day || date > self.last_day {
            None
        } else {
            Some((date - self.first_day).num_days() as usize)
        }
    }
}

/// Gap-free per-user daily call seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyTrafficSeries {
    user: String,
    window: ObservationWindow,
    values: Vec<u64>,
}

impl DailyTrafficSeries {
    /// Fails unless `values` has exactly one entry per window day.
    pub fn new(
        user: impl Into<String>,
        window: ObservationWindow,
        values: Vec<u64>,
    ) -> Result<Self, IngestError> {
        if values.len() != window.day_count() {
            return Err(IngestError::SeriesLength {
                expected: window.day_count(),
                found: values.len(),
            });
        }
        Ok(Self {
            user: user.into(),
            window,
            values,
        })
    }

    pub fn zeros(user: impl Into<String>, window: ObservationWindow) -> Self {
        Self {
            user: user.into(),
            window,
            values: vec![0; window.day_count()],
        }
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn window(&self) -> ObservationWindow {
        self.window
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn total_seconds(&self) -> u64 {
        self.values.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Partial per-user sums. Merging is commutative and associative, so
/// aggregators built on disjoint chunks of the input can be combined in
/// any order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyAggregator {
    window: ObservationWindow,
    users: BTreeMap<String, Vec<u64>>,
    out_of_window: u64,
}

impl DailyAggregator {
    pub fn new(window: ObservationWindow) -> Self {
        Self {
            window,
            users: BTreeMap::new(),
            out_of_window: 0,
        }
    }

    pub fn add(&mut self, record: &CdrRecord) {
        let Some(day) = self.window.day_index(record.start_date()) else {
            self.out_of_window += 1;
            return;
        };
        let days = self.window.day_count();
        let slot = self
            .users
            .entry(record.service_nbr.clone())
            .or_insert_with(|| vec![0; days]);
        slot[day] += record.duration;
    }

    pub fn merge(mut self, other: Self) -> Self {
        debug_assert_eq!(self.window, other.window);
        self.out_of_window += other.out_of_window;
        for (user, values) in other.users {
            match self.users.get_mut(&user) {
                Some(mine) => mine.iter_mut().zip(values).for_each(|(a, b)| *a += b),
                None => {
                    self.users.insert(user, values);
                }
            }
        }
        self
    }

    /// Records discarded because their start date fell outside the window.
    pub fn out_of_window(&self) -> u64 {
        self.out_of_window
    }

    pub fn finish(self) -> BTreeMap<String, DailyTrafficSeries> {
        let window = self.window;
        self.users
            .into_iter()
            .map(|(user, values)| {
                let series = DailyTrafficSeries {
                    user: user.clone(),
                    window,
                    values,
                };
                (user, series)
            })
            .collect()
    }
}

/// Sums call durations per user and start date. Out-of-window records are
/// tallied in the returned counter.
pub fn aggregate_daily<'a, I>(
    records: I,
    window: ObservationWindow,
) -> (BTreeMap<String, DailyTrafficSeries>, u64)
where
    I: IntoIterator<Item = &'a CdrRecord>,
{
    let mut agg = DailyAggregator::new(window);
    for r in records {
        agg.add(r);
    }
    let skipped = agg.out_of_window();
    (agg.finish(), skipped)
}

/// Parallel fold of [`aggregate_daily`].
pub fn aggregate_daily_par(
    records: &[CdrRecord],
    window: ObservationWindow,
) -> (BTreeMap<String, DailyTrafficSeries>, u64) {
    let agg = records
        .par_iter()
        .fold(
            || DailyAggregator::new(window),
            |mut acc, r| {
                acc.add(r);
                acc
            },
        )
        .reduce(|| DailyAggregator::new(window), DailyAggregator::merge);
    let skipped = agg.out_of_window();
    (agg.finish(), skipped)
}

/// Counters collected while reading CDR text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestDiagnostics {
    pub lines_read: u64,
    pub blank_lines: u64,
    pub header_lines: u64,
    pub parsed: u64,
    pub skipped: u64,
    pub malformed_line: u64,
    pub bad_timestamp: u64,
    pub bad_duration: u64,
    pub negative_duration: u64,
    pub end_before_start: u64,
    pub out_of_window: u64,
    pub duration_mismatch: u64,
}

impl IngestDiagnostics {
    fn record_error(&mut self, err: &IngestError) {
        self.skipped += 1;
        match err {
            IngestError::MalformedLine { .. } => self.malformed_line += 1,
            IngestError::BadTimestamp(_) => self.bad_timestamp += 1,
            IngestError::BadDuration(_) => self.bad_duration += 1,
            IngestError::NegativeDuration(_) => self.negative_duration += 1,
            IngestError::EndBeforeStart { .. } => self.end_before_start += 1,
            _ => {}
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.lines_read += other.lines_read;
        self.blank_lines += other.blank_lines;
        self.header_lines += other.header_lines;
        self.parsed += other.parsed;
        self.skipped += other.skipped;
        self.malformed_line += other.malformed_line;
        self.bad_timestamp += other.bad_timestamp;
        self.bad_duration += other.bad_duration;
        self.negative_duration += other.negative_duration;
        self.end_before_start += other.end_before_start;
        self.out_of_window += other.out_of_window;
        self.duration_mismatch += other.duration_mismatch;
    }
}

fn is_header(line: &str, layout: &FieldLayout) -> bool {
    line.split(layout.delimiter as char)
        .nth(layout.service_nbr)
        .is_some_and(|f| f.trim().eq_ignore_ascii_case("SERVICE_NBR"))
}

/// Streams CDR lines from `reader` into `agg`, skipping and counting bad rows.
pub fn ingest_reader<R: BufRead>(
    reader: R,
    layout: &FieldLayout,
    agg: &mut DailyAggregator,
) -> Result<IngestDiagnostics, IngestError> {
    let mut diag = IngestDiagnostics::default();
    let before = agg.out_of_window();
    for line in reader.lines() {
        let line = line.map_err(|e| IngestError::Io(e.to_string()))?;
        diag.lines_read += 1;
        if line.trim().is_empty() {
            diag.blank_lines += 1;
            continue;
        }
        if is_header(&line, layout) {
            diag.header_lines += 1;
            continue;
        }
        match parse_cdr_line(&line, layout) {
            Ok(rec) => {
                diag.parsed += 1;
                if rec.duration_mismatch() {
                    diag.duration_mismatch += 1;
                }
                agg.add(&rec);
            }
            Err(e) => diag.record_error(&e),
        }
    }
    diag.out_of_window = agg.out_of_window() - before;
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Datelike, Timelike};

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn line(user: &str, start: &str, end: &str, dur: &str) -> String {
        format!("{user},1,peer,0,0,{start},{end},{dur},551,551,551,1,2")
    }

    fn rec(user: &str, start: &str, dur: u64) -> CdrRecord {
        let start_time = parse_timestamp(start).unwrap();
        CdrRecord {
            service_nbr: user.into(),
            opposite_no: "peer".into(),
            start_time,
            end_time: start_time + chrono::Duration::seconds(dur as i64),
            duration: dur,
        }
    }

    #[test]
    fn parses_documented_timestamp() {
        let r = parse_cdr_line(
            &line("u1", "20141017154209", "20141017154509", "180"),
            &FieldLayout::default(),
        )
        .unwrap();
        assert_eq!(r.start_time.year(), 2014);
        assert_eq!(r.start_time.month(), 10);
        assert_eq!(r.start_time.day(), 17);
        assert_eq!(
            (r.start_time.hour(), r.start_time.minute(), r.start_time.second()),
            (15, 42, 9)
        );
        assert_eq!(r.duration, 180);
        assert!(!r.duration_mismatch());
    }

    #[test]
    fn zero_duration() {
        let r = parse_cdr_line(
            &line("u1", "20141017154209", "20141017154209", "0"),
            &FieldLayout::default(),
        )
        .unwrap();
        assert_eq!(r.duration, 0);
    }

    #[test]
    fn rejects_bad_rows() {
        let l = FieldLayout::default();
        assert!(matches!(
            parse_cdr_line(&line("u", "20141399000000", "20141017154209", "1"), &l),
            Err(IngestError::BadTimestamp(_))
        ));
        assert!(matches!(
            parse_cdr_line(&line("u", "2014101715420", "20141017154209", "1"), &l),
            Err(IngestError::BadTimestamp(_))
        ));
        assert!(matches!(
            parse_cdr_line(&line("u", "20141017154209", "20141017154209", "-5"), &l),
            Err(IngestError::NegativeDuration(-5))
        ));
        assert!(matches!(
            parse_cdr_line("a,b,c", &l),
            Err(IngestError::MalformedLine { expected: 13, found: 3 })
        ));
        assert!(matches!(
            parse_cdr_line(&line("u", "20141017154209", "20141017154100", "5"), &l),
            Err(IngestError::EndBeforeStart { .. })
        ));
    }

    #[test]
    fn window_span() {
        let w = ObservationWindow::new(day(2014, 7, 1), day(2014, 12, 31)).unwrap();
        assert_eq!(w.day_count(), 184);
        assert_eq!(w.day_index(day(2014, 7, 1)), Some(0));
        assert_eq!(w.day_index(day(2014, 12, 31)), Some(183));
        assert_eq!(w.day_index(day(2015, 1, 1)), None);
        assert!(ObservationWindow::new(day(2014, 7, 2), day(2014, 7, 1)).is_err());
    }

    #[test]
    fn aggregation_sums_and_zero_fills() {
        let w = ObservationWindow::starting(day(2014, 7, 1), 3).unwrap();
        let records = vec![
            rec("a", "20140701080000", 60),
            rec("a", "20140701230000", 40),
            rec("a", "20140703120000", 7),
            rec("b", "20140630120000", 99),
        ];
        let (series, skipped) = aggregate_daily(&records, w);
        assert_eq!(skipped, 1);
        assert_eq!(series.len(), 1);
        assert_eq!(series["a"].values(), &[100, 0, 7]);
    }

    #[test]
    fn empty_stream() {
        let w = ObservationWindow::starting(day(2014, 7, 1), 3).unwrap();
        let (series, skipped) = aggregate_daily(&[], w);
        assert!(series.is_empty());
        assert_eq!(skipped, 0);
    }

    #[test]
    fn midnight_call_stays_on_start_date() {
        let w = ObservationWindow::starting(day(2014, 7, 1), 2).unwrap();
        let (series, _) = aggregate_daily(&[rec("a", "20140701235900", 600)], w);
        assert_eq!(series["a"].values(), &[600, 0]);
    }

    #[test]
    fn reader_counts_diagnostics() {
        let w = ObservationWindow::starting(day(2014, 7, 1), 3).unwrap();
        let text = [
            "SERVICE_NBR,CALL_TYPE,OPPOSITE_NO,TOLLTYPE_ID,ROAM_TYPE,START_TIME,END_TIME,DURATION,CITY_ID,ROAM_CITY_ID,OPPCITY_ID,LAC_ID,CELL_ID".to_string(),
            line("a", "20140701080000", "20140701080100", "60"),
            line("a", "20140701080000", "20140701080100", "61"),
            "garbage".to_string(),
            String::new(),
            line("a", "20140801080000", "20140801080100", "60"),
        ]
        .join("\n");
        let mut agg = DailyAggregator::new(w);
        let diag = ingest_reader(text.as_bytes(), &FieldLayout::default(), &mut agg).unwrap();
        assert_eq!(diag.lines_read, 6);
        assert_eq!(diag.header_lines, 1);
        assert_eq!(diag.blank_lines, 1);
        assert_eq!(diag.parsed, 3);
        assert_eq!(diag.skipped, 1);
        assert_eq!(diag.malformed_line, 1);
        assert_eq!(diag.out_of_window, 1);
        assert_eq!(diag.duration_mismatch, 1);
        assert_eq!(agg.finish()["a"].values(), &[121, 0, 0]);
    }

    #[test]
    fn layout_spec() {
        let l = FieldLayout::parse_spec(
            "columns=5,service_nbr=0,opposite_no=1,start_time=2,end_time=3,duration=4",
        )
        .unwrap();
        assert_eq!(l, FieldLayout::compact());
        assert!(FieldLayout::parse_spec("columns=3").is_err());
        assert!(FieldLayout::parse_spec("duration=0").is_err());
        assert!(FieldLayout::parse_spec("bogus=1").is_err());
    }
}
