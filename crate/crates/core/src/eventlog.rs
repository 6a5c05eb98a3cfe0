//! Event log data model, CSV ingestion and the one-trace-per-line text format.
//!
//! A raw log is a bag of `(case id, timestamp, activity)` events. Grouping by
//! case and ordering by time yields traces; ordering the traces by their first
//! event yields the canonical [`EventLog`] every later stage works on.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::sanitize;

/// A single recorded event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub case_id: String,
    /// Parsed instant in microsecond ticks.
    pub timestamp: i64,
    /// Timestamp exactly as it appeared in the source.
    pub raw_timestamp: String,
    pub activity: String,
}

impl Event {
    pub fn new(case_id: impl Into<String>, timestamp: i64, activity: impl Into<String>) -> Self {
        Event {
            case_id: case_id.into(),
            timestamp,
            raw_timestamp: timestamp.to_string(),
            activity: activity.into(),
        }
    }
}

/// The ordered activity sequence of one case.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trace {
    pub case_id: String,
    pub activities: Vec<String>,
}

impl Trace {
    pub fn new(case_id: impl Into<String>, activities: Vec<String>) -> Self {
        Trace {
            case_id: case_id.into(),
            activities,
        }
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }
}

/// Ordered list of traces plus the set of activity labels they use.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    traces: Vec<Trace>,
    universe: BTreeSet<String>,
}

impl EventLog {
    /// Wraps traces that are already in their intended order.
    pub fn new(traces: Vec<Trace>) -> Self {
        let universe = traces
            .iter()
            .flat_map(|t| t.activities.iter().cloned())
            .collect();
        EventLog { traces, universe }
    }

    /// Builds a log from bare activity sequences, numbering cases from 1.
    pub fn from_sequences<I, T, S>(sequences: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let traces = sequences
            .into_iter()
            .enumerate()
            .map(|(i, seq)| Trace::new((i + 1).to_string(), seq.into_iter().map(Into::into).collect()))
            .collect();
        EventLog::new(traces)
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn into_traces(self) -> Vec<Trace> {
        self.traces
    }

    pub fn activity_universe(&self) -> &BTreeSet<String> {
        &self.universe
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    /// Activity sequences only, dropping case ids.
    pub fn sequences(&self) -> Vec<&[String]> {
        self.traces.iter().map(|t| t.activities.as_slice()).collect()
    }

    /// Sub-log of traces `range`, keeping their order.
    pub fn slice(&self, range: std::ops::Range<usize>) -> EventLog {
        EventLog::new(self.traces[range].to_vec())
    }
}

/// Groups events by case and applies the canonical ordering.
///
/// Events inside a case are sorted by `(timestamp, activity)`; fully tied
/// events keep their input order. Traces are sorted by
/// `(first timestamp, first activity, case id)`, which is a total order, so
/// any permutation of the same events yields the same log.
pub fn build_traces(events: impl IntoIterator<Item = Event>) -> EventLog {
    let mut by_case: BTreeMap<String, Vec<(i64, String)>> = BTreeMap::new();
    for e in events {
        by_case
            .entry(e.case_id)
            .or_default()
            .push((e.timestamp, e.activity));
    }

    let mut keyed: Vec<(i64, Trace)> = by_case
        .into_iter()
        .map(|(case_id, mut evs)| {
            // stable: equal (timestamp, activity) pairs keep input order
            evs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let first = evs[0].0;
            let activities = evs.into_iter().map(|(_, a)| a).collect();
            (first, Trace::new(case_id, activities))
        })
        .collect();

    keyed.sort_by(|(ta, a), (tb, b)| {
        ta.cmp(tb)
            .then_with(|| a.activities[0].cmp(&b.activities[0]))
            .then_with(|| a.case_id.cmp(&b.case_id))
    });

    EventLog::new(keyed.into_iter().map(|(_, t)| t).collect())
}

/// How timestamp cells are turned into ticks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TimeFormat {
    /// RFC 3339 / ISO-8601, with or without offset and fractional seconds;
    /// `T` or a space may separate date and time. Naive times are read as UTC.
    #[default]
    Iso8601,
    /// The cell is already an integer tick count.
    Integer,
    /// A `chrono` format string.
    Custom(String),
}

impl std::str::FromStr for TimeFormat {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "iso8601" | "iso" => TimeFormat::Iso8601,
            "integer" | "int" => TimeFormat::Integer,
            other => TimeFormat::Custom(other.to_string()),
        })
    }
}

impl TimeFormat {
    /// Parses `text` into microsecond ticks, or `None` when it does not match.
    pub fn parse(&self, text: &str) -> Option<i64> {
        let text = text.trim();
        match self {
            TimeFormat::Integer => text.parse().ok(),
            TimeFormat::Iso8601 => {
                if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
                    return Some(dt.timestamp_micros());
                }
                for fmt in ["%Y-%m-%dT%H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%#z"] {
                    if let Ok(dt) = DateTime::parse_from_str(text, fmt) {
                        return Some(dt.timestamp_micros());
                    }
                }
                for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
                    if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
                        return Some(dt.and_utc().timestamp_micros());
                    }
                }
                None
            }
            TimeFormat::Custom(fmt) => {
                if let Ok(dt) = DateTime::parse_from_str(text, fmt) {
                    return Some(dt.timestamp_micros());
                }
                if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
                    return Some(dt.and_utc().timestamp_micros());
                }
                NaiveDate::parse_from_str(text, fmt)
                    .ok()
                    .and_then(|d| d.and_hms_opt(0, 0, 0))
                    .map(|dt| dt.and_utc().timestamp_micros())
            }
        }
    }
}

/// Column names and parsing options for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub case_col: String,
    pub time_col: String,
    pub act_col: String,
    pub time_format: TimeFormat,
    /// Strip non-alphanumeric characters from activity labels while parsing.
    pub sanitize: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            case_col: "case:concept:name".into(),
            time_col: "time:timestamp".into(),
            act_col: "concept:name".into(),
            time_format: TimeFormat::Iso8601,
            sanitize: true,
        }
    }
}

/// Reads events from CSV text and builds the canonical log.
pub fn parse_csv_reader<R: std::io::Read>(reader: R, opts: &CsvOptions) -> Result<(EventLog, usize)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("missing column {name:?} in CSV header")))
    };
    let case_idx = column(&opts.case_col)?;
    let time_idx = column(&opts.time_col)?;
    let act_idx = column(&opts.act_col)?;

    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let raw_ts = field(time_idx);
        let timestamp = opts.time_format.parse(raw_ts).ok_or_else(|| Error::Parse {
            line,
            message: format!("unparseable timestamp {raw_ts:?}"),
        })?;
        let label = field(act_idx);
        let activity = if opts.sanitize {
            sanitize(label).map_err(|_| Error::Parse {
                line,
                message: format!("activity {label:?} is empty after sanitization"),
            })?
        } else if label.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty activity".into(),
            });
        } else {
            label.to_string()
        };
        events.push(Event {
            case_id: field(case_idx).to_string(),
            timestamp,
            raw_timestamp: raw_ts.to_string(),
            activity,
        });
    }
    let count = events.len();
    Ok((build_traces(events), count))
}

/// Parses a CSV event log file. See [`parse_csv_reader`].
pub fn parse_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<EventLog> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_reader(std::io::BufReader::new(file), opts).map(|(log, _)| log)
}

/// Serializes a log as one line per trace, activities joined by a single space.
pub fn to_text(log: &EventLog) -> Result<String> {
    let mut out = String::new();
    for (i, trace) in log.traces().iter().enumerate() {
        if trace.is_empty() {
            return Err(Error::format("text log", format!("trace {} is empty", i + 1)));
        }
        for (j, act) in trace.activities.iter().enumerate() {
            if act.is_empty() || act.chars().any(char::is_whitespace) {
                return Err(Error::format(
                    "text log",
                    format!("activity {act:?} in trace {} cannot be written", i + 1),
                ));
            }
            if j > 0 {
                out.push(' ');
            }
            out.push_str(act);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses the text log format. Case ids become 1-based line numbers.
pub fn from_text(text: &str) -> Result<EventLog> {
    let mut traces = Vec::new();
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(EventLog::default());
    }
    for (i, line) in body.split('\n').enumerate() {
        let activities: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if activities.is_empty() {
            return Err(Error::Parse {
                line: i as u64 + 1,
                message: "empty trace".into(),
            });
        }
        traces.push(Trace::new((i + 1).to_string(), activities));
    }
    Ok(EventLog::new(traces))
}

pub fn write_text(log: &EventLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_text(log)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_text(path: impl AsRef<Path>) -> Result<EventLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}

/// Summary statistics of a log. Length statistics are `None` for an empty log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub cases: usize,
    pub activity_instances: usize,
    pub variants: usize,
    pub unique_activities: usize,
    pub max_case_length: Option<usize>,
    pub min_case_length: Option<usize>,
    pub mean_case_length: Option<f64>,
    pub median_case_length: Option<f64>,
}

pub fn log_stats(log: &EventLog) -> StatReport {
    let mut lengths: Vec<usize> = log.traces().iter().map(Trace::len).collect();
    lengths.sort_unstable();
    let variants: HashSet<&[String]> = log.sequences().into_iter().collect();
    let n = lengths.len();
    let total: usize = lengths.iter().sum();
    let median = match n {
        0 => None,
        _ if n % 2 == 1 => Some(lengths[n / 2] as f64),
        _ => Some((lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0),
    };
    StatReport {
        cases: n,
        activity_instances: total,
        variants: variants.len(),
        unique_activities: log.activity_universe().len(),
        max_case_length: lengths.last().copied(),
        min_case_length: lengths.first().copied(),
        mean_case_length: (n > 0).then(|| total as f64 / n as f64),
        median_case_length: median,
    }
}

impl fmt::Display for StatReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| "-".to_string(), |v| v.to_string())
        }
        writeln!(f, "total cases        {}", self.cases)?;
        writeln!(f, "activity instances {}", self.activity_instances)?;
        writeln!(f, "trace variants     {}", self.variants)?;
        writeln!(f, "unique activities  {}", self.unique_activities)?;
        writeln!(f, "max case length    {}", opt(self.max_case_length))?;
        writeln!(f, "min case length    {}", opt(self.min_case_length))?;
        writeln!(
            f,
            "mean case length   {}",
            self.mean_case_length.map_or_else(|| "-".into(), |m| format!("{m:.2}"))
        )?;
        write!(f, "median case length {}", opt(self.median_case_length))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_l_events() -> Vec<Event> {
        [(2, 6, "d"), (2, 5, "b"), (1, 1, "a"), (1, 7, "c"), (2, 2, "a"), (2, 4, "b"), (1, 3, "b")]
            .into_iter()
            .map(|(c, t, a)| Event::new(c.to_string(), t, a))
            .collect()
    }

    #[test]
    fn builds_log_l() {
        let log = build_traces(log_l_events());
        assert_eq!(log.sequences(), vec![&["a", "b", "c"][..], &["a", "b", "b", "d"][..]]);
        assert_eq!(log.event_count(), 7);
    }

    #[test]
    fn equal_timestamps_sort_alphabetically() {
        let log = build_traces(vec![Event::new("1", 5, "b"), Event::new("1", 5, "a")]);
        assert_eq!(log.traces()[0].activities, vec!["a", "b"]);
    }

    #[test]
    fn trace_ties_break_on_first_activity() {
        // exhaustive over both input orders and both case id assignments
        for (ca, cz) in [("1", "2"), ("2", "1")] {
            let evs = vec![Event::new(cz, 3, "z"), Event::new(ca, 3, "a")];
            for perm in [evs.clone(), evs.iter().rev().cloned().collect()] {
                let log = build_traces(perm);
                assert_eq!(log.sequences(), vec![&["a"][..], &["z"][..]]);
            }
        }
    }

    #[test]
    fn csv_log_l() {
        let csv = "case,time,act\n2,6,d\n2,5,b\n1,1,a\n1,7,c\n2,2,a\n2,4,b\n1,3,b\n";
        let opts = CsvOptions {
            case_col: "case".into(),
            time_col: "time".into(),
            act_col: "act".into(),
            time_format: TimeFormat::Integer,
            sanitize: true,
        };
        let (log, rows) = parse_csv_reader(csv.as_bytes(), &opts).unwrap();
        assert_eq!(rows, 7);
        assert_eq!(to_text(&log).unwrap(), "a b c\na b b d\n");

        let (empty, rows) = parse_csv_reader("case,time,act\n".as_bytes(), &opts).unwrap();
        assert_eq!((empty.len(), rows), (0, 0));

        let (single, _) = parse_csv_reader("case,time,act\n1,1,a\n".as_bytes(), &opts).unwrap();
        assert_eq!(single.sequences(), vec![&["a"][..]]);
    }

    #[test]
    fn csv_errors() {
        let opts = CsvOptions {
            case_col: "case".into(),
            time_col: "time".into(),
            act_col: "activity".into(),
            time_format: TimeFormat::Iso8601,
            sanitize: true,
        };
        let err = parse_csv_reader("case,time,act\n".as_bytes(), &opts).unwrap_err();
        assert!(err.to_string().contains("\"activity\""), "{err}");

        let opts = CsvOptions { act_col: "act".into(), ..opts };
        let csv = "case,time,act\n1,2020-01-01T00:00:00,a\n1,yesterday,b\n";
        match parse_csv_reader(csv.as_bytes(), &opts).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn iso_timestamps() {
        let f = TimeFormat::Iso8601;
        let a = f.parse("2020-01-01T00:00:00").unwrap();
        assert_eq!(f.parse("2020-01-01 00:00:00.5").unwrap(), a + 500_000);
        assert_eq!(f.parse("2020-01-01T01:00:00+01:00").unwrap(), a);
        assert_eq!(f.parse("2020-01-01T00:00:00Z").unwrap(), a);
        assert!(f.parse("01/01/2020").is_none());
        let custom: TimeFormat = "%d/%m/%Y".parse().unwrap();
        assert_eq!(custom.parse("01/01/2020").unwrap(), a);
    }

    #[test]
    fn text_format() {
        let log = EventLog::from_sequences(vec![vec!["a", "b", "c"], vec!["a", "b", "b", "d"]]);
        assert_eq!(to_text(&log).unwrap(), "a b c\na b b d\n");

        let t2 = from_text("a1 a2\nb1\n").unwrap();
        assert_eq!(t2.traces().iter().map(Trace::len).collect::<Vec<_>>(), vec![2, 1]);

        assert!(matches!(from_text("a\n\nb\n"), Err(Error::Parse { line: 2, .. })));
        assert_eq!(from_text("").unwrap().len(), 0);
    }

    #[test]
    fn text_rejects_whitespace_activity() {
        let log = EventLog::from_sequences(vec![vec!["a b"]]);
        assert!(to_text(&log).is_err());
    }

    #[test]
    fn stats_of_log_l() {
        let s = log_stats(&build_traces(log_l_events()));
        assert_eq!(
            (s.cases, s.activity_instances, s.variants, s.unique_activities),
            (2, 7, 2, 4)
        );
        assert_eq!((s.max_case_length, s.min_case_length), (Some(4), Some(3)));
        assert_eq!(s.mean_case_length, Some(3.5));
        assert_eq!(s.median_case_length, Some(3.5));
        assert!(s.to_string().contains("mean case length   3.50"));
    }

    #[test]
    fn stats_edge_cases() {
        let s = log_stats(&EventLog::default());
        assert_eq!(s.cases, 0);
        assert_eq!(s.mean_case_length, None);
        assert_eq!(s.median_case_length, None);

        let s = log_stats(&EventLog::from_sequences(vec![vec!["a"]]));
        assert_eq!(s.max_case_length, Some(1));
        assert_eq!(s.min_case_length, Some(1));
        assert_eq!(s.mean_case_length, Some(1.0));
        assert_eq!(s.median_case_length, Some(1.0));
    }
}
