//! Event logs to windowed activity profiles.
//!
//! Events arrive already tagged with a topic. Files are JSON lines
//! (`{"ts": RFC 3339, "entity": ..., "topic": ..., "weight": optional}`) or CSV
//! with header `ts,entity,topic,weight`.

mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topic_grids::{ActivityProfile, TopicId, Window};

pub use synth::{synthesize, Anomaly, Scenario, ScenarioConfig};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read events: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("window width must be positive and count at least 1")]
    BadWindowSpec,
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, IngestError>;

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub ts: DateTime<Utc>,
    pub entity: String,
    pub topic: TopicId,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl ActivityEvent {
    fn check(self) -> std::result::Result<Self, String> {
        if !self.weight.is_finite() || self.weight < 0.0 {
            return Err(format!("weight must be finite and nonnegative, got {}", self.weight));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Stop at the first malformed line.
    #[default]
    Strict,
    /// Skip malformed lines and report them.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    JsonLines,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedEvents {
    pub events: Vec<ActivityEvent>,
    pub rejected: Vec<LineError>,
}

/// Parses a file, picking CSV for a `.csv` extension and JSON lines otherwise.
pub fn parse_events_file(path: &Path, mode: ParseMode) -> Result<ParsedEvents> {
    let format = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        EventFormat::Csv
    } else {
        EventFormat::JsonLines
    };
    parse_events(std::fs::File::open(path)?, format, mode)
}

pub fn parse_events<R: Read>(reader: R, format: EventFormat, mode: ParseMode) -> Result<ParsedEvents> {
    let mut out = ParsedEvents::default();
    let mut record = |line: usize, parsed: std::result::Result<ActivityEvent, String>| -> Result<()> {
        match parsed.and_then(ActivityEvent::check) {
            Ok(ev) => out.events.push(ev),
            Err(message) if mode == ParseMode::Strict => return Err(IngestError::Malformed { line, message }),
            Err(message) => {
                log::warn!("skipping line {line}: {message}");
                out.rejected.push(LineError { line, message });
            }
        }
        Ok(())
    };
    match format {
        EventFormat::JsonLines => {
            for (i, line) in std::io::BufReader::new(reader).lines().enumerate() {
                let line_no = i + 1;
                let text = line?;
                if text.trim().is_empty() {
                    continue;
                }
                record(line_no, serde_json::from_str::<ActivityEvent>(&text).map_err(|e| e.to_string()))?;
            }
        }
        EventFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
            let header = rdr
                .headers()
                .map_err(|e| IngestError::Malformed { line: 1, message: e.to_string() })?
                .clone();
            let names: Vec<&str> = header.iter().collect();
            if names != ["ts", "entity", "topic", "weight"] && names != ["ts", "entity", "topic"] {
                return Err(IngestError::Malformed {
                    line: 1,
                    message: format!("expected header ts,entity,topic,weight, got {}", names.join(",")),
                });
            }
            for (i, row) in rdr.records().enumerate() {
                let line_no = i + 2;
                let parsed = row.map_err(|e| e.to_string()).and_then(|r| csv_event(&r));
                record(line_no, parsed)?;
            }
        }
    }
    Ok(out)
}

fn csv_event(r: &csv::StringRecord) -> std::result::Result<ActivityEvent, String> {
    if !(3..=4).contains(&r.len()) {
        return Err(format!("expected 3 or 4 fields, got {}", r.len()));
    }
    let ts = DateTime::parse_from_rfc3339(&r[0])
        .map_err(|e| format!("bad timestamp {:?}: {e}", &r[0]))?
        .with_timezone(&Utc);
    let weight = match r.get(3) {
        None | Some("") => 1.0,
        Some(w) => w.parse().map_err(|_| format!("bad weight {w:?}"))?,
    };
    Ok(ActivityEvent { ts, entity: r[1].to_string(), topic: r[2].to_string(), weight })
}

/// `count` contiguous half-open windows of `width_seconds` starting at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub origin: DateTime<Utc>,
    pub width_seconds: i64,
    pub count: usize,
}

impl WindowSpec {
    pub fn new(origin: DateTime<Utc>, width: Duration, count: usize) -> Result<Self> {
        let spec = WindowSpec { origin, width_seconds: width.num_seconds(), count };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_seconds <= 0 || self.count == 0 {
            return Err(IngestError::BadWindowSpec);
        }
        Ok(())
    }

    pub fn width(&self) -> Duration {
        Duration::seconds(self.width_seconds)
    }

    pub fn window(&self, index: usize) -> Window {
        let start = self.origin + self.width() * index as i32;
        Window { start, end: start + self.width() }
    }

    pub fn windows(&self) -> Vec<Window> {
        (0..self.count).map(|i| self.window(i)).collect()
    }

    /// Window holding `ts`; a timestamp on a boundary belongs to the later window.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let offset = (ts - self.origin).num_milliseconds();
        if offset < 0 {
            return None;
        }
        let idx = (offset / (self.width_seconds * 1000)) as usize;
        (idx < self.count).then_some(idx)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowedProfiles {
    /// Sorted by entity, then window; every entity gets every window.
    pub profiles: Vec<ActivityProfile>,
    /// Events outside the spec's time range.
    pub dropped: usize,
}

impl WindowedProfiles {
    pub fn entities(&self) -> BTreeSet<&str> {
        self.profiles.iter().map(|p| p.entity_id.as_str()).collect()
    }

    pub fn get(&self, entity: &str, window: &Window) -> Option<&ActivityProfile> {
        self.profiles.iter().find(|p| p.entity_id == entity && p.window == *window)
    }

    pub fn for_entity<'a>(&'a self, entity: &'a str) -> impl Iterator<Item = &'a ActivityProfile> + 'a {
        self.profiles.iter().filter(move |p| p.entity_id == entity)
    }
}

/// Sums event weights per entity, window and topic.
///
/// Entities that pass `entity_filter` (all, when `None`) and have at least one
/// event anywhere get a profile for every window, empty or not.
pub fn window_profiles(
    events: &[ActivityEvent],
    spec: &WindowSpec,
    entity_filter: Option<&BTreeSet<String>>,
) -> WindowedProfiles {
    let windows = spec.windows();
    let keep = |e: &str| entity_filter.is_none_or(|f| f.contains(e));
    let mut acc: BTreeMap<&str, Vec<(BTreeMap<TopicId, f64>, BTreeMap<TopicId, u64>)>> = BTreeMap::new();
    let mut dropped = 0;
    for ev in events.iter().filter(|e| keep(&e.entity)) {
        let slots = acc
            .entry(ev.entity.as_str())
            .or_insert_with(|| vec![(BTreeMap::new(), BTreeMap::new()); windows.len()]);
        match spec.index_of(ev.ts) {
            Some(i) => {
                *slots[i].0.entry(ev.topic.clone()).or_default() += ev.weight;
                *slots[i].1.entry(ev.topic.clone()).or_default() += 1;
            }
            None => dropped += 1,
        }
    }
    let profiles = acc
        .into_iter()
        .flat_map(|(entity, slots)| {
            windows.iter().zip(slots).map(move |(w, (weights, event_counts))| ActivityProfile {
                entity_id: entity.to_string(),
                window: *w,
                weights,
                event_counts,
            })
        })
        .collect();
    WindowedProfiles { profiles, dropped }
}

/// Adds two profile sets computed over the same windows.
pub fn merge_profiles(a: &WindowedProfiles, b: &WindowedProfiles) -> WindowedProfiles {
    let mut map: BTreeMap<(String, Window), ActivityProfile> = BTreeMap::new();
    for p in a.profiles.iter().chain(&b.profiles) {
        match map.entry((p.entity_id.clone(), p.window)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(p.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let m = o.get_mut();
                for (t, w) in &p.weights {
                    *m.weights.entry(t.clone()).or_default() += w;
                }
                for (t, c) in &p.event_counts {
                    *m.event_counts.entry(t.clone()).or_default() += c;
                }
            }
        }
    }
    WindowedProfiles { profiles: map.into_values().collect(), dropped: a.dropped + b.dropped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2016, 1, 1, h, 0, 0).unwrap()
    }

    fn ev(h: u32, entity: &str, topic: &str, weight: f64) -> ActivityEvent {
        ActivityEvent { ts: ts(h), entity: entity.into(), topic: topic.into(), weight }
    }

    fn spec() -> WindowSpec {
        WindowSpec::new(ts(0), Duration::hours(4), 3).unwrap()
    }

    #[test]
    fn default_weight_is_one() {
        let text = r#"{"ts":"2016-01-01T00:00:00Z","entity":"u1","topic":"t1"}"#;
        let p = parse_events(text.as_bytes(), EventFormat::JsonLines, ParseMode::Strict).unwrap();
        assert_eq!(p.events, vec![ev(0, "u1", "t1", 1.0)]);
    }

    #[test]
    fn negative_weight_rejected() {
        let text = concat!(
            r#"{"ts":"2016-01-01T00:00:00Z","entity":"u1","topic":"t1","weight":-1}"#,
            "\n",
            r#"{"ts":"2016-01-01T01:00:00Z","entity":"u1","topic":"t1"}"#,
        );
        let strict = parse_events(text.as_bytes(), EventFormat::JsonLines, ParseMode::Strict);
        assert!(matches!(strict, Err(IngestError::Malformed { line: 1, .. })));
        let lenient = parse_events(text.as_bytes(), EventFormat::JsonLines, ParseMode::Lenient).unwrap();
        assert_eq!(lenient.events.len(), 1);
        assert_eq!(lenient.rejected[0].line, 1);
    }

    #[test]
    fn order_is_preserved() {
        let text = "ts,entity,topic,weight\n\
                    2016-01-01T02:00:00Z,u1,t2,1\n\
                    2016-01-01T00:00:00Z,u1,t1,\n\
                    2016-01-01T01:00:00+00:00,u1,t1,2.5\n";
        let p = parse_events(text.as_bytes(), EventFormat::Csv, ParseMode::Strict).unwrap();
        assert_eq!(p.events, vec![ev(2, "u1", "t2", 1.0), ev(0, "u1", "t1", 1.0), ev(1, "u1", "t1", 2.5)]);
    }

    #[test]
    fn malformed_lines_report_numbers() {
        let text = "ts,entity,topic,weight\n2016-01-01T00:00:00Z,u1,t1,1\nnot-a-time,u1,t1,1\n";
        let err = parse_events(text.as_bytes(), EventFormat::Csv, ParseMode::Strict).unwrap_err();
        assert!(matches!(err, IngestError::Malformed { line: 3, .. }));
        let bad_header = "when,who,what\n";
        assert!(parse_events(bad_header.as_bytes(), EventFormat::Csv, ParseMode::Lenient).is_err());
    }

    #[test]
    fn sums_per_window() {
        let w = window_profiles(&[ev(1, "u1", "t1", 1.0), ev(2, "u1", "t1", 1.0)], &spec(), None);
        assert_eq!(w.profiles.len(), 3);
        assert_eq!(w.profiles[0].weights["t1"], 2.0);
        assert_eq!(w.profiles[0].event_counts["t1"], 2);
        assert!(w.profiles[1].weights.is_empty());
    }

    #[test]
    fn boundary_goes_to_later_window() {
        let w = window_profiles(&[ev(4, "u1", "t1", 1.0)], &spec(), None);
        assert!(w.profiles[0].weights.is_empty());
        assert_eq!(w.profiles[1].weights["t1"], 1.0);
        let s = spec();
        assert_eq!(s.index_of(ts(12)), None);
        assert_eq!(s.index_of(ts(0) - Duration::seconds(1)), None);
        assert_eq!(s.index_of(ts(11)), Some(2));
    }

    #[test]
    fn out_of_range_events_are_counted() {
        let w = window_profiles(&[ev(13, "u1", "t1", 1.0), ev(0, "u2", "t1", 1.0)], &spec(), None);
        assert_eq!(w.dropped, 1);
        let only_u2: BTreeSet<String> = ["u2".to_string()].into();
        let w = window_profiles(&[ev(13, "u1", "t1", 1.0), ev(0, "u2", "t1", 1.0)], &spec(), Some(&only_u2));
        assert_eq!(w.entities(), BTreeSet::from(["u2"]));
        assert_eq!(w.dropped, 0);
    }

    #[test]
    fn bad_specs() {
        assert!(WindowSpec::new(ts(0), Duration::zero(), 3).is_err());
        assert!(WindowSpec::new(ts(0), Duration::hours(1), 0).is_err());
    }
}
