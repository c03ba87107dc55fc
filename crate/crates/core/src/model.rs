//! Events, constraints and plans, plus the textual constraint language.
//!
//! A clause of the constraint language is one of
//!
//! ```text
//! starts at TIME | ends at TIME | starts after TIME | ends before TIME
//! starts before TIME | ends after TIME | before (TIME|NAME) | after (TIME|NAME)
//! < DURATION | > DURATION
//! ```
//!
//! An event line is `name: clause, clause, ...`. Times are minutes since
//! midnight; durations are whole minutes.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Minutes in a day; the largest representable [`TimePoint`].
pub const DAY_MINUTES: u32 = 1440;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unparseable time literal `{0}`")]
    UnparseableTime(String),
    #[error("time `{0}` is outside 0:00..24:00")]
    OutOfRange(String),
    #[error("unparseable duration `{0}`")]
    UnparseableDuration(String),
    #[error("unparseable constraint `{text}` at bytes {span:?}")]
    UnparseableConstraint { text: String, span: Range<usize> },
    #[error("event name is empty")]
    EmptyName,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequestError {
    #[error("event name is empty")]
    EmptyName,
    #[error("duplicate event `{0}`")]
    DuplicateEvent(String),
    #[error("horizon start {start} is not before end {end}")]
    InvalidHorizon { start: TimePoint, end: TimePoint },
    #[error("event `{event}` refers to unknown event `{target}`")]
    UnknownEventReference { event: String, target: String },
    #[error("event `{0}` is ordered relative to itself")]
    SelfReference(String),
}

/// A clock time, stored as minutes since midnight (the datum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimePoint(u32);

impl TimePoint {
    pub const MIDNIGHT: TimePoint = TimePoint(0);
    pub const END_OF_DAY: TimePoint = TimePoint(DAY_MINUTES);

    pub fn new(minutes: u32) -> Result<Self, ParseError> {
        if minutes > DAY_MINUTES {
            return Err(ParseError::OutOfRange(minutes.to_string()));
        }
        Ok(TimePoint(minutes))
    }

    /// Builds a time point from a signed minute count, if it lies in the day.
    pub fn from_minutes(minutes: i64) -> Option<Self> {
        (0..=DAY_MINUTES as i64)
            .contains(&minutes)
            .then_some(TimePoint(minutes as u32))
    }

    pub fn minutes(self) -> u32 {
        self.0
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for TimePoint {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_time(s)
    }
}

impl Serialize for TimePoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_time(&text).map_err(serde::de::Error::custom)
    }
}

/// A strictly positive number of minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct DurationMinutes(u32);

impl DurationMinutes {
    pub fn new(minutes: u32) -> Result<Self, ParseError> {
        if minutes == 0 {
            return Err(ParseError::UnparseableDuration(minutes.to_string()));
        }
        Ok(DurationMinutes(minutes))
    }

    pub fn minutes(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for DurationMinutes {
    type Error = ParseError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        DurationMinutes::new(value)
    }
}

impl From<DurationMinutes> for u32 {
    fn from(value: DurationMinutes) -> Self {
        value.0
    }
}

/// One restriction on a single event.
///
/// `EndsBefore`/`StartsAfter` are what the bare `before T`/`after T`
/// clauses produce. `StartsBefore`/`EndsAfter` bound the other endpoint and
/// are only produced by their explicit clauses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constraint {
    StartsAt(TimePoint),
    EndsAt(TimePoint),
    EndsBefore(TimePoint),
    StartsAfter(TimePoint),
    StartsBefore(TimePoint),
    EndsAfter(TimePoint),
    MinDuration(DurationMinutes),
    MaxDuration(DurationMinutes),
    BeforeEvent(String),
    AfterEvent(String),
}

/// The metric families constraints are scored under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintKind {
    /// Start/end constraints.
    Absolute,
    Duration,
    /// Order constraints.
    Relative,
}

impl Constraint {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            Constraint::StartsAt(_)
            | Constraint::EndsAt(_)
            | Constraint::EndsBefore(_)
            | Constraint::StartsAfter(_)
            | Constraint::StartsBefore(_)
            | Constraint::EndsAfter(_) => ConstraintKind::Absolute,
            Constraint::MinDuration(_) | Constraint::MaxDuration(_) => ConstraintKind::Duration,
            Constraint::BeforeEvent(_) | Constraint::AfterEvent(_) => ConstraintKind::Relative,
        }
    }

    /// Name of the partner event for relative constraints.
    pub fn target(&self) -> Option<&str> {
        match self {
            Constraint::BeforeEvent(name) | Constraint::AfterEvent(name) => Some(name),
            _ => None,
        }
    }

    /// Verb phrase used in feedback sentences, e.g. "start at 09:00".
    pub fn verb_phrase(&self) -> String {
        match self {
            Constraint::StartsAt(t) => format!("start at {t}"),
            Constraint::EndsAt(t) => format!("end at {t}"),
            Constraint::EndsBefore(t) => format!("end before {t}"),
            Constraint::StartsAfter(t) => format!("start after {t}"),
            Constraint::StartsBefore(t) => format!("start before {t}"),
            Constraint::EndsAfter(t) => format!("end after {t}"),
            Constraint::MinDuration(d) => format!("last at least {} minutes", d.minutes()),
            Constraint::MaxDuration(d) => format!("last at most {} minutes", d.minutes()),
            Constraint::BeforeEvent(name) => format!("happen before {name}"),
            Constraint::AfterEvent(name) => format!("happen after {name}"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_constraint(self))
    }
}

impl FromStr for Constraint {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_constraint(s)
    }
}

impl Serialize for Constraint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&render_constraint(self))
    }
}

impl<'de> Deserialize<'de> for Constraint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_constraint(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventCategory {
    Todo,
    Habit,
    Prescheduled,
    #[default]
    Other,
}

/// An activity to plan together with its constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub name: String,
    #[serde(default)]
    pub category: EventCategory,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    /// Commonsense constraints added by inference. Kept apart from the
    /// user's own list so they are encoded after every user constraint.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inferred: Vec<Constraint>,
}

impl EventSpec {
    pub fn new(name: &str, constraints: Vec<Constraint>) -> Self {
        EventSpec {
            name: normalize_name(name),
            category: EventCategory::Other,
            constraints,
            inferred: Vec::new(),
        }
    }

    pub fn with_category(mut self, category: EventCategory) -> Self {
        self.category = category;
        self
    }

    /// User constraints followed by inferred ones.
    pub fn all_constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().chain(self.inferred.iter())
    }

    pub fn key(&self) -> String {
        name_key(&self.name)
    }
}

impl fmt::Display for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        let mut first = true;
        for c in self.all_constraints() {
            f.write_str(if first { ": " } else { ", " })?;
            first = false;
            f.write_str(&render_constraint(c))?;
        }
        Ok(())
    }
}

/// The scheduling window, `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: TimePoint,
    pub end: TimePoint,
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon {
            start: TimePoint::MIDNIGHT,
            end: TimePoint::END_OF_DAY,
        }
    }
}

impl Horizon {
    pub fn len(&self) -> u32 {
        self.end.minutes().saturating_sub(self.start.minutes())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything the planner is asked to schedule in one day.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub horizon: Horizon,
}

impl PlanRequest {
    pub fn new(events: Vec<EventSpec>) -> Self {
        PlanRequest {
            id: None,
            events,
            horizon: Horizon::default(),
        }
    }

    /// Parses one event line per non-blank line of `text`.
    pub fn from_lines(text: &str) -> Result<Self, ParseError> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(parse_event_line)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PlanRequest::new(events))
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        if self.horizon.start >= self.horizon.end {
            return Err(RequestError::InvalidHorizon {
                start: self.horizon.start,
                end: self.horizon.end,
            });
        }
        let mut seen = std::collections::HashSet::new();
        for event in &self.events {
            if event.name.trim().is_empty() {
                return Err(RequestError::EmptyName);
            }
            if !seen.insert(event.key()) {
                return Err(RequestError::DuplicateEvent(event.name.clone()));
            }
        }
        for event in &self.events {
            for target in event.all_constraints().filter_map(Constraint::target) {
                let key = name_key(target);
                if key == event.key() {
                    return Err(RequestError::SelfReference(event.name.clone()));
                }
                if !seen.contains(&key) {
                    return Err(RequestError::UnknownEventReference {
                        event: event.name.clone(),
                        target: target.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Index of the event whose normalized name equals `name`.
    pub fn position(&self, name: &str) -> Option<usize> {
        let key = name_key(name);
        self.events.iter().position(|e| e.key() == key)
    }

    pub fn event(&self, name: &str) -> Option<&EventSpec> {
        self.position(name).map(|i| &self.events[i])
    }

    /// The event block in the line format, one event per line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&event.to_string());
            out.push('\n');
        }
        out
    }
}

/// One scheduled event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanEntry {
    pub event: String,
    pub start: TimePoint,
    pub end: TimePoint,
}

impl PlanEntry {
    pub fn new(event: &str, start: TimePoint, end: TimePoint) -> Result<Self, PlanError> {
        if start >= end {
            return Err(PlanError::EmptyInterval {
                event: event.to_string(),
                start,
                end,
            });
        }
        Ok(PlanEntry {
            event: normalize_name(event),
            start,
            end,
        })
    }

    pub fn duration(&self) -> u32 {
        self.end.minutes() - self.start.minutes()
    }

    /// True when the two entries share an interval of positive length.
    pub fn overlaps(&self, other: &PlanEntry) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("entry `{event}` has start {start} not before end {end}")]
    EmptyInterval {
        event: String,
        start: TimePoint,
        end: TimePoint,
    },
}

/// Scheduled entries, ascending by start and then by name.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct Plan(Vec<PlanEntry>);

impl Plan {
    pub fn new(mut entries: Vec<PlanEntry>) -> Self {
        entries.sort_by(|a, b| {
            a.start
                .cmp(&b.start)
                .then_with(|| a.event.cmp(&b.event))
                .then_with(|| a.end.cmp(&b.end))
        });
        Plan(entries)
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn makespan(&self) -> TimePoint {
        self.0.iter().map(|e| e.end).max().unwrap_or_default()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PlanEntry> {
        self.0.iter()
    }

    /// Two-column `time range  event` listing.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for e in &self.0 {
            out.push_str(&format!("{} - {}  {}\n", e.start, e.end, e.event));
        }
        out
    }
}

impl<'de> Deserialize<'de> for Plan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let entries = Vec::<PlanEntry>::deserialize(deserializer)?;
        for e in &entries {
            if e.start >= e.end {
                return Err(serde::de::Error::custom(format!(
                    "entry `{}` has start {} not before end {}",
                    e.event, e.start, e.end
                )));
            }
        }
        Ok(Plan::new(entries))
    }
}

impl<'a> IntoIterator for &'a Plan {
    type Item = &'a PlanEntry;
    type IntoIter = std::slice::Iter<'a, PlanEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Trims and collapses internal whitespace.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Case-insensitive comparison key for event names.
pub fn name_key(name: &str) -> String {
    normalize_name(name).to_lowercase()
}

static CLOCK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\d{1,2})(?::(\d{2}))?\s*(am|pm|a\.m\.|p\.m\.)?$").unwrap()
});

/// Parses a time literal into minutes since midnight.
///
/// Accepts `H:MM`/`HH:MM` (24h), `Ham`/`Hpm`, `H:MMam`/`H:MMpm`, a bare
/// hour `0`..`24`, `noon` and `midnight`.
pub fn parse_time(text: &str) -> Result<TimePoint, ParseError> {
    let lowered = text.trim().to_ascii_lowercase();
    match lowered.as_str() {
        "noon" => return Ok(TimePoint(720)),
        "midnight" => return Ok(TimePoint(0)),
        _ => {}
    }
    let unparseable = || ParseError::UnparseableTime(text.trim().to_string());
    let caps = CLOCK.captures(&lowered).ok_or_else(unparseable)?;
    let hour: u32 = caps[1].parse().map_err(|_| unparseable())?;
    let minute: u32 = match caps.get(2) {
        Some(m) => m.as_str().parse().map_err(|_| unparseable())?,
        None => 0,
    };
    if minute >= 60 {
        return Err(unparseable());
    }
    let minutes = match caps.get(3).map(|m| m.as_str()) {
        Some(meridiem) => {
            if !(1..=12).contains(&hour) {
                return Err(unparseable());
            }
            let base = if hour == 12 { 0 } else { hour };
            if meridiem.starts_with('p') {
                (base + 12) * 60 + minute
            } else {
                base * 60 + minute
            }
        }
        None => hour * 60 + minute,
    };
    if minutes > DAY_MINUTES {
        return Err(ParseError::OutOfRange(text.trim().to_string()));
    }
    Ok(TimePoint(minutes))
}

static DURATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\d+(?:\.\d+)?)\s*(minutes|minute|mins|min|hours|hour|hrs|hr)$").unwrap()
});

/// Parses `N minutes` or `X hours` into whole minutes.
pub fn parse_duration(text: &str) -> Result<DurationMinutes, ParseError> {
    let lowered = text.trim().to_ascii_lowercase();
    let bad = || ParseError::UnparseableDuration(text.trim().to_string());
    let caps = DURATION.captures(&lowered).ok_or_else(bad)?;
    let number = &caps[1];
    let minutes = if caps[2].starts_with('h') {
        let hours: f64 = number.parse().map_err(|_| bad())?;
        let minutes = hours * 60.0;
        if minutes.fract().abs() > 1e-9 || minutes > f64::from(u32::MAX) {
            return Err(bad());
        }
        minutes as u32
    } else {
        if number.contains('.') {
            return Err(bad());
        }
        number.parse::<u32>().map_err(|_| bad())?
    };
    DurationMinutes::new(minutes).map_err(|_| bad())
}

static CLAUSE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)^(?:
            (?P<startkw>starts?\s+at|starts?\s+after|starts?\s+before|ends?\s+at|ends?\s+before|ends?\s+after)\s+(?P<abs>.+)
          | (?P<relkw>before|after)\s+(?P<rel>.+)
          | (?P<cmp>[<>])=?\s*(?P<dur>.+)
        )$",
    )
    .unwrap()
});

/// Parses one clause of the constraint language.
pub fn parse_constraint(text: &str) -> Result<Constraint, ParseError> {
    let lead = text.len() - text.trim_start().len();
    let body = text.trim();
    let fail = |span: Range<usize>| ParseError::UnparseableConstraint {
        text: text.to_string(),
        span: (span.start + lead)..(span.end + lead),
    };
    let Some(caps) = CLAUSE.captures(body) else {
        let first_word = body.find(char::is_whitespace).unwrap_or(body.len());
        return Err(fail(0..first_word.max(body.len().min(1))));
    };
    if let (Some(kw), Some(arg)) = (caps.name("startkw"), caps.name("abs")) {
        let time = parse_time(arg.as_str()).map_err(|_| fail(arg.range()))?;
        let words: Vec<String> = kw
            .as_str()
            .split_whitespace()
            .map(|w| w.to_ascii_lowercase())
            .collect();
        let starts = words[0].starts_with("start");
        return Ok(match (starts, words[1].as_str()) {
            (true, "at") => Constraint::StartsAt(time),
            (true, "after") => Constraint::StartsAfter(time),
            (true, _) => Constraint::StartsBefore(time),
            (false, "at") => Constraint::EndsAt(time),
            (false, "before") => Constraint::EndsBefore(time),
            (false, _) => Constraint::EndsAfter(time),
        });
    }
    if let (Some(kw), Some(arg)) = (caps.name("relkw"), caps.name("rel")) {
        let before = kw.as_str().eq_ignore_ascii_case("before");
        let operand = arg.as_str().trim();
        return match parse_time(operand) {
            Ok(t) if before => Ok(Constraint::EndsBefore(t)),
            Ok(t) => Ok(Constraint::StartsAfter(t)),
            Err(_) if looks_like_time(operand) => Err(fail(arg.range())),
            Err(_) => {
                let name = normalize_name(operand);
                if name.contains(',') || name.contains(':') {
                    return Err(fail(arg.range()));
                }
                Ok(if before {
                    Constraint::BeforeEvent(name)
                } else {
                    Constraint::AfterEvent(name)
                })
            }
        };
    }
    if let (Some(cmp), Some(arg)) = (caps.name("cmp"), caps.name("dur")) {
        let duration = parse_duration(arg.as_str()).map_err(|_| fail(arg.range()))?;
        return Ok(if cmp.as_str() == "<" {
            Constraint::MaxDuration(duration)
        } else {
            Constraint::MinDuration(duration)
        });
    }
    Err(fail(0..body.len()))
}

fn looks_like_time(operand: &str) -> bool {
    operand.starts_with(|c: char| c.is_ascii_digit())
}

/// Canonical clause text; `parse_constraint` inverts it.
pub fn render_constraint(c: &Constraint) -> String {
    match c {
        Constraint::StartsAt(t) => format!("starts at {t}"),
        Constraint::EndsAt(t) => format!("ends at {t}"),
        Constraint::EndsBefore(t) => format!("ends before {t}"),
        Constraint::StartsAfter(t) => format!("starts after {t}"),
        Constraint::StartsBefore(t) => format!("starts before {t}"),
        Constraint::EndsAfter(t) => format!("ends after {t}"),
        Constraint::MinDuration(d) => format!(">{} minutes", d.minutes()),
        Constraint::MaxDuration(d) => format!("<{} minutes", d.minutes()),
        Constraint::BeforeEvent(name) => format!("before {name}"),
        Constraint::AfterEvent(name) => format!("after {name}"),
    }
}

/// Parses `name: clause, clause, ...`, `name:` or a bare `name`.
pub fn parse_event_line(text: &str) -> Result<EventSpec, ParseError> {
    let (name, rest) = match text.split_once(':') {
        Some((name, rest)) => (name, Some(rest)),
        None => (text, None),
    };
    let name = normalize_name(name);
    if name.is_empty() {
        return Err(ParseError::EmptyName);
    }
    let mut constraints = Vec::new();
    if let Some(rest) = rest {
        let offset = text.len() - rest.len();
        let mut cursor = 0;
        for clause in rest.split(',') {
            let start = cursor;
            cursor += clause.len() + 1;
            if clause.trim().is_empty() {
                continue;
            }
            let parsed = parse_constraint(clause).map_err(|err| match err {
                ParseError::UnparseableConstraint { span, .. } => {
                    let base = offset + start;
                    ParseError::UnparseableConstraint {
                        text: text.to_string(),
                        span: (span.start + base)..(span.end + base),
                    }
                }
                other => other,
            })?;
            constraints.push(parsed);
        }
    }
    Ok(EventSpec::new(&name, constraints))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(m: u32) -> TimePoint {
        TimePoint::new(m).unwrap()
    }

    fn d(m: u32) -> DurationMinutes {
        DurationMinutes::new(m).unwrap()
    }

    #[test]
    fn time_literals() {
        assert_eq!(parse_time("9am").unwrap(), t(540));
        assert_eq!(parse_time("15:00").unwrap(), t(900));
        assert_eq!(parse_time("0:00").unwrap(), t(0));
        assert_eq!(parse_time("17").unwrap(), t(1020));
        assert_eq!(parse_time("12am").unwrap(), t(0));
        assert_eq!(parse_time("12pm").unwrap(), t(720));
        assert_eq!(parse_time("24").unwrap(), t(1440));
        assert_eq!(parse_time("5:00pm").unwrap(), t(1020));
        assert_eq!(parse_time("2:00pm").unwrap(), t(840));
        assert_eq!(parse_time("12:30am").unwrap(), t(30));
        assert_eq!(parse_time("noon").unwrap(), t(720));
        assert_eq!(parse_time("Midnight").unwrap(), t(0));
        assert_eq!(parse_time("7:05 PM").unwrap(), t(1145));
    }

    #[test]
    fn time_errors() {
        assert!(matches!(parse_time("25"), Err(ParseError::OutOfRange(_))));
        assert!(matches!(parse_time("24:30"), Err(ParseError::OutOfRange(_))));
        assert!(matches!(parse_time("9:75"), Err(ParseError::UnparseableTime(_))));
        assert!(matches!(parse_time("13pm"), Err(ParseError::UnparseableTime(_))));
        assert!(matches!(parse_time("lunch"), Err(ParseError::UnparseableTime(_))));
        assert!(matches!(parse_time(""), Err(ParseError::UnparseableTime(_))));
    }

    #[test]
    fn clause_literals() {
        let cases = [
            ("starts at 9am", Constraint::StartsAt(t(540))),
            ("ends at 15:00", Constraint::EndsAt(t(900))),
            ("before 5:00pm", Constraint::EndsBefore(t(1020))),
            ("after 2:00pm", Constraint::StartsAfter(t(840))),
            ("<90 minutes", Constraint::MaxDuration(d(90))),
            (">1 hour", Constraint::MinDuration(d(60))),
            ("<2 hours", Constraint::MaxDuration(d(120))),
            ("after lunch", Constraint::AfterEvent("lunch".into())),
            ("after meeting", Constraint::AfterEvent("meeting".into())),
            ("before 17", Constraint::EndsBefore(t(1020))),
            ("starts at 10", Constraint::StartsAt(t(600))),
            ("ends at 11", Constraint::EndsAt(t(660))),
            ("after dinner", Constraint::AfterEvent("dinner".into())),
            ("starts before 16:00", Constraint::StartsBefore(t(960))),
            ("ends after 8am", Constraint::EndsAfter(t(480))),
            ("> 1.5 hours", Constraint::MinDuration(d(90))),
            ("before  Team   Sync", Constraint::BeforeEvent("Team Sync".into())),
        ];
        for (text, expected) in cases {
            assert_eq!(parse_constraint(text).unwrap(), expected, "{text}");
        }
    }

    #[test]
    fn clause_errors_carry_span() {
        match parse_constraint("starts at 9:75") {
            Err(ParseError::UnparseableConstraint { span, .. }) => assert_eq!(span, 10..14),
            other => panic!("{other:?}"),
        }
        match parse_constraint("  whenever") {
            Err(ParseError::UnparseableConstraint { span, .. }) => assert_eq!(span, 2..10),
            other => panic!("{other:?}"),
        }
        assert!(parse_constraint("before 25:00").is_err());
        assert!(parse_constraint(">0 minutes").is_err());
        assert!(parse_constraint("<1.5 minutes").is_err());
    }

    #[test]
    fn event_lines() {
        let e = parse_event_line("lunch: starts at 12:00, >30 minutes").unwrap();
        assert_eq!(e.name, "lunch");
        assert_eq!(
            e.constraints,
            vec![Constraint::StartsAt(t(720)), Constraint::MinDuration(d(30))]
        );
        let e = parse_event_line("write my paper: starts after 13:00, ends before 17:00").unwrap();
        assert_eq!(
            e.constraints,
            vec![Constraint::StartsAfter(t(780)), Constraint::EndsBefore(t(1020))]
        );
        let e = parse_event_line("nap").unwrap();
        assert_eq!(e.name, "nap");
        assert!(e.constraints.is_empty());
        assert!(parse_event_line("nap:").unwrap().constraints.is_empty());
        assert_eq!(parse_event_line("  : >1 hour"), Err(ParseError::EmptyName));
        match parse_event_line("gym: >1 hour, sometimes") {
            Err(ParseError::UnparseableConstraint { span, .. }) => assert_eq!(span, 14..23),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rendering() {
        assert_eq!(render_constraint(&Constraint::StartsAt(t(540))), "starts at 09:00");
        assert_eq!(render_constraint(&Constraint::MinDuration(d(60))), ">60 minutes");
        assert_eq!(render_constraint(&Constraint::AfterEvent("lunch".into())), "after lunch");
        let e = parse_event_line("lunch: starts at noon, >30 minutes").unwrap();
        assert_eq!(e.to_string(), "lunch: starts at 12:00, >30 minutes");
    }

    #[test]
    fn request_validation() {
        let mut req = PlanRequest::from_lines("jog: before Lunch\nlunch: >30 minutes").unwrap();
        assert_eq!(req.validate(), Ok(()));
        req.events.push(EventSpec::new("LUNCH", vec![]));
        assert!(matches!(req.validate(), Err(RequestError::DuplicateEvent(_))));
        let req = PlanRequest::from_lines("jog: before lunch").unwrap();
        assert!(matches!(
            req.validate(),
            Err(RequestError::UnknownEventReference { .. })
        ));
        let req = PlanRequest::from_lines("jog: after jog").unwrap();
        assert!(matches!(req.validate(), Err(RequestError::SelfReference(_))));
        let mut req = PlanRequest::from_lines("jog").unwrap();
        req.horizon = Horizon { start: t(600), end: t(600) };
        assert!(matches!(req.validate(), Err(RequestError::InvalidHorizon { .. })));
    }

    #[test]
    fn persona_json_shape() {
        let json = r#"{"events":[{"name":"lunch","category":"habit","constraints":["starts at 12:00",">30 minutes"]}]}"#;
        let req: PlanRequest = serde_json::from_str(json).unwrap();
        assert_eq!(req.events[0].category, EventCategory::Habit);
        assert_eq!(req.horizon, Horizon::default());
        let back = serde_json::to_value(&req).unwrap();
        assert_eq!(back["events"][0]["constraints"][0], "starts at 12:00");
        assert_eq!(back["horizon"]["end"], "24:00");
    }

    #[test]
    fn plan_sorting_and_validation() {
        let a = PlanEntry::new("b", t(60), t(120)).unwrap();
        let b = PlanEntry::new("a", t(60), t(90)).unwrap();
        let c = PlanEntry::new("c", t(0), t(30)).unwrap();
        let plan = Plan::new(vec![a, b, c]);
        let names: Vec<_> = plan.iter().map(|e| e.event.as_str()).collect();
        assert_eq!(names, ["c", "a", "b"]);
        assert_eq!(plan.makespan(), t(120));
        assert!(PlanEntry::new("x", t(10), t(10)).is_err());
        assert!(serde_json::from_str::<Plan>(r#"[{"event":"x","start":"10:00","end":"09:00"}]"#).is_err());
    }
}
