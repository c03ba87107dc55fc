//! Rule-based extraction of constraint updates from refinement requests
//! such as "lunch should start at noon and be at least 30 minutes".
//!
//! Only a fixed phrase vocabulary is understood; anything else is reported
//! as not extractable rather than guessed at.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    name_key, normalize_name, parse_duration, parse_time, Constraint, DurationMinutes, EventSpec,
    PlanRequest, RequestError, TimePoint,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintUpdate {
    pub event: String,
    pub constraint: Constraint,
}

/// Edits to a request recovered from one utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub updates: Vec<ConstraintUpdate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub added: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no rule matches {0:?}")]
pub struct NotExtractable(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("there is no event called {0:?}")]
    UnknownEvent(String),
    #[error(transparent)]
    Request(#[from] RequestError),
}

fn same_slot(a: &Constraint, b: &Constraint) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
        && a.target().map(name_key) == b.target().map(name_key)
}

impl Extraction {
    /// The edits as event lines, one per event in first-mention order, e.g.
    /// `lunch: starts at 12:00, >30 minutes`. Removals are prefixed with `-`.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<(String, Vec<String>)> = Vec::new();
        for name in &self.added {
            out.push((name.clone(), Vec::new()));
        }
        for u in &self.updates {
            match out.iter_mut().find(|(n, _)| name_key(n) == name_key(&u.event)) {
                Some((_, cs)) => cs.push(u.constraint.to_string()),
                None => out.push((u.event.clone(), vec![u.constraint.to_string()])),
            }
        }
        let mut lines: Vec<String> = self.removed.iter().map(|n| format!("-{n}")).collect();
        lines.extend(out.into_iter().map(|(n, cs)| {
            if cs.is_empty() {
                n
            } else {
                format!("{n}: {}", cs.join(", "))
            }
        }));
        lines
    }

    /// Applies the edits: removals first (with ordering constraints that
    /// mention the removed event), then additions, then constraint updates.
    /// An update replaces an existing constraint of the same form, so a new
    /// start time overrides the old one.
    pub fn apply(&self, req: &PlanRequest) -> Result<PlanRequest, ApplyError> {
        let mut out = req.clone();
        for name in &self.removed {
            let key = name_key(name);
            let before = out.events.len();
            out.events.retain(|e| e.key() != key);
            if out.events.len() == before {
                return Err(ApplyError::UnknownEvent(name.clone()));
            }
            for event in &mut out.events {
                event.constraints.retain(|c| c.target().map(name_key) != Some(key.clone()));
                event.inferred.retain(|c| c.target().map(name_key) != Some(key.clone()));
            }
        }
        for name in &self.added {
            if out.position(name).is_none() {
                out.events.push(EventSpec::new(name, Vec::new()));
            }
        }
        for u in &self.updates {
            let i = out
                .position(&u.event)
                .ok_or_else(|| ApplyError::UnknownEvent(u.event.clone()))?;
            let event = &mut out.events[i];
            event.constraints.retain(|c| !same_slot(c, &u.constraint));
            event.inferred.retain(|c| !same_slot(c, &u.constraint));
            event.constraints.push(u.constraint.clone());
        }
        out.validate()?;
        Ok(out)
    }
}

static FILLER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:(?:please|ok|okay|hey|hi|also|and|then|so|now)[,\s]+|(?:can|could|would|will) you\s+|i(?:'d| would) like (?:you )?to\s+|i want (?:you )?to\s+|let'?s\s+)+",
    )
    .unwrap()
});

static MOVE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:move|shift|put|push|reschedule)\s+(?P<x>.+?)\s+(?:to|into|in)\s+(?:the\s+)?(?P<p>morning|afternoon|evening)$")
        .unwrap()
});

static REMOVE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:remove|delete|cancel|drop)\s+(?P<x>.+?)(?:\s+from\s+(?:the|my)\s+(?:plan|schedule|calendar|day))?$").unwrap()
});

static ADD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:add|schedule)\s+(?P<x>.+?)(?:\s+at\s+(?P<t>\d{1,2}(?::\d{2})?\s*(?:[ap]\.?m\.?)?|noon|midnight))?$")
        .unwrap()
});

static SHORTEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:shorten|cut|trim)\s+(?P<x>.+?)\s+(?:down\s+)?to\s+(?P<d>.+)$").unwrap());

static SUBJECT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:make\s+)?(?P<x>.+?)\s+(?:should|must|needs? to|has to|have to|ought to|to|can|will)\s+(?P<rest>.+)$",
    )
    .unwrap()
});

static START: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:start|starts|begin|begins|be\s+starting)\s+(?P<op>at|after|before|by|no earlier than|no later than)\s+(?P<t>.+)$")
        .unwrap()
});

static END: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:end|ends|finish|finishes|be (?:done|over|finished)|wrap up)\s+(?P<op>at|by|before|after|no later than|no earlier than)\s+(?P<t>.+)$")
        .unwrap()
});

static ORDER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:happen\s+|be\s+|come\s+|go\s+|take place\s+)?(?:scheduled\s+)?(?P<op>before|after)\s+(?P<t>.+)$").unwrap()
});

static LONGER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:be|last|take|run|go)?\s*(?:for\s+)?(?:at least|more than|longer than|no less than|a minimum of|over)\s+(?P<d>.+?)(?:\s+long)?$")
        .unwrap()
});

static SHORTER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:be|last|take|run|go)?\s*(?:for\s+)?(?:at most|less than|shorter than|no more than|no longer than|a maximum of|under)\s+(?P<d>.+?)(?:\s+long)?$")
        .unwrap()
});

static SHORTENED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:be\s+)?(?:shortened|shorten|cut|trimmed)\s+(?:down\s+)?to\s+(?P<d>.+)$").unwrap());

static SPLIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s*(?:,\s*and\s+|,\s*|\s+and\s+)").unwrap());

fn clean(utterance: &str) -> String {
    let lowered = utterance.trim().to_lowercase();
    let lowered = lowered.trim_end_matches(['.', '!', '?', ' ']);
    let collapsed = normalize_name(lowered);
    FILLER.replace(&collapsed, "").into_owned()
}

/// An event name out of free text: articles dropped, whitespace collapsed.
/// Names that cannot be written back into the constraint language are
/// refused.
fn event_name(text: &str) -> Option<String> {
    let trimmed = text.trim();
    let stripped = ["the ", "my ", "a ", "an ", "our "]
        .iter()
        .find_map(|a| trimmed.strip_prefix(a))
        .unwrap_or(trimmed);
    let name = normalize_name(stripped);
    let bad = name.is_empty()
        || name.contains([',', ':', '<', '>'])
        || name.starts_with(|c: char| c.is_ascii_digit())
        || name.split(' ').any(|w| matches!(w, "i" | "me" | "it" | "some" | "more"));
    (!bad).then_some(name)
}

fn time(text: &str) -> Option<TimePoint> {
    let t = text.trim().trim_start_matches("around ").trim_start_matches("about ");
    let t = t.strip_suffix(" o'clock").unwrap_or(t);
    parse_time(t).ok()
}

fn duration(text: &str) -> Option<DurationMinutes> {
    let t = text.trim();
    let t = match t {
        "an hour" | "one hour" | "1 hour" => "60 minutes",
        "half an hour" | "a half hour" | "half hour" => "30 minutes",
        "an hour and a half" | "one and a half hours" | "1 and a half hours" => "90 minutes",
        "a quarter hour" | "a quarter of an hour" | "quarter of an hour" => "15 minutes",
        other => other,
    };
    let words = [
        ("one ", "1 "),
        ("two ", "2 "),
        ("three ", "3 "),
        ("four ", "4 "),
        ("five ", "5 "),
        ("six ", "6 "),
        ("ten ", "10 "),
        ("fifteen ", "15 "),
        ("twenty ", "20 "),
        ("thirty ", "30 "),
        ("forty five ", "45 "),
        ("forty-five ", "45 "),
        ("ninety ", "90 "),
    ];
    let mut t = t.to_string();
    for (w, n) in words {
        if let Some(rest) = t.strip_prefix(w) {
            t = format!("{n}{rest}");
        }
    }
    parse_duration(&t).ok()
}

/// One clause of the predicate part of an utterance.
fn clause(text: &str) -> Option<Constraint> {
    let text = text.trim();
    if let Some(c) = START.captures(text) {
        let t = time(&c["t"])?;
        return Some(match &c["op"] {
            "at" => Constraint::StartsAt(t),
            "after" | "no earlier than" => Constraint::StartsAfter(t),
            _ => Constraint::StartsBefore(t),
        });
    }
    if let Some(c) = END.captures(text) {
        let t = time(&c["t"])?;
        return Some(match &c["op"] {
            "at" => Constraint::EndsAt(t),
            "after" | "no earlier than" => Constraint::EndsAfter(t),
            _ => Constraint::EndsBefore(t),
        });
    }
    if let Some(c) = SHORTENED.captures(text) {
        return duration(&c["d"]).map(Constraint::MaxDuration);
    }
    if let Some(c) = LONGER.captures(text) {
        return duration(&c["d"]).map(Constraint::MinDuration);
    }
    if let Some(c) = SHORTER.captures(text) {
        return duration(&c["d"]).map(Constraint::MaxDuration);
    }
    if let Some(c) = ORDER.captures(text) {
        let operand = &c["t"];
        let before = &c["op"] == "before";
        if let Some(t) = time(operand) {
            return Some(if before {
                Constraint::EndsBefore(t)
            } else {
                Constraint::StartsAfter(t)
            });
        }
        let name = event_name(operand)?;
        return Some(if before {
            Constraint::BeforeEvent(name)
        } else {
            Constraint::AfterEvent(name)
        });
    }
    None
}

fn clauses(text: &str) -> Option<Vec<Constraint>> {
    SPLIT.split(text).map(clause).collect()
}

/// Reads constraint updates and event additions or removals out of one
/// refinement utterance.
pub fn extract_constraints(utterance: &str) -> Result<Extraction, NotExtractable> {
    let fail = || NotExtractable(utterance.trim().to_string());
    let text = clean(utterance);
    if text.is_empty() {
        return Err(fail());
    }
    let update = |event: String, cs: Vec<Constraint>| Extraction {
        updates: cs
            .into_iter()
            .map(|constraint| ConstraintUpdate {
                event: event.clone(),
                constraint,
            })
            .collect(),
        ..Extraction::default()
    };

    if let Some(c) = MOVE.captures(&text) {
        let event = event_name(&c["x"]).ok_or_else(fail)?;
        let t = match &c["p"] {
            "morning" => 360,
            "afternoon" => 720,
            _ => 1020,
        };
        let t = TimePoint::new(t).expect("fixed times are valid");
        return Ok(update(event, vec![Constraint::StartsAfter(t)]));
    }
    if let Some(c) = REMOVE.captures(&text) {
        let event = event_name(&c["x"]).ok_or_else(fail)?;
        return Ok(Extraction {
            removed: vec![event],
            ..Extraction::default()
        });
    }
    if let Some(c) = SHORTEN.captures(&text) {
        let event = event_name(&c["x"]).ok_or_else(fail)?;
        let d = duration(&c["d"]).ok_or_else(fail)?;
        return Ok(update(event, vec![Constraint::MaxDuration(d)]));
    }
    if let Some(c) = ADD.captures(&text) {
        let event = event_name(&c["x"]).ok_or_else(fail)?;
        let mut out = match c.name("t") {
            Some(t) => update(event.clone(), vec![Constraint::StartsAt(time(t.as_str()).ok_or_else(fail)?)]),
            None => Extraction::default(),
        };
        out.added.push(event);
        return Ok(out);
    }
    if let Some(c) = SUBJECT.captures(&text) {
        let event = event_name(&c["x"]).ok_or_else(fail)?;
        let cs = clauses(&c["rest"]).ok_or_else(fail)?;
        if cs.iter().any(|c| c.target().is_some_and(|t| name_key(t) == name_key(&event))) {
            return Err(fail());
        }
        return Ok(update(event, cs));
    }
    Err(fail())
}
