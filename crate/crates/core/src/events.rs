//! Canonical event log: one JSON object per line, one line per interaction.
//!
//! Every downstream model consumes these events, so the schema is the one
//! stable contract of the crate. Wire fields are `sid` (student), `sess`
//! (session), `t` (milliseconds since epoch), `kind` and `data`.
//!
//! Payload keys used by the built-in feature extractors (all optional,
//! kind-dependent): `task`, `skill`, `word`, `typed`, `correct`, `ms`,
//! `first`, `char`, `group`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Error, Result};

/// Default sessionization gap: 30 minutes.
pub const DEFAULT_SESSION_GAP_MS: i64 = 30 * 60 * 1000;

/// What a logged interaction was. Unknown kinds round-trip opaquely so logs
/// from newer games still parse.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    KeyInput,
    InvalidInput,
    Backspace,
    Enter,
    TaskShown,
    AnswerSubmitted,
    NavGame,
    NavShop,
    NavPerformance,
    HelpCall,
    Other(String),
}

impl EventKind {
    pub fn as_str(&self) -> &str {
        match self {
            EventKind::KeyInput => "key",
            EventKind::InvalidInput => "invalid",
            EventKind::Backspace => "bksp",
            EventKind::Enter => "enter",
            EventKind::TaskShown => "task",
            EventKind::AnswerSubmitted => "answer",
            EventKind::NavGame => "nav_game",
            EventKind::NavShop => "nav_shop",
            EventKind::NavPerformance => "nav_perf",
            EventKind::HelpCall => "help",
            EventKind::Other(s) => s,
        }
    }

    pub fn parse(s: &str) -> EventKind {
        match s {
            "key" => EventKind::KeyInput,
            "invalid" => EventKind::InvalidInput,
            "bksp" => EventKind::Backspace,
            "enter" => EventKind::Enter,
            "task" => EventKind::TaskShown,
            "answer" => EventKind::AnswerSubmitted,
            "nav_game" => EventKind::NavGame,
            "nav_shop" => EventKind::NavShop,
            "nav_perf" => EventKind::NavPerformance,
            "help" => EventKind::HelpCall,
            other => EventKind::Other(other.to_string()),
        }
    }

    /// True for keystroke-level input events (typing, corrections, submit).
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            EventKind::KeyInput | EventKind::InvalidInput | EventKind::Backspace | EventKind::Enter
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timestamped interaction record.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub student_id: String,
    pub session_id: String,
    /// Milliseconds since epoch; non-negative, non-decreasing within a session.
    pub t: i64,
    pub kind: EventKind,
    pub payload: Map<String, Value>,
}

impl Event {
    pub fn new(student_id: &str, session_id: &str, t: i64, kind: EventKind) -> Event {
        Event {
            student_id: student_id.to_string(),
            session_id: session_id.to_string(),
            t,
            kind,
            payload: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: Value) -> Event {
        self.payload.insert(key.to_string(), value);
        self
    }

    pub fn payload_str(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn payload_bool(&self, key: &str) -> Option<bool> {
        self.payload.get(key).and_then(Value::as_bool)
    }

    pub fn payload_i64(&self, key: &str) -> Option<i64> {
        self.payload.get(key).and_then(Value::as_i64)
    }
}

#[derive(Serialize, Deserialize)]
struct WireEvent {
    sid: String,
    sess: String,
    t: i64,
    kind: String,
    data: Map<String, Value>,
}

impl From<&Event> for WireEvent {
    fn from(e: &Event) -> WireEvent {
        WireEvent {
            sid: e.student_id.clone(),
            sess: e.session_id.clone(),
            t: e.t,
            kind: e.kind.as_str().to_string(),
            data: e.payload.clone(),
        }
    }
}

impl From<WireEvent> for Event {
    fn from(w: WireEvent) -> Event {
        Event {
            student_id: w.sid,
            session_id: w.sess,
            t: w.t,
            kind: EventKind::parse(&w.kind),
            payload: w.data,
        }
    }
}

/// A contiguous slice of one student's events.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub student_id: String,
    pub session_id: String,
    pub events: Vec<Event>,
}

impl Session {
    /// Last timestamp minus first; zero for a single event. Sessions are
    /// never empty.
    pub fn duration_ms(&self) -> i64 {
        self.events.last().unwrap().t - self.events.first().unwrap().t
    }

    /// All answer events, parsed into a uniform view.
    pub fn answers(&self) -> Vec<AnswerView<'_>> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::AnswerSubmitted)
            .map(AnswerView::from_event)
            .collect()
    }
}

/// Parsed view of an `AnswerSubmitted` event.
#[derive(Debug, Clone)]
pub struct AnswerView<'a> {
    pub t: i64,
    pub task: Option<&'a str>,
    pub skill: Option<&'a str>,
    pub word: Option<&'a str>,
    pub typed: Option<&'a str>,
    pub correct: Option<bool>,
    pub answer_ms: Option<i64>,
    /// Missing flag defaults to true: a plain answer counts as first-attempt.
    pub first_attempt: bool,
}

impl<'a> AnswerView<'a> {
    pub fn from_event(e: &'a Event) -> AnswerView<'a> {
        AnswerView {
            t: e.t,
            task: e.payload_str("task"),
            skill: e.payload_str("skill"),
            word: e.payload_str("word"),
            typed: e.payload_str("typed"),
            correct: e.payload_bool("correct"),
            answer_ms: e.payload_i64("ms"),
            first_attempt: e.payload_bool("first").unwrap_or(true),
        }
    }

    /// Identity used to detect repetitions of the same item: task id if
    /// present, else the target word.
    pub fn item_id(&self) -> Option<&'a str> {
        self.task.or(self.word)
    }
}

/// Serialize one event as its canonical JSONL line (no trailing newline).
pub fn event_to_line(event: &Event) -> String {
    serde_json::to_string(&WireEvent::from(event)).expect("event serialization cannot fail")
}

fn parse_line(line: &str, line_no: usize) -> Result<Event> {
    let wire: WireEvent = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        msg: e.to_string(),
    })?;
    if wire.t < 0 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("negative timestamp {}", wire.t),
        });
    }
    Ok(wire.into())
}

fn validate_order(events: &[Event], line_of: impl Fn(usize) -> usize) -> Result<()> {
    let mut last: BTreeMap<(&str, &str), i64> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        let key = (e.student_id.as_str(), e.session_id.as_str());
        if let Some(&prev) = last.get(&key) {
            if e.t < prev {
                return Err(Error::TimeRegression {
                    student: e.student_id.clone(),
                    session: e.session_id.clone(),
                    line: line_of(i),
                });
            }
        }
        last.insert(key, e.t);
    }
    Ok(())
}

/// Parse a JSONL log from a reader. Line numbers are 1-based.
pub fn read_log_from<R: BufRead>(reader: R) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(parse_line(&line, idx + 1)?);
        lines.push(idx + 1);
    }
    validate_order(&events, |i| lines[i])?;
    Ok(events)
}

/// Read and validate a JSONL event log.
pub fn read_log(path: &Path) -> Result<Vec<Event>> {
    let file = std::fs::File::open(path)?;
    read_log_from(BufReader::new(file))
}

/// Canonical serialization: one line per event, fixed field and key order.
pub fn write_log_string(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&event_to_line(e));
        out.push('\n');
    }
    out
}

pub fn write_log(path: &Path, events: &[Event]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(write_log_string(events).as_bytes())?;
    Ok(())
}

/// Split a (student, time)-sorted event stream into sessions.
///
/// Boundaries: the student changes, the explicit session id changes, or the
/// inter-event gap exceeds `gap_ms`. A gap split inside an explicitly named
/// session keeps the name and appends `~k` so no session ever spans a gap.
/// Events with an empty session id get synthesized ids `<sid>-s<k>`.
pub fn sessionize(events: &[Event], gap_ms: i64) -> Vec<Session> {
    let mut sessions: Vec<Session> = Vec::new();
    let mut current: Option<Session> = None;
    let mut synth_counter: BTreeMap<String, usize> = BTreeMap::new();
    // (student, explicit id) -> number of gap-split segments emitted so far
    let mut split_counter: BTreeMap<(String, String), usize> = BTreeMap::new();

    for e in events {
        let boundary = match &current {
            None => true,
            Some(s) => {
                let last = s.events.last().unwrap();
                s.student_id != e.student_id
                    || last.session_id != e.session_id
                    || e.t - last.t > gap_ms
            }
        };
        if boundary {
            if let Some(done) = current.take() {
                sessions.push(done);
            }
            let id = if e.session_id.is_empty() {
                let n = synth_counter.entry(e.student_id.clone()).or_insert(0);
                *n += 1;
                format!("{}-s{}", e.student_id, n)
            } else {
                let key = (e.student_id.clone(), e.session_id.clone());
                let n = split_counter.entry(key).or_insert(0);
                *n += 1;
                if *n == 1 {
                    e.session_id.clone()
                } else {
                    format!("{}~{}", e.session_id, n)
                }
            };
            current = Some(Session {
                student_id: e.student_id.clone(),
                session_id: id,
                events: vec![e.clone()],
            });
        } else {
            current.as_mut().unwrap().events.push(e.clone());
        }
    }
    if let Some(done) = current.take() {
        sessions.push(done);
    }
    sessions
}
