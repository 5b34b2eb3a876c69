//! Per-(package, hop) workflow tracking as an append-only event log.
//!
//! Every task starts in [`TaskState::Selected`] and moves through
//! build, functional test, upload and request filing. The log is the
//! source of truth: task states are always recomputed by replaying it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use thiserror::Error;

use crate::deb822::{parse_stanzas, serialize_stanzas, Stanza};
use crate::depends::is_valid_package_name;

pub const DEFAULT_ACTOR: &str = "operator";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskState {
    Selected,
    BuildSucceeded,
    BuildFailed,
    TestPassed,
    TestFailed,
    Uploaded,
    Filed,
    Done,
    NotFiled,
    NoTask,
}

/// The complete transition relation.
pub const LEGAL_TRANSITIONS: [(TaskState, TaskState); 10] = {
    use TaskState::*;
    [
        (Selected, BuildSucceeded),
        (Selected, BuildFailed),
        (Selected, NoTask),
        (BuildSucceeded, TestPassed),
        (BuildSucceeded, TestFailed),
        (TestPassed, Uploaded),
        (Uploaded, Filed),
        (Uploaded, NotFiled),
        (NotFiled, Filed),
        (Filed, Done),
    ]
};

impl TaskState {
    pub const ALL: [TaskState; 10] = [
        TaskState::Selected,
        TaskState::BuildSucceeded,
        TaskState::BuildFailed,
        TaskState::TestPassed,
        TaskState::TestFailed,
        TaskState::Uploaded,
        TaskState::Filed,
        TaskState::Done,
        TaskState::NotFiled,
        TaskState::NoTask,
    ];

    pub fn token(self) -> &'static str {
        match self {
            TaskState::Selected => "selected",
            TaskState::BuildSucceeded => "build-succeeded",
            TaskState::BuildFailed => "build-failed",
            TaskState::TestPassed => "test-passed",
            TaskState::TestFailed => "test-failed",
            TaskState::Uploaded => "uploaded",
            TaskState::Filed => "filed",
            TaskState::Done => "done",
            TaskState::NotFiled => "not-filed",
            TaskState::NoTask => "no-task",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TaskState::BuildFailed | TaskState::TestFailed | TaskState::Done | TaskState::NoTask
        )
    }

    pub fn can_transition(self, to: TaskState) -> bool {
        LEGAL_TRANSITIONS.contains(&(self, to))
    }
}

impl fmt::Display for TaskState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for TaskState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskState::ALL
            .into_iter()
            .find(|st| st.token() == s)
            .ok_or_else(|| format!("unknown task state {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("IllegalTransition: {package} {hop}: {from} -> {to}")]
    IllegalTransition {
        package: String,
        hop: String,
        from: TaskState,
        to: TaskState,
    },
    #[error("UnknownTask: {package} {hop} has no events and {to} does not start a task")]
    UnknownTask {
        package: String,
        hop: String,
        to: TaskState,
    },
    #[error("BadEvent: {0}")]
    BadEvent(String),
    #[error("CorruptLedger: event {index}: {reason}")]
    Corrupt { index: usize, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("IllegalTransition at {index}: {from} -> {to}")]
pub struct ReplayError {
    pub index: usize,
    pub from: TaskState,
    pub to: TaskState,
}

/// Folds a sequence of target states from `Selected`.
pub fn replay<I>(targets: I) -> Result<TaskState, ReplayError>
where
    I: IntoIterator<Item = TaskState>,
{
    targets
        .into_iter()
        .enumerate()
        .try_fold(TaskState::Selected, |state, (index, to)| {
            if state.can_transition(to) {
                Ok(to)
            } else {
                Err(ReplayError { index, from: state, to })
            }
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub package: String,
    pub hop: String,
    pub from: TaskState,
    pub to: TaskState,
    pub note: String,
    pub actor: String,
    pub timestamp: String,
}

impl Event {
    fn to_stanza(&self) -> Stanza {
        Stanza::new()
            .with("Package", &self.package)
            .with("Hop", &self.hop)
            .with("From-State", self.from.token())
            .with("To-State", self.to.token())
            .with("Note", &self.note)
            .with("Actor", &self.actor)
            .with("Timestamp", &self.timestamp)
    }

    fn from_stanza(s: &Stanza) -> Result<Self, String> {
        let field = |name: &str| s.get(name).ok_or_else(|| format!("missing {name}"));
        let state = |name: &str| -> Result<TaskState, String> { field(name)?.parse() };
        let event = Event {
            package: field("Package")?.to_string(),
            hop: field("Hop")?.to_string(),
            from: state("From-State")?,
            to: state("To-State")?,
            note: s.get("Note").unwrap_or("").to_string(),
            actor: s.get("Actor").unwrap_or(DEFAULT_ACTOR).to_string(),
            timestamp: field("Timestamp")?.to_string(),
        };
        validate_key(&event.package, &event.hop).map_err(|e| e.to_string())?;
        validate_timestamp(&event.timestamp).map_err(|e| e.to_string())?;
        Ok(event)
    }
}

fn validate_key(package: &str, hop: &str) -> Result<(), LedgerError> {
    if !is_valid_package_name(package) {
        return Err(LedgerError::BadEvent(format!("invalid package name {package:?}")));
    }
    let well_formed =
        hop.split_once('2').is_some_and(|(a, b)| !a.is_empty() && !b.is_empty()) && !hop.contains(char::is_whitespace);
    if !well_formed {
        return Err(LedgerError::BadEvent(format!("invalid hop label {hop:?}")));
    }
    Ok(())
}

/// ISO-8601 / RFC 3339 in UTC.
pub fn validate_timestamp(ts: &str) -> Result<(), LedgerError> {
    match chrono::DateTime::parse_from_rfc3339(ts) {
        Ok(t) if t.offset().local_minus_utc() == 0 => Ok(()),
        _ => Err(LedgerError::BadEvent(format!(
            "timestamp {ts:?} is not an ISO-8601 UTC time"
        ))),
    }
}

/// One package's progress over one hop, derived from the log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackportTask {
    pub package: String,
    pub hop: String,
    pub state: TaskState,
    pub notes: Vec<String>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    events: Arc<Vec<Event>>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a ledger from events, checking every persisted from-state
    /// against the replayed one.
    pub fn from_events(events: Vec<Event>) -> Result<Self, LedgerError> {
        let mut states: BTreeMap<(&str, &str), TaskState> = BTreeMap::new();
        for (index, e) in events.iter().enumerate() {
            let key = (e.package.as_str(), e.hop.as_str());
            let current = states.get(&key).copied().unwrap_or(TaskState::Selected);
            if current != e.from {
                return Err(LedgerError::Corrupt {
                    index,
                    reason: format!(
                        "{} {} recorded from {} but replay is at {}",
                        e.package, e.hop, e.from, current
                    ),
                });
            }
            if !current.can_transition(e.to) {
                return Err(LedgerError::Corrupt {
                    index,
                    reason: format!("illegal transition {} -> {}", e.from, e.to),
                });
            }
            states.insert(key, e.to);
        }
        Ok(Self {
            events: Arc::new(events),
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn state_of(&self, package: &str, hop: &str) -> Option<TaskState> {
        let mut seen = false;
        let state = replay(
            self.events
                .iter()
                .filter(|e| e.package == package && e.hop == hop)
                .inspect(|_| seen = true)
                .map(|e| e.to),
        )
        .expect("ledger events are validated on construction");
        seen.then_some(state)
    }

    /// Returns a ledger with one more event; `self` is left untouched.
    pub fn record_event(
        &self,
        package: &str,
        hop: &str,
        to: TaskState,
        note: &str,
        actor: &str,
        timestamp: &str,
    ) -> Result<Ledger, LedgerError> {
        validate_key(package, hop)?;
        validate_timestamp(timestamp)?;
        if note.contains(['\n', '\t']) {
            return Err(LedgerError::BadEvent("notes are a single line without tabs".into()));
        }
        let from = match self.state_of(package, hop) {
            Some(state) => state,
            None if TaskState::Selected.can_transition(to) => TaskState::Selected,
            None => {
                return Err(LedgerError::UnknownTask {
                    package: package.to_string(),
                    hop: hop.to_string(),
                    to,
                })
            }
        };
        if !from.can_transition(to) {
            return Err(LedgerError::IllegalTransition {
                package: package.to_string(),
                hop: hop.to_string(),
                from,
                to,
            });
        }
        let mut events = (*self.events).clone();
        events.push(Event {
            package: package.to_string(),
            hop: hop.to_string(),
            from,
            to,
            note: note.to_string(),
            actor: if actor.is_empty() { DEFAULT_ACTOR } else { actor }.to_string(),
            timestamp: timestamp.to_string(),
        });
        Ok(Self {
            events: Arc::new(events),
        })
    }

    /// Tasks in first-seen order.
    pub fn tasks(&self) -> Vec<BackportTask> {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut tasks: BTreeMap<(String, String), BackportTask> = BTreeMap::new();
        for e in self.events.iter() {
            let key = (e.package.clone(), e.hop.clone());
            let task = tasks.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                BackportTask {
                    package: e.package.clone(),
                    hop: e.hop.clone(),
                    state: TaskState::Selected,
                    notes: Vec::new(),
                    events: Vec::new(),
                }
            });
            task.state = e.to;
            if !e.note.is_empty() && !task.notes.contains(&e.note) {
                task.notes.push(e.note.clone());
            }
            task.events.push(e.clone());
        }
        order
            .into_iter()
            .map(|k| tasks.remove(&k).expect("every ordered key has a task"))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.events.iter().map(event_record).collect()
    }

    /// Parses ledger text. A trailing record that does not parse as a
    /// complete event is reported as the length of the valid prefix.
    pub fn parse(text: &str) -> Result<(Ledger, usize), LedgerError> {
        let (complete, tail) = match text.rfind("\n\n") {
            Some(i) => text.split_at(i + 2),
            None => ("", text),
        };
        let mut stanzas = parse_stanzas(complete).map_err(|e| LedgerError::Corrupt {
            index: 0,
            reason: e.to_string(),
        })?;
        let mut valid_len = complete.len();
        if !tail.trim().is_empty() {
            match parse_stanzas(tail) {
                Ok(extra) if extra.len() == 1 && Event::from_stanza(&extra[0]).is_ok() => {
                    stanzas.extend(extra);
                    valid_len = text.len();
                }
                _ => {}
            }
        } else {
            valid_len = text.len();
        }
        let events = stanzas
            .iter()
            .enumerate()
            .map(|(index, s)| Event::from_stanza(s).map_err(|reason| LedgerError::Corrupt { index, reason }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((Ledger::from_events(events)?, valid_len))
    }
}

fn event_record(e: &Event) -> String {
    let mut text = serialize_stanzas(&[e.to_stanza()]).expect("validated events serialize");
    text.push('\n');
    text
}

/// Reads a ledger file without locking. A missing file is an empty ledger;
/// a partial trailing record is ignored.
pub fn load_ledger(path: &Path) -> Result<Ledger, LedgerError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(Ledger::parse(&text)?.0),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Ledger::new()),
        Err(source) => Err(LedgerError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Exclusive, append-only writer for a ledger file. Holds an advisory
/// lock for its lifetime.
pub struct LedgerWriter {
    path: PathBuf,
    file: File,
    ledger: Ledger,
}

impl LedgerWriter {
    pub fn open(path: &Path) -> Result<Self, LedgerError> {
        let io_err = |source| LedgerError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err)?;
        file.lock().map_err(io_err)?;

        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io_err)?;
        let (ledger, valid_len) = Ledger::parse(&text)?;
        if valid_len < text.len() {
            warn!(
                "{}: truncating {} bytes of partial trailing record",
                path.display(),
                text.len() - valid_len
            );
            file.set_len(valid_len as u64).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        } else if !text.is_empty() && !text.ends_with("\n\n") {
            let pad = if text.ends_with('\n') { "\n" } else { "\n\n" };
            file.write_all(pad.as_bytes()).map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            ledger,
        })
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Validates, appends and syncs one event.
    pub fn record(
        &mut self,
        package: &str,
        hop: &str,
        to: TaskState,
        note: &str,
        actor: &str,
        timestamp: &str,
    ) -> Result<&Event, LedgerError> {
        let next = self.ledger.record_event(package, hop, to, note, actor, timestamp)?;
        let event = next.events().last().expect("just appended");
        let io_err = |source| LedgerError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(event_record(event).as_bytes()).map_err(io_err)?;
        self.file.sync_data().map_err(io_err)?;
        self.ledger = next;
        Ok(self.ledger.events().last().expect("just appended"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildingCell {
    Success,
    Failed,
    NoTask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UploadedCell {
    Success,
    NoTask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackportedCell {
    Done,
    NotFiled,
    NoTask,
}

impl BuildingCell {
    pub fn as_str(self) -> &'static str {
        match self {
            BuildingCell::Success => "success",
            BuildingCell::Failed => "failed",
            BuildingCell::NoTask => "no task",
        }
    }
}

impl UploadedCell {
    pub fn as_str(self) -> &'static str {
        match self {
            UploadedCell::Success => "success",
            UploadedCell::NoTask => "no task",
        }
    }
}

impl BackportedCell {
    pub fn as_str(self) -> &'static str {
        match self {
            BackportedCell::Done => "done",
            BackportedCell::NotFiled => "not filed",
            BackportedCell::NoTask => "no task",
        }
    }
}

/// Per-package workflow columns of the status table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rollup {
    pub building: BuildingCell,
    pub uploaded: UploadedCell,
    pub backported: BackportedCell,
    /// Hop label of the most recent `Done` event, or empty.
    pub from: String,
    pub notes: Vec<String>,
}

impl Default for Rollup {
    fn default() -> Self {
        Self {
            building: BuildingCell::NoTask,
            uploaded: UploadedCell::NoTask,
            backported: BackportedCell::NoTask,
            from: String::new(),
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    /// Number of tasks currently in each state; every state is present.
    pub counts: BTreeMap<TaskState, usize>,
    pub packages: BTreeMap<String, Rollup>,
}

impl Summary {
    pub fn count(&self, state: TaskState) -> usize {
        self.counts.get(&state).copied().unwrap_or(0)
    }
}

pub fn summarize(ledger: &Ledger) -> Summary {
    let mut counts: BTreeMap<TaskState, usize> = TaskState::ALL.into_iter().map(|s| (s, 0)).collect();
    for task in ledger.tasks() {
        *counts.entry(task.state).or_default() += 1;
    }

    let mut packages: BTreeMap<String, Rollup> = BTreeMap::new();
    let mut built: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    for e in ledger.events() {
        let rollup = packages.entry(e.package.clone()).or_default();
        let flags = built.entry(e.package.as_str()).or_default();
        match e.to {
            TaskState::BuildSucceeded => flags.0 = true,
            TaskState::BuildFailed => flags.1 = true,
            TaskState::Uploaded => rollup.uploaded = UploadedCell::Success,
            TaskState::Done => rollup.from = e.hop.clone(),
            _ => {}
        }
        if !e.note.is_empty() && !rollup.notes.contains(&e.note) {
            rollup.notes.push(e.note.clone());
        }
    }
    for (package, (succeeded, failed)) in built {
        let rollup = packages.get_mut(package).expect("rollup exists for every event");
        rollup.building = if succeeded {
            BuildingCell::Success
        } else if failed {
            BuildingCell::Failed
        } else {
            BuildingCell::NoTask
        };
    }
    for task in ledger.tasks() {
        let rollup = packages.get_mut(&task.package).expect("rollup exists for every task");
        match task.state {
            TaskState::Done => rollup.backported = BackportedCell::Done,
            TaskState::NotFiled if rollup.backported != BackportedCell::Done => {
                rollup.backported = BackportedCell::NotFiled
            }
            _ => {}
        }
    }
    Summary { counts, packages }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TaskState::*;

    const TS: &str = "2013-06-20T12:00:00Z";

    fn walk(ledger: &Ledger, package: &str, hop: &str, states: &[TaskState]) -> Result<Ledger, LedgerError> {
        states
            .iter()
            .try_fold(ledger.clone(), |l, &s| l.record_event(package, hop, s, "", "", TS))
    }

    #[test]
    fn paml_goes_all_the_way() {
        let l = walk(
            &Ledger::new(),
            "paml",
            "quantal2precise",
            &[BuildSucceeded, TestPassed, Uploaded, Filed, Done],
        )
        .unwrap();
        assert_eq!(l.state_of("paml", "quantal2precise"), Some(Done));
        assert_eq!(l.events()[0].from, Selected);
        assert_eq!(l.events()[0].actor, "operator");
    }

    #[test]
    fn dspp_stops_at_failure() {
        let l = walk(&Ledger::new(), "dspp", "quantal2precise", &[BuildFailed]).unwrap();
        let err = l
            .record_event("dspp", "quantal2precise", Uploaded, "", "", TS)
            .unwrap_err();
        assert!(matches!(
            err,
            LedgerError::IllegalTransition {
                from: BuildFailed,
                to: Uploaded,
                ..
            }
        ));
        // prior value unchanged
        assert_eq!(l.events().len(), 1);
    }

    #[test]
    fn neobio_not_filed() {
        let l = walk(
            &Ledger::new(),
            "neobio",
            "raring2quantal",
            &[BuildSucceeded, TestPassed, Uploaded, NotFiled],
        )
        .unwrap();
        assert_eq!(l.state_of("neobio", "raring2quantal"), Some(NotFiled));
        let l = walk(&l, "neobio", "raring2quantal", &[Filed, Done]).unwrap();
        assert_eq!(l.state_of("neobio", "raring2quantal"), Some(Done));
    }

    #[test]
    fn unknown_task() {
        let err = Ledger::new()
            .record_event("paml", "quantal2precise", Uploaded, "", "", TS)
            .unwrap_err();
        assert!(matches!(err, LedgerError::UnknownTask { .. }));
    }

    #[test]
    fn bad_events() {
        let l = Ledger::new();
        assert!(matches!(
            l.record_event("Paml", "quantal2precise", BuildFailed, "", "", TS),
            Err(LedgerError::BadEvent(_))
        ));
        assert!(matches!(
            l.record_event("paml", "quantal", BuildFailed, "", "", TS),
            Err(LedgerError::BadEvent(_))
        ));
        assert!(matches!(
            l.record_event("paml", "quantal2precise", BuildFailed, "", "", "2013-06-20 12:00"),
            Err(LedgerError::BadEvent(_))
        ));
        assert!(matches!(
            l.record_event(
                "paml",
                "quantal2precise",
                BuildFailed,
                "",
                "",
                "2013-06-20T12:00:00+02:00"
            ),
            Err(LedgerError::BadEvent(_))
        ));
    }

    #[test]
    fn replay_examples() {
        assert_eq!(replay([]), Ok(Selected));
        assert_eq!(replay([BuildSucceeded, TestPassed, Uploaded, Filed, Done]), Ok(Done));
        assert_eq!(
            replay([BuildFailed, Uploaded]),
            Err(ReplayError {
                index: 1,
                from: BuildFailed,
                to: Uploaded
            })
        );
    }

    #[test]
    fn transition_matrix() {
        let mut legal = 0;
        for from in TaskState::ALL {
            for to in TaskState::ALL {
                if from.can_transition(to) {
                    legal += 1;
                    assert!(!from.is_terminal());
                }
            }
            if from.is_terminal() {
                assert!(TaskState::ALL.iter().all(|&to| !from.can_transition(to)));
            }
        }
        assert_eq!(legal, LEGAL_TRANSITIONS.len());
    }

    #[test]
    fn summary_counts() {
        let empty = summarize(&Ledger::new());
        assert!(empty.counts.values().all(|&c| c == 0));
        assert!(empty.packages.is_empty());

        let l = walk(&Ledger::new(), "dspp", "quantal2precise", &[BuildFailed]).unwrap();
        let s = summarize(&l);
        assert_eq!(s.count(BuildFailed), 1);
        assert_eq!(s.packages["dspp"].building, BuildingCell::Failed);
        assert_eq!(s.packages["dspp"].uploaded, UploadedCell::NoTask);
        assert_eq!(s.packages["dspp"].backported, BackportedCell::NoTask);
        assert_eq!(s.packages["dspp"].from, "");
    }

    #[test]
    fn from_is_latest_done_hop() {
        let done = [BuildSucceeded, TestPassed, Uploaded, Filed, Done];
        let l = walk(&Ledger::new(), "cluster3", "raring2quantal", &done).unwrap();
        let l = walk(&l, "cluster3", "quantal2precise", &done).unwrap();
        let s = summarize(&l);
        assert_eq!(s.packages["cluster3"].from, "quantal2precise");
        assert_eq!(s.count(Done), 2);
    }

    #[test]
    fn text_round_trip_and_partial_tail() {
        let l = walk(&Ledger::new(), "paml", "quantal2precise", &[BuildSucceeded, TestPassed]).unwrap();
        let l = l
            .record_event("grinder", "quantal2precise", BuildFailed, "Bugreport", "ci-bot", TS)
            .unwrap();
        let text = l.to_text();
        let (back, len) = Ledger::parse(&text).unwrap();
        assert_eq!(back, l);
        assert_eq!(len, text.len());

        let torn = format!("{text}Package: paml\nHop: quantal2pre");
        let (back, len) = Ledger::parse(&torn).unwrap();
        assert_eq!(back, l);
        assert_eq!(len, text.len());

        // last record complete but missing its separator
        let trimmed = text.trim_end_matches('\n');
        let (back, len) = Ledger::parse(trimmed).unwrap();
        assert_eq!(back, l);
        assert_eq!(len, trimmed.len());
    }

    #[test]
    fn corrupt_from_state_detected() {
        let l = walk(&Ledger::new(), "paml", "quantal2precise", &[BuildSucceeded, TestPassed]).unwrap();
        let text = l
            .to_text()
            .replacen("From-State: build-succeeded", "From-State: selected", 1);
        assert!(matches!(
            Ledger::parse(&text),
            Err(LedgerError::Corrupt { index: 1, .. })
        ));
    }

    #[test]
    fn writer_appends_and_truncates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger");
        {
            let mut w = LedgerWriter::open(&path).unwrap();
            w.record("paml", "quantal2precise", BuildSucceeded, "", "", TS).unwrap();
            w.record("paml", "quantal2precise", TestPassed, "", "", TS).unwrap();
        }
        let good = fs::read_to_string(&path).unwrap();
        fs::write(&path, format!("{good}Package: pa")).unwrap();
        {
            let mut w = LedgerWriter::open(&path).unwrap();
            assert_eq!(fs::read_to_string(&path).unwrap(), good);
            w.record("paml", "quantal2precise", Uploaded, "", "", TS).unwrap();
            assert!(w.record("paml", "quantal2precise", Done, "", "", TS).is_err());
        }
        let l = load_ledger(&path).unwrap();
        assert_eq!(l.state_of("paml", "quantal2precise"), Some(Uploaded));
        assert!(fs::read_to_string(&path).unwrap().starts_with(&good));
    }
}
