//! Per-operator browsing state.
//!
//! A [`WorkingSet`] holds the current candidates (seeded from a query and
//! grown by expansion), colour tags, and produces the grouped view model.
//! [`SessionStore`] serialises commands per session and appends each one to
//! a replayable log.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError};
use crate::query::ScoredResult;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("segment {0:?} is not in the working set")]
    NotInWorkingSet(String),
    #[error("video {0:?} is not represented in the working set")]
    VideoNotInWorkingSet(String),
    #[error("unknown colour {0:?}; expected one of red, orange, yellow, green, blue, purple")]
    UnknownColor(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("new order is not a permutation of the working set")]
    NotAPermutation,
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("session log {path}: {message}")]
    Log { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorTag {
    Red,
    Orange,
    Yellow,
    Green,
    Blue,
    Purple,
}

impl ColorTag {
    pub const PALETTE: [ColorTag; 6] = [
        ColorTag::Red,
        ColorTag::Orange,
        ColorTag::Yellow,
        ColorTag::Green,
        ColorTag::Blue,
        ColorTag::Purple,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ColorTag::Red => "red",
            ColorTag::Orange => "orange",
            ColorTag::Yellow => "yellow",
            ColorTag::Green => "green",
            ColorTag::Blue => "blue",
            ColorTag::Purple => "purple",
        }
    }
}

impl fmt::Display for ColorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColorTag {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::PALETTE
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| SessionError::UnknownColor(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Query,
    Expansion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub segment_id: String,
    pub score: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkingSet {
    session_id: String,
    entries: Vec<Entry>,
    members: HashSet<String>,
    tags: BTreeMap<String, ColorTag>,
}

impl WorkingSet {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            entries: Vec::new(),
            members: HashSet::new(),
            tags: BTreeMap::new(),
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn tags(&self) -> &BTreeMap<String, ColorTag> {
        &self.tags
    }

    pub fn tag_of(&self, segment_id: &str) -> Option<ColorTag> {
        self.tags.get(segment_id).copied()
    }

    pub fn contains(&self, segment_id: &str) -> bool {
        self.members.contains(segment_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Replaces the entries with query results. Tags of segments that survive
    /// the re-seed are kept; the rest are dropped. Repeated segment ids keep
    /// their first occurrence.
    pub fn seed(&mut self, results: &[ScoredResult]) {
        self.entries.clear();
        self.members.clear();
        for r in results {
            if self.members.insert(r.segment_id.clone()) {
                self.entries.push(Entry {
                    segment_id: r.segment_id.clone(),
                    score: r.score,
                    origin: Origin::Query,
                });
            }
        }
        let members = &self.members;
        self.tags.retain(|id, _| members.contains(id));
    }

    fn append_expansion(&mut self, segment_id: &str) -> bool {
        if !self.members.insert(segment_id.to_string()) {
            return false;
        }
        self.entries.push(Entry {
            segment_id: segment_id.to_string(),
            score: 0.0,
            origin: Origin::Expansion,
        });
        true
    }

    /// Appends the catalog neighbours of a member segment. Returns how many
    /// entries were added.
    pub fn expand_neighbors(
        &mut self,
        catalog: &Catalog,
        segment_id: &str,
        radius: u32,
    ) -> Result<usize, SessionError> {
        if !self.contains(segment_id) {
            return Err(SessionError::NotInWorkingSet(segment_id.to_string()));
        }
        let neighbors = catalog.neighbors(segment_id, radius)?;
        Ok(neighbors
            .into_iter()
            .filter(|s| self.append_expansion(&s.segment_id))
            .count())
    }

    /// Appends every segment of a video already represented in the set.
    pub fn expand_video(&mut self, catalog: &Catalog, video_id: &str) -> Result<usize, SessionError> {
        let represented = self
            .entries
            .iter()
            .any(|e| catalog.segment(&e.segment_id).is_some_and(|s| s.video_id == video_id));
        if !represented {
            return Err(SessionError::VideoNotInWorkingSet(video_id.to_string()));
        }
        let segs = catalog.segments_of_video(video_id)?;
        Ok(segs.iter().filter(|s| self.append_expansion(&s.segment_id)).count())
    }

    /// Sets, replaces or (with `None`) clears a segment's tag.
    pub fn tag(&mut self, segment_id: &str, color: Option<ColorTag>) -> Result<(), SessionError> {
        if !self.contains(segment_id) {
            return Err(SessionError::NotInWorkingSet(segment_id.to_string()));
        }
        match color {
            Some(c) => {
                self.tags.insert(segment_id.to_string(), c);
            }
            None => {
                self.tags.remove(segment_id);
            }
        }
        Ok(())
    }

    /// Re-arranges entries into the given order, which must be a permutation
    /// of the current members.
    pub fn apply_order(&mut self, order: &[String]) -> Result<(), SessionError> {
        if order.len() != self.entries.len() {
            return Err(SessionError::NotAPermutation);
        }
        let mut by_id: HashMap<&str, &Entry> = self.entries.iter().map(|e| (e.segment_id.as_str(), e)).collect();
        let mut next = Vec::with_capacity(order.len());
        for id in order {
            let e = by_id.remove(id.as_str()).ok_or(SessionError::NotAPermutation)?;
            next.push(e.clone());
        }
        self.entries = next;
        Ok(())
    }

    /// Entries as ranked results, in working-set order.
    pub fn as_results(&self) -> Vec<ScoredResult> {
        self.entries
            .iter()
            .map(|e| ScoredResult::single(e.segment_id.clone(), e.score))
            .collect()
    }

    /// Flat view in working-set order.
    pub fn grid_view(&self) -> Vec<ViewSegment> {
        self.entries
            .iter()
            .map(|e| ViewSegment {
                segment_id: e.segment_id.clone(),
                score: e.score,
                origin: e.origin,
                tag: self.tag_of(&e.segment_id),
                start_ms: None,
                end_ms: None,
            })
            .collect()
    }

    /// Entries grouped by video: groups by descending best score (ties by
    /// video id), segments within a group by ascending `start_ms`. Entries
    /// whose segment is not in the catalog are left out.
    pub fn group_by_video(&self, catalog: &Catalog) -> VideoGroupView {
        let mut groups: BTreeMap<&str, Vec<(&Entry, u64, u64)>> = BTreeMap::new();
        for e in &self.entries {
            if let Some(s) = catalog.segment(&e.segment_id) {
                groups
                    .entry(s.video_id.as_str())
                    .or_default()
                    .push((e, s.start_ms, s.end_ms));
            }
        }
        let mut out: Vec<VideoGroup> = groups
            .into_iter()
            .map(|(video_id, mut members)| {
                members.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.segment_id.cmp(&b.0.segment_id)));
                let best_score = members
                    .iter()
                    .map(|(e, _, _)| e.score)
                    .fold(f64::NEG_INFINITY, f64::max);
                VideoGroup {
                    video_id: video_id.to_string(),
                    best_score,
                    segments: members
                        .into_iter()
                        .map(|(e, start, end)| ViewSegment {
                            segment_id: e.segment_id.clone(),
                            score: e.score,
                            origin: e.origin,
                            tag: self.tag_of(&e.segment_id),
                            start_ms: Some(start),
                            end_ms: Some(end),
                        })
                        .collect(),
                }
            })
            .collect();
        out.sort_by(|a, b| {
            b.best_score
                .total_cmp(&a.best_score)
                .then_with(|| a.video_id.cmp(&b.video_id))
        });
        VideoGroupView { groups: out }
    }

    /// Applies a logged command. Submissions do not touch the working set.
    pub fn apply(&mut self, catalog: &Catalog, command: &Command) -> Result<usize, SessionError> {
        match command {
            Command::Create => Ok(0),
            Command::Seed { results } => {
                let results: Vec<ScoredResult> = results
                    .iter()
                    .map(|r| ScoredResult::single(r.segment_id.clone(), r.score))
                    .collect();
                self.seed(&results);
                Ok(self.len())
            }
            Command::ExpandNeighbors { segment_id, radius } => self.expand_neighbors(catalog, segment_id, *radius),
            Command::ExpandVideo { video_id } => self.expand_video(catalog, video_id),
            Command::Tag { segment_id, color } => self.tag(segment_id, *color).map(|_| 0),
            Command::Order { segment_ids } => self.apply_order(segment_ids).map(|_| 0),
            Command::Submit { .. } => Ok(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSegment {
    pub segment_id: String,
    pub score: f64,
    pub origin: Origin,
    pub tag: Option<ColorTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoGroup {
    pub video_id: String,
    pub best_score: f64,
    pub segments: Vec<ViewSegment>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VideoGroupView {
    pub groups: Vec<VideoGroup>,
}

// ---------------------------------------------------------------------------
// Command log
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub segment_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    Create,
    Seed {
        results: Vec<SeedEntry>,
    },
    ExpandNeighbors {
        segment_id: String,
        radius: u32,
    },
    ExpandVideo {
        video_id: String,
    },
    Tag {
        segment_id: String,
        color: Option<ColorTag>,
    },
    /// Working-set order after a re-order action.
    Order {
        segment_ids: Vec<String>,
    },
    Submit {
        #[serde(default)]
        task_id: Option<String>,
        video_id: String,
        position_ms: u64,
        #[serde(default)]
        elapsed_ms: Option<u64>,
    },
}

impl Command {
    pub fn seed(results: &[ScoredResult]) -> Self {
        Command::Seed {
            results: results
                .iter()
                .map(|r| SeedEntry {
                    segment_id: r.segment_id.clone(),
                    score: r.score,
                })
                .collect(),
        }
    }
}

/// One line of the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts_ms: u64,
    pub session_id: String,
    #[serde(flatten)]
    pub command: Command,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, SessionError> {
    crate::catalog::read_jsonl(path).map_err(|e| SessionError::Log {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// In-memory sessions with an append-only command log.
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Mutex<WorkingSet>>>>,
    log: Option<Mutex<BufWriter<File>>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            log: None,
        }
    }

    /// Opens (or creates) the log at `path` and replays it.
    pub fn open(path: &Path, catalog: &Catalog) -> Result<Self, SessionError> {
        let mut sessions = HashMap::new();
        if path.exists() {
            for rec in read_log(path)? {
                let ws = sessions
                    .entry(rec.session_id.clone())
                    .or_insert_with(|| WorkingSet::new(rec.session_id.clone()));
                // commands that failed live were logged only on success, so a
                // failure here means the catalog changed underneath the log
                ws.apply(catalog, &rec.command).map_err(|e| SessionError::Log {
                    path: path.to_path_buf(),
                    message: format!("replay of session {}: {e}", rec.session_id),
                })?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| SessionError::Log {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        Ok(Self {
            sessions: RwLock::new(
                sessions
                    .into_iter()
                    .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
                    .collect(),
            ),
            log: Some(Mutex::new(BufWriter::new(file))),
        })
    }

    fn append(&self, session_id: &str, command: &Command) {
        let Some(log) = &self.log else { return };
        let rec = LogRecord {
            ts_ms: now_ms(),
            session_id: session_id.to_string(),
            command: command.clone(),
        };
        let line = serde_json::to_string(&rec).expect("log record serializes");
        let mut w = log.lock().expect("log lock");
        // best-effort durability
        if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
            tracing::warn!("session log write failed: {e}");
        }
    }

    pub fn create(&self) -> String {
        let id = format!("{:016x}", rand::rng().random::<u64>());
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id.clone(), Arc::new(Mutex::new(WorkingSet::new(id.clone()))));
        self.append(&id, &Command::Create);
        id
    }

    pub fn get(&self, session_id: &str) -> Result<Arc<Mutex<WorkingSet>>, SessionError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(session_id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(session_id.to_string()))
    }

    /// Applies a command under the session's lock and logs it on success.
    pub fn apply(&self, session_id: &str, catalog: &Catalog, command: Command) -> Result<usize, SessionError> {
        let ws = self.get(session_id)?;
        let mut ws = ws.lock().expect("session lock");
        let n = ws.apply(catalog, &command)?;
        self.append(session_id, &command);
        Ok(n)
    }

    /// Runs `f` on a consistent snapshot of the session.
    pub fn read<T>(&self, session_id: &str, f: impl FnOnce(&WorkingSet) -> T) -> Result<T, SessionError> {
        let ws = self.get(session_id)?;
        let ws = ws.lock().expect("session lock");
        Ok(f(&ws))
    }

    /// Logs a command without applying it (used for submissions).
    pub fn record(&self, session_id: &str, command: Command) -> Result<(), SessionError> {
        self.get(session_id)?;
        self.append(session_id, &command);
        Ok(())
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("sessions lock").len()
    }
}
