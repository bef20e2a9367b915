//! Append-only JSONL persistence. Each line is one [`LogLine`]. A turn's
//! events are written as they are emitted and a `commit` line closes the
//! turn, so a restart restores every committed turn and drops a turn that
//! was cut off midway.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::Mutex;

use agentloom_core::events::TurnEvent;
use agentloom_core::planner::HistoryTurn;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Created {
        session: String,
        at_ms: u64,
    },
    Message {
        session: String,
        turn: usize,
        text: String,
        image_ids: Vec<String>,
    },
    Event {
        session: String,
        turn: usize,
        event: TurnEvent,
    },
    Commit {
        session: String,
        turn: usize,
        history: Vec<HistoryTurn>,
        backend_calls: usize,
        images: Vec<String>,
        at_ms: u64,
    },
}

pub struct EventLog {
    file: Mutex<File>,
}

/// A session as reconstructed from the log.
#[derive(Debug, Default)]
pub(crate) struct Restored {
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    pub history: Vec<HistoryTurn>,
    pub backend_calls: usize,
    pub images: Vec<String>,
    pub turns: Vec<Vec<TurnEvent>>,
}

impl EventLog {
    pub(crate) fn open(path: &Path) -> std::io::Result<(Self, BTreeMap<String, Restored>)> {
        let restored = if path.exists() { replay(File::open(path)?)? } else { BTreeMap::new() };
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        // keep a torn final line from swallowing the next record
        if ends_mid_line(path)? {
            file.write_all(b"\n")?;
        }
        Ok((Self { file: Mutex::new(file) }, restored))
    }

    /// Write failures are logged and otherwise ignored; persistence never
    /// fails a turn.
    pub(crate) fn append(&self, line: &LogLine) {
        let Ok(mut text) = serde_json::to_string(line) else {
            return;
        };
        text.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = file.write_all(text.as_bytes()).and_then(|_| file.flush()) {
            tracing::error!("event log write failed: {e}");
        }
    }
}

fn ends_mid_line(path: &Path) -> std::io::Result<bool> {
    let mut file = File::open(path)?;
    if file.metadata()?.len() == 0 {
        return Ok(false);
    }
    file.seek(SeekFrom::End(-1))?;
    let mut last = [0u8];
    file.read_exact(&mut last)?;
    Ok(last[0] != b'\n')
}

fn replay(file: File) -> std::io::Result<BTreeMap<String, Restored>> {
    let mut sessions: BTreeMap<String, Restored> = BTreeMap::new();
    let mut pending: BTreeMap<(String, usize), Vec<TurnEvent>> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = match serde_json::from_str(&line) {
            Ok(l) => l,
            Err(e) => {
                // most likely a torn final write
                tracing::warn!("event log line {} skipped: {e}", i + 1);
                continue;
            }
        };
        match parsed {
            LogLine::Created { session, at_ms } => {
                let s = sessions.entry(session).or_default();
                s.created_at_ms = at_ms;
                s.updated_at_ms = at_ms;
            }
            LogLine::Message { .. } => {}
            LogLine::Event { session, turn, event } => pending.entry((session, turn)).or_default().push(event),
            LogLine::Commit {
                session,
                turn,
                history,
                backend_calls,
                images,
                at_ms,
            } => {
                let events = pending.remove(&(session.clone(), turn)).unwrap_or_default();
                let s = sessions.entry(session).or_default();
                s.history = history;
                s.backend_calls = backend_calls;
                s.images = images;
                s.updated_at_ms = at_ms;
                s.turns.push(events);
            }
        }
    }
    Ok(sessions)
}
