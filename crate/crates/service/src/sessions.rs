use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use agentloom_core::events::TurnEvent;
use agentloom_core::pipeline::SessionState;
use agentloom_core::planner::HistoryTurn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::log::Restored;

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// What `GET /v1/sessions/{id}` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    pub images: Vec<String>,
    pub history: Vec<HistoryTurn>,
    pub turns: usize,
    pub busy: bool,
}

/// Committed state. A running turn works on a copy and writes back once.
#[derive(Debug, Clone, Default)]
pub(crate) struct Committed {
    pub state: SessionState,
    pub images: Vec<String>,
    pub turns: Vec<Vec<TurnEvent>>,
    pub updated_at_ms: u64,
}

pub(crate) struct Session {
    pub id: String,
    pub created_at_ms: u64,
    busy: AtomicBool,
    committed: Mutex<Committed>,
}

/// Held by the task running a turn; clears the busy flag when dropped.
pub(crate) struct TurnGuard(Arc<Session>);

impl Drop for TurnGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

impl Session {
    fn new(id: String, created_at_ms: u64, committed: Committed) -> Self {
        Self {
            id,
            created_at_ms,
            busy: AtomicBool::new(false),
            committed: Mutex::new(committed),
        }
    }

    /// `None` when a turn is already running.
    pub fn try_begin(self: &Arc<Self>) -> Option<TurnGuard> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| TurnGuard(self.clone()))
    }

    pub fn snapshot(&self) -> Committed {
        self.committed.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn commit(&self, _guard: &TurnGuard, state: SessionState, images: Vec<String>, events: Vec<TurnEvent>) -> u64 {
        let mut c = self.committed.lock().unwrap_or_else(|e| e.into_inner());
        c.state = state;
        c.images = images;
        c.turns.push(events);
        c.updated_at_ms = now_ms();
        c.updated_at_ms
    }

    pub fn summary(&self) -> SessionSummary {
        let c = self.snapshot();
        SessionSummary {
            id: self.id.clone(),
            created_at_ms: self.created_at_ms,
            updated_at_ms: c.updated_at_ms,
            images: c.images,
            history: c.state.history,
            turns: c.turns.len(),
            busy: self.busy.load(Ordering::Acquire),
        }
    }
}

#[derive(Default)]
pub(crate) struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl SessionStore {
    pub fn create(&self) -> Arc<Session> {
        let mut map = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        let mut rng = rand::thread_rng();
        let id = loop {
            let id = format!("s-{:016x}", rng.gen::<u64>());
            if !map.contains_key(&id) {
                break id;
            }
        };
        let at = now_ms();
        let session = Arc::new(Session::new(
            id.clone(),
            at,
            Committed {
                updated_at_ms: at,
                ..Default::default()
            },
        ));
        map.insert(id, session.clone());
        session
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    pub fn restore(&self, restored: BTreeMap<String, Restored>) {
        let mut map = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        for (id, r) in restored {
            let committed = Committed {
                state: SessionState {
                    history: r.history,
                    backend_calls: r.backend_calls,
                },
                images: r.images,
                turns: r.turns,
                updated_at_ms: r.updated_at_ms,
            };
            map.insert(id.clone(), Arc::new(Session::new(id, r.created_at_ms, committed)));
        }
    }
}
