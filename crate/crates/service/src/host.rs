//! One live group session backed by an append-only log file.
//!
//! Every event, including clock-generated ticks and phase changes, is
//! validated, written and synced to disk before it is folded into the
//! in-memory session, so re-folding the file after a crash reproduces the
//! state that clients last observed.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use groupdine_core::config::Config;
use groupdine_core::domain::{Event, EventKind, GroupId, MemberId, Millis, Phase, RestaurantId};
use groupdine_core::eventlog::{encode_line, recover_log, LogError};
use groupdine_core::pipeline::Snapshot;
use groupdine_core::registry::Strategies;
use groupdine_core::session::{MemberList, ReplayError, Session, SessionError};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{broadcast, watch};

use crate::push::{Digest, Push, WireEvent};

const PUSH_CAPACITY: usize = 1024;

#[derive(Debug, Error)]
pub enum HostError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("log {path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("log {path}: {source}")]
    Replay { path: PathBuf, source: ReplayError },
    #[error("log {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("log {path} belongs to group `{found}`")]
    Mismatch { path: PathBuf, found: String },
}

/// Read-only state published after every committed event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostView {
    pub group: GroupId,
    pub epoch_ms: u64,
    pub next_seq: u64,
    pub last_at: Millis,
    pub phase: Phase,
    pub phase_started: Millis,
    pub phase_deadline: Option<Millis>,
    /// Current candidate set, which may be ahead of the last recomputation.
    pub candidates: Vec<RestaurantId>,
    pub lists: Vec<MemberList>,
    /// Per member: restaurants on someone else's list not yet rated by them.
    pub negative_options: BTreeMap<MemberId, Vec<RestaurantId>>,
    pub snapshot: Snapshot,
}

impl HostView {
    fn of(group: &GroupId, s: &Session) -> Self {
        Self {
            group: group.clone(),
            epoch_ms: s.epoch_ms(),
            next_seq: s.next_seq(),
            last_at: s.last_at(),
            phase: s.phase(),
            phase_started: s.phase_started(),
            phase_deadline: s.phase_deadline(),
            candidates: s.candidates().to_vec(),
            lists: s.member_lists(),
            negative_options: s
                .roster()
                .members()
                .map(|m| (m.clone(), s.negative_options(m).into_iter().collect()))
                .collect(),
            snapshot: s.snapshot().clone(),
        }
    }
}

/// Outcome of one accepted submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub event: WireEvent,
    /// Clock-driven events committed ahead of it.
    pub generated: usize,
}

struct Inner {
    session: Session,
    file: File,
    len: u64,
}

pub struct SessionHost {
    group: GroupId,
    path: PathBuf,
    inner: Mutex<Inner>,
    view: watch::Sender<Arc<HostView>>,
    push: broadcast::Sender<Push>,
}

impl std::fmt::Debug for SessionHost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionHost")
            .field("group", &self.group)
            .field("path", &self.path)
            .finish()
    }
}

pub fn log_path(dir: &Path, group: &GroupId) -> PathBuf {
    dir.join(format!("{group}.log"))
}

impl SessionHost {
    /// Starts a new session with its `create` event at `epoch_ms`. The log
    /// file must be missing or empty.
    pub fn create(
        dir: &Path,
        group: GroupId,
        config: Config,
        strategies: Strategies,
        epoch_ms: u64,
    ) -> Result<Self, HostError> {
        let path = log_path(dir, &group);
        let io = |source| HostError::Io {
            path: path.clone(),
            source,
        };
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        if file.metadata().map_err(io)?.len() > 0 {
            return Err(SessionError::AlreadyCreated.into());
        }
        let host = Self::assemble(group.clone(), path, Session::new(config, strategies), file, 0);
        {
            let mut inner = host.lock();
            host.commit(&mut inner, EventKind::Create { group, epoch_ms }, 0)?;
            host.publish(&inner);
        }
        Ok(host)
    }

    /// Re-folds an existing log. A torn final line is cut from the file.
    pub fn open(path: &Path, config: Config, strategies: Strategies) -> Result<Self, HostError> {
        let path = path.to_path_buf();
        let io = |source| HostError::Io {
            path: path.clone(),
            source,
        };
        let text = fs::read_to_string(&path).map_err(io)?;
        let (events, intact) = recover_log(&text).map_err(|source| HostError::Log {
            path: path.clone(),
            source,
        })?;
        let file = OpenOptions::new().append(true).open(&path).map_err(io)?;
        if intact < text.len() {
            file.set_len(intact as u64).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        let session = Session::replay(config, strategies, events).map_err(|source| HostError::Replay {
            path: path.clone(),
            source,
        })?;
        let group = session.group().cloned().ok_or_else(|| HostError::Mismatch {
            path: path.clone(),
            found: String::new(),
        })?;
        if path.file_stem().and_then(|s| s.to_str()) != Some(group.as_str()) {
            return Err(HostError::Mismatch {
                path,
                found: group.to_string(),
            });
        }
        Ok(Self::assemble(group, path, session, file, intact as u64))
    }

    fn assemble(group: GroupId, path: PathBuf, session: Session, file: File, len: u64) -> Self {
        let (view, _) = watch::channel(Arc::new(HostView::of(&group, &session)));
        let (push, _) = broadcast::channel(PUSH_CAPACITY);
        Self {
            group,
            path,
            inner: Mutex::new(Inner { session, file, len }),
            view,
            push,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn group(&self) -> &GroupId {
        &self.group
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Latest published state; never waits on the writer.
    pub fn view(&self) -> Arc<HostView> {
        self.view.borrow().clone()
    }

    pub fn watch(&self) -> watch::Receiver<Arc<HostView>> {
        self.view.subscribe()
    }

    /// Events with `seq >= from` plus a receiver positioned right after them,
    /// so a reconnecting client sees every record exactly once.
    pub fn resume(&self, from: u64) -> (Vec<Event>, broadcast::Receiver<Push>) {
        let inner = self.lock();
        let rx = self.push.subscribe();
        let tail = inner.session.events().iter().skip(from as usize).cloned().collect();
        (tail, rx)
    }

    pub fn events(&self) -> Vec<Event> {
        self.lock().session.events().to_vec()
    }

    /// Session time for wall-clock `now_ms`.
    fn relative(inner: &Inner, now_ms: u64) -> Millis {
        now_ms
            .saturating_sub(inner.session.epoch_ms())
            .max(inner.session.last_at())
    }

    /// Commits every clock-driven event due by wall-clock `now_ms`.
    pub fn advance(&self, now_ms: u64) -> Result<usize, HostError> {
        let mut inner = self.lock();
        let now = Self::relative(&inner, now_ms);
        let n = self.advance_locked(&mut inner, now)?;
        if n > 0 {
            self.publish(&inner);
        }
        Ok(n)
    }

    /// Advances the clock, then validates and commits `kind`.
    pub fn submit(&self, kind: EventKind, now_ms: u64) -> Result<Receipt, HostError> {
        let mut inner = self.lock();
        let now = Self::relative(&inner, now_ms);
        let generated = self.advance_locked(&mut inner, now)?;
        let result = self.commit(&mut inner, kind, now);
        if generated > 0 || result.is_ok() {
            self.publish(&inner);
        }
        Ok(Receipt {
            event: WireEvent::from(&result?),
            generated,
        })
    }

    fn advance_locked(&self, inner: &mut Inner, now: Millis) -> Result<usize, HostError> {
        let mut n = 0;
        while let Some((at, kind)) = inner.session.next_due() {
            if at > now {
                break;
            }
            let at = at.max(inner.session.last_at());
            self.commit(inner, kind, at)?;
            n += 1;
        }
        Ok(n)
    }

    fn commit(&self, inner: &mut Inner, kind: EventKind, at: Millis) -> Result<Event, HostError> {
        inner.session.check(&kind, at)?;
        let event = Event {
            seq: inner.session.next_seq(),
            at,
            kind,
        };
        let mut line = encode_line(&event);
        line.push('\n');
        let written = inner
            .file
            .write_all(line.as_bytes())
            .and_then(|_| inner.file.sync_data());
        if let Err(source) = written {
            // drop any partial record so the file stays a valid prefix
            let _ = inner.file.set_len(inner.len);
            return Err(HostError::Io {
                path: self.path.clone(),
                source,
            });
        }
        inner.len += line.len() as u64;
        let recomputes = matches!(
            event.kind,
            EventKind::Create { .. } | EventKind::Phase { .. } | EventKind::Tick
        );
        inner
            .session
            .apply(event.clone())
            .expect("event was checked against this state");
        let _ = self.push.send(Push::Event(WireEvent::from(&event)));
        if recomputes {
            let _ = self.push.send(Push::Digest(Digest::from(inner.session.snapshot())));
        }
        Ok(event)
    }

    fn publish(&self, inner: &Inner) {
        self.view
            .send_replace(Arc::new(HostView::of(&self.group, &inner.session)));
    }
}
