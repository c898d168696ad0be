//! Registry of live sessions over one data directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use groupdine_core::config::Config;
use groupdine_core::domain::GroupId;
use groupdine_core::registry::Strategies;
use groupdine_core::session::SessionError;

use crate::clock::Clock;
use crate::host::{HostError, SessionHost};

/// Group ids double as file names, so they are restricted to a safe alphabet.
pub fn valid_group_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub struct App {
    config: Config,
    strategies: Strategies,
    clock: Arc<dyn Clock>,
    dir: PathBuf,
    hosts: RwLock<BTreeMap<GroupId, Arc<SessionHost>>>,
}

impl std::fmt::Debug for App {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("App").field("dir", &self.dir).finish()
    }
}

impl App {
    /// Opens `config.server.data_dir`, re-folding every `*.log` found there.
    /// Empty logs (a crash before the first record) are skipped.
    pub fn open(config: Config, strategies: Strategies, clock: Arc<dyn Clock>) -> Result<Arc<Self>, HostError> {
        let dir = config.server.data_dir.clone();
        let io = |source| HostError::Io {
            path: dir.clone(),
            source,
        };
        fs::create_dir_all(&dir).map_err(io)?;
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "log"))
            .collect();
        paths.sort();
        let mut hosts = BTreeMap::new();
        for path in paths {
            if fs::metadata(&path).map_err(io)?.len() == 0 {
                continue;
            }
            let host = SessionHost::open(&path, config.clone(), strategies.clone())?;
            hosts.insert(host.group().clone(), Arc::new(host));
        }
        Ok(Arc::new(Self {
            config,
            strategies,
            clock,
            dir,
            hosts: RwLock::new(hosts),
        }))
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn groups(&self) -> Vec<GroupId> {
        self.hosts
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    pub fn host(&self, group: &GroupId) -> Option<Arc<SessionHost>> {
        self.hosts.read().unwrap_or_else(|e| e.into_inner()).get(group).cloned()
    }

    pub fn create(&self, group: GroupId) -> Result<Arc<SessionHost>, HostError> {
        let mut hosts = self.hosts.write().unwrap_or_else(|e| e.into_inner());
        if hosts.contains_key(&group) {
            return Err(SessionError::AlreadyCreated.into());
        }
        let host = Arc::new(SessionHost::create(
            &self.dir,
            group.clone(),
            self.config.clone(),
            self.strategies.clone(),
            self.clock.now_ms(),
        )?);
        hosts.insert(group, host.clone());
        Ok(host)
    }

    /// Commits due clock events in every session. Returns how many were written.
    pub fn advance_all(&self) -> Result<usize, HostError> {
        let now = self.clock.now_ms();
        let hosts: Vec<Arc<SessionHost>> = self
            .hosts
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        let mut n = 0;
        for h in hosts {
            n += h.advance(now)?;
        }
        Ok(n)
    }
}
