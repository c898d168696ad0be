//! Drives a scripted session through the HTTP API in-process, with a manual
//! clock, so simulations exercise exactly the code path real clients use.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use groupdine_core::config::Config;
use groupdine_core::domain::{EventKind, Millis};
use groupdine_core::pipeline::Snapshot;
use groupdine_core::registry::Strategies;
use groupdine_core::simulate::{plan, run_plan, EventSink, PersonaFile, RunStats};
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::api::router;
use crate::app::App;
use crate::clock::ManualClock;

pub struct HttpDriver {
    rt: tokio::runtime::Runtime,
    app: Arc<App>,
    router: Router,
    clock: ManualClock,
    base_ms: u64,
    group: Option<String>,
}

/// Method, path and JSON body for a client-submittable event.
pub fn request_for(group: Option<&str>, kind: &EventKind) -> Result<(String, Value), String> {
    let g = || group.ok_or_else(|| "no session created yet".to_owned());
    Ok(match kind {
        EventKind::Create { group, .. } => ("/groups".into(), json!({ "group": group })),
        EventKind::Join { member, nickname } => (
            format!("/groups/{}/join", g()?),
            json!({ "member": member, "nickname": nickname }),
        ),
        EventKind::Phase { phase, .. } => (format!("/groups/{}/admin/phase", g()?), json!({ "phase": phase })),
        EventKind::Rate {
            member,
            restaurant,
            value,
        } => (
            format!("/groups/{}/rating", g()?),
            json!({ "member": member, "restaurant": restaurant, "value": value }),
        ),
        EventKind::Negative {
            member,
            restaurant,
            value,
        } => (
            format!("/groups/{}/negative", g()?),
            json!({ "member": member, "restaurant": restaurant, "value": value }),
        ),
        EventKind::Save {
            saver,
            source,
            restaurant,
            value,
        } => (
            format!("/groups/{}/save", g()?),
            json!({ "saver": saver, "source": source, "restaurant": restaurant, "value": value }),
        ),
        EventKind::Chat {
            sender,
            text,
            restaurant,
        } => {
            let mut body = json!({ "sender": sender, "text": text });
            if let Some(r) = restaurant {
                body["restaurant"] = json!(r);
            }
            (format!("/groups/{}/chat", g()?), body)
        }
        EventKind::Tick => return Err("ticks are generated by the server clock".into()),
    })
}

impl HttpDriver {
    /// `base_ms` is the wall-clock time that session time 0 maps to.
    pub fn new(app: Arc<App>, clock: ManualClock, base_ms: u64) -> Self {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .expect("tokio runtime");
        clock.set(base_ms);
        Self {
            rt,
            router: router(app.clone()),
            app,
            clock,
            base_ms,
            group: None,
        }
    }

    pub fn app(&self) -> &Arc<App> {
        &self.app
    }

    pub fn group(&self) -> Option<&str> {
        self.group.as_deref()
    }

    /// Swaps in a freshly opened app, as after a process restart.
    pub fn restart(&mut self, app: Arc<App>) {
        self.router = router(app.clone());
        self.app = app;
    }

    pub fn request(&self, method: Method, path: &str, body: Option<&Value>) -> Result<(StatusCode, Vec<u8>), String> {
        let mut req = Request::builder().method(method).uri(path);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let req = req.body(body).map_err(|e| e.to_string())?;
        self.rt.block_on(async {
            let resp = self.router.clone().oneshot(req).await.map_err(|e| e.to_string())?;
            let status = resp.status();
            let bytes = resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
            Ok((status, bytes.to_vec()))
        })
    }

    pub fn get_json<T: DeserializeOwned>(&self, path: &str) -> Result<T, String> {
        let (status, body) = self.request(Method::GET, path, None)?;
        if !status.is_success() {
            return Err(format!("GET {path}: {status} {}", String::from_utf8_lossy(&body)));
        }
        serde_json::from_slice(&body).map_err(|e| format!("GET {path}: {e}"))
    }

    pub fn get_text(&self, path: &str) -> Result<String, String> {
        let (status, body) = self.request(Method::GET, path, None)?;
        if !status.is_success() {
            return Err(format!("GET {path}: {status}"));
        }
        String::from_utf8(body).map_err(|e| e.to_string())
    }
}

impl EventSink for HttpDriver {
    fn advance(&mut self, at: Millis) -> Result<(), String> {
        self.clock.set(self.base_ms + at);
        self.app.advance_all().map(|_| ()).map_err(|e| e.to_string())
    }

    fn submit(&mut self, at: Millis, kind: EventKind) -> Result<bool, String> {
        self.clock.set(self.base_ms + at);
        let (path, body) = request_for(self.group.as_deref(), &kind)?;
        let (status, resp) = self.request(Method::POST, &path, Some(&body))?;
        if status.is_server_error() {
            return Err(format!("POST {path}: {status} {}", String::from_utf8_lossy(&resp)));
        }
        if status.is_success() {
            if let EventKind::Create { group, .. } = &kind {
                self.group = Some(group.to_string());
            }
        }
        Ok(status.is_success())
    }
}

/// Result of [`simulate_over_http`].
#[derive(Debug, Clone)]
pub struct HttpRun {
    /// Snapshot endpoint body, byte for byte.
    pub snapshot_json: String,
    pub snapshot: Snapshot,
    /// Log endpoint body.
    pub log: String,
    /// Log file contents after the run.
    pub log_file: String,
    pub stats: RunStats,
}

/// Plans a simulated session and plays it against a fresh service rooted at
/// `config.server.data_dir`. With `restart_at`, the service is dropped and
/// reopened from disk once the clock reaches that session time.
pub fn simulate_over_http(
    file: &PersonaFile,
    config: &Config,
    duration_s: u64,
    seed: u64,
    restart_at: Option<Millis>,
) -> Result<HttpRun, String> {
    const BASE_MS: u64 = 1_700_000_000_000;
    file.validate().map_err(|e| e.to_string())?;
    let strategies = Strategies::from_config(config).map_err(|e| e.to_string())?;
    let clock = ManualClock::new(BASE_MS);
    let open = || App::open(config.clone(), strategies.clone(), Arc::new(clock.clone())).map_err(|e| e.to_string());
    let mut driver = HttpDriver::new(open()?, clock.clone(), BASE_MS);
    let script = plan(file, config, duration_s, seed);
    let end = duration_s * 1000;
    let cut = restart_at.unwrap_or(end).min(end);
    let split = script.partition_point(|p| p.at < cut);
    let first = run_plan(&script[..split], &mut driver, cut).map_err(|e| e.to_string())?;
    if restart_at.is_some() {
        driver.restart(open()?);
    }
    let second = run_plan(&script[split..], &mut driver, end).map_err(|e| e.to_string())?;
    let group = driver.group().ok_or("the session was never created")?.to_owned();
    let snapshot_json = driver.get_text(&format!("/groups/{group}/snapshot"))?;
    let snapshot = serde_json::from_str(&snapshot_json).map_err(|e| e.to_string())?;
    let log = driver.get_text(&format!("/groups/{group}/log"))?;
    let path = crate::host::log_path(driver.app().dir(), &group.as_str().into());
    let log_file = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    Ok(HttpRun {
        snapshot_json,
        snapshot,
        log,
        log_file,
        stats: RunStats {
            accepted: first.accepted + second.accepted,
            rejected: first.rejected + second.rejected,
        },
    })
}
