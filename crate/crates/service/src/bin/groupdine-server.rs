//! Serves the session API. Config comes from `--config` (TOML), then the
//! GROUPDINE_PORT / GROUPDINE_DATA_DIR environment overrides, then flags.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use groupdine_core::config::Config;
use groupdine_core::registry::Strategies;
use groupdine_service::{router, spawn_ticker, App, SystemClock};

#[derive(Debug, Parser)]
#[command(name = "groupdine-server", about = "Group dining session server")]
struct Args {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// How often due ticks and deadlines are committed, in milliseconds.
    #[arg(long, default_value_t = 250)]
    poll_ms: u64,
}

fn load(args: &Args) -> Result<Config, String> {
    let mut config = match &args.config {
        Some(p) => Config::load(p).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    config.apply_process_env().map_err(|e| e.to_string())?;
    if let Some(b) = &args.bind {
        config.server.bind = b.clone();
    }
    if let Some(p) = args.port {
        config.server.port = p;
    }
    if let Some(d) = &args.data_dir {
        config.server.data_dir = d.clone();
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config: {e}");
            return ExitCode::from(2);
        }
    };
    let strategies = match Strategies::from_config(&config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("strategies: {e}");
            return ExitCode::from(2);
        }
    };
    let addr = format!("{}:{}", config.server.bind, config.server.port);
    let app = match App::open(config, strategies, Arc::new(SystemClock)) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("opening data directory: {e}");
            return ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("binding {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    eprintln!("listening on {addr}, data in {}", app.dir().display());
    let ticker = spawn_ticker(app.clone(), Duration::from_millis(args.poll_ms.max(10)));
    let served = axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    ticker.abort();
    match served {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("server error: {e}");
            ExitCode::FAILURE
        }
    }
}
