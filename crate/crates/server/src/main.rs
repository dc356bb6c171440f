use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use amoeba_core::scenario;
use amoeba_server::{session::SessionOptions, AppState, ServerConfig};
use clap::Parser;

/// Hosts live steering sessions.
#[derive(Debug, Parser)]
#[command(name = "amoeba-server", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Scenario file or preset name used for new sessions.
    #[arg(long, default_value = "condense")]
    scenario: String,
    /// Seconds a session survives without clients.
    #[arg(long, default_value_t = 60)]
    grace: u64,
    /// Steps between frames.
    #[arg(long, default_value_t = 1)]
    frame_every: u64,
    /// Maximum steps per second, 0 for unlimited.
    #[arg(long, default_value_t = 60.0)]
    max_rate: f64,
    /// Start sessions paused.
    #[arg(long)]
    paused: bool,
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    let path = PathBuf::from(&args.scenario);
    let spec = if path.is_file() {
        scenario::parse_scenario_file(&path).map_err(|e| e.to_string())
    } else {
        scenario::preset(&args.scenario)
            .ok_or_else(|| format!("no scenario file or preset named {:?}", args.scenario))
    };
    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut config = ServerConfig::new(spec);
    config.grace = Duration::from_secs(args.grace);
    config.session = SessionOptions {
        frame_every: args.frame_every.max(1),
        start_paused: args.paused,
        max_rate: (args.max_rate > 0.0).then_some(args.max_rate),
    };
    let listener = match tokio::net::TcpListener::bind(args.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.bind);
            return ExitCode::FAILURE;
        }
    };
    eprintln!("listening on {}", args.bind);
    if let Err(e) = amoeba_server::serve(listener, AppState::new(config)).await {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
