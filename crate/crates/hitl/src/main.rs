use std::net::SocketAddr;

use clap::{ArgAction, Parser};

use grtc_core::clock::ClockMode;
use grtc_core::grtc::GrtcConfig;
use grtc_core::planners::{PlannerConfig, PlannerKind};
use grtc_hitl::{router, AppState, ServiceConfig};

/// Operator-guided reaching service. Listens on `GRTC_PORT` (default 8080).
#[derive(Parser)]
#[command(name = "grtc-hitl")]
struct Cli {
    /// Charge operator think time to the overall budget.
    #[arg(long, action = ArgAction::Set, default_value_t = false)]
    budget_includes_human: bool,
    #[arg(long, default_value_t = 300.0)]
    t_overall: f64,
    #[arg(long, default_value_t = 10.0)]
    t_pushing: f64,
    #[arg(long, default_value = "rrt")]
    planner: PlannerKind,
    #[arg(long, default_value = "wall")]
    clock: ClockMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    let port: u16 = match std::env::var("GRTC_PORT") {
        Ok(p) => p
            .parse()
            .map_err(|_| format!("GRTC_PORT is not a port number: {p:?}"))?,
        Err(_) => 8080,
    };
    let config = ServiceConfig {
        budget_includes_human: cli.budget_includes_human,
        gcfg: GrtcConfig {
            t_overall: cli.t_overall,
            t_pushing: cli.t_pushing,
            seed: cli.seed,
            ..GrtcConfig::default()
        },
        pcfg: PlannerConfig {
            clock: cli.clock,
            ..PlannerConfig::default()
        },
        planner: cli.planner,
    };
    config.gcfg.validate()?;
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {addr}");
    axum::serve(listener, router(AppState::new(config))).await?;
    Ok(())
}
