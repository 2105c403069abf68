use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use behavior_forge_cli::{prepare, resolve_behavior, resolve_scene, run_scenario, RunOptions};
use behavior_forge_protocol::{Rates, ServeOptions, ServerCore};
use clap::Parser;

/// Run a behavior in the simulator, or serve a live session to operator tools.
#[derive(Debug, Parser)]
#[command(name = "behavior-forge", version)]
struct Args {
    /// Scene file, or a bundled scene name (door_scene, table_scene).
    #[arg(long)]
    scene: String,
    /// Behavior file, or a bundled behavior name (push_door, pick_place_can).
    #[arg(long)]
    behavior: String,
    /// Execute the sequence automatically. Headless runs always do.
    #[arg(long)]
    auto: bool,
    /// Serve the session over WebSocket instead of running headless.
    /// Port defaults to $BEHAVIOR_FORGE_PORT, then 8765.
    #[arg(long, value_name = "PORT")]
    serve: Option<Option<u16>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulated seconds per wall second; 0 runs as fast as possible.
    /// Defaults to 0 headless and 1 when serving.
    #[arg(long, value_name = "F")]
    realtime_factor: Option<f64>,
    /// Write the timing log CSV here.
    #[arg(long, value_name = "CSV")]
    log: Option<PathBuf>,
    /// Write a world snapshot line every 10 ticks here.
    #[arg(long, value_name = "PATH")]
    record: Option<PathBuf>,
}

fn serve(args: &Args, port: Option<u16>) -> anyhow::Result<u8> {
    let (_, scene) = resolve_scene(&args.scene)?;
    let (_, behavior) = resolve_behavior(&args.behavior)?;
    let mut session = match prepare(scene, &behavior, args.seed) {
        Ok(s) => s,
        Err(message) => {
            eprintln!("validation failed: {message}");
            return Ok(2);
        }
    };
    if args.auto {
        session.set_automatic(true);
    }
    let mut options = match port {
        Some(p) => ServeOptions::on_port(p),
        None => ServeOptions::from_env(),
    };
    options.realtime_factor = args.realtime_factor.unwrap_or(1.0);
    let core = ServerCore::new(session, Rates::default());
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(behavior_forge_protocol::serve(core, options))?;
    Ok(0)
}

fn headless(args: &Args) -> anyhow::Result<u8> {
    let (scene_name, scene) = resolve_scene(&args.scene)?;
    let (behavior_name, behavior) = resolve_behavior(&args.behavior)?;
    let options = RunOptions {
        seed: args.seed,
        realtime_factor: args.realtime_factor.unwrap_or(0.0),
        record: args.record.clone(),
    };
    let report = run_scenario(&scene_name, scene, &behavior_name, &behavior, &options)?;
    print!("{}", report.log.table());
    eprintln!("{}", report.outcome.summary());
    if let Some(path) = &args.log {
        report.log.write(path)?;
    }
    Ok(report.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let result = match args.serve {
        Some(port) => serve(&args, port),
        None => headless(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<behavior_forge_cli::CliError>()
                .map(|c| c.exit_code())
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
