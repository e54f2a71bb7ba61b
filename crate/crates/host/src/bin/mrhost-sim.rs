use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mrhost::config::read_json;
use mrhost::live::run_live;
use mrhost_core::sim::SimConfig;
use mrhost_core::SceneConfig;

/// Streams a simulated headset fleet to a running mrhost server.
#[derive(Parser)]
#[command(name = "mrhost-sim", version)]
struct Args {
    /// Telemetry address of the server.
    #[arg(long, default_value = "127.0.0.1:7401")]
    server: String,
    /// Scene config (JSON); the built-in hall when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Simulator config (JSON); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulated seconds.
    #[arg(long, default_value_t = 120.0)]
    duration: f64,
    /// Playback speed multiplier.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's visitor count.
    #[arg(long)]
    visitors: Option<usize>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    mrhost::init_logging();
    let loaded = (|| {
        let scene: SceneConfig = args.scene.as_deref().map(read_json).transpose()?.unwrap_or_default();
        let sim: SimConfig = args.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
        Ok::<_, mrhost::LoadError>((scene, sim))
    })();
    let (scene, mut sim) = match loaded {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    sim.seed = args.seed.unwrap_or(sim.seed);
    sim.n_visitors = args.visitors.unwrap_or(sim.n_visitors);

    let run = run_live(&args.server, &scene, &sim, args.duration, args.speed);
    tokio::select! {
        result = run => match result {
            Ok(report) => {
                eprintln!(
                    "sent {} messages from {} devices ({} reconnects)",
                    report.messages_sent, report.devices, report.reconnects
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        _ = tokio::signal::ctrl_c() => {
            eprintln!("interrupted");
            ExitCode::SUCCESS
        }
    }
}
