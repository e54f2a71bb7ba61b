use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mrhost::{LoadError, Server, ServerConfig};

#[derive(Parser)]
#[command(name = "mrhost", version, about = "Telemetry and visualization server for co-located multiuser MR sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the server until interrupted.
    Serve {
        /// Server config file (JSON). Command-line flags take precedence.
        #[arg(long, env = "MRHOST_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        ingest_port: Option<u16>,
        #[arg(long)]
        dash_port: Option<u16>,
        #[arg(long)]
        tick_hz: Option<f64>,
        /// Record kept trajectory samples and session events to DIR.
        #[arg(long, value_name = "DIR")]
        record: Option<PathBuf>,
        /// Serve the built dashboard from DIR at `/`.
        #[arg(long, value_name = "DIR")]
        static_dir: Option<PathBuf>,
    },
    /// Validate a config file and exit.
    CheckConfig { file: PathBuf },
}

fn load(path: Option<&Path>) -> Result<ServerConfig, LoadError> {
    match path {
        Some(p) => mrhost::config::read_json(p),
        None => Ok(ServerConfig::default()),
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::CheckConfig { file } => match ServerConfig::load(&file) {
            Ok(_) => {
                println!("{}: ok", file.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Serve { config, ingest_port, dash_port, tick_hz, record, static_dir } => {
            mrhost::init_logging();
            let mut cfg = match load(config.as_deref()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            cfg.ingest_port = ingest_port.unwrap_or(cfg.ingest_port);
            cfg.dash_port = dash_port.unwrap_or(cfg.dash_port);
            cfg.tick_hz = tick_hz.unwrap_or(cfg.tick_hz);
            cfg.record_dir = record.or(cfg.record_dir);
            cfg.static_dir = static_dir.or(cfg.static_dir);
            let server = match Server::start(cfg).await {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            // Machine-readable bound addresses, useful with port 0.
            println!("ingest {}", server.ingest_addr());
            println!("dashboard {}", server.dash_addr());
            let _ = tokio::signal::ctrl_c().await;
            server.shutdown().await;
            ExitCode::SUCCESS
        }
    }
}
