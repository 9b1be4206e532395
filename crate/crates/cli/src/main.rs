use std::fs;
use std::io::{self, IsTerminal};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use possdiag::{render, repl, service};
use possdiag_core::{parse_model, replay, Session};

#[derive(Parser)]
#[command(name = "possdiag", version, about = "Possibilistic fault isolation for component networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file.
    Check { model: PathBuf },
    /// Rank the hypotheses explaining an observation file.
    Diagnose {
        model: PathBuf,
        observations: PathBuf,
        /// Print the board as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Interactive probing loop.
    Session {
        model: PathBuf,
        observations: PathBuf,
        /// Write the journal here on exit.
        #[arg(long)]
        journal: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long)]
        models: PathBuf,
        /// Directory for session journals; sessions found there are restored.
        #[arg(long)]
        journals: Option<PathBuf>,
    },
    /// Rebuild a session from its journal and print the final board.
    Replay {
        journal: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn model_name(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string()
}

fn check(path: &Path) -> anyhow::Result<ExitCode> {
    let text = read(path)?;
    match parse_model(&text, &path.display().to_string()) {
        Ok(parsed) => {
            for v in &parsed.report.violations {
                eprintln!("{}", v);
            }
            if parsed.report.has_errors() {
                return Ok(ExitCode::FAILURE);
            }
            println!(
                "{}: {} components, {} links, {} levels",
                path.display(),
                parsed.model.components.len(),
                parsed.model.links.len(),
                parsed.model.scale.levels().len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(diags) => {
            for d in diags {
                eprintln!("{}", d);
            }
            Ok(ExitCode::FAILURE)
        }
    }
}

fn open_session(model: &Path, observations: &Path) -> anyhow::Result<Session> {
    let name = model_name(model);
    Ok(Session::create("cli", &name, &read(model)?, &read(observations)?)?)
}

async fn serve(listen: SocketAddr, models: &Path, journals: Option<PathBuf>) -> anyhow::Result<()> {
    let entries = service::load_models(models)?;
    if let Some(dir) = &journals {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let state = Arc::new(service::AppState::new(entries, journals));
    let restored = state.restore()?;
    let listener = tokio::net::TcpListener::bind(listen).await.with_context(|| format!("cannot listen on {}", listen))?;
    tracing::info!(%listen, restored, "serving");
    axum::serve(listener, service::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Check { model } => check(&model),
        Command::Diagnose { model, observations, json } => {
            let session = open_session(&model, &observations)?;
            let board = session.board();
            if json {
                println!("{}", serde_json::to_string_pretty(&board)?);
            } else {
                print!("{}", render::board(&board));
                println!();
                print!("{}", render::probes(&board.probes));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Session { model, observations, journal } => {
            let mut session = open_session(&model, &observations)?;
            if io::stdin().is_terminal() {
                eprintln!("possdiag session on {}", model.display());
            }
            repl::run(&mut session, io::stdin().lock(), io::stdout().lock())?;
            if let Some(path) = journal {
                fs::write(&path, session.journal_text()).with_context(|| format!("cannot write {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { listen, models, journals } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(listen, &models, journals))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { journal, json } => {
            let text = read(&journal)?;
            let session = match replay(&text) {
                Ok(s) => s,
                Err(e) => bail!("{}: {}", journal.display(), e),
            };
            let board = session.board();
            if json {
                println!("{}", serde_json::to_string_pretty(&board)?);
            } else {
                print!("{}", render::board(&board));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::FAILURE
        }
    }
}
