use std::io::Write;
use std::net::SocketAddr;
use std::process::ExitCode;

use clap::Parser;

use winprob_cli::cli::{Cli, Command, ServeArgs};
use winprob_cli::commands;
use winprob_cli::config::{pick, AppConfig, DEFAULT_PORT};
use winprob_cli::error::CliError;
use winprob_cli::server;

fn serve(args: ServeArgs, cfg: &AppConfig) -> Result<(), CliError> {
    let path = pick(args.model, &cfg.model, "model")?;
    let model = winprob::models::load_model(&path).map_err(|e| {
        let mut err = CliError::from(e);
        err.path.get_or_insert_with(|| path.display().to_string());
        err
    })?;
    let port = args.port.or(cfg.port).unwrap_or(DEFAULT_PORT);
    let addr: SocketAddr = format!("{}:{port}", args.host)
        .parse()
        .map_err(|e| CliError::usage(format!("--host {:?}: {e}", args.host)))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::internal(e.to_string()))?;
    rt.block_on(server::serve(model, addr))
        .map_err(|e| CliError::internal(format!("server on {addr}: {e}")))
}

fn run(cli: Cli) -> Result<(Option<String>, ExitCode), CliError> {
    let cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    let out = match cli.command {
        Command::Train(a) => commands::train(a, &cfg)?,
        Command::Eval(a) => commands::eval(a, &cfg)?,
        Command::Ratings(c) => commands::ratings(c)?,
        Command::Timeline(a) => commands::timeline(a, &cfg)?,
        Command::Predict(a) => commands::predict(a, &cfg, std::io::stdin().lock())?,
        Command::Synth(a) => commands::synth(a)?,
        Command::Selftest(a) => {
            let (report, passed) = commands::selftest(a.seed)?;
            let code = if passed { ExitCode::SUCCESS } else { ExitCode::from(1) };
            return Ok((Some(report), code));
        }
        Command::Serve(a) => {
            serve(a, &cfg)?;
            return Ok((None, ExitCode::SUCCESS));
        }
    };
    Ok((Some(out), ExitCode::SUCCESS))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok((out, code)) => {
            if let Some(text) = out {
                let mut stdout = std::io::stdout().lock();
                let newline = if text.ends_with('\n') { "" } else { "\n" };
                // a closed pipe (e.g. `| head`) is not an error worth reporting
                let _ = write!(stdout, "{text}{newline}").and_then(|_| stdout.flush());
            }
            code
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
