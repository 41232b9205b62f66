use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noughts::game::Player;
use noughts::harness::{
    cmd_evaluate, cmd_glyph_study, cmd_play, cmd_train, eval_table, glyph_study_text, load_policy, HarnessError, RunConfig,
};
use noughts_service::{serve, ServiceConfig};

#[derive(Parser)]
#[command(name = "noughts", version, about = "Train, evaluate and play noughts-and-crosses agents")]
#[command(after_help = concat!(
    "Every command accepts key=value settings and --config FILE (same format,\n",
    "one per line). Precedence: defaults < config file < command line.\n",
    "Run `noughts keys` for the full list with defaults.\n\n",
    "Exit codes: 0 success, 2 usage error, 3 data or model error."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes model.ncx, features.manifest, curve.csv, run.json
    Train(Settings),
    /// Evaluate saved models and print a results table
    Evaluate {
        /// Model files (in addition to model=...)
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        /// Print JSON instead of the table
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Leave-one-out and cross-noise study of the glyph classifier
    GlyphStudy {
        /// Print JSON instead of the confusion matrices
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Play a saved agent in the terminal
    Play {
        /// Your mark, x or o
        #[arg(long, default_value = "o")]
        mark: String,
        #[command(flatten)]
        settings: Settings,
    },
    /// Serve the HTTP play API
    Serve {
        /// Model files, at most one per variant (in addition to model=...)
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Append every transcript entry to this JSON-lines file
        #[arg(long)]
        transcript_log: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// List configuration keys and defaults
    Keys,
}

#[derive(clap::Args)]
struct Settings {
    /// Flat key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// key=value settings
    pairs: Vec<String>,
}

impl Settings {
    fn load(&self) -> Result<RunConfig, HarnessError> {
        let mut args: Vec<String> = Vec::new();
        if let Some(c) = &self.config {
            args.push("--config".into());
            args.push(c.display().to_string());
        }
        args.extend(self.pairs.iter().cloned());
        RunConfig::from_args(&args)
    }
}

fn with_model(config: &RunConfig, extra: &[PathBuf]) -> Vec<PathBuf> {
    config.model.iter().cloned().chain(extra.iter().cloned()).collect()
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train(s) => {
            let config = s.load()?;
            let t = cmd_train(&config)?;
            println!(
                "trained {} on {} for {} steps ({} games, {:.1} s); {} curve rows; model {}",
                config.agent.algorithm,
                config.variant,
                t.steps,
                t.games,
                t.seconds,
                t.curve_rows,
                t.model.display()
            );
        }
        Command::Evaluate { models, json, settings } => {
            let config = settings.load()?;
            let rows = cmd_evaluate(&config, &with_model(&config, &models))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows).map_err(|e| HarnessError::Data(e.to_string()))?);
            } else {
                print!("{}", eval_table(&rows));
            }
        }
        Command::GlyphStudy { json, settings } => {
            let report = cmd_glyph_study(&settings.load()?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Data(e.to_string()))?);
            } else {
                print!("{}", glyph_study_text(&report));
            }
        }
        Command::Play { mark, settings } => {
            let config = settings.load()?;
            let human: Player = mark.parse().map_err(|_| HarnessError::Usage(format!("mark must be x or o, not {mark:?}")))?;
            let stdin = io::stdin();
            cmd_play(&config, human, &mut stdin.lock(), &mut io::stdout())?;
        }
        Command::Serve {
            models,
            host,
            transcript_log,
            settings,
        } => {
            let config = settings.load()?;
            let paths = with_model(&config, &models);
            if paths.is_empty() {
                return Err(HarnessError::Usage("serve needs at least one model".into()));
            }
            let policies = paths.iter().map(|p| load_policy(p)).collect::<Result<Vec<_>, _>>()?;
            let mut service = ServiceConfig::new(policies);
            service.transcript_log = transcript_log;
            let addr: SocketAddr = format!("{host}:{}", config.port)
                .parse()
                .map_err(|_| HarnessError::Usage(format!("bad address {host}:{}", config.port)))?;
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving on http://{addr}");
            rt.block_on(serve(service, addr))?;
        }
        Command::Keys => print!("{}", RunConfig::help()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
