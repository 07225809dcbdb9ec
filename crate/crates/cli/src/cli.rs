use std::path::PathBuf;
use std::time::Duration;

use anyhow::Result;
use clap::{Parser, Subcommand};
use shortserve_core::mocap::Handedness;
use shortserve_core::model::{builtin_model, ExpertModel, Pattern};

use crate::commands::{self, ReplayOptions, SynthOptions};
use crate::stream::bind;

#[derive(Debug, Parser)]
#[command(name = "shortserve", version, about = "Backhand short-service analysis and live feedback")]
pub struct Cli {
    /// Engine config (TOML).
    #[arg(long, global = true, env = "BMS_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment, label and judge recordings; print the session report.
    Analyze {
        #[arg(required = true)]
        recordings: Vec<PathBuf>,
        /// Built-in pattern name or model file.
        #[arg(long, default_value = "wrist_only")]
        model: String,
        /// Directory for trials.csv, sessions.csv, pairwise.csv and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit an expert model from the valid serves of recordings.
    Fit {
        #[arg(required = true)]
        recordings: Vec<PathBuf>,
        /// wrist_only or elbow_wrist; defaults to the majority pattern.
        #[arg(long)]
        pattern: Option<Pattern>,
        /// Write the model here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream a recording to `/stream` WebSocket clients.
    Replay {
        recording: PathBuf,
        /// Playback speed relative to real time.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Port to serve on; 0 picks a free one. Defaults to the config port.
        #[arg(long)]
        serve_port: Option<u16>,
        #[arg(long, default_value = "wrist_only")]
        model: String,
        /// Wait for this many clients before streaming.
        #[arg(long, default_value_t = 0)]
        wait_clients: usize,
        /// Seconds to wait for clients.
        #[arg(long, default_value_t = 30.0)]
        wait_timeout: f64,
        /// Seconds allowed for clients to drain at the end.
        #[arg(long, default_value_t = 2.0)]
        linger: f64,
    },
    /// Classify shuttle trajectory observations (CSV in, CSV out).
    ClassifyTrajectory { observations: PathBuf },
    /// Judge each serve of a recording against a model.
    Judge {
        recording: PathBuf,
        #[arg(long, default_value = "wrist_only")]
        model: String,
        /// Emit the evaluations as JSON lines.
        #[arg(long)]
        json: bool,
    },
    /// Write a synthesized session of serves at a model's means.
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        serves: usize,
        #[arg(long, default_value_t = 120.0)]
        rate: f64,
        #[arg(long)]
        left: bool,
        #[arg(long, default_value = "wrist_only")]
        model: String,
    },
}

fn model(arg: &str) -> Result<ExpertModel> {
    Ok(ExpertModel::resolve(arg)?)
}

fn secs(s: f64) -> Duration {
    Duration::from_secs_f64(s.max(0.0))
}

/// Runs one command and returns what it prints on stdout.
pub fn run(cli: Cli) -> Result<String> {
    let cfg = commands::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Analyze { recordings, model: m, out } => {
            let report = commands::analyze(&recordings, &model(&m)?, &cfg)?;
            if let Some(dir) = out {
                commands::write_report(&report, &dir)?;
            }
            Ok(report.text())
        }
        Command::Fit { recordings, pattern, out } => {
            let fitted = commands::fit(&recordings, pattern, &cfg)?;
            let text = fitted.to_toml();
            match out {
                Some(path) => {
                    std::fs::write(&path, &text)?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Replay {
            recording,
            speed,
            serve_port,
            model: m,
            wait_clients,
            wait_timeout,
            linger,
        } => {
            let model = model(&m)?;
            let (rec, _) = commands::load_frames(&recording)?;
            let session = commands::session_name(&recording);
            let runtime = tokio::runtime::Runtime::new()?;
            let outcome = runtime.block_on(async {
                let (listener, addr) = bind(&cfg.stream.bind, serve_port.unwrap_or(cfg.stream.port)).await?;
                eprintln!("streaming on ws://{addr}/stream");
                let opts = ReplayOptions {
                    speed,
                    wait_clients,
                    wait_timeout: secs(wait_timeout),
                    linger: secs(linger),
                };
                commands::replay(listener, rec, session, model, cfg, opts).await
            })?;
            Ok(format!(
                "replayed {} frames, {} serves, {} messages\n",
                outcome.frames, outcome.serves, outcome.messages
            ))
        }
        Command::ClassifyTrajectory { observations } => commands::classify_trajectory(&observations, &cfg),
        Command::Judge { recording, model: m, json } => {
            let evaluations = commands::judge(&recording, &model(&m)?, &cfg)?;
            if json {
                let mut out = String::new();
                for e in &evaluations {
                    out.push_str(&serde_json::to_string(e)?);
                    out.push('\n');
                }
                Ok(out)
            } else {
                Ok(commands::format_judgments(&evaluations))
            }
        }
        Command::Synth { out, serves, rate, left, model: m } => {
            let opts = SynthOptions {
                serves,
                handedness: if left { Handedness::Left } else { Handedness::Right },
                rate_hz: rate,
                model: model(&m)?,
            };
            commands::synth(&out, &opts, &cfg)?;
            Ok(String::new())
        }
    }
}

/// Default model used when none is named.
pub fn default_model() -> ExpertModel {
    builtin_model(Pattern::WristOnly)
}
