//! Subcommand implementations. Each returns its output instead of printing so
//! the binary and the tests share one code path.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use shortserve_core::config::EngineConfig;
use shortserve_core::feedback::{JudgedValue, Status};
use shortserve_core::mocap::synth::{synthesize_session, ServeParams, SessionParams};
use shortserve_core::mocap::{
    read_recording, relabel, replay as pace, write_recording, write_sidecar, Handedness, MarkerFrame,
    Recording, RecordingFormat, SinkRejected, SkeletonFrame,
};
use shortserve_core::model::{fit_model, ExpertModel, Pattern};
use shortserve_core::report::{AnalysisReport, SessionAnalysis};
use shortserve_core::session::{evaluate_frames, session_stats, ServeEvaluation, SessionRunner};
use shortserve_core::trajectory::{classify, read_observations, write_classified};
use tokio::net::TcpListener;

use crate::stream::{serve, StreamHub};

/// Config from an explicit path, else `BMS_CONFIG`, else defaults.
pub fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    let from_env = std::env::var_os("BMS_CONFIG").map(PathBuf::from);
    match path.map(Path::to_path_buf).or(from_env) {
        Some(p) => Ok(EngineConfig::load(&p)?),
        None => Ok(EngineConfig::default()),
    }
}

pub fn session_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn load_frames(path: &Path) -> Result<(Recording, Vec<SkeletonFrame>)> {
    let rec = read_recording(path).with_context(|| format!("{}", path.display()))?;
    let frames = rec
        .skeleton_frames()
        .with_context(|| format!("{}", path.display()))?;
    Ok((rec, frames))
}

pub fn analyze(paths: &[PathBuf], model: &ExpertModel, cfg: &EngineConfig) -> Result<AnalysisReport> {
    let mut sessions = Vec::new();
    for path in paths {
        let name = session_name(path);
        let (_, frames) = load_frames(path)?;
        let evaluations = evaluate_frames(&name, &frames, model, cfg);
        let stats = session_stats(&name, &evaluations, cfg.session.valid_trials);
        sessions.push(SessionAnalysis { name, evaluations, stats });
    }
    Ok(AnalysisReport::new(sessions))
}

/// Writes the report tables into `dir`.
pub fn write_report(report: &AnalysisReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
    for (name, text) in [
        ("trials.csv", report.trials_csv()),
        ("sessions.csv", report.sessions_csv()),
        ("pairwise.csv", report.pairwise_csv()),
        ("report.txt", report.text()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("{}", path.display()))?;
    }
    Ok(())
}

/// Fits a model on the valid serves of all recordings. Without an explicit
/// pattern the majority pattern of those serves is used.
pub fn fit(paths: &[PathBuf], pattern: Option<Pattern>, cfg: &EngineConfig) -> Result<ExpertModel> {
    let reference = shortserve_core::model::builtin_model(Pattern::WristOnly);
    let mut valid: Vec<ServeEvaluation> = Vec::new();
    for path in paths {
        let (_, frames) = load_frames(path)?;
        valid.extend(
            evaluate_frames(&session_name(path), &frames, &reference, cfg)
                .into_iter()
                .filter(|e| e.trial().valid_summary().is_some()),
        );
    }
    if valid.is_empty() {
        bail!("no valid serves found in {} recording(s)", paths.len());
    }
    let pattern = pattern.unwrap_or_else(|| {
        let elbow = valid.iter().filter(|e| e.pattern == Some(Pattern::ElbowWrist)).count();
        if 2 * elbow > valid.len() {
            Pattern::ElbowWrist
        } else {
            Pattern::WristOnly
        }
    });
    let summaries: Vec<_> = valid.into_iter().filter_map(|e| e.summary).collect();
    Ok(fit_model(&summaries, pattern)?)
}

fn judged_line(out: &mut String, name: &str, unit: &str, j: &JudgedValue, rule: &str) {
    let mark = match j.status {
        Status::Pass => "pass".to_string(),
        Status::Fail => format!("FAIL ({:?})", j.direction).to_lowercase(),
    };
    writeln!(
        out,
        "  {name:<9} {:>9.3} {unit:<4} target {:.3} ± {:.3} {rule:<6} {mark}",
        j.value, j.target_mean, j.target_sd
    )
    .unwrap();
}

pub fn format_judgments(evaluations: &[ServeEvaluation]) -> String {
    let mut out = String::new();
    let mut passed = 0;
    for e in evaluations {
        let when = e.contact_time.map(|t| format!(", contact t = {t:.3} s")).unwrap_or_default();
        writeln!(out, "serve {} ({}{when})", e.serve.index, e.label.as_str()).unwrap();
        match (&e.report, &e.error) {
            (Some(r), _) => {
                judged_line(&mut out, "pitch", "deg", &r.pitch, "±1 sd");
                judged_line(&mut out, "speed", "m/s", &r.speed, "±1 sd");
                let worst = r.height_trace.iter().map(|p| p.dh.abs()).fold(0.0, f64::max);
                writeln!(
                    out,
                    "  {:<9} {worst:>9.3} m    limit  {:.3}         {}",
                    "height",
                    r.height_threshold_m,
                    if r.height_passed() { "pass" } else { "FAIL" }
                )
                .unwrap();
                judged_line(&mut out, "wrist", "deg", &r.wrist, "min");
                judged_line(&mut out, "elbow", "deg", &r.elbow, "max");
                judged_line(&mut out, "shoulder", "deg", &r.shoulder, "max");
                if r.all_passed() {
                    passed += 1;
                }
            }
            (None, Some(err)) => writeln!(out, "  not judged: {err}").unwrap(),
            (None, None) => writeln!(out, "  not judged: tracking lost during the swing").unwrap(),
        }
    }
    writeln!(out, "all variables passed on {passed} of {} serve(s)", evaluations.len()).unwrap();
    out
}

pub fn judge(path: &Path, model: &ExpertModel, cfg: &EngineConfig) -> Result<Vec<ServeEvaluation>> {
    let (_, frames) = load_frames(path)?;
    Ok(evaluate_frames(&session_name(path), &frames, model, cfg))
}

pub fn classify_trajectory(path: &Path, cfg: &EngineConfig) -> Result<String> {
    let file = std::fs::File::open(path).with_context(|| format!("{}", path.display()))?;
    let observations = read_observations(file).with_context(|| format!("{}", path.display()))?;
    let shots = observations
        .iter()
        .map(|o| classify(o, &cfg.court, &cfg.camera))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    write_classified(&mut out, &shots)?;
    Ok(String::from_utf8(out).expect("csv output is utf-8"))
}

pub struct SynthOptions {
    pub serves: usize,
    pub handedness: Handedness,
    pub rate_hz: f64,
    pub model: ExpertModel,
}

/// Writes a synthesized session of serves at the model's means.
pub fn synth(out: &Path, opts: &SynthOptions, cfg: &EngineConfig) -> Result<()> {
    let format = RecordingFormat::from_path(out)
        .with_context(|| format!("{}: use a .csv or .jsonl extension", out.display()))?;
    let session = SessionParams {
        rate_hz: opts.rate_hz,
        handedness: opts.handedness,
        guidance: cfg.guidance,
        ..SessionParams::default()
    };
    let serves = vec![ServeParams::from_model(&opts.model); opts.serves];
    let rec = synthesize_session(&session, &serves)?;
    let file = std::fs::File::create(out).with_context(|| format!("{}", out.display()))?;
    write_recording(&rec, format, std::io::BufWriter::new(file))?;
    write_sidecar(&rec, out)?;
    Ok(())
}

pub struct ReplayOptions {
    pub speed: f64,
    /// Clients to wait for before the first frame.
    pub wait_clients: usize,
    pub wait_timeout: Duration,
    /// Time allowed for clients to drain after the last message.
    pub linger: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub frames: usize,
    pub messages: u64,
    pub serves: usize,
    pub evaluations: Vec<ServeEvaluation>,
}

/// Streams a recording through a session runner to every `/stream` client
/// on `listener`, then shuts the server down.
pub async fn replay(
    listener: TcpListener,
    rec: Recording,
    session: String,
    model: ExpertModel,
    cfg: EngineConfig,
    opts: ReplayOptions,
) -> Result<ReplayOutcome> {
    if !(opts.speed > 0.0 && opts.speed.is_finite()) {
        bail!("--speed must be a positive number");
    }
    let hub = StreamHub::new(model, cfg.stream.client_queue);
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, hub.clone(), async {
        let _ = stop_rx.await;
    }));

    let deadline = tokio::time::Instant::now() + opts.wait_timeout;
    while hub.clients() < opts.wait_clients {
        if tokio::time::Instant::now() >= deadline {
            bail!("only {} of {} client(s) connected in time", hub.clients(), opts.wait_clients);
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }

    let publisher = hub.clone();
    let outcome = tokio::task::spawn_blocking(move || -> Result<ReplayOutcome> {
        let mut runner = SessionRunner::new(session, model, cfg);
        let mut messages = 0u64;
        let status = {
            let mut sink = |frame: &MarkerFrame| {
                let skeleton = relabel(frame, rec.handedness).map_err(|e| SinkRejected(e.to_string()))?;
                for m in runner.push(&skeleton) {
                    messages += 1;
                    publisher.publish(m);
                }
                Ok(())
            };
            pace(&rec, opts.speed, &mut sink)
        };
        if let Some(e) = status.rejected {
            bail!("frame {}: {}", status.delivered, e.0);
        }
        publisher.publish(runner.finish());
        messages += 1;
        Ok(ReplayOutcome {
            frames: status.delivered,
            messages,
            serves: runner.evaluations().len(),
            evaluations: runner.evaluations().to_vec(),
        })
    })
    .await?;

    hub.close();
    let deadline = tokio::time::Instant::now() + opts.linger;
    while hub.clients() > 0 && tokio::time::Instant::now() < deadline {
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let _ = stop_tx.send(());
    let _ = tokio::time::timeout(Duration::from_secs(1), server).await;
    outcome
}
