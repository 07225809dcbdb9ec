//! Per-frame session pipeline and the stream message schema.
//!
//! [`SessionRunner`] owns one state machine and turns each skeleton frame into
//! the messages a trainer display consumes. Guidance is only sent while the
//! trainee is idle or holding the ready pose; feedback for a serve follows its
//! contact state change.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytics::{label_trial, session_summary, SessionStats, TrialLabel, Trial};
use crate::config::EngineConfig;
use crate::feedback::{halo_state, judge_shot, ready_targets, swing_track, FeedbackReport, SwingTrackSpec};
use crate::fsm::{segment_frames, FsmEvent, ServiceFsm, ServiceRecord, ServiceState};
use crate::kinetics::{Keyframes, ServiceSummary};
use crate::mocap::{Joint, SkeletonFrame};
use crate::model::{classify_pattern_with, ExpertModel, Pattern};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Frame,
    StateChange,
    Guidance,
    Feedback,
    SessionStats,
    /// Sent to a client whose queue overflowed; payload counts dropped messages.
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMessage {
    pub v: u32,
    pub seq: u64,
    pub kind: MessageKind,
    pub payload: Value,
}

impl StreamMessage {
    pub fn new(seq: u64, kind: MessageKind, payload: Value) -> Self {
        Self {
            v: SCHEMA_VERSION,
            seq,
            kind,
            payload,
        }
    }

    pub fn gap(seq: u64, dropped: u64) -> Self {
        Self::new(seq, MessageKind::Gap, json!({ "dropped": dropped }))
    }

    /// One NDJSON line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ServeId {
    pub session: String,
    /// 1-based, in order of backswing starts.
    pub index: usize,
}

/// Everything the engine concludes about one segmented serve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeEvaluation {
    pub serve: ServeId,
    pub label: TrialLabel,
    /// Stream frame indices.
    pub keyframes: Option<Keyframes>,
    pub contact_time: Option<f64>,
    pub pattern: Option<Pattern>,
    pub summary: Option<ServiceSummary>,
    pub report: Option<FeedbackReport>,
    /// Why no report was produced for a serve that reached contact.
    pub error: Option<String>,
}

impl ServeEvaluation {
    pub fn trial(&self) -> Trial {
        Trial {
            index: self.serve.index - 1,
            label: self.label,
            contact_time: self.contact_time,
            summary: self.summary.clone(),
        }
    }
}

pub fn evaluate_serve(
    record: &ServiceRecord,
    serve: ServeId,
    model: &ExpertModel,
    cfg: &EngineConfig,
) -> ServeEvaluation {
    let label = label_trial(record, &cfg.jitter);
    let summary = record.summary().cloned();
    let (report, error) = match &summary {
        Some(s) => match judge_shot(s, model) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => match &record.outcome {
            crate::fsm::ServeOutcome::Rejected { reason } => (None, Some(reason.clone())),
            _ => (None, None),
        },
    };
    ServeEvaluation {
        serve,
        label,
        keyframes: record.absolute_keyframes(),
        contact_time: record.contact_time(),
        pattern: summary
            .as_ref()
            .and_then(|s| classify_pattern_with(s.wrist_change_deg, s.elbow_change_deg, cfg.session.pattern_ratio).ok()),
        summary,
        report,
        error,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatsPayload {
    pub session: String,
    pub serves: usize,
    pub valid: usize,
    pub jitter: usize,
    pub lost_tracking: usize,
    /// Valid trials behind `stats`: the configured count, or all valid trials
    /// when fewer.
    pub n: usize,
    pub stats: Option<SessionStats>,
}

pub fn session_stats(session: &str, evaluations: &[ServeEvaluation], valid_trials: usize) -> SessionStatsPayload {
    let trials: Vec<Trial> = evaluations.iter().map(ServeEvaluation::trial).collect();
    let count = |l: TrialLabel| trials.iter().filter(|t| t.label == l).count();
    let valid = trials.iter().filter(|t| t.valid_summary().is_some()).count();
    let n = valid.min(valid_trials);
    SessionStatsPayload {
        session: session.to_string(),
        serves: trials.len(),
        valid: count(TrialLabel::Valid),
        jitter: count(TrialLabel::Jitter),
        lost_tracking: count(TrialLabel::LostTracking),
        n,
        stats: (n > 0).then(|| session_summary(&trials, n).expect("n valid trials exist")),
    }
}

/// Offline counterpart of [`SessionRunner`]: same segmentation, labels and
/// judgments.
pub fn evaluate_frames(
    session: &str,
    frames: &[SkeletonFrame],
    model: &ExpertModel,
    cfg: &EngineConfig,
) -> Vec<ServeEvaluation> {
    segment_frames(frames, cfg.fsm, cfg.guidance)
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let id = ServeId {
                session: session.to_string(),
                index: i + 1,
            };
            evaluate_serve(r, id, model, cfg)
        })
        .collect()
}

fn frame_payload(index: usize, state: ServiceState, frame: &SkeletonFrame) -> Value {
    let points: BTreeMap<&'static str, Option<[f64; 3]>> = Joint::ALL
        .iter()
        .map(|&j| {
            let p = frame.point(j);
            (joint_name(j), frame.is_valid(j).then(|| [p.x, p.y, p.z]))
        })
        .collect();
    json!({ "frame": index, "t": frame.timestamp, "state": state, "points": points })
}

fn joint_name(j: Joint) -> &'static str {
    match j {
        Joint::Hand => "hand",
        Joint::Wrist => "wrist",
        Joint::Elbow => "elbow",
        Joint::Shoulder => "shoulder",
        Joint::ShuttleHand => "shuttle_hand",
        Joint::ShuttleShoulder => "shuttle_shoulder",
        Joint::RacketTop => "racket_top",
        Joint::RacketBottom => "racket_bottom",
        Joint::RacketSide => "racket_side",
        Joint::RacketMiddle => "racket_middle",
    }
}

pub struct SessionRunner {
    session: String,
    model: ExpertModel,
    cfg: EngineConfig,
    fsm: ServiceFsm,
    seq: u64,
    frames: usize,
    serves_started: usize,
    current: Option<ServeId>,
    track: Option<SwingTrackSpec>,
    evaluations: Vec<ServeEvaluation>,
}

impl SessionRunner {
    pub fn new(session: impl Into<String>, model: ExpertModel, cfg: EngineConfig) -> Self {
        Self {
            session: session.into(),
            fsm: ServiceFsm::new(cfg.fsm, cfg.guidance),
            model,
            cfg,
            seq: 0,
            frames: 0,
            serves_started: 0,
            current: None,
            track: None,
            evaluations: Vec::new(),
        }
    }

    pub fn model(&self) -> &ExpertModel {
        &self.model
    }

    pub fn state(&self) -> ServiceState {
        self.fsm.state()
    }

    pub fn evaluations(&self) -> &[ServeEvaluation] {
        &self.evaluations
    }

    fn message(&mut self, kind: MessageKind, payload: Value) -> StreamMessage {
        self.seq += 1;
        StreamMessage::new(self.seq, kind, payload)
    }

    pub fn push(&mut self, frame: &SkeletonFrame) -> Vec<StreamMessage> {
        let index = self.frames;
        self.frames += 1;
        let events = self.fsm.step(frame);
        let state = self.fsm.state();
        let mut out = vec![self.message(MessageKind::Frame, frame_payload(index, state, frame))];

        for event in events {
            match event {
                FsmEvent::Transition { from, to, frame: at, timestamp } => {
                    if to == ServiceState::BackwardSwing {
                        self.serves_started += 1;
                        self.current = Some(ServeId {
                            session: self.session.clone(),
                            index: self.serves_started,
                        });
                    }
                    if to == ServiceState::Ready {
                        self.track = swing_track(frame, &self.model, &self.cfg.guidance).ok();
                    }
                    let payload = json!({
                        "serve": self.current,
                        "from": from,
                        "to": to,
                        "frame": at,
                        "t": timestamp,
                    });
                    out.push(self.message(MessageKind::StateChange, payload));
                    if to == ServiceState::Idle && from == ServiceState::Contact {
                        self.current = None;
                    }
                }
                FsmEvent::ServeCompleted(record) => {
                    let eval = self.evaluate(&record);
                    let payload = serde_json::to_value(&eval).expect("evaluation serializes");
                    out.push(self.message(MessageKind::Feedback, payload));
                    self.evaluations.push(eval);
                }
                FsmEvent::ServeAborted(record) => {
                    let eval = self.evaluate(&record);
                    self.evaluations.push(eval);
                    self.current = None;
                }
            }
        }

        if matches!(state, ServiceState::Idle | ServiceState::Ready) {
            if let Some(payload) = self.guidance(state, index, frame) {
                out.push(self.message(MessageKind::Guidance, payload));
            }
        }
        out
    }

    fn evaluate(&self, record: &ServiceRecord) -> ServeEvaluation {
        let id = self.current.clone().unwrap_or_else(|| ServeId {
            session: self.session.clone(),
            index: self.serves_started,
        });
        evaluate_serve(record, id, &self.model, &self.cfg)
    }

    fn guidance(&self, state: ServiceState, index: usize, frame: &SkeletonFrame) -> Option<Value> {
        if !frame.complete() {
            return None;
        }
        let targets = ready_targets(frame, &self.cfg.guidance).ok()?;
        let axis = targets.sagittal_axis;
        let bands = self.cfg.guidance.halo_bands;
        let offset = |actual: crate::mocap::Vec3, target: crate::mocap::Vec3| (actual - target).dot(&axis);
        Some(json!({
            "frame": index,
            "state": state,
            "targets": targets,
            "halo": {
                "shuttle": halo_state(frame.shuttle_hand, targets.shuttle_target, axis, bands),
                "racket": halo_state(frame.racket_middle, targets.racket_target, axis, bands),
            },
            "offsets": {
                "shuttle": offset(frame.shuttle_hand, targets.shuttle_target),
                "racket": offset(frame.racket_middle, targets.racket_target),
            },
            "swing_track": if state == ServiceState::Ready { self.track } else { None },
        }))
    }

    /// Closing session statistics message.
    pub fn finish(&mut self) -> StreamMessage {
        let stats = self.stats();
        self.message(
            MessageKind::SessionStats,
            serde_json::to_value(stats).expect("stats serialize"),
        )
    }

    pub fn stats(&self) -> SessionStatsPayload {
        session_stats(&self.session, &self.evaluations, self.cfg.session.valid_trials)
    }
}

/// Runs a whole frame sequence through a fresh runner.
pub fn run_frames(
    session: &str,
    frames: &[SkeletonFrame],
    model: &ExpertModel,
    cfg: &EngineConfig,
) -> (Vec<StreamMessage>, Vec<ServeEvaluation>) {
    let mut runner = SessionRunner::new(session, *model, cfg.clone());
    let mut messages: Vec<StreamMessage> = frames.iter().flat_map(|f| runner.push(f)).collect();
    messages.push(runner.finish());
    (messages, runner.evaluations.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mocap::synth::{synthesize_session, ServeParams, SessionParams};
    use crate::model::builtin_model;

    fn frames(n: usize) -> Vec<SkeletonFrame> {
        let serves = vec![ServeParams::default(); n];
        synthesize_session(&SessionParams::default(), &serves)
            .unwrap()
            .skeleton_frames()
            .unwrap()
    }

    fn kinds(messages: &[StreamMessage], kind: MessageKind) -> Vec<&StreamMessage> {
        messages.iter().filter(|m| m.kind == kind).collect()
    }

    #[test]
    fn five_serves_give_five_feedback_messages() {
        let (messages, evals) = run_frames("s1", &frames(5), &builtin_model(Pattern::WristOnly), &EngineConfig::default());
        assert_eq!(kinds(&messages, MessageKind::Feedback).len(), 5);
        assert_eq!(evals.len(), 5);
        assert!(evals.iter().all(|e| e.report.as_ref().is_some_and(|r| r.all_passed())));
        let last = messages.last().unwrap();
        assert_eq!(last.kind, MessageKind::SessionStats);
        assert_eq!(last.payload["n"], 5);
    }

    #[test]
    fn empty_input_gives_only_session_stats() {
        let (messages, _) = run_frames("s1", &[], &builtin_model(Pattern::WristOnly), &EngineConfig::default());
        assert_eq!(messages.len(), 1);
        assert_eq!(messages[0].kind, MessageKind::SessionStats);
        assert_eq!(messages[0].payload["n"], 0);
        assert!(messages[0].payload["stats"].is_null());
    }

    #[test]
    fn seq_increases_and_feedback_follows_its_contact() {
        let (messages, _) = run_frames("s1", &frames(3), &builtin_model(Pattern::WristOnly), &EngineConfig::default());
        assert!(messages.windows(2).all(|w| w[1].seq == w[0].seq + 1));
        let mut contact_for: Option<Value> = None;
        for m in &messages {
            if m.kind == MessageKind::StateChange && m.payload["to"] == "contact" {
                contact_for = Some(m.payload["serve"].clone());
            }
            if m.kind == MessageKind::Feedback {
                assert_eq!(contact_for.take(), Some(m.payload["serve"].clone()));
            }
        }
    }

    #[test]
    fn no_guidance_during_swing_or_contact() {
        let (messages, _) = run_frames("s1", &frames(2), &builtin_model(Pattern::WristOnly), &EngineConfig::default());
        for m in kinds(&messages, MessageKind::Guidance) {
            let state = m.payload["state"].as_str().unwrap();
            assert!(state == "idle" || state == "ready", "{state}");
        }
        let ready = kinds(&messages, MessageKind::Guidance)
            .into_iter()
            .find(|m| m.payload["state"] == "ready")
            .unwrap();
        assert!(ready.payload["swing_track"]["angular_speed"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn live_and_batch_agree() {
        let f = frames(4);
        let model = builtin_model(Pattern::WristOnly);
        let cfg = EngineConfig::default();
        let (_, live) = run_frames("s1", &f, &model, &cfg);
        assert_eq!(live, evaluate_frames("s1", &f, &model, &cfg));
    }

    #[test]
    fn elbow_wrist_model_reports_why_it_cannot_judge() {
        let (_, evals) = run_frames("s1", &frames(1), &builtin_model(Pattern::ElbowWrist), &EngineConfig::default());
        assert!(evals[0].report.is_none());
        assert!(evals[0].error.is_some());
    }
}
