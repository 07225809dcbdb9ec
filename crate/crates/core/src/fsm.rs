//! Five-state service segmentation.
//!
//! Idle -> Ready once the shuttle hand and racket middle sit on their guidance
//! targets. Ready -> BackwardSwing when the racket top keeps moving backward
//! faster than `v_min`; any other sustained motion drops back to Idle.
//! BackwardSwing -> ForwardSwing when the racket-middle to shuttle-hand
//! distance starts falling, ForwardSwing -> Contact when it starts rising
//! again, and Contact -> Idle after the dwell time. Trends must hold for
//! `trend_frames` consecutive frames; the keyframe is the last frame before
//! the run.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feedback::{body_axes, ready_targets, GuidanceConfig};
use crate::kinetics::{sample, summarize_swing, KineticSample, Keyframes, ServiceSummary};
use crate::mocap::{Recording, RelabelError, SkeletonFrame, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmConfig {
    /// Euclidean distance to each ready target that counts as on target (m).
    pub ready_tolerance_m: f64,
    pub v_min_mps: f64,
    pub trend_frames: usize,
    pub dwell_s: f64,
    /// Frames kept before the backswing start in each record.
    pub preroll_frames: usize,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            ready_tolerance_m: 0.05,
            v_min_mps: 0.3,
            trend_frames: 3,
            dwell_s: 2.0,
            preroll_frames: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid state machine configuration: {0}")]
pub struct FsmConfigError(pub String);

impl FsmConfig {
    pub fn validate(&self) -> Result<(), FsmConfigError> {
        if !(self.ready_tolerance_m > 0.0 && self.v_min_mps > 0.0 && self.dwell_s >= 0.0) {
            return Err(FsmConfigError(
                "tolerance and v_min must be positive, dwell non-negative".into(),
            ));
        }
        if self.trend_frames == 0 {
            return Err(FsmConfigError("trend_frames must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceState {
    Idle,
    Ready,
    BackwardSwing,
    ForwardSwing,
    Contact,
}

impl ServiceState {
    pub fn in_swing(self) -> bool {
        matches!(self, ServiceState::BackwardSwing | ServiceState::ForwardSwing)
    }
}

impl fmt::Display for ServiceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServiceState::Idle => "idle",
            ServiceState::Ready => "ready",
            ServiceState::BackwardSwing => "backward_swing",
            ServiceState::ForwardSwing => "forward_swing",
            ServiceState::Contact => "contact",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServeOutcome {
    Completed {
        summary: ServiceSummary,
        /// Samples over [backswing start, contact].
        samples: Vec<KineticSample>,
    },
    /// A swing frame lost a required marker.
    LostTracking { frame: usize },
    /// All markers tracked but the kinetic variables could not be computed.
    Rejected { reason: String },
}

/// One segmented serve. Keyframes index into `frames`; `first_frame` is the
/// stream index of `frames[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRecord {
    pub first_frame: usize,
    pub frames: Vec<SkeletonFrame>,
    pub backswing_start: usize,
    pub forward_start: Option<usize>,
    pub contact: Option<usize>,
    pub outcome: ServeOutcome,
}

impl ServiceRecord {
    pub fn keyframes(&self) -> Option<Keyframes> {
        Some(Keyframes {
            backswing_start: self.backswing_start,
            forward_start: self.forward_start?,
            contact: self.contact?,
        })
    }

    /// Keyframes as stream frame indices.
    pub fn absolute_keyframes(&self) -> Option<Keyframes> {
        self.keyframes().map(|k| Keyframes {
            backswing_start: k.backswing_start + self.first_frame,
            forward_start: k.forward_start + self.first_frame,
            contact: k.contact + self.first_frame,
        })
    }

    pub fn summary(&self) -> Option<&ServiceSummary> {
        match &self.outcome {
            ServeOutcome::Completed { summary, .. } => Some(summary),
            _ => None,
        }
    }

    pub fn samples(&self) -> &[KineticSample] {
        match &self.outcome {
            ServeOutcome::Completed { samples, .. } => samples,
            _ => &[],
        }
    }

    pub fn lost_tracking(&self) -> bool {
        matches!(self.outcome, ServeOutcome::LostTracking { .. })
    }

    pub fn contact_time(&self) -> Option<f64> {
        self.contact.map(|k| self.frames[k].timestamp)
    }

    /// Racket-middle to shuttle-hand distance per frame.
    pub fn distances(&self) -> Vec<f64> {
        self.frames.iter().map(racket_shuttle_distance).collect()
    }
}

pub fn racket_shuttle_distance(frame: &SkeletonFrame) -> f64 {
    (frame.racket_middle - frame.shuttle_hand).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FsmEvent {
    Transition {
        from: ServiceState,
        to: ServiceState,
        frame: usize,
        timestamp: f64,
    },
    ServeCompleted(Box<ServiceRecord>),
    ServeAborted(Box<ServiceRecord>),
}

#[derive(Debug, Clone)]
struct Swing {
    first_frame: usize,
    frames: Vec<SkeletonFrame>,
    back: usize,
    fwd: Option<usize>,
}

/// Online state machine; feed frames in timestamp order with [`step`].
///
/// [`step`]: ServiceFsm::step
#[derive(Debug, Clone)]
pub struct ServiceFsm {
    cfg: FsmConfig,
    guidance: GuidanceConfig,
    state: ServiceState,
    next_index: usize,
    history: VecDeque<SkeletonFrame>,
    backward: Vec3,
    back_run: usize,
    other_run: usize,
    trend_run: usize,
    last_distance: f64,
    contact_time: f64,
    swing: Option<Swing>,
}

impl ServiceFsm {
    pub fn new(cfg: FsmConfig, guidance: GuidanceConfig) -> Self {
        Self {
            cfg,
            guidance,
            state: ServiceState::Idle,
            next_index: 0,
            history: VecDeque::new(),
            backward: Vec3::zeros(),
            back_run: 0,
            other_run: 0,
            trend_run: 0,
            last_distance: f64::NAN,
            contact_time: f64::NAN,
            swing: None,
        }
    }

    pub fn state(&self) -> ServiceState {
        self.state
    }

    pub fn config(&self) -> &FsmConfig {
        &self.cfg
    }

    /// Frames consumed so far.
    pub fn frames_seen(&self) -> usize {
        self.next_index
    }

    fn on_targets(&self, frame: &SkeletonFrame) -> bool {
        match ready_targets(frame, &self.guidance) {
            Ok(t) => {
                (frame.shuttle_hand - t.shuttle_target).norm() <= self.cfg.ready_tolerance_m
                    && (frame.racket_middle - t.racket_target).norm() <= self.cfg.ready_tolerance_m
            }
            Err(_) => false,
        }
    }

    fn go(&mut self, to: ServiceState, index: usize, timestamp: f64, events: &mut Vec<FsmEvent>) {
        events.push(FsmEvent::Transition {
            from: self.state,
            to,
            frame: index,
            timestamp,
        });
        self.state = to;
        self.back_run = 0;
        self.other_run = 0;
        self.trend_run = 0;
    }

    pub fn step(&mut self, frame: &SkeletonFrame) -> Vec<FsmEvent> {
        let index = self.next_index;
        self.next_index += 1;
        let previous = self.history.back().copied();
        self.history.push_back(*frame);
        while self.history.len() > self.cfg.preroll_frames + self.cfg.trend_frames + 1 {
            self.history.pop_front();
        }

        let mut events = Vec::new();
        let t = frame.timestamp;
        match self.state {
            ServiceState::Idle => {
                if frame.complete() && self.on_targets(frame) {
                    if let Ok((forward, _)) = body_axes(frame) {
                        self.backward = -forward;
                        self.go(ServiceState::Ready, index, t, &mut events);
                    }
                }
            }
            ServiceState::Ready => {
                if !frame.complete() {
                    self.go(ServiceState::Idle, index, t, &mut events);
                    return events;
                }
                let Some(prev) = previous.filter(|p| p.complete()) else {
                    return events;
                };
                let dt = t - prev.timestamp;
                let velocity = (frame.racket_top - prev.racket_top) / dt;
                if velocity.dot(&self.backward) > self.cfg.v_min_mps {
                    self.back_run += 1;
                    self.other_run = 0;
                } else if velocity.norm() > self.cfg.v_min_mps {
                    self.other_run += 1;
                    self.back_run = 0;
                } else {
                    self.back_run = 0;
                    self.other_run = 0;
                }
                if self.back_run >= self.cfg.trend_frames {
                    let back = index - self.cfg.trend_frames;
                    let first = back.saturating_sub(self.cfg.preroll_frames);
                    let skip = self.history.len() - (index + 1 - first);
                    self.swing = Some(Swing {
                        first_frame: first,
                        frames: self.history.iter().skip(skip).copied().collect(),
                        back: back - first,
                        fwd: None,
                    });
                    self.last_distance = racket_shuttle_distance(frame);
                    self.go(ServiceState::BackwardSwing, index, t, &mut events);
                } else if self.other_run >= self.cfg.trend_frames {
                    self.go(ServiceState::Idle, index, t, &mut events);
                }
            }
            ServiceState::BackwardSwing | ServiceState::ForwardSwing => {
                let Some(mut swing) = self.swing.take() else {
                    self.go(ServiceState::Idle, index, t, &mut events);
                    return events;
                };
                swing.frames.push(*frame);
                if !frame.complete() {
                    let record = ServiceRecord {
                        first_frame: swing.first_frame,
                        backswing_start: swing.back,
                        forward_start: swing.fwd,
                        contact: None,
                        outcome: ServeOutcome::LostTracking {
                            frame: swing.frames.len() - 1,
                        },
                        frames: swing.frames,
                    };
                    self.go(ServiceState::Idle, index, t, &mut events);
                    events.push(FsmEvent::ServeAborted(Box::new(record)));
                    return events;
                }
                let d = racket_shuttle_distance(frame);
                let wanted = if self.state == ServiceState::BackwardSwing {
                    d < self.last_distance
                } else {
                    d > self.last_distance
                };
                self.trend_run = if wanted { self.trend_run + 1 } else { 0 };
                self.last_distance = d;
                if self.trend_run < self.cfg.trend_frames {
                    self.swing = Some(swing);
                    return events;
                }
                let key = swing.frames.len() - 1 - self.cfg.trend_frames;
                if self.state == ServiceState::BackwardSwing {
                    swing.fwd = Some(key);
                    self.swing = Some(swing);
                    self.go(ServiceState::ForwardSwing, index, t, &mut events);
                } else {
                    let record = finish(swing, key);
                    self.contact_time = record.frames[key].timestamp;
                    self.go(ServiceState::Contact, index, t, &mut events);
                    events.push(FsmEvent::ServeCompleted(Box::new(record)));
                }
            }
            ServiceState::Contact => {
                if t - self.contact_time >= self.cfg.dwell_s {
                    self.go(ServiceState::Idle, index, t, &mut events);
                }
            }
        }
        events
    }
}

fn finish(swing: Swing, contact: usize) -> ServiceRecord {
    let fwd = swing.fwd.expect("forward start set before contact");
    let keyframes = Keyframes {
        backswing_start: swing.back,
        forward_start: fwd,
        contact,
    };
    let samples: Result<Vec<KineticSample>, _> = (swing.back..=contact)
        .map(|k| sample(&swing.frames, k))
        .collect();
    let outcome = samples
        .and_then(|samples| {
            let summary = summarize_swing(&samples, keyframes.shifted_down(swing.back))?;
            Ok(ServeOutcome::Completed { summary, samples })
        })
        .unwrap_or_else(|e| ServeOutcome::Rejected {
            reason: e.to_string(),
        });
    ServiceRecord {
        first_frame: swing.first_frame,
        frames: swing.frames,
        backswing_start: swing.back,
        forward_start: Some(fwd),
        contact: Some(contact),
        outcome,
    }
}

/// Offline segmentation: the online machine run over every frame, keeping the
/// serve records in order.
pub fn segment_frames(
    frames: &[SkeletonFrame],
    cfg: FsmConfig,
    guidance: GuidanceConfig,
) -> Vec<ServiceRecord> {
    let mut fsm = ServiceFsm::new(cfg, guidance);
    let mut out = Vec::new();
    for frame in frames {
        for event in fsm.step(frame) {
            match event {
                FsmEvent::ServeCompleted(r) | FsmEvent::ServeAborted(r) => out.push(*r),
                FsmEvent::Transition { .. } => {}
            }
        }
    }
    out
}

pub fn segment_recording(
    rec: &Recording,
    cfg: FsmConfig,
    guidance: GuidanceConfig,
) -> Result<Vec<ServiceRecord>, RelabelError> {
    Ok(segment_frames(&rec.skeleton_frames()?, cfg, guidance))
}
