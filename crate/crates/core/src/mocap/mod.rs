//! Marker-frame recordings: the single entry point for motion data.
//!
//! Coordinates are meters in a right-handed frame with Y up. At calibration
//! the trainee faces +Z. Raw frames carry the conventional full-body
//! markerset labels plus four racket markers; [`relabel`] turns them into a
//! [`SkeletonFrame`] keyed by role (dominant arm, shuttle arm, racket).

mod format;
mod replay;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{
    parse_recording, read_recording, write_recording, write_sidecar, RecordingFormat,
    RecordingMeta,
};
pub use replay::{replay, FrameSink, ReplayStatus, SinkRejected};

pub type Vec3 = Vector3<f64>;

/// Default nominal capture rate.
pub const DEFAULT_RATE_HZ: f64 = 120.0;

pub const RACKET_TOP: &str = "RacketTop";
pub const RACKET_BOTTOM: &str = "RacketBottom";
pub const RACKET_SIDE: &str = "RacketSide";
pub const RACKET_MIDDLE: &str = "RacketMiddle";

/// Arm markers used by the engine, without the side prefix.
pub const ARM_MARKERS: [&str; 5] = ["SHO", "ELB", "WRA", "WRB", "FIN"];

/// Every label the parser accepts: the conventional full-body markerset
/// (both sides) and the racket markers.
pub fn known_labels() -> &'static [&'static str] {
    &[
        // head and torso
        "LFHD", "RFHD", "LBHD", "RBHD", "C7", "T10", "CLAV", "STRN", "RBAK",
        // arms
        "LSHO", "RSHO", "LUPA", "RUPA", "LELB", "RELB", "LFRM", "RFRM", "LWRA", "RWRA", "LWRB",
        "RWRB", "LFIN", "RFIN",
        // pelvis and legs
        "LASI", "RASI", "LPSI", "RPSI", "LTHI", "RTHI", "LKNE", "RKNE", "LTIB", "RTIB", "LANK",
        "RANK", "LHEE", "RHEE", "LTOE", "RTOE",
        // racket
        RACKET_TOP, RACKET_BOTTOM, RACKET_SIDE, RACKET_MIDDLE,
    ]
}

pub fn is_known_label(label: &str) -> bool {
    known_labels().contains(&label)
}

/// Labels a recording must carry for [`relabel`] to succeed.
pub fn required_labels() -> Vec<String> {
    let mut out = Vec::new();
    for side in ["L", "R"] {
        for m in ARM_MARKERS {
            out.push(format!("{side}{m}"));
        }
    }
    for r in [RACKET_TOP, RACKET_BOTTOM, RACKET_SIDE, RACKET_MIDDLE] {
        out.push(r.to_string());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    /// Label prefix of the racket arm.
    pub fn dominant_prefix(self) -> &'static str {
        match self {
            Handedness::Left => "L",
            Handedness::Right => "R",
        }
    }

    pub fn shuttle_prefix(self) -> &'static str {
        match self {
            Handedness::Left => "R",
            Handedness::Right => "L",
        }
    }
}

impl fmt::Display for Handedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Handedness::Left => "left",
            Handedness::Right => "right",
        })
    }
}

impl std::str::FromStr for Handedness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Handedness::Left),
            "right" | "r" => Ok(Handedness::Right),
            other => Err(format!("unknown handedness `{other}`")),
        }
    }
}

/// One timestamped capture instant. `None` marks a marker that lost tracking.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerFrame {
    pub timestamp: f64,
    pub markers: BTreeMap<String, Option<Vec3>>,
}

impl MarkerFrame {
    pub fn new(timestamp: f64) -> Self {
        Self {
            timestamp,
            markers: BTreeMap::new(),
        }
    }

    pub fn with(mut self, label: &str, position: Option<Vec3>) -> Self {
        self.markers.insert(label.to_string(), position);
        self
    }

    pub fn get(&self, label: &str) -> Option<Vec3> {
        self.markers.get(label).copied().flatten()
    }

    pub fn is_valid(&self, label: &str) -> bool {
        matches!(self.markers.get(label), Some(Some(_)))
    }
}

/// Ground truth recorded by the synthesizer for one serve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeGroundTruth {
    pub backswing_start_frame: usize,
    pub forward_start_frame: usize,
    pub contact_frame: usize,
    pub contact_time: f64,
    pub pitch_deg: f64,
    pub height_delta_m: f64,
    pub speed_mps: f64,
    pub wrist_change_deg: f64,
    pub elbow_change_deg: f64,
    pub shoulder_change_deg: f64,
    pub racket_shuttle_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    frames: Vec<MarkerFrame>,
    pub rate_hz: f64,
    pub handedness: Handedness,
    pub metadata: BTreeMap<String, String>,
    pub ground_truth: Vec<ServeGroundTruth>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordingError {
    #[error("sample rate must be positive, got {0}")]
    BadRate(f64),
    #[error("frame {index}: timestamp {t} does not increase")]
    NonMonotone { index: usize, t: f64 },
    #[error("frame {index}: label set differs from the first frame")]
    LabelMismatch { index: usize },
    #[error("frame {index}: marker {label} has a non-finite coordinate")]
    NonFinite { index: usize, label: String },
}

impl Recording {
    pub fn new(
        frames: Vec<MarkerFrame>,
        rate_hz: f64,
        handedness: Handedness,
    ) -> Result<Self, RecordingError> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(RecordingError::BadRate(rate_hz));
        }
        for (index, frame) in frames.iter().enumerate() {
            if index > 0 {
                if !(frame.timestamp > frames[index - 1].timestamp) {
                    return Err(RecordingError::NonMonotone {
                        index,
                        t: frame.timestamp,
                    });
                }
                if !frame.markers.keys().eq(frames[0].markers.keys()) {
                    return Err(RecordingError::LabelMismatch { index });
                }
            }
            for (label, p) in &frame.markers {
                if let Some(p) = p {
                    if !p.iter().all(|c| c.is_finite()) {
                        return Err(RecordingError::NonFinite {
                            index,
                            label: label.clone(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            frames,
            rate_hz,
            handedness,
            metadata: BTreeMap::new(),
            ground_truth: Vec::new(),
        })
    }

    pub fn frames(&self) -> &[MarkerFrame] {
        &self.frames
    }

    /// Mutable access for fault injection. Callers must keep labels and
    /// timestamps intact.
    pub fn frames_mut(&mut self) -> &mut [MarkerFrame] {
        &mut self.frames
    }

    pub fn labels(&self) -> Vec<String> {
        self.frames
            .first()
            .map(|f| f.markers.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    /// Relabels every frame. Fails on the first structural error.
    pub fn skeleton_frames(&self) -> Result<Vec<SkeletonFrame>, RelabelError> {
        self.frames
            .iter()
            .map(|f| relabel(f, self.handedness))
            .collect()
    }
}

/// Role of a point in the relabeled skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Hand,
    Wrist,
    Elbow,
    Shoulder,
    ShuttleHand,
    ShuttleShoulder,
    RacketTop,
    RacketBottom,
    RacketSide,
    RacketMiddle,
}

impl Joint {
    pub const ALL: [Joint; 10] = [
        Joint::Hand,
        Joint::Wrist,
        Joint::Elbow,
        Joint::Shoulder,
        Joint::ShuttleHand,
        Joint::ShuttleShoulder,
        Joint::RacketTop,
        Joint::RacketBottom,
        Joint::RacketSide,
        Joint::RacketMiddle,
    ];

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

/// Role-keyed view of one frame. Points of lost markers are NaN and their
/// validity bit is clear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub timestamp: f64,
    pub handedness: Handedness,
    pub hand: Vec3,
    pub wrist: Vec3,
    pub elbow: Vec3,
    pub shoulder: Vec3,
    pub shuttle_hand: Vec3,
    pub shuttle_shoulder: Vec3,
    pub racket_top: Vec3,
    pub racket_bottom: Vec3,
    pub racket_side: Vec3,
    pub racket_middle: Vec3,
    valid: u16,
}

impl SkeletonFrame {
    pub fn point(&self, joint: Joint) -> Vec3 {
        match joint {
            Joint::Hand => self.hand,
            Joint::Wrist => self.wrist,
            Joint::Elbow => self.elbow,
            Joint::Shoulder => self.shoulder,
            Joint::ShuttleHand => self.shuttle_hand,
            Joint::ShuttleShoulder => self.shuttle_shoulder,
            Joint::RacketTop => self.racket_top,
            Joint::RacketBottom => self.racket_bottom,
            Joint::RacketSide => self.racket_side,
            Joint::RacketMiddle => self.racket_middle,
        }
    }

    pub fn is_valid(&self, joint: Joint) -> bool {
        self.valid & joint.bit() != 0
    }

    pub fn all_valid(&self, joints: &[Joint]) -> bool {
        joints.iter().all(|j| self.is_valid(*j))
    }

    /// All required markers tracked.
    pub fn complete(&self) -> bool {
        Joint::ALL.iter().all(|j| self.is_valid(*j))
    }

    /// Anatomical right and left shoulders, regardless of handedness.
    pub fn right_left_shoulders(&self) -> (Vec3, Vec3) {
        match self.handedness {
            Handedness::Right => (self.shoulder, self.shuttle_shoulder),
            Handedness::Left => (self.shuttle_shoulder, self.shoulder),
        }
    }

    /// Same frame with every point shifted by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        self.map_points(|p| p + offset)
    }

    pub fn map_points(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            hand: f(self.hand),
            wrist: f(self.wrist),
            elbow: f(self.elbow),
            shoulder: f(self.shoulder),
            shuttle_hand: f(self.shuttle_hand),
            shuttle_shoulder: f(self.shuttle_shoulder),
            racket_top: f(self.racket_top),
            racket_bottom: f(self.racket_bottom),
            racket_side: f(self.racket_side),
            racket_middle: f(self.racket_middle),
            ..*self
        }
    }

    /// Builds a complete frame from role-keyed points; used by tests and tools
    /// that do not start from raw markers.
    #[allow(clippy::too_many_arguments)]
    pub fn from_points(timestamp: f64, handedness: Handedness, points: [Vec3; 10]) -> Self {
        let [hand, wrist, elbow, shoulder, shuttle_hand, shuttle_shoulder, racket_top, racket_bottom, racket_side, racket_middle] =
            points;
        Self {
            timestamp,
            handedness,
            hand,
            wrist,
            elbow,
            shoulder,
            shuttle_hand,
            shuttle_shoulder,
            racket_top,
            racket_bottom,
            racket_side,
            racket_middle,
            valid: Joint::ALL.iter().fold(0, |acc, j| acc | j.bit()),
        }
    }

    /// Marks one joint as lost.
    pub fn with_lost(mut self, joint: Joint) -> Self {
        self.valid &= !joint.bit();
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RelabelError {
    #[error("frame at t={timestamp} is missing required label {label}")]
    MissingLabel { timestamp: String, label: String },
}

/// Maps a raw frame onto skeleton roles according to the racket hand.
///
/// The wrist is the midpoint of the two wrist markers; it is lost if either
/// of them is.
pub fn relabel(frame: &MarkerFrame, handedness: Handedness) -> Result<SkeletonFrame, RelabelError> {
    let dom = handedness.dominant_prefix();
    let non = handedness.shuttle_prefix();
    let mut valid = 0u16;

    let mut fetch = |label: String, joint: Option<Joint>| -> Result<Option<Vec3>, RelabelError> {
        let slot = frame.markers.get(&label).ok_or_else(|| RelabelError::MissingLabel {
            timestamp: frame.timestamp.to_string(),
            label: label.clone(),
        })?;
        if let (Some(_), Some(j)) = (slot, joint) {
            valid |= j.bit();
        }
        Ok(*slot)
    };

    let hand = fetch(format!("{dom}FIN"), Some(Joint::Hand))?;
    let wra = fetch(format!("{dom}WRA"), None)?;
    let wrb = fetch(format!("{dom}WRB"), None)?;
    let elbow = fetch(format!("{dom}ELB"), Some(Joint::Elbow))?;
    let shoulder = fetch(format!("{dom}SHO"), Some(Joint::Shoulder))?;
    let shuttle_hand = fetch(format!("{non}FIN"), Some(Joint::ShuttleHand))?;
    let shuttle_shoulder = fetch(format!("{non}SHO"), Some(Joint::ShuttleShoulder))?;
    let top = fetch(RACKET_TOP.into(), Some(Joint::RacketTop))?;
    let bottom = fetch(RACKET_BOTTOM.into(), Some(Joint::RacketBottom))?;
    let side = fetch(RACKET_SIDE.into(), Some(Joint::RacketSide))?;
    let middle = fetch(RACKET_MIDDLE.into(), Some(Joint::RacketMiddle))?;

    let wrist = match (wra, wrb) {
        (Some(a), Some(b)) => {
            valid |= Joint::Wrist.bit();
            Some((a + b) / 2.0)
        }
        _ => None,
    };

    let nan = Vec3::repeat(f64::NAN);
    let or_nan = |p: Option<Vec3>| p.unwrap_or(nan);
    Ok(SkeletonFrame {
        timestamp: frame.timestamp,
        handedness,
        hand: or_nan(hand),
        wrist: or_nan(wrist),
        elbow: or_nan(elbow),
        shoulder: or_nan(shoulder),
        shuttle_hand: or_nan(shuttle_hand),
        shuttle_shoulder: or_nan(shuttle_shoulder),
        racket_top: or_nan(top),
        racket_bottom: or_nan(bottom),
        racket_side: or_nan(side),
        racket_middle: or_nan(middle),
        valid,
    })
}
