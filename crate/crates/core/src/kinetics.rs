//! Kinetic variables of the racket arm.
//!
//! Vectors: racket major (bottom to top), racket side (middle to side of the
//! head), racket normal (major x side), forearm (elbow to wrist) and upper
//! arm (shoulder to elbow). Angles are reported in degrees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mocap::{Joint, SkeletonFrame, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("degenerate geometry: {0}")]
    Geometry(&'static str),
    #[error("speed window at frame {at} needs at least one tracked neighbour on each side")]
    Window { at: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("keyframes out of order or out of range: {0}")]
    Segmentation(String),
}

/// Lengths below this are treated as zero.
const MIN_LENGTH: f64 = 1e-12;

const DOWN: Vec3 = Vec3::new(0.0, -1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RacketAxes {
    pub major: Vec3,
    pub side: Vec3,
    pub normal: Vec3,
}

pub fn racket_axes(frame: &SkeletonFrame) -> Result<RacketAxes, KineticsError> {
    let needed = [
        Joint::RacketTop,
        Joint::RacketBottom,
        Joint::RacketSide,
        Joint::RacketMiddle,
    ];
    if !frame.all_valid(&needed) {
        return Err(KineticsError::Geometry("racket markers not tracked"));
    }
    let major = frame.racket_top - frame.racket_bottom;
    let side = frame.racket_side - frame.racket_middle;
    if major.norm() < MIN_LENGTH || side.norm() < MIN_LENGTH {
        return Err(KineticsError::Geometry("zero-length racket axis"));
    }
    let normal = major.cross(&side);
    if normal.norm() < MIN_LENGTH * major.norm() * side.norm() {
        return Err(KineticsError::Geometry("racket markers are collinear"));
    }
    Ok(RacketAxes {
        major,
        side,
        normal,
    })
}

/// Signed elevation of the racket normal above the transverse (horizontal)
/// plane, in [-90, 90].
pub fn pitch_angle(normal: &Vec3) -> Result<f64, KineticsError> {
    let len = normal.norm();
    if len < MIN_LENGTH {
        return Err(KineticsError::Geometry("zero racket normal"));
    }
    Ok((normal.y / len).clamp(-1.0, 1.0).asin().to_degrees())
}

/// Unsigned angle between two vectors in degrees, in [0, 180].
pub fn angle_between(a: &Vec3, b: &Vec3) -> Result<f64, KineticsError> {
    let la = a.norm();
    let lb = b.norm();
    if la < MIN_LENGTH || lb < MIN_LENGTH {
        return Err(KineticsError::Geometry("zero-length segment"));
    }
    Ok((a.dot(b) / (la * lb)).clamp(-1.0, 1.0).acos().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub wrist_deg: f64,
    pub elbow_deg: f64,
    pub shoulder_deg: f64,
}

/// Wrist: forearm vs racket major. Elbow: forearm vs reversed upper arm, so a
/// straight arm reads 180. Shoulder: upper arm vs straight down.
pub fn joint_angles(frame: &SkeletonFrame) -> Result<JointAngles, KineticsError> {
    if !frame.all_valid(&[Joint::Wrist, Joint::Elbow, Joint::Shoulder]) {
        return Err(KineticsError::Geometry("arm markers not tracked"));
    }
    let forearm = frame.wrist - frame.elbow;
    let upper_arm = frame.elbow - frame.shoulder;
    let axes = racket_axes(frame)?;
    Ok(JointAngles {
        wrist_deg: angle_between(&forearm, &axes.major)?,
        elbow_deg: angle_between(&forearm, &(-upper_arm))?,
        shoulder_deg: angle_between(&upper_arm, &DOWN)?,
    })
}

/// Angle at the wrist between the racket major and the direction to the
/// shuttle hand.
pub fn racket_shuttle_angle(frame: &SkeletonFrame) -> Result<f64, KineticsError> {
    if !frame.all_valid(&[Joint::Wrist, Joint::ShuttleHand]) {
        return Err(KineticsError::Geometry("wrist or shuttle hand not tracked"));
    }
    let axes = racket_axes(frame)?;
    angle_between(&axes.major, &(frame.shuttle_hand - frame.wrist))
}

/// Speed of the racket top at `frames[at]`.
///
/// With three tracked frames on each side the positions get a 3-point moving
/// average and the velocity is the centered difference across +-2 frames of
/// the averaged track. Near the ends of the window the scheme narrows to a raw
/// centered difference over +-2 or +-1 frames.
pub fn racket_speed(frames: &[SkeletonFrame], at: usize) -> Result<f64, KineticsError> {
    if at >= frames.len() {
        return Err(KineticsError::Window { at });
    }
    let tracked = |i: usize| frames[i].is_valid(Joint::RacketTop);
    let reach = |max: usize| {
        (1..=max)
            .take_while(|&k| at >= k && at + k < frames.len() && tracked(at - k) && tracked(at + k))
            .count()
    };
    let top = |i: usize| frames[i].racket_top;
    let time = |i: usize| frames[i].timestamp;
    match reach(3) {
        3 => {
            let smooth = |i: usize| (top(i - 1) + top(i) + top(i + 1)) / 3.0;
            Ok((smooth(at + 2) - smooth(at - 2)).norm() / (time(at + 2) - time(at - 2)))
        }
        h @ (1 | 2) => Ok((top(at + h) - top(at - h)).norm() / (time(at + h) - time(at - h))),
        _ => Err(KineticsError::Window { at }),
    }
}

/// Racket-top speed under pure rotation about the grip, given the speed
/// `v_t` the same force and time would produce in pure translation.
/// `r_top` is grip to racket top, `r_c` grip to the racket's mass center.
pub fn rotary_speed(v_t: f64, r_top: f64, r_c: f64) -> Result<f64, KineticsError> {
    if !(r_c > 0.0) {
        return Err(KineticsError::Parameter(format!("r_c must be positive, got {r_c}")));
    }
    if !(r_top >= r_c) {
        return Err(KineticsError::Parameter(format!(
            "r_top ({r_top}) must not be shorter than r_c ({r_c})"
        )));
    }
    if !(v_t >= 0.0) {
        return Err(KineticsError::Parameter(format!("v_t must be non-negative, got {v_t}")));
    }
    Ok(v_t * (r_top / r_c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticSample {
    pub timestamp: f64,
    pub pitch_deg: f64,
    /// Vertical coordinate of the racket top.
    pub height_m: f64,
    pub speed_mps: f64,
    pub wrist_deg: f64,
    pub elbow_deg: f64,
    pub shoulder_deg: f64,
    pub racket_shuttle_deg: f64,
}

/// All kinetic variables at `frames[at]`; the speed uses the surrounding
/// frames.
pub fn sample(frames: &[SkeletonFrame], at: usize) -> Result<KineticSample, KineticsError> {
    let frame = frames.get(at).ok_or(KineticsError::Window { at })?;
    let axes = racket_axes(frame)?;
    let joints = joint_angles(frame)?;
    Ok(KineticSample {
        timestamp: frame.timestamp,
        pitch_deg: pitch_angle(&axes.normal)?,
        height_m: frame.racket_top.y,
        speed_mps: racket_speed(frames, at)?,
        wrist_deg: joints.wrist_deg,
        elbow_deg: joints.elbow_deg,
        shoulder_deg: joints.shoulder_deg,
        racket_shuttle_deg: racket_shuttle_angle(frame)?,
    })
}

/// Keyframe indices into a sample or frame sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyframes {
    pub backswing_start: usize,
    pub forward_start: usize,
    pub contact: usize,
}

impl Keyframes {
    pub fn shifted_down(self, by: usize) -> Self {
        Self {
            backswing_start: self.backswing_start - by,
            forward_start: self.forward_start - by,
            contact: self.contact - by,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSummary {
    pub pitch_at_contact_deg: f64,
    pub speed_at_contact_mps: f64,
    /// (timestamp, racket-top height minus height at backswing start) over the
    /// forward swing, contact included.
    pub height_trace: Vec<(f64, f64)>,
    /// Trace value of largest magnitude, sign kept.
    pub height_delta_m: f64,
    pub max_abs_height_delta_m: f64,
    pub wrist_change_deg: f64,
    pub elbow_change_deg: f64,
    pub shoulder_change_deg: f64,
    pub backswing_end_racket_shuttle_angle_deg: f64,
}

fn range(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

pub fn summarize_swing(
    samples: &[KineticSample],
    keyframes: Keyframes,
) -> Result<ServiceSummary, KineticsError> {
    let Keyframes {
        backswing_start: back,
        forward_start: fwd,
        contact,
    } = keyframes;
    if !(back <= fwd && fwd <= contact) {
        return Err(KineticsError::Segmentation(format!("{back} <= {fwd} <= {contact} violated")));
    }
    if contact >= samples.len() {
        return Err(KineticsError::Segmentation(format!(
            "contact {contact} outside {} samples",
            samples.len()
        )));
    }
    let ready_height = samples[back].height_m;
    let height_trace: Vec<(f64, f64)> = samples[fwd..=contact]
        .iter()
        .map(|s| (s.timestamp, s.height_m - ready_height))
        .collect();
    let height_delta_m = height_trace
        .iter()
        .map(|&(_, dh)| dh)
        .fold(0.0_f64, |best, dh| if dh.abs() > best.abs() { dh } else { best });
    let swing = &samples[back..=contact];
    let at_contact = &samples[contact];
    Ok(ServiceSummary {
        pitch_at_contact_deg: at_contact.pitch_deg,
        speed_at_contact_mps: at_contact.speed_mps,
        height_trace,
        height_delta_m,
        max_abs_height_delta_m: height_delta_m.abs(),
        wrist_change_deg: range(swing.iter().map(|s| s.wrist_deg)),
        elbow_change_deg: range(swing.iter().map(|s| s.elbow_deg)),
        shoulder_change_deg: range(swing.iter().map(|s| s.shoulder_deg)),
        backswing_end_racket_shuttle_angle_deg: samples[fwd].racket_shuttle_deg,
    })
}
