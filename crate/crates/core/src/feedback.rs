//! Pre-shot guidance geometry and post-shot judgments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::ServiceSummary;
use crate::mocap::{SkeletonFrame, Vec3};
use crate::model::{ExpertModel, Pattern, VariableStats};

/// Comparisons against one-SD boundaries are closed; this absorbs rounding in
/// values that land on a boundary by construction.
pub const BOUNDARY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    /// Height of the target shuttle position (m).
    pub shuttle_height: f64,
    /// Forward offset of the shuttle target as a fraction of arm length.
    pub forward_fraction: f64,
    /// Offset of the racket target toward the dominant side (m).
    pub racket_gap: f64,
    /// Green and yellow halo limits along the sagittal axis (m).
    pub halo_bands: (f64, f64),
    pub sweep_back_rad: f64,
    pub sweep_forward_rad: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            shuttle_height: 1.05,
            forward_fraction: 0.35,
            racket_gap: 0.12,
            halo_bands: (0.03, 0.08),
            sweep_back_rad: 0.35,
            sweep_forward_rad: 0.45,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        let (g, y) = self.halo_bands;
        let ok = self.shuttle_height.is_finite()
            && self.forward_fraction.is_finite()
            && self.racket_gap.is_finite()
            && 0.0 < g
            && g < y
            && y.is_finite()
            && self.sweep_back_rad >= 0.0
            && self.sweep_forward_rad >= 0.0
            && self.sweep_back_rad + self.sweep_forward_rad > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FeedbackError::Config(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error("degenerate geometry: {0}")]
    Geometry(&'static str),
    #[error("judgment needs the wrist-only model, got {0}")]
    Pattern(Pattern),
    #[error("summary is missing contact values")]
    MissingContact,
    #[error("invalid guidance configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadyTargets {
    pub shuttle_target: Vec3,
    pub racket_target: Vec3,
    /// Horizontal unit vector pointing where the trainee faces.
    pub sagittal_axis: Vec3,
    /// Horizontal unit vector from the shuttle-side shoulder to the racket-side
    /// shoulder.
    pub dominant_axis: Vec3,
}

fn horizontal(v: Vec3) -> Vec3 {
    Vec3::new(v.x, 0.0, v.z)
}

/// Body axes of a frame: (forward, toward the dominant side).
pub fn body_axes(frame: &SkeletonFrame) -> Result<(Vec3, Vec3), FeedbackError> {
    let (right, left) = frame.right_left_shoulders();
    let across = horizontal(right - left);
    if !(across.norm() > 1e-9) {
        return Err(FeedbackError::Geometry("shoulders coincide in the transverse plane"));
    }
    let forward = Vec3::y().cross(&across).normalize();
    let dominant = horizontal(frame.shoulder - frame.shuttle_shoulder).normalize();
    Ok((forward, dominant))
}

pub fn ready_targets(frame: &SkeletonFrame, cfg: &GuidanceConfig) -> Result<ReadyTargets, FeedbackError> {
    if !frame.complete() {
        return Err(FeedbackError::Geometry("frame is incomplete"));
    }
    let (forward, dominant) = body_axes(frame)?;
    let arm = (frame.elbow - frame.shoulder).norm() + (frame.wrist - frame.elbow).norm();
    let below = Vec3::new(frame.shoulder.x, cfg.shuttle_height, frame.shoulder.z);
    let shuttle_target = below + forward * (cfg.forward_fraction * arm);
    Ok(ReadyTargets {
        shuttle_target,
        racket_target: shuttle_target + dominant * cfg.racket_gap,
        sagittal_axis: forward,
        dominant_axis: dominant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Halo {
    Green,
    Yellow,
    Red,
}

pub fn halo_state(actual: Vec3, target: Vec3, axis: Vec3, bands: (f64, f64)) -> Halo {
    let d = (actual - target).dot(&axis).abs();
    if d <= bands.0 {
        Halo::Green
    } else if d <= bands.1 {
        Halo::Yellow
    } else {
        Halo::Red
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingTrackSpec {
    pub center: Vec3,
    pub plane_height: f64,
    pub radius: f64,
    /// Target angular speed at the end of the forward sweep (rad/s).
    pub angular_speed: f64,
    pub angular_acceleration: f64,
    pub sweep_back: f64,
    pub sweep_forward: f64,
}

/// Circular swing indicator centered on the wrist. Starting from rest, a
/// constant angular acceleration over both sweeps reaches the model's
/// contact speed at the racket top.
pub fn swing_track(
    ready: &SkeletonFrame,
    model: &ExpertModel,
    cfg: &GuidanceConfig,
) -> Result<SwingTrackSpec, FeedbackError> {
    if !ready.complete() {
        return Err(FeedbackError::Geometry("frame is incomplete"));
    }
    let radius = (ready.wrist - ready.racket_top).norm();
    if !(radius > 1e-9) {
        return Err(FeedbackError::Geometry("wrist coincides with the racket top"));
    }
    let sweep = cfg.sweep_back_rad + cfg.sweep_forward_rad;
    if !(model.speed.mean > 0.0 && sweep > 0.0) {
        return Err(FeedbackError::Config("speed mean and sweeps must be positive".into()));
    }
    let omega = model.speed.mean / radius;
    Ok(SwingTrackSpec {
        center: ready.wrist,
        plane_height: ready.shuttle_hand.y,
        radius,
        angular_speed: omega,
        angular_acceleration: omega * omega / (2.0 * sweep),
        sweep_back: cfg.sweep_back_rad,
        sweep_forward: cfg.sweep_forward_rad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgedValue {
    pub value: f64,
    pub target_mean: f64,
    pub target_sd: f64,
    pub status: Status,
    pub direction: Direction,
}

impl JudgedValue {
    fn new(value: f64, stats: &VariableStats, pass: bool) -> Self {
        Self {
            value,
            target_mean: stats.mean,
            target_sd: stats.sd,
            status: Status::from_pass(pass),
            direction: Direction::None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightPoint {
    pub t: f64,
    pub dh: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub pitch: JudgedValue,
    pub speed: JudgedValue,
    pub height_threshold_m: f64,
    pub height_trace: Vec<HeightPoint>,
    pub wrist: JudgedValue,
    pub elbow: JudgedValue,
    pub shoulder: JudgedValue,
    pub wrist_upper_bound_deg: f64,
}

impl FeedbackReport {
    pub fn height_passed(&self) -> bool {
        self.height_trace.iter().all(|p| p.within)
    }

    pub fn all_passed(&self) -> bool {
        self.pitch.passed()
            && self.speed.passed()
            && self.height_passed()
            && self.wrist.passed()
            && self.elbow.passed()
            && self.shoulder.passed()
    }
}

fn within_sd(value: f64, stats: &VariableStats) -> bool {
    (value - stats.mean).abs() <= stats.sd + BOUNDARY_SLACK
}

/// Whether a height excursion stays within the model's height threshold.
pub fn height_within(dh: f64, model: &ExpertModel) -> bool {
    dh.abs() <= model.height_diff.upper() + BOUNDARY_SLACK
}

pub fn judge_shot(summary: &ServiceSummary, model: &ExpertModel) -> Result<FeedbackReport, FeedbackError> {
    if model.pattern != Pattern::WristOnly {
        return Err(FeedbackError::Pattern(model.pattern));
    }
    let contact_values = [
        summary.pitch_at_contact_deg,
        summary.speed_at_contact_mps,
        summary.wrist_change_deg,
        summary.elbow_change_deg,
        summary.shoulder_change_deg,
        summary.backswing_end_racket_shuttle_angle_deg,
    ];
    if summary.height_trace.is_empty() || !contact_values.iter().all(|v| v.is_finite()) {
        return Err(FeedbackError::MissingContact);
    }

    let mut pitch = JudgedValue::new(
        summary.pitch_at_contact_deg,
        &model.pitch,
        within_sd(summary.pitch_at_contact_deg, &model.pitch),
    );
    if !pitch.passed() {
        pitch.direction = if pitch.value > model.pitch.mean {
            Direction::Decrease
        } else {
            Direction::Increase
        };
    }
    let speed = JudgedValue::new(
        summary.speed_at_contact_mps,
        &model.speed,
        within_sd(summary.speed_at_contact_mps, &model.speed),
    );
    let height_trace = summary
        .height_trace
        .iter()
        .map(|&(t, dh)| HeightPoint {
            t,
            dh,
            within: height_within(dh, model),
        })
        .collect();

    let upper = model
        .wrist_change
        .mean
        .min(summary.backswing_end_racket_shuttle_angle_deg);
    let wrist_floor = model.wrist_change.lower().min(upper);
    let wrist = JudgedValue::new(
        summary.wrist_change_deg,
        &model.wrist_change,
        summary.wrist_change_deg >= wrist_floor - BOUNDARY_SLACK,
    );
    let elbow = JudgedValue::new(
        summary.elbow_change_deg,
        &model.elbow_change,
        summary.elbow_change_deg <= model.elbow_change.upper() + BOUNDARY_SLACK,
    );
    let shoulder = JudgedValue::new(
        summary.shoulder_change_deg,
        &model.shoulder_change,
        summary.shoulder_change_deg <= model.shoulder_change.upper() + BOUNDARY_SLACK,
    );
    Ok(FeedbackReport {
        pitch,
        speed,
        height_threshold_m: model.height_diff.upper(),
        height_trace,
        wrist,
        elbow,
        shoulder,
        wrist_upper_bound_deg: upper,
    })
}
