//! Analytic serve synthesizer.
//!
//! Builds recordings whose kinetic variables are known by construction. The
//! arm starts from a ready pose placed on the guidance targets. Joint changes
//! are rotations about axes perpendicular to the plane of the two segments
//! that define each angle, so every angle moves one-for-one with its offset
//! while the others stay put. The racket-top path is prescribed separately
//! and the whole racket arm is translated onto it each frame, which leaves
//! all angles untouched. Around contact the racket top moves at constant
//! velocity over at least four frames each side, so the smoothed speed equals
//! the requested contact speed.

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Handedness, MarkerFrame, Recording, ServeGroundTruth, Vec3, RACKET_BOTTOM, RACKET_MIDDLE,
    RACKET_SIDE, RACKET_TOP,
};
use crate::feedback::GuidanceConfig;
use crate::model::{builtin_model, ExpertModel, Pattern};

const HALF_SHOULDER_WIDTH: f64 = 0.18;
/// Shoulder to elbow and elbow to wrist in the ready pose of a right-handed
/// trainee facing +Z (their right is -X).
const UPPER_ARM: [f64; 3] = [0.04, -0.26, 0.12];
const FOREARM: [f64; 3] = [0.12, 0.08, 0.28];
const GRIP_TO_MIDDLE: f64 = 0.45;
const MIDDLE_TO_TOP: f64 = 0.12;
const GRIP_TO_BOTTOM: f64 = 0.10;
const HEAD_HALF_WIDTH: f64 = 0.10;
const GRIP_TO_FINGER: f64 = 0.07;
const WRIST_HALF_WIDTH: f64 = 0.025;

/// Horizontal angle between the contact approach and straight ahead, swung
/// from the racket side across the body.
const APPROACH_ANGLE_DEG: f64 = 40.0;
/// Horizontal offset of the racket middle from the shuttle hand at contact,
/// perpendicular to the approach and toward the racket side.
const MISS_M: f64 = 0.05;
const DRIVE_START_SPEED: f64 = 1.0;
const APPROACH_S: f64 = 0.04;
const APPROACH_MIN_FRAMES: usize = 4;
const FOLLOW_THROUGH_S: f64 = 0.1;
const PAUSE_S: f64 = 0.1;
const RETURN_S: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthesis parameter: {0}")]
    Parameter(String),
    #[error("parameters cannot be realized: {0}")]
    Infeasible(String),
}

/// Recording-wide settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub rate_hz: f64,
    pub handedness: Handedness,
    pub guidance: GuidanceConfig,
    /// Ready hold before each backswing.
    pub lead_in_s: f64,
    /// Time from contact to the end of the serve's segment; the next serve's
    /// lead-in follows.
    pub settle_s: f64,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self {
            rate_hz: super::DEFAULT_RATE_HZ,
            handedness: Handedness::Right,
            guidance: GuidanceConfig::default(),
            lead_in_s: 0.5,
            settle_s: 2.6,
        }
    }
}

/// Sinusoidal wrist offset added over the swing, for producing jittery
/// serves. The ground truth ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wobble {
    pub amplitude_deg: f64,
    pub cycles: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServeParams {
    pub pitch_deg: f64,
    /// Peak racket-top height change over the forward swing, signed.
    pub height_delta_m: f64,
    pub contact_speed_mps: f64,
    pub wrist_change_deg: f64,
    pub elbow_change_deg: f64,
    pub shoulder_change_deg: f64,
    /// Wrist backswing amplitude; at most the wrist change. Elbow and
    /// shoulder back-swing by half their change.
    pub backswing_deg: f64,
    pub backswing_s: f64,
    pub forward_swing_s: f64,
    pub wrist_wobble: Option<Wobble>,
}

impl Default for ServeParams {
    fn default() -> Self {
        Self::from_model(&builtin_model(Pattern::WristOnly))
    }
}

impl ServeParams {
    /// A serve sitting on the model means.
    pub fn from_model(model: &ExpertModel) -> Self {
        Self {
            pitch_deg: model.pitch.mean,
            height_delta_m: model.height_diff.mean,
            contact_speed_mps: model.speed.mean,
            wrist_change_deg: model.wrist_change.mean,
            elbow_change_deg: model.elbow_change.mean,
            shoulder_change_deg: model.shoulder_change.mean,
            backswing_deg: model.wrist_change.mean / 2.0,
            backswing_s: 0.3,
            forward_swing_s: 0.08,
            wrist_wobble: None,
        }
    }

    /// No motion at all: the recording holds the ready pose.
    pub fn stationary() -> Self {
        Self {
            height_delta_m: 0.0,
            contact_speed_mps: 0.0,
            wrist_change_deg: 0.0,
            elbow_change_deg: 0.0,
            shoulder_change_deg: 0.0,
            backswing_deg: 0.0,
            wrist_wobble: None,
            ..Self::default()
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.height_delta_m == 0.0
            && self.contact_speed_mps == 0.0
            && self.wrist_change_deg == 0.0
            && self.elbow_change_deg == 0.0
            && self.shoulder_change_deg == 0.0
            && self.backswing_deg == 0.0
    }
}

fn param(msg: impl Into<String>) -> SynthError {
    SynthError::Parameter(msg.into())
}

fn ease(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

fn frames_for(seconds: f64, rate: f64) -> usize {
    (seconds * rate).round() as usize
}

fn rotate_about(p: Vec3, pivot: Vec3, rot: &Rotation3<f64>) -> Vec3 {
    rot * (p - pivot) + pivot
}

/// Marker positions of one instant in the right-handed body frame.
#[derive(Debug, Clone, Copy)]
struct Pose {
    shoulder: Vec3,
    elbow: Vec3,
    wra: Vec3,
    wrb: Vec3,
    finger: Vec3,
    top: Vec3,
    bottom: Vec3,
    side: Vec3,
    middle: Vec3,
    off_shoulder: Vec3,
    off_elbow: Vec3,
    off_wra: Vec3,
    off_wrb: Vec3,
    shuttle_hand: Vec3,
}

impl Pose {
    fn wrist(&self) -> Vec3 {
        (self.wra + self.wrb) / 2.0
    }
}

/// Ready configuration and the three joint rotation axes.
struct Rig {
    ready: Pose,
    shoulder0: Vec3,
    elbow0: Vec3,
    wrist0: Vec3,
    major0: Vec3,
    forward: Vec3,
    dominant: Vec3,
    wrist_axis: Unit<Vec3>,
    elbow_axis: Unit<Vec3>,
    shoulder_axis: Unit<Vec3>,
    /// Ready wrist, elbow and shoulder angles (degrees).
    angles0: [f64; 3],
}

impl Rig {
    fn new(guidance: &GuidanceConfig) -> Result<Self, SynthError> {
        let forward = Vec3::z();
        let dominant = -Vec3::x();
        let u0 = Vec3::from(UPPER_ARM);
        let f0 = Vec3::from(FOREARM);
        let arm = u0.norm() + f0.norm();

        let shoulder_h = Vec3::new(-HALF_SHOULDER_WIDTH, 0.0, 0.0);
        let shuttle_target = Vec3::new(shoulder_h.x, guidance.shuttle_height, shoulder_h.z)
            + forward * (guidance.forward_fraction * arm);
        let racket_target = shuttle_target + dominant * guidance.racket_gap;

        let wrist_h = shoulder_h + Vec3::new(u0.x + f0.x, 0.0, u0.z + f0.z);
        let reach = Vec3::new(racket_target.x - wrist_h.x, 0.0, racket_target.z - wrist_h.z);
        if reach.norm() >= GRIP_TO_MIDDLE {
            return Err(SynthError::Infeasible(
                "racket target is out of reach of the ready pose".into(),
            ));
        }
        let drop = (GRIP_TO_MIDDLE.powi(2) - reach.norm_squared()).sqrt();
        let wrist_y = racket_target.y + drop;
        let shoulder_y = wrist_y - u0.y - f0.y;

        let shoulder0 = Vec3::new(shoulder_h.x, shoulder_y, shoulder_h.z);
        let elbow0 = shoulder0 + u0;
        let wrist0 = elbow0 + f0;
        let major0 = (racket_target - wrist0) / GRIP_TO_MIDDLE;
        let across = (dominant - major0 * dominant.dot(&major0)).normalize();
        let wrist_across = f0.cross(&Vec3::y()).normalize() * WRIST_HALF_WIDTH;

        let off_shoulder = Vec3::new(HALF_SHOULDER_WIDTH, shoulder_y, 0.0);
        let ready = Pose {
            shoulder: shoulder0,
            elbow: elbow0,
            wra: wrist0 + wrist_across,
            wrb: wrist0 - wrist_across,
            finger: wrist0 + major0 * GRIP_TO_FINGER,
            top: wrist0 + major0 * (GRIP_TO_MIDDLE + MIDDLE_TO_TOP),
            bottom: wrist0 - major0 * GRIP_TO_BOTTOM,
            side: racket_target + across * HEAD_HALF_WIDTH,
            middle: racket_target,
            off_shoulder,
            off_elbow: off_shoulder + Vec3::new(0.06, -0.27, 0.08),
            off_wra: shuttle_target + Vec3::new(0.06, 0.03, -0.02),
            off_wrb: shuttle_target + Vec3::new(0.06, -0.01, -0.03),
            shuttle_hand: shuttle_target,
        };

        let down = -Vec3::y();
        let axis = |a: Vec3, b: Vec3, what: &str| {
            Unit::try_new(a.cross(&b), 1e-9)
                .ok_or_else(|| SynthError::Infeasible(format!("{what} segments are parallel")))
        };
        Ok(Self {
            ready,
            shoulder0,
            elbow0,
            wrist0,
            major0,
            forward,
            dominant,
            wrist_axis: axis(f0, major0, "wrist")?,
            elbow_axis: axis(-u0, f0, "elbow")?,
            shoulder_axis: axis(down, u0, "shoulder")?,
            angles0: [
                f0.angle(&major0).to_degrees(),
                f0.angle(&(-u0)).to_degrees(),
                u0.angle(&down).to_degrees(),
            ],
        })
    }

    fn rotations(&self, offsets_deg: [f64; 3]) -> [Rotation3<f64>; 3] {
        let [w, e, s] = offsets_deg.map(f64::to_radians);
        [
            Rotation3::from_axis_angle(&self.wrist_axis, w),
            Rotation3::from_axis_angle(&self.elbow_axis, e),
            Rotation3::from_axis_angle(&self.shoulder_axis, s),
        ]
    }

    /// Racket major direction after the joint offsets.
    fn major_at(&self, offsets_deg: [f64; 3]) -> Vec3 {
        let [rw, re, rs] = self.rotations(offsets_deg);
        rs * (re * (rw * self.major0))
    }

    /// Racket face normal direction after the joint offsets, for a racket
    /// rolled by `roll` about its major.
    fn normal_at(&self, offsets_deg: [f64; 3], roll: f64) -> Vec3 {
        let [rw, re, rs] = self.rotations(offsets_deg);
        let side = self.ready.side - self.ready.middle;
        let rolled = Rotation3::from_axis_angle(&Unit::new_normalize(self.major0), roll) * side;
        rs * (re * (rw * self.major0.cross(&rolled)))
    }

    /// Roll about the racket major that puts the contact pitch at `pitch_deg`.
    fn solve_roll(&self, offsets_deg: [f64; 3], pitch_deg: f64) -> Result<f64, SynthError> {
        let a = self.normal_at(offsets_deg, 0.0).normalize().y;
        let b = self
            .normal_at(offsets_deg, std::f64::consts::FRAC_PI_2)
            .normalize()
            .y;
        let reach = a.hypot(b);
        let target = pitch_deg.to_radians().sin();
        if target.abs() > reach {
            return Err(SynthError::Infeasible(format!(
                "pitch {pitch_deg} deg exceeds the {:.1} deg reachable with this racket direction",
                reach.asin().to_degrees()
            )));
        }
        let phi = b.atan2(a);
        let spread = (target / reach).acos();
        let wrap = |x: f64| (x + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        let (r1, r2) = (wrap(phi + spread), wrap(phi - spread));
        Ok(if r1.abs() <= r2.abs() { r1 } else { r2 })
    }

    /// Pose for joint offsets, racket roll and prescribed racket-top position.
    fn pose(&self, offsets_deg: [f64; 3], roll: f64, top: Vec3) -> Pose {
        let [rw, re, rs] = self.rotations(offsets_deg);
        let roll = Rotation3::from_axis_angle(&Unit::new_normalize(self.major0), roll);
        let r = &self.ready;
        let racket = |p: Vec3| {
            let p = rotate_about(p, self.wrist0, &roll);
            let p = rotate_about(p, self.wrist0, &rw);
            let p = rotate_about(p, self.elbow0, &re);
            rotate_about(p, self.shoulder0, &rs)
        };
        let forearm = |p: Vec3| rotate_about(rotate_about(p, self.elbow0, &re), self.shoulder0, &rs);
        let mut pose = Pose {
            shoulder: r.shoulder,
            elbow: rotate_about(r.elbow, self.shoulder0, &rs),
            wra: forearm(r.wra),
            wrb: forearm(r.wrb),
            finger: racket(r.finger),
            top: racket(r.top),
            bottom: racket(r.bottom),
            side: racket(r.side),
            middle: racket(r.middle),
            ..*r
        };
        let shift = top - pose.top;
        for p in [
            &mut pose.shoulder,
            &mut pose.elbow,
            &mut pose.wra,
            &mut pose.wrb,
            &mut pose.finger,
            &mut pose.bottom,
            &mut pose.side,
            &mut pose.middle,
        ] {
            *p += shift;
        }
        pose.top = top;
        pose
    }
}

/// Frame counts and keyframes of one serve, relative to its first frame.
struct Timeline {
    back: usize,
    fwd: usize,
    approach: usize,
    contact: usize,
    approach_end: usize,
    follow_end: usize,
    pause_end: usize,
    return_end: usize,
    last: usize,
}

impl Timeline {
    fn new(session: &SessionParams, serve: &ServeParams) -> Result<Self, SynthError> {
        let rate = session.rate_hz;
        let back = frames_for(session.lead_in_s, rate);
        let n_back = frames_for(serve.backswing_s, rate);
        let n_fwd = frames_for(serve.forward_swing_s, rate);
        let n_approach = APPROACH_MIN_FRAMES.max((APPROACH_S * rate - 1e-9).ceil() as usize);
        if back < 3 {
            return Err(param("lead-in must span at least 3 frames"));
        }
        if n_back < 3 {
            return Err(param("backswing must span at least 3 frames"));
        }
        if n_fwd < n_approach + 2 {
            return Err(param(format!(
                "forward swing must span at least {} frames",
                n_approach + 2
            )));
        }
        let fwd = back + n_back;
        let contact = fwd + n_fwd;
        let approach_end = contact + n_approach;
        let follow_end = approach_end + frames_for(FOLLOW_THROUGH_S, rate).max(1);
        let pause_end = follow_end + frames_for(PAUSE_S, rate);
        let return_end = pause_end + frames_for(RETURN_S, rate).max(1);
        let last = contact + (session.settle_s * rate).ceil() as usize;
        if last < return_end {
            return Err(param(format!(
                "settle time must cover the follow-through and return ({:.3} s)",
                (return_end - contact) as f64 / rate
            )));
        }
        Ok(Self {
            back,
            fwd,
            approach: contact - n_approach,
            contact,
            approach_end,
            follow_end,
            pause_end,
            return_end,
            last,
        })
    }
}

fn validate(session: &SessionParams, serve: &ServeParams) -> Result<(), SynthError> {
    if !(session.rate_hz > 0.0 && session.rate_hz.is_finite()) {
        return Err(param("rate must be positive"));
    }
    if !(session.lead_in_s >= 0.0 && session.settle_s >= 0.0) {
        return Err(param("durations must be non-negative"));
    }
    session
        .guidance
        .validate()
        .map_err(|e| param(e.to_string()))?;
    let all = [
        serve.pitch_deg,
        serve.height_delta_m,
        serve.contact_speed_mps,
        serve.wrist_change_deg,
        serve.elbow_change_deg,
        serve.shoulder_change_deg,
        serve.backswing_deg,
        serve.backswing_s,
        serve.forward_swing_s,
    ];
    if !all.iter().all(|v| v.is_finite()) {
        return Err(param("parameters must be finite"));
    }
    if !(serve.backswing_s > 0.0 && serve.forward_swing_s > 0.0) {
        return Err(param("swing durations must be positive"));
    }
    if serve.is_stationary() {
        return Ok(());
    }
    if !(serve.contact_speed_mps > 0.0) {
        return Err(param("contact speed must be positive"));
    }
    if serve.wrist_change_deg < 0.0 || serve.elbow_change_deg < 0.0 || serve.shoulder_change_deg < 0.0
    {
        return Err(param("joint changes must be non-negative"));
    }
    if !(0.0..=serve.wrist_change_deg).contains(&serve.backswing_deg) {
        return Err(param("backswing must lie between 0 and the wrist change"));
    }
    if serve.pitch_deg.abs() >= 90.0 {
        return Err(param("pitch must lie strictly between -90 and 90 degrees"));
    }
    Ok(())
}

/// Joint offsets (wrist, elbow, shoulder) in degrees: back-swung amplitude
/// and total change.
fn joint_plan(serve: &ServeParams) -> [(f64, f64); 3] {
    [
        (serve.backswing_deg, serve.wrist_change_deg),
        (serve.elbow_change_deg / 2.0, serve.elbow_change_deg),
        (serve.shoulder_change_deg / 2.0, serve.shoulder_change_deg),
    ]
}

struct Built {
    poses: Vec<Pose>,
    truth: Option<ServeGroundTruth>,
}

fn build_serve(rig: &Rig, session: &SessionParams, serve: &ServeParams) -> Result<Built, SynthError> {
    validate(session, serve)?;
    let tl = Timeline::new(session, serve)?;
    let ready_top = rig.ready.top;
    if serve.is_stationary() {
        return Ok(Built {
            poses: vec![rig.ready; tl.last + 1],
            truth: None,
        });
    }

    let dt = 1.0 / session.rate_hz;
    let plan = joint_plan(serve);
    let at_contact = plan.map(|(b, c)| c - b);
    for (j, &(b, c)) in plan.iter().enumerate() {
        let lo = rig.angles0[j] - b - serve.wrist_wobble.filter(|_| j == 0).map_or(0.0, |w| w.amplitude_deg.abs());
        let hi = rig.angles0[j] + (c - b).max(0.0) + serve.wrist_wobble.filter(|_| j == 0).map_or(0.0, |w| w.amplitude_deg.abs());
        if lo <= 0.0 || hi >= 180.0 {
            return Err(SynthError::Infeasible(format!(
                "joint {j} would leave (0, 180) degrees"
            )));
        }
    }
    let roll = rig.solve_roll(at_contact, serve.pitch_deg)?;

    let v = serve.contact_speed_mps;
    let h = serve.height_delta_m;
    let angle = APPROACH_ANGLE_DEG.to_radians();
    let dir = rig.forward * angle.cos() - rig.dominant * angle.sin();
    let miss = (rig.forward * angle.sin() + rig.dominant * angle.cos()) * MISS_M;
    let major_c = rig.major_at(at_contact);
    let mut contact_top = rig.ready.shuttle_hand + miss + major_c * MIDDLE_TO_TOP;
    contact_top.y = ready_top.y + h;

    let n_app = (tl.contact - tl.approach) as f64;
    let drive_t = (tl.approach - tl.fwd) as f64 * dt;
    let v0 = DRIVE_START_SPEED.min(v / 2.0);
    let accel = (v - v0) / drive_t;
    let drive_len = (v0 + v) / 2.0 * drive_t;
    let approach_start = contact_top - dir * (v * n_app * dt);
    let mut back_end = approach_start - dir * drive_len;
    back_end.y = ready_top.y + h;
    let approach_end = contact_top + dir * (v * n_app * dt);
    let follow_t = (tl.follow_end - tl.approach_end) as f64 * dt;
    let follow_end = approach_end + dir * (v * follow_t / 2.0);

    let offsets = |k: usize| -> [f64; 3] {
        let mut out = [0.0; 3];
        for (j, &(b, c)) in plan.iter().enumerate() {
            out[j] = if k <= tl.back {
                0.0
            } else if k <= tl.fwd {
                -b * ease((k - tl.back) as f64 / (tl.fwd - tl.back) as f64)
            } else if k <= tl.approach {
                -b + c * ease((k - tl.fwd) as f64 / (tl.approach - tl.fwd) as f64)
            } else if k <= tl.pause_end {
                c - b
            } else if k <= tl.return_end {
                (c - b) * (1.0 - ease((k - tl.pause_end) as f64 / (tl.return_end - tl.pause_end) as f64))
            } else {
                0.0
            };
        }
        if let Some(w) = serve.wrist_wobble {
            if tl.back < k && k <= tl.contact {
                let s = (k - tl.back) as f64 / (tl.contact - tl.back) as f64;
                out[0] += w.amplitude_deg * (std::f64::consts::TAU * w.cycles as f64 * s).sin();
            }
        }
        out
    };
    let top_at = |k: usize| -> Vec3 {
        if k <= tl.back || k > tl.return_end {
            ready_top
        } else if k <= tl.fwd {
            let s = (k - tl.back) as f64 / (tl.fwd - tl.back) as f64;
            let mut p = ready_top + (back_end - ready_top) * s;
            p.y = ready_top.y + h * ease(s);
            p
        } else if k <= tl.approach {
            let tau = (k - tl.fwd) as f64 * dt;
            back_end + dir * (v0 * tau + accel * tau * tau / 2.0)
        } else if k <= tl.approach_end {
            contact_top + dir * (v * (k as f64 - tl.contact as f64) * dt)
        } else if k <= tl.follow_end {
            let tau = (k - tl.approach_end) as f64 * dt;
            approach_end + dir * (v * tau - v * tau * tau / (2.0 * follow_t))
        } else if k <= tl.pause_end {
            follow_end
        } else {
            let s = (k - tl.pause_end) as f64 / (tl.return_end - tl.pause_end) as f64;
            follow_end + (ready_top - follow_end) * ease(s)
        }
    };

    let poses: Vec<Pose> = (0..=tl.last)
        .map(|k| rig.pose(offsets(k), roll, top_at(k)))
        .collect();

    let gap = |k: usize| (poses[k].middle - poses[k].shuttle_hand).norm();
    let trend = [
        (tl.back, tl.fwd, 1.0),
        (tl.fwd, tl.contact, -1.0),
        (tl.contact, tl.contact + 3, 1.0),
    ];
    for (from, to, sign) in trend {
        if let Some(k) = (from + 1..=to).find(|&k| sign * (gap(k) - gap(k - 1)) <= 0.0) {
            return Err(SynthError::Infeasible(format!(
                "racket-to-shuttle-hand distance is not monotone at swing frame {}",
                k - tl.back
            )));
        }
    }

    let at_fwd = &poses[tl.fwd];
    let racket_shuttle_deg = (at_fwd.top - at_fwd.bottom)
        .angle(&(at_fwd.shuttle_hand - at_fwd.wrist()))
        .to_degrees();
    Ok(Built {
        truth: Some(ServeGroundTruth {
            backswing_start_frame: tl.back,
            forward_start_frame: tl.fwd,
            contact_frame: tl.contact,
            contact_time: tl.contact as f64 * dt,
            pitch_deg: serve.pitch_deg,
            height_delta_m: h,
            speed_mps: v,
            wrist_change_deg: serve.wrist_change_deg,
            elbow_change_deg: serve.elbow_change_deg,
            shoulder_change_deg: serve.shoulder_change_deg,
            racket_shuttle_deg,
        }),
        poses,
    })
}

fn mirror(p: Vec3) -> Vec3 {
    Vec3::new(-p.x, p.y, p.z)
}

fn marker_frame(pose: &Pose, t: f64, handedness: Handedness) -> MarkerFrame {
    let (pose, side) = match handedness {
        Handedness::Right => (*pose, pose.side),
        Handedness::Left => {
            // The side marker sits on the opposite rim so the face normal keeps
            // its orientation after mirroring.
            let m = |p: Vec3| mirror(p);
            let side = m(pose.middle) * 2.0 - m(pose.side);
            (
                Pose {
                    shoulder: m(pose.shoulder),
                    elbow: m(pose.elbow),
                    wra: m(pose.wra),
                    wrb: m(pose.wrb),
                    finger: m(pose.finger),
                    top: m(pose.top),
                    bottom: m(pose.bottom),
                    side: m(pose.side),
                    middle: m(pose.middle),
                    off_shoulder: m(pose.off_shoulder),
                    off_elbow: m(pose.off_elbow),
                    off_wra: m(pose.off_wra),
                    off_wrb: m(pose.off_wrb),
                    shuttle_hand: m(pose.shuttle_hand),
                },
                side,
            )
        }
    };
    let d = handedness.dominant_prefix();
    let n = handedness.shuttle_prefix();
    MarkerFrame::new(t)
        .with(&format!("{d}SHO"), Some(pose.shoulder))
        .with(&format!("{d}ELB"), Some(pose.elbow))
        .with(&format!("{d}WRA"), Some(pose.wra))
        .with(&format!("{d}WRB"), Some(pose.wrb))
        .with(&format!("{d}FIN"), Some(pose.finger))
        .with(&format!("{n}SHO"), Some(pose.off_shoulder))
        .with(&format!("{n}ELB"), Some(pose.off_elbow))
        .with(&format!("{n}WRA"), Some(pose.off_wra))
        .with(&format!("{n}WRB"), Some(pose.off_wrb))
        .with(&format!("{n}FIN"), Some(pose.shuttle_hand))
        .with(RACKET_TOP, Some(pose.top))
        .with(RACKET_BOTTOM, Some(pose.bottom))
        .with(RACKET_SIDE, Some(side))
        .with(RACKET_MIDDLE, Some(pose.middle))
}

/// One serve: ready hold, swing, follow-through, return and settle.
pub fn synthesize_service(session: &SessionParams, serve: &ServeParams) -> Result<Recording, SynthError> {
    synthesize_session(session, std::slice::from_ref(serve))
}

/// Serves back to back on one timeline. Ground truth frame indices are
/// absolute.
pub fn synthesize_session(session: &SessionParams, serves: &[ServeParams]) -> Result<Recording, SynthError> {
    let rig = Rig::new(&session.guidance)?;
    let mut frames = Vec::new();
    let mut truth = Vec::new();
    for serve in serves {
        let base = frames.len();
        let built = build_serve(&rig, session, serve)?;
        if let Some(mut gt) = built.truth {
            gt.backswing_start_frame += base;
            gt.forward_start_frame += base;
            gt.contact_frame += base;
            gt.contact_time = gt.contact_frame as f64 / session.rate_hz;
            truth.push(gt);
        }
        for (k, pose) in built.poses.iter().enumerate() {
            let t = (base + k) as f64 / session.rate_hz;
            frames.push(marker_frame(pose, t, session.handedness));
        }
    }
    if frames.is_empty() {
        return Err(param("no serves requested"));
    }
    let mut rec = Recording::new(frames, session.rate_hz, session.handedness)
        .map_err(|e| param(e.to_string()))?;
    rec.metadata.insert("source".into(), "synthesized".into());
    rec.metadata.insert("serves".into(), serves.len().to_string());
    rec.ground_truth = truth;
    Ok(rec)
}
