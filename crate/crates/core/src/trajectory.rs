//! Shuttle trajectory classes: landing, apex and net clearance.
//!
//! Court coordinates are metres on the floor plane: `z` runs along the serve
//! direction with the net at `net_z`, `x` runs across the court. The target
//! square sits in the corner formed by the centre line and the short service
//! line of the receiving court.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STRIPE_M: f64 = 0.02;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("shuttle did not clear the net (clearance {0} m)")]
    NotCleared(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("observation file: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CourtGeometry {
    pub net_z: f64,
    pub short_service_line_z: f64,
    /// Far edge of the valid service region.
    pub court_back_z: f64,
    pub center_x: f64,
    /// Side edge of the valid region; its sign picks the half of the court.
    pub side_x: f64,
    pub target_square_m: f64,
    /// Used when an observation carries no server position.
    pub server_z: f64,
}

impl Default for CourtGeometry {
    fn default() -> Self {
        Self {
            net_z: 0.0,
            short_service_line_z: 1.98,
            court_back_z: 5.94,
            center_x: 0.0,
            side_x: 3.05,
            target_square_m: 0.40,
            server_z: -2.2,
        }
    }
}

impl CourtGeometry {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let finite = [
            self.net_z,
            self.short_service_line_z,
            self.court_back_z,
            self.center_x,
            self.side_x,
            self.target_square_m,
            self.server_z,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(TrajectoryError::Parameter("court values must be finite".into()));
        }
        if !(self.net_z < self.short_service_line_z && self.short_service_line_z < self.court_back_z) {
            return Err(TrajectoryError::Parameter(
                "expected net_z < short_service_line_z < court_back_z".into(),
            ));
        }
        if self.side_x == self.center_x {
            return Err(TrajectoryError::Parameter("side_x must differ from center_x".into()));
        }
        let width = (self.side_x - self.center_x).abs();
        let depth = self.court_back_z - self.short_service_line_z;
        if !(self.target_square_m > 0.0 && self.target_square_m <= width.min(depth)) {
            return Err(TrajectoryError::Parameter(
                "target square must be positive and fit in the service court".into(),
            ));
        }
        if self.server_z == self.net_z {
            return Err(TrajectoryError::Parameter("server_z must differ from net_z".into()));
        }
        Ok(())
    }

    /// Signed distance across the court from the centre line toward `side_x`.
    fn across(&self, x: f64) -> f64 {
        (x - self.center_x) * (self.side_x - self.center_x).signum()
    }

    pub fn in_valid_region(&self, x: f64, z: f64) -> bool {
        let a = self.across(x);
        (0.0..=(self.side_x - self.center_x).abs()).contains(&a)
            && (self.short_service_line_z..=self.court_back_z).contains(&z)
    }

    pub fn in_target_square(&self, x: f64, z: f64) -> bool {
        let a = self.across(x);
        let s = self.target_square_m;
        (0.0..=s).contains(&a)
            && (self.short_service_line_z..=self.short_service_line_z + s).contains(&z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandingClass {
    Good,
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApexClass {
    Good,
    Bad,
}

pub fn classify_landing(x: f64, z: f64, g: &CourtGeometry) -> LandingClass {
    if g.in_target_square(x, z) {
        LandingClass::Good
    } else if g.in_valid_region(x, z) {
        LandingClass::In
    } else {
        LandingClass::Out
    }
}

/// Good only when the apex lies strictly between the server and the net.
pub fn classify_apex(apex_z: f64, net_z: f64, server_z: f64) -> ApexClass {
    let (lo, hi) = if server_z < net_z { (server_z, net_z) } else { (net_z, server_z) };
    if lo < apex_z && apex_z < hi {
        ApexClass::Good
    } else {
        ApexClass::Bad
    }
}

/// Index of the 2 cm stripe the clearance falls in. A clearance sitting on a
/// stripe edge belongs to the stripe above it.
pub fn quantize_clearance(h: f64) -> Result<u32, TrajectoryError> {
    if !(h >= 0.0) {
        return Err(TrajectoryError::NotCleared(h));
    }
    Ok((h / STRIPE_M + 1e-9).floor() as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraGeometry {
    pub shuttle_to_board_m: f64,
    pub camera_to_board_m: f64,
}

impl Default for CameraGeometry {
    fn default() -> Self {
        Self {
            shuttle_to_board_m: 1.0,
            camera_to_board_m: 3.0,
        }
    }
}

/// Largest parallax error of a clearance read off the stripe board, by
/// similar triangles between camera, shuttle and board.
pub fn clearance_error_bound(h_observed: f64, d_shuttle_to_board: f64, d_camera_to_board: f64) -> Result<f64, TrajectoryError> {
    if !(h_observed.is_finite() && 0.0 <= d_shuttle_to_board && d_shuttle_to_board < d_camera_to_board && d_camera_to_board.is_finite()) {
        return Err(TrajectoryError::Parameter(format!(
            "need 0 <= shuttle distance ({d_shuttle_to_board}) < camera distance ({d_camera_to_board})"
        )));
    }
    Ok(h_observed.abs() * d_shuttle_to_board / d_camera_to_board)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryObservation {
    pub landing_x: f64,
    pub landing_z: f64,
    pub apex_z: f64,
    pub clearance_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_z: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedShot {
    pub landing_x: f64,
    pub landing_z: f64,
    pub apex_z: f64,
    pub clearance_m: f64,
    pub landing_class: LandingClass,
    pub apex_class: ApexClass,
    /// Empty when the shuttle did not clear the net.
    pub stripe: Option<u32>,
    pub err_bound: f64,
}

pub fn classify(obs: &TrajectoryObservation, court: &CourtGeometry, camera: &CameraGeometry) -> Result<ClassifiedShot, TrajectoryError> {
    let server_z = obs.server_z.unwrap_or(court.server_z);
    Ok(ClassifiedShot {
        landing_x: obs.landing_x,
        landing_z: obs.landing_z,
        apex_z: obs.apex_z,
        clearance_m: obs.clearance_m,
        landing_class: classify_landing(obs.landing_x, obs.landing_z, court),
        apex_class: classify_apex(obs.apex_z, court.net_z, server_z),
        stripe: quantize_clearance(obs.clearance_m).ok(),
        err_bound: clearance_error_bound(obs.clearance_m, camera.shuttle_to_board_m, camera.camera_to_board_m)?,
    })
}

pub fn read_observations(input: impl Read) -> Result<Vec<TrajectoryObservation>, TrajectoryError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_classified(output: impl Write, shots: &[ClassifiedShot]) -> Result<(), TrajectoryError> {
    let mut writer = csv::Writer::from_writer(output);
    for shot in shots {
        writer.serialize(shot)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
