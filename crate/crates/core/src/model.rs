//! Expert model of a good backhand short service: per-variable mean and
//! standard deviation, plus the exertion pattern it describes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::ServiceSummary;
use crate::stats::{mean, remove_outliers_iqr, sample_sd};

/// Elbow/wrist change ratio at or above which a swing counts as using the
/// elbow as well as the wrist.
pub const DEFAULT_PATTERN_RATIO: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "deg")]
    Deg,
    #[serde(rename = "m")]
    M,
    #[serde(rename = "m/s")]
    MPerS,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Deg => "deg",
            Unit::M => "m",
            Unit::MPerS => "m/s",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub mean: f64,
    pub sd: f64,
    pub unit: Unit,
}

impl VariableStats {
    pub const fn new(mean: f64, sd: f64, unit: Unit) -> Self {
        Self { mean, sd, unit }
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.sd
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    WristOnly,
    ElbowWrist,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::WristOnly => "wrist_only",
            Pattern::ElbowWrist => "elbow_wrist",
        })
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wrist_only" | "wrist-only" => Ok(Pattern::WristOnly),
            "elbow_wrist" | "elbow-wrist" => Ok(Pattern::ElbowWrist),
            other => Err(format!("unknown pattern `{other}`")),
        }
    }
}

/// The six summary variables the model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Pitch,
    HeightDiff,
    Speed,
    WristChange,
    ElbowChange,
    ShoulderChange,
}

impl Variable {
    pub const ALL: [Variable; 6] = [
        Variable::Pitch,
        Variable::HeightDiff,
        Variable::Speed,
        Variable::WristChange,
        Variable::ElbowChange,
        Variable::ShoulderChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Pitch => "pitch",
            Variable::HeightDiff => "height_diff",
            Variable::Speed => "speed",
            Variable::WristChange => "wrist_change",
            Variable::ElbowChange => "elbow_change",
            Variable::ShoulderChange => "shoulder_change",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            Variable::HeightDiff => Unit::M,
            Variable::Speed => Unit::MPerS,
            _ => Unit::Deg,
        }
    }

    /// Value of this variable in one serve's summary. The height variable is
    /// the signed peak excursion.
    pub fn of(self, s: &ServiceSummary) -> f64 {
        match self {
            Variable::Pitch => s.pitch_at_contact_deg,
            Variable::HeightDiff => s.height_delta_m,
            Variable::Speed => s.speed_at_contact_mps,
            Variable::WristChange => s.wrist_change_deg,
            Variable::ElbowChange => s.elbow_change_deg,
            Variable::ShoulderChange => s.shoulder_change_deg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertModel {
    pub pattern: Pattern,
    pub pitch: VariableStats,
    pub height_diff: VariableStats,
    pub speed: VariableStats,
    pub wrist_change: VariableStats,
    pub elbow_change: VariableStats,
    pub shoulder_change: VariableStats,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{variable}: only {remaining} value(s) left after outlier removal, need 2")]
    TooFew {
        variable: &'static str,
        remaining: usize,
    },
    #[error("wrist change must be positive, got {0}")]
    Parameter(f64),
    #[error("model document: {0}")]
    Document(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn builtin_model(pattern: Pattern) -> ExpertModel {
    let elbow = match pattern {
        Pattern::WristOnly => VariableStats::new(4.97, 0.96, Unit::Deg),
        Pattern::ElbowWrist => VariableStats::new(9.10, 3.04, Unit::Deg),
    };
    ExpertModel {
        pattern,
        pitch: VariableStats::new(21.60, 7.95, Unit::Deg),
        height_diff: VariableStats::new(0.11, 0.07, Unit::M),
        speed: VariableStats::new(5.41, 0.41, Unit::MPerS),
        wrist_change: VariableStats::new(9.96, 3.93, Unit::Deg),
        elbow_change: elbow,
        shoulder_change: VariableStats::new(1.48, 0.87, Unit::Deg),
    }
}

impl ExpertModel {
    pub fn get(&self, v: Variable) -> &VariableStats {
        match v {
            Variable::Pitch => &self.pitch,
            Variable::HeightDiff => &self.height_diff,
            Variable::Speed => &self.speed,
            Variable::WristChange => &self.wrist_change,
            Variable::ElbowChange => &self.elbow_change,
            Variable::ShoulderChange => &self.shoulder_change,
        }
    }

    fn get_mut(&mut self, v: Variable) -> &mut VariableStats {
        match v {
            Variable::Pitch => &mut self.pitch,
            Variable::HeightDiff => &mut self.height_diff,
            Variable::Speed => &mut self.speed,
            Variable::WristChange => &mut self.wrist_change,
            Variable::ElbowChange => &mut self.elbow_change,
            Variable::ShoulderChange => &mut self.shoulder_change,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for v in Variable::ALL {
            let s = self.get(v);
            if !(s.mean.is_finite() && s.sd.is_finite() && s.sd >= 0.0) {
                return Err(ModelError::Document(format!(
                    "{}: mean must be finite and sd finite and non-negative",
                    v.name()
                )));
            }
            if s.unit != v.unit() {
                return Err(ModelError::Document(format!(
                    "{}: unit must be {}, got {}",
                    v.name(),
                    v.unit(),
                    s.unit
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let model: ExpertModel =
            toml::from_str(text).map_err(|e| ModelError::Document(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Resolves a CLI model argument: a pattern name selects the built-in
    /// model, anything else is read as a model document path.
    pub fn resolve(arg: &str) -> Result<Self, ModelError> {
        match arg.parse::<Pattern>() {
            Ok(p) => Ok(builtin_model(p)),
            Err(_) => Self::load(Path::new(arg)),
        }
    }
}

/// Fits a model variable by variable: outliers are removed independently per
/// variable, then the sample mean and SD of the survivors are taken.
pub fn fit_model(summaries: &[ServiceSummary], pattern: Pattern) -> Result<ExpertModel, ModelError> {
    let mut model = builtin_model(pattern);
    for v in Variable::ALL {
        let values: Vec<f64> = summaries.iter().map(|s| v.of(s)).collect();
        let kept = remove_outliers_iqr(&values);
        if kept.len() < 2 {
            return Err(ModelError::TooFew {
                variable: v.name(),
                remaining: kept.len(),
            });
        }
        *model.get_mut(v) = VariableStats::new(mean(&kept), sample_sd(&kept), v.unit());
    }
    Ok(model)
}

pub fn classify_pattern(wrist_change: f64, elbow_change: f64) -> Result<Pattern, ModelError> {
    classify_pattern_with(wrist_change, elbow_change, DEFAULT_PATTERN_RATIO)
}

pub fn classify_pattern_with(
    wrist_change: f64,
    elbow_change: f64,
    ratio: f64,
) -> Result<Pattern, ModelError> {
    if !(wrist_change > 0.0) {
        return Err(ModelError::Parameter(wrist_change));
    }
    Ok(if elbow_change / wrist_change >= ratio {
        Pattern::ElbowWrist
    } else {
        Pattern::WristOnly
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn summary(values: [f64; 6]) -> ServiceSummary {
        ServiceSummary {
            pitch_at_contact_deg: values[0],
            speed_at_contact_mps: values[2],
            height_trace: vec![(0.0, values[1])],
            height_delta_m: values[1],
            max_abs_height_delta_m: values[1].abs(),
            wrist_change_deg: values[3],
            elbow_change_deg: values[4],
            shoulder_change_deg: values[5],
            backswing_end_racket_shuttle_angle_deg: 40.0,
        }
    }

    #[test]
    fn builtin_values() {
        let w = builtin_model(Pattern::WristOnly);
        assert_eq!(w.speed.mean, 5.41);
        assert_eq!(w.elbow_change, VariableStats::new(4.97, 0.96, Unit::Deg));
        let e = builtin_model(Pattern::ElbowWrist);
        assert_eq!(e.elbow_change.mean, 9.10);
        assert_eq!(e.elbow_change.sd, 3.04);
        assert_eq!(w.shoulder_change, e.shoulder_change);
        assert_eq!(e.shoulder_change, VariableStats::new(1.48, 0.87, Unit::Deg));
        assert_eq!(w.pitch, e.pitch);
        assert_eq!(w.height_diff, VariableStats::new(0.11, 0.07, Unit::M));
        assert_eq!(w.wrist_change, VariableStats::new(9.96, 3.93, Unit::Deg));
    }

    #[test]
    fn toml_round_trip() {
        for p in [Pattern::WristOnly, Pattern::ElbowWrist] {
            let m = builtin_model(p);
            assert_eq!(ExpertModel::from_toml(&m.to_toml()).unwrap(), m);
        }
    }

    #[test]
    fn document_rejects_negative_sd_and_wrong_unit() {
        let text = builtin_model(Pattern::WristOnly)
            .to_toml()
            .replace("sd = 0.41", "sd = -0.41");
        assert!(ExpertModel::from_toml(&text).is_err());
        let text = builtin_model(Pattern::WristOnly)
            .to_toml()
            .replace("unit = \"m/s\"", "unit = \"deg\"");
        assert!(ExpertModel::from_toml(&text).is_err());
    }

    #[test]
    fn two_identical_summaries_fit_exactly() {
        let s = summary([20.0, 0.1, 5.0, 10.0, 4.0, 1.5]);
        let m = fit_model(&[s.clone(), s], Pattern::WristOnly).unwrap();
        assert_eq!(m.pitch, VariableStats::new(20.0, 0.0, Unit::Deg));
        assert_eq!(m.speed.sd, 0.0);
        assert_eq!(m.shoulder_change.mean, 1.5);
    }

    #[test]
    fn too_few_summaries_is_an_error() {
        let s = summary([20.0, 0.1, 5.0, 10.0, 4.0, 1.5]);
        assert!(matches!(
            fit_model(&[s], Pattern::WristOnly),
            Err(ModelError::TooFew { remaining: 1, .. })
        ));
    }

    #[test]
    fn pattern_examples() {
        assert_eq!(classify_pattern(9.96, 9.10).unwrap(), Pattern::ElbowWrist);
        assert_eq!(classify_pattern(9.96, 4.97).unwrap(), Pattern::WristOnly);
        assert_eq!(classify_pattern(5.0, 4.8).unwrap(), Pattern::ElbowWrist);
        assert_eq!(classify_pattern(10.0, 6.0).unwrap(), Pattern::ElbowWrist);
        assert!(classify_pattern(0.0, 1.0).is_err());
        assert!(classify_pattern(-1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn pattern_is_scale_invariant(w in 0.1..50.0f64, e in 0.0..50.0f64, k in 0.01..100.0f64) {
            prop_assume!(((e / w) - DEFAULT_PATTERN_RATIO).abs() > 1e-9);
            prop_assert_eq!(classify_pattern(w, e).unwrap(), classify_pattern(w * k, e * k).unwrap());
        }
    }
}
