//! Trial labelling, session aggregation and the between-session statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::fsm::{ServeOutcome, ServiceRecord};
use crate::kinetics::ServiceSummary;
use crate::model::Variable;
use crate::stats::{mean, quantile_sorted, sample_sd};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("jitter detection needs at least 3 values, got {0}")]
    SeriesTooShort(usize),
    #[error("session has {available} valid trials, {requested} requested (short by {})", requested - available)]
    Shortfall { requested: usize, available: usize },
    #[error("paired samples need equal lengths of at least 2 (got {a} and {b})")]
    Pairing { a: usize, b: usize },
    #[error("paired differences have zero variance")]
    DegenerateVariance,
    #[error("regression needs at least 2 points of equal length (got {t} and {y})")]
    RegressionLength { t: usize, y: usize },
    #[error("regression predictor is constant")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialLabel {
    Valid,
    Jitter,
    LostTracking,
}

impl TrialLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialLabel::Valid => "valid",
            TrialLabel::Jitter => "jitter",
            TrialLabel::LostTracking => "lost_tracking",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterConfig {
    /// Allowed turning points in wrist/elbow/shoulder angles over the swing.
    pub joint_max_extrema: usize,
    /// Allowed turning points in pitch and speed over the forward swing.
    pub forward_max_extrema: usize,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            joint_max_extrema: 3,
            forward_max_extrema: 2,
        }
    }
}

fn moving_average3(series: &[f64]) -> Vec<f64> {
    series.windows(3).map(|w| (w[0] + w[1] + w[2]) / 3.0).collect()
}

/// Turning points of the 3-point moving average. Steps smaller than 1e-9 of
/// the smoothed range count as flat, so plateaus carrying rounding noise add
/// nothing.
pub fn count_extrema(series: &[f64]) -> Result<usize, AnalyticsError> {
    if series.len() < 3 {
        return Err(AnalyticsError::SeriesTooShort(series.len()));
    }
    let smooth = moving_average3(series);
    let (lo, hi) = smooth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let flat = 1e-9 * (hi - lo);
    let mut count = 0;
    let mut last_sign = 0.0;
    for w in smooth.windows(2) {
        let d = w[1] - w[0];
        if d.abs() <= flat {
            continue;
        }
        let sign = d.signum();
        if last_sign != 0.0 && sign != last_sign {
            count += 1;
        }
        last_sign = sign;
    }
    Ok(count)
}

pub fn detect_jitter(series: &[f64], max_extrema: usize) -> Result<bool, AnalyticsError> {
    Ok(count_extrema(series)? > max_extrema)
}

fn jittery(series: &[f64], max_extrema: usize) -> bool {
    series.len() >= 3 && count_extrema(series).is_ok_and(|n| n > max_extrema)
}

/// A record that never produced kinetic samples is labelled lost tracking.
pub fn label_trial(record: &ServiceRecord, cfg: &JitterConfig) -> TrialLabel {
    let ServeOutcome::Completed { samples, .. } = &record.outcome else {
        return TrialLabel::LostTracking;
    };
    let end = record.contact.unwrap_or(record.frames.len() - 1);
    if record.frames[record.backswing_start..=end]
        .iter()
        .any(|f| !f.complete())
    {
        return TrialLabel::LostTracking;
    }
    let joints: [fn(&crate::kinetics::KineticSample) -> f64; 3] =
        [|s| s.wrist_deg, |s| s.elbow_deg, |s| s.shoulder_deg];
    if joints.iter().any(|get| {
        let series: Vec<f64> = samples.iter().map(get).collect();
        jittery(&series, cfg.joint_max_extrema)
    }) {
        return TrialLabel::Jitter;
    }
    let fwd = record
        .forward_start
        .map_or(0, |f| f - record.backswing_start)
        .min(samples.len());
    let forward = &samples[fwd..];
    let pitch: Vec<f64> = forward.iter().map(|s| s.pitch_deg).collect();
    let speed: Vec<f64> = forward.iter().map(|s| s.speed_mps).collect();
    if jittery(&pitch, cfg.forward_max_extrema) || jittery(&speed, cfg.forward_max_extrema) {
        return TrialLabel::Jitter;
    }
    TrialLabel::Valid
}

/// One labelled serve; `summary` is present whenever kinetics were computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub label: TrialLabel,
    pub contact_time: Option<f64>,
    pub summary: Option<ServiceSummary>,
}

impl Trial {
    pub fn from_record(index: usize, record: &ServiceRecord, cfg: &JitterConfig) -> Self {
        Self {
            index,
            label: label_trial(record, cfg),
            contact_time: record.contact_time(),
            summary: record.summary().cloned(),
        }
    }

    pub fn valid_summary(&self) -> Option<&ServiceSummary> {
        self.summary.as_ref().filter(|_| self.label == TrialLabel::Valid)
    }
}

pub fn label_records(records: &[ServiceRecord], cfg: &JitterConfig) -> Vec<Trial> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| Trial::from_record(i, r, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean: mean(values),
            sd: sample_sd(values),
            median: quantile_sorted(&sorted, 0.5),
            q1: quantile_sorted(&sorted, 0.25),
            q3: quantile_sorted(&sorted, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub n: usize,
    /// Per variable, in [`Variable::ALL`] order.
    pub variables: Vec<(Variable, Distribution)>,
    /// Values behind each distribution, same order.
    pub values: Vec<Vec<f64>>,
}

impl SessionStats {
    pub fn get(&self, v: Variable) -> &Distribution {
        &self.variables.iter().find(|(x, _)| *x == v).expect("all variables present").1
    }

    pub fn values_of(&self, v: Variable) -> &[f64] {
        let i = Variable::ALL.iter().position(|x| *x == v).expect("known variable");
        &self.values[i]
    }
}

/// Statistics over the first `n` valid trials in arrival order.
pub fn session_summary(trials: &[Trial], n: usize) -> Result<SessionStats, AnalyticsError> {
    let used: Vec<&ServiceSummary> = trials.iter().filter_map(Trial::valid_summary).take(n).collect();
    if used.len() < n || n == 0 {
        return Err(AnalyticsError::Shortfall {
            requested: n.max(1),
            available: used.len(),
        });
    }
    let values: Vec<Vec<f64>> = Variable::ALL
        .iter()
        .map(|v| used.iter().map(|s| v.of(s)).collect())
        .collect();
    Ok(SessionStats {
        n,
        variables: Variable::ALL
            .iter()
            .zip(&values)
            .map(|(v, xs)| (*v, Distribution::of(xs)))
            .collect(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    pub p_two_tailed: f64,
}

impl TTestResult {
    /// "*" below 0.05, "**" below 0.01.
    pub fn stars(&self) -> &'static str {
        if self.p_two_tailed < 0.01 {
            "**"
        } else if self.p_two_tailed < 0.05 {
            "*"
        } else {
            ""
        }
    }
}

pub fn two_tailed_p(t: f64, df: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df is positive");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// Paired two-tailed t-test on `a - b`. Identical samples give t = 0, p = 1.
/// Differences whose spread is below 1e-12 of their magnitude count as
/// constant.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, AnalyticsError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(AnalyticsError::Pairing { a: a.len(), b: b.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = d.len() - 1;
    if d.iter().all(|&x| x == 0.0) {
        return Ok(TTestResult { t: 0.0, df, p_two_tailed: 1.0 });
    }
    let sd = sample_sd(&d);
    let scale = d.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if sd <= 1e-12 * scale {
        return Err(AnalyticsError::DegenerateVariance);
    }
    let t = mean(&d) / (sd / (d.len() as f64).sqrt());
    Ok(TTestResult { t, df, p_two_tailed: two_tailed_p(t, df) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// 1 when `y` has no variance.
    pub r_squared: f64,
}

impl RegressionFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

pub fn linear_regression(t: &[f64], y: &[f64]) -> Result<RegressionFit, AnalyticsError> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(AnalyticsError::RegressionLength { t: t.len(), y: y.len() });
    }
    let (mt, my) = (mean(t), mean(y));
    let stt: f64 = t.iter().map(|x| (x - mt) * (x - mt)).sum();
    if stt == 0.0 {
        return Err(AnalyticsError::Singular);
    }
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let sse: f64 = t
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(RegressionFit { slope, intercept, r_squared })
}

/// Paired tests between every pair of sessions for one variable, upper
/// triangle only (`i < j`). Sessions are paired over their common length.
pub fn pairwise_tests(sessions: &[SessionStats], v: Variable) -> Vec<(usize, usize, Result<TTestResult, AnalyticsError>)> {
    let mut out = Vec::new();
    for i in 0..sessions.len() {
        for j in i + 1..sessions.len() {
            let (a, b) = (sessions[i].values_of(v), sessions[j].values_of(v));
            let n = a.len().min(b.len());
            out.push((i, j, paired_t_test(&a[..n], &b[..n])));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ramp_and_constant_have_no_jitter() {
        let ramp: Vec<f64> = (0..20).map(f64::from).collect();
        assert_eq!(count_extrema(&ramp).unwrap(), 0);
        assert!(!detect_jitter(&[4.0; 10], 0).unwrap());
    }

    #[test]
    fn three_sine_periods_have_six_turning_points() {
        let n = 60;
        let xs: Vec<f64> = (0..n)
            .map(|i| (6.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).sin())
            .collect();
        assert_eq!(count_extrema(&xs).unwrap(), 6);
        assert!(detect_jitter(&xs, 2).unwrap());
        assert!(!detect_jitter(&xs, 6).unwrap());
    }

    #[test]
    fn single_point_spikes_are_smoothed_into_one_bump() {
        let xs = [0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0];
        assert_eq!(count_extrema(&xs).unwrap(), 1);
    }

    #[test]
    fn short_series_is_an_error() {
        assert_eq!(detect_jitter(&[1.0, 2.0], 0), Err(AnalyticsError::SeriesTooShort(2)));
    }

    #[test]
    fn t_test_reference_case() {
        let d = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t_test(&d, &[0.0; 5]).unwrap();
        // mean 3, sd sqrt(2.5)
        assert_abs_diff_eq!(r.t, 3.0 / (2.5_f64.sqrt() / 5.0_f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(r.t, 4.2426, epsilon = 1e-4);
        assert_eq!(r.df, 4);
        assert_abs_diff_eq!(r.p_two_tailed, 0.0132, epsilon = 1e-4);
        assert_eq!(r.stars(), "*");
    }

    #[test]
    fn t_test_identical_and_degenerate() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(
            paired_t_test(&a, &a).unwrap(),
            TTestResult { t: 0.0, df: 2, p_two_tailed: 1.0 }
        );
        assert_eq!(
            paired_t_test(&[2.0, 3.0], &[1.0, 2.0]),
            Err(AnalyticsError::DegenerateVariance)
        );
        assert!(matches!(paired_t_test(&[1.0], &[2.0]), Err(AnalyticsError::Pairing { .. })));
        assert!(matches!(paired_t_test(&[1.0, 2.0], &[2.0]), Err(AnalyticsError::Pairing { .. })));
    }

    #[test]
    fn regression_on_a_line() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = linear_regression(&t, &y).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn regression_constant_y_and_constant_t() {
        let fit = linear_regression(&[0.0, 1.0, 2.0], &[5.0; 3]).unwrap();
        assert_eq!((fit.slope, fit.intercept, fit.r_squared), (0.0, 5.0, 1.0));
        assert_eq!(linear_regression(&[1.0; 3], &[0.0, 1.0, 2.0]), Err(AnalyticsError::Singular));
    }

    fn trial(label: TrialLabel, pitch: f64) -> Trial {
        Trial {
            index: 0,
            label,
            contact_time: None,
            summary: Some(ServiceSummary {
                pitch_at_contact_deg: pitch,
                speed_at_contact_mps: 5.0,
                height_trace: vec![],
                height_delta_m: 0.1,
                max_abs_height_delta_m: 0.1,
                wrist_change_deg: 8.0,
                elbow_change_deg: 2.0,
                shoulder_change_deg: 1.0,
                backswing_end_racket_shuttle_angle_deg: 60.0,
            }),
        }
    }

    #[test]
    fn identical_trials_have_zero_spread() {
        let trials = vec![trial(TrialLabel::Valid, 20.0); 12];
        let s = session_summary(&trials, 12).unwrap();
        assert_eq!(s.n, 12);
        assert_eq!(s.get(Variable::Pitch).mean, 20.0);
        assert_eq!(s.get(Variable::Pitch).sd, 0.0);
    }

    #[test]
    fn first_n_valid_only() {
        let mut trials: Vec<Trial> = (0..14).map(|i| trial(TrialLabel::Valid, i as f64)).collect();
        trials.insert(3, trial(TrialLabel::Jitter, 1000.0));
        trials.insert(7, trial(TrialLabel::LostTracking, -1000.0));
        let s = session_summary(&trials, 12).unwrap();
        assert_eq!(s.values_of(Variable::Pitch), (0..12).map(f64::from).collect::<Vec<_>>());
        assert_eq!(s.get(Variable::Pitch).median, 5.5);
    }

    #[test]
    fn shortfall_names_the_gap() {
        let trials = vec![trial(TrialLabel::Valid, 1.0); 10];
        let err = session_summary(&trials, 12).unwrap_err();
        assert_eq!(err, AnalyticsError::Shortfall { requested: 12, available: 10 });
        assert!(err.to_string().contains("short by 2"));
    }

    proptest! {
        #[test]
        fn jitter_count_is_affine_invariant(
            xs in prop::collection::vec(-10.0..10.0f64, 3..50),
            a in 0.01..100.0f64,
            b in -100.0..100.0f64,
        ) {
            let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            prop_assert_eq!(count_extrema(&xs).unwrap(), count_extrema(&ys).unwrap());
        }

        #[test]
        fn t_test_is_antisymmetric(
            pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..30),
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let (Ok(ab), Ok(ba)) = (paired_t_test(&a, &b), paired_t_test(&b, &a)) {
                prop_assert!((ab.t + ba.t).abs() <= 1e-9 * ab.t.abs().max(1.0));
                prop_assert!((ab.p_two_tailed - ba.p_two_tailed).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab.p_two_tailed));
            }
        }

        #[test]
        fn p_falls_as_t_grows(t in 0.0..20.0f64, dt in 0.01..5.0f64, df in 1usize..60) {
            prop_assert!(two_tailed_p(t + dt, df) <= two_tailed_p(t, df));
        }

        #[test]
        fn regression_satisfies_normal_equations(
            pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..30),
        ) {
            let (t, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let Ok(fit) = linear_regression(&t, &y) else { return Ok(()); };
            let r: Vec<f64> = t.iter().zip(&y).map(|(a, b)| b - fit.predict(*a)).collect();
            let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max) * t.len() as f64;
            prop_assert!(r.iter().sum::<f64>().abs() <= 1e-9 * scale);
            let tscale = scale * t.iter().map(|v| v.abs()).fold(1.0, f64::max);
            prop_assert!(r.iter().zip(&t).map(|(e, a)| e * a).sum::<f64>().abs() <= 1e-9 * tscale);
            prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        }

        #[test]
        fn summary_ignores_trials_after_the_nth_valid(
            pitches in prop::collection::vec(0.0..40.0f64, 5..20),
            extra in prop::collection::vec(0.0..40.0f64, 0..10),
        ) {
            let head: Vec<Trial> = pitches.iter().map(|p| trial(TrialLabel::Valid, *p)).collect();
            let mut all = head.clone();
            all.extend(extra.iter().map(|p| trial(TrialLabel::Valid, *p)));
            let n = head.len();
            prop_assert_eq!(session_summary(&head, n).unwrap(), session_summary(&all, n).unwrap());
        }
    }
}
