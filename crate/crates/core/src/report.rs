//! Batch analysis reports: per-trial, per-session and pairwise CSV tables plus
//! a plain-text summary.

use std::fmt::Write as _;

use crate::analytics::{pairwise_tests, AnalyticsError, SessionStats, TTestResult};
use crate::feedback::{FeedbackReport, Status};
use crate::model::Variable;
use crate::session::{SessionStatsPayload, ServeEvaluation};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionAnalysis {
    pub name: String,
    pub evaluations: Vec<ServeEvaluation>,
    pub stats: SessionStatsPayload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRow {
    pub variable: Variable,
    pub a: usize,
    pub b: usize,
    pub result: Result<TTestResult, AnalyticsError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub sessions: Vec<SessionAnalysis>,
    pub pairwise: Vec<PairwiseRow>,
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn status(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
    }
}

fn statuses(r: &FeedbackReport) -> [&'static str; 6] {
    [
        status(r.pitch.status),
        if r.height_passed() { "pass" } else { "fail" },
        status(r.speed.status),
        status(r.wrist.status),
        status(r.elbow.status),
        status(r.shoulder.status),
    ]
}

impl AnalysisReport {
    /// Pairwise tests use each session's stats values, so only sessions with
    /// statistics take part.
    pub fn new(sessions: Vec<SessionAnalysis>) -> Self {
        let with_stats: Vec<(usize, SessionStats)> = sessions
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.stats.stats.clone().map(|st| (i, st)))
            .collect();
        let stats: Vec<SessionStats> = with_stats.iter().map(|(_, s)| s.clone()).collect();
        let mut pairwise = Vec::new();
        for v in Variable::ALL {
            for (i, j, result) in pairwise_tests(&stats, v) {
                pairwise.push(PairwiseRow {
                    variable: v,
                    a: with_stats[i].0,
                    b: with_stats[j].0,
                    result,
                });
            }
        }
        Self { sessions, pairwise }
    }

    pub fn trials_csv(&self) -> String {
        let mut out = String::from("session,serve,label,pattern,contact_t");
        for v in Variable::ALL {
            write!(out, ",{}", v.name()).unwrap();
        }
        for v in Variable::ALL {
            write!(out, ",{}_status", v.name()).unwrap();
        }
        out.push_str(",all_pass\n");
        for s in &self.sessions {
            for e in &s.evaluations {
                let mut row = vec![
                    s.name.clone(),
                    e.serve.index.to_string(),
                    e.label.as_str().to_string(),
                    e.pattern.map(|p| p.to_string()).unwrap_or_default(),
                    e.contact_time.map(num).unwrap_or_default(),
                ];
                for v in Variable::ALL {
                    row.push(e.summary.as_ref().map(|x| num(v.of(x))).unwrap_or_default());
                }
                match &e.report {
                    Some(r) => {
                        row.extend(statuses(r).iter().map(|x| x.to_string()));
                        row.push(r.all_passed().to_string());
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 7)),
                }
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn sessions_csv(&self) -> String {
        let mut out = String::from("session,serves,valid,jitter,lost_tracking,n,variable,mean,sd,median,q1,q3\n");
        for s in &self.sessions {
            let p = &s.stats;
            let head = format!("{},{},{},{},{},{}", s.name, p.serves, p.valid, p.jitter, p.lost_tracking, p.n);
            match &p.stats {
                Some(st) => {
                    for (v, d) in &st.variables {
                        writeln!(
                            out,
                            "{head},{},{},{},{},{},{}",
                            v.name(),
                            num(d.mean),
                            num(d.sd),
                            num(d.median),
                            num(d.q1),
                            num(d.q3)
                        )
                        .unwrap();
                    }
                }
                None => writeln!(out, "{head},,,,,,").unwrap(),
            }
        }
        out
    }

    pub fn pairwise_csv(&self) -> String {
        let mut out = String::from("variable,session_a,session_b,t,df,p,significance\n");
        for row in &self.pairwise {
            let (a, b) = (&self.sessions[row.a].name, &self.sessions[row.b].name);
            match &row.result {
                Ok(t) => writeln!(
                    out,
                    "{},{a},{b},{},{},{},{}",
                    row.variable.name(),
                    num(t.t),
                    t.df,
                    num(t.p_two_tailed),
                    t.stars()
                )
                .unwrap(),
                Err(_) => writeln!(out, "{},{a},{b},,,,", row.variable.name()).unwrap(),
            }
        }
        out
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for s in &self.sessions {
            let p = &s.stats;
            writeln!(
                out,
                "session {}: {} serves, {} valid, {} jitter, {} lost tracking; statistics over {} valid",
                s.name, p.serves, p.valid, p.jitter, p.lost_tracking, p.n
            )
            .unwrap();
        }
        out.push('\n');
        write!(out, "{:<24}", "variable").unwrap();
        for s in &self.sessions {
            write!(out, " {:>24}", s.name).unwrap();
        }
        out.push('\n');
        for v in Variable::ALL {
            write!(out, "{:<24}", format!("{} ({})", v.name(), v.unit())).unwrap();
            for s in &self.sessions {
                let cell = s
                    .stats
                    .stats
                    .as_ref()
                    .map(|st| {
                        let d = st.get(v);
                        format!("{:.3} ± {:.3}", d.mean, d.sd)
                    })
                    .unwrap_or_else(|| "-".into());
                write!(out, " {cell:>24}").unwrap();
            }
            out.push('\n');
        }
        let significant: Vec<&PairwiseRow> = self
            .pairwise
            .iter()
            .filter(|r| r.result.as_ref().is_ok_and(|t| !t.stars().is_empty()))
            .collect();
        if !self.pairwise.is_empty() {
            out.push_str("\npaired t-tests (* p < 0.05, ** p < 0.01)\n");
            if significant.is_empty() {
                out.push_str("  no significant differences\n");
            }
            for r in significant {
                let t = r.result.as_ref().unwrap();
                writeln!(
                    out,
                    "  {:<16} {} vs {}: t = {:.3}, df = {}, p = {:.4} {}",
                    r.variable.name(),
                    self.sessions[r.a].name,
                    self.sessions[r.b].name,
                    t.t,
                    t.df,
                    t.p_two_tailed,
                    t.stars()
                )
                .unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;
    use crate::mocap::synth::{synthesize_session, ServeParams, SessionParams};
    use crate::model::{builtin_model, Pattern};
    use crate::session::{evaluate_frames, session_stats};

    fn analysis(name: &str, pitch: f64, n: usize) -> SessionAnalysis {
        let serves: Vec<ServeParams> = (0..n)
            .map(|i| ServeParams {
                pitch_deg: pitch + i as f64,
                ..ServeParams::default()
            })
            .collect();
        let frames = synthesize_session(&SessionParams::default(), &serves)
            .unwrap()
            .skeleton_frames()
            .unwrap();
        let evaluations = evaluate_frames(name, &frames, &builtin_model(Pattern::WristOnly), &EngineConfig::default());
        let stats = session_stats(name, &evaluations, 12);
        SessionAnalysis { name: name.into(), evaluations, stats }
    }

    #[test]
    fn tables_have_one_row_per_item() {
        let report = AnalysisReport::new(vec![analysis("a", 15.0, 3), analysis("b", 20.0, 3)]);
        assert_eq!(report.trials_csv().lines().count(), 1 + 6);
        assert_eq!(report.sessions_csv().lines().count(), 1 + 12);
        assert_eq!(report.pairwise_csv().lines().count(), 1 + 6);
        assert!(report.trials_csv().lines().nth(1).unwrap().starts_with("a,1,valid,wrist_only,"));
    }

    #[test]
    fn shifted_pitch_is_significant() {
        let report = AnalysisReport::new(vec![analysis("a", 15.0, 3), analysis("b", 20.0, 3)]);
        let pitch = report
            .pairwise
            .iter()
            .find(|r| r.variable == Variable::Pitch)
            .unwrap();
        // constant difference of 5 degrees: zero variance
        assert_eq!(pitch.result, Err(AnalyticsError::DegenerateVariance));
        assert!(report.text().contains("pitch (deg)"));
    }

    #[test]
    fn report_is_reproducible() {
        let a = AnalysisReport::new(vec![analysis("a", 15.0, 2)]);
        let b = AnalysisReport::new(vec![analysis("a", 15.0, 2)]);
        assert_eq!(a.trials_csv(), b.trials_csv());
        assert_eq!(a.text(), b.text());
    }
}
