//! Plot-ready CSV reports over event logs: error probability over time,
//! progress through the number ranges, per-skill learned status, learning
//! paths, and temporal cluster ribbons. Every CSV has a header row and a
//! stable column order.

use std::collections::BTreeMap;

use crate::behavior::{estimate_chain, temporal_pipeline, StateMapping};
use crate::controller::learning_path;
use crate::events::{sessionize, Event, Session, DEFAULT_SESSION_GAP_MS};
use crate::knowledge::{init_beliefs, update_on_answer, SkillBeliefs, SkillParams};
use crate::screener::ScreenResult;
use crate::skills::{SkillId, SkillNet};
use crate::{Error, Result};

/// Report families the CLI can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    ErrorProb,
    RangeProgress,
    SkillStatus,
    Path,
    Ribbons,
}

pub const REPORT_KINDS: [(&str, ReportKind); 5] = [
    ("error-prob", ReportKind::ErrorProb),
    ("range-progress", ReportKind::RangeProgress),
    ("skill-status", ReportKind::SkillStatus),
    ("path", ReportKind::Path),
    ("ribbons", ReportKind::Ribbons),
];

impl ReportKind {
    pub fn parse(name: &str) -> Result<ReportKind> {
        REPORT_KINDS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| Error::UnknownReportKind {
                got: name.to_string(),
                known: REPORT_KINDS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
            })
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Belief threshold for the learned flag of skill-status.
    pub learned_threshold: f64,
    /// Cluster count for ribbons.
    pub k: usize,
    pub seed: u64,
    pub session_gap_ms: i64,
    /// Chain states for ribbons: navigation or input behavior.
    pub mapping: StateMapping,
}

impl Default for ReportOptions {
    fn default() -> ReportOptions {
        ReportOptions {
            learned_threshold: 0.85,
            k: 3,
            seed: 0,
            session_gap_ms: DEFAULT_SESSION_GAP_MS,
            mapping: StateMapping::navigation(),
        }
    }
}

/// Minimal CSV field escaping: quote when a field carries a comma, quote or
/// newline.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_row(fields: &[String]) -> String {
    fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
}

fn sessions_by_student(events: &[Event], gap_ms: i64) -> BTreeMap<String, Vec<Session>> {
    let mut out: BTreeMap<String, Vec<Session>> = BTreeMap::new();
    for session in sessionize(events, gap_ms) {
        out.entry(session.student_id.clone()).or_default().push(session);
    }
    out
}

/// Emit one report kind as CSV text.
pub fn report(
    events: &[Event],
    kind: ReportKind,
    net: Option<&SkillNet>,
    opts: &ReportOptions,
) -> Result<String> {
    match kind {
        ReportKind::ErrorProb => error_prob_csv(events, opts),
        ReportKind::RangeProgress => {
            let net = net.ok_or_else(|| Error::Config("range-progress needs a skill net".into()))?;
            range_progress_csv(events, net, opts)
        }
        ReportKind::SkillStatus => {
            let net = net.ok_or_else(|| Error::Config("skill-status needs a skill net".into()))?;
            skill_status_csv(events, net, opts)
        }
        ReportKind::Path => path_csv(events),
        ReportKind::Ribbons => ribbons_csv(events, opts),
    }
}

fn error_prob_csv(events: &[Event], opts: &ReportOptions) -> Result<String> {
    let mut out = String::from("student_id,session_index,t,error_prob\n");
    for (student, sessions) in sessions_by_student(events, opts.session_gap_ms) {
        for (idx, session) in sessions.iter().enumerate() {
            let answers = session.answers();
            if answers.is_empty() {
                continue;
            }
            let errors = answers.iter().filter(|a| a.correct == Some(false)).count();
            let prob = errors as f64 / answers.len() as f64;
            out.push_str(&csv_row(&[
                student.clone(),
                idx.to_string(),
                session.events.first().unwrap().t.to_string(),
                format!("{prob:.6}"),
            ]));
            out.push('\n');
        }
    }
    Ok(out)
}

fn range_progress_csv(events: &[Event], net: &SkillNet, opts: &ReportOptions) -> Result<String> {
    let mut out = String::from("student_id,session_index,highest_range\n");
    for (student, sessions) in sessions_by_student(events, opts.session_gap_ms) {
        let mut best_bound = 0u32;
        for (idx, session) in sessions.iter().enumerate() {
            for a in session.answers() {
                if a.correct != Some(true) {
                    continue;
                }
                if let Some(skill) = a.skill.and_then(|s| net.skill(s)) {
                    best_bound = best_bound.max(skill.range.bound());
                }
            }
            let label = match best_bound {
                0 => "none".to_string(),
                b => format!("r{b}"),
            };
            out.push_str(&csv_row(&[student.clone(), idx.to_string(), label]));
            out.push('\n');
        }
    }
    Ok(out)
}

fn skill_status_csv(events: &[Event], net: &SkillNet, opts: &ReportOptions) -> Result<String> {
    let params = SkillParams::default();
    let mut beliefs: BTreeMap<String, SkillBeliefs> = BTreeMap::new();
    for event in events {
        if event.kind != crate::events::EventKind::AnswerSubmitted {
            continue;
        }
        if let (Some(skill), Some(correct)) =
            (event.payload_str("skill"), event.payload_bool("correct"))
        {
            if net.contains(skill) {
                let b = beliefs
                    .entry(event.student_id.clone())
                    .or_insert_with(|| init_beliefs(net));
                *b = update_on_answer(b, net, &params, skill, correct)?;
            }
        }
    }
    let mut out = String::from("student_id,skill_id,p_learned,learned\n");
    for (student, b) in beliefs {
        for id in net.topo_order() {
            let p = b.get(id.as_str()).unwrap_or(0.5);
            out.push_str(&csv_row(&[
                student.clone(),
                id.to_string(),
                format!("{p:.6}"),
                (p >= opts.learned_threshold).to_string(),
            ]));
            out.push('\n');
        }
    }
    Ok(out)
}

fn path_csv(events: &[Event]) -> Result<String> {
    let mut per_student: BTreeMap<String, Vec<SkillId>> = BTreeMap::new();
    for event in events {
        if event.kind != crate::events::EventKind::AnswerSubmitted {
            continue;
        }
        if let Some(skill) = event.payload_str("skill") {
            per_student
                .entry(event.student_id.clone())
                .or_default()
                .push(SkillId::new(skill));
        }
    }
    let mut out = String::from("student_id,step,skill_id,trials\n");
    for (student, trace) in per_student {
        for (step, (skill, trials)) in learning_path(&trace).iter().enumerate() {
            out.push_str(&csv_row(&[
                student.clone(),
                step.to_string(),
                skill.to_string(),
                trials.to_string(),
            ]));
            out.push('\n');
        }
    }
    Ok(out)
}

fn ribbons_csv(events: &[Event], opts: &ReportOptions) -> Result<String> {
    let by_student = sessions_by_student(events, opts.session_gap_ms);
    if by_student.is_empty() {
        return Ok(String::from("t,student_id,cluster\n"));
    }
    let students: Vec<&String> = by_student.keys().collect();
    let min_sessions = by_student.values().map(Vec::len).min().unwrap_or(0);
    if min_sessions == 0 {
        return Ok(String::from("t,student_id,cluster\n"));
    }
    let chains_per_t: Vec<Vec<crate::behavior::BehaviorChain>> = (0..min_sessions)
        .map(|t| {
            students
                .iter()
                .map(|s| estimate_chain(&by_student[*s][t], &opts.mapping))
                .collect()
        })
        .collect();
    let clusters = temporal_pipeline(&chains_per_t, opts.k.min(students.len()), opts.seed)?;
    let mut out = String::from("t,student_id,cluster\n");
    for (t, labels) in clusters.labels.iter().enumerate() {
        for (s, label) in labels.iter().enumerate() {
            out.push_str(&csv_row(&[
                t.to_string(),
                students[s].clone(),
                label.to_string(),
            ]));
            out.push('\n');
        }
    }
    Ok(out)
}

// ------------------------------------------------------- small emitters

/// `skill_id,p_learned` export of a belief state.
pub fn beliefs_to_csv(beliefs: &SkillBeliefs) -> String {
    let mut out = String::from("skill_id,p_learned\n");
    for (id, p) in beliefs.iter() {
        out.push_str(&csv_row(&[id.to_string(), format!("{p:.6}")]));
        out.push('\n');
    }
    out
}

/// `student_id,cluster` export of offline cluster assignments.
pub fn assignments_to_csv(students: &[String], labels: &[usize]) -> String {
    let mut out = String::from("student_id,cluster\n");
    for (s, l) in students.iter().zip(labels) {
        out.push_str(&csv_row(&[s.clone(), l.to_string()]));
        out.push('\n');
    }
    out
}

/// `student_id,label,posterior,n_features,minutes` export of screening runs.
pub fn screen_results_to_csv(students: &[String], results: &[ScreenResult]) -> String {
    let mut out = String::from("student_id,label,posterior,n_features,minutes\n");
    for (s, r) in students.iter().zip(results) {
        let label = match r.label {
            crate::screener::RiskLabel::AtRisk => "at_risk",
            crate::screener::RiskLabel::NotAtRisk => "not_at_risk",
        };
        out.push_str(&csv_row(&[
            s.clone(),
            label.to_string(),
            format!("{:.6}", r.posterior_trace.last().unwrap()),
            r.features_used.to_string(),
            format!("{:.2}", r.minutes),
        ]));
        out.push('\n');
    }
    out
}

/// `student_id,skill_id,decision,attempts` export of stop-policy replays.
pub fn stop_eval_to_csv(rows: &[crate::controller::StopEvalRow]) -> String {
    let mut out = String::from("student_id,skill_id,decision,attempts\n");
    for r in rows {
        let decision = match r.decision {
            crate::controller::StopDecision::Continue => "continue",
            crate::controller::StopDecision::Mastered => "mastered",
            crate::controller::StopDecision::WheelSpinning => "wheel_spinning",
        };
        out.push_str(&csv_row(&[
            r.student.clone(),
            r.skill.to_string(),
            decision.to_string(),
            r.attempts.to_string(),
        ]));
        out.push('\n');
    }
    out
}
