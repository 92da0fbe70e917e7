//! Teaching decisions: navigate the skill net (stay, forward, backward,
//! remediate) from the current beliefs, and decide when to stop teaching a
//! skill. The stopping policy consumes nothing but a sequence of predicted
//! next-answer-correct probabilities, so it runs unchanged over any student
//! model that can produce them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::events::{Event, EventKind};
use crate::knowledge::SkillBeliefs;
use crate::skills::{SkillId, SkillNet};
use crate::{Error, Result};

/// One navigation decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Stay,
    Forward(SkillId),
    Backward(SkillId),
    Remediate(SkillId),
}

/// Decision plus a completion note for the no-successor case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NextAction {
    pub action: Action,
    /// Set when the advance condition held but no successor exists.
    pub module_complete: bool,
}

/// Verdict of the stopping policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopDecision {
    Continue,
    Mastered,
    WheelSpinning,
}

/// Stopping policy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopPolicyConfig {
    /// Mastery threshold on predicted correctness.
    pub mastery_threshold: f64,
    /// Consecutive predictions that must clear the mastery threshold.
    pub consecutive: usize,
    /// Minimum attempts before wheel-spinning can be declared.
    pub min_attempts: usize,
    /// Window for the least-squares progress slope.
    pub slope_window: usize,
    /// Slope below this floor counts as no progress. Set to -inf for a
    /// mastery-threshold-only baseline policy.
    pub slope_floor: f64,
    /// Wheel-spinning also requires the last prediction below this ceiling.
    pub low_ceiling: f64,
}

impl Default for StopPolicyConfig {
    fn default() -> StopPolicyConfig {
        StopPolicyConfig {
            mastery_threshold: 0.95,
            consecutive: 3,
            min_attempts: 10,
            slope_window: 8,
            slope_floor: 0.005,
            low_ceiling: 0.6,
        }
    }
}

impl StopPolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.low_ceiling
            && self.low_ceiling < self.mastery_threshold
            && self.mastery_threshold <= 1.0)
        {
            return Err(Error::Config(
                "need 0 < low_ceiling < mastery_threshold <= 1".into(),
            ));
        }
        if self.consecutive < 1 || self.slope_window < 2 {
            return Err(Error::Config("consecutive >= 1 and slope_window >= 2".into()));
        }
        Ok(())
    }
}

/// Navigation thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Advance to a successor at or above this belief.
    pub advance_threshold: f64,
    /// Retreat to a precursor below this belief.
    pub retreat_threshold: f64,
    pub stop: StopPolicyConfig,
}

impl Default for ControllerConfig {
    fn default() -> ControllerConfig {
        ControllerConfig {
            advance_threshold: 0.85,
            retreat_threshold: 0.30,
            stop: StopPolicyConfig::default(),
        }
    }
}

/// Among `candidates`, the one with the lowest belief; ties break by
/// topological index.
fn lowest_belief<'a>(
    candidates: &[&'a SkillId],
    beliefs: &SkillBeliefs,
    net: &SkillNet,
) -> Option<&'a SkillId> {
    candidates
        .iter()
        .min_by(|a, b| {
            let pa = beliefs.get(a.as_str()).unwrap_or(0.5);
            let pb = beliefs.get(b.as_str()).unwrap_or(0.5);
            pa.partial_cmp(&pb).unwrap().then_with(|| {
                net.topo_index(a.as_str())
                    .unwrap_or(usize::MAX)
                    .cmp(&net.topo_index(b.as_str()).unwrap_or(usize::MAX))
            })
        })
        .copied()
}

/// Decide the next navigation step from the current skill.
///
/// `typical_error` carries the typical-error tag matched by the last answer,
/// if any; it triggers remediation with the lowest-belief remediation skill
/// for that tag. Otherwise the move is forward (lowest-belief successor) at
/// or above the advance threshold, backward (lowest-belief precursor) below
/// the retreat threshold, and stay in between. Forward with no successor
/// reports module completion.
pub fn next_action(
    beliefs: &SkillBeliefs,
    net: &SkillNet,
    current: &str,
    typical_error: Option<&str>,
    cfg: &ControllerConfig,
) -> Result<NextAction> {
    if !net.contains(current) {
        return Err(Error::UnknownSkill(current.to_string()));
    }
    if let Some(tag) = typical_error {
        let candidates = net.remediation_candidates(tag);
        if let Some(pick) = lowest_belief(&candidates, beliefs, net) {
            return Ok(NextAction {
                action: Action::Remediate(pick.clone()),
                module_complete: false,
            });
        }
        // no remediation skill configured for the tag: fall through
    }
    let p = beliefs
        .get(current)
        .ok_or_else(|| Error::UnknownSkill(current.to_string()))?;
    if p >= cfg.advance_threshold {
        let succ = net.successors(current)?;
        return match lowest_belief(&succ, beliefs, net) {
            Some(pick) => Ok(NextAction {
                action: Action::Forward(pick.clone()),
                module_complete: false,
            }),
            None => Ok(NextAction {
                action: Action::Stay,
                module_complete: true,
            }),
        };
    }
    if p < cfg.retreat_threshold {
        let pre = net.precursors(current)?;
        if let Some(pick) = lowest_belief(&pre, beliefs, net) {
            return Ok(NextAction {
                action: Action::Backward(pick.clone()),
                module_complete: false,
            });
        }
    }
    Ok(NextAction {
        action: Action::Stay,
        module_complete: false,
    })
}

/// Stop teaching a skill?
///
/// Mastered: the last `consecutive` predictions clear the mastery threshold.
/// WheelSpinning: at least `min_attempts` predictions, the least-squares
/// slope over the last `slope_window` values sits below the floor, and the
/// last value stays under the low ceiling. A dropping prediction sequence
/// revokes an imminent mastery call, so forgetting is representable.
pub fn when_to_stop(predictions: &[f64], cfg: &StopPolicyConfig) -> StopDecision {
    debug_assert!(predictions.iter().all(|p| (0.0..=1.0).contains(p)));
    let n = predictions.len();
    if n >= cfg.consecutive
        && predictions[n - cfg.consecutive..]
            .iter()
            .all(|&p| p >= cfg.mastery_threshold)
    {
        return StopDecision::Mastered;
    }
    if n >= cfg.min_attempts {
        let window = &predictions[n - cfg.slope_window.min(n)..];
        let slope = crate::math::least_squares_slope(window);
        if slope < cfg.slope_floor && predictions[n - 1] < cfg.low_ceiling {
            return StopDecision::WheelSpinning;
        }
    }
    StopDecision::Continue
}

/// Aggregate a trace of answered skills into (skill, trials) runs, the raw
/// material of a learning-path report.
pub fn learning_path(trace: &[SkillId]) -> Vec<(SkillId, u32)> {
    let mut path: Vec<(SkillId, u32)> = Vec::new();
    for skill in trace {
        match path.last_mut() {
            Some((last, n)) if last == skill => *n += 1,
            _ => path.push((skill.clone(), 1)),
        }
    }
    path
}

/// Minimal frequency-based student model: a Laplace-smoothed running
/// correctness rate. Exists to demonstrate (and test) that the stopping
/// policy is model-agnostic.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrequencyBaseline {
    correct: u32,
    total: u32,
}

impl FrequencyBaseline {
    pub fn predict_correct(&self) -> f64 {
        (self.correct as f64 + 1.0) / (self.total as f64 + 2.0)
    }

    pub fn update(&mut self, correct: bool) {
        self.total += 1;
        if correct {
            self.correct += 1;
        }
    }
}

/// Outcome of replaying the stopping policy over one (student, skill) answer
/// stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopEvalRow {
    pub student: String,
    pub skill: SkillId,
    /// First non-Continue verdict along the prediction sequence, or
    /// Continue if the policy never fired.
    pub decision: StopDecision,
    /// Predictions consumed up to (and including) the firing point.
    pub attempts: usize,
}

fn first_decision(series: &[f64], cfg: &StopPolicyConfig) -> (StopDecision, usize) {
    for t in 1..=series.len() {
        let d = when_to_stop(&series[..t], cfg);
        if d != StopDecision::Continue {
            return (d, t);
        }
    }
    (StopDecision::Continue, series.len())
}

fn eval_rows(
    series: BTreeMap<(String, SkillId), Vec<f64>>,
    cfg: &StopPolicyConfig,
) -> Vec<StopEvalRow> {
    series
        .into_iter()
        .map(|((student, skill), preds)| {
            let (decision, attempts) = first_decision(&preds, cfg);
            StopEvalRow {
                student,
                skill,
                decision,
                attempts,
            }
        })
        .collect()
}

/// Replay a log through the skill-tracing model: after each answer the
/// model's next-correct prediction extends that skill's sequence, and the
/// policy is asked at every prefix.
pub fn evaluate_stop_policy_on_log(
    events: &[Event],
    net: &SkillNet,
    params: &crate::knowledge::SkillParams,
    cfg: &ControllerConfig,
) -> Vec<StopEvalRow> {
    let mut beliefs: BTreeMap<String, SkillBeliefs> = BTreeMap::new();
    let mut series: BTreeMap<(String, SkillId), Vec<f64>> = BTreeMap::new();
    for event in events {
        if event.kind != EventKind::AnswerSubmitted {
            continue;
        }
        let (skill, correct) = match (event.payload_str("skill"), event.payload_bool("correct")) {
            (Some(s), Some(c)) if net.contains(s) => (s, c),
            _ => continue,
        };
        let b = beliefs
            .entry(event.student_id.clone())
            .or_insert_with(|| crate::knowledge::init_beliefs(net));
        *b = crate::knowledge::update_on_answer(b, net, params, skill, correct)
            .expect("skill verified in net");
        let p = crate::knowledge::predict_correct(b.get(skill).unwrap(), params.get(skill));
        series
            .entry((event.student_id.clone(), SkillId::new(skill)))
            .or_default()
            .push(p);
    }
    eval_rows(series, &cfg.stop)
}

/// Same replay with the frequency baseline instead of the tracing model;
/// the policy itself runs unchanged.
pub fn evaluate_stop_policy_frequency(events: &[Event], cfg: &StopPolicyConfig) -> Vec<StopEvalRow> {
    let mut models: BTreeMap<(String, SkillId), FrequencyBaseline> = BTreeMap::new();
    let mut series: BTreeMap<(String, SkillId), Vec<f64>> = BTreeMap::new();
    for event in events {
        if event.kind != EventKind::AnswerSubmitted {
            continue;
        }
        let (skill, correct) = match (event.payload_str("skill"), event.payload_bool("correct")) {
            (Some(s), Some(c)) => (s, c),
            _ => continue,
        };
        let key = (event.student_id.clone(), SkillId::new(skill));
        let model = models.entry(key.clone()).or_default();
        model.update(correct);
        series.entry(key).or_default().push(model.predict_correct());
    }
    eval_rows(series, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::init_beliefs;
    use crate::skills::tests::skill;
    use std::collections::BTreeMap;

    fn diamond_net() -> SkillNet {
        // a -> b, a -> c, b -> d, c -> d; r remediates "ten_crossing"
        let mut r = skill("r");
        r.remediates = vec!["ten_crossing".to_string()];
        let skills = vec![skill("a"), skill("b"), skill("c"), skill("d"), r];
        let edges = vec![
            (SkillId::new("a"), SkillId::new("b")),
            (SkillId::new("a"), SkillId::new("c")),
            (SkillId::new("b"), SkillId::new("d")),
            (SkillId::new("c"), SkillId::new("d")),
            (SkillId::new("a"), SkillId::new("r")),
        ];
        SkillNet::from_parts(skills, &edges, BTreeMap::new()).unwrap()
    }

    #[test]
    fn mid_belief_stays() {
        let net = diamond_net();
        let beliefs = init_beliefs(&net);
        let d = next_action(&beliefs, &net, "a", None, &ControllerConfig::default()).unwrap();
        assert_eq!(d.action, Action::Stay);
        assert!(!d.module_complete);
    }

    #[test]
    fn forward_picks_lowest_belief_successor() {
        let net = diamond_net();
        let mut beliefs = init_beliefs(&net);
        beliefs.set("a", 0.9);
        beliefs.set("b", 0.4);
        beliefs.set("c", 0.6);
        let d = next_action(&beliefs, &net, "a", None, &ControllerConfig::default()).unwrap();
        assert_eq!(d.action, Action::Forward(SkillId::new("b")));
    }

    #[test]
    fn backward_picks_lowest_belief_precursor() {
        let net = diamond_net();
        let mut beliefs = init_beliefs(&net);
        beliefs.set("d", 0.1);
        beliefs.set("b", 0.7);
        beliefs.set("c", 0.2);
        let d = next_action(&beliefs, &net, "d", None, &ControllerConfig::default()).unwrap();
        assert_eq!(d.action, Action::Backward(SkillId::new("c")));
    }

    #[test]
    fn typical_error_remediates_lowest_candidate() {
        let net = diamond_net();
        let mut beliefs = init_beliefs(&net);
        beliefs.set("r", 0.3);
        let d = next_action(
            &beliefs,
            &net,
            "d",
            Some("ten_crossing"),
            &ControllerConfig::default(),
        )
        .unwrap();
        assert_eq!(d.action, Action::Remediate(SkillId::new("r")));
    }

    #[test]
    fn unknown_tag_falls_through() {
        let net = diamond_net();
        let beliefs = init_beliefs(&net);
        let d = next_action(&beliefs, &net, "a", Some("no_such_tag"), &ControllerConfig::default())
            .unwrap();
        assert_eq!(d.action, Action::Stay);
    }

    #[test]
    fn no_successor_reports_module_complete() {
        let net = diamond_net();
        let mut beliefs = init_beliefs(&net);
        beliefs.set("d", 0.95);
        let d = next_action(&beliefs, &net, "d", None, &ControllerConfig::default()).unwrap();
        assert_eq!(d.action, Action::Stay);
        assert!(d.module_complete);
    }

    #[test]
    fn remediation_tie_breaks_by_lowest_belief() {
        let mut r1 = skill("r1");
        r1.remediates = vec!["tc".into()];
        let mut r2 = skill("r2");
        r2.remediates = vec!["tc".into()];
        let net = SkillNet::from_parts(vec![skill("a"), r1, r2], &[], BTreeMap::new()).unwrap();
        let mut beliefs = init_beliefs(&net);
        beliefs.set("r1", 0.3);
        beliefs.set("r2", 0.7);
        let d =
            next_action(&beliefs, &net, "a", Some("tc"), &ControllerConfig::default()).unwrap();
        assert_eq!(d.action, Action::Remediate(SkillId::new("r1")));
    }

    #[test]
    fn mastery_after_k_high_predictions() {
        let cfg = StopPolicyConfig::default();
        assert_eq!(when_to_stop(&[0.96, 0.97, 0.98], &cfg), StopDecision::Mastered);
        assert_eq!(when_to_stop(&[0.96, 0.97], &cfg), StopDecision::Continue);
    }

    #[test]
    fn flat_low_sequence_is_wheel_spinning() {
        let cfg = StopPolicyConfig::default();
        let seq = vec![0.5; 12];
        assert_eq!(when_to_stop(&seq, &cfg), StopDecision::WheelSpinning);
    }

    #[test]
    fn rising_sequence_continues() {
        let cfg = StopPolicyConfig::default();
        let seq: Vec<f64> = (0..12).map(|i| 0.5 + 0.3 * i as f64 / 11.0).collect();
        assert_eq!(when_to_stop(&seq, &cfg), StopDecision::Continue);
    }

    #[test]
    fn dropping_predictions_revoke_mastery() {
        let cfg = StopPolicyConfig::default();
        // two high values, then forgetting pulls the last one down
        let seq = vec![0.96, 0.97, 0.80];
        assert_eq!(when_to_stop(&seq, &cfg), StopDecision::Continue);
    }

    #[test]
    fn neg_infinity_floor_disables_wheel_spinning() {
        let cfg = StopPolicyConfig {
            slope_floor: f64::NEG_INFINITY,
            ..StopPolicyConfig::default()
        };
        let seq = vec![0.5; 50];
        assert_eq!(when_to_stop(&seq, &cfg), StopDecision::Continue);
    }

    #[test]
    fn policy_is_model_agnostic_over_the_frequency_baseline() {
        let cfg = StopPolicyConfig::default();
        let mut model = FrequencyBaseline::default();
        let mut preds = Vec::new();
        for _ in 0..30 {
            preds.push(model.predict_correct());
            model.update(true);
        }
        // consistently correct answers drive predictions to mastery
        assert_eq!(when_to_stop(&preds, &cfg), StopDecision::Mastered);

        let mut model = FrequencyBaseline::default();
        let mut preds = Vec::new();
        for i in 0..30 {
            preds.push(model.predict_correct());
            model.update(i % 2 == 0);
        }
        assert_eq!(when_to_stop(&preds, &cfg), StopDecision::WheelSpinning);
    }

    #[test]
    fn path_aggregates_runs() {
        let trace: Vec<SkillId> = ["a", "a", "a", "b", "b", "a"]
            .iter()
            .map(|s| SkillId::new(*s))
            .collect();
        let path = learning_path(&trace);
        assert_eq!(
            path,
            vec![
                (SkillId::new("a"), 3),
                (SkillId::new("b"), 2),
                (SkillId::new("a"), 1),
            ]
        );
    }

    #[test]
    fn single_skill_path() {
        let trace = vec![SkillId::new("a"); 5];
        assert_eq!(learning_path(&trace), vec![(SkillId::new("a"), 5)]);
    }

    #[test]
    fn config_validation_rejects_bad_thresholds() {
        let bad = StopPolicyConfig {
            low_ceiling: 0.99,
            ..StopPolicyConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(StopPolicyConfig::default().validate().is_ok());
    }
}
