//! Deterministic synthetic-student simulator.
//!
//! Students carry true latent skill states, true per-skill parameters, true
//! mal-rule rates, engagement chains and behavior archetypes. The closed
//! loop per task: the controller picks a skill (or word), the student
//! answers from their true state, the running model updates from the
//! observable answer alone. Ground truth goes to a separate sidecar so no
//! model ever sees it. Identical seeds give byte-identical logs.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::controller::{next_action, when_to_stop, Action, ControllerConfig, StopDecision};
use crate::events::{Event, EventKind};
use crate::knowledge::{init_beliefs, predict_correct, update_on_answer, Params, SkillBeliefs, SkillParams};
use crate::skills::{SkillId, SkillNet};
use crate::spelling::{
    cycle_step, select_next_word, update_profile, CycleState, MalRule, MalRuleProfile, Outcome,
    RuleCounts, WordEntry,
};
use crate::{Error, Result};

/// Which training environment to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Math,
    Spelling,
}

/// Simulation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub population: usize,
    /// Subgroup mixture, must sum to 1.
    pub subgroup_mix: Vec<f64>,
    /// Fraction of students with the risk profile (shifted accuracy and
    /// answer times on number-comparison and counting skills).
    pub dd_fraction: f64,
    /// Fraction of students who wheel-spin (zero learn rate) on part of
    /// their path.
    pub wheelspin_fraction: f64,
    pub sessions: usize,
    /// Tasks per session.
    pub session_length: usize,
    pub controller: ControllerConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            scenario: Scenario::Math,
            population: 50,
            subgroup_mix: vec![1.0 / 6.0; 6],
            dd_fraction: 0.1,
            wheelspin_fraction: 0.1,
            sessions: 5,
            session_length: 40,
            controller: ControllerConfig::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn from_json(json: &str) -> Result<SimConfig> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.subgroup_mix.iter().sum();
        if self.subgroup_mix.is_empty() || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "subgroup mixture must sum to 1 (got {total})"
            )));
        }
        if self.subgroup_mix.iter().any(|&w| w < 0.0) {
            return Err(Error::Config("mixture weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Subgroup archetype: initial knowledge, learning speed, answer tempo
/// and engagement quality. Six templates from struggling to excelling.
#[derive(Debug, Clone, Copy)]
pub struct SubgroupTemplate {
    pub initial_known: f64,
    pub learn: f64,
    pub slip: f64,
    pub guess: f64,
    pub answer_mu: f64,
    pub stay_focused: f64,
    pub stay_receptive: f64,
    pub mal_rate_scale: f64,
}

pub const SUBGROUP_TEMPLATES: [SubgroupTemplate; 6] = [
    SubgroupTemplate {
        initial_known: 0.10,
        learn: 0.07,
        slip: 0.18,
        guess: 0.22,
        answer_mu: 8.6,
        stay_focused: 0.75,
        stay_receptive: 0.75,
        mal_rate_scale: 2.0,
    },
    SubgroupTemplate {
        initial_known: 0.20,
        learn: 0.10,
        slip: 0.15,
        guess: 0.23,
        answer_mu: 8.4,
        stay_focused: 0.80,
        stay_receptive: 0.80,
        mal_rate_scale: 1.6,
    },
    SubgroupTemplate {
        initial_known: 0.30,
        learn: 0.13,
        slip: 0.12,
        guess: 0.24,
        answer_mu: 8.2,
        stay_focused: 0.85,
        stay_receptive: 0.85,
        mal_rate_scale: 1.3,
    },
    SubgroupTemplate {
        initial_known: 0.40,
        learn: 0.17,
        slip: 0.10,
        guess: 0.25,
        answer_mu: 8.0,
        stay_focused: 0.88,
        stay_receptive: 0.88,
        mal_rate_scale: 1.0,
    },
    SubgroupTemplate {
        initial_known: 0.55,
        learn: 0.22,
        slip: 0.08,
        guess: 0.26,
        answer_mu: 7.8,
        stay_focused: 0.92,
        stay_receptive: 0.92,
        mal_rate_scale: 0.7,
    },
    SubgroupTemplate {
        initial_known: 0.70,
        learn: 0.30,
        slip: 0.05,
        guess: 0.28,
        answer_mu: 7.6,
        stay_focused: 0.95,
        stay_receptive: 0.95,
        mal_rate_scale: 0.4,
    },
];

/// Typical-error tags the simulator can attach to wrong math answers.
pub const TYPICAL_ERRORS: [&str; 5] = [
    "ten_crossing",
    "place_value_swap",
    "digit_reversal",
    "counting_skip",
    "carry_error",
];

/// Fully specified synthetic student.
#[derive(Debug, Clone)]
pub struct SyntheticStudent {
    pub id: String,
    pub subgroup: usize,
    pub dd: bool,
    /// Navigation archetype: 0 game-focused, 1 shop-heavy, 2 wanderer.
    pub nav_archetype: usize,
    pub skill_state: BTreeMap<SkillId, bool>,
    pub true_params: SkillParams,
    pub wheel_spin: BTreeSet<SkillId>,
    /// Log-normal answer-time parameters (mu, sigma) per skill.
    pub answer_time: BTreeMap<SkillId, (f64, f64)>,
    /// Probability of staying in the focused / receptive state, and of
    /// entering it from the opposite state.
    pub stay_focused: f64,
    pub stay_receptive: f64,
    /// True mal-rule rates (errors per opportunity), spelling scenario.
    pub mal_rates: [f64; 7],
    /// Probability that a wrong answer carries each typical-error tag.
    pub typical_error_rates: BTreeMap<String, f64>,
    pub help_propensity: f64,
}

fn student_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(17))
}

/// Skills that show the risk profile: number comparison, counting and the
/// whole 0-10 range.
fn dd_sensitive(net: &SkillNet, id: &SkillId) -> bool {
    let name = id.as_str();
    name.contains("compare")
        || name.contains("count")
        || net
            .skill(name)
            .map(|s| s.range == crate::skills::NumberRange::R10)
            .unwrap_or(false)
}

/// Draw a deterministic population. Mixture weights must sum to one.
pub fn generate_population(cfg: &SimConfig, net: &SkillNet) -> Result<Vec<SyntheticStudent>> {
    cfg.validate()?;
    let mut students = Vec::with_capacity(cfg.population);
    for i in 0..cfg.population {
        let mut rng = student_rng(cfg.seed, i);
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        let mut subgroup = cfg.subgroup_mix.len() - 1;
        for (g, w) in cfg.subgroup_mix.iter().enumerate() {
            acc += w;
            if draw < acc {
                subgroup = g;
                break;
            }
        }
        let template = SUBGROUP_TEMPLATES[subgroup.min(SUBGROUP_TEMPLATES.len() - 1)];
        let dd = rng.gen_bool(cfg.dd_fraction);
        let wheel = rng.gen_bool(cfg.wheelspin_fraction);

        let mut skill_state = BTreeMap::new();
        let mut true_params = SkillParams::default();
        let mut answer_time = BTreeMap::new();
        let n = net.len().max(1);
        for id in net.skill_ids() {
            let depth = net.topo_index(id.as_str()).unwrap() as f64 / n as f64;
            let sensitive = dd && dd_sensitive(net, id);
            // earlier skills are more likely already known
            let p_known = (template.initial_known * (1.6 - 1.2 * depth)).clamp(0.0, 0.95)
                * if sensitive { 0.4 } else { 1.0 };
            skill_state.insert(id.clone(), rng.gen_bool(p_known));
            let jitter = 0.85 + rng.gen::<f64>() * 0.3;
            let mut params = Params {
                slip: (template.slip * jitter + if sensitive { 0.12 } else { 0.0 }).min(0.4),
                guess: template.guess,
                learn: (template.learn * jitter * if sensitive { 0.5 } else { 1.0 }).clamp(0.01, 0.9),
                forget: 0.005,
            };
            params.forget = params.forget.min(params.learn);
            true_params.set(id.clone(), params).expect("valid synthetic params");
            let mu = template.answer_mu + if sensitive { 0.5 } else { 0.0 } + rng.gen::<f64>() * 0.2;
            answer_time.insert(id.clone(), (mu, 0.45));
        }

        // wheel-spinners lose the learn rate on a few early unlearned skills
        let mut wheel_spin = BTreeSet::new();
        if wheel {
            let mut unlearned: Vec<&SkillId> = net
                .skill_ids()
                .filter(|id| !skill_state[*id])
                .collect();
            unlearned.sort_by_key(|id| net.topo_index(id.as_str()).unwrap());
            for id in unlearned.into_iter().take(3) {
                wheel_spin.insert(id.clone());
                let mut p = *true_params.get(id.as_str());
                p.learn = 1e-4;
                p.forget = 0.0;
                true_params.set(id.clone(), p).expect("valid wheel-spin params");
            }
        }

        let mut typical_error_rates = BTreeMap::new();
        for tag in TYPICAL_ERRORS {
            let base = 0.06 + rng.gen::<f64>() * 0.04;
            let rate = if dd { base * 3.0 } else { base };
            typical_error_rates.insert(tag.to_string(), rate.min(0.5));
        }

        let mal_base = [0.012, 0.02, 0.015, 0.02, 0.025, 0.012, 0.01];
        let mut mal_rates = [0.0; 7];
        for (r, b) in mal_rates.iter_mut().zip(mal_base) {
            *r = b * template.mal_rate_scale * (0.7 + rng.gen::<f64>() * 0.6);
        }

        students.push(SyntheticStudent {
            id: format!("s{i:04}"),
            subgroup,
            dd,
            nav_archetype: subgroup % 3,
            skill_state,
            true_params,
            wheel_spin,
            answer_time,
            stay_focused: template.stay_focused,
            stay_receptive: template.stay_receptive,
            mal_rates,
            typical_error_rates,
            help_propensity: if dd { 0.10 } else { 0.04 },
        });
    }
    Ok(students)
}

/// Ground-truth record: one per task, never fed to any model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    pub sid: String,
    pub t: i64,
    pub skill_states: BTreeMap<SkillId, bool>,
    pub focused: bool,
    pub receptive: bool,
}

pub fn truth_to_line(record: &TruthRecord) -> String {
    serde_json::to_string(&json!({
        "sid": record.sid,
        "t": record.t,
        "skill_states": record.skill_states,
        "focused": record.focused,
        "receptive": record.receptive,
    }))
    .expect("truth serialization cannot fail")
}

pub fn write_truth_string(records: &[TruthRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&truth_to_line(r));
        out.push('\n');
    }
    out
}

/// A finished run: the observable log plus the ground-truth sidecar.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub events: Vec<Event>,
    pub truth: Vec<TruthRecord>,
    pub students: Vec<SyntheticStudent>,
}

/// Mutable per-student simulation state across sessions.
struct StudentSim {
    student: SyntheticStudent,
    rng: ChaCha8Rng,
    clock_ms: i64,
    focused: bool,
    receptive: bool,
    // math scenario
    beliefs: SkillBeliefs,
    model_params: SkillParams,
    current_skill: SkillId,
    predictions: BTreeMap<SkillId, Vec<f64>>,
    stopped: BTreeSet<SkillId>,
    // spelling scenario
    profile: MalRuleProfile,
    cycles: BTreeMap<String, CycleState>,
    presented: u64,
    task_counter: u64,
}

impl StudentSim {
    fn new(student: SyntheticStudent, net: &SkillNet, cfg: &SimConfig, index: usize) -> StudentSim {
        let rng = student_rng(cfg.seed.wrapping_add(0xABCD), index);
        let start = net
            .topo_order()
            .first()
            .map(|s| (*s).clone())
            .unwrap_or_else(|| SkillId::new("none"));
        StudentSim {
            rng,
            clock_ms: 0,
            focused: true,
            receptive: true,
            beliefs: init_beliefs(net),
            model_params: SkillParams::default(),
            current_skill: start,
            predictions: BTreeMap::new(),
            stopped: BTreeSet::new(),
            profile: MalRuleProfile::default(),
            cycles: BTreeMap::new(),
            presented: 0,
            task_counter: 0,
            student,
        }
    }

    fn step_engagement(&mut self) {
        let f_stay = self.student.stay_focused;
        let r_stay = self.student.stay_receptive;
        self.focused = if self.focused {
            self.rng.gen_bool(f_stay)
        } else {
            self.rng.gen_bool(1.0 - f_stay * 0.8)
        };
        self.receptive = if self.receptive {
            self.rng.gen_bool(r_stay)
        } else {
            self.rng.gen_bool(1.0 - r_stay * 0.8)
        };
    }

    fn tick(&mut self, lo_ms: i64, hi_ms: i64) -> i64 {
        let dt = self.rng.gen_range(lo_ms..=hi_ms);
        self.clock_ms += dt;
        self.clock_ms
    }

    fn emit_nav(&mut self, session: &str, events: &mut Vec<Event>) {
        // archetype-driven detours between tasks
        let (p_shop, p_perf) = match self.student.nav_archetype {
            0 => (0.04, 0.03),
            1 => (0.35, 0.05),
            _ => (0.20, 0.20),
        };
        let draw: f64 = self.rng.gen();
        if draw < p_shop {
            let t = self.tick(800, 4_000);
            events.push(Event::new(&self.student.id, session, t, EventKind::NavShop));
            let t = self.tick(3_000, 20_000);
            events.push(Event::new(&self.student.id, session, t, EventKind::NavGame));
        } else if draw < p_shop + p_perf {
            let t = self.tick(800, 4_000);
            events.push(Event::new(&self.student.id, session, t, EventKind::NavPerformance));
            let t = self.tick(2_000, 12_000);
            events.push(Event::new(&self.student.id, session, t, EventKind::NavGame));
        }
    }

    /// True-state transition after one task: gated learning (blocked while
    /// non-receptive), forgetting.
    fn evolve_truth(&mut self, net: &SkillNet) {
        let snapshot = self.student.skill_state.clone();
        for id in net.skill_ids() {
            let p = *self.student.true_params.get(id.as_str());
            let state = self.student.skill_state.get_mut(id).unwrap();
            if *state {
                if p.forget > 0.0 && self.rng.gen_bool(p.forget) {
                    *state = false;
                }
            } else {
                let gate = net
                    .precursors(id.as_str())
                    .unwrap()
                    .iter()
                    .all(|q| snapshot[q.as_str()]);
                if gate && self.receptive && self.rng.gen_bool(p.learn.min(1.0)) {
                    *state = true;
                }
            }
        }
    }

    fn math_task(
        &mut self,
        net: &SkillNet,
        cfg: &SimConfig,
        session: &str,
        events: &mut Vec<Event>,
        truth: &mut Vec<TruthRecord>,
    ) {
        self.step_engagement();
        self.emit_nav(session, events);
        let skill = self.current_skill.clone();
        self.task_counter += 1;
        let task_id = format!("t{}", self.task_counter);
        let t = self.tick(400, 1_500);
        events.push(
            Event::new(&self.student.id, session, t, EventKind::TaskShown)
                .with("task", task_id.as_str().into())
                .with("skill", skill.as_str().into()),
        );

        // the student answers from the true state
        let p = self.student.true_params.get(skill.as_str());
        let state = self.student.skill_state[&skill];
        let slip_eff = if self.focused { p.slip } else { (p.slip * 2.0).min(0.9) };
        let p_correct = if state { 1.0 - slip_eff } else { p.guess };
        let correct = self.rng.gen_bool(p_correct);

        if self.rng.gen_bool(self.student.help_propensity * if self.receptive { 1.0 } else { 2.5 }) {
            let t = self.tick(500, 2_000);
            events.push(Event::new(&self.student.id, session, t, EventKind::HelpCall));
        }

        // a few digit keystrokes
        let digits = self.rng.gen_range(1..=3);
        for _ in 0..digits {
            let t = self.tick(250, 900);
            events.push(Event::new(&self.student.id, session, t, EventKind::KeyInput));
        }
        let (mu, sigma) = self.student.answer_time[&skill];
        let dist = LogNormal::new(mu, sigma).expect("valid log-normal");
        let mut answer_ms = dist.sample(&mut self.rng);
        if !self.focused {
            answer_ms *= 1.4;
        }
        let answer_ms = (answer_ms as i64).clamp(300, 120_000);
        self.clock_ms += answer_ms.saturating_sub(digits * 500).max(0);

        let typical_error = if !correct {
            let candidates: Vec<(&String, &f64)> = self.student.typical_error_rates.iter().collect();
            let mut tagged = None;
            for (tag, &rate) in candidates {
                if self.rng.gen_bool(rate) {
                    tagged = Some(tag.clone());
                    break;
                }
            }
            tagged
        } else {
            None
        };

        let t = self.tick(50, 200);
        let mut answer_event = Event::new(&self.student.id, session, t, EventKind::AnswerSubmitted)
            .with("task", task_id.as_str().into())
            .with("skill", skill.as_str().into())
            .with("correct", correct.into())
            .with("ms", answer_ms.into());
        if let Some(tag) = &typical_error {
            answer_event = answer_event.with("typical_error", tag.as_str().into());
        }
        events.push(answer_event);

        truth.push(TruthRecord {
            sid: self.student.id.clone(),
            t,
            skill_states: self.student.skill_state.clone(),
            focused: self.focused,
            receptive: self.receptive,
        });

        // model update from the observable answer only
        self.beliefs =
            update_on_answer(&self.beliefs, net, &self.model_params, skill.as_str(), correct)
                .expect("skill is in the net");
        let next_p = predict_correct(
            self.beliefs.get(skill.as_str()).unwrap(),
            self.model_params.get(skill.as_str()),
        );
        self.predictions.entry(skill.clone()).or_default().push(next_p);

        // true knowledge evolves
        self.evolve_truth(net);

        // stopping policy, then navigation
        let series = &self.predictions[&skill];
        let stop = when_to_stop(series, &cfg.controller.stop);
        if stop != StopDecision::Continue {
            self.stopped.insert(skill.clone());
            self.move_to_next_open(net);
            return;
        }
        let decision = next_action(
            &self.beliefs,
            net,
            skill.as_str(),
            typical_error.as_deref(),
            &cfg.controller,
        )
        .expect("skill is in the net");
        match decision.action {
            Action::Stay => {
                if decision.module_complete {
                    self.stopped.insert(skill.clone());
                    self.move_to_next_open(net);
                }
            }
            Action::Forward(next) | Action::Backward(next) | Action::Remediate(next) => {
                if self.stopped.contains(&next) {
                    self.move_to_next_open(net);
                } else {
                    self.current_skill = next;
                }
            }
        }
    }

    /// Jump to the lowest-topo skill not yet stopped (used once a skill is
    /// mastered, abandoned, or the path dead-ends).
    fn move_to_next_open(&mut self, net: &SkillNet) {
        let next = net
            .topo_order()
            .into_iter()
            .find(|id| !self.stopped.contains(*id) && *id != &self.current_skill);
        if let Some(id) = next {
            self.current_skill = id.clone();
        }
    }

    fn spelling_task(
        &mut self,
        words: &[WordEntry],
        tables: &crate::spelling::SpellingTables,
        session: &str,
        events: &mut Vec<Event>,
        truth: &mut Vec<TruthRecord>,
    ) {
        self.step_engagement();
        self.emit_nav(session, events);
        let word = match select_next_word(&self.profile, words, &self.cycles) {
            Some(w) => w.clone(),
            None => {
                // whole database done: reset the recap cycle to keep training
                self.cycles.clear();
                match select_next_word(&self.profile, words, &self.cycles) {
                    Some(w) => w.clone(),
                    None => return,
                }
            }
        };
        self.presented += 1;
        self.task_counter += 1;
        let t = self.tick(400, 1_500);
        events.push(
            Event::new(&self.student.id, session, t, EventKind::TaskShown)
                .with("task", word.word.as_str().into())
                .with("word", word.word.as_str().into()),
        );

        // sample true per-rule error counts
        let opportunities = word.opportunities();
        let mut activations = RuleCounts::default();
        for (i, rule) in MalRule::ALL.iter().enumerate() {
            let mut lambda = self.student.mal_rates[i] * opportunities.get(*rule) as f64;
            if !self.focused {
                lambda *= 1.8;
            }
            // inverse-transform Poisson draw, deterministic under the rng
            let mut k = 0u32;
            let mut p_acc = (-lambda).exp();
            let mut cdf = p_acc;
            let u: f64 = self.rng.gen();
            while u > cdf && k < 20 {
                k += 1;
                p_acc *= lambda / k as f64;
                cdf += p_acc;
            }
            activations.add(*rule, k);
        }
        let error_count = activations.total();
        let corrects_errors = error_count > 0 && self.rng.gen_bool(0.7);

        // keystrokes: one key per character; sampled errors appear as
        // invalid inputs, corrected ones add a backspace plus a retype
        let chars = word.word.chars().count().max(1);
        let mut remaining_errors = error_count as usize;
        for c in 0..chars {
            let t = self.tick(250, 700);
            let error_here = remaining_errors > 0 && (chars - c) <= remaining_errors;
            if error_here {
                events.push(Event::new(&self.student.id, session, t, EventKind::InvalidInput));
                remaining_errors -= 1;
                if corrects_errors {
                    let t = self.tick(200, 600);
                    events.push(Event::new(&self.student.id, session, t, EventKind::Backspace));
                    let t = self.tick(200, 600);
                    events.push(Event::new(&self.student.id, session, t, EventKind::KeyInput));
                }
            } else {
                events.push(Event::new(&self.student.id, session, t, EventKind::KeyInput));
            }
        }
        let t = self.tick(300, 900);
        events.push(Event::new(&self.student.id, session, t, EventKind::Enter));

        let (typed, correct, first_attempt) = if error_count == 0 {
            (word.word.clone(), true, true)
        } else if corrects_errors {
            (word.word.clone(), true, false)
        } else {
            (corrupt_word(&word, &activations, tables, &mut self.rng), false, true)
        };

        let t = self.tick(50, 200);
        events.push(
            Event::new(&self.student.id, session, t, EventKind::AnswerSubmitted)
                .with("task", word.word.as_str().into())
                .with("word", word.word.as_str().into())
                .with("typed", typed.as_str().into())
                .with("correct", correct.into())
                .with("first", first_attempt.into())
                .with("ms", ((chars as i64) * 450).into()),
        );

        truth.push(TruthRecord {
            sid: self.student.id.clone(),
            t,
            skill_states: BTreeMap::new(),
            focused: self.focused,
            receptive: self.receptive,
        });

        // running model: profile from observed activations, cycle update
        self.profile = update_profile(&self.profile, &word, &activations);
        let state = self.cycles.entry(word.word.clone()).or_default();
        let outcome = if correct { Outcome::Correct } else { Outcome::Error };
        let mut next = cycle_step(state, outcome, first_attempt).expect("word not done");
        next.last_presented = Some(self.presented);
        self.cycles.insert(word.word.clone(), next);
    }
}

/// Apply the sampled edits to the target word, for the log's `typed` field.
fn corrupt_word(
    word: &WordEntry,
    activations: &RuleCounts,
    tables: &crate::spelling::SpellingTables,
    rng: &mut ChaCha8Rng,
) -> String {
    let mut chars: Vec<char> = word.word.chars().collect();
    let alphabet = "abcdefghijklmnopqrstuvwxyz";
    let random_letter =
        |rng: &mut ChaCha8Rng| alphabet.chars().nth(rng.gen_range(0..26)).unwrap();
    for (rule, count) in activations.iter() {
        for _ in 0..count {
            if chars.is_empty() {
                break;
            }
            let pos = rng.gen_range(0..chars.len());
            match rule {
                MalRule::Capitalization => {
                    let c = chars[pos];
                    chars[pos] = if c.is_uppercase() {
                        c.to_lowercase().next().unwrap_or(c)
                    } else {
                        c.to_uppercase().next().unwrap_or(c)
                    };
                }
                MalRule::Transposition => {
                    if chars.len() >= 2 {
                        let p = pos.min(chars.len() - 2);
                        chars.swap(p, p + 1);
                    }
                }
                MalRule::LetterConfusion
                | MalRule::PhonemeGraphemeMatch
                | MalRule::Typing => {
                    // substitute; the precise partner does not matter for
                    // the rate model, only for log realism
                    let mut sub = random_letter(rng);
                    if sub == chars[pos].to_lowercase().next().unwrap_or(sub) {
                        sub = if sub == 'z' { 'a' } else { 'x' };
                    }
                    let _ = tables;
                    chars[pos] = sub;
                }
                MalRule::PhonemeOmission => {
                    chars.remove(pos);
                }
                MalRule::Insertion => {
                    chars.insert(pos, random_letter(rng));
                }
            }
        }
    }
    chars.into_iter().collect()
}

/// Simulate one session of one student (the closed loop). Events and truth
/// are appended; the student's internal state persists across calls.
pub struct Simulator<'a> {
    net: &'a SkillNet,
    words: Vec<WordEntry>,
    tables: crate::spelling::SpellingTables,
    cfg: SimConfig,
    students: Vec<StudentSim>,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: SimConfig, net: &'a SkillNet, words: Vec<WordEntry>) -> Result<Simulator<'a>> {
        let population = generate_population(&cfg, net)?;
        let students = population
            .into_iter()
            .enumerate()
            .map(|(i, s)| StudentSim::new(s, net, &cfg, i))
            .collect();
        Ok(Simulator {
            net,
            words,
            tables: crate::spelling::SpellingTables::default_tables(),
            cfg,
            students,
        })
    }

    pub fn students(&self) -> Vec<&SyntheticStudent> {
        self.students.iter().map(|s| &s.student).collect()
    }

    /// Run one session for every student.
    pub fn run_session(&mut self, session_idx: usize) -> (Vec<Event>, Vec<TruthRecord>) {
        let mut events = Vec::new();
        let mut truth = Vec::new();
        let session_id = format!("sess{session_idx:03}");
        for sim in &mut self.students {
            // sessions are spaced well apart
            sim.clock_ms = (session_idx as i64) * 6 * 3600 * 1000;
            let t = sim.tick(0, 1000);
            events.push(Event::new(&sim.student.id, &session_id, t, EventKind::NavGame));
            for _ in 0..self.cfg.session_length {
                match self.cfg.scenario {
                    Scenario::Math => {
                        sim.math_task(self.net, &self.cfg, &session_id, &mut events, &mut truth)
                    }
                    Scenario::Spelling => sim.spelling_task(
                        &self.words,
                        &self.tables,
                        &session_id,
                        &mut events,
                        &mut truth,
                    ),
                }
            }
        }
        (events, truth)
    }

    /// Run the configured number of sessions; events come out grouped by
    /// session, then student, ordered in time within each student-session.
    pub fn run(mut self) -> SimRun {
        let mut events = Vec::new();
        let mut truth = Vec::new();
        for s in 0..self.cfg.sessions {
            let (mut e, mut t) = self.run_session(s);
            events.append(&mut e);
            truth.append(&mut t);
        }
        SimRun {
            events,
            truth,
            students: self.students.into_iter().map(|s| s.student).collect(),
        }
    }
}

/// Convenience wrapper: generate, simulate, return the run.
pub fn simulate(cfg: SimConfig, net: &SkillNet, words: Vec<WordEntry>) -> Result<SimRun> {
    Ok(Simulator::new(cfg, net, words)?.run())
}
