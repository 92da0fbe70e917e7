//! Engagement dynamics from input data alone.
//!
//! Per answer step the module extracts timing/input/error features, splits
//! every feature series into a slow trend and a local component (lossless:
//! trend + local = raw), models the probability that an error repeats at the
//! next presentation of the same item (L1 logistic regression, grouped
//! 10-fold cross-validation), and estimates two binary engagement states,
//! focused and receptive, with independent two-state Gaussian hidden Markov
//! chains recombined through an empirical co-occurrence table.

use serde::{Deserialize, Serialize};

use crate::events::{EventKind, Session};
use crate::math::lasso::{fit_lasso_logistic_cv, LassoCvReport, LassoFit};
use crate::math::stats::{log_gauss_pdf, mean, median, variance};
use crate::{Error, Result};

/// Default EMA coefficient of the slow trend.
pub const DEFAULT_SLOW_ALPHA: f64 = 0.05;

/// One answer step's raw features. `None` marks a value that could not be
/// measured (first presentation, empty window, missing payload).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementFeatures {
    pub t: i64,
    /// Item (task or word) the step's answer was about.
    pub item: Option<String>,
    /// Keystroke-level inputs per minute inside the step window.
    pub input_rate: Option<f64>,
    /// Variance of the instantaneous input rate (per-gap inputs/minute).
    pub input_rate_variance: Option<f64>,
    pub answer_ms: Option<f64>,
    /// Help calls per minute inside the step window.
    pub help_rate: Option<f64>,
    /// Minor errors (invalid inputs not repeated at the item's next
    /// presentation) per minute inside the step window.
    pub minor_error_rate: Option<f64>,
    /// Correctness of the step's answer, as 0/1.
    pub performance: Option<f64>,
    /// Seconds since the previous presentation of the same item.
    pub decay_s: Option<f64>,
    /// Answers between the previous presentation of the same item and now.
    pub interference: Option<f64>,
}

/// The six features that get trend/local split treatment.
pub const SPLIT_FEATURES: [&str; 6] = [
    "input_rate",
    "input_rate_variance",
    "answer_ms",
    "help_rate",
    "minor_error_rate",
    "performance",
];

impl EngagementFeatures {
    fn split_values(&self) -> [Option<f64>; 6] {
        [
            self.input_rate,
            self.input_rate_variance,
            self.answer_ms,
            self.help_rate,
            self.minor_error_rate,
            self.performance,
        ]
    }
}

/// One feature vector per answer event of the session. Sessions without
/// answers produce an empty series.
pub fn extract_engagement_features(session: &Session) -> Vec<EngagementFeatures> {
    let answers: Vec<usize> = session
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == EventKind::AnswerSubmitted)
        .map(|(i, _)| i)
        .collect();
    if answers.is_empty() {
        return Vec::new();
    }
    let session_start = session.events.first().unwrap().t;

    // first pass: window statistics and item bookkeeping
    struct Step {
        features: EngagementFeatures,
        invalid_count: usize,
    }
    let mut steps: Vec<Step> = Vec::new();
    let mut window_start = session_start;
    let mut last_seen: std::collections::BTreeMap<String, (i64, usize)> =
        std::collections::BTreeMap::new();
    for (answer_idx, &ev_idx) in answers.iter().enumerate() {
        let answer = &session.events[ev_idx];
        let view = crate::events::AnswerView::from_event(answer);
        let window: Vec<&crate::events::Event> = session
            .events
            .iter()
            .filter(|e| e.t > window_start && e.t <= answer.t || (answer_idx == 0 && e.t == window_start))
            .collect();
        let window_ms = (answer.t - window_start).max(0);
        let window_min = window_ms as f64 / 60_000.0;

        let input_times: Vec<i64> = window
            .iter()
            .filter(|e| e.kind.is_input())
            .map(|e| e.t)
            .collect();
        let input_rate = if window_min > 0.0 {
            Some(input_times.len() as f64 / window_min)
        } else {
            None
        };
        let rate_variance = if input_times.len() >= 3 {
            let rates: Vec<f64> = input_times
                .windows(2)
                .map(|w| 60_000.0 / ((w[1] - w[0]).max(1)) as f64)
                .collect();
            Some(variance(&rates))
        } else {
            None
        };
        let helps = window.iter().filter(|e| e.kind == EventKind::HelpCall).count();
        let help_rate = if window_min > 0.0 {
            Some(helps as f64 / window_min)
        } else {
            None
        };
        let invalid_count = window
            .iter()
            .filter(|e| e.kind == EventKind::InvalidInput)
            .count();

        let item = view.item_id().map(str::to_string);
        let (decay_s, interference) = match item.as_deref().and_then(|it| last_seen.get(it)) {
            Some(&(prev_t, prev_idx)) => (
                Some((answer.t - prev_t) as f64 / 1000.0),
                Some((answer_idx - prev_idx - 1) as f64),
            ),
            None => (None, None),
        };
        if let Some(it) = &item {
            last_seen.insert(it.clone(), (answer.t, answer_idx));
        }

        steps.push(Step {
            features: EngagementFeatures {
                t: answer.t,
                item,
                input_rate,
                input_rate_variance: rate_variance,
                answer_ms: view.answer_ms.map(|v| v as f64),
                help_rate,
                minor_error_rate: None, // second pass
                performance: view.correct.map(|c| if c { 1.0 } else { 0.0 }),
                decay_s,
                interference,
            },
            invalid_count,
        });
        window_start = answer.t;
    }

    // second pass: an invalid input is minor when the item's next
    // presentation is clean; unknown without a next presentation
    for i in 0..steps.len() {
        let item = match &steps[i].features.item {
            Some(it) => it.clone(),
            None => continue,
        };
        let next = (i + 1..steps.len()).find(|&j| steps[j].features.item.as_deref() == Some(&item));
        let window_min = {
            let start = if i == 0 { session_start } else { steps[i - 1].features.t };
            (steps[i].features.t - start) as f64 / 60_000.0
        };
        steps[i].features.minor_error_rate = match next {
            Some(j) if window_min > 0.0 => {
                let minor = if steps[j].invalid_count == 0 { steps[i].invalid_count } else { 0 };
                Some(minor as f64 / window_min)
            }
            _ => None,
        };
    }

    steps.into_iter().map(|s| s.features).collect()
}

/// Trend and local components per split feature; `trend + local = raw`
/// wherever raw is present.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSeries {
    pub trend: Vec<[Option<f64>; 6]>,
    pub local: Vec<[Option<f64>; 6]>,
}

/// Exponential-moving-average time scale separation. The trend starts at the
/// first present value of each feature and carries over missing entries.
pub fn timescale_split(series: &[EngagementFeatures], slow_alpha: f64) -> SplitSeries {
    let mut trend_state: [Option<f64>; 6] = [None; 6];
    let mut trend = Vec::with_capacity(series.len());
    let mut local = Vec::with_capacity(series.len());
    for step in series {
        let raw = step.split_values();
        let mut t_row: [Option<f64>; 6] = [None; 6];
        let mut l_row: [Option<f64>; 6] = [None; 6];
        for f in 0..6 {
            if let Some(x) = raw[f] {
                let new_trend = match trend_state[f] {
                    Some(prev) => prev + slow_alpha * (x - prev),
                    None => x,
                };
                trend_state[f] = Some(new_trend);
                t_row[f] = Some(new_trend);
                l_row[f] = Some(x - new_trend);
            } else {
                t_row[f] = trend_state[f];
            }
        }
        trend.push(t_row);
        local.push(l_row);
    }
    SplitSeries { trend, local }
}

// ----------------------------------------------------------------- ERP fit

/// Column layout of an ERP design matrix: trend and local component per
/// split feature, the two forgetting terms, and the engagement state
/// estimates at the error step.
pub fn erp_feature_names() -> Vec<String> {
    let mut names = Vec::new();
    for f in SPLIT_FEATURES {
        names.push(format!("{f}_trend"));
        names.push(format!("{f}_local"));
    }
    names.push("decay_s".into());
    names.push("interference".into());
    names.push("p_focused".into());
    names.push("p_receptive".into());
    names
}

/// Repetition-labeled design matrix for the ERP model.
#[derive(Debug, Clone, Default)]
pub struct ErpDataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// True when the error recurred at the item's next presentation.
    pub labels: Vec<bool>,
    /// Group id per row (student), for leakage-free fold assignment.
    pub groups: Vec<usize>,
}

impl ErpDataset {
    pub fn new() -> ErpDataset {
        ErpDataset {
            feature_names: erp_feature_names(),
            ..ErpDataset::default()
        }
    }

    pub fn push(&mut self, row: Vec<f64>, label: bool, group: usize) {
        debug_assert_eq!(row.len(), self.feature_names.len());
        self.rows.push(row);
        self.labels.push(label);
        self.groups.push(group);
    }
}

/// Build ERP rows: one per erroneous answer step whose item is presented
/// again later in the same session. Missing feature values are imputed with
/// the dataset column mean after collection.
pub fn erp_dataset(sessions_per_student: &[Vec<&Session>], slow_alpha: f64) -> ErpDataset {
    let mut data = ErpDataset::new();
    let mut raw_rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (student, sessions) in sessions_per_student.iter().enumerate() {
        for session in sessions {
            let series = extract_engagement_features(session);
            if series.is_empty() {
                continue;
            }
            let split = timescale_split(&series, slow_alpha);
            let states = estimate_engagement(&series);
            for (i, step) in series.iter().enumerate() {
                if step.performance != Some(0.0) {
                    continue; // ERP rows are error steps only
                }
                let item = match &step.item {
                    Some(it) => it,
                    None => continue,
                };
                let next = (i + 1..series.len())
                    .find(|&j| series[j].item.as_deref() == Some(item.as_str()));
                let j = match next {
                    Some(j) => j,
                    None => continue,
                };
                let repeated_error = series[j].performance == Some(0.0);
                let mut row: Vec<Option<f64>> = Vec::with_capacity(16);
                for f in 0..6 {
                    row.push(split.trend[i][f]);
                    row.push(split.local[i][f]);
                }
                // forgetting terms measured at the repetition
                row.push(series[j].decay_s);
                row.push(series[j].interference);
                row.push(Some(states[i].p_focused));
                row.push(Some(states[i].p_receptive));
                raw_rows.push(row);
                data.labels.push(repeated_error);
                data.groups.push(student);
            }
        }
    }
    // column-mean imputation
    let p = data.feature_names.len();
    let mut means = vec![0.0; p];
    for (f, m) in means.iter_mut().enumerate() {
        let vals: Vec<f64> = raw_rows.iter().filter_map(|r| r[f]).collect();
        *m = if vals.is_empty() { 0.0 } else { mean(&vals) };
    }
    data.rows = raw_rows
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(f, v)| v.unwrap_or(means[f])).collect())
        .collect();
    data
}

/// Fitted error repetition probability model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErpModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub penalty: f64,
}

impl ErpModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<ErpModel> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }
}

/// LASSO logistic fit over the penalty grid, penalty chosen by grouped
/// 10-fold cross-validation with the one-standard-error rule.
pub fn fit_erp(dataset: &ErpDataset, seed: u64) -> Result<(ErpModel, LassoCvReport)> {
    let (fit, report): (LassoFit, LassoCvReport) =
        fit_lasso_logistic_cv(&dataset.rows, &dataset.labels, &dataset.groups, 10, seed)?;
    Ok((
        ErpModel {
            feature_names: dataset.feature_names.clone(),
            weights: fit.weights,
            intercept: fit.intercept,
            penalty: fit.lambda,
        },
        report,
    ))
}

/// Logistic score of one feature row under the fitted model.
pub fn predict_erp(model: &ErpModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            got: features.len(),
        });
    }
    let z: f64 = model.intercept
        + model.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>();
    Ok(crate::math::sigmoid(z))
}

// ------------------------------------------------------- state estimation

/// Per-step engagement estimate; the joint distribution sums to one and the
/// marginals are its projections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementEstimate {
    pub p_focused: f64,
    pub p_receptive: f64,
    /// joint[f][r]: probability of focused-state f and receptive-state r
    /// (index 1 = state active).
    pub joint: [[f64; 2]; 2],
}

/// Two-state hidden Markov chain with diagonal Gaussian emissions and
/// missing-channel support.
#[derive(Debug, Clone)]
pub struct TwoStateHmm {
    pub means: [Vec<f64>; 2],
    pub vars: [Vec<f64>; 2],
    pub trans: [[f64; 2]; 2],
    pub init: [f64; 2],
}

impl TwoStateHmm {
    /// EM fit. States initialize from a median split of the first present
    /// channel, so the fit is deterministic.
    pub fn fit(obs: &[Vec<Option<f64>>], iterations: usize) -> TwoStateHmm {
        let dims = obs.first().map(|o| o.len()).unwrap_or(0);
        let split_channel = (0..dims)
            .find(|&d| obs.iter().filter(|o| o[d].is_some()).count() >= 2)
            .unwrap_or(0);
        let present: Vec<f64> = obs.iter().filter_map(|o| o.get(split_channel).copied().flatten()).collect();
        let med = if present.is_empty() { 0.0 } else { median(&present) };
        let mut hmm = TwoStateHmm {
            means: [vec![0.0; dims], vec![0.0; dims]],
            vars: [vec![1.0; dims], vec![1.0; dims]],
            trans: [[0.9, 0.1], [0.1, 0.9]],
            init: [0.5, 0.5],
        };
        // moment init per side of the median
        for d in 0..dims {
            let (mut lo, mut hi): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
            for o in obs {
                if let (Some(v), Some(key)) = (o[d], o[split_channel]) {
                    if key <= med {
                        lo.push(v);
                    } else {
                        hi.push(v);
                    }
                }
            }
            hmm.means[0][d] = if lo.is_empty() { 0.0 } else { mean(&lo) };
            hmm.means[1][d] = if hi.is_empty() { hmm.means[0][d] } else { mean(&hi) };
            hmm.vars[0][d] = variance(&lo).max(1e-6);
            hmm.vars[1][d] = variance(&hi).max(1e-6);
        }
        for _ in 0..iterations {
            let gamma = hmm.posteriors(obs);
            let xi_acc = hmm.transition_expectations(obs, &gamma);
            // M step
            for s in 0..2 {
                let weight: f64 = gamma.iter().map(|g| g[s]).sum();
                if weight < 1e-9 {
                    continue;
                }
                for d in 0..dims {
                    let mut wsum = 0.0;
                    let mut acc = 0.0;
                    for (o, g) in obs.iter().zip(&gamma) {
                        if let Some(v) = o[d] {
                            wsum += g[s];
                            acc += g[s] * v;
                        }
                    }
                    if wsum > 1e-9 {
                        hmm.means[s][d] = acc / wsum;
                        let mut var = 0.0;
                        for (o, g) in obs.iter().zip(&gamma) {
                            if let Some(v) = o[d] {
                                var += g[s] * (v - hmm.means[s][d]).powi(2);
                            }
                        }
                        hmm.vars[s][d] = (var / wsum).max(1e-6);
                    }
                }
                let from: f64 = xi_acc[s][0] + xi_acc[s][1];
                if from > 1e-9 {
                    hmm.trans[s][0] = (xi_acc[s][0] / from).clamp(0.01, 0.99);
                    hmm.trans[s][1] = 1.0 - hmm.trans[s][0];
                }
            }
            hmm.init = [gamma[0][0].clamp(0.01, 0.99), 0.0];
            hmm.init[1] = 1.0 - hmm.init[0];
        }
        hmm
    }

    fn log_emit(&self, state: usize, o: &[Option<f64>]) -> f64 {
        o.iter()
            .enumerate()
            .filter_map(|(d, v)| {
                v.map(|x| log_gauss_pdf(x, self.means[state][d], self.vars[state][d]))
            })
            .sum()
    }

    /// Forward-backward smoothed posteriors per step.
    pub fn posteriors(&self, obs: &[Vec<Option<f64>>]) -> Vec<[f64; 2]> {
        let n = obs.len();
        if n == 0 {
            return Vec::new();
        }
        let mut alpha = vec![[0.0f64; 2]; n];
        let mut scale = vec![0.0f64; n];
        for s in 0..2 {
            alpha[0][s] = self.init[s] * self.log_emit(s, &obs[0]).exp();
        }
        normalize2(&mut alpha[0], &mut scale[0]);
        for t in 1..n {
            for j in 0..2 {
                let m = alpha[t - 1][0] * self.trans[0][j] + alpha[t - 1][1] * self.trans[1][j];
                alpha[t][j] = m * self.log_emit(j, &obs[t]).exp();
            }
            normalize2(&mut alpha[t], &mut scale[t]);
        }
        let mut beta = vec![[1.0f64; 2]; n];
        for t in (0..n - 1).rev() {
            for i in 0..2 {
                beta[t][i] = (0..2)
                    .map(|j| {
                        self.trans[i][j] * self.log_emit(j, &obs[t + 1]).exp() * beta[t + 1][j]
                    })
                    .sum::<f64>()
                    / scale[t + 1].max(1e-300);
            }
        }
        (0..n)
            .map(|t| {
                let mut g = [alpha[t][0] * beta[t][0], alpha[t][1] * beta[t][1]];
                let z = g[0] + g[1];
                if z > 0.0 {
                    g[0] /= z;
                    g[1] /= z;
                } else {
                    g = [0.5, 0.5];
                }
                g
            })
            .collect()
    }

    fn transition_expectations(&self, obs: &[Vec<Option<f64>>], gamma: &[[f64; 2]]) -> [[f64; 2]; 2] {
        let n = obs.len();
        let mut acc = [[0.0f64; 2]; 2];
        if n < 2 {
            return acc;
        }
        for t in 0..n - 1 {
            let mut xi = [[0.0f64; 2]; 2];
            let mut z = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    xi[i][j] =
                        gamma[t][i] * self.trans[i][j] * self.log_emit(j, &obs[t + 1]).exp();
                    z += xi[i][j];
                }
            }
            if z > 0.0 {
                for i in 0..2 {
                    for j in 0..2 {
                        acc[i][j] += xi[i][j] / z;
                    }
                }
            }
        }
        acc
    }
}

fn normalize2(v: &mut [f64; 2], scale: &mut f64) {
    *scale = v[0] + v[1];
    if *scale > 0.0 {
        v[0] /= *scale;
        v[1] /= *scale;
    } else {
        *v = [0.5, 0.5];
        *scale = 1e-300;
    }
}

/// Estimate focused/receptive states over one session's feature series.
///
/// Focused chain observes the local components of input-rate variance and
/// minor-error rate; receptive chain observes the help rate and the local
/// performance residual. State polarity: the focused (receptive) state is
/// the one with the lower mean observation. The joint recombines the two
/// marginals with an empirical co-occurrence table.
pub fn estimate_engagement(series: &[EngagementFeatures]) -> Vec<EngagementEstimate> {
    let flat = EngagementEstimate {
        p_focused: 0.5,
        p_receptive: 0.5,
        joint: [[0.25; 2]; 2],
    };
    if series.len() < 2 {
        return vec![flat; series.len()];
    }
    let split = timescale_split(series, DEFAULT_SLOW_ALPHA);
    // channel indices in SPLIT_FEATURES: 1 = input_rate_variance, 4 = minor
    // error rate, 3 = help rate, 5 = performance
    let focused_obs: Vec<Vec<Option<f64>>> = (0..series.len())
        .map(|i| vec![split.local[i][1], split.local[i][4]])
        .collect();
    let receptive_obs: Vec<Vec<Option<f64>>> = (0..series.len())
        .map(|i| vec![series[i].help_rate, split.local[i][5].map(|v| -v)])
        .collect();

    let p_focused = low_state_posterior(&focused_obs);
    let p_receptive = low_state_posterior(&receptive_obs);

    // co-occurrence of hard assignments, additively smoothed
    let mut table = [[0.25f64; 2]; 2];
    for (pf, pr) in p_focused.iter().zip(&p_receptive) {
        let f = usize::from(*pf >= 0.5);
        let r = usize::from(*pr >= 0.5);
        table[f][r] += 1.0;
    }
    let total: f64 = table.iter().flatten().sum();
    let marg_f = [(table[0][0] + table[0][1]) / total, (table[1][0] + table[1][1]) / total];
    let marg_r = [(table[0][0] + table[1][0]) / total, (table[0][1] + table[1][1]) / total];

    p_focused
        .iter()
        .zip(&p_receptive)
        .map(|(&pf, &pr)| {
            let mut joint = [[0.0f64; 2]; 2];
            let mut z = 0.0;
            for f in 0..2 {
                for r in 0..2 {
                    let base = if f == 1 { pf } else { 1.0 - pf } * if r == 1 { pr } else { 1.0 - pr };
                    let weight = (table[f][r] / total) / (marg_f[f] * marg_r[r]).max(1e-12);
                    joint[f][r] = base * weight;
                    z += joint[f][r];
                }
            }
            for row in joint.iter_mut() {
                for cell in row.iter_mut() {
                    *cell /= z;
                }
            }
            EngagementEstimate {
                p_focused: joint[1][0] + joint[1][1],
                p_receptive: joint[0][1] + joint[1][1],
                joint,
            }
        })
        .collect()
}

/// Posterior of being in the low-mean state of a two-state chain fitted to
/// the observations (0.5 everywhere when the states collapse).
fn low_state_posterior(obs: &[Vec<Option<f64>>]) -> Vec<f64> {
    let hmm = TwoStateHmm::fit(obs, 30);
    let post = hmm.posteriors(obs);
    let mean_of = |s: usize| -> f64 { hmm.means[s].iter().sum() };
    let low = if mean_of(0) <= mean_of(1) { 0 } else { 1 };
    post.iter().map(|g| g[low]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Event, EventKind};
    use approx::assert_abs_diff_eq;

    fn session(events: Vec<Event>) -> Session {
        Session {
            student_id: "s".into(),
            session_id: "x".into(),
            events,
        }
    }

    fn answer(t: i64, item: &str, correct: bool, ms: i64) -> Event {
        Event::new("s", "x", t, EventKind::AnswerSubmitted)
            .with("task", item.into())
            .with("correct", correct.into())
            .with("ms", ms.into())
    }

    #[test]
    fn input_rate_is_inputs_per_minute() {
        let mut events = vec![Event::new("s", "x", 0, EventKind::TaskShown)];
        for i in 0..10 {
            events.push(Event::new("s", "x", 1 + i * 5_000, EventKind::KeyInput));
        }
        events.push(answer(60_000, "w1", true, 900));
        let series = extract_engagement_features(&session(events));
        assert_eq!(series.len(), 1);
        assert_abs_diff_eq!(series[0].input_rate.unwrap(), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn no_help_calls_mean_zero_rate() {
        let events = vec![
            Event::new("s", "x", 0, EventKind::KeyInput),
            answer(30_000, "w1", true, 500),
        ];
        let series = extract_engagement_features(&session(events));
        assert_abs_diff_eq!(series[0].help_rate.unwrap(), 0.0);
    }

    #[test]
    fn repetition_decay_and_interference() {
        let events = vec![
            answer(0, "w1", false, 700),
            answer(40_000, "w2", true, 700),
            answer(80_000, "w3", true, 700),
            answer(120_000, "w1", true, 700),
        ];
        let series = extract_engagement_features(&session(events));
        let last = &series[3];
        assert_abs_diff_eq!(last.decay_s.unwrap(), 120.0, epsilon = 1e-9);
        assert_abs_diff_eq!(last.interference.unwrap(), 2.0, epsilon = 1e-9);
        assert!(series[0].decay_s.is_none());
    }

    #[test]
    fn session_without_answers_is_empty() {
        let events = vec![Event::new("s", "x", 0, EventKind::KeyInput)];
        assert!(extract_engagement_features(&session(events)).is_empty());
    }

    fn constant_series(n: usize, value: f64) -> Vec<EngagementFeatures> {
        (0..n)
            .map(|i| EngagementFeatures {
                t: i as i64,
                item: None,
                input_rate: Some(value),
                input_rate_variance: Some(value),
                answer_ms: Some(value),
                help_rate: Some(value),
                minor_error_rate: Some(value),
                performance: Some(value),
                decay_s: None,
                interference: None,
            })
            .collect()
    }

    #[test]
    fn constant_series_has_zero_local() {
        let series = constant_series(20, 3.5);
        let split = timescale_split(&series, 0.05);
        for t in 0..20 {
            for f in 0..6 {
                assert_abs_diff_eq!(split.trend[t][f].unwrap(), 3.5, epsilon = 1e-12);
                assert_abs_diff_eq!(split.local[t][f].unwrap(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn impulse_lands_in_local_component() {
        let mut series = constant_series(20, 1.0);
        series[10].input_rate = Some(11.0);
        let split = timescale_split(&series, 0.05);
        // trend moves by alpha * impulse, local captures the rest
        assert_abs_diff_eq!(split.trend[10][0].unwrap(), 1.0 + 0.05 * 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(split.local[10][0].unwrap(), 10.0 - 0.5, epsilon = 1e-12);
        assert!(split.local[9][0].unwrap().abs() < 1e-12);
    }

    #[test]
    fn split_reconstructs_raw_exactly() {
        let mut series = constant_series(30, 2.0);
        for (i, s) in series.iter_mut().enumerate() {
            s.answer_ms = Some(500.0 + (i as f64 * 37.0) % 211.0);
            if i % 7 == 0 {
                s.help_rate = None;
            }
        }
        let split = timescale_split(&series, 0.1);
        for (t, s) in series.iter().enumerate() {
            for (f, raw) in s.split_values().iter().enumerate() {
                match raw {
                    Some(x) => assert_abs_diff_eq!(
                        split.trend[t][f].unwrap() + split.local[t][f].unwrap(),
                        x,
                        epsilon = 1e-12
                    ),
                    None => assert!(split.local[t][f].is_none()),
                }
            }
        }
    }

    #[test]
    fn zero_weight_model_predicts_base_rate() {
        let model = ErpModel {
            feature_names: vec!["a".into(), "b".into()],
            weights: vec![0.0, 0.0],
            intercept: (0.3f64 / 0.7).ln(),
            penalty: 1.0,
        };
        let p = predict_erp(&model, &[5.0, -3.0]).unwrap();
        assert_abs_diff_eq!(p, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn positive_forgetting_weight_raises_erp() {
        let model = ErpModel {
            feature_names: vec!["decay_s".into()],
            weights: vec![0.5],
            intercept: -1.0,
            penalty: 0.0,
        };
        let p1 = predict_erp(&model, &[1.0]).unwrap();
        let p2 = predict_erp(&model, &[2.0]).unwrap();
        assert!(p2 > p1);
    }

    #[test]
    fn one_logit_gap_matches_algebra() {
        let model = ErpModel {
            feature_names: vec!["nonreceptive".into()],
            weights: vec![1.0],
            intercept: -0.5,
            penalty: 0.0,
        };
        let lo = predict_erp(&model, &[0.0]).unwrap();
        let hi = predict_erp(&model, &[1.0]).unwrap();
        let logit = |p: f64| (p / (1.0 - p)).ln();
        assert_abs_diff_eq!(logit(hi) - logit(lo), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = ErpModel {
            feature_names: vec!["a".into()],
            weights: vec![1.0],
            intercept: 0.0,
            penalty: 0.0,
        };
        assert!(predict_erp(&model, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn identical_emissions_give_flat_posteriors() {
        let obs: Vec<Vec<Option<f64>>> = (0..30).map(|_| vec![Some(1.0), Some(2.0)]).collect();
        let hmm = TwoStateHmm::fit(&obs, 20);
        let post = hmm.posteriors(&obs);
        for g in post {
            assert_abs_diff_eq!(g[0], 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn separated_states_are_recovered() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut obs = Vec::new();
        let mut truth = Vec::new();
        let mut state = 0usize;
        for _ in 0..200 {
            if rng.gen_bool(0.1) {
                state = 1 - state;
            }
            truth.push(state);
            let base = if state == 0 { 0.0 } else { 6.0 };
            obs.push(vec![
                Some(base + rng.gen::<f64>() - 0.5),
                Some(base + rng.gen::<f64>() - 0.5),
            ]);
        }
        let hmm = TwoStateHmm::fit(&obs, 40);
        let post = hmm.posteriors(&obs);
        let low = if hmm.means[0].iter().sum::<f64>() < hmm.means[1].iter().sum::<f64>() {
            0
        } else {
            1
        };
        let hits = post
            .iter()
            .zip(&truth)
            .filter(|(g, &t)| usize::from(g[low] < 0.5) == t)
            .count();
        let accuracy = hits as f64 / truth.len() as f64;
        assert!(accuracy >= 0.9, "accuracy {accuracy}");
    }

    #[test]
    fn engagement_joint_sums_to_one() {
        let mut series = constant_series(40, 1.0);
        for (i, s) in series.iter_mut().enumerate() {
            s.input_rate_variance = Some(if i % 2 == 0 { 0.5 } else { 4.0 });
            s.help_rate = Some((i % 3) as f64);
        }
        for est in estimate_engagement(&series) {
            let total: f64 = est.joint.iter().flatten().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(est.p_focused, est.joint[1][0] + est.joint[1][1], epsilon = 1e-12);
            assert_abs_diff_eq!(est.p_receptive, est.joint[0][1] + est.joint[1][1], epsilon = 1e-12);
        }
    }

    #[test]
    fn short_series_is_flat() {
        let series = constant_series(1, 1.0);
        let est = estimate_engagement(&series);
        assert_eq!(est.len(), 1);
        assert_abs_diff_eq!(est[0].p_focused, 0.5);
    }
}
