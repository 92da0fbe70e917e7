//! Non-intrusive risk screening from gameplay logs.
//!
//! Candidate features are grouped by absolute correlation (average linkage),
//! one representative per group survives, and representatives are ordered by
//! ascending unpaired-t-test p-value. Classification is sequential Naive
//! Bayes with Gaussian class conditionals: features arrive in model order
//! and the test stops early once the posterior stops moving, which adapts
//! the test duration to the student.

use serde::{Deserialize, Serialize};

use crate::events::{Event, EventKind};
use crate::math::stats::{log_gauss_pdf, mean, median, percentile, variance, welch_t_pvalue};
use crate::skills::{NumberRange, SkillNet};
use crate::{Error, Result};

/// Feature family, mirroring the bank's `kind` strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "P")]
    Performance,
    #[serde(rename = "AT")]
    AnswerTime,
    #[serde(rename = "TM")]
    TypicalMistake,
    #[serde(rename = "SN")]
    Strategy,
}

/// One candidate screening feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenFeature {
    pub id: String,
    pub kind: FeatureKind,
    /// Minutes of gameplay needed to observe the feature.
    pub time_min: f64,
    #[serde(default)]
    pub group_hint: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desc: Option<String>,
}

pub fn load_feature_bank(json: &str) -> Result<Vec<ScreenFeature>> {
    serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
}

/// The bank shipped with the crate (~25 minutes of full-test time).
pub fn sample_feature_bank() -> Vec<ScreenFeature> {
    load_feature_bank(include_str!("../data/feature_bank.json")).expect("shipped bank is valid")
}

/// Column-oriented feature values, one row per student.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn col_index(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == id)
    }

    fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }
}

// --------------------------------------------------------- feature selection

fn abs_pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    (num / (va * vb).sqrt()).abs()
}

/// Group features by average-linkage clustering on absolute Pearson
/// correlation (merge while the best average correlation is at least
/// `threshold`), keep the smallest-p representative per group, and return
/// the representatives ordered by ascending p-value. Zero-variance features
/// are dropped. Deterministic: ties break by feature id.
pub fn select_features(
    table: &FeatureTable,
    bank: &[ScreenFeature],
    labels: &[bool],
    threshold: f64,
) -> Result<Vec<ScreenFeature>> {
    if labels.iter().filter(|&&l| l).count() < 2 || labels.iter().filter(|&&l| !l).count() < 2 {
        return Err(Error::NotEnoughData("need at least two students per class".into()));
    }
    // usable columns: present in the bank and non-degenerate
    let mut cols: Vec<(usize, &ScreenFeature)> = Vec::new();
    for feature in bank {
        if let Some(idx) = table.col_index(&feature.id) {
            if variance(&table.column(idx)) > 1e-12 {
                cols.push((idx, feature));
            }
        }
    }
    if cols.is_empty() {
        return Err(Error::NotEnoughData("no usable features".into()));
    }
    let n = cols.len();
    let mut corr = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        corr[i][i] = 1.0;
        for j in (i + 1)..n {
            let c = abs_pearson(&table.column(cols[i].0), &table.column(cols[j].0));
            corr[i][j] = c;
            corr[j][i] = c;
        }
    }
    // average-linkage agglomeration above the threshold
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut sum = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum += corr[i][j];
                    }
                }
                let avg = sum / (clusters[a].len() * clusters[b].len()) as f64;
                if best.map(|(bv, _, _)| avg > bv).unwrap_or(true) {
                    best = Some((avg, a, b));
                }
            }
        }
        match best {
            Some((avg, a, b)) if avg >= threshold => {
                let merged = clusters.remove(b);
                clusters[a].extend(merged);
                clusters[a].sort_unstable();
            }
            _ => break,
        }
    }
    // representative per group: smallest p-value, tie-broken by feature id
    let p_value = |col: usize| -> f64 {
        let values = table.column(cols[col].0);
        let pos: Vec<f64> = values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l)
            .map(|(v, _)| *v)
            .collect();
        let neg: Vec<f64> = values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| !l)
            .map(|(v, _)| *v)
            .collect();
        welch_t_pvalue(&pos, &neg)
    };
    let mut representatives: Vec<(f64, &ScreenFeature)> = clusters
        .iter()
        .map(|cluster| {
            cluster
                .iter()
                .map(|&c| (p_value(c), cols[c].1))
                .min_by(|(pa, fa), (pb, fb)| {
                    pa.partial_cmp(pb).unwrap().then_with(|| fa.id.cmp(&fb.id))
                })
                .unwrap()
        })
        .collect();
    representatives
        .sort_by(|(pa, fa), (pb, fb)| pa.partial_cmp(pb).unwrap().then_with(|| fa.id.cmp(&fb.id)));
    Ok(representatives.into_iter().map(|(_, f)| f.clone()).collect())
}

// ----------------------------------------------------------------- fitting

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassConditional {
    pub mean: f64,
    pub var: f64,
}

/// Fitted screener: ordered features, Gaussian class conditionals per class,
/// class priors and the stopping rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreenerModel {
    pub features: Vec<ScreenFeature>,
    pub cond_risk: Vec<ClassConditional>,
    pub cond_clear: Vec<ClassConditional>,
    pub prior_risk: f64,
    /// Early stop once the posterior moves less than this...
    pub epsilon: f64,
    /// ...for this many consecutive features.
    pub stop_m: usize,
}

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_STOP_M: usize = 3;
const VAR_FLOOR: f64 = 1e-6;

impl ScreenerModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<ScreenerModel> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn full_test_minutes(&self) -> f64 {
        self.features.iter().map(|f| f.time_min).sum()
    }
}

/// Gaussian Naive Bayes fit over the ordered features.
pub fn fit_screener(
    table: &FeatureTable,
    labels: &[bool],
    ordering: &[ScreenFeature],
    epsilon: f64,
    stop_m: usize,
) -> Result<ScreenerModel> {
    if table.rows.len() != labels.len() {
        return Err(Error::NotEnoughData("rows and labels differ in length".into()));
    }
    let n_risk = labels.iter().filter(|&&l| l).count();
    if n_risk == 0 || n_risk == labels.len() {
        return Err(Error::SingleClass);
    }
    let mut cond_risk = Vec::with_capacity(ordering.len());
    let mut cond_clear = Vec::with_capacity(ordering.len());
    for feature in ordering {
        let idx = table
            .col_index(&feature.id)
            .ok_or_else(|| Error::Config(format!("feature '{}' missing from table", feature.id)))?;
        let values = table.column(idx);
        let split = |want: bool| -> ClassConditional {
            let class: Vec<f64> = values
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == want)
                .map(|(v, _)| *v)
                .collect();
            ClassConditional {
                mean: mean(&class),
                var: variance(&class).max(VAR_FLOOR),
            }
        };
        cond_risk.push(split(true));
        cond_clear.push(split(false));
    }
    Ok(ScreenerModel {
        features: ordering.to_vec(),
        cond_risk,
        cond_clear,
        prior_risk: n_risk as f64 / labels.len() as f64,
        epsilon,
        stop_m,
    })
}

// ---------------------------------------------------------------- screening

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskLabel {
    AtRisk,
    NotAtRisk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    pub label: RiskLabel,
    /// Posterior after the prior (index 0) and after each consumed feature.
    pub posterior_trace: Vec<f64>,
    pub features_used: usize,
    pub minutes: f64,
}

/// Sequentially screen one student. `stream` must present `(feature id,
/// value)` pairs in model order; a prefix is acceptable (the test may stop
/// early anyway), an out-of-order feature is an error.
///
/// The posterior after each feature is the Naive Bayes posterior over the
/// consumed set; log-likelihood ratios accumulate in feature-id order, so a
/// full (`epsilon = 0`) screening is exactly order-invariant.
pub fn screen(stream: &[(String, f64)], model: &ScreenerModel) -> Result<ScreenResult> {
    let prior_logit = (model.prior_risk / (1.0 - model.prior_risk)).ln();
    let mut trace = vec![model.prior_risk];
    let mut consumed: Vec<(usize, f64)> = Vec::new(); // (model index, llr)
    let mut minutes = 0.0;
    let mut calm_streak = 0usize;
    for (pos, (id, value)) in stream.iter().enumerate() {
        let expected = model
            .features
            .get(pos)
            .ok_or_else(|| Error::OutOfOrderFeature {
                expected: "<end of feature list>".into(),
                got: id.clone(),
            })?;
        if &expected.id != id {
            return Err(Error::OutOfOrderFeature {
                expected: expected.id.clone(),
                got: id.clone(),
            });
        }
        let llr = log_gauss_pdf(*value, model.cond_risk[pos].mean, model.cond_risk[pos].var)
            - log_gauss_pdf(*value, model.cond_clear[pos].mean, model.cond_clear[pos].var);
        consumed.push((pos, llr));
        minutes += expected.time_min;
        // canonical accumulation order keeps the sum permutation-exact
        let mut by_id: Vec<(&str, f64)> = consumed
            .iter()
            .map(|&(i, l)| (model.features[i].id.as_str(), l))
            .collect();
        by_id.sort_by(|a, b| a.0.cmp(b.0));
        let logit = prior_logit + by_id.iter().map(|(_, l)| l).sum::<f64>();
        let posterior = crate::math::sigmoid(logit);
        let moved = (posterior - trace.last().unwrap()).abs();
        trace.push(posterior);
        if moved < model.epsilon {
            calm_streak += 1;
            if calm_streak >= model.stop_m {
                break;
            }
        } else {
            calm_streak = 0;
        }
    }
    let final_posterior = *trace.last().unwrap();
    Ok(ScreenResult {
        label: if final_posterior >= 0.5 {
            RiskLabel::AtRisk
        } else {
            RiskLabel::NotAtRisk
        },
        posterior_trace: trace,
        features_used: consumed.len(),
        minutes,
    })
}

/// Screen a row whose values align with the model's feature order.
pub fn screen_row(row: &[f64], model: &ScreenerModel) -> Result<ScreenResult> {
    let stream: Vec<(String, f64)> = model
        .features
        .iter()
        .zip(row)
        .map(|(f, &v)| (f.id.clone(), v))
        .collect();
    screen(&stream, model)
}

// --------------------------------------------------------------- evaluation

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub mean_minutes: f64,
    pub mean_features: f64,
    /// (minutes m, fraction of students classified within m minutes), on a
    /// one-minute grid up to the full test length.
    pub classified_within: Vec<(f64, f64)>,
}

impl EvalReport {
    pub fn fraction_within(&self, minutes: f64) -> f64 {
        self.classified_within
            .iter()
            .take_while(|(m, _)| *m <= minutes)
            .last()
            .map(|(_, f)| *f)
            .unwrap_or(0.0)
    }
}

/// Confusion rates and duration statistics on a held-out table.
pub fn evaluate(table: &FeatureTable, labels: &[bool], model: &ScreenerModel) -> Result<EvalReport> {
    if table.rows.is_empty() {
        return Err(Error::NotEnoughData("empty evaluation set".into()));
    }
    let order: Vec<usize> = model
        .features
        .iter()
        .map(|f| {
            table
                .col_index(&f.id)
                .ok_or_else(|| Error::Config(format!("feature '{}' missing from table", f.id)))
        })
        .collect::<Result<_>>()?;
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut minutes = Vec::new();
    let mut features_used = Vec::new();
    for (row, &truth) in table.rows.iter().zip(labels) {
        let aligned: Vec<f64> = order.iter().map(|&i| row[i]).collect();
        let result = screen_row(&aligned, model)?;
        match (result.label, truth) {
            (RiskLabel::AtRisk, true) => tp += 1,
            (RiskLabel::AtRisk, false) => fp += 1,
            (RiskLabel::NotAtRisk, true) => fn_ += 1,
            (RiskLabel::NotAtRisk, false) => tn += 1,
        }
        minutes.push(result.minutes);
        features_used.push(result.features_used as f64);
    }
    let full = model.full_test_minutes();
    let mut classified_within = Vec::new();
    let mut grid = 1.0;
    while grid <= full + 1.0 {
        let frac = minutes.iter().filter(|&&m| m <= grid).count() as f64 / minutes.len() as f64;
        classified_within.push((grid, frac));
        grid += 1.0;
    }
    Ok(EvalReport {
        sensitivity: tp as f64 / (tp + fn_).max(1) as f64,
        specificity: tn as f64 / (tn + fp).max(1) as f64,
        accuracy: (tp + tn) as f64 / table.rows.len() as f64,
        mean_minutes: mean(&minutes),
        mean_features: mean(&features_used),
        classified_within,
    })
}

// ------------------------------------------------------ log feature extract

/// Compute the shipped bank's features for one student from their events.
/// Features with no relevant observations fall back to neutral defaults
/// instead of going missing, so every student yields a full row.
pub fn extract_features(events: &[Event], bank: &[ScreenFeature], net: &SkillNet) -> Vec<f64> {
    struct Answer<'a> {
        skill: Option<&'a str>,
        correct: bool,
        ms: f64,
        typical_error: Option<&'a str>,
    }
    let answers: Vec<Answer> = events
        .iter()
        .filter(|e| e.kind == EventKind::AnswerSubmitted)
        .map(|e| Answer {
            skill: e.payload_str("skill"),
            correct: e.payload_bool("correct").unwrap_or(false),
            ms: e.payload_i64("ms").unwrap_or(3000) as f64,
            typical_error: e.payload_str("typical_error"),
        })
        .collect();
    let n_answers = answers.len().max(1) as f64;
    let count_kind = |kind: EventKind| events.iter().filter(|e| e.kind == kind).count() as f64;
    let span_min = match (events.first(), events.last()) {
        (Some(a), Some(b)) if b.t > a.t => (b.t - a.t) as f64 / 60_000.0,
        _ => 1.0,
    };
    let skill_matches = |skill: Option<&str>, pattern: &str| -> bool {
        skill.map(|s| s.contains(pattern)).unwrap_or(false)
    };
    let in_r10 = |skill: Option<&str>| -> bool {
        skill
            .and_then(|s| net.skill(s))
            .map(|s| s.range == NumberRange::R10)
            .unwrap_or(false)
    };
    let accuracy = |pred: &dyn Fn(&Answer) -> bool| -> f64 {
        let sub: Vec<&Answer> = answers.iter().filter(|a| pred(a)).collect();
        if sub.is_empty() {
            0.5
        } else {
            sub.iter().filter(|a| a.correct).count() as f64 / sub.len() as f64
        }
    };
    let mean_ms = |pred: &dyn Fn(&Answer) -> bool| -> f64 {
        let sub: Vec<f64> = answers.iter().filter(|a| pred(a)).map(|a| a.ms).collect();
        if sub.is_empty() {
            3000.0
        } else {
            mean(&sub)
        }
    };
    let mistake_rate = |tag: &str| -> f64 {
        let wrong = answers.iter().filter(|a| !a.correct).count();
        if wrong == 0 {
            0.0
        } else {
            answers
                .iter()
                .filter(|a| !a.correct && a.typical_error == Some(tag))
                .count() as f64
                / wrong as f64
        }
    };
    let all_ms: Vec<f64> = answers.iter().map(|a| a.ms).collect();

    bank.iter()
        .map(|feature| match feature.id.as_str() {
            "P/1" => accuracy(&|_| true),
            "P/2" => accuracy(&|a: &Answer| in_r10(a.skill)),
            "P/3" => accuracy(&|a: &Answer| skill_matches(a.skill, "compare")),
            "P/4" => accuracy(&|a: &Answer| skill_matches(a.skill, "count")),
            "P/5" => accuracy(&|a: &Answer| skill_matches(a.skill, "add")),
            "P/6" => accuracy(&|a: &Answer| skill_matches(a.skill, "sub")),
            "AT/1" => mean_ms(&|_| true),
            "AT/2" => mean_ms(&|a: &Answer| skill_matches(a.skill, "count")),
            "AT/3" => variance(&all_ms).sqrt(),
            "AT/4" => {
                if all_ms.is_empty() {
                    3000.0
                } else {
                    median(&all_ms)
                }
            }
            "AT/5" => mean_ms(&|a: &Answer| skill_matches(a.skill, "compare")),
            "AT/6" => mean_ms(&|a: &Answer| in_r10(a.skill)),
            "AT/7" => mean_ms(&|a: &Answer| skill_matches(a.skill, "line")),
            "AT/8" => {
                if all_ms.is_empty() {
                    3000.0
                } else {
                    percentile(&all_ms, 0.9)
                }
            }
            "TM/1" => mistake_rate("ten_crossing"),
            "TM/2" => mistake_rate("place_value_swap"),
            "TM/3" => mistake_rate("digit_reversal"),
            "TM/4" => mistake_rate("counting_skip"),
            "TM/5" => mistake_rate("carry_error"),
            "SN/1" => count_kind(EventKind::HelpCall) / n_answers,
            "SN/2" => count_kind(EventKind::Backspace) / n_answers,
            "SN/3" => count_kind(EventKind::InvalidInput) / n_answers,
            "SN/4" => {
                (count_kind(EventKind::KeyInput)
                    + count_kind(EventKind::InvalidInput)
                    + count_kind(EventKind::Backspace)
                    + count_kind(EventKind::Enter))
                    / n_answers
            }
            "SN/5" => {
                (count_kind(EventKind::NavGame)
                    + count_kind(EventKind::NavShop)
                    + count_kind(EventKind::NavPerformance))
                    / span_min.max(1.0 / 60.0)
            }
            _ => 0.0,
        })
        .collect()
}

/// Feature table over a whole log: one row per student (sorted by id).
pub fn extract_feature_table(
    events: &[Event],
    bank: &[ScreenFeature],
    net: &SkillNet,
) -> (FeatureTable, Vec<String>) {
    let mut by_student: std::collections::BTreeMap<&str, Vec<Event>> =
        std::collections::BTreeMap::new();
    for e in events {
        by_student.entry(e.student_id.as_str()).or_default().push(e.clone());
    }
    let students: Vec<String> = by_student.keys().map(|s| s.to_string()).collect();
    let rows = by_student
        .values()
        .map(|evs| extract_features(evs, bank, net))
        .collect();
    (
        FeatureTable {
            columns: bank.iter().map(|f| f.id.clone()).collect(),
            rows,
        },
        students,
    )
}
