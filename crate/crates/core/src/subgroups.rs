//! Learning-trajectory subgroups: offline clustering of cumulative student
//! profiles (standardize, embed the pairwise dissimilarities, pick the
//! cluster count by BIC, K-Means) and nearest-centroid online classification
//! of partial profiles during training, with per-subgroup skill-pass
//! templates as the performance prediction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::events::Session;
use crate::math::embed::{embed, euclidean_dissimilarity, Embedding};
use crate::math::kmeans::{kmeans, select_k};
use crate::math::stats::mean;
use crate::skills::{SkillId, SkillNet};
use crate::{Error, Result};

/// Cumulative per-student features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub student_id: String,
    /// Aligned with [`profile_feature_names`]; `None` marks unmeasured.
    pub features: Vec<Option<f64>>,
    /// Per-skill pass rate, the raw material of subgroup templates.
    #[serde(default)]
    pub skill_pass: BTreeMap<SkillId, f64>,
}

pub fn profile_feature_names() -> Vec<String> {
    [
        "highest_skill",
        "passed_skills",
        "mean_answer_ms",
        "error_rate",
        "sessions",
        "answers",
        "help_per_answer",
        "mean_session_min",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// A skill counts as passed at or above this per-skill accuracy.
pub const PASS_ACCURACY: f64 = 0.7;

/// Build the cumulative profile of one student from their sessions.
pub fn profile_from_sessions(
    student_id: &str,
    sessions: &[&Session],
    net: &SkillNet,
) -> StudentProfile {
    let mut answer_ms = Vec::new();
    let mut errors = 0usize;
    let mut answers = 0usize;
    let mut helps = 0usize;
    let mut session_minutes = Vec::new();
    let mut per_skill: BTreeMap<SkillId, (usize, usize)> = BTreeMap::new(); // (correct, total)
    for session in sessions {
        session_minutes.push(session.duration_ms() as f64 / 60_000.0);
        helps += session
            .events
            .iter()
            .filter(|e| e.kind == crate::events::EventKind::HelpCall)
            .count();
        for a in session.answers() {
            answers += 1;
            if let Some(ms) = a.answer_ms {
                answer_ms.push(ms as f64);
            }
            let correct = a.correct.unwrap_or(false);
            if !correct {
                errors += 1;
            }
            if let Some(skill) = a.skill {
                if net.contains(skill) {
                    let e = per_skill.entry(SkillId::new(skill)).or_insert((0, 0));
                    e.1 += 1;
                    if correct {
                        e.0 += 1;
                    }
                }
            }
        }
    }
    let skill_pass: BTreeMap<SkillId, f64> = per_skill
        .iter()
        .map(|(id, &(c, t))| (id.clone(), c as f64 / t.max(1) as f64))
        .collect();
    let highest = per_skill
        .iter()
        .filter(|(_, &(c, _))| c > 0)
        .map(|(id, _)| net.topo_index(id.as_str()).unwrap_or(0))
        .max();
    let passed = skill_pass.values().filter(|&&r| r >= PASS_ACCURACY).count();
    let features = vec![
        highest.map(|h| h as f64),
        Some(passed as f64),
        if answer_ms.is_empty() { None } else { Some(mean(&answer_ms)) },
        if answers > 0 { Some(errors as f64 / answers as f64) } else { None },
        Some(sessions.len() as f64),
        Some(answers as f64),
        if answers > 0 { Some(helps as f64 / answers as f64) } else { None },
        if session_minutes.is_empty() { None } else { Some(mean(&session_minutes)) },
    ];
    StudentProfile {
        student_id: student_id.to_string(),
        features,
        skill_pass,
    }
}

/// Offline clustering configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub embed_dim: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> ClusterConfig {
        ClusterConfig {
            embed_dim: 3,
            k_min: 2,
            k_max: 8,
            restarts: 20,
            seed: 0,
        }
    }
}

/// Everything needed to classify new (partial) profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub feature_names: Vec<String>,
    /// Indices of the features kept (non-constant on the training set).
    pub kept: Vec<usize>,
    /// Imputation/centering means and scale, on the kept features.
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub embedding: Embedding,
    /// Z-scored training rows; out-of-sample projection measures distances
    /// against these.
    pub train_z: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    pub k: usize,
    /// Per-cluster mean skill-pass rates.
    pub templates: Vec<BTreeMap<SkillId, f64>>,
    pub cluster_sizes: Vec<usize>,
    pub warnings: Vec<String>,
}

impl ClusterModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<ClusterModel> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }
}

fn column_stats(profiles: &[StudentProfile], col: usize) -> (f64, f64) {
    let vals: Vec<f64> = profiles.iter().filter_map(|p| p.features[col]).collect();
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let m = mean(&vals);
    let sd = (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64).sqrt();
    (m, sd)
}

/// Cluster student profiles. Returns the fitted model and one cluster label
/// per input profile. Deterministic under the config seed.
pub fn cluster_offline(
    profiles: &[StudentProfile],
    cfg: &ClusterConfig,
) -> Result<(ClusterModel, Vec<usize>)> {
    if profiles.len() < cfg.k_min + 1 {
        return Err(Error::NotEnoughData(format!(
            "{} profiles cannot support k >= {}",
            profiles.len(),
            cfg.k_min
        )));
    }
    let names = profile_feature_names();
    let p = names.len();
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for col in 0..p {
        let (m, sd) = column_stats(profiles, col);
        if sd > 1e-12 {
            kept.push(col);
            means.push(m);
            sds.push(sd);
        } else {
            warnings.push(format!("dropped constant feature '{}'", names[col]));
        }
    }
    if kept.is_empty() {
        return Err(Error::NotEnoughData("all features constant".into()));
    }
    let train_z: Vec<Vec<f64>> = profiles
        .iter()
        .map(|prof| {
            kept.iter()
                .enumerate()
                .map(|(j, &col)| (prof.features[col].unwrap_or(means[j]) - means[j]) / sds[j])
                .collect()
        })
        .collect();
    let dissimilarity = euclidean_dissimilarity(&train_z);
    let embedding = embed(&dissimilarity, cfg.embed_dim)?;
    if embedding.reduced {
        warnings.push(format!(
            "embedding reduced to {} of {} requested dimensions",
            embedding.dim(),
            cfg.embed_dim
        ));
    }
    let k_max = cfg.k_max.min(profiles.len() - 1);
    let k = select_k(&embedding.coords, cfg.k_min..=k_max, cfg.restarts, cfg.seed)?;
    let run = kmeans(&embedding.coords, k, cfg.restarts, cfg.seed)?;

    let mut templates: Vec<BTreeMap<SkillId, (f64, usize)>> = vec![BTreeMap::new(); k];
    let mut cluster_sizes = vec![0usize; k];
    for (prof, &label) in profiles.iter().zip(&run.labels) {
        cluster_sizes[label] += 1;
        for (skill, &rate) in &prof.skill_pass {
            let e = templates[label].entry(skill.clone()).or_insert((0.0, 0));
            e.0 += rate;
            e.1 += 1;
        }
    }
    let templates: Vec<BTreeMap<SkillId, f64>> = templates
        .into_iter()
        .map(|t| t.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect())
        .collect();

    Ok((
        ClusterModel {
            feature_names: names,
            kept,
            means,
            sds,
            embedding,
            train_z,
            centroids: run.centroids,
            k,
            templates,
            cluster_sizes,
            warnings,
        },
        run.labels,
    ))
}

fn z_score_partial(model: &ClusterModel, profile: &StudentProfile) -> Vec<f64> {
    model
        .kept
        .iter()
        .enumerate()
        .map(|(j, &col)| {
            let raw = profile
                .features
                .get(col)
                .copied()
                .flatten()
                .unwrap_or(model.means[j]);
            (raw - model.means[j]) / model.sds[j]
        })
        .collect()
}

/// Classify a (possibly partial) profile: impute missing features with the
/// training means, project onto the stored embedding, pick the nearest
/// centroid. Confidence is the softmax weight of the winner over negative
/// centroid distances.
pub fn classify_online(profile: &StudentProfile, model: &ClusterModel) -> Result<(usize, f64)> {
    let z = z_score_partial(model, profile);
    let sq_d: Vec<f64> = model
        .train_z
        .iter()
        .map(|row| row.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let coords = model.embedding.project(&sq_d)?;
    let dists: Vec<f64> = model
        .centroids
        .iter()
        .map(|c| {
            c.iter()
                .zip(&coords)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let best = (0..dists.len())
        .min_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap())
        .expect("model has at least one centroid");
    // softmax over negative distances
    let max_neg = dists.iter().map(|d| -d).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = dists.iter().map(|d| (-d - max_neg).exp()).collect();
    let confidence = weights[best] / weights.iter().sum::<f64>();
    Ok((best, confidence))
}

/// Performance prediction derived from subgroup membership alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgroupPrediction {
    pub subgroup: usize,
    pub horizon_sessions: usize,
    /// The subgroup's stored per-skill pass-rate template.
    pub skill_pass: BTreeMap<SkillId, f64>,
    /// Skills whose template pass rate falls below 0.5.
    pub knowledge_gaps: Vec<SkillId>,
    pub expected_pass_rate: f64,
}

/// The stored subgroup template as the prediction for any student of that
/// subgroup.
pub fn predict_from_subgroup(
    subgroup: usize,
    model: &ClusterModel,
    horizon_sessions: usize,
) -> Result<SubgroupPrediction> {
    let template = model
        .templates
        .get(subgroup)
        .ok_or(Error::UnknownSubgroup(subgroup))?;
    let gaps: Vec<SkillId> = template
        .iter()
        .filter(|(_, &r)| r < 0.5)
        .map(|(s, _)| s.clone())
        .collect();
    let expected = if template.is_empty() {
        0.0
    } else {
        template.values().sum::<f64>() / template.len() as f64
    };
    Ok(SubgroupPrediction {
        subgroup,
        horizon_sessions,
        skill_pass: template.clone(),
        knowledge_gaps: gaps,
        expected_pass_rate: expected,
    })
}
