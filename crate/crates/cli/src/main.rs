//! Command-line front door: simulate populations, fit models, cluster,
//! screen, and emit plot-ready CSV reports.
//!
//! Exit codes: 0 success, 1 validation failure (single-line `error: ...` on
//! stderr), 2 usage errors. All outputs are written atomically (temp file in
//! the target directory, then rename), so interrupted runs never leave
//! truncated files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use tutorkit_core::behavior::StateMapping;
use tutorkit_core::controller::{evaluate_stop_policy_frequency, evaluate_stop_policy_on_log};
use tutorkit_core::engagement::{erp_dataset, fit_erp};
use tutorkit_core::events::{read_log, sessionize, write_log_string, Event, Session, DEFAULT_SESSION_GAP_MS};
use tutorkit_core::knowledge::{fit_params, AnswerObs, StudentAnswers};
use tutorkit_core::report::{
    assignments_to_csv, report, screen_results_to_csv, stop_eval_to_csv, ReportKind, ReportOptions,
};
use tutorkit_core::screener::{
    extract_feature_table, fit_screener, sample_feature_bank, screen_row, select_features,
    ScreenerModel, DEFAULT_EPSILON, DEFAULT_STOP_M,
};
use tutorkit_core::sim::{simulate, write_truth_string, SimConfig};
use tutorkit_core::skills::SkillId;
use tutorkit_core::spelling::{load_word_db, sample_words};
use tutorkit_core::subgroups::{cluster_offline, profile_from_sessions, ClusterConfig};
use tutorkit_core::SkillNet;

#[derive(Parser)]
#[command(
    name = "tutorkit",
    version = concat!(env!("CARGO_PKG_VERSION"), " (file formats schema ", "1", ")"),
    about = "Student modeling, adaptive control and analytics over gameplay logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic population and write its event log
    Simulate {
        /// Simulation config JSON; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Skill net JSON; the shipped 100-skill sample when omitted
        #[arg(long)]
        net: Option<PathBuf>,
        /// Word database JSON; the shipped sample when omitted
        #[arg(long)]
        words: Option<PathBuf>,
        /// Output JSONL event log
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar JSONL (never feed this to models)
        #[arg(long)]
        truth_out: Option<PathBuf>,
        /// Per-student truth labels CSV (dd flag, subgroup, wheel-spinning)
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Fit per-skill tracing parameters from an event log
    FitKnowledge {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        net: Option<PathBuf>,
        /// Output JSON with fitted parameters and the fit summary
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the error-repetition model (L1 logistic, grouped CV)
    FitErp {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SESSION_GAP_MS)]
        gap_ms: i64,
    },
    /// Offline clustering of student profiles
    Cluster {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        net: Option<PathBuf>,
        /// Output assignments CSV (student_id, cluster)
        #[arg(long)]
        out: PathBuf,
        /// Also store the fitted cluster model as JSON
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evolutionary clustering of session behavior, ribbon CSV output
    TemporalCluster {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Chain states: navigation or input
        #[arg(long, default_value = "navigation")]
        mapping: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Screen students for risk from their logs
    Screen {
        #[arg(long)]
        logs: PathBuf,
        /// Fitted screener model JSON (or fit one via --labels)
        #[arg(long)]
        model: Option<PathBuf>,
        /// Truth labels CSV (student_id,label) to fit a screener first
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Where to store the freshly fitted model
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[arg(long)]
        net: Option<PathBuf>,
        /// Output results CSV, one row per student
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_STOP_M)]
        stop_m: usize,
    },
    /// Replay the when-to-stop policy over a log
    StopPolicyEval {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        net: Option<PathBuf>,
        /// Student model the policy consumes: dbn or frequency
        #[arg(long, default_value = "dbn")]
        model: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit a plot-ready CSV report
    Report {
        #[arg(long)]
        logs: PathBuf,
        /// One of: error-prob, range-progress, skill-status, path, ribbons
        #[arg(long)]
        kind: String,
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.85)]
        learned_threshold: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Write via a temp file in the same directory plus rename.
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| anyhow!("output path has no file name"))?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{}.tmp", file_name.to_string_lossy())),
        None => PathBuf::from(format!(".{}.tmp", file_name.to_string_lossy())),
    };
    std::fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn load_net(path: &Option<PathBuf>) -> Result<SkillNet> {
    match path {
        Some(p) => Ok(SkillNet::load(p)?),
        None => Ok(SkillNet::sample()),
    }
}

fn load_events(path: &Path) -> Result<Vec<Event>> {
    Ok(read_log(path)?)
}

fn sessions_per_student(events: &[Event]) -> BTreeMap<String, Vec<Session>> {
    let mut out: BTreeMap<String, Vec<Session>> = BTreeMap::new();
    for s in sessionize(events, DEFAULT_SESSION_GAP_MS) {
        out.entry(s.student_id.clone()).or_default().push(s);
    }
    out
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            seed,
            net,
            words,
            out,
            truth_out,
            labels_out,
        } => {
            let mut cfg = match config {
                Some(p) => SimConfig::from_json(
                    &std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?,
                )?,
                None => SimConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let net = load_net(&net)?;
            let words = match words {
                Some(p) => load_word_db(&std::fs::read_to_string(&p)?)?,
                None => sample_words(),
            };
            let run = simulate(cfg, &net, words)?;
            write_atomic(&out, &write_log_string(&run.events))?;
            if let Some(p) = truth_out {
                write_atomic(&p, &write_truth_string(&run.truth))?;
            }
            if let Some(p) = labels_out {
                let mut csv = String::from("student_id,dd,subgroup,wheelspin\n");
                for s in &run.students {
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        s.id,
                        u8::from(s.dd),
                        s.subgroup,
                        u8::from(!s.wheel_spin.is_empty())
                    ));
                }
                write_atomic(&p, &csv)?;
            }
            Ok(())
        }
        Command::FitKnowledge { logs, net, out } => {
            let net = load_net(&net)?;
            let events = load_events(&logs)?;
            let mut per_student: BTreeMap<String, StudentAnswers> = BTreeMap::new();
            for e in &events {
                if e.kind == tutorkit_core::events::EventKind::AnswerSubmitted {
                    if let (Some(skill), Some(correct)) =
                        (e.payload_str("skill"), e.payload_bool("correct"))
                    {
                        per_student.entry(e.student_id.clone()).or_default().push(AnswerObs {
                            skill: SkillId::new(skill),
                            correct,
                        });
                    }
                }
            }
            let logs_vec: Vec<StudentAnswers> = per_student.into_values().collect();
            let fit = fit_params(&logs_vec, &net);
            let doc = serde_json::json!({
                "schema": tutorkit_core::SCHEMA_VERSION,
                "params": fit.params,
                "summary": fit.summary,
            });
            write_atomic(&out, &serde_json::to_string_pretty(&doc)?)
        }
        Command::FitErp {
            logs,
            out,
            seed,
            gap_ms,
        } => {
            let events = load_events(&logs)?;
            let mut by_student: BTreeMap<String, Vec<Session>> = BTreeMap::new();
            for s in sessionize(&events, gap_ms) {
                by_student.entry(s.student_id.clone()).or_default().push(s);
            }
            let sessions: Vec<Vec<&Session>> = by_student
                .values()
                .map(|v| v.iter().collect())
                .collect();
            let dataset = erp_dataset(&sessions, tutorkit_core::engagement::DEFAULT_SLOW_ALPHA);
            if dataset.rows.is_empty() {
                bail!("no repeated-item error steps in the log; nothing to fit");
            }
            let (model, cv) = fit_erp(&dataset, seed)?;
            let doc = serde_json::json!({
                "schema": tutorkit_core::SCHEMA_VERSION,
                "model": model,
                "cv": {
                    "lambdas": cv.lambdas,
                    "mean_deviance": cv.mean_deviance,
                    "se_deviance": cv.se_deviance,
                    "chosen_lambda": cv.chosen_lambda,
                },
                "rows": dataset.rows.len(),
            });
            write_atomic(&out, &serde_json::to_string_pretty(&doc)?)
        }
        Command::Cluster {
            logs,
            net,
            out,
            model_out,
            seed,
        } => {
            let net = load_net(&net)?;
            let events = load_events(&logs)?;
            let by_student = sessions_per_student(&events);
            let students: Vec<String> = by_student.keys().cloned().collect();
            let profiles: Vec<_> = by_student
                .iter()
                .map(|(sid, sessions)| {
                    let refs: Vec<&Session> = sessions.iter().collect();
                    profile_from_sessions(sid, &refs, &net)
                })
                .collect();
            let cfg = ClusterConfig { seed, ..ClusterConfig::default() };
            let (model, labels) = cluster_offline(&profiles, &cfg)?;
            write_atomic(&out, &assignments_to_csv(&students, &labels))?;
            if let Some(p) = model_out {
                write_atomic(&p, &model.to_json())?;
            }
            Ok(())
        }
        Command::TemporalCluster {
            logs,
            k,
            mapping,
            out,
            seed,
        } => {
            let events = load_events(&logs)?;
            let mapping = match mapping.as_str() {
                "navigation" => StateMapping::navigation(),
                "input" => StateMapping::input(),
                other => bail!("unknown mapping '{other}' (use navigation or input)"),
            };
            let opts = ReportOptions {
                k,
                seed,
                mapping,
                ..ReportOptions::default()
            };
            let csv = report(&events, ReportKind::Ribbons, None, &opts)?;
            write_atomic(&out, &csv)
        }
        Command::Screen {
            logs,
            model,
            labels,
            model_out,
            net,
            out,
            epsilon,
            stop_m,
        } => {
            let net = load_net(&net)?;
            let events = load_events(&logs)?;
            let bank = sample_feature_bank();
            let (table, students) = extract_feature_table(&events, &bank, &net);
            let screener = match (model, labels) {
                (Some(p), _) => ScreenerModel::from_json(&std::fs::read_to_string(&p)?)?,
                (None, Some(labels_path)) => {
                    let truth = read_labels(&labels_path)?;
                    let y: Vec<bool> = students
                        .iter()
                        .map(|s| {
                            truth.get(s).copied().ok_or_else(|| {
                                anyhow!("student {s} missing from labels file")
                            })
                        })
                        .collect::<Result<_>>()?;
                    let ordering = select_features(&table, &bank, &y, 0.8)?;
                    let fitted = fit_screener(&table, &y, &ordering, epsilon, stop_m)?;
                    if let Some(p) = &model_out {
                        write_atomic(p, &fitted.to_json())?;
                    }
                    fitted
                }
                (None, None) => bail!("need --model or --labels to obtain a screener"),
            };
            let order: Vec<usize> = screener
                .features
                .iter()
                .map(|f| {
                    table
                        .col_index(&f.id)
                        .ok_or_else(|| anyhow!("feature '{}' not extractable", f.id))
                })
                .collect::<Result<_>>()?;
            let results: Vec<_> = table
                .rows
                .iter()
                .map(|row| {
                    let aligned: Vec<f64> = order.iter().map(|&i| row[i]).collect();
                    screen_row(&aligned, &screener)
                })
                .collect::<tutorkit_core::Result<_>>()?;
            write_atomic(&out, &screen_results_to_csv(&students, &results))
        }
        Command::StopPolicyEval {
            logs,
            net,
            model,
            out,
        } => {
            let events = load_events(&logs)?;
            let cfg = tutorkit_core::controller::ControllerConfig::default();
            let rows = match model.as_str() {
                "dbn" => {
                    let net = load_net(&net)?;
                    evaluate_stop_policy_on_log(
                        &events,
                        &net,
                        &tutorkit_core::knowledge::SkillParams::default(),
                        &cfg,
                    )
                }
                "frequency" => evaluate_stop_policy_frequency(&events, &cfg.stop),
                other => bail!("unknown model '{other}' (use dbn or frequency)"),
            };
            write_atomic(&out, &stop_eval_to_csv(&rows))
        }
        Command::Report {
            logs,
            kind,
            net,
            out,
            k,
            seed,
            learned_threshold,
        } => {
            let kind = ReportKind::parse(&kind)?;
            let events = load_events(&logs)?;
            let needs_net = matches!(kind, ReportKind::RangeProgress | ReportKind::SkillStatus);
            let net_loaded;
            let net_ref = if needs_net {
                net_loaded = load_net(&net)?;
                Some(&net_loaded)
            } else {
                None
            };
            let opts = ReportOptions {
                learned_threshold,
                k,
                seed,
                ..ReportOptions::default()
            };
            let csv = report(&events, kind, net_ref, &opts)?;
            write_atomic(&out, &csv)
        }
    }
}

/// Labels CSV: `student_id,label` with 0/1 or true/false (header optional).
fn read_labels(path: &Path) -> Result<BTreeMap<String, bool>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("student_id")) {
            continue;
        }
        let mut parts = line.split(',');
        let sid = parts
            .next()
            .ok_or_else(|| anyhow!("line {}: missing student id", i + 1))?;
        let raw = parts
            .next()
            .ok_or_else(|| anyhow!("line {}: missing label", i + 1))?
            .trim();
        let label = matches!(raw, "1" | "true" | "at_risk");
        out.insert(sid.to_string(), label);
    }
    Ok(out)
}
