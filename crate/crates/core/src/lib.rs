//! Student modeling and analytics toolkit for adaptive educational games.
//!
//! The crate covers the full loop of an adaptive training system:
//!
//! * [`events`]: canonical keystroke-level event log (JSONL) and sessionization
//! * [`skills`]: the prerequisite DAG of skills with game bindings
//! * [`knowledge`]: two-state skill tracing over the DAG with an exact
//!   enumeration oracle and EM parameter fitting
//! * [`spelling`]: error-rule analysis of typed words, Poisson/Gamma rate
//!   inference and the word training/recap cycle
//! * [`controller`]: skill navigation and the model-agnostic when-to-stop
//!   policy with wheel-spinning detection
//! * [`engagement`]: timing/input feature extraction, time-scale separation,
//!   L1 logistic error-repetition model, focused/receptive state estimation
//! * [`subgroups`]: offline clustering of learning trajectories and online
//!   subgroup classification
//! * [`behavior`]: Markov-chain session summaries clustered with adaptive
//!   temporal smoothing
//! * [`screener`]: adaptive early-stopping screener for dyscalculia risk
//! * [`sim`]: deterministic synthetic-student simulator supplying ground
//!   truth for every model in the crate
//! * [`report`]: plot-ready CSV report emitters

pub mod behavior;
pub mod controller;
pub mod engagement;
pub mod events;
pub mod knowledge;
pub mod math;
pub mod report;
pub mod screener;
pub mod sim;
pub mod skills;
pub mod spelling;
pub mod subgroups;

mod error;

pub use error::{Error, Result};
pub use skills::{SkillId, SkillNet};

/// Version stamp for every file format emitted by this crate (JSONL logs,
/// model JSON, report CSV). Bumped on any schema change.
pub const SCHEMA_VERSION: &str = "1";
