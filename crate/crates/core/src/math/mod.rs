//! Shared numeric machinery: summary statistics, K-Means with BIC model
//! selection, classical multidimensional scaling, L1 logistic regression and
//! small matching/metric helpers used across the modeling modules.

pub mod embed;
pub mod kmeans;
pub mod lasso;
pub mod stats;

pub use embed::Embedding;
pub use kmeans::{bic, kmeans, select_k, KMeansResult};
pub use lasso::{fit_lasso_logistic, fit_lasso_logistic_cv, LassoFit, LassoCvReport};
pub use stats::*;
