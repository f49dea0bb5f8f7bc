//! Training and evaluation orchestration, metrics, reports and plots.

pub mod config;
pub mod eval;
pub mod memreport;
pub mod metrics;
pub mod plot;
pub mod smoke;
pub mod train;

pub use config::TrainConfig;
pub use eval::{evaluate, evaluate_checkpoint, random_policy_baseline, EvalSummary};
pub use metrics::EpisodeMetrics;
pub use train::{EpisodeRecord, Trainer};
