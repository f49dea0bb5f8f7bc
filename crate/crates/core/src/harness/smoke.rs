//! Reduced-schedule training run with a greedy evaluation against the
//! random-policy baseline.

use std::path::Path;

use crate::error::Result;

use super::config::TrainConfig;
use super::eval::random_policy_baseline;
use super::train::Trainer;

pub const SMOKE_MAX_FRAMES: u64 = 500_000;
pub const SMOKE_MAX_STEP: u64 = 1_000;
pub const SMOKE_EVAL_EPISODES: u64 = 100;
pub const BASELINE_EPISODES: u64 = 1_000;
/// Required margin over the random policy, and the absolute floor.
pub const MARGIN: f64 = 0.5;
pub const MIN_MEAN: f64 = 1.0;

pub fn smoke_config(seed: u64, dir: &Path) -> TrainConfig {
    let mut c = TrainConfig::default();
    c.hp.random_frames = 5_000;
    c.hp.eps_greedy_frames = 100_000;
    c.hp.replay_capacity = 20_000;
    c.hp.target_sync_every = 2_500;
    c.hp.max_step = SMOKE_MAX_STEP;
    c.run.seed = seed;
    c.run.episodes = u64::MAX;
    c.run.max_frames = SMOKE_MAX_FRAMES;
    c.run.checkpoint_every = 5_000;
    c.run.metrics_path = dir.join(format!("smoke-{seed}.csv"));
    c.run.checkpoint_path = dir.join(format!("smoke-{seed}.snk"));
    c
}

#[derive(Debug, Clone)]
pub struct SmokeResult {
    pub seed: u64,
    pub episodes: u64,
    pub frames: u64,
    pub eval_mean: f64,
    pub eval_best: u32,
    pub baseline_mean: f64,
}

impl SmokeResult {
    pub fn threshold(&self) -> f64 {
        MIN_MEAN.max(self.baseline_mean + MARGIN)
    }

    pub fn passed(&self) -> bool {
        self.eval_mean >= self.threshold()
    }
}

/// Train with `config`, then evaluate greedily on seeds disjoint from
/// training and compare against the uniform random policy.
pub fn run_smoke(config: TrainConfig, mut progress: impl FnMut(u64, u64)) -> Result<SmokeResult> {
    let seed = config.run.seed;
    let max_step = config.hp.max_step;
    let mut trainer = Trainer::new(config)?;
    trainer.run(|m| progress(m.episode, m.frames_total))?;
    let eval = trainer.evaluate(SMOKE_EVAL_EPISODES, seed)?;
    let baseline = random_policy_baseline(max_step, BASELINE_EPISODES, seed)?;
    Ok(SmokeResult {
        seed,
        episodes: trainer.episode,
        frames: trainer.agent.frame_count,
        eval_mean: eval.mean(),
        eval_best: eval.best(),
        baseline_mean: baseline.mean(),
    })
}
