use std::path::Path;

use crate::agent::Agent;
use crate::env::{Direction, EnvState, GridConfig, StepOutcome};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{Checkpoint, RecordData};
use crate::preprocess::{observe, FrameStack};
use crate::replay::{Experience, ReplayBuffer, ReplaySnapshot};
use crate::rng::{self, Stream};

use super::config::TrainConfig;
use super::eval::{evaluate, EvalSummary};
use super::metrics::{probe_writable, EpisodeMetrics, MetricsWriter};

/// One finished episode: its metrics row and the per-step outcomes.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub metrics: EpisodeMetrics,
    pub outcomes: Vec<StepOutcome>,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub grid: GridConfig,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    /// Index of the next episode to run.
    pub episode: u64,
    metrics: Option<MetricsWriter>,
}

impl Trainer {
    /// Fresh run. The metrics file is created (with header) and the
    /// checkpoint location probed before any training happens.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let metrics = MetricsWriter::create(&config.run.metrics_path)?;
        probe_writable(&config.run.checkpoint_path)?;
        let mut t = Self::in_memory(config)?;
        t.metrics = Some(metrics);
        Ok(t)
    }

    /// A trainer that writes no files.
    pub fn in_memory(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let agent = Agent::new(config.hp.clone(), config.run.seed)?;
        let buffer = ReplayBuffer::new(config.hp.replay_capacity)?;
        Ok(Trainer {
            grid: GridConfig::default().with_max_steps(config.hp.max_step),
            config,
            agent,
            buffer,
            episode: 0,
            metrics: None,
        })
    }

    /// Continue from `checkpoint`. Hyperparameters and seed come from the
    /// checkpoint; episode budget and paths from `config`. Metrics rows
    /// past the checkpoint are discarded.
    pub fn resume(config: TrainConfig, checkpoint: &Path) -> Result<Self> {
        let ck = Checkpoint::load(checkpoint)?;
        let agent = Agent::from_checkpoint(&ck)?;
        let buffer = ReplayBuffer::restore(&read_snapshot(&ck)?)?;
        let episode = ck.u64("train.episode")?;
        let mut config = config;
        config.hp = agent.hp.clone();
        config.run.seed = agent.seed();
        let metrics = MetricsWriter::resume(&config.run.metrics_path, episode)?;
        probe_writable(&config.run.checkpoint_path)?;
        Ok(Trainer {
            grid: GridConfig::default().with_max_steps(config.hp.max_step),
            config,
            agent,
            buffer,
            episode,
            metrics: Some(metrics),
        })
    }

    pub fn frame_budget_left(&self) -> bool {
        self.config.run.max_frames == 0 || self.agent.frame_count < self.config.run.max_frames
    }

    pub fn is_finished(&self) -> bool {
        self.episode >= self.config.run.episodes || !self.frame_budget_left()
    }

    /// Play and learn from one episode. Returns `None` if the frame budget
    /// ran out before the episode ended; that partial episode is not logged.
    pub fn run_episode(&mut self) -> Result<Option<EpisodeRecord>> {
        let seed = rng::derive_seed(self.config.run.seed, Stream::TrainEnv, self.episode);
        let mut env = EnvState::reset(self.grid, seed)?;
        let mut stack = FrameStack::init(observe(&env.render())?);
        let gamma = self.agent.hp.gamma;
        let mut outcomes = Vec::new();
        let (mut cumulative, mut discounted, mut discount) = (0.0, 0.0, 1.0);
        let (mut loss_sum, mut loss_n) = (0.0f64, 0u64);

        loop {
            if !self.frame_budget_left() {
                return Ok(None);
            }
            let action = self.agent.select_action(&stack)?;
            let dir = Direction::from_index(action).expect("action index in range");
            let out = env.step(dir)?;
            let next = stack.pushed(observe(&env.render())?);
            self.buffer.push(Experience {
                state: stack,
                action: action as u8,
                reward: out.reward as f32,
                next_state: next.clone(),
                terminal: out.terminal,
            });
            self.agent.frame_count += 1;
            if let Some(loss) = self.agent.learn_step(&self.buffer)? {
                loss_sum += loss as f64;
                loss_n += 1;
            }
            self.agent.maybe_sync_target()?;

            cumulative += out.reward;
            discounted += discount * out.reward;
            discount *= gamma;
            outcomes.push(out);
            stack = next;
            if out.terminal {
                break;
            }
        }

        let metrics = EpisodeMetrics {
            episode: self.episode,
            score: env.score(),
            cumulative_reward: cumulative,
            discounted_return: discounted,
            steps: env.steps(),
            epsilon: self.agent.epsilon(),
            mean_loss: if loss_n > 0 {
                loss_sum / loss_n as f64
            } else {
                0.0
            },
            frames_total: self.agent.frame_count,
        };
        if let Some(w) = self.metrics.as_mut() {
            w.append(&metrics)?;
        }
        self.episode += 1;
        Ok(Some(EpisodeRecord { metrics, outcomes }))
    }

    /// Train until the episode or frame budget is spent, checkpointing
    /// every `checkpoint_every` episodes and at the end.
    pub fn run(&mut self, mut on_episode: impl FnMut(&EpisodeMetrics)) -> Result<()> {
        while !self.is_finished() {
            let Some(rec) = self.run_episode()? else {
                break;
            };
            on_episode(&rec.metrics);
            if self.metrics.is_some()
                && self
                    .episode
                    .is_multiple_of(self.config.run.checkpoint_every)
            {
                self.save_checkpoint(&self.config.run.checkpoint_path.clone())?;
            }
        }
        if self.metrics.is_some() {
            self.save_checkpoint(&self.config.run.checkpoint_path.clone())?;
        }
        Ok(())
    }

    /// Evaluate the current online network with the configured `eval_epsilon`.
    pub fn evaluate(&self, episodes: u64, seed: u64) -> Result<EvalSummary> {
        evaluate(
            &self.agent.online,
            self.agent.hp.max_step,
            episodes,
            self.config.run.eval_epsilon,
            seed,
        )
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        self.agent.write_checkpoint(&mut ck);
        ck.insert_u64("train.episode", self.episode);
        write_snapshot(&mut ck, &self.buffer.snapshot());
        ck
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        self.checkpoint().save(path)
    }
}

fn write_snapshot(ck: &mut Checkpoint, snap: &ReplaySnapshot) {
    let n = snap.actions.len() as u64;
    ck.insert_u64("replay.capacity", snap.capacity);
    ck.insert_u64("replay.write_index", snap.write_index);
    ck.insert(
        "replay.frames",
        vec![snap.frames.len() as u64],
        RecordData::U8(snap.frames.clone()),
    );
    ck.insert(
        "replay.actions",
        vec![n],
        RecordData::U8(snap.actions.clone()),
    );
    ck.insert(
        "replay.rewards",
        vec![n],
        RecordData::F32(snap.rewards.clone()),
    );
    ck.insert(
        "replay.terminals",
        vec![n],
        RecordData::U8(snap.terminals.clone()),
    );
}

fn read_snapshot(ck: &Checkpoint) -> Result<ReplaySnapshot> {
    let u8s = |name: &str| match ck.get(name).map(|r| &r.data) {
        Some(RecordData::U8(v)) => Ok(v.clone()),
        _ => Err(Error::Checkpoint(format!(
            "missing or mistyped record '{name}'"
        ))),
    };
    let rewards = match ck.get("replay.rewards").map(|r| &r.data) {
        Some(RecordData::F32(v)) => v.clone(),
        _ => {
            return Err(Error::Checkpoint(
                "missing or mistyped record 'replay.rewards'".into(),
            ))
        }
    };
    Ok(ReplaySnapshot {
        capacity: ck.u64("replay.capacity")?,
        write_index: ck.u64("replay.write_index")?,
        frames: u8s("replay.frames")?,
        actions: u8s("replay.actions")?,
        rewards,
        terminals: u8s("replay.terminals")?,
    })
}
