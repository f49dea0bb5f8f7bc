//! DQN agent: epsilon-greedy acting, Bellman targets, TD learning and the
//! online/target network schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint::{Checkpoint, RecordData};
use crate::nn::{clip_global_norm, stacks_to_tensor, Adam, Gradients, QNetwork, Tensor};
use crate::preprocess::FrameStack;
use crate::replay::{Experience, ReplayBuffer};
use crate::rng::{self, Stream};

pub const N_ACTIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    pub eps_initial: f64,
    pub eps_final: f64,
    pub batch_size: usize,
    pub max_step: u64,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub random_frames: u64,
    pub eps_greedy_frames: u64,
    pub replay_capacity: usize,
    pub update_every: u64,
    pub target_sync_every: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.99,
            eps_initial: 1.0,
            eps_final: 0.01,
            batch_size: 32,
            max_step: 10_000,
            learning_rate: 0.0025,
            clip_norm: 1.0,
            random_frames: 50_000,
            eps_greedy_frames: 500_000,
            replay_capacity: 50_000,
            update_every: 4,
            target_sync_every: 10_000,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("hyperparameters: {m}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(self.eps_final > 0.0 && self.eps_final <= self.eps_initial && self.eps_initial <= 1.0)
        {
            return bad("need 0 < eps_final <= eps_initial <= 1");
        }
        if self.batch_size == 0
            || self.max_step == 0
            || self.replay_capacity == 0
            || self.update_every == 0
            || self.target_sync_every == 0
            || self.eps_greedy_frames == 0
        {
            return bad("counts must be positive");
        }
        if !(self.learning_rate > 0.0 && self.clip_norm > 0.0) {
            return bad("learning_rate and clip_norm must be positive");
        }
        if self.batch_size > self.replay_capacity {
            return bad("batch_size exceeds replay_capacity");
        }
        Ok(())
    }

    fn write(&self, ck: &mut Checkpoint) {
        ck.insert_f64("hp.gamma", self.gamma);
        ck.insert_f64("hp.eps_initial", self.eps_initial);
        ck.insert_f64("hp.eps_final", self.eps_final);
        ck.insert_u64("hp.batch_size", self.batch_size as u64);
        ck.insert_u64("hp.max_step", self.max_step);
        ck.insert_f64("hp.learning_rate", self.learning_rate);
        ck.insert_f64("hp.clip_norm", self.clip_norm);
        ck.insert_u64("hp.random_frames", self.random_frames);
        ck.insert_u64("hp.eps_greedy_frames", self.eps_greedy_frames);
        ck.insert_u64("hp.replay_capacity", self.replay_capacity as u64);
        ck.insert_u64("hp.update_every", self.update_every);
        ck.insert_u64("hp.target_sync_every", self.target_sync_every);
    }

    fn read(ck: &Checkpoint) -> Result<Self> {
        Ok(Hyperparams {
            gamma: ck.f64("hp.gamma")?,
            eps_initial: ck.f64("hp.eps_initial")?,
            eps_final: ck.f64("hp.eps_final")?,
            batch_size: ck.u64("hp.batch_size")? as usize,
            max_step: ck.u64("hp.max_step")?,
            learning_rate: ck.f64("hp.learning_rate")?,
            clip_norm: ck.f64("hp.clip_norm")?,
            random_frames: ck.u64("hp.random_frames")?,
            eps_greedy_frames: ck.u64("hp.eps_greedy_frames")?,
            replay_capacity: ck.u64("hp.replay_capacity")? as usize,
            update_every: ck.u64("hp.update_every")?,
            target_sync_every: ck.u64("hp.target_sync_every")?,
        })
    }
}

/// Exploration rate after `frame` environment frames: 1 during the random
/// warmup, then a linear ramp from `eps_initial` to `eps_final` over
/// `eps_greedy_frames`, then flat.
pub fn epsilon_at(frame: u64, hp: &Hyperparams) -> f64 {
    if frame < hp.random_frames {
        return 1.0;
    }
    let progress = (frame - hp.random_frames) as f64 / hp.eps_greedy_frames as f64;
    if progress >= 1.0 {
        hp.eps_final
    } else {
        hp.eps_initial - (hp.eps_initial - hp.eps_final) * progress
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn greedy_action(q: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Uniform random action with probability `epsilon`, else the argmax of
/// `q_fn()` (which is only evaluated when needed).
pub fn epsilon_greedy<R, F>(epsilon: f64, rng: &mut R, q_fn: F) -> usize
where
    R: Rng + ?Sized,
    F: FnOnce() -> Vec<f32>,
{
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..N_ACTIONS)
    } else {
        greedy_action(&q_fn())
    }
}

/// Bellman targets: `r` for terminal transitions, otherwise
/// `r + gamma * max_a' Q_target(s', a')` with the target net in eval mode.
pub fn compute_targets(batch: &[&Experience], target: &QNetwork, gamma: f64) -> Result<Vec<f32>> {
    if batch.is_empty() {
        return Err(Error::Usage("compute_targets on an empty batch".into()));
    }
    let live: Vec<&FrameStack> = batch
        .iter()
        .filter(|e| !e.terminal)
        .map(|e| &e.next_state)
        .collect();
    let mut next_max = Vec::new();
    if !live.is_empty() {
        let q = target.infer(&stacks_to_tensor(live.into_iter()))?;
        let n_out = q.shape()[1];
        next_max = q
            .data()
            .chunks(n_out)
            .map(|row| row.iter().copied().fold(f32::NEG_INFINITY, f32::max))
            .collect();
    }
    let mut next = next_max.into_iter();
    Ok(batch
        .iter()
        .map(|e| {
            if e.terminal {
                e.reward
            } else {
                let m = next.next().expect("one value per live transition");
                (e.reward as f64 + gamma * m as f64) as f32
            }
        })
        .collect())
}

/// Mean squared TD error over the batch and its gradient with respect to
/// the online network. Only the taken action's output receives gradient.
pub fn td_loss_and_gradient(
    batch: &[&Experience],
    targets: &[f32],
    online: &mut QNetwork,
) -> Result<(f32, Gradients<f32>)> {
    if batch.len() != targets.len() || batch.is_empty() {
        return Err(Error::Usage(format!(
            "td loss: {} experiences vs {} targets",
            batch.len(),
            targets.len()
        )));
    }
    let q = online.forward_train(&stacks_to_tensor(batch.iter().map(|e| &e.state)))?;
    let n_out = q.shape()[1];
    let b = batch.len() as f32;
    let mut upstream = Tensor::zeros(q.shape());
    let mut loss = 0.0f64;
    for (i, (e, &y)) in batch.iter().zip(targets).enumerate() {
        let a = e.action as usize;
        if a >= n_out {
            return Err(Error::Usage(format!("action {a} out of range")));
        }
        let err = y - q.data()[i * n_out + a];
        loss += (err as f64) * (err as f64);
        upstream.data_mut()[i * n_out + a] = -2.0 * err / b;
    }
    let grads = online.backward(&upstream)?;
    Ok(((loss / batch.len() as f64) as f32, grads))
}

/// Online and target Q-networks, optimizer state and the frame clock.
#[derive(Debug, Clone)]
pub struct Agent {
    pub hp: Hyperparams,
    pub online: QNetwork,
    pub target: QNetwork,
    pub adam: Adam<f32>,
    /// Environment frames seen so far.
    pub frame_count: u64,
    pub learn_steps: u64,
    seed: u64,
}

impl Agent {
    pub fn new(hp: Hyperparams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut online = QNetwork::q_network(N_ACTIONS)?;
        online.init_weights(&mut rng::stream_rng(seed, Stream::Init, 0));
        let target = online.clone();
        let adam = Adam::new(&online.params());
        Ok(Agent {
            hp,
            online,
            target,
            adam,
            frame_count: 0,
            learn_steps: 0,
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(self.frame_count, &self.hp)
    }

    pub fn q_values(&self, stack: &FrameStack) -> Result<Vec<f32>> {
        let q = self
            .online
            .infer(&stacks_to_tensor(std::iter::once(stack)))?;
        Ok(q.into_data())
    }

    /// Epsilon-greedy action for the current frame. The random stream is
    /// keyed by the frame counter.
    pub fn select_action(&self, stack: &FrameStack) -> Result<usize> {
        let mut r = rng::stream_rng(self.seed, Stream::Action, self.frame_count);
        self.act(stack, self.epsilon(), &mut r)
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        stack: &FrameStack,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize> {
        let mut err = None;
        let a = epsilon_greedy(epsilon, rng, || {
            self.q_values(stack).unwrap_or_else(|e| {
                err = Some(e);
                vec![0.0; N_ACTIONS]
            })
        });
        err.map_or(Ok(a), Err)
    }

    pub fn should_learn(&self, buffer_len: usize) -> bool {
        self.frame_count >= self.hp.random_frames
            && self.frame_count.is_multiple_of(self.hp.update_every)
            && buffer_len >= self.hp.batch_size
    }

    /// One gradient update on a sampled minibatch when the schedule says so;
    /// returns the loss, or `None` for a no-op.
    pub fn learn_step(&mut self, buffer: &ReplayBuffer) -> Result<Option<f32>> {
        if !self.should_learn(buffer.len()) {
            return Ok(None);
        }
        let mut r = rng::stream_rng(self.seed, Stream::Sample, self.frame_count);
        let batch = buffer.sample(self.hp.batch_size, &mut r)?;
        let targets = compute_targets(&batch, &self.target, self.hp.gamma)?;
        let (loss, mut grads) = td_loss_and_gradient(&batch, &targets, &mut self.online)?;
        clip_global_norm(&mut grads, self.hp.clip_norm);
        self.adam
            .step(self.online.params_mut(), &grads, self.hp.learning_rate)?;
        self.learn_steps += 1;
        Ok(Some(loss))
    }

    /// Copy online into target every `target_sync_every` frames.
    pub fn maybe_sync_target(&mut self) -> Result<bool> {
        if self.frame_count > 0 && self.frame_count.is_multiple_of(self.hp.target_sync_every) {
            self.target.copy_weights_from(&self.online)?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn write_checkpoint(&self, ck: &mut Checkpoint) {
        self.hp.write(ck);
        ck.insert_network("online.", &self.online);
        ck.insert_network("target.", &self.target);
        for (i, (m, v)) in self.adam.m.iter().zip(&self.adam.v).enumerate() {
            ck.insert_tensor(format!("adam.m.{i:02}"), m);
            ck.insert_tensor(format!("adam.v.{i:02}"), v);
        }
        ck.insert_u64("adam.t", self.adam.t);
        ck.insert(
            "adam.hyper",
            vec![3],
            RecordData::F64(vec![self.adam.beta1, self.adam.beta2, self.adam.eps]),
        );
        ck.insert_u64("agent.frame_count", self.frame_count);
        ck.insert_u64("agent.learn_steps", self.learn_steps);
        ck.insert_u64("agent.seed", self.seed);
        ck.insert_f64("agent.epsilon", self.epsilon());
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let hp = Hyperparams::read(ck)?;
        let seed = ck.u64("agent.seed")?;
        let mut agent = Agent::new(hp, seed)?;
        ck.read_network_into("online.", &mut agent.online)?;
        ck.read_network_into("target.", &mut agent.target)?;
        for (i, (m, v)) in agent
            .adam
            .m
            .iter_mut()
            .zip(agent.adam.v.iter_mut())
            .enumerate()
        {
            ck.read_tensor_into(&format!("adam.m.{i:02}"), m)?;
            ck.read_tensor_into(&format!("adam.v.{i:02}"), v)?;
        }
        agent.adam.t = ck.u64("adam.t")?;
        if let Some(RecordData::F64(h)) = ck.get("adam.hyper").map(|r| &r.data) {
            if let [b1, b2, eps] = h[..] {
                agent.adam.beta1 = b1;
                agent.adam.beta2 = b2;
                agent.adam.eps = eps;
            }
        }
        agent.frame_count = ck.u64("agent.frame_count")?;
        agent.learn_steps = ck.u64("agent.learn_steps")?;
        Ok(agent)
    }
}
