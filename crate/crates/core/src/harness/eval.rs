use std::path::Path;

use crate::agent::{Agent, N_ACTIONS};
use crate::env::{Direction, EnvState, GridConfig};
use crate::error::{Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::QNetwork;
use crate::preprocess::{observe, FrameStack};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub scores: Vec<u32>,
    pub steps: Vec<u64>,
}

impl EvalSummary {
    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        self.scores.iter().map(|&s| s as f64).sum::<f64>() / self.scores.len() as f64
    }

    pub fn best(&self) -> u32 {
        self.scores.iter().copied().max().unwrap_or(0)
    }
}

/// Run `episodes` episodes with the network frozen (eval mode, no
/// learning) and an epsilon-greedy policy.
pub fn evaluate(
    net: &QNetwork,
    max_step: u64,
    episodes: u64,
    epsilon: f64,
    seed: u64,
) -> Result<EvalSummary> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Usage(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if net.n_outputs() != N_ACTIONS {
        return Err(Error::Usage(format!(
            "network has {} outputs",
            net.n_outputs()
        )));
    }
    let grid = GridConfig::default().with_max_steps(max_step);
    let mut summary = EvalSummary {
        scores: Vec::with_capacity(episodes as usize),
        steps: Vec::with_capacity(episodes as usize),
    };
    for ep in 0..episodes {
        let mut env = EnvState::reset(grid, rng::derive_seed(seed, Stream::EvalEnv, ep))?;
        let mut r = rng::stream_rng(seed, Stream::EvalAction, ep);
        let mut stack = FrameStack::init(observe(&env.render())?);
        loop {
            let mut err = None;
            let a = crate::agent::epsilon_greedy(epsilon, &mut r, || {
                net.infer(&crate::nn::stacks_to_tensor(std::iter::once(&stack)))
                    .map(|q| q.into_data())
                    .unwrap_or_else(|e| {
                        err = Some(e);
                        vec![0.0; N_ACTIONS]
                    })
            });
            if let Some(e) = err {
                return Err(e);
            }
            let out = env.step(Direction::from_index(a).expect("action index in range"))?;
            if out.terminal {
                break;
            }
            stack.push(observe(&env.render())?);
        }
        summary.scores.push(env.score());
        summary.steps.push(env.steps());
    }
    Ok(summary)
}

/// Evaluate the online network stored in a training checkpoint.
pub fn evaluate_checkpoint(
    path: &Path,
    episodes: u64,
    epsilon: f64,
    seed: u64,
) -> Result<EvalSummary> {
    let agent = Agent::from_checkpoint(&Checkpoint::load(path)?)?;
    evaluate(&agent.online, agent.hp.max_step, episodes, epsilon, seed)
}

/// Uniform random policy on the same episode seeds.
pub fn random_policy_baseline(max_step: u64, episodes: u64, seed: u64) -> Result<EvalSummary> {
    let net = QNetwork::q_network(N_ACTIONS)?;
    evaluate(&net, max_step, episodes, 1.0, seed)
}
