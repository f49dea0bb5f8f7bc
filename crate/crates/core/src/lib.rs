//! Memory-efficient deep Q-learning for Snake.
//!
//! The agent observes the game only through binarized 84x84 frames, keeps
//! a compact FIFO replay buffer, and trains a small convolutional Q-network
//! implemented in [`nn`] on top of a plain GEMM kernel.
//!
//! Module map:
//!
//! - [`env`]: 12x12 Snake simulator and 252x252 RGB rasterizer.
//! - [`preprocess`]: grayscale, 3x3 block downscale, binarization, frame stacks.
//! - [`replay`]: fixed-capacity experience replay and memory accounting.
//! - [`nn`]: tensors, layers, the Q-network, Adam, checkpoints.
//! - [`agent`]: epsilon-greedy acting, Bellman targets, learning schedule.
//! - [`harness`]: training/evaluation loops, metrics CSV, plots, CLI plumbing.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod preprocess;
pub mod replay;
pub mod rng;

pub use agent::{Agent, Hyperparams};
pub use env::{Cell, Direction, EnvState, Event, GridConfig, StepOutcome};
pub use error::{Error, Result};
pub use preprocess::{BinaryFrame, FrameStack, GrayFrame, PixelFormat, RgbFrame};
pub use replay::{Experience, ReplayBuffer};
