//! FIFO experience replay.

use rand::Rng;

use crate::error::{Error, Result};
use crate::preprocess::{
    frame_bytes, BinaryFrame, FrameStack, PixelFormat, PACKED_BYTES, STACK_LEN,
};

pub const DEFAULT_CAPACITY: usize = 50_000;
/// Four state frames plus four next-state frames.
pub const FRAMES_PER_EXPERIENCE: u64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: FrameStack,
    pub action: u8,
    pub reward: f32,
    pub next_state: FrameStack,
    pub terminal: bool,
}

/// Ring of at most `capacity` experiences; when full the oldest entry is
/// overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<Experience>,
    write_index: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            entries: Vec::new(),
            write_index: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn push(&mut self, exp: Experience) {
        if self.entries.len() < self.capacity {
            self.entries.push(exp);
        } else {
            self.entries[self.write_index] = exp;
        }
        self.write_index = (self.write_index + 1) % self.capacity;
    }

    /// Storage slot `index` (not insertion order).
    pub fn get(&self, index: usize) -> Option<&Experience> {
        self.entries.get(index)
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> + '_ {
        let split = if self.is_full() { self.write_index } else { 0 };
        self.entries[split..]
            .iter()
            .chain(self.entries[..split].iter())
    }

    /// Draw `batch` distinct storage slots uniformly at random.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.len() < batch {
            return Err(Error::InsufficientData {
                needed: batch,
                available: self.len(),
            });
        }
        Ok(rand::seq::index::sample(rng, self.len(), batch).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.entries[i])
            .collect())
    }

    /// Bytes held by packed frames right now.
    pub fn live_frame_bytes(&self) -> u64 {
        self.len() as u64 * FRAMES_PER_EXPERIENCE * PACKED_BYTES as u64
    }

    pub fn snapshot(&self) -> ReplaySnapshot {
        let n = self.len();
        let mut frames = Vec::with_capacity(n * 2 * STACK_LEN * PACKED_BYTES);
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut terminals = Vec::with_capacity(n);
        for e in &self.entries {
            for f in e.state.frames().iter().chain(e.next_state.frames()) {
                frames.extend_from_slice(f.packed());
            }
            actions.push(e.action);
            rewards.push(e.reward);
            terminals.push(e.terminal as u8);
        }
        ReplaySnapshot {
            capacity: self.capacity as u64,
            write_index: self.write_index as u64,
            frames,
            actions,
            rewards,
            terminals,
        }
    }

    pub fn restore(snap: &ReplaySnapshot) -> Result<Self> {
        let n = snap.actions.len();
        let per = 2 * STACK_LEN * PACKED_BYTES;
        let bad = |m: &str| Error::Checkpoint(format!("replay snapshot: {m}"));
        if snap.capacity == 0 || n as u64 > snap.capacity {
            return Err(bad("length exceeds capacity"));
        }
        if snap.rewards.len() != n || snap.terminals.len() != n || snap.frames.len() != n * per {
            return Err(bad("field lengths disagree"));
        }
        if snap.write_index >= snap.capacity {
            return Err(bad("write index out of range"));
        }
        let stack = |bytes: &[u8]| -> Result<FrameStack> {
            let mut frames: [BinaryFrame; STACK_LEN] = Default::default();
            for (f, chunk) in frames.iter_mut().zip(bytes.chunks_exact(PACKED_BYTES)) {
                *f = BinaryFrame::from_packed(chunk)?;
            }
            Ok(FrameStack::from_frames(frames))
        };
        let mut entries = Vec::with_capacity(n);
        for i in 0..n {
            let chunk = &snap.frames[i * per..(i + 1) * per];
            let (s, ns) = chunk.split_at(per / 2);
            entries.push(Experience {
                state: stack(s)?,
                action: snap.actions[i],
                reward: snap.rewards[i],
                next_state: stack(ns)?,
                terminal: snap.terminals[i] != 0,
            });
        }
        Ok(ReplayBuffer {
            capacity: snap.capacity as usize,
            entries,
            write_index: snap.write_index as usize,
        })
    }
}

/// Flat, storage-order view of a buffer used for checkpointing.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySnapshot {
    pub capacity: u64,
    pub write_index: u64,
    /// Per experience: 4 state frames then 4 next-state frames, packed.
    pub frames: Vec<u8>,
    pub actions: Vec<u8>,
    pub rewards: Vec<f32>,
    pub terminals: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryReport {
    pub capacity: u64,
    pub format: PixelFormat,
    pub frames_per_experience: u64,
    pub bytes: u64,
}

impl MemoryReport {
    /// GB as 1024^3 bytes.
    pub fn gib(&self) -> f64 {
        self.bytes as f64 / (1u64 << 30) as f64
    }

    /// Fraction of memory saved relative to `other`.
    pub fn saving_vs(&self, other: &MemoryReport) -> f64 {
        1.0 - self.bytes as f64 / other.bytes as f64
    }
}

/// Replay memory needed for `capacity` experiences stored in `format`.
pub fn memory_report(
    capacity: u64,
    format: PixelFormat,
    frames_per_experience: u64,
) -> MemoryReport {
    MemoryReport {
        capacity,
        format,
        frames_per_experience,
        bytes: capacity * frames_per_experience * frame_bytes(format),
    }
}
