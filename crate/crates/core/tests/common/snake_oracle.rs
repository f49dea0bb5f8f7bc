//! A deliberately naive Snake simulator used as a reference: the board is a
//! 2-D occupancy grid, the body a plain vector, and every rule is written
//! out from the game description rather than shared with the crate.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Apple,
    Death,
    Move,
    Timeout,
    Win,
}

pub struct Oracle {
    pub w: i32,
    pub h: i32,
    pub max_steps: u64,
    /// `(col, row)` head first.
    pub body: Vec<(i32, i32)>,
    /// 0 = up, 1 = down, 2 = left, 3 = right.
    pub dir: usize,
    pub apple: Option<(i32, i32)>,
    pub score: u32,
    pub steps: u64,
    pub over: bool,
    rng: Pcg64,
}

const DELTAS: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];
const OPPOSITE: [usize; 4] = [1, 0, 3, 2];

impl Oracle {
    pub fn new(w: i32, h: i32, len: i32, max_steps: u64, seed: u64) -> Self {
        let (hx, hy) = (w / 2, h / 2);
        let mut o = Oracle {
            w,
            h,
            max_steps,
            body: (0..len).map(|i| (hx - i, hy)).collect(),
            dir: 3,
            apple: None,
            score: 0,
            steps: 0,
            over: false,
            rng: Pcg64::seed_from_u64(seed),
        };
        o.place_apple();
        o
    }

    fn place_apple(&mut self) {
        let mut grid = vec![vec![false; self.w as usize]; self.h as usize];
        for &(c, r) in &self.body {
            grid[r as usize][c as usize] = true;
        }
        let mut free = Vec::new();
        for r in 0..self.h {
            for c in 0..self.w {
                if !grid[r as usize][c as usize] {
                    free.push((c, r));
                }
            }
        }
        self.apple = if free.is_empty() {
            None
        } else {
            let k = self.rng.random_range(0..free.len());
            Some(free[k])
        };
    }

    pub fn step(&mut self, action: usize) -> (f64, bool, Outcome) {
        assert!(!self.over);
        if action != OPPOSITE[self.dir] {
            self.dir = action;
        }
        self.steps += 1;
        let (dc, dr) = DELTAS[self.dir];
        let head = (self.body[0].0 + dc, self.body[0].1 + dr);
        let grows = Some(head) == self.apple;
        let off = head.0 < 0 || head.1 < 0 || head.0 >= self.w || head.1 >= self.h;
        let mut solid = self.body.clone();
        if !grows {
            solid.pop();
        }
        if off || solid.contains(&head) {
            self.over = true;
            return (-1.0, true, Outcome::Death);
        }
        self.body.insert(0, head);
        let (reward, mut outcome) = if grows {
            self.score += 1;
            self.place_apple();
            if self.apple.is_none() {
                self.over = true;
                (1.0, Outcome::Win)
            } else {
                (1.0, Outcome::Apple)
            }
        } else {
            self.body.pop();
            (-0.1, Outcome::Move)
        };
        if !self.over && self.steps >= self.max_steps {
            self.over = true;
            outcome = Outcome::Timeout;
        }
        (reward, self.over, outcome)
    }
}

use snake_dqn::env::{Direction, EnvState, Event, GridConfig};

fn same_event(e: Event, o: Outcome) -> bool {
    matches!(
        (e, o),
        (Event::AteApple, Outcome::Apple)
            | (Event::Collision, Outcome::Death)
            | (Event::Moved, Outcome::Move)
            | (Event::Truncated, Outcome::Timeout)
            | (Event::Won, Outcome::Win)
    )
}

/// Drive the crate environment and the oracle with the same random actions
/// on a 4x4 board for `total_steps` transitions, restarting both on
/// terminal states. Returns (mismatching transitions, episodes played).
pub fn count_mismatches(total_steps: u64, seed: u64, max_steps: u64) -> (u64, u64) {
    let config = GridConfig {
        width: 4,
        height: 4,
        cell_px: 1,
        init_snake_len: 3,
        max_steps,
    };
    let mut actions = Pcg64::seed_from_u64(seed);
    let mut episode = 0u64;
    let env_seed = |ep: u64| seed.wrapping_mul(1_000_003).wrapping_add(ep);
    let mut env = EnvState::reset(config, env_seed(0)).unwrap();
    let mut oracle = Oracle::new(4, 4, 3, max_steps, env_seed(0));
    let mut mismatches = 0;
    for _ in 0..total_steps {
        let a = actions.random_range(0..4usize);
        let out = env.step(Direction::from_index(a).unwrap()).unwrap();
        let (reward, terminal, outcome) = oracle.step(a);
        let body: Vec<(i32, i32)> = env.body().map(|c| (c.col, c.row)).collect();
        let agree = out.reward == reward
            && out.terminal == terminal
            && same_event(out.event, outcome)
            && env.score() == oracle.score
            && env.steps() == oracle.steps
            && env.apple().map(|c| (c.col, c.row)) == oracle.apple
            && body == oracle.body;
        if !agree {
            mismatches += 1;
        }
        if terminal || !agree {
            episode += 1;
            env = EnvState::reset(config, env_seed(episode)).unwrap();
            oracle = Oracle::new(4, 4, 3, max_steps, env_seed(episode));
        }
    }
    (mismatches, episode)
}
