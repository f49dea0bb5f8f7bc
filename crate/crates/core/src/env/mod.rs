//! Snake on a square grid.
//!
//! Coordinates are `(col, row)` with the origin in the top-left corner;
//! `Up` decreases the row. The body is stored head first.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::preprocess::{self, RgbFrame};
use crate::rng::{self, Pcg64};

mod render;

pub use render::render_rgb;

pub const REWARD_APPLE: f64 = 1.0;
pub const REWARD_COLLISION: f64 = -1.0;
pub const REWARD_MOVE: f64 = -0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub cell_px: usize,
    pub init_snake_len: usize,
    pub max_steps: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            width: 12,
            height: 12,
            cell_px: 21,
            init_snake_len: 3,
            max_steps: 10_000,
        }
    }
}

impl GridConfig {
    /// Same board with a different step cap.
    pub fn with_max_steps(self, max_steps: u64) -> Self {
        GridConfig { max_steps, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.cell_px == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if self.init_snake_len == 0 || self.init_snake_len >= self.width {
            return Err(Error::Config(format!(
                "init_snake_len must be in [1, width): got {} for width {}",
                self.init_snake_len, self.width
            )));
        }
        if self.init_snake_len > self.width / 2 + 1 {
            return Err(Error::Config(format!(
                "snake of length {} does not fit left of the centre column",
                self.init_snake_len
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn frame_width(&self) -> usize {
        self.width * self.cell_px
    }

    pub fn frame_height(&self) -> usize {
        self.height * self.cell_px
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.col >= 0
            && cell.row >= 0
            && (cell.col as usize) < self.width
            && (cell.row as usize) < self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    /// `(dcol, drow)` of one move.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    /// Action index used by the Q-network outputs.
    pub fn index(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Down => 1,
            Direction::Left => 2,
            Direction::Right => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Direction> {
        Direction::ALL.get(index).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub const fn new(col: i32, row: i32) -> Self {
        Cell { col, row }
    }

    pub fn moved(self, dir: Direction) -> Cell {
        let (dc, dr) = dir.delta();
        Cell::new(self.col + dc, self.row + dr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    AteApple,
    Collision,
    Moved,
    Truncated,
    Won,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: bool,
    pub event: Event,
}

#[derive(Debug, Clone)]
pub struct EnvState {
    config: GridConfig,
    body: VecDeque<Cell>,
    heading: Direction,
    /// `None` only once the board is full.
    apple: Option<Cell>,
    score: u32,
    steps: u64,
    done: bool,
    rng: Pcg64,
}

impl EnvState {
    /// Start an episode: a horizontal snake ending at the centre cell,
    /// heading right, and one apple on a uniformly chosen free cell.
    pub fn reset(config: GridConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let head = Cell::new((config.width / 2) as i32, (config.height / 2) as i32);
        let body = (0..config.init_snake_len as i32)
            .map(|i| Cell::new(head.col - i, head.row))
            .collect();
        let mut state = EnvState {
            config,
            body,
            heading: Direction::Right,
            apple: None,
            score: 0,
            steps: 0,
            done: false,
            rng: rng::seeded(seed),
        };
        state.apple = state.spawn_apple();
        Ok(state)
    }

    /// Build an arbitrary live state, mostly for tests and golden files.
    pub fn from_parts(
        config: GridConfig,
        body: Vec<Cell>,
        heading: Direction,
        apple: Option<Cell>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if body.is_empty() {
            return Err(Error::Usage("snake body must not be empty".into()));
        }
        for (i, cell) in body.iter().enumerate() {
            if !config.contains(*cell) {
                return Err(Error::Usage(format!("body cell {cell} is off the board")));
            }
            if body[..i].contains(cell) {
                return Err(Error::Usage(format!("body cell {cell} repeats")));
            }
        }
        if let Some(apple) = apple {
            if !config.contains(apple) || body.contains(&apple) {
                return Err(Error::Usage(format!("apple {apple} is not on a free cell")));
            }
        }
        let score = body.len().saturating_sub(config.init_snake_len) as u32;
        Ok(EnvState {
            config,
            body: body.into(),
            heading,
            apple,
            score,
            steps: 0,
            done: false,
            rng: rng::seeded(seed),
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn body(&self) -> impl ExactSizeIterator<Item = Cell> + '_ {
        self.body.iter().copied()
    }

    pub fn head(&self) -> Cell {
        self.body[0]
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn heading(&self) -> Direction {
        self.heading
    }

    pub fn apple(&self) -> Option<Cell> {
        self.apple
    }

    pub fn score(&self) -> u32 {
        self.score
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Grid cells that are neither snake nor apple, row-major.
    pub fn free_cells(&self) -> Vec<Cell> {
        let mut occupied = vec![false; self.config.cells()];
        for cell in self.body.iter().chain(self.apple.iter()) {
            occupied[self.cell_index(*cell)] = true;
        }
        (0..self.config.height as i32)
            .flat_map(|row| (0..self.config.width as i32).map(move |col| Cell::new(col, row)))
            .filter(|c| !occupied[self.cell_index(*c)])
            .collect()
    }

    fn cell_index(&self, cell: Cell) -> usize {
        cell.row as usize * self.config.width + cell.col as usize
    }

    fn spawn_apple(&mut self) -> Option<Cell> {
        self.apple = None;
        let free = self.free_cells();
        if free.is_empty() {
            None
        } else {
            Some(free[self.rng.random_range(0..free.len())])
        }
    }

    /// Advance one tick. Reversing onto the neck is ignored.
    pub fn step(&mut self, action: Direction) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        if action != self.heading.opposite() {
            self.heading = action;
        }
        self.steps += 1;
        let new_head = self.head().moved(self.heading);
        let eats = self.apple == Some(new_head);

        let hits_body = || {
            // The tail vacates its cell this tick unless the snake grows.
            let n = if eats {
                self.body.len()
            } else {
                self.body.len() - 1
            };
            self.body.iter().take(n).any(|c| *c == new_head)
        };
        if !self.config.contains(new_head) || hits_body() {
            self.done = true;
            return Ok(StepOutcome {
                reward: REWARD_COLLISION,
                terminal: true,
                event: Event::Collision,
            });
        }

        self.body.push_front(new_head);
        let (reward, mut event) = if eats {
            self.score += 1;
            self.apple = self.spawn_apple();
            if self.apple.is_none() {
                self.done = true;
                (REWARD_APPLE, Event::Won)
            } else {
                (REWARD_APPLE, Event::AteApple)
            }
        } else {
            self.body.pop_back();
            (REWARD_MOVE, Event::Moved)
        };
        if !self.done && self.steps >= self.config.max_steps {
            self.done = true;
            event = Event::Truncated;
        }
        Ok(StepOutcome {
            reward,
            terminal: self.done,
            event,
        })
    }

    pub fn render(&self) -> RgbFrame {
        render_rgb(self)
    }

    /// One line per grid row: `H` head, `S` body, `A` apple, `.` empty.
    pub fn to_text(&self) -> String {
        let mut grid = vec![vec!['.'; self.config.width]; self.config.height];
        if let Some(a) = self.apple {
            grid[a.row as usize][a.col as usize] = 'A';
        }
        for (i, c) in self.body.iter().enumerate() {
            grid[c.row as usize][c.col as usize] = if i == 0 { 'H' } else { 'S' };
        }
        let mut out = String::with_capacity((self.config.width + 1) * self.config.height);
        for row in grid {
            out.extend(row);
            out.push('\n');
        }
        out
    }

    /// Write the rendered frame, converted to 8-bit luma, as a binary PGM.
    pub fn dump_pgm(&self, path: &Path) -> Result<()> {
        let frame = self.render();
        let gray = preprocess::to_grayscale(&frame);
        let pixels: Vec<u8> = gray.data().iter().map(|v| v.round() as u8).collect();
        let mut buf = Vec::new();
        preprocess::write_pgm(&mut buf, frame.width(), frame.height(), &pixels)
            .expect("writing to a Vec cannot fail");
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(v: &[(i32, i32)]) -> Vec<Cell> {
        v.iter().map(|&(c, r)| Cell::new(c, r)).collect()
    }

    #[test]
    fn reset_places_centered_snake() {
        let s = EnvState::reset(GridConfig::default(), 0).unwrap();
        assert_eq!(s.head(), Cell::new(6, 6));
        assert_eq!(
            s.body().collect::<Vec<_>>(),
            cells(&[(6, 6), (5, 6), (4, 6)])
        );
        assert_eq!(s.heading(), Direction::Right);
        assert_eq!(s.score(), 0);
        assert_eq!(s.steps(), 0);
        assert!(!s.is_done());
        let apple = s.apple().unwrap();
        assert!(!s.body().any(|c| c == apple));
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let a = EnvState::reset(GridConfig::default(), 42).unwrap();
        let b = EnvState::reset(GridConfig::default(), 42).unwrap();
        assert_eq!(a.apple(), b.apple());
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = GridConfig {
            init_snake_len: 12,
            ..GridConfig::default()
        };
        assert!(matches!(EnvState::reset(bad, 0), Err(Error::Config(_))));
        let zero = GridConfig {
            width: 0,
            ..GridConfig::default()
        };
        assert!(EnvState::reset(zero, 0).is_err());
    }

    #[test]
    fn wall_collision() {
        let mut s = EnvState::from_parts(
            GridConfig::default(),
            cells(&[(11, 6), (10, 6), (9, 6)]),
            Direction::Right,
            Some(Cell::new(0, 0)),
            1,
        )
        .unwrap();
        let out = s.step(Direction::Right).unwrap();
        assert_eq!(out.event, Event::Collision);
        assert_eq!(out.reward, -1.0);
        assert!(out.terminal && s.is_done());
        assert!(matches!(s.step(Direction::Up), Err(Error::Usage(_))));
    }

    #[test]
    fn eating_grows_and_scores() {
        let mut s = EnvState::from_parts(
            GridConfig::default(),
            cells(&[(6, 6), (5, 6), (4, 6)]),
            Direction::Right,
            Some(Cell::new(7, 6)),
            1,
        )
        .unwrap();
        let out = s.step(Direction::Right).unwrap();
        assert_eq!(out.event, Event::AteApple);
        assert_eq!(out.reward, 1.0);
        assert_eq!(s.score(), 1);
        assert_eq!(s.len(), 4);
        assert!(!s.body().any(|c| Some(c) == s.apple()));
    }

    #[test]
    fn plain_move() {
        let mut s = EnvState::from_parts(
            GridConfig::default(),
            cells(&[(6, 6), (5, 6), (4, 6)]),
            Direction::Right,
            Some(Cell::new(0, 0)),
            1,
        )
        .unwrap();
        let out = s.step(Direction::Up).unwrap();
        assert_eq!(out.event, Event::Moved);
        assert_eq!(out.reward, -0.1);
        assert_eq!(s.len(), 3);
        assert_eq!(s.head(), Cell::new(6, 5));
    }

    #[test]
    fn reverse_input_is_ignored() {
        let mut s = EnvState::reset(GridConfig::default(), 3).unwrap();
        s.step(Direction::Left).unwrap();
        assert_eq!(s.head(), Cell::new(7, 6));
        assert_eq!(s.heading(), Direction::Right);
    }

    #[test]
    fn moving_into_vacated_tail_is_legal() {
        // 2x2 loop: head (1,0), body (1,1),(0,1),(0,0); moving left enters the tail cell.
        let cfg = GridConfig {
            width: 4,
            height: 4,
            init_snake_len: 3,
            ..GridConfig::default()
        };
        let mut s = EnvState::from_parts(
            cfg,
            cells(&[(1, 0), (1, 1), (0, 1), (0, 0)]),
            Direction::Up,
            Some(Cell::new(3, 3)),
            0,
        )
        .unwrap();
        let out = s.step(Direction::Left).unwrap();
        assert_eq!(out.event, Event::Moved);
        assert_eq!(s.head(), Cell::new(0, 0));
    }

    #[test]
    fn truncation_at_step_cap() {
        let cfg = GridConfig::default().with_max_steps(2);
        let mut s = EnvState::from_parts(
            cfg,
            cells(&[(6, 6), (5, 6), (4, 6)]),
            Direction::Right,
            Some(Cell::new(0, 0)),
            0,
        )
        .unwrap();
        assert_eq!(s.step(Direction::Right).unwrap().event, Event::Moved);
        let out = s.step(Direction::Right).unwrap();
        assert_eq!(out.event, Event::Truncated);
        assert_eq!(out.reward, -0.1);
        assert!(out.terminal);
    }

    #[test]
    fn filling_the_board_wins() {
        // 2x1 board: snake of one cell, apple on the other.
        let cfg = GridConfig {
            width: 2,
            height: 1,
            cell_px: 1,
            init_snake_len: 1,
            max_steps: 10,
        };
        let mut s = EnvState::from_parts(
            cfg,
            cells(&[(0, 0)]),
            Direction::Right,
            Some(Cell::new(1, 0)),
            0,
        )
        .unwrap();
        let out = s.step(Direction::Right).unwrap();
        assert_eq!(out.event, Event::Won);
        assert_eq!(out.reward, 1.0);
        assert!(out.terminal);
        assert_eq!(s.apple(), None);
        assert!(s.free_cells().is_empty());
    }

    #[test]
    fn free_cells_counts() {
        let s = EnvState::reset(GridConfig::default(), 0).unwrap();
        let free = s.free_cells();
        assert_eq!(free.len(), 140);
        for c in &free {
            assert!(!s.body().any(|b| b == *c));
            assert_ne!(Some(*c), s.apple());
        }
        let mut sorted = free.clone();
        sorted.sort_by_key(|c| (c.row, c.col));
        assert_eq!(sorted, free);
    }

    #[test]
    fn free_cells_empty_on_full_board() {
        let cfg = GridConfig {
            width: 3,
            height: 1,
            cell_px: 1,
            init_snake_len: 1,
            max_steps: 10,
        };
        let s = EnvState::from_parts(
            cfg,
            cells(&[(2, 0), (1, 0), (0, 0)]),
            Direction::Right,
            None,
            0,
        )
        .unwrap();
        assert!(s.free_cells().is_empty());
    }

    #[test]
    fn text_format() {
        let s = EnvState::from_parts(
            GridConfig {
                width: 5,
                height: 3,
                ..GridConfig::default()
            },
            cells(&[(2, 1), (1, 1), (0, 1)]),
            Direction::Right,
            Some(Cell::new(4, 2)),
            0,
        )
        .unwrap();
        assert_eq!(s.to_text(), ".....\nSSH..\n....A\n");
    }

    #[test]
    fn direction_opposites() {
        for d in Direction::ALL {
            assert_eq!(d.opposite().opposite(), d);
            assert_ne!(d.opposite(), d);
            assert_eq!(Direction::from_index(d.index()), Some(d));
        }
    }
}
