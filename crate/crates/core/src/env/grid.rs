//! Cliff-walking gridworld loaded from a text map.
//!
//! Map format: optional directive lines followed by a rectangular grid.
//!
//! ```text
//! ; comment
//! noise 0.8 0.1 0.1        ; forward, clockwise, counter-clockwise
//! rewards 20 -20 -1        ; goal, cliff, step
//! ............
//! .CCCCCCCCCX#
//! ```
//!
//! Grid characters: `.` walkable, `S` walkable start, `C` cliff, `X` goal,
//! `#` wall. Entering a cliff or goal cell ends the episode.

use std::fmt;

use super::{Environment, Outcome, StepOutcome, TabularMdp, TerminalKind};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::table::{ActionLayout, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Walkable,
    Cliff,
    Goal,
    Wall,
}

/// Move directions in clockwise order, so rotation is index arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up = 0,
    Right = 1,
    Down = 2,
    Left = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Right, Direction::Down, Direction::Left];

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    pub fn clockwise(self) -> Self {
        Self::from_index(self as usize + 1)
    }

    pub fn counter_clockwise(self) -> Self {
        Self::from_index(self as usize + 3)
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Direction::Up => (0, -1),
            Direction::Right => (1, 0),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Right => "right",
            Direction::Down => "down",
            Direction::Left => "left",
        }
    }
}

/// Probabilities that a move goes forward, or is rotated 90° either way.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Noise {
    pub forward: f64,
    pub clockwise: f64,
    pub counter_clockwise: f64,
}

impl Noise {
    pub const DETERMINISTIC: Noise = Noise {
        forward: 1.0,
        clockwise: 0.0,
        counter_clockwise: 0.0,
    };

    pub fn new(forward: f64, clockwise: f64, counter_clockwise: f64) -> Result<Self> {
        let parts = [forward, clockwise, counter_clockwise];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("noise components must lie in [0, 1]"));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("noise components sum to {total}, not 1")));
        }
        Ok(Self {
            forward,
            clockwise,
            counter_clockwise,
        })
    }

    pub fn is_deterministic(&self) -> bool {
        self.forward == 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rewards {
    pub goal: f64,
    pub cliff: f64,
    pub step: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Self {
            goal: 20.0,
            cliff: -20.0,
            step: -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapCounts {
    pub walkable: usize,
    pub cliff: usize,
    pub goal: usize,
    pub wall: usize,
}

impl fmt::Display for MapCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "walkable {} cliff {} goal {} wall {}",
            self.walkable, self.cliff, self.goal, self.wall
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: Option<(usize, usize)>,
    rewards: Rewards,
    noise: Noise,
    /// Walkable cells in row-major order; the state id is the position here.
    states: Vec<(usize, usize)>,
    state_of: Vec<Option<usize>>,
    layout: ActionLayout,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_numbers<const N: usize>(line_no: usize, line: &str, rest: &str, name: &str) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    let mut tokens = rest.split_whitespace();
    for slot in out.iter_mut() {
        let tok = tokens
            .next()
            .ok_or_else(|| parse_err(line_no, 1, format!("`{name}` expects {N} numbers")))?;
        let column = line.find(tok).map_or(1, |c| c + 1);
        *slot = tok
            .parse()
            .map_err(|_| parse_err(line_no, column, format!("`{tok}` is not a number")))?;
    }
    if let Some(extra) = tokens.next() {
        let column = line.rfind(extra).map_or(1, |c| c + 1);
        return Err(parse_err(line_no, column, format!("`{name}` expects {N} numbers")));
    }
    Ok(out)
}

impl GridMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut noise = Noise::DETERMINISTIC;
        let mut rewards = Rewards::default();
        let mut rows: Vec<(usize, Vec<Cell>)> = Vec::new();
        let mut start = None;
        let mut start_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split(';').next().unwrap_or("").trim_end();
            if line.trim().is_empty() {
                continue;
            }
            let trimmed = line.trim_start();
            let keyword = trimmed.split_whitespace().next().unwrap_or("");
            match keyword {
                "noise" => {
                    let [f, cw, ccw] = parse_numbers::<3>(line_no, line, &trimmed[5..], "noise")?;
                    noise = Noise::new(f, cw, ccw).map_err(|e| match e {
                        Error::Config(m) => parse_err(line_no, 1, m),
                        other => other,
                    })?;
                    continue;
                }
                "rewards" => {
                    let [goal, cliff, step] = parse_numbers::<3>(line_no, line, &trimmed[7..], "rewards")?;
                    rewards = Rewards { goal, cliff, step };
                    continue;
                }
                _ => {}
            }
            let y = rows.len();
            let mut row = Vec::with_capacity(line.len());
            for (x, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '.' => Cell::Walkable,
                    'S' => {
                        if start.is_some() {
                            return Err(parse_err(
                                line_no,
                                x + 1,
                                format!("second start cell (first on line {start_line})"),
                            ));
                        }
                        start = Some((x, y));
                        start_line = line_no;
                        Cell::Walkable
                    }
                    'C' => Cell::Cliff,
                    'X' => Cell::Goal,
                    '#' => Cell::Wall,
                    other => {
                        return Err(parse_err(line_no, x + 1, format!("unknown map character `{other}`")))
                    }
                };
                row.push(cell);
            }
            if let Some((_, first)) = rows.first() {
                if row.len() != first.len() {
                    return Err(parse_err(
                        line_no,
                        row.len().min(first.len()) + 1,
                        format!("row has {} cells, expected {}", row.len(), first.len()),
                    ));
                }
            }
            rows.push((line_no, row));
        }

        let last_line = text.lines().count().max(1);
        if rows.is_empty() {
            return Err(parse_err(last_line, 1, "map has no grid rows"));
        }
        let width = rows[0].1.len();
        let height = rows.len();
        let cells: Vec<Cell> = rows.into_iter().flat_map(|(_, r)| r).collect();
        if !cells.contains(&Cell::Goal) {
            return Err(parse_err(last_line, 1, "map has no goal cell"));
        }
        if !cells.contains(&Cell::Walkable) {
            return Err(parse_err(last_line, 1, "map has no walkable cell"));
        }
        Ok(Self::from_cells(width, height, cells, start, rewards, noise))
    }

    fn from_cells(
        width: usize,
        height: usize,
        cells: Vec<Cell>,
        start: Option<(usize, usize)>,
        rewards: Rewards,
        noise: Noise,
    ) -> Self {
        let mut states = Vec::new();
        let mut state_of = vec![None; cells.len()];
        for y in 0..height {
            for x in 0..width {
                if cells[y * width + x] == Cell::Walkable {
                    state_of[y * width + x] = Some(states.len());
                    states.push((x, y));
                }
            }
        }
        let layout = ActionLayout::uniform(states.len(), 4).expect("at least one walkable cell");
        Self {
            width,
            height,
            cells,
            start,
            rewards,
            noise,
            states,
            state_of,
            layout,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn rewards(&self) -> Rewards {
        self.rewards
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    pub fn counts(&self) -> MapCounts {
        let count = |c: Cell| self.cells.iter().filter(|&&x| x == c).count();
        MapCounts {
            walkable: count(Cell::Walkable),
            cliff: count(Cell::Cliff),
            goal: count(Cell::Goal),
            wall: count(Cell::Wall),
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn position(&self, state: usize) -> (usize, usize) {
        self.states[state]
    }

    pub fn state_at(&self, x: usize, y: usize) -> Option<usize> {
        self.state_of.get(y * self.width + x).copied().flatten()
    }

    pub fn start_state(&self) -> Option<usize> {
        self.start.and_then(|(x, y)| self.state_at(x, y))
    }

    /// Same map with a different noise model.
    pub fn with_noise(&self, noise: Noise) -> Self {
        Self { noise, ..self.clone() }
    }

    /// Outcome of actually moving one tile in `dir` from `state`.
    pub fn resolve(&self, state: usize, dir: Direction) -> StepOutcome {
        let (x, y) = self.states[state];
        let (dx, dy) = dir.offset();
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        let stay = StepOutcome {
            reward: self.rewards.step,
            next: StateId::NonTerminal(state),
            terminal: None,
        };
        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
            return stay;
        }
        let (nx, ny) = (nx as usize, ny as usize);
        match self.cell(nx, ny) {
            Cell::Wall => stay,
            Cell::Cliff => StepOutcome {
                reward: self.rewards.cliff,
                next: StateId::Terminal,
                terminal: Some(TerminalKind::Failure),
            },
            Cell::Goal => StepOutcome {
                reward: self.rewards.goal,
                next: StateId::Terminal,
                terminal: Some(TerminalKind::Goal),
            },
            Cell::Walkable => StepOutcome {
                reward: self.rewards.step,
                next: StateId::NonTerminal(self.state_at(nx, ny).expect("walkable cell has a state")),
                terminal: None,
            },
        }
    }

    /// Direction actually taken, given the intended one and a uniform draw.
    pub fn effective_direction(&self, intended: Direction, u: f64) -> Direction {
        if u < self.noise.forward {
            intended
        } else if u < self.noise.forward + self.noise.clockwise {
            intended.clockwise()
        } else {
            intended.counter_clockwise()
        }
    }

    fn check_key(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.states.len() {
            return Err(Error::contract(format!("state {state} is not a walkable cell")));
        }
        if action >= 4 {
            return Err(Error::Key { state, action });
        }
        Ok(())
    }
}

impl Environment for GridMap {
    fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    fn step(&self, state: usize, action: usize, rng: &mut Rng) -> Result<StepOutcome> {
        self.check_key(state, action)?;
        let dir = self.effective_direction(Direction::from_index(action), rng.next_f64());
        Ok(self.resolve(state, dir))
    }

    fn fixed_start(&self) -> Option<usize> {
        self.start_state()
    }

    fn to_tabular(&self) -> TabularMdp {
        let mut rows = Vec::with_capacity(self.states.len());
        for s in 0..self.states.len() {
            let mut state_rows = Vec::with_capacity(4);
            for intended in Direction::ALL {
                let branches = [
                    (intended, self.noise.forward),
                    (intended.clockwise(), self.noise.clockwise),
                    (intended.counter_clockwise(), self.noise.counter_clockwise),
                ];
                let mut row: Vec<Outcome> = Vec::with_capacity(3);
                for (dir, prob) in branches {
                    if prob == 0.0 {
                        continue;
                    }
                    let o = self.resolve(s, dir);
                    match row.iter_mut().find(|r| r.next == o.next && r.reward == o.reward) {
                        Some(existing) => existing.prob += prob,
                        None => row.push(Outcome {
                            next: o.next,
                            prob,
                            reward: o.reward,
                            terminal: o.terminal,
                        }),
                    }
                }
                state_rows.push(row);
            }
            rows.push(state_rows);
        }
        let state_names = (0..self.states.len()).map(|s| self.state_label(s)).collect();
        let action_names = vec![Direction::ALL.iter().map(|d| d.name().to_string()).collect(); self.states.len()];
        TabularMdp::new(state_names, action_names, rows).expect("grid export is a valid model")
    }

    fn state_label(&self, state: usize) -> String {
        let (x, y) = self.states[state];
        format!("r{y}c{x}")
    }

    fn action_label(&self, _state: usize, action: usize) -> String {
        Direction::from_index(action).name().to_string()
    }
}
