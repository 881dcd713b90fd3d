//! Deterministic 8-connected grid world with simultaneous multi-entity
//! stepping.
//!
//! Movement follows a pre-step occupancy rule: an entity moves iff its
//! target cell is in bounds, statically free, and was unoccupied at the
//! start of the step. Two entities contending for the same free cell are
//! resolved by priority (agents before obstacles, then lower id); position
//! swaps are impossible under the pre-step rule and both parties register
//! a collision.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{self, stream};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("map parse error at row {row}, column {col}: {reason}")]
    Parse { row: usize, col: usize, reason: String },
    #[error("scenario infeasible: {0}")]
    Scenario(String),
    #[error("expected {expected} actions for {kind}, got {got}")]
    ActionCount { kind: &'static str, expected: usize, got: usize },
    #[error("unknown agent id {0}")]
    UnknownAgent(usize),
    #[error("unknown obstacle id {0}")]
    UnknownObstacle(usize),
}

/// A grid coordinate: `x` is the column, `y` the row (row 0 at the top).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell { x: self.x + dx, y: self.y + dy }
    }

    /// King-move (Chebyshev) distance.
    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn euclidean(self, other: Cell) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// The nine discrete moves: wait plus the eight king directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Wait,
    North,
    NorthEast,
    East,
    SouthEast,
    South,
    SouthWest,
    West,
    NorthWest,
}

pub const ACTION_COUNT: usize = 9;

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [
        Action::Wait,
        Action::North,
        Action::NorthEast,
        Action::East,
        Action::SouthEast,
        Action::South,
        Action::SouthWest,
        Action::West,
        Action::NorthWest,
    ];

    /// Unit displacement `(dx, dy)`; north decreases `y`.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Wait => (0, 0),
            Action::North => (0, -1),
            Action::NorthEast => (1, -1),
            Action::East => (1, 0),
            Action::SouthEast => (1, 1),
            Action::South => (0, 1),
            Action::SouthWest => (-1, 1),
            Action::West => (-1, 0),
            Action::NorthWest => (-1, -1),
        }
    }

    pub fn index(self) -> usize {
        Action::ALL.iter().position(|&a| a == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// The action that moves from `from` to an 8-adjacent (or equal) `to`.
    pub fn towards(from: Cell, to: Cell) -> Option<Action> {
        let (dx, dy) = (to.x - from.x, to.y - from.y);
        Action::ALL
            .iter()
            .copied()
            .find(|a| a.delta() == (dx, dy))
    }
}

/// Immutable static occupancy grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: i32,
    height: i32,
    blocked: Vec<bool>,
}

impl GridMap {
    /// Parse a map from rows of `.` (free) and `#` (static obstacle).
    pub fn parse(text: &str) -> Result<GridMap, GridError> {
        let mut rows: Vec<&str> = text.lines().collect();
        while rows.last().is_some_and(|r| r.is_empty()) {
            rows.pop();
        }
        if rows.is_empty() {
            return Err(GridError::Parse { row: 0, col: 0, reason: "empty map".into() });
        }
        let width = rows[0].chars().count();
        let mut blocked = Vec::with_capacity(width * rows.len());
        for (y, row) in rows.iter().enumerate() {
            let cells: Vec<char> = row.chars().collect();
            if cells.len() != width {
                return Err(GridError::Parse {
                    row: y,
                    col: cells.len(),
                    reason: format!("ragged row: expected width {width}, got {}", cells.len()),
                });
            }
            for (x, c) in cells.iter().enumerate() {
                match c {
                    '.' => blocked.push(false),
                    '#' => blocked.push(true),
                    other => {
                        return Err(GridError::Parse {
                            row: y,
                            col: x,
                            reason: format!("illegal character {other:?} (expected '.' or '#')"),
                        })
                    }
                }
            }
        }
        let (width, height) = (width as i32, rows.len() as i32);
        if width < 2 || height < 2 {
            return Err(GridError::Parse {
                row: 0,
                col: 0,
                reason: format!("map must be at least 2x2, got {width}x{height}"),
            });
        }
        Ok(GridMap { width, height, blocked })
    }

    /// Random map with each cell blocked independently at `density`.
    pub fn random(width: i32, height: i32, density: f64, rng: &mut ChaCha8Rng) -> GridMap {
        assert!(width >= 2 && height >= 2, "map must be at least 2x2");
        let blocked = (0..width * height)
            .map(|_| rng.random::<f64>() < density)
            .collect();
        GridMap { width, height, blocked }
    }

    pub fn empty(width: i32, height: i32) -> GridMap {
        assert!(width >= 2 && height >= 2, "map must be at least 2x2");
        GridMap { width, height, blocked: vec![false; (width * height) as usize] }
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    /// True when `c` is in bounds and statically free.
    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[(c.y * self.width + c.x) as usize]
    }

    /// True when `c` is in bounds and holds a static obstacle.
    pub fn is_blocked(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.blocked[(c.y * self.width + c.x) as usize]
    }

    pub fn count_blocked(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                if self.is_free(c) {
                    cells.push(c);
                }
            }
        }
        cells
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(((self.width + 1) * self.height) as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                s.push(if self.blocked[(y * self.width + x) as usize] { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    /// The map diagonal, an upper bound for any in-map Euclidean distance.
    pub fn diagonal(&self) -> f64 {
        ((self.width as f64).powi(2) + (self.height as f64).powi(2)).sqrt()
    }
}

/// Loads a map from file contents.
pub fn load_map(text: &str) -> Result<GridMap, GridError> {
    GridMap::parse(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub pos: Cell,
    /// The cell this agent most recently moved away from.
    pub prev_pos: Cell,
    pub goal: Cell,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynObstacle {
    pub id: usize,
    pub pos: Cell,
    pub goal: Cell,
    /// Cooperative obstacles route around agents; non-cooperative ones
    /// ignore them.
    pub cooperative: bool,
}

/// Identifies one moving entity. Agents take priority over obstacles in
/// movement contention; within a kind, the lower id wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityRef {
    Agent(usize),
    Obstacle(usize),
}

/// Per-agent outcome of one world step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgentOutcome {
    pub moved: bool,
    pub collided: bool,
    pub reached_goal: bool,
    pub oscillated: bool,
    /// The agent had already reached its goal before this step.
    pub was_done: bool,
}

pub type StepOutcome = Vec<AgentOutcome>;

/// Scenario generation parameters beyond the map itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_agents: usize,
    pub n_obstacles: usize,
    /// Maximum Euclidean start-to-goal distance for agents; `None` is
    /// unlimited.
    pub goal_range: Option<f64>,
    /// Minimum Euclidean start-to-goal distance for agents (evaluation
    /// suites that require long-range tasks). Default 0.
    pub min_goal_dist: f64,
    pub seed: u64,
}

impl ScenarioParams {
    pub fn new(n_agents: usize, n_obstacles: usize, goal_range: Option<f64>, seed: u64) -> Self {
        ScenarioParams { n_agents, n_obstacles, goal_range, min_goal_dist: 0.0, seed }
    }
}

/// Full world: static map, entities, step counter and the seeded generator
/// used for obstacle goal resampling.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub map: GridMap,
    pub agents: Vec<AgentState>,
    pub obstacles: Vec<DynObstacle>,
    pub time: u32,
    rng: ChaCha8Rng,
}

const PLACEMENT_RETRIES: usize = 400;

impl WorldState {
    /// Place agents and obstacles on distinct free cells with reachable,
    /// mutually distinct goals. Deterministic per seed.
    pub fn spawn_scenario(
        map: &GridMap,
        n_agents: usize,
        n_obstacles: usize,
        goal_range: Option<f64>,
        seed: u64,
    ) -> Result<WorldState, GridError> {
        WorldState::spawn(map, &ScenarioParams::new(n_agents, n_obstacles, goal_range, seed))
    }

    pub fn spawn(map: &GridMap, params: &ScenarioParams) -> Result<WorldState, GridError> {
        let free = map.free_cells();
        let needed = params.n_agents + params.n_obstacles;
        if free.len() < needed + 1 && needed > 0 {
            return Err(GridError::Scenario(format!(
                "{} free cells cannot host {} entities with goals",
                free.len(),
                needed
            )));
        }
        let mut rng = seeding::rng_for(params.seed, &[stream::SCENARIO]);

        let mut starts: Vec<Cell> = Vec::with_capacity(needed);
        for _ in 0..needed {
            let cell = sample_cell(&free, &mut rng, |c| !starts.contains(&c))
                .ok_or_else(|| GridError::Scenario("could not place distinct starts".into()))?;
            starts.push(cell);
        }

        let mut goals: Vec<Cell> = Vec::with_capacity(needed);
        for (i, &start) in starts.iter().enumerate() {
            let is_agent = i < params.n_agents;
            let goal = sample_cell(&free, &mut rng, |c| {
                if c == start || goals.contains(&c) {
                    return false;
                }
                if is_agent {
                    let d = start.euclidean(c);
                    if let Some(range) = params.goal_range {
                        if d > range {
                            return false;
                        }
                    }
                    if d < params.min_goal_dist {
                        return false;
                    }
                }
                reachable(map, start, c)
            })
            .ok_or_else(|| {
                GridError::Scenario(format!(
                    "could not place a reachable goal for {} {}",
                    if is_agent { "agent" } else { "obstacle" },
                    if is_agent { i } else { i - params.n_agents }
                ))
            })?;
            goals.push(goal);
        }

        // Half the obstacles, chosen at random, ignore agents entirely.
        let n_noncoop = params.n_obstacles / 2;
        let mut order: Vec<usize> = (0..params.n_obstacles).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut cooperative = vec![true; params.n_obstacles];
        for &k in order.iter().take(n_noncoop) {
            cooperative[k] = false;
        }

        let agents = (0..params.n_agents)
            .map(|i| AgentState {
                id: i,
                pos: starts[i],
                prev_pos: starts[i],
                goal: goals[i],
                done: false,
            })
            .collect();
        let obstacles = (0..params.n_obstacles)
            .map(|i| DynObstacle {
                id: i,
                pos: starts[params.n_agents + i],
                goal: goals[params.n_agents + i],
                cooperative: cooperative[i],
            })
            .collect();

        Ok(WorldState {
            map: map.clone(),
            agents,
            obstacles,
            time: 0,
            rng: seeding::rng_for(params.seed, &[stream::SCENARIO, 1]),
        })
    }

    /// Every entity's current cell, keyed for contention priority.
    pub fn occupancy(&self) -> HashMap<Cell, EntityRef> {
        let mut occ = HashMap::with_capacity(self.agents.len() + self.obstacles.len());
        for a in &self.agents {
            occ.insert(a.pos, EntityRef::Agent(a.id));
        }
        for o in &self.obstacles {
            occ.insert(o.pos, EntityRef::Obstacle(o.id));
        }
        occ
    }

    pub fn all_agents_done(&self) -> bool {
        self.agents.iter().all(|a| a.done)
    }

    /// Advance the world by one step. Takes one action per agent (ignored
    /// for agents that are already done) and one per obstacle.
    pub fn step(
        &mut self,
        agent_actions: &[Action],
        obstacle_actions: &[Action],
    ) -> Result<StepOutcome, GridError> {
        if agent_actions.len() != self.agents.len() {
            return Err(GridError::ActionCount {
                kind: "agents",
                expected: self.agents.len(),
                got: agent_actions.len(),
            });
        }
        if obstacle_actions.len() != self.obstacles.len() {
            return Err(GridError::ActionCount {
                kind: "obstacles",
                expected: self.obstacles.len(),
                got: obstacle_actions.len(),
            });
        }

        let occupied = self.occupancy();
        let mut outcomes: StepOutcome = self
            .agents
            .iter()
            .map(|a| AgentOutcome { was_done: a.done, ..AgentOutcome::default() })
            .collect();

        // Collect attempted moves: (priority entity, from, to).
        struct Attempt {
            entity: EntityRef,
            to: Cell,
        }
        let mut attempts: Vec<Attempt> = Vec::new();
        let mut failed_agents: Vec<usize> = Vec::new();

        for (a, &act) in self.agents.iter().zip(agent_actions) {
            if a.done || act == Action::Wait {
                continue;
            }
            let (dx, dy) = act.delta();
            let target = a.pos.offset(dx, dy);
            if self.map.is_free(target) && !occupied.contains_key(&target) {
                attempts.push(Attempt { entity: EntityRef::Agent(a.id), to: target });
            } else {
                failed_agents.push(a.id);
            }
        }
        for (o, &act) in self.obstacles.iter().zip(obstacle_actions) {
            if act == Action::Wait {
                continue;
            }
            let (dx, dy) = act.delta();
            let target = o.pos.offset(dx, dy);
            if self.map.is_free(target) && !occupied.contains_key(&target) {
                attempts.push(Attempt { entity: EntityRef::Obstacle(o.id), to: target });
            }
            // A blocked obstacle simply stays; only agents track collisions.
        }

        // Same-target contention: the best-priority claimant moves.
        let mut winners: HashMap<Cell, EntityRef> = HashMap::new();
        for at in &attempts {
            winners
                .entry(at.to)
                .and_modify(|w| {
                    if at.entity < *w {
                        *w = at.entity;
                    }
                })
                .or_insert(at.entity);
        }

        for at in &attempts {
            if winners[&at.to] != at.entity {
                if let EntityRef::Agent(id) = at.entity {
                    failed_agents.push(id);
                }
            }
        }

        for id in failed_agents {
            outcomes[id].collided = true;
        }

        for (&to, &entity) in &winners {
            match entity {
                EntityRef::Agent(id) => {
                    let a = &mut self.agents[id];
                    let from = a.pos;
                    a.pos = to;
                    outcomes[id].moved = true;
                    outcomes[id].oscillated = to == a.prev_pos;
                    a.prev_pos = from;
                    if to == a.goal {
                        outcomes[id].reached_goal = true;
                        a.done = true;
                    }
                }
                EntityRef::Obstacle(id) => {
                    self.obstacles[id].pos = to;
                }
            }
        }

        self.time += 1;
        Ok(outcomes)
    }

    /// Obstacles currently standing on their goals.
    pub fn obstacles_at_goal(&self) -> Vec<usize> {
        self.obstacles
            .iter()
            .filter(|o| o.pos == o.goal)
            .map(|o| o.id)
            .collect()
    }

    /// Draw a fresh reachable goal for one obstacle from the world's
    /// generator.
    pub fn resample_obstacle_goal(&mut self, id: usize) -> Result<(), GridError> {
        if id >= self.obstacles.len() {
            return Err(GridError::UnknownObstacle(id));
        }
        let free = self.map.free_cells();
        let pos = self.obstacles[id].pos;
        let map = self.map.clone();
        let goal = sample_cell(&free, &mut self.rng, |c| c != pos && reachable(&map, pos, c))
            .ok_or_else(|| GridError::Scenario(format!("no reachable goal for obstacle {id}")))?;
        self.obstacles[id].goal = goal;
        Ok(())
    }

    /// Stable structural hash over map, entities and time (FNV-1a).
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        h.push_i32(self.map.width);
        h.push_i32(self.map.height);
        for &b in &self.map.blocked {
            h.push_u8(b as u8);
        }
        h.push_u32(self.time);
        for a in &self.agents {
            h.push_cell(a.pos);
            h.push_cell(a.prev_pos);
            h.push_cell(a.goal);
            h.push_u8(a.done as u8);
        }
        for o in &self.obstacles {
            h.push_cell(o.pos);
            h.push_cell(o.goal);
            h.push_u8(o.cooperative as u8);
        }
        h.finish()
    }

    pub fn to_scenario(&self) -> ScenarioFile {
        ScenarioFile {
            map: self.map.to_text().lines().map(String::from).collect(),
            agents: self
                .agents
                .iter()
                .map(|a| ScenarioAgent { start: a.pos, goal: a.goal })
                .collect(),
            obstacles: self
                .obstacles
                .iter()
                .map(|o| ScenarioObstacle { start: o.pos, goal: o.goal, cooperative: o.cooperative })
                .collect(),
            seed: 0,
        }
    }

    pub fn from_scenario(sc: &ScenarioFile) -> Result<WorldState, GridError> {
        let map = GridMap::parse(&sc.map.join("\n"))?;
        let mut seen = Vec::new();
        for (i, a) in sc.agents.iter().enumerate() {
            if !map.is_free(a.start) || seen.contains(&a.start) {
                return Err(GridError::Scenario(format!("agent {i} start {} invalid", a.start)));
            }
            seen.push(a.start);
        }
        for (i, o) in sc.obstacles.iter().enumerate() {
            if !map.is_free(o.start) || seen.contains(&o.start) {
                return Err(GridError::Scenario(format!("obstacle {i} start {} invalid", o.start)));
            }
            seen.push(o.start);
        }
        Ok(WorldState {
            agents: sc
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| AgentState {
                    id: i,
                    pos: a.start,
                    prev_pos: a.start,
                    goal: a.goal,
                    done: false,
                })
                .collect(),
            obstacles: sc
                .obstacles
                .iter()
                .enumerate()
                .map(|(i, o)| DynObstacle {
                    id: i,
                    pos: o.start,
                    goal: o.goal,
                    cooperative: o.cooperative,
                })
                .collect(),
            map,
            time: 0,
            rng: seeding::rng_for(sc.seed, &[stream::SCENARIO, 1]),
        })
    }
}

/// Serializable scenario record: starts, goals, cooperative flags, seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub map: Vec<String>,
    pub agents: Vec<ScenarioAgent>,
    pub obstacles: Vec<ScenarioObstacle>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioAgent {
    pub start: Cell,
    pub goal: Cell,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioObstacle {
    pub start: Cell,
    pub goal: Cell,
    pub cooperative: bool,
}

fn sample_cell(
    free: &[Cell],
    rng: &mut ChaCha8Rng,
    mut accept: impl FnMut(Cell) -> bool,
) -> Option<Cell> {
    if free.is_empty() {
        return None;
    }
    for _ in 0..PLACEMENT_RETRIES {
        let c = free[rng.random_range(0..free.len())];
        if accept(c) {
            return Some(c);
        }
    }
    None
}

/// 8-connected reachability on the static map (BFS).
pub fn reachable(map: &GridMap, from: Cell, to: Cell) -> bool {
    if !map.is_free(from) || !map.is_free(to) {
        return false;
    }
    if from == to {
        return true;
    }
    let w = map.width();
    let mut seen = vec![false; (w * map.height()) as usize];
    let mut queue = std::collections::VecDeque::new();
    seen[(from.y * w + from.x) as usize] = true;
    queue.push_back(from);
    while let Some(c) = queue.pop_front() {
        for a in &Action::ALL[1..] {
            let (dx, dy) = a.delta();
            let n = c.offset(dx, dy);
            if !map.is_free(n) {
                continue;
            }
            let idx = (n.y * w + n.x) as usize;
            if seen[idx] {
                continue;
            }
            if n == to {
                return true;
            }
            seen[idx] = true;
            queue.push_back(n);
        }
    }
    false
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }
    fn push_u8(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x100000001b3);
    }
    fn push_u32(&mut self, v: u32) {
        for b in v.to_le_bytes() {
            self.push_u8(b);
        }
    }
    fn push_i32(&mut self, v: i32) {
        self.push_u32(v as u32);
    }
    fn push_cell(&mut self, c: Cell) {
        self.push_i32(c.x);
        self.push_i32(c.y);
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world_2x1_agents(positions: &[(i32, i32)], goals: &[(i32, i32)], map: &GridMap) -> WorldState {
        WorldState {
            map: map.clone(),
            agents: positions
                .iter()
                .zip(goals)
                .enumerate()
                .map(|(id, (&(x, y), &(gx, gy)))| AgentState {
                    id,
                    pos: Cell::new(x, y),
                    prev_pos: Cell::new(x, y),
                    goal: Cell::new(gx, gy),
                    done: false,
                })
                .collect(),
            obstacles: vec![],
            time: 0,
            rng: seeding::rng_for(0, &[stream::SCENARIO, 1]),
        }
    }

    #[test]
    fn parse_all_free() {
        let m = GridMap::parse("..\n..").unwrap();
        assert_eq!(m.width(), 2);
        assert_eq!(m.height(), 2);
        assert_eq!(m.count_blocked(), 0);
    }

    #[test]
    fn parse_obstacles_at_expected_cells() {
        let m = GridMap::parse(".#\n#.").unwrap();
        assert!(m.is_blocked(Cell::new(1, 0)));
        assert!(m.is_blocked(Cell::new(0, 1)));
        assert!(m.is_free(Cell::new(0, 0)));
        assert!(m.is_free(Cell::new(1, 1)));
    }

    #[test]
    fn parse_obstacle_count_matches_character_count() {
        let mut rng = seeding::rng_for(99, &[stream::MAP]);
        let m = GridMap::random(20, 20, 0.2, &mut rng);
        let text = m.to_text();
        let hashes = text.chars().filter(|&c| c == '#').count();
        let reparsed = GridMap::parse(&text).unwrap();
        assert_eq!(reparsed.count_blocked(), hashes);
        assert_eq!(reparsed, m);
    }

    #[test]
    fn parse_errors_carry_location() {
        match GridMap::parse("..\n.") {
            Err(GridError::Parse { row: 1, .. }) => {}
            other => panic!("expected ragged-row error, got {other:?}"),
        }
        match GridMap::parse("..\n.x") {
            Err(GridError::Parse { row: 1, col: 1, .. }) => {}
            other => panic!("expected illegal-character error, got {other:?}"),
        }
        assert!(GridMap::parse("").is_err());
    }

    #[test]
    fn spawn_respects_counts_range_and_flags() {
        let map = GridMap::empty(20, 20);
        let w = WorldState::spawn_scenario(&map, 4, 10, Some(7.0), 42).unwrap();
        let mut starts: Vec<Cell> = w.agents.iter().map(|a| a.pos).collect();
        starts.extend(w.obstacles.iter().map(|o| o.pos));
        let unique: std::collections::HashSet<_> = starts.iter().collect();
        assert_eq!(unique.len(), 14);
        for a in &w.agents {
            assert!(a.pos.euclidean(a.goal) <= 7.0);
            assert_ne!(a.pos, a.goal);
        }
        assert_eq!(w.obstacles.iter().filter(|o| !o.cooperative).count(), 5);
    }

    #[test]
    fn spawn_empty_scenario() {
        let map = GridMap::empty(5, 5);
        let w = WorldState::spawn_scenario(&map, 0, 0, None, 0).unwrap();
        assert!(w.agents.is_empty());
        assert!(w.obstacles.is_empty());
    }

    #[test]
    fn spawn_is_deterministic() {
        let map = GridMap::empty(20, 20);
        let a = WorldState::spawn_scenario(&map, 4, 10, Some(7.0), 7).unwrap();
        let b = WorldState::spawn_scenario(&map, 4, 10, Some(7.0), 7).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.agents, b.agents);
        assert_eq!(a.obstacles, b.obstacles);
    }

    #[test]
    fn spawn_infeasible_reports_error() {
        let map = GridMap::parse("..\n..").unwrap();
        assert!(WorldState::spawn_scenario(&map, 4, 4, None, 0).is_err());
    }

    #[test]
    fn step_unobstructed_move() {
        let map = GridMap::empty(4, 4);
        let mut w = world_2x1_agents(&[(0, 0)], &[(3, 3)], &map);
        let out = w.step(&[Action::East], &[]).unwrap();
        assert_eq!(w.agents[0].pos, Cell::new(1, 0));
        assert!(out[0].moved && !out[0].collided);
        assert_eq!(w.time, 1);
    }

    #[test]
    fn step_into_static_obstacle_collides() {
        let map = GridMap::parse(".#\n..").unwrap();
        let mut w = world_2x1_agents(&[(0, 0)], &[(1, 1)], &map);
        let out = w.step(&[Action::East], &[]).unwrap();
        assert_eq!(w.agents[0].pos, Cell::new(0, 0));
        assert!(!out[0].moved && out[0].collided);
    }

    #[test]
    fn step_out_of_bounds_collides() {
        let map = GridMap::empty(3, 3);
        let mut w = world_2x1_agents(&[(0, 0)], &[(2, 2)], &map);
        let out = w.step(&[Action::West], &[]).unwrap();
        assert!(!out[0].moved && out[0].collided);
    }

    #[test]
    fn step_swap_blocks_both() {
        let map = GridMap::empty(4, 2);
        let mut w = world_2x1_agents(&[(0, 0), (1, 0)], &[(3, 0), (3, 1)], &map);
        let out = w.step(&[Action::East, Action::West], &[]).unwrap();
        assert_eq!(w.agents[0].pos, Cell::new(0, 0));
        assert_eq!(w.agents[1].pos, Cell::new(1, 0));
        assert!(out[0].collided && out[1].collided);
        assert!(!out[0].moved && !out[1].moved);
    }

    #[test]
    fn step_contention_lower_id_wins() {
        let map = GridMap::empty(3, 3);
        // Both target (1,1).
        let mut w = world_2x1_agents(&[(0, 1), (2, 1)], &[(2, 2), (0, 0)], &map);
        let out = w.step(&[Action::East, Action::West], &[]).unwrap();
        assert_eq!(w.agents[0].pos, Cell::new(1, 1));
        assert_eq!(w.agents[1].pos, Cell::new(2, 1));
        assert!(out[0].moved && !out[0].collided);
        assert!(!out[1].moved && out[1].collided);
    }

    #[test]
    fn step_agent_beats_obstacle_in_contention() {
        let map = GridMap::empty(3, 3);
        let mut w = world_2x1_agents(&[(0, 1)], &[(2, 2)], &map);
        w.obstacles.push(DynObstacle {
            id: 0,
            pos: Cell::new(2, 1),
            goal: Cell::new(0, 0),
            cooperative: true,
        });
        let out = w.step(&[Action::East], &[Action::West]).unwrap();
        assert_eq!(w.agents[0].pos, Cell::new(1, 1));
        assert_eq!(w.obstacles[0].pos, Cell::new(2, 1));
        assert!(out[0].moved);
    }

    #[test]
    fn step_follower_into_vacated_cell_is_blocked() {
        // Pre-step occupancy: B cannot enter the cell A is leaving.
        let map = GridMap::empty(4, 1);
        let mut w = world_2x1_agents(&[(1, 0), (0, 0)], &[(3, 0), (2, 0)], &map);
        let out = w.step(&[Action::East, Action::East], &[]).unwrap();
        assert_eq!(w.agents[0].pos, Cell::new(2, 0));
        assert_eq!(w.agents[1].pos, Cell::new(0, 0));
        assert!(out[1].collided);
    }

    #[test]
    fn goal_reaching_marks_done_and_parks() {
        let map = GridMap::empty(3, 3);
        let mut w = world_2x1_agents(&[(0, 0)], &[(1, 1)], &map);
        let out = w.step(&[Action::SouthEast], &[]).unwrap();
        assert!(out[0].reached_goal && w.agents[0].done);
        // Further actions are ignored; the agent keeps occupying its goal.
        let out2 = w.step(&[Action::East], &[]).unwrap();
        assert!(!out2[0].moved && !out2[0].collided && out2[0].was_done);
        assert_eq!(w.agents[0].pos, Cell::new(1, 1));
    }

    #[test]
    fn done_agent_still_blocks_cell() {
        let map = GridMap::empty(3, 3);
        let mut w = world_2x1_agents(&[(0, 0), (2, 1)], &[(1, 1), (0, 1)], &map);
        w.step(&[Action::SouthEast, Action::Wait], &[]).unwrap();
        assert!(w.agents[0].done);
        let out = w.step(&[Action::Wait, Action::West], &[]).unwrap();
        assert!(out[1].collided);
        assert_eq!(w.agents[1].pos, Cell::new(2, 1));
    }

    #[test]
    fn oscillation_flag_on_return_move() {
        let map = GridMap::empty(4, 1);
        let mut w = world_2x1_agents(&[(0, 0)], &[(3, 0)], &map);
        w.step(&[Action::East], &[]).unwrap();
        let out = w.step(&[Action::West], &[]).unwrap();
        assert!(out[0].moved && out[0].oscillated);
        // Waiting does not disturb prev_pos: the next return still counts.
        w.step(&[Action::Wait], &[]).unwrap();
        let out = w.step(&[Action::East], &[]).unwrap();
        assert!(out[0].oscillated);
    }

    #[test]
    fn wrong_action_count_is_rejected() {
        let map = GridMap::empty(3, 3);
        let mut w = world_2x1_agents(&[(0, 0)], &[(2, 2)], &map);
        assert!(matches!(w.step(&[], &[]), Err(GridError::ActionCount { .. })));
    }

    #[test]
    fn scenario_file_round_trip() {
        let map = GridMap::empty(8, 8);
        let w = WorldState::spawn_scenario(&map, 2, 3, Some(5.0), 11).unwrap();
        let sc = w.to_scenario();
        let json = serde_json::to_string(&sc).unwrap();
        let back = WorldState::from_scenario(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.agents, w.agents);
        assert_eq!(back.obstacles, w.obstacles);
        assert_eq!(back.map, w.map);
    }
}
