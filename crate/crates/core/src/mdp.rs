//! Finite goal-conditioned MDPs, the grid-world builders, and one-step
//! simulation.
//!
//! Every model carries a single absorbing state (always the last index). For
//! each goal `g`, the slice `P(. | s, a, g)` sends `g` and the absorbing state
//! to the absorbing state with probability one, so an episode ends as soon as
//! its goal is entered.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::rng::SimRng;

/// Row-stochasticity tolerance for every transition slice.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Successor list: `(next_state, probability)` pairs with positive mass.
pub type Outcomes = Vec<(usize, f64)>;

/// Cell coordinates `(row, col)`. Row 0 is the bottom row of the grid.
pub type Cell = (usize, usize);

/// Grid actions, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    Up = 0,
    Down = 1,
    Right = 2,
    Left = 3,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Right, Move::Left];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Geometry of a grid-backed MDP, kept so cells and indices can be mapped
/// back and forth after construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    pub wrap: bool,
}

impl GridLayout {
    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.0 * self.width + cell.1
    }

    pub fn cell(&self, index: usize) -> Cell {
        (index / self.width, index % self.width)
    }
}

/// A finite goal-conditioned MDP with goal-dependent transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularGoalMdp {
    n_states: usize,
    n_actions: usize,
    goals: Vec<usize>,
    goal_slot: Vec<Option<usize>>,
    /// Indexed by `(slot * n_states + s) * n_actions + a`.
    outcomes: Vec<Outcomes>,
    rho0: Vec<f64>,
    sigma: Vec<f64>,
    gamma: f64,
    layout: Option<GridLayout>,
}

impl TabularGoalMdp {
    /// Build from fully specified goal-conditioned dynamics.
    ///
    /// `outcomes` is indexed by `(slot * n_states + s) * n_actions + a` where
    /// `slot` is the position of the goal in `goals`. The last state is the
    /// absorbing state. All invariants are checked here.
    pub fn from_goal_dynamics(
        n_states: usize,
        n_actions: usize,
        goals: Vec<usize>,
        outcomes: Vec<Outcomes>,
        rho0: Vec<f64>,
        sigma: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least one regular state plus the absorbing state, got {n_states}"
            )));
        }
        if n_actions == 0 {
            return Err(Error::InvalidModel("no actions".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidModel(format!("gamma {gamma} outside [0, 1)")));
        }
        let absorbing = n_states - 1;
        if goals.is_empty() {
            return Err(Error::InvalidModel("empty goal set".into()));
        }
        let mut goal_slot = vec![None; n_states];
        for (slot, &g) in goals.iter().enumerate() {
            check_index("goal", g, absorbing)?;
            if goal_slot[g].replace(slot).is_some() {
                return Err(Error::InvalidModel(format!("goal {g} listed twice")));
            }
        }
        if outcomes.len() != goals.len() * n_states * n_actions {
            return Err(Error::InvalidModel(format!(
                "expected {} transition rows, got {}",
                goals.len() * n_states * n_actions,
                outcomes.len()
            )));
        }
        check_distribution("rho0", &rho0, n_states)?;
        if rho0[absorbing] != 0.0 {
            return Err(Error::InvalidDistribution(
                "rho0 puts mass on the absorbing state".into(),
            ));
        }
        check_distribution("sigma", &sigma, goals.len())?;

        let mdp = TabularGoalMdp {
            n_states,
            n_actions,
            goals,
            goal_slot,
            outcomes,
            rho0,
            sigma,
            gamma,
            layout: None,
        };
        for slot in 0..mdp.goals.len() {
            let g = mdp.goals[slot];
            for s in 0..n_states {
                for a in 0..n_actions {
                    let row = &mdp.outcomes[mdp.row_index(slot, s, a)];
                    let mut total = 0.0;
                    for &(next, p) in row {
                        check_index("successor", next, n_states)?;
                        if p.is_nan() || p < 0.0 {
                            return Err(Error::InvalidDistribution(format!(
                                "negative or NaN probability at (s={s}, a={a}, g={g})"
                            )));
                        }
                        total += p;
                    }
                    if (total - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::InvalidDistribution(format!(
                            "P(.|s={s}, a={a}, g={g}) sums to {total}"
                        )));
                    }
                    if (s == g || s == absorbing) && !(row.len() == 1 && row[0].0 == absorbing) {
                        return Err(Error::InvalidModel(format!(
                            "state {s} must move to the absorbing state under goal {g}"
                        )));
                    }
                }
            }
        }
        Ok(mdp)
    }

    /// Build from goal-independent base dynamics over `n_regular` states.
    ///
    /// The absorbing state is appended as index `n_regular`, and each goal's
    /// slice overrides the goal's own rows. `base` is indexed by
    /// `s * n_actions + a` and may list a successor more than once.
    pub fn from_base_dynamics(
        n_regular: usize,
        n_actions: usize,
        base: &[Outcomes],
        goals: Vec<usize>,
        rho0_regular: &[f64],
        sigma: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if base.len() != n_regular * n_actions {
            return Err(Error::InvalidModel(format!(
                "expected {} base rows, got {}",
                n_regular * n_actions,
                base.len()
            )));
        }
        if rho0_regular.len() != n_regular {
            return Err(Error::InvalidDistribution(format!(
                "rho0 has length {}, expected {n_regular}",
                rho0_regular.len()
            )));
        }
        let n_states = n_regular + 1;
        let absorbing = n_regular;
        let mut outcomes = Vec::with_capacity(goals.len() * n_states * n_actions);
        for &g in &goals {
            for s in 0..n_states {
                for a in 0..n_actions {
                    if s == g || s == absorbing {
                        outcomes.push(vec![(absorbing, 1.0)]);
                    } else {
                        outcomes.push(merge_outcomes(&base[s * n_actions + a]));
                    }
                }
            }
        }
        let mut rho0 = rho0_regular.to_vec();
        rho0.push(0.0);
        Self::from_goal_dynamics(n_states, n_actions, goals, outcomes, rho0, sigma, gamma)
    }

    #[inline]
    fn row_index(&self, slot: usize, s: usize, a: usize) -> usize {
        (slot * self.n_states + s) * self.n_actions + a
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_goals(&self) -> usize {
        self.goals.len()
    }

    /// Index of the shared absorbing state.
    pub fn absorbing(&self) -> usize {
        self.n_states - 1
    }

    pub fn goals(&self) -> &[usize] {
        &self.goals
    }

    /// Position of `state` in the goal list, if it is a goal.
    pub fn goal_slot(&self, state: usize) -> Option<usize> {
        self.goal_slot.get(state).copied().flatten()
    }

    pub(crate) fn require_goal_slot(&self, goal: usize) -> Result<usize> {
        check_index("goal", goal, self.n_states)?;
        self.goal_slot(goal)
            .ok_or_else(|| Error::InvalidArgument(format!("state {goal} is not in the goal set")))
    }

    /// Successors of `(s, a)` under the goal in `slot`.
    pub fn outcomes(&self, slot: usize, s: usize, a: usize) -> &[(usize, f64)] {
        &self.outcomes[self.row_index(slot, s, a)]
    }

    /// `P(next | s, a, goal)` for a goal given by state index.
    pub fn prob(&self, goal: usize, s: usize, a: usize, next: usize) -> Result<f64> {
        let slot = self.require_goal_slot(goal)?;
        check_index("state", s, self.n_states)?;
        check_index("action", a, self.n_actions)?;
        Ok(self
            .outcomes(slot, s, a)
            .iter()
            .filter(|(n, _)| *n == next)
            .map(|(_, p)| p)
            .sum())
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    /// Goal distribution, aligned with `goals()`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidModel(format!("gamma {gamma} outside [0, 1)")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Replace the start and goal distributions, re-checking both.
    pub fn with_distributions(mut self, rho0: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        check_distribution("rho0", &rho0, self.n_states)?;
        if rho0[self.absorbing()] != 0.0 {
            return Err(Error::InvalidDistribution(
                "rho0 puts mass on the absorbing state".into(),
            ));
        }
        check_distribution("sigma", &sigma, self.goals.len())?;
        self.rho0 = rho0;
        self.sigma = sigma;
        Ok(self)
    }

    pub fn layout(&self) -> Option<&GridLayout> {
        self.layout.as_ref()
    }

    /// True when every transition slice has a single successor.
    pub fn is_deterministic(&self) -> bool {
        self.outcomes.iter().all(|row| row.len() == 1)
    }

    /// Sample `s' ~ P(. | s, a, goal)`. Returns `(s', s' == goal)`.
    pub fn step(&self, s: usize, a: usize, goal: usize, rng: &mut SimRng) -> Result<(usize, bool)> {
        let slot = self.require_goal_slot(goal)?;
        check_index("state", s, self.n_states)?;
        check_index("action", a, self.n_actions)?;
        let row = self.outcomes(slot, s, a);
        let next = if row.len() == 1 {
            row[0].0
        } else {
            let weights: Vec<f64> = row.iter().map(|&(_, p)| p).collect();
            row[rng.categorical(&weights)].0
        };
        Ok((next, next == goal))
    }

    /// Draw an episode's goal from sigma and start state from rho0.
    pub fn sample_task(&self, rng: &mut SimRng) -> (usize, usize) {
        let goal = self.goals[rng.categorical(&self.sigma)];
        let start = rng.categorical(&self.rho0);
        (goal, start)
    }
}

fn check_distribution(name: &str, d: &[f64], len: usize) -> Result<()> {
    if d.len() != len {
        return Err(Error::InvalidDistribution(format!(
            "{name} has length {}, expected {len}",
            d.len()
        )));
    }
    if d.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{name} has a negative entry"
        )));
    }
    let total: f64 = d.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "{name} sums to {total}"
        )));
    }
    Ok(())
}

fn merge_outcomes(row: &[(usize, f64)]) -> Outcomes {
    let mut merged: Outcomes = Vec::with_capacity(row.len());
    for &(next, p) in row {
        if p == 0.0 {
            continue;
        }
        match merged.iter_mut().find(|(n, _)| *n == next) {
            Some(entry) => entry.1 += p,
            None => merged.push((next, p)),
        }
    }
    merged.sort_by_key(|&(n, _)| n);
    merged
}

/// A blocked directed move between two adjacent cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wall {
    pub from: Cell,
    pub to: Cell,
}

/// Declarative description of a grid world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default)]
    pub wrap: bool,
    #[serde(default)]
    pub wind_columns: Vec<usize>,
    #[serde(default = "default_up_success")]
    pub wind_up_success: f64,
    #[serde(default = "default_side_slip")]
    pub wind_side_slip: f64,
    pub start_cell: Cell,
    pub goal_cell: Cell,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_up_success() -> f64 {
    0.6
}

fn default_side_slip() -> f64 {
    0.4
}

fn default_gamma() -> f64 {
    0.99
}

impl GridSpec {
    /// Block movement in both directions between two adjacent cells.
    pub fn add_wall_between(&mut self, a: Cell, b: Cell) {
        self.walls.push(Wall { from: a, to: b });
        self.walls.push(Wall { from: b, to: a });
    }

    fn layout(&self) -> GridLayout {
        GridLayout {
            width: self.width,
            height: self.height,
            wrap: self.wrap,
        }
    }

    /// Deterministic single move; blocked and (unwrapped) edge moves stay put.
    fn shift(&self, cell: Cell, mv: Move) -> Cell {
        let (r, c) = cell;
        let target = match mv {
            Move::Up if r + 1 < self.height => Some((r + 1, c)),
            Move::Up if self.wrap => Some((0, c)),
            Move::Down if r > 0 => Some((r - 1, c)),
            Move::Down if self.wrap => Some((self.height - 1, c)),
            Move::Right if c + 1 < self.width => Some((r, c + 1)),
            Move::Right if self.wrap => Some((r, 0)),
            Move::Left if c > 0 => Some((r, c - 1)),
            Move::Left if self.wrap => Some((r, self.width - 1)),
            _ => None,
        };
        match target {
            Some(t) if !self.walls.iter().any(|w| w.from == cell && w.to == t) => t,
            _ => cell,
        }
    }

    fn cell_outcomes(&self, cell: Cell, mv: Move) -> Vec<(Cell, f64)> {
        let intended = self.shift(cell, mv);
        if !self.wind_columns.contains(&cell.1) {
            return vec![(intended, 1.0)];
        }
        match mv {
            Move::Down => vec![(intended, 1.0)],
            Move::Up => vec![
                (intended, self.wind_up_success),
                (cell, 1.0 - self.wind_up_success),
            ],
            Move::Right | Move::Left => vec![
                (intended, 1.0 - self.wind_side_slip),
                (self.shift(intended, Move::Down), self.wind_side_slip),
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        let bad =
            |key: &'static str, reason: alloc::string::String| Err(Error::Config { key, reason });
        if self.width == 0 || self.height == 0 {
            return bad(
                "width",
                format!("grid {}x{} is empty", self.width, self.height),
            );
        }
        let inside = |c: Cell| c.0 < self.height && c.1 < self.width;
        if !inside(self.start_cell) {
            return bad(
                "start_cell",
                format!("{:?} outside the grid", self.start_cell),
            );
        }
        if !inside(self.goal_cell) {
            return bad(
                "goal_cell",
                format!("{:?} outside the grid", self.goal_cell),
            );
        }
        if self.start_cell == self.goal_cell {
            return bad("start_cell", "start equals goal".into());
        }
        if let Some(c) = self.wind_columns.iter().find(|&&c| c >= self.width) {
            return bad("wind_columns", format!("column {c} outside the grid"));
        }
        for (key, p) in [
            ("wind_up_success", self.wind_up_success),
            ("wind_side_slip", self.wind_side_slip),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(key, format!("{p} is not a probability"));
            }
        }
        if let Some(w) = self.walls.iter().find(|w| !inside(w.from) || !inside(w.to)) {
            return bad(
                "walls",
                format!("{:?} -> {:?} outside the grid", w.from, w.to),
            );
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", format!("{} outside [0, 1)", self.gamma));
        }
        Ok(())
    }

    /// Compile into a tabular MDP. Every cell is a goal (so hindsight goals
    /// are representable); sigma and rho0 are point masses on the configured
    /// goal and start cells.
    pub fn build(&self) -> Result<TabularGoalMdp> {
        self.validate()?;
        let layout = self.layout();
        let n = layout.n_cells();
        let mut base = Vec::with_capacity(n * Move::ALL.len());
        for s in 0..n {
            let cell = layout.cell(s);
            for mv in Move::ALL {
                base.push(
                    self.cell_outcomes(cell, mv)
                        .into_iter()
                        .map(|(c, p)| (layout.index(c), p))
                        .collect::<Outcomes>(),
                );
            }
        }
        let goals: Vec<usize> = (0..n).collect();
        let mut sigma = vec![0.0; n];
        sigma[layout.index(self.goal_cell)] = 1.0;
        let mut rho0 = vec![0.0; n];
        rho0[layout.index(self.start_cell)] = 1.0;
        let mut mdp = TabularGoalMdp::from_base_dynamics(
            n,
            Move::ALL.len(),
            &base,
            goals,
            &rho0,
            sigma,
            self.gamma,
        )?;
        mdp.layout = Some(layout);
        Ok(mdp)
    }

    pub fn start_state(&self) -> usize {
        self.layout().index(self.start_cell)
    }

    pub fn goal_state(&self) -> usize {
        self.layout().index(self.goal_cell)
    }

    /// 10x10 grid with a walled room in the top-right corner (rows and
    /// columns 5-9). The single doorway is the top cell of the room's left
    /// wall, so an agent starting bottom-left has to walk around the room.
    pub fn room() -> Self {
        let mut spec = GridSpec {
            width: 10,
            height: 10,
            walls: Vec::new(),
            wrap: false,
            wind_columns: Vec::new(),
            wind_up_success: default_up_success(),
            wind_side_slip: default_side_slip(),
            start_cell: (0, 0),
            goal_cell: (7, 7),
            gamma: default_gamma(),
        };
        for r in 5..10 {
            if r != ROOM_DOOR_ROW {
                spec.add_wall_between((r, 4), (r, 5));
            }
        }
        for c in 5..10 {
            spec.add_wall_between((4, c), (5, c));
        }
        spec
    }

    /// The room grid with wind blowing down over the last six columns.
    pub fn windy() -> Self {
        GridSpec {
            wind_columns: (4..10).collect(),
            ..Self::room()
        }
    }

    /// Open 10x10 torus, start (2,2), goal (7,7).
    pub fn toroidal() -> Self {
        GridSpec {
            width: 10,
            height: 10,
            walls: Vec::new(),
            wrap: true,
            wind_columns: Vec::new(),
            wind_up_success: default_up_success(),
            wind_side_slip: default_side_slip(),
            start_cell: (2, 2),
            goal_cell: (7, 7),
            gamma: default_gamma(),
        }
    }
}

/// Row of the doorway in the room grid's left wall.
pub const ROOM_DOOR_ROW: usize = 9;

pub fn build_room_grid() -> TabularGoalMdp {
    GridSpec::room().build().expect("room grid is valid")
}

pub fn build_windy_grid() -> TabularGoalMdp {
    GridSpec::windy().build().expect("windy grid is valid")
}

pub fn build_toroidal_grid() -> TabularGoalMdp {
    GridSpec::toroidal()
        .build()
        .expect("toroidal grid is valid")
}

/// One stored transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub g: usize,
    pub goal_reached: bool,
    pub episode_over: bool,
}

impl TransitionRecord {
    /// `goal_reached` is derived from `s_next == g`.
    pub fn new(s: usize, a: usize, s_next: usize, g: usize, episode_over: bool) -> Self {
        TransitionRecord {
            s,
            a,
            s_next,
            g,
            goal_reached: s_next == g,
            episode_over,
        }
    }

    /// Same transition aimed at another goal.
    pub fn with_goal(&self, g: usize) -> Self {
        TransitionRecord::new(self.s, self.a, self.s_next, g, self.episode_over)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell_state(mdp: &TabularGoalMdp, c: Cell) -> usize {
        mdp.layout().unwrap().index(c)
    }

    #[test]
    fn room_grid_shape() {
        let mdp = build_room_grid();
        assert_eq!(mdp.n_states(), 101);
        assert_eq!(mdp.n_actions(), 4);
        assert_eq!(mdp.absorbing(), 100);
        assert!(mdp.is_deterministic());
    }

    #[test]
    fn wall_move_is_self_transition() {
        let mdp = build_room_grid();
        let g = cell_state(&mdp, (7, 7));
        let s = cell_state(&mdp, (6, 4));
        assert_eq!(mdp.prob(g, s, Move::Right.index(), s).unwrap(), 1.0);
        let s = cell_state(&mdp, (4, 6));
        assert_eq!(mdp.prob(g, s, Move::Up.index(), s).unwrap(), 1.0);
        // the doorway is open
        let door = cell_state(&mdp, (ROOM_DOOR_ROW, 4));
        let inside = cell_state(&mdp, (ROOM_DOOR_ROW, 5));
        assert_eq!(mdp.prob(g, door, Move::Right.index(), inside).unwrap(), 1.0);
    }

    #[test]
    fn edge_move_is_self_transition() {
        let mdp = build_room_grid();
        let g = cell_state(&mdp, (7, 7));
        assert_eq!(mdp.prob(g, 0, Move::Down.index(), 0).unwrap(), 1.0);
        assert_eq!(mdp.prob(g, 0, Move::Left.index(), 0).unwrap(), 1.0);
    }

    #[test]
    fn windy_probabilities() {
        let mdp = build_windy_grid();
        let g = cell_state(&mdp, (7, 7));
        let s = cell_state(&mdp, (2, 6));
        let up = cell_state(&mdp, (3, 6));
        assert!((mdp.prob(g, s, Move::Up.index(), up).unwrap() - 0.6).abs() < 1e-15);
        assert!((mdp.prob(g, s, Move::Up.index(), s).unwrap() - 0.4).abs() < 1e-15);
        let east = cell_state(&mdp, (2, 7));
        let slip = cell_state(&mdp, (1, 7));
        assert!((mdp.prob(g, s, Move::Right.index(), east).unwrap() - 0.6).abs() < 1e-15);
        assert!((mdp.prob(g, s, Move::Right.index(), slip).unwrap() - 0.4).abs() < 1e-15);
        let down = cell_state(&mdp, (1, 6));
        assert_eq!(mdp.prob(g, s, Move::Down.index(), down).unwrap(), 1.0);
        // calm column stays deterministic
        let calm = cell_state(&mdp, (2, 2));
        assert_eq!(mdp.outcomes(g, calm, Move::Up.index()).len(), 1);
    }

    #[test]
    fn torus_wraps() {
        let mdp = build_toroidal_grid();
        let g = cell_state(&mdp, (7, 7));
        for c in 0..10 {
            let s = cell_state(&mdp, (0, c));
            let below = cell_state(&mdp, (9, c));
            assert_eq!(mdp.prob(g, s, Move::Down.index(), below).unwrap(), 1.0);
        }
        let s = cell_state(&mdp, (4, 9));
        assert_eq!(
            mdp.prob(g, s, Move::Right.index(), cell_state(&mdp, (4, 0)))
                .unwrap(),
            1.0
        );
        // four distinct successors everywhere except at the goal
        for s in 0..100 {
            if s == g {
                continue;
            }
            let mut succ: Vec<usize> = (0..4).map(|a| mdp.outcomes(g, s, a)[0].0).collect();
            succ.sort();
            succ.dedup();
            assert_eq!(succ.len(), 4);
        }
    }

    #[test]
    fn absorbing_semantics() {
        let mdp = build_room_grid();
        let mut rng = SimRng::seed_from_u64(3);
        let g = cell_state(&mdp, (7, 7));
        for a in 0..4 {
            assert_eq!(
                mdp.step(g, a, g, &mut rng).unwrap(),
                (mdp.absorbing(), false)
            );
            assert_eq!(
                mdp.step(mdp.absorbing(), a, g, &mut rng).unwrap(),
                (mdp.absorbing(), false)
            );
        }
    }

    #[test]
    fn step_rejects_bad_indices() {
        let mdp = build_room_grid();
        let mut rng = SimRng::seed_from_u64(3);
        assert!(matches!(
            mdp.step(500, 0, 77, &mut rng),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            mdp.step(0, 9, 77, &mut rng),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(mdp.step(0, 0, 100, &mut rng).is_err());
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let base = vec![vec![(0, 0.5)], vec![(1, 1.0)]];
        let err =
            TabularGoalMdp::from_base_dynamics(2, 1, &base, vec![1], &[1.0, 0.0], vec![1.0], 0.9);
        assert!(matches!(err, Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn rejects_absorbing_start_mass() {
        let base = vec![vec![(1, 1.0)], vec![(1, 1.0)]];
        let mdp =
            TabularGoalMdp::from_base_dynamics(2, 1, &base, vec![1], &[1.0, 0.0], vec![1.0], 0.9)
                .unwrap();
        assert!(mdp
            .with_distributions(vec![0.0, 0.0, 1.0], vec![1.0])
            .is_err());
    }

    #[test]
    fn record_goal_flag() {
        let r = TransitionRecord::new(1, 0, 2, 2, false);
        assert!(r.goal_reached);
        assert!(!r.with_goal(5).goal_reached);
    }
}
