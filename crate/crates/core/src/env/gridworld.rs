use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_actions, Env, EnvReset, EnvStep, JointAction};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right, GridAction::Stay];

    fn delta(self) -> (i64, i64) {
        match self {
            GridAction::Up => (0, -1),
            GridAction::Down => (0, 1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
            GridAction::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub agents: usize,
    /// Goal cells as `(x, y)`.
    pub goals: Vec<(usize, usize)>,
    pub horizon: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { width: 4, height: 4, agents: 2, goals: vec![(0, 3), (3, 0)], horizon: 25 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("env.width", "grid extents must be positive"));
        }
        if self.agents < 2 {
            return Err(Error::invalid("env.agents", "need at least 2 agents"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("env.horizon", "horizon must be positive"));
        }
        if self.goals.is_empty() {
            return Err(Error::invalid("env.goals", "need at least one goal"));
        }
        if let Some(g) = self.goals.iter().find(|(x, y)| *x >= self.width || *y >= self.height) {
            return Err(Error::invalid("env.goals", format!("goal {g:?} outside the grid")));
        }
        Ok(())
    }
}

/// Fully observable cooperative gridworld.
///
/// Actions per agent: `0 up, 1 down, 2 left, 3 right, 4 stay`; moves that
/// leave the grid are unavailable. Every step pays
/// `(number of goal cells occupied by at least one agent) − 0.01`; the
/// episode ends after `horizon` steps.
///
/// State layout (width `2·agents + 2·goals`): normalized `(x, y)` of every
/// agent in index order, then normalized `(x, y)` of every goal, where
/// normalization divides by `width − 1` and `height − 1` (1 for unit
/// extents). Observation of agent `i` is the state followed by a one-hot of
/// `i` (width `state + agents`).
#[derive(Debug, Clone)]
pub struct CoopGridworld {
    config: GridConfig,
    positions: Vec<(usize, usize)>,
    t: usize,
}

pub const STEP_PENALTY: f64 = 0.01;

impl CoopGridworld {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        let positions = vec![(0, 0); config.agents];
        Ok(Self { config, positions, t: 0 })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    fn state<T: Real>(&self) -> Vec<T> {
        let sx = (self.config.width.max(2) - 1) as f64;
        let sy = (self.config.height.max(2) - 1) as f64;
        self.positions
            .iter()
            .chain(&self.config.goals)
            .flat_map(|&(x, y)| [T::lit(x as f64 / sx), T::lit(y as f64 / sy)])
            .collect()
    }

    fn observations<T: Real>(&self, state: &[T]) -> Vec<Vec<T>> {
        let n = self.config.agents;
        (0..n)
            .map(|i| {
                let mut o = state.to_vec();
                o.extend((0..n).map(|j| if i == j { T::one() } else { T::zero() }));
                o
            })
            .collect()
    }

    fn avail(&self) -> Vec<Vec<bool>> {
        self.positions
            .iter()
            .map(|&(x, y)| {
                GridAction::ALL
                    .iter()
                    .map(|a| {
                        let (dx, dy) = a.delta();
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        nx >= 0 && ny >= 0 && (nx as usize) < self.config.width && (ny as usize) < self.config.height
                    })
                    .collect()
            })
            .collect()
    }

    fn covered_goals(&self) -> usize {
        self.config.goals.iter().filter(|g| self.positions.contains(g)).count()
    }
}

impl<T: Real> Env<T> for CoopGridworld {
    fn n_agents(&self) -> usize {
        self.config.agents
    }

    fn n_actions(&self) -> usize {
        GridAction::ALL.len()
    }

    fn obs_width(&self) -> usize {
        2 * self.config.agents + 2 * self.config.goals.len() + self.config.agents
    }

    fn state_width(&self) -> usize {
        2 * self.config.agents + 2 * self.config.goals.len()
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> EnvReset<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (self.config.width, self.config.height);
        for p in self.positions.iter_mut() {
            *p = (rng.random_range(0..w), rng.random_range(0..h));
        }
        self.t = 0;
        let state = self.state::<T>();
        EnvReset { obs: self.observations(&state), state, avail_actions: self.avail() }
    }

    fn step(&mut self, actions: &JointAction) -> Result<EnvStep<T>> {
        if self.t >= self.config.horizon {
            return Err(Error::StepAfterTerminal);
        }
        check_actions(actions, &self.avail())?;
        for (p, &a) in self.positions.iter_mut().zip(actions.iter()) {
            let (dx, dy) = GridAction::ALL[a].delta();
            *p = ((p.0 as i64 + dx) as usize, (p.1 as i64 + dy) as usize);
        }
        self.t += 1;
        let reward = T::lit(self.covered_goals() as f64 - STEP_PENALTY);
        let state = self.state::<T>();
        Ok(EnvStep {
            next_obs: self.observations(&state),
            next_state: state,
            reward,
            terminal: self.t >= self.config.horizon,
            avail_actions: self.avail(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> CoopGridworld {
        CoopGridworld::new(GridConfig::default()).unwrap()
    }

    #[test]
    fn reset_is_seed_deterministic() {
        let mut a = grid();
        let mut b = grid();
        let ra: EnvReset<f64> = a.reset(42);
        let rb: EnvReset<f64> = b.reset(42);
        assert_eq!(a.positions(), b.positions());
        assert_eq!(ra, rb);
    }

    #[test]
    fn state_layout_for_4x4_two_agents() {
        let mut g = grid();
        let r: EnvReset<f64> = g.reset(3);
        assert_eq!(r.state.len(), 2 * 2 * 2);
        let (x0, y0) = g.positions()[0];
        let (x1, y1) = g.positions()[1];
        let hand = vec![x0 as f64 / 3.0, y0 as f64 / 3.0, x1 as f64 / 3.0, y1 as f64 / 3.0, 0.0, 1.0, 1.0, 0.0];
        assert_eq!(r.state, hand);
        let mut o1 = hand.clone();
        o1.extend([0.0, 1.0]);
        assert_eq!(r.obs[1], o1);
        assert_eq!(Env::<f64>::obs_width(&g), 10);
    }

    #[test]
    fn walls_mask_moves_and_rewards_count_goals() {
        let mut g = grid();
        Env::<f64>::reset(&mut g, 0);
        g.positions = vec![(0, 2), (3, 1)];
        let avail = g.avail();
        // (0,2): left unavailable; stay always available
        assert_eq!(avail[0], vec![true, true, false, true, true]);
        let s: EnvStep<f64> = g.step(&JointAction(vec![1, 0])).unwrap();
        assert_eq!(g.positions(), &[(0, 3), (3, 0)]);
        assert!((s.reward - 1.99).abs() < 1e-12);
        let s: EnvStep<f64> = g.step(&JointAction(vec![4, 2])).unwrap();
        assert!((s.reward - 0.99).abs() < 1e-12);
        assert!(!s.terminal);
    }

    #[test]
    fn unavailable_action_rejected() {
        let mut g = grid();
        Env::<f64>::reset(&mut g, 0);
        g.positions = vec![(0, 0), (1, 1)];
        assert!(matches!(Env::<f64>::step(&mut g, &JointAction(vec![0, 4])), Err(Error::InvalidAction { .. })));
    }

    #[test]
    fn terminal_at_horizon_then_error() {
        let mut g = CoopGridworld::new(GridConfig { horizon: 3, ..GridConfig::default() }).unwrap();
        Env::<f64>::reset(&mut g, 1);
        let mut last = None;
        for _ in 0..3 {
            last = Some(Env::<f64>::step(&mut g, &JointAction(vec![4, 4])).unwrap());
        }
        assert!(last.unwrap().terminal);
        assert!(matches!(Env::<f64>::step(&mut g, &JointAction(vec![4, 4])), Err(Error::StepAfterTerminal)));
    }

    #[test]
    fn rejects_single_agent() {
        assert!(CoopGridworld::new(GridConfig { agents: 1, ..GridConfig::default() }).is_err());
    }
}
