//! Seeded environment for an [`RmabInstance`].
//!
//! The reward collected at time `t` is `r(s_t)`, the state occupied when the
//! action is taken. Each arm samples its next state from its own RNG stream.

use rand::Rng;

use crate::error::{Result, RmabError};
use crate::model::{ActionVector, RmabInstance, StateVector};
use crate::rng::{arm_stream, StreamRng};

/// One `<s, a, r, s'>` tuple for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub arm: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// Times this tuple was emitted by the replay buffer.
    pub use_count: u64,
}

/// Anything that picks an action vector each round and may learn from the outcome.
pub trait Agent {
    fn act(&mut self, states: &StateVector, t: u64) -> Result<ActionVector>;

    /// Called after every environment step with that step's fresh experiences.
    fn learn(&mut self, _experiences: &[Experience], _t: u64) {}
}

impl<F> Agent for F
where
    F: FnMut(&StateVector, u64) -> ActionVector,
{
    fn act(&mut self, states: &StateVector, t: u64) -> Result<ActionVector> {
        Ok(self(states, t))
    }
}

/// Draws an index from a probability row using one uniform variate.
pub fn sample_categorical<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Applies `actions` in `states`, advancing each arm with its own stream.
///
/// Returns the next joint state, the per-arm rewards `r_i(s_i)`, and one fresh
/// experience per arm.
pub fn step(
    instance: &RmabInstance,
    states: &StateVector,
    actions: &ActionVector,
    arm_rngs: &mut [StreamRng],
) -> Result<(StateVector, Vec<f64>, Vec<Experience>)> {
    instance.check_states(states)?;
    let cost = instance.action_cost(actions)?;
    if !instance.is_feasible(actions)? {
        return Err(RmabError::Infeasible {
            cost,
            budget: instance.budget(),
        });
    }
    let n = instance.n_arms();
    let mut next = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    let mut exps = Vec::with_capacity(n);
    for (i, arm) in instance.arms().iter().enumerate() {
        let (s, a) = (states.0[i], actions.0[i]);
        let s2 = sample_categorical(arm.row(s, a), &mut arm_rngs[i]);
        let r = arm.reward(s);
        next.push(s2);
        rewards.push(r);
        exps.push(Experience {
            arm: i,
            state: s,
            action: a,
            reward: r,
            next_state: s2,
            use_count: 0,
        });
    }
    Ok((StateVector(next), rewards, exps))
}

/// Owns the per-arm streams and the current joint state of one run.
pub struct Simulator<'a> {
    instance: &'a RmabInstance,
    rngs: Vec<StreamRng>,
    states: StateVector,
}

impl<'a> Simulator<'a> {
    /// Starts every arm in a uniformly drawn state, taken from the arm's own stream.
    pub fn new(instance: &'a RmabInstance, seed: u64) -> Self {
        let mut rngs: Vec<StreamRng> = (0..instance.n_arms())
            .map(|i| arm_stream(seed, i))
            .collect();
        let states = instance
            .arms()
            .iter()
            .zip(rngs.iter_mut())
            .map(|(arm, rng)| rng.random_range(0..arm.n_states()))
            .collect();
        Self {
            instance,
            rngs,
            states: StateVector(states),
        }
    }

    pub fn with_states(instance: &'a RmabInstance, seed: u64, states: StateVector) -> Result<Self> {
        instance.check_states(&states)?;
        let rngs = (0..instance.n_arms())
            .map(|i| arm_stream(seed, i))
            .collect();
        Ok(Self {
            instance,
            rngs,
            states,
        })
    }

    pub fn states(&self) -> &StateVector {
        &self.states
    }

    pub fn instance(&self) -> &RmabInstance {
        self.instance
    }

    /// Advances one round; returns the per-arm rewards and experiences.
    pub fn step(&mut self, actions: &ActionVector) -> Result<(Vec<f64>, Vec<Experience>)> {
        let (next, rewards, exps) = step(self.instance, &self.states, actions, &mut self.rngs)?;
        self.states = next;
        Ok((rewards, exps))
    }
}

/// Everything that happened in one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateVector>,
    pub actions: Vec<ActionVector>,
    pub rewards: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Summed reward per round.
    pub fn instant_rewards(&self) -> Vec<f64> {
        self.rewards.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Drives `agent` for `horizon` rounds (t = 1..=horizon), calling `observe`
/// after each round with `(t, states, actions, rewards)`.
pub fn simulate<A, F>(
    instance: &RmabInstance,
    agent: &mut A,
    horizon: u64,
    seed: u64,
    mut observe: F,
) -> Result<()>
where
    A: Agent + ?Sized,
    F: FnMut(u64, &StateVector, &ActionVector, &[f64]),
{
    let mut sim = Simulator::new(instance, seed);
    for t in 1..=horizon {
        let s = sim.states().clone();
        let a = agent.act(&s, t)?;
        let (rewards, exps) = sim.step(&a)?;
        observe(t, &s, &a, &rewards);
        agent.learn(&exps, t);
    }
    Ok(())
}

/// Runs `agent` for `horizon >= 1` rounds and records the trajectory.
pub fn run_episode<A: Agent + ?Sized>(
    instance: &RmabInstance,
    agent: &mut A,
    horizon: u64,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(RmabError::Config("horizon must be >= 1".into()));
    }
    let mut traj = Trajectory::default();
    simulate(instance, agent, horizon, seed, |_, s, a, r| {
        traj.states.push(s.clone());
        traj.actions.push(a.clone());
        traj.rewards.push(r.to_vec());
    })?;
    Ok(traj)
}
