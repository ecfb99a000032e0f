use crate::error::{Error, Result};
use crate::numkit::SeededRng;

/// Binary sum tree over a fixed number of leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        let leaves = capacity.next_power_of_two();
        Self {
            capacity,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn leaves(&self) -> usize {
        self.nodes.len() / 2
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves() + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        assert!(i < self.capacity, "leaf {i} outside capacity {}", self.capacity);
        let mut node = self.leaves() + i;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`, for `mass` in `[0, total)`.
    /// Zero-valued leaves are never returned.
    pub fn find(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.leaves() {
            let left = 2 * node;
            if mass < self.nodes[left] || self.nodes[left + 1] <= 0.0 {
                node = left;
            } else {
                mass -= self.nodes[left];
                node = left + 1;
            }
        }
        (node - self.leaves()).min(self.capacity - 1)
    }
}

/// One stored episode, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub n_agents: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    /// `(len + 1) · n_agents · obs_dim` values, step-major then agent-major.
    pub obs: Vec<f64>,
    /// `(len + 1) · state_dim` values.
    pub states: Vec<f64>,
    /// `len · n_agents` actions.
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// True only where the episode hit a terminal state.
    pub terminated: Vec<bool>,
}

impl Episode {
    pub fn new(n_agents: usize, obs_dim: usize, state_dim: usize) -> Self {
        Self {
            n_agents,
            obs_dim,
            state_dim,
            obs: Vec::new(),
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            terminated: Vec::new(),
        }
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Appends the observation and state at the current step.
    pub fn push_observation(&mut self, joint_obs: &[Vec<f64>], state: &[f64]) -> Result<()> {
        if joint_obs.len() != self.n_agents || state.len() != self.state_dim {
            return Err(Error::shape("episode observation", self.n_agents, joint_obs.len()));
        }
        for o in joint_obs {
            if o.len() != self.obs_dim {
                return Err(Error::shape("episode local observation", self.obs_dim, o.len()));
            }
            self.obs.extend_from_slice(o);
        }
        self.states.extend_from_slice(state);
        Ok(())
    }

    /// Appends the transition taken from the latest observation.
    pub fn push_transition(&mut self, joint_action: &[usize], reward: f64, terminated: bool) -> Result<()> {
        if joint_action.len() != self.n_agents {
            return Err(Error::shape("episode joint action", self.n_agents, joint_action.len()));
        }
        if !reward.is_finite() {
            return Err(Error::NonFinite(format!("episode reward {reward}")));
        }
        self.actions.extend_from_slice(joint_action);
        self.rewards.push(reward);
        self.terminated.push(terminated);
        Ok(())
    }

    pub fn obs(&self, t: usize, agent: usize) -> &[f64] {
        let start = (t * self.n_agents + agent) * self.obs_dim;
        &self.obs[start..start + self.obs_dim]
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    pub fn action(&self, t: usize, agent: usize) -> usize {
        self.actions[t * self.n_agents + agent]
    }

    /// Observations and states must cover `len + 1` steps.
    pub fn is_complete(&self) -> bool {
        let steps = self.len() + 1;
        self.obs.len() == steps * self.n_agents * self.obs_dim && self.states.len() == steps * self.state_dim
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayConfig {
    /// Capacity in episodes.
    pub capacity: usize,
    pub alpha: f64,
    pub beta_start: f64,
    pub priority_eps: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            capacity: 5000,
            alpha: 0.6,
            beta_start: 0.4,
            priority_eps: 1e-6,
        }
    }
}

/// Sampled episode slots with their importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Whole-episode replay with proportional priorities.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    config: ReplayConfig,
    episodes: Vec<Episode>,
    tree: SumTree,
    next: usize,
    max_priority: f64,
    beta: f64,
}

impl ReplayBuffer {
    pub fn new(config: ReplayConfig) -> Result<Self> {
        if config.capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        if !(config.alpha >= 0.0) || !(0.0..=1.0).contains(&config.beta_start) || !(config.priority_eps > 0.0) {
            return Err(Error::Config("replay needs alpha >= 0, beta in [0, 1], eps > 0".into()));
        }
        Ok(Self {
            tree: SumTree::new(config.capacity),
            episodes: Vec::with_capacity(config.capacity.min(1 << 12)),
            next: 0,
            max_priority: 1.0,
            beta: config.beta_start,
            config,
        })
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Linear anneal of the importance exponent towards 1; `progress` in `[0, 1]`.
    pub fn anneal_beta(&mut self, progress: f64) {
        let p = progress.clamp(0.0, 1.0);
        self.beta = self.config.beta_start + (1.0 - self.config.beta_start) * p;
    }

    pub fn episode(&self, slot: usize) -> &Episode {
        &self.episodes[slot]
    }

    /// Stored priority of a slot (before the `α` exponent).
    pub fn priority(&self, slot: usize) -> f64 {
        self.tree.get(slot).powf(1.0 / self.config.alpha.max(f64::MIN_POSITIVE))
    }

    /// `p^α` mass of a slot, as held by the tree.
    pub fn mass(&self, slot: usize) -> f64 {
        self.tree.get(slot)
    }

    pub fn total_mass(&self) -> f64 {
        self.tree.total()
    }

    pub fn probability(&self, slot: usize) -> f64 {
        self.tree.get(slot) / self.tree.total()
    }

    /// Stores an episode with the largest priority seen so far. Returns its slot.
    pub fn add(&mut self, episode: Episode) -> Result<usize> {
        if episode.is_empty() || !episode.is_complete() {
            return Err(Error::Domain("cannot store an empty or incomplete episode".into()));
        }
        let slot = self.next;
        if slot == self.episodes.len() {
            self.episodes.push(episode);
        } else {
            self.episodes[slot] = episode;
        }
        self.tree.set(slot, self.max_priority.powf(self.config.alpha));
        self.next = (self.next + 1) % self.config.capacity;
        Ok(slot)
    }

    pub fn update_priorities(&mut self, slots: &[usize], priorities: &[f64]) -> Result<()> {
        if slots.len() != priorities.len() {
            return Err(Error::shape("priority update", slots.len(), priorities.len()));
        }
        for (&s, &p) in slots.iter().zip(priorities) {
            if s >= self.episodes.len() {
                return Err(Error::Domain(format!("replay slot {s} is empty")));
            }
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::NonFinite(format!("priority {p}")));
            }
            self.max_priority = self.max_priority.max(p);
            self.tree.set(s, p.powf(self.config.alpha));
        }
        Ok(())
    }

    /// Independent proportional draws with normalised importance weights
    /// `(N·P(i))^{-β} / max_j (N·P(j))^{-β}`, the max taken over the buffer.
    pub fn sample(&self, batch_size: usize, rng: &mut SeededRng) -> Result<SampledBatch> {
        if self.episodes.len() < batch_size.max(1) {
            return Err(Error::EmptyReplay {
                have: self.episodes.len(),
                want: batch_size.max(1),
            });
        }
        let total = self.tree.total();
        let n = self.episodes.len() as f64;
        let min_mass = (0..self.episodes.len())
            .map(|i| self.tree.get(i))
            .fold(f64::INFINITY, f64::min);
        let max_w = (n * min_mass / total).powf(-self.beta);
        let mut out = SampledBatch {
            indices: Vec::with_capacity(batch_size),
            weights: Vec::with_capacity(batch_size),
            probabilities: Vec::with_capacity(batch_size),
        };
        for _ in 0..batch_size {
            let slot = self.tree.find(rng.uniform() * total);
            let p = self.tree.get(slot) / total;
            out.indices.push(slot);
            out.probabilities.push(p);
            out.weights.push((n * p).powf(-self.beta) / max_w);
        }
        Ok(out)
    }
}
