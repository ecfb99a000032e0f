use crate::error::{Error, Result};
use crate::numkit::{Activation, Matrix, Mlp, SeededRng};

/// Per-agent Q-network shared by all agents.
///
/// Input layout: `[observation, one-hot agent id, one-hot last action]`.
/// The last-action block is all zeros on the first step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNet {
    mlp: Mlp,
    n_agents: usize,
    n_actions: usize,
    obs_dim: usize,
}

impl AgentNet {
    pub fn new(
        obs_dim: usize,
        n_agents: usize,
        n_actions: usize,
        hidden: &[usize],
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim + n_agents + n_actions];
        sizes.extend_from_slice(hidden);
        sizes.push(n_actions);
        let mlp = Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng)?;
        Self::from_mlp(mlp, obs_dim, n_agents, n_actions)
    }

    pub fn from_mlp(mlp: Mlp, obs_dim: usize, n_agents: usize, n_actions: usize) -> Result<Self> {
        if mlp.input_dim() != obs_dim + n_agents + n_actions {
            return Err(Error::shape("agent net input", obs_dim + n_agents + n_actions, mlp.input_dim()));
        }
        if mlp.output_dim() != n_actions {
            return Err(Error::shape("agent net output", n_actions, mlp.output_dim()));
        }
        Ok(Self {
            mlp,
            n_agents,
            n_actions,
            obs_dim,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    /// Writes the input row of `agent` into `row`.
    pub fn write_input(&self, row: &mut [f64], obs: &[f64], agent: usize, last_action: Option<usize>) {
        row.fill(0.0);
        row[..self.obs_dim].copy_from_slice(obs);
        row[self.obs_dim + agent] = 1.0;
        if let Some(a) = last_action {
            row[self.obs_dim + self.n_agents + a] = 1.0;
        }
    }

    /// One input row per agent.
    pub fn build_inputs(&self, joint_obs: &[Vec<f64>], last_actions: Option<&[usize]>) -> Result<Matrix> {
        if joint_obs.len() != self.n_agents {
            return Err(Error::shape("agent joint observation", self.n_agents, joint_obs.len()));
        }
        if let Some(la) = last_actions {
            if la.len() != self.n_agents {
                return Err(Error::shape("agent last actions", self.n_agents, la.len()));
            }
            if let Some(a) = la.iter().find(|a| **a >= self.n_actions) {
                return Err(Error::Domain(format!("last action {a} outside 0..{}", self.n_actions)));
            }
        }
        let mut x = Matrix::zeros(self.n_agents, self.input_dim());
        for (i, o) in joint_obs.iter().enumerate() {
            if o.len() != self.obs_dim {
                return Err(Error::shape("agent observation", self.obs_dim, o.len()));
            }
            self.write_input(x.row_mut(i), o, i, last_actions.map(|la| la[i]));
        }
        Ok(x)
    }

    /// Q-values, one row per agent.
    pub fn q_values(&self, joint_obs: &[Vec<f64>], last_actions: Option<&[usize]>) -> Result<Matrix> {
        self.mlp.predict_batch(&self.build_inputs(joint_obs, last_actions)?)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Decentralised ε-greedy: every agent flips its own coin.
pub fn select_actions(
    net: &AgentNet,
    joint_obs: &[Vec<f64>],
    last_actions: Option<&[usize]>,
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let q = net.q_values(joint_obs, last_actions)?;
    Ok((0..net.n_agents())
        .map(|i| {
            if epsilon > 0.0 && rng.uniform() < epsilon {
                rng.below(net.n_actions())
            } else {
                argmax(q.row(i))
            }
        })
        .collect())
}
